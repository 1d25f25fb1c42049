use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Parser, ValueEnum};

use specfence::bench::{self, BenchOptions};
use specfence::certificate::{self, check_certificate, export_certificate_noted, CheckError, Oracle, Verdict};
use specfence::encode::{encode_speculative, fence_sites, EncodeError, Placement, SpecMode, TransitionSystem};
use specfence::ir::{parse_program, Label, Program};
use specfence::pdr::{Engine, EngineOptions, PdrError, RuleSink, Verdict as PdrVerdict};
use specfence::repair::{repair_logged, Activation, RepairError, RepairOptions};
use specfence::threat::{compute_vinst_with, render_taint_map, taint_map, ThreatModel};

// Output that stops quietly when the reader goes away.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! outn {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

const EXIT_UNSAFE: u8 = 1;
const EXIT_INPUT: u8 = 2;
/// Resource limits, and engine failures that are not the input's fault.
const EXIT_RESOURCE: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    /// Prove the program leak-free or print a leaking execution.
    Verify,
    /// Activate fences until the program is leak-free.
    Repair,
    /// Print the taint facts and vulnerable instructions.
    Taint,
    /// Print the speculative transition system.
    Encode,
    /// Check a certificate file.
    CheckCert,
    /// Run every configuration on a directory of programs.
    Bench,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Log {
    Pdr,
}

#[derive(Debug, Parser)]
#[command(name = "specfence", version, about = "Verify and repair speculative-execution leaks")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Program file, certificate file, or corpus directory.
    path: PathBuf,
    #[arg(long, default_value = "strong")]
    threat: ThreatModel,
    /// Leave stores out of the vulnerable set.
    #[arg(long)]
    loads_only: bool,
    /// `unbounded` or `bounded:<k>`.
    #[arg(long, default_value = "unbounded")]
    mode: SpecMode,
    #[arg(long, default_value = "after-branch")]
    placement: Placement,
    #[arg(long, default_value = "nearest")]
    activation: Activation,
    #[arg(long, value_enum, default_value = "on")]
    incremental: Switch,
    /// Sites active from the start, e.g. `then@L0,before@L2`.
    #[arg(long, value_delimiter = ',')]
    fences: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seconds per run (per row for `bench`).
    #[arg(long, default_value_t = 120.0)]
    timeout: f64,
    /// Print every rule application to stderr.
    #[arg(long, value_enum)]
    log: Option<Log>,
    /// Certificate path for `verify`/`repair`, CSV path for `bench`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// External SMT solver reading SMT-LIB2 on stdin.
    #[arg(long)]
    solver_cmd: Option<String>,
    /// Window of the bounded bench configurations.
    #[arg(long, default_value_t = bench::DEFAULT_BOUND)]
    bound: u32,
    /// Directory for the certificates written by `bench`.
    #[arg(long)]
    cert_dir: Option<PathBuf>,
    /// Write 0 in the time_ms column so repeated runs compare equal.
    #[arg(long)]
    no_timing: bool,
    /// Run bench rows one after another.
    #[arg(long)]
    sequential: bool,
}

struct Failure {
    code: u8,
    msg: String,
}

fn fail(code: u8, msg: impl ToString) -> Failure {
    Failure { code, msg: msg.to_string() }
}

type Outcome = Result<u8, Failure>;

fn encode_code(e: &EncodeError) -> u8 {
    match e {
        EncodeError::Capacity { .. } => EXIT_RESOURCE,
        EncodeError::AlreadyActive(_) | EncodeError::UnknownSite(_) => EXIT_INPUT,
    }
}

impl Cli {
    fn deadline(&self) -> Option<Instant> {
        Instant::now().checked_add(Duration::try_from_secs_f64(self.timeout).ok()?)
    }

    fn active_fences(&self) -> BTreeSet<String> {
        self.fences.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
    }

    fn sink(&self) -> Option<RuleSink> {
        self.log.map(|_| -> RuleSink { Box::new(|ev| eprintln!("{ev}")) })
    }

    fn oracle(&self) -> Oracle {
        match &self.solver_cmd {
            Some(c) => Oracle::External(c.clone()),
            None => Oracle::Internal,
        }
    }

    fn notes(&self) -> Vec<String> {
        let mut n = vec![format!("threat {}", self.threat), format!("placement {}", self.placement)];
        if self.loads_only {
            n.push("loads-only".into());
        }
        if self.command == Command::Repair {
            n.push(format!("activation {}", self.activation));
            n.push(format!("incremental {}", if self.incremental == Switch::On { "on" } else { "off" }));
        }
        n.push(format!("seed {}", self.seed));
        n
    }

    fn cert_path(&self, p: &Program) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}{}", p.name, certificate::EXTENSION)))
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<(String, Program), Failure> {
    let text = read(path)?;
    let p = parse_program(&text).map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", path.display())))?;
    Ok((text, p))
}

fn encode(cli: &Cli, p: &Program) -> Result<TransitionSystem, Failure> {
    let vinst = compute_vinst_with(p, cli.threat, cli.loads_only);
    let sites = fence_sites(p, &vinst, cli.placement);
    encode_speculative(p, &vinst, &sites, cli.mode, &cli.active_fences()).map_err(|e| fail(encode_code(&e), e))
}

/// Source line of each instruction label.
fn label_lines(src: &str) -> Vec<(Label, usize)> {
    src.lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let t = line.trim_start();
            let (head, _) = t.split_once(':')?;
            let n: u32 = head.strip_prefix('L')?.trim().parse().ok()?;
            Some((Label(n), i + 1))
        })
        .collect()
}

fn write_checked_certificate(
    cli: &Cli,
    ts: &TransitionSystem,
    inv: &specfence::pdr::Invariant,
    path: &Path,
) -> Result<(), Failure> {
    let inv = certificate::minimize_invariant(ts, inv);
    let text = export_certificate_noted(ts, &inv, &cli.notes());
    match check_certificate(&text, &Oracle::Internal) {
        Ok(Verdict::Pass) => {}
        Ok(Verdict::Fail { condition, .. }) => {
            return Err(fail(EXIT_RESOURCE, format!("certificate self-check failed on {condition}")))
        }
        Err(e) => return Err(fail(EXIT_RESOURCE, format!("certificate self-check: {e}"))),
    }
    if cli.solver_cmd.is_some() {
        match check_certificate(&text, &cli.oracle()) {
            Ok(Verdict::Pass) => {}
            Ok(Verdict::Fail { condition, .. }) => {
                return Err(fail(EXIT_RESOURCE, format!("external solver rejects {condition}")))
            }
            Err(e) => return Err(fail(EXIT_RESOURCE, e)),
        }
    }
    fs::write(path, text).map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn cmd_verify(cli: &Cli) -> Outcome {
    let (_, p) = load(&cli.path)?;
    let ts = encode(cli, &p)?;
    let opts = EngineOptions { seed: cli.seed, deadline: cli.deadline(), ..Default::default() };
    let mut engine = match Engine::new(&ts, opts) {
        Ok(e) => e,
        Err(PdrError::RequireViolated) => {
            out!("UNSAFE\nan initial state is bad");
            return Ok(EXIT_UNSAFE);
        }
        Err(e) => return Err(fail(EXIT_RESOURCE, e)),
    };
    engine.set_sink(cli.sink());
    match engine.run().map_err(|e| fail(EXIT_RESOURCE, e))? {
        PdrVerdict::Safe(inv) => {
            let path = cli.cert_path(&p);
            write_checked_certificate(cli, &ts, &inv, &path)?;
            out!("SAFE");
            out!("certificate {}", path.display());
            Ok(0)
        }
        PdrVerdict::Unsafe(t) => {
            out!("UNSAFE");
            out!("trace {}", t.render(&ts));
            match t.split_point(&ts) {
                Ok(k) => out!("speculation starts at step {k} ({})", ts.pc_point(&t.states[k - 1])),
                Err(e) => out!("speculation: {e}"),
            }
            Ok(EXIT_UNSAFE)
        }
    }
}

fn cmd_repair(cli: &Cli) -> Outcome {
    let (src, p) = load(&cli.path)?;
    let opts = RepairOptions {
        placement: cli.placement,
        activation: cli.activation,
        incremental: cli.incremental == Switch::On,
        mode: cli.mode,
        threat: cli.threat,
        loads_only: cli.loads_only,
        seed: cli.seed,
        fences: cli.active_fences(),
        deadline: cli.deadline(),
        ..Default::default()
    };
    let r = repair_logged(&p, &opts, cli.sink()).map_err(|e| {
        let code = match &e {
            RepairError::Encode(e) => encode_code(e),
            _ => EXIT_RESOURCE,
        };
        fail(code, e)
    })?;
    let lines = label_lines(&src);
    let line_of = |l: Label| lines.iter().find(|(x, _)| *x == l).map(|(_, n)| *n);
    out!("REPAIRED {} fence(s) in {} iteration(s)", r.fences.len(), r.iterations);
    for (i, f) in r.fences.iter().enumerate() {
        let site = r.system.site(f).expect("activated site exists");
        let pos = line_of(site.branch.unwrap_or(site.anchor))
            .map(|n| format!("{}:{n}", cli.path.display()))
            .unwrap_or_default();
        let s = &r.stats[i];
        out!(
            "fence {f} {pos} split={} queries={} kept={} dropped={}",
            s.split_point,
            s.queries,
            s.lemmas_kept,
            s.lemmas_dropped
        );
    }
    out!("queries {}", r.queries);
    let path = cli.cert_path(&p);
    write_checked_certificate(cli, &r.system, &r.invariant, &path)?;
    out!("certificate {}", path.display());
    Ok(0)
}

fn cmd_taint(cli: &Cli) -> Outcome {
    let (_, p) = load(&cli.path)?;
    outn!("{}", render_taint_map(&p, &taint_map(&p)));
    let v = compute_vinst_with(&p, cli.threat, cli.loads_only);
    let labels: Vec<String> = v.labels.iter().map(|l| l.to_string()).collect();
    out!("vinst[{}] = {{{}}}", cli.threat, labels.join(", "));
    Ok(0)
}

fn cmd_encode(cli: &Cli) -> Outcome {
    let (_, p) = load(&cli.path)?;
    let ts = encode(cli, &p)?;
    outn!("{}", ts.describe());
    for s in &ts.meta.sites {
        let on = if ts.active_fences().contains(&s.id) { "active" } else { "inactive" };
        out!("site {} {on}", s.id);
    }
    Ok(0)
}

fn cmd_check_cert(cli: &Cli) -> Outcome {
    let text = read(&cli.path)?;
    match check_certificate(&text, &cli.oracle()) {
        Ok(Verdict::Pass) => {
            out!("PASS");
            Ok(0)
        }
        Ok(Verdict::Fail { condition, witness }) => {
            out!("FAIL {condition}");
            let ones: Vec<&str> = witness.iter().filter(|(_, v)| *v).map(|(n, _)| n.as_str()).collect();
            if !witness.is_empty() {
                out!("witness true: {}", ones.join(" "));
            }
            Ok(EXIT_UNSAFE)
        }
        Err(e @ (CheckError::Parse(_) | CheckError::Unsupported(_))) => Err(fail(EXIT_INPUT, e)),
        Err(e @ CheckError::Oracle(_)) => Err(fail(EXIT_RESOURCE, e)),
    }
}

fn cmd_bench(cli: &Cli) -> Outcome {
    let corpus = bench::load_corpus(&cli.path).map_err(|e| fail(EXIT_INPUT, e))?;
    let opts = BenchOptions {
        threat: cli.threat,
        loads_only: cli.loads_only,
        seed: cli.seed,
        bound: cli.bound,
        timeout: Duration::try_from_secs_f64(cli.timeout).map_err(|e| fail(EXIT_INPUT, e))?,
        parallel: !cli.sequential,
    };
    let rows = bench::run_bench(&corpus, &opts);
    let csv = bench::to_csv(&rows, !cli.no_timing);
    match &cli.out {
        Some(path) => fs::write(path, &csv).map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", path.display())))?,
        None => outn!("{csv}"),
    }
    if let Some(dir) = &cli.cert_dir {
        bench::write_certificates(&rows, dir).map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", dir.display())))?;
    }
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| !r.verdict.is_safe() || !r.certificate_ok)
        .map(|r| {
            format!("{} [{}]: {}", r.benchmark, r.config.slug(), r.error.as_deref().unwrap_or("certificate rejected"))
        })
        .collect();
    for b in &bad {
        eprintln!("{b}");
    }
    Ok(if bad.is_empty() { 0 } else { EXIT_RESOURCE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match cli.command {
        Command::Verify => cmd_verify(&cli),
        Command::Repair => cmd_repair(&cli),
        Command::Taint => cmd_taint(&cli),
        Command::Encode => cmd_encode(&cli),
        Command::CheckCert => cmd_check_cert(&cli),
        Command::Bench => cmd_bench(&cli),
    };
    match out {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("specfence: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
