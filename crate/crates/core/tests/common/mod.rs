#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use specfence::bench::{load_corpus, repair_options, BenchOptions, Config};
use specfence::encode::{
    encode_speculative, encode_standard, fence_sites, PcPoint, SpecMode, Trace, TransitionSystem, VarKind,
};
use specfence::ir::{parse_program, Program};
use specfence::logic::{explicit_reachable, Reachability, DEFAULT_STATE_BUDGET};
use specfence::repair::{choose_fence, repair};
use specfence::threat::{compute_vinst, ThreatModel};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

pub fn kocher() -> Vec<(String, Program)> {
    load_corpus(&corpus_dir().join("kocher")).unwrap()
}

pub fn program(rel: &str) -> Program {
    parse_program(&std::fs::read_to_string(corpus_dir().join(rel)).unwrap()).unwrap()
}

pub fn speculative(p: &Program, threat: ThreatModel, cfg: &Config, active: &BTreeSet<String>) -> TransitionSystem {
    let vinst = compute_vinst(p, threat);
    let sites = fence_sites(p, &vinst, cfg.placement);
    encode_speculative(p, &vinst, &sites, cfg.mode, active).unwrap()
}

/// Repair driven by shortest explicit-state counterexamples instead of PDR.
/// `None` when some intermediate system exceeds the state budget.
pub fn oracle_repair(p: &Program, threat: ThreatModel, cfg: &Config) -> Option<Vec<String>> {
    let mut ts = speculative(p, threat, cfg, &BTreeSet::new());
    let mut fences = Vec::new();
    loop {
        match explicit_reachable(&ts, DEFAULT_STATE_BUDGET) {
            Reachability::Safe { .. } => return Some(fences),
            Reachability::BudgetExceeded => return None,
            Reachability::Unsafe(t) => {
                let site = choose_fence(&t, &ts, cfg.activation).unwrap();
                ts = ts.add_fence(&site).unwrap();
                fences.push(site);
            }
        }
    }
}

/// Random straight-line-and-branch programs over 2-bit data, small enough
/// for exhaustive search.
pub fn arb_program() -> impl Strategy<Value = String> {
    let var = prop::sample::select(vec!["x", "y", "z"]).prop_map(str::to_string);
    // constants only on the right, so operand widths are always known
    let atom = prop_oneof![3 => var.clone(), 1 => (0u64..4).prop_map(|c| c.to_string())];
    let op = prop::sample::select(vec!["+", "-", "&", "|", "^"]);
    let cmp = prop::sample::select(vec!["==", "<", "<="]);
    let expr =
        prop_oneof![atom.clone(), (var.clone(), op, atom.clone()).prop_map(|(a, o, b)| format!("({a} {o} {b})")),];
    let cond = (var.clone(), cmp, atom.clone()).prop_map(|(a, c, b)| format!("({a} {c} {b})"));
    let dest = prop::sample::select(vec!["y", "z"]);
    let arr = prop::sample::select(vec!["A", "B"]);
    let index = prop_oneof![var, (0u64..2).prop_map(|c| c.to_string())];
    // targets are resolved against the program length below
    #[derive(Debug, Clone)]
    enum Shape {
        Assign(&'static str, String),
        Br(String, u32, u32),
        Goto(u32),
        Load(&'static str, &'static str, String),
        Store(&'static str, String, String),
        Assume(String),
        BoundsCheck,
    }
    let shape = prop_oneof![
        3 => (dest.clone(), expr.clone()).prop_map(|(d, e)| Shape::Assign(d, e)),
        3 => (cond.clone(), any::<u32>(), any::<u32>()).prop_map(|(c, t, e)| Shape::Br(c, t, e)),
        1 => any::<u32>().prop_map(Shape::Goto),
        3 => (dest, arr.clone(), index.clone()).prop_map(|(d, a, i)| Shape::Load(d, a, i)),
        1 => (arr, index, expr).prop_map(|(a, i, e)| Shape::Store(a, i, e)),
        1 => cond.prop_map(Shape::Assume),
    ];
    // half of the programs open with a bounds check, so leaks are common
    let guarded = any::<bool>();
    (prop::collection::vec(shape, 2..7), guarded).prop_map(|(mut shapes, guarded)| {
        if guarded {
            shapes.insert(0, Shape::BoundsCheck);
        }
        let n = shapes.len() as u32;
        let mut s =
            String::from("program rnd\ninput x : u2\nvar y : u2\nvar z : u2\narray A[2] : u2\narray B[2] : u2\n");
        for (i, sh) in shapes.iter().enumerate() {
            let i = i as u32;
            let line = match sh {
                Shape::Assign(d, e) => format!("{d} := {e}"),
                // mostly forward, so most programs terminate
                Shape::Br(c, t, e) => {
                    let fwd = |r: u32| if r.is_multiple_of(4) { r % (n + 1) } else { i + 1 + r % (n - i) };
                    format!("br {c} L{} L{}", fwd(*t), fwd(*e))
                }
                Shape::Goto(t) => format!("goto L{}", i + 1 + t % (n - i)),
                Shape::Load(d, a, ix) => format!("{d} := load {a}[{ix}]"),
                Shape::Store(a, ix, e) => format!("store {a}[{ix}] := {e}"),
                Shape::Assume(c) => format!("assume {c}"),
                Shape::BoundsCheck => format!("br (x < 2) L1 L{n}"),
            };
            s.push_str(&format!("L{i}: {line}\n"));
        }
        s.push_str(&format!("L{n}: halt\n"));
        s
    })
}

pub fn arb_config() -> impl Strategy<Value = Config> {
    use specfence::encode::Placement;
    use specfence::repair::Activation;
    (
        prop::sample::select(vec![Placement::EveryInst, Placement::AfterBranch, Placement::BeforeMemory]),
        prop::sample::select(vec![Activation::Nearest, Activation::SplitPoint]),
        any::<bool>(),
        prop_oneof![Just(SpecMode::Unbounded), (1u32..5).prop_map(SpecMode::Bounded)],
    )
        .prop_map(|(placement, activation, incremental, mode)| Config { placement, activation, incremental, mode })
}

pub fn arb_threat() -> impl Strategy<Value = ThreatModel> {
    prop::sample::select(vec![ThreatModel::Strong, ThreatModel::Classical])
}

fn is_program_var(k: &VarKind) -> bool {
    matches!(k, VarKind::Data | VarKind::Cell { .. })
}

/// Program variables of a state, by name.
pub fn project(ts: &TransitionSystem, s: &[u64]) -> BTreeMap<String, u64> {
    ts.vars.iter().zip(s).filter(|(v, _)| is_program_var(&v.kind)).map(|(v, &x)| (v.name.clone(), x)).collect()
}

fn random_state(ts: &TransitionSystem, rng: &mut ChaCha8Rng) -> Vec<u64> {
    ts.vars
        .iter()
        .enumerate()
        .map(|(i, v)| {
            ts.init_value(specfence::logic::VarId(i as u32))
                .unwrap_or_else(|| rng.gen::<u64>() & specfence::logic::mask(v.width))
        })
        .collect()
}

fn random_inputs(ts: &TransitionSystem, rng: &mut ChaCha8Rng) -> Vec<u64> {
    ts.inputs.iter().map(|v| rng.gen::<u64>() & specfence::logic::mask(v.width)).collect()
}

/// Replay a random standard execution in the speculative system `spec`,
/// looking for a correctly predicted successor at every step. Returns a
/// description of the first step without one.
pub fn standard_embeds(p: &Program, spec: &TransitionSystem, seed: u64, steps: usize) -> Result<(), String> {
    let m = encode_standard(p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = random_state(&m, &mut rng);
    // same program values, speculative bookkeeping from Init
    let mut h: Vec<u64> = spec
        .vars
        .iter()
        .enumerate()
        .map(|(i, v)| match spec.init_value(specfence::logic::VarId(i as u32)) {
            Some(c) if !is_program_var(&v.kind) => c,
            _ => m.var_id(&v.name).map(|id| s[id.0 as usize]).unwrap_or(0),
        })
        .collect();
    if matches!(spec.pc_point(&h), PcPoint::Assertion(_)) {
        let u = vec![0; spec.inputs.len()];
        h = spec.step(&h, &u);
    }
    let input_index = |ts: &TransitionSystem, name: &str| ts.inputs.iter().position(|v| v.name == name);
    for step in 0..steps {
        let u = random_inputs(&m, &mut rng);
        let next = m.step(&s, &u);
        let matches = |h2: &[u64]| {
            spec.spec_value(h2) == 0
                && project(&m, &next) == project(spec, h2)
                && m.pc_point(&next) == spec.pc_point(h2)
        };
        let mut found = None;
        for choice in [0u64, 1] {
            let hu: Vec<u64> = spec
                .inputs
                .iter()
                .map(|v| match input_index(&m, &v.name) {
                    Some(j) => u[j],
                    None if v.name.starts_with("choice@") => choice,
                    None => 0,
                })
                .collect();
            let mut h2 = spec.step(&h, &hu);
            if matches!(spec.pc_point(&h2), PcPoint::Assertion(_)) {
                h2 = spec.step(&h2, &hu);
            }
            if matches(&h2) {
                found = Some(h2);
                break;
            }
        }
        let Some(h2) = found else {
            return Err(format!("step {step}: no non-speculative successor reaches {}", m.pc_point(&next)));
        };
        s = next;
        h = h2;
    }
    Ok(())
}

/// Random execution of `fenced` whose every non-stutter step, with fence
/// bits ignored, is a step of `open`.
pub fn fenced_steps_are_open_steps(
    fenced: &TransitionSystem,
    open: &TransitionSystem,
    seed: u64,
    steps: usize,
) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fence_ids: Vec<usize> = fenced
        .vars
        .iter()
        .enumerate()
        .filter(|(_, v)| matches!(v.kind, VarKind::Fence { .. }))
        .map(|(i, _)| i)
        .collect();
    let as_open = |s: &[u64]| {
        let mut s = s.to_vec();
        for &i in &fence_ids {
            s[i] = open.init_value(specfence::logic::VarId(i as u32)).unwrap_or(0);
        }
        s
    };
    let mut s = random_state(fenced, &mut rng);
    for step in 0..steps {
        let u = random_inputs(fenced, &mut rng);
        let next = fenced.step(&s, &u);
        if next != s && open.step(&as_open(&s), &u) != as_open(&next) {
            return Err(format!("step {step} is not an open step"));
        }
        s = next;
    }
    Ok(())
}

/// Spec is zero, then positive and non-decreasing until the end.
pub fn spec_shape(t: &Trace, ts: &TransitionSystem) -> Result<usize, String> {
    let spec: Vec<u64> = t.states.iter().map(|s| ts.spec_value(s)).collect();
    let k = t.split_point(ts)?;
    if spec[k..].windows(2).any(|w| w[1] < w[0]) {
        return Err(format!("spec decreases: {spec:?}"));
    }
    Ok(k)
}

/// Replays `t` in `ts` from the same start and inputs; true if no state is bad.
pub fn avoids_bad(t: &Trace, ts: &TransitionSystem) -> bool {
    let mut s = t.states[0].clone();
    for (v, c) in &ts.init {
        s[v.0 as usize] = *c;
    }
    if ts.is_bad(&s) {
        return false;
    }
    t.inputs.iter().all(|u| {
        s = ts.step(&s, u);
        !ts.is_bad(&s)
    })
}

/// Repairs `p` and checks every leak it found: a real execution with one
/// speculation start and non-decreasing spec, gone once its fence is on.
/// The final system must be safe and still run every standard execution,
/// and only take steps the unfenced system takes. Returns the number of
/// leaks checked.
pub fn check_repair(p: &Program, threat: ThreatModel, cfg: &Config, seed: u64) -> Result<usize, String> {
    let open = speculative(p, threat, cfg, &BTreeSet::new());
    let opts = BenchOptions { threat, seed, ..Default::default() };
    let r = repair(p, &repair_options(cfg, &opts)).map_err(|e| e.to_string())?;
    if r.iterations > r.sites.len() {
        return Err(format!("{} iterations for {} sites", r.iterations, r.sites.len()));
    }
    if r.traces.len() != r.fences.len() || r.fences.iter().collect::<BTreeSet<_>>().len() != r.fences.len() {
        return Err(format!("fences {:?} for {} traces", r.fences, r.traces.len()));
    }
    let mut ts = open.clone();
    for (t, f) in r.traces.iter().zip(&r.fences) {
        t.check_counterexample(&ts)?;
        let k = spec_shape(t, &ts).map_err(|e| format!("{e}: {}", t.render(&ts)))?;
        let anchor = ts.site(f).ok_or_else(|| format!("unknown site {f}"))?.anchor;
        if !t.points(&ts)[k..].iter().any(|pt| matches!(pt, PcPoint::Inst(l) | PcPoint::Assertion(l) if *l == anchor)) {
            return Err(format!("{f} is not on the speculating part of {}", t.render(&ts)));
        }
        ts = ts.add_fence(f).map_err(|e| e.to_string())?;
        if !avoids_bad(t, &ts) {
            return Err(format!("{} survives {f}", t.render(&ts)));
        }
    }
    if ts.active_fences() != r.system.active_fences() {
        return Err("repaired system has other fences".into());
    }
    if explicit_reachable(&ts, DEFAULT_STATE_BUDGET).is_safe() != Some(true) {
        return Err("repaired system still leaks".into());
    }
    let steps = 24;
    standard_embeds(p, &open, seed, steps).map_err(|e| format!("unfenced: {e}"))?;
    standard_embeds(p, &ts, seed, steps).map_err(|e| format!("fenced: {e}"))?;
    fenced_steps_are_open_steps(&ts, &open, seed, steps)?;
    Ok(r.traces.len())
}
