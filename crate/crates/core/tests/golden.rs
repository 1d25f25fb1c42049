mod common;

use std::fmt::Write as _;
use std::fs;

use common::*;
use specfence::bench::{configurations, run_bench, run_row, BenchOptions, DEFAULT_BOUND};
use specfence::certificate::{check_certificate, parse_script, Oracle};
use specfence::ir::Program;
use specfence::threat::ThreatModel;

const GOLDEN: &str = "golden/fence_counts.csv";

fn programs() -> Vec<(String, Program)> {
    let mut out = kocher();
    out.push(("fig1".into(), program("fig1.sir")));
    out.push(("test_deep".into(), program("test_deep.sir")));
    out
}

fn oracle_table() -> String {
    let mut s = String::from("benchmark,config,nf,fences\n");
    for (name, p) in programs() {
        for cfg in configurations(DEFAULT_BOUND) {
            let fences = oracle_repair(&p, ThreatModel::Strong, &cfg)
                .unwrap_or_else(|| panic!("{name} {} exceeds the state budget", cfg.slug()));
            writeln!(s, "{name},{},{},{}", cfg.slug(), fences.len(), fences.join(" ")).unwrap();
        }
    }
    s
}

/// Rewrites the golden table from the explicit-state oracle.
#[test]
#[ignore]
fn regenerate_golden() {
    fs::create_dir_all(corpus_dir().join("golden")).unwrap();
    fs::write(corpus_dir().join(GOLDEN), oracle_table()).unwrap();
}

#[test]
fn oracle_still_matches_golden() {
    let golden = fs::read_to_string(corpus_dir().join(GOLDEN)).unwrap();
    assert_eq!(oracle_table(), golden);
}

#[test]
fn pdr_repair_matches_golden_counts() {
    let golden = fs::read_to_string(corpus_dir().join(GOLDEN)).unwrap();
    let opts = BenchOptions::default();
    let mut rows = golden.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect::<Vec<_>>());
    for (name, p) in programs() {
        for cfg in configurations(DEFAULT_BOUND) {
            let g = rows.next().unwrap();
            assert_eq!((g[0].as_str(), g[1].as_str()), (name.as_str(), cfg.slug().as_str()));
            let row = run_row(&name, &p, &cfg, &opts);
            assert!(row.verdict.is_safe(), "{name} {}: {:?}", cfg.slug(), row.error);
            assert_eq!(row.nf.to_string(), g[2], "{name} {}: {:?} vs {}", cfg.slug(), row.fences, g[3]);
        }
    }
}

#[test]
fn incremental_mode_finds_the_same_fences() {
    let rows = run_bench(&programs(), &BenchOptions::default());
    for r in rows.iter().filter(|r| r.config.incremental) {
        let twin = rows
            .iter()
            .find(|o| {
                o.benchmark == r.benchmark && o.config == specfence::bench::Config { incremental: false, ..r.config }
            })
            .unwrap();
        assert_eq!(r.fences, twin.fences, "{} [{}]", r.benchmark, r.config.slug());
    }
}

#[test]
fn certificates_reexport_and_agree_with_external_solver() {
    let z3 = std::process::Command::new("z3").arg("-version").output().is_ok_and(|o| o.status.success());
    for r in run_bench(&programs(), &BenchOptions::default()) {
        let cert = r.certificate.unwrap();
        assert_eq!(parse_script(&cert).unwrap().to_string(), cert);
        let internal = check_certificate(&cert, &Oracle::Internal).unwrap();
        assert!(internal.passed(), "{} [{}]", r.benchmark, r.config.slug());
        if z3 {
            let external = check_certificate(&cert, &Oracle::External("z3 -in".into())).unwrap();
            assert!(external.passed(), "{} [{}]", r.benchmark, r.config.slug());
        }
    }
}
