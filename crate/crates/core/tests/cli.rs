use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(rel)
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specfence")).current_dir(dir).args(args).output().unwrap()
}

fn text(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn verify_reports_leak_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["verify", corpus("fig1.sir").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let out = text(&o);
    assert!(out.starts_with("UNSAFE\n"), "{out}");
    assert!(out.contains("~>"), "{out}");
}

#[test]
fn verify_with_fence_writes_certificate_that_checks() {
    let dir = tempfile::tempdir().unwrap();
    let fig1 = corpus("fig1.sir");
    let o = run(dir.path(), &["verify", fig1.to_str().unwrap(), "--fences", "then@L0,else@L0"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let cert = dir.path().join("fig1.cert.smt2");
    assert!(cert.exists());
    let o = run(dir.path(), &["check-cert", cert.to_str().unwrap()]);
    assert_eq!((o.status.code(), text(&o).trim()), (Some(0), "PASS"));
}

#[test]
fn tampered_certificate_fails_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let fig1 = corpus("fig1.sir");
    let cert = dir.path().join("c.smt2");
    let o = run(dir.path(), &["repair", fig1.to_str().unwrap(), "--out", cert.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let original = fs::read_to_string(&cert).unwrap();
    let start = original.find("(define-fun Inv ").unwrap();
    let end = start + original[start..].find('\n').unwrap();
    let weakened = format!("{}(define-fun Inv () Bool true){}", &original[..start], &original[end..]);
    let start = weakened.find("(define-fun InvNext ").unwrap();
    let end = start + weakened[start..].find('\n').unwrap();
    let weakened = format!("{}(define-fun InvNext () Bool true){}", &weakened[..start], &weakened[end..]);
    fs::write(&cert, weakened).unwrap();
    let o = run(dir.path(), &["check-cert", cert.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).starts_with("FAIL (iii)"), "{}", text(&o));
}

#[test]
fn repair_lists_fences_with_source_lines() {
    let dir = tempfile::tempdir().unwrap();
    let fig1 = corpus("fig1.sir");
    let o = run(dir.path(), &["repair", fig1.to_str().unwrap(), "--threat", "classical"]);
    assert_eq!(o.status.code(), Some(0));
    let out = text(&o);
    assert!(out.starts_with("REPAIRED 1 fence(s)"), "{out}");
    assert!(out.contains("fence then@L0 "), "{out}");
    assert!(out.contains("fig1.sir:"), "{out}");
}

#[test]
fn taint_and_encode_describe_the_program() {
    let dir = tempfile::tempdir().unwrap();
    let fig1 = corpus("fig1.sir");
    let o = run(dir.path(), &["taint", fig1.to_str().unwrap(), "--threat", "classical"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(text(&o).contains("vinst[classical] = {L2}"), "{}", text(&o));
    let o = run(dir.path(), &["encode", fig1.to_str().unwrap(), "--mode", "bounded:3"]);
    assert_eq!(o.status.code(), Some(0));
    let out = text(&o);
    assert!(out.contains("mode bounded:3") && out.contains("then@L0"), "{out}");
}

#[test]
fn bad_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["verify", "missing.sir"]);
    assert_eq!(o.status.code(), Some(2));
    let broken = dir.path().join("broken.sir");
    fs::write(&broken, "program p\nL0: goto L7\n").unwrap();
    let o = run(dir.path(), &["verify", broken.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(dir.path(), &["verify", corpus("fig1.sir").to_str().unwrap(), "--fences", "nowhere@L9"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(dir.path(), &["verify", corpus("fig1.sir").to_str().unwrap(), "--mode", "bounded:0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zero_timeout_is_a_resource_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["repair", corpus("fig1.sir").to_str().unwrap(), "--timeout", "0"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bench_writes_csv_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["bench", corpus("window").to_str().unwrap(), "--no-timing"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = text(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some(specfence::bench::CSV_HEADER));
    assert_eq!(lines.count(), 3 * 9);
}

#[test]
fn loads_only_ignores_speculative_stores() {
    let dir = tempfile::tempdir().unwrap();
    let prog = dir.path().join("st.sir");
    fs::write(
        &prog,
        "program st\ninput x : u4\narray a[8] : u4\nL0: br (x < 8) L1 L2\nL1: store a[x] := 1\nL2: halt\n",
    )
    .unwrap();
    let o = run(dir.path(), &["verify", prog.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(dir.path(), &["verify", prog.to_str().unwrap(), "--loads-only"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let o = run(dir.path(), &["taint", prog.to_str().unwrap(), "--loads-only"]);
    assert!(text(&o).contains("vinst[strong] = {}"), "{}", text(&o));
}
