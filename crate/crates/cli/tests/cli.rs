use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_immune-resched"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn subcommands_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let universe = dir.path().join("universe.txt");
    let pop = dir.path().join("pop.txt");
    let refined = dir.path().join("refined.txt");
    let stats = dir.path().join("stats.csv");

    run_ok(&["gen-universe", "--seed", "3", "--out", path(&universe)]);
    let text = std::fs::read_to_string(&universe).unwrap();
    assert_eq!(text.lines().filter(|l| !l.trim().is_empty()).count(), 10);

    let dump = run_ok(&["build-pool", "--universe", path(&universe), "--type", "c"]);
    let lines = String::from_utf8(dump.stdout).unwrap();
    assert!(lines.lines().count() >= 100);
    assert!(lines.lines().all(|l| l.contains(" | ")));

    run_ok(&[
        "evolve", "--universe", path(&universe), "--ag-sample", "4", "--generations", "30",
        "--stats", path(&stats), "--out", path(&pop),
    ]);
    let stats_text = std::fs::read_to_string(&stats).unwrap();
    assert_eq!(stats_text.lines().next(), Some("generation,best,mean,worst"));
    assert_eq!(stats_text.lines().count(), 32);

    let out = run_ok(&[
        "refine", "--universe", path(&universe), "--population", path(&pop), "--phase2", "gd",
        "--operator", "swap", "--out", path(&refined),
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("total fitness"));

    let eval = run_ok(&["evaluate", "--universe", path(&universe), "--population", path(&refined)]);
    let eval = String::from_utf8(eval.stdout).unwrap();
    assert_eq!(eval.lines().next(), Some("threshold,unmatched"));
    assert_eq!(eval.lines().count(), 5);
}

#[test]
fn gen_universe_is_seeded() {
    let a = run_ok(&["gen-universe", "--seed", "8"]).stdout;
    let b = run_ok(&["gen-universe", "--seed", "8"]).stdout;
    let c = run_ok(&["gen-universe", "--seed", "9"]).stdout;
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn experiment_csvs_are_byte_identical() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        run_ok(&["experiment", "--seed", "2", "--replicates", "3", "--phase2", "sa", "--out", path(d.path())]);
    }
    for name in ["coverage.csv", "fitness.csv", "run.json"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    let cov = std::fs::read_to_string(dirs[0].path().join("coverage.csv")).unwrap();
    assert_eq!(cov.lines().next(), Some("threshold,1,4,8"));
    assert_eq!(cov.lines().count(), 5);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small run\nreplicates=2\nag-sample=1,4\nseed=5\n").unwrap();
    let out = dir.path().join("out");
    run_ok(&["experiment", "--config", path(&cfg), "--ag-sample", "8", "--out", path(&out)]);
    let cov = std::fs::read_to_string(out.join("coverage.csv")).unwrap();
    assert_eq!(cov.lines().next(), Some("threshold,8"));
    let fitness = std::fs::read_to_string(out.join("fitness.csv")).unwrap();
    assert_eq!(fitness.lines().nth(1).map(|l| l.starts_with("8,2,")), Some(true));
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "replicates=2\nnot-a-key=1\n").unwrap();
    let out = bin().args(["experiment", "--config", path(&bad)]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let out = bin().args(["evolve", "--ag-sample", "1,4"]).output().unwrap();
    assert!(!out.status.success());

    let out = bin().args(["build-pool", "--type", "z"]).output().unwrap();
    assert!(!out.status.success());

    let missing = dir.path().join("missing.txt");
    let out = bin().args(["build-pool", "--universe", path(&missing)]).output().unwrap();
    assert!(!out.status.success());
}
