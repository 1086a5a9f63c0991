use std::path::Path;
use std::process::{Command, Output};

fn singular(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_singular"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const MINIMAL: &str =
    "[problem]\ndomain = unit-square\nresolution = 32\ngamma = 0.5\natom = 0.5,0.5,1\n";

#[test]
fn minimal_solve_writes_solution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", MINIMAL);
    let out = dir.path().join("out");
    let o = singular(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("solution.csv")).unwrap();
    assert!(text.starts_with("x,y,u\n"));
    assert_eq!(text.lines().count(), 1 + 33 * 33);
    assert!(out.join("diagnostics.txt").exists());
}

#[test]
fn strict_mode_fails_on_broken_sandwich() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "coarse.cfg",
        "[problem]\nresolution = 8\ngamma = 2\natom = 0.5,0.5,1\n[solver]\nouter_tol = 1e-1\n[analysis]\nreports = sandwich\n",
    );
    let out = dir.path().join("out");
    let strict = singular(&[
        "solve",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--strict",
    ]);
    assert!(!strict.status.success());
    let lenient = singular(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(lenient.status.success());
    let rows = read_csv(&out.join("reports.csv"));
    assert!(rows
        .iter()
        .all(|r| r[0] == "sandwich-gaps" && r[4] == "FAIL"));
}

#[test]
fn unknown_suite_is_a_usage_error() {
    assert_eq!(singular(&["verify", "unknown-name"]).status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", "[problem]\ngama = 0.5\n");
    let o = singular(&[
        "solve",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gama"));
}

#[test]
fn verify_manufactured_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = singular(&[
        "verify",
        "manufactured",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(
        stdout.starts_with("PASS manufactured-convergence"),
        "{stdout}"
    );
    let rows = read_csv(&dir.path().join("verify-manufactured.csv"));
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap() >= 1.8));
}

#[test]
fn verify_sandwich_prints_three_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let o = singular(&["verify", "sandwich", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let rows: Vec<_> = read_csv(&dir.path().join("verify-sandwich.csv"))
        .into_iter()
        .filter(|r| r[0] == "sandwich-gaps")
        .collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap() >= -1e-8));
}

#[test]
fn sweep_counts_points() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.cfg",
        "[problem]\ndomain = unit-ball-radial(3)\natom = 0,0,1\n[sweep]\ngamma = 0.5, 1, 2\nresolution = 64, 128\n",
    );
    let out = dir.path().join("out");
    assert!(
        singular(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()])
            .status
            .success()
    );
    let rows = read_csv(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r[0] == "sweep-summary"));
}

#[test]
fn sweep_over_p_recovers_fundamental_exponents() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.cfg",
        "[problem]\ndomain = unit-ball-radial(3)\nresolution = 400\ndatum = constant 0\natom = 0,0,1\n[sweep]\np = 1.8, 2, 2.5\n",
    );
    let out = dir.path().join("out");
    assert!(
        singular(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()])
            .status
            .success()
    );
    for row in read_csv(&out.join("sweep.csv")) {
        let (got, want): (f64, f64) = (row[11].parse().unwrap(), row[12].parse().unwrap());
        let p: f64 = row[2].parse().unwrap();
        assert!(
            (got - want).abs() <= 0.05 * want.abs(),
            "p = {p}: {got} vs {want}"
        );
        assert!((want - (p - 3.0) / (p - 1.0)).abs() < 1e-9);
    }
}

#[test]
fn sweep_over_n_stabilizes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "n.cfg",
        "[problem]\ndomain = unit-disk\nresolution = 32\natom = 0,0,1\n[sweep]\nn = 4, 16, 64, 256\n",
    );
    let out = dir.path().join("out");
    assert!(
        singular(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()])
            .status
            .success()
    );
    let stab: Vec<f64> = read_csv(&out.join("sweep.csv"))
        .iter()
        .map(|r| r[10].parse().unwrap())
        .collect();
    assert!(stab.windows(2).all(|w| w[1] < w[0]), "{stab:?}");
}

#[test]
fn empty_sweep_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "e.cfg", MINIMAL);
    let o = singular(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{}[analysis]\nreports = sandwich, truncation-energy\n[sweep]\ngamma = 0.5, 2\n",
        MINIMAL.replace("atom = 0.5,0.5,1", "atom = 0.5,0.5,20")
    );
    let cfg = write(dir.path(), "d.cfg", &text);
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = out.to_str().unwrap();
        assert!(singular(&["solve", "--config", &cfg, "--out", o])
            .status
            .success());
        assert!(
            singular(&["sweep", "--config", &cfg, "--out", o, "--threads", threads])
                .status
                .success()
        );
        ["solution.csv", "reports.csv", "sweep.csv"].map(|f| std::fs::read(out.join(f)).unwrap())
    };
    assert_eq!(run("a", "1"), run("b", "4"));
}

#[test]
fn regularity_config_gives_one_row_per_tuple() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "reg.cfg",
        "[problem]\nresolution = 16\n[analysis]\nreports = regularity\nregularity = 2 2 1\nregularity = 1.2 2 1\nregularity = 2 1.2 1\nresolutions = 400, 800, 1600\n",
    );
    let out = dir.path().join("out");
    singular(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let rows = read_csv(&out.join("regularity.csv"));
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][4], "inf");
    assert_eq!(rows[1][4].parse::<f64>().unwrap().round(), 12.0);
}

#[test]
fn truncation_levels_need_sup_above_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{MINIMAL}[analysis]\nreports = truncation-energy\n");
    let cfg = write(dir.path(), "t.cfg", &text);
    let out = dir.path().join("o");
    let o = singular(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("outside"));
}
