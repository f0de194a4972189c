use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nqs_core::cli::results::{append_rows, read_rows, ResultRow, RESULTS_FILE};
use nqs_core::scaling::{Metric, ScalingCurve};

fn nqs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nqs")).args(args).output().expect("spawn nqs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn data(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel).display().to_string()
}

fn write_config(dir: &Path, ham: &str, steps: usize, extra: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(
        &path,
        format!(
            "[run]\nhamiltonian = {ham:?}\nmolecule = \"H2\"\n\n[ansatz]\narchitecture = \"transformer\"\nd_model = 8\n\n\
             [train]\nsteps = {steps}\nmax_unique = 16\n{extra}\n[output]\ndir = \"out\"\ncheckpoints = false\n"
        ),
    )
    .unwrap();
    path.display().to_string()
}

fn rows(dir: &Path) -> Vec<ResultRow> {
    read_rows(&dir.join("out").join(RESULTS_FILE)).unwrap()
}

#[test]
fn run_appends_one_row_per_invocation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &data("h2_sto3g.ham"), 50, "");
    let first = nqs(&["run", "--config", &cfg]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(stdout(&first).contains("status=ok"));
    assert_eq!(rows(dir.path()).len(), 1);

    assert!(nqs(&["run", "--config", &cfg]).status.success());
    let r = rows(dir.path());
    assert_eq!(r.len(), 2);
    // identical configuration and seed: identical row apart from the timestamp
    let mut b = r[1].clone();
    b.timestamp = r[0].timestamp;
    assert_eq!(r[0], b);
    assert_eq!(r[0].config_hash.len(), 16);
    assert_eq!(r[0].n_qubits, 4);
    assert!(r[0].abs_error.is_some() && r[0].vscore.is_some());
}

#[test]
fn seed_override_changes_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &data("h2_sto3g.ham"), 5, "");
    assert!(nqs(&["run", "--config", &cfg]).status.success());
    assert!(nqs(&["run", "--config", &cfg, "--seed", "7"]).status.success());
    let r = rows(dir.path());
    assert_ne!(r[0].config_hash, r[1].config_hash);
    assert_eq!(r[1].seed, 7);
}

#[test]
fn missing_hamiltonian_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "does_not_exist.ham", 5, "");
    let o = nqs(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("does_not_exist.ham"));
    assert!(!dir.path().join("out").join(RESULTS_FILE).exists());
}

#[test]
fn invalid_config_values_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &data("h2_sto3g.ham"), 0, "");
    assert_eq!(nqs(&["run", "--config", &cfg]).status.code(), Some(1));
    assert_eq!(nqs(&["run"]).status.code(), Some(1));
    assert_eq!(nqs(&["bogus"]).status.code(), Some(1));
}

#[test]
fn diverged_run_is_recorded_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let ham = dir.path().join("huge.ham");
    fs::write(&ham, "%n_qubits 4\n%n_electrons 2\n%multiplicity 1\n1e200 XXXX\n1e200 YYXX\n-1e200 ZIII\n").unwrap();
    let cfg = write_config(dir.path(), &ham.display().to_string(), 20, "");
    let o = nqs(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    let r = rows(dir.path());
    assert_eq!(r.len(), 1);
    assert_ne!(r[0].status, "ok");
}

fn sweep_config(dir: &Path) -> String {
    let path = dir.join("sweep.toml");
    fs::write(
        &path,
        format!(
            "[sweep]\nhamiltonians = [{:?}]\narchitectures = [\"made\", \"retnet\"]\nd_model = [8]\nmade_hidden = [8]\n\
             steps = [5, 10]\nmax_unique = [8]\nseeds = [0]\n\n[output]\ndir = \"out\"\ncheckpoints = false\n",
            data("h2_sto3g.ham")
        ),
    )
    .unwrap();
    path.display().to_string()
}

#[test]
fn sweep_writes_grid_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sweep_config(dir.path());
    let o = nqs(&["sweep", "--config", &cfg, "--workers", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = rows(dir.path());
    assert_eq!(first.len(), 4);
    assert_eq!(first.iter().filter(|r| r.ansatz == "made").count(), 2);
    assert!(!dir.path().join("out/staging").read_dir().is_ok_and(|mut d| d.next().is_some()));

    let o = nqs(&["sweep", "--config", &cfg, "--resume"]);
    assert!(stdout(&o).contains("0 runs executed"), "{}", stdout(&o));
    assert!(stdout(&o).contains("4 skipped"));
    assert_eq!(rows(dir.path()).len(), 4);

    let o = nqs(&["sweep", "--config", &cfg, "--ansatz", "retnet"]);
    assert!(stdout(&o).contains("2 runs executed"));
    assert_eq!(rows(dir.path()).len(), 6);
}

fn synthetic_results(path: &Path, with_bad_vscore: usize) {
    let truth = ScalingCurve::new("t", Metric::AbsError, [1e-4, 0.3, 0.05], [1.5, 0.9]);
    let mut out = Vec::new();
    for i in 0..6 {
        for j in 0..5 {
            let n = 10f64.powf(1.0 + 0.5 * i as f64);
            let d = 10f64.powf(0.5 + 0.5 * j as f64);
            let mut r = ResultRow::failed(&format!("h{i}{j}"), "transformer", "H2", 4, Some(2), 100, 16, 0);
            r.status = "ok".into();
            r.n_k = Some(n);
            r.d_prime = Some(d);
            r.abs_error = Some(truth.predict(n, d));
            r.vscore = if out.len() < with_bad_vscore { None } else { Some(truth.predict(n, d)) };
            out.push(r);
        }
    }
    append_rows(path, &out).unwrap();
}

#[test]
fn fit_then_frontier() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("results.csv");
    synthetic_results(&results, 3);
    let curve = dir.path().join("curve.toml");
    let o = nqs(&["fit", results.to_str().unwrap(), "--metric", "abserr", "--out", curve.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("alpha1"));
    let fitted = ScalingCurve::from_toml(&fs::read_to_string(&curve).unwrap()).unwrap();
    assert_eq!(fitted.ansatz, "all");
    assert!((fitted.alpha1 - 1.5).abs() < 0.15 && (fitted.alpha2 - 0.9).abs() < 0.09, "{fitted:?}");

    let o = nqs(&["fit", results.to_str().unwrap(), "--metric", "vscore"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("skipped 3 rows"));

    let o = nqs(&["frontier", curve.to_str().unwrap(), "--budget", "1e6"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("N* ="));
}

#[test]
fn fit_refuses_too_few_rows() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("results.csv");
    synthetic_results(&results, 25);
    let o = nqs(&["fit", results.to_str().unwrap(), "--metric", "vscore"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("insufficient data"));
}

#[test]
fn frontier_prints_reference_curves() {
    let dir = tempfile::tempdir().unwrap();
    for (curve, expect) in [
        (ScalingCurve::new("made", Metric::VScore, [0.0, 2.58e-5, 5.53e-2], [1.459, 2.828]), "0.053 x N^0.516"),
        (ScalingCurve::new("transformer", Metric::AbsError, [0.0, 0.720, 0.039], [5.274, 0.637]), "N^8.279"),
    ] {
        let path = dir.path().join("c.toml");
        fs::write(&path, curve.to_toml()).unwrap();
        let o = nqs(&["frontier", path.to_str().unwrap()]);
        assert!(stdout(&o).contains(expect), "{}", stdout(&o));
    }
    let path = dir.path().join("bad.toml");
    fs::write(&path, "not a curve").unwrap();
    assert_eq!(nqs(&["frontier", path.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn heatmap_bins_and_floors() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("results.csv");
    let mut r = ResultRow::failed("x", "made", "H2", 4, Some(2), 10, 4, 0);
    r.status = "ok".into();
    r.n_k = Some(2.0);
    r.d_prime = Some(2.0);
    r.abs_error = Some(0.0);
    append_rows(&results, &[r.clone(), r]).unwrap();
    let o = nqs(&["heatmap", results.to_str().unwrap(), "--metric", "abserr"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2, "{text}");
    assert_eq!(lines[1], "0,0,1e-5,2");
}

#[test]
fn exact_matches_reference_energies() {
    let o = nqs(&["exact", &data("h2_sto3g.ham")]);
    assert!(o.status.success());
    let text = stdout(&o);
    let e: f64 = text.lines().next().unwrap().trim_start_matches("ground energy ").parse().unwrap();
    assert!((e + 1.137283834489).abs() < 1e-6, "{e}");

    let dir = tempfile::tempdir().unwrap();
    let toy = dir.path().join("toy.ham");
    fs::write(&toy, "%n_qubits 2\n0.5 ZI\n0.5 IZ\n").unwrap();
    let out = dir.path().join("toy_fci.ham");
    let o = nqs(&["exact", toy.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(stdout(&o).starts_with("ground energy -1.000000000000"));
    assert!(fs::read_to_string(&out).unwrap().contains("%fci -1"));

    let big = dir.path().join("big.ham");
    fs::write(&big, format!("%n_qubits 30\n1.0 {}\n", "Z".repeat(30))).unwrap();
    let o = nqs(&["exact", big.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn flops_reports_made_example() {
    let o = nqs(&[
        "flops", "--ansatz", "made", "--n-qubits", "4", "--batch", "16", "--steps", "1", "--groups", "2", "--n-mod", "100",
        "--n-ph", "50",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("3.360000e4"), "{}", stdout(&o));
    assert_eq!(nqs(&["flops", "--ansatz", "made"]).status.code(), Some(1));
}
