//! End-to-end runs of the dotlab binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dotlab"))
}

fn write(path: &Path, contents: &str) {
    fs::write(path, contents).unwrap();
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const TWO_POINT: &str = "x1,weight\n0,0.5\n1,0.5\n";

const LOPSIDED_BODY: &str = r#"
divergence = "entropic"
cost = "euclidean"

[mu]
atoms = [[0.0], [1.0]]
weights = [0.3, 0.7]

[nu]
grid = { dim = 1, points_per_axis = 3, min = 0.0, max = 1.0 }
"#;

#[test]
fn solve_flags_write_potentials_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let mu = dir.path().join("mu.csv");
    let nu = dir.path().join("nu.csv");
    let pot = dir.path().join("potentials.csv");
    write(&mu, TWO_POINT);
    write(&nu, TWO_POINT);
    let out = bin()
        .args(["solve", "--mu"])
        .arg(&mu)
        .arg("--nu")
        .arg(&nu)
        .args(["--cost", "euclidean", "--div", "entropic", "--potentials"])
        .arg(&pot)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    // symmetric two-point instance has a known dual value
    let text = stdout(&out);
    let value: f64 = text
        .lines()
        .find(|l| l.starts_with("dual value"))
        .and_then(|l| l.split_whitespace().nth(2))
        .unwrap()
        .parse()
        .unwrap();
    assert!((value - 0.3798854930417224).abs() <= 1e-6, "value {value}");

    let potentials = fs::read_to_string(&pot).unwrap();
    let lines: Vec<&str> = potentials.lines().collect();
    assert_eq!(lines[0], "side,index,value");
    assert_eq!(lines.len(), 5, "{potentials}");

    let meta = fs::read_to_string(dir.path().join("potentials.csv.meta.json")).unwrap();
    assert!(meta.contains("\"seed\""));
    assert!(meta.contains("\"wall_time_seconds\""));
    assert!(meta.contains("\"error\": null"));
}

#[test]
fn solve_config_with_sweep_cap_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("solve.toml");
    write(
        &cfg,
        &format!("{LOPSIDED_BODY}\n[solve]\nmax_sweeps = 1\n"),
    );
    let out = bin().arg("solve").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("no convergence"));
}

#[test]
fn validation_reports_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    write(
        &cfg,
        r#"
divergence = "sinkhorn"
epsilon = -1.0
cost = "euclidean"

[mu]
atoms = [[0.0], [1.0]]
weights = [0.5, 0.5]

[nu]
grid = { dim = 1, points_per_axis = 2, min = 0.0, max = 1.0 }
"#,
    );
    let out = bin().arg("solve").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("epsilon must be positive"), "{err}");
    assert!(err.contains("unknown divergence"), "{err}");
    assert!(err.contains("entropic"), "{err}"); // known names listed
    assert!(err.contains("2 validation error(s)"), "{err}");
}

#[test]
fn solve_without_flags_lists_requirements() {
    let out = bin().arg("solve").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    for flag in ["--mu", "--nu", "--cost", "--div"] {
        assert!(err.contains(flag), "missing {flag} in {err}");
    }
}

#[test]
fn check_command_passes() {
    let out = bin().args(["check", "--seed", "4"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("PASS marginal_residuals"), "{text}");
    assert!(text.contains("all 8 checks passed"), "{text}");
}

#[test]
fn rate_reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (tag, threads) in [("a", "1"), ("b", "4")] {
        let cfg = dir.path().join(format!("rate-{tag}.toml"));
        let out_csv = dir.path().join(format!("rate-{tag}.csv"));
        write(
            &cfg,
            &format!(
                "seed = 123\noutput = {:?}\n{LOPSIDED_BODY}\n[rate]\nn_grid = [10, 20, 40, 80]\nreplicates = 50\n",
                out_csv
            ),
        );
        let out = bin()
            .arg("rate")
            .arg("--config")
            .arg(&cfg)
            .env("DOTLAB_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
        outputs.push(fs::read(&out_csv).unwrap());

        let meta = fs::read_to_string(dir.path().join(format!("rate-{tag}.csv.meta.json"))).unwrap();
        assert!(meta.contains("\"seed\": 123"), "{meta}");
        assert!(meta.contains("n_grid"), "{meta}");
    }
    assert_eq!(outputs[0], outputs[1], "report bytes differ across thread counts");
    let text = String::from_utf8(outputs.pop().unwrap()).unwrap();
    assert!(
        text.starts_with("n_grid,mean_abs_error,bias,variance,fitted_slope,slope_stderr,seeds\n"),
        "{text}"
    );
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn clt_config_produces_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("clt.toml");
    let out_csv = dir.path().join("clt.csv");
    write(
        &cfg,
        &format!(
            "seed = 9\noutput = {:?}\n{LOPSIDED_BODY}\n[clt]\nmode = \"one_sample_mu\"\nn = 100\nreplicates = 500\ncentering = \"replicate_mean\"\n",
            out_csv
        ),
    );
    let out = bin().arg("clt").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = fs::read_to_string(&out_csv).unwrap();
    assert!(text.starts_with(
        "mode,n,m,lambda,standardized,sigma_sq_exact,sigma_sq_plugin,ks_distance,centering\n"
    ));
    assert_eq!(text.lines().count(), 501);
    assert!(text.lines().nth(1).unwrap().starts_with("one_sample_mu,100,,,"));
}

#[test]
fn clt_two_sample_requires_m() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("clt.toml");
    write(
        &cfg,
        &format!(
            "output = \"out.csv\"\n{LOPSIDED_BODY}\n[clt]\nmode = \"two_sample\"\nn = 100\nreplicates = 500\n"
        ),
    );
    let out = bin().arg("clt").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("needs a positive m"));
}

#[test]
fn config_and_flags_are_mutually_exclusive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("solve.toml");
    write(&cfg, LOPSIDED_BODY);
    let out = bin()
        .arg("solve")
        .arg("--config")
        .arg(&cfg)
        .args(["--div", "entropic"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--config replaces the direct flags"));
}
