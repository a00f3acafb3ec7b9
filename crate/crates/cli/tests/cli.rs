//! End-to-end runs of the binary: artifact schemas, exit codes,
//! determinism across worker counts, and sidecar round-trips.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_blowup"))
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("blowup-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

const EXAMPLE_ONE: &str = r#"
[forcing]
kind = "power"
p = 2.0
lambda = 1.0

[scalar]
u0 = 1.0

[control]
eps = 0.125
gamma = 0.2
a = 1.0
q = 2.0
horizon = 4.0
"#;

fn csv_cell(path: &Path, row: usize, col: &str) -> String {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == col).unwrap_or_else(|| {
        panic!("column {col} not in {header:?}");
    });
    let line = lines.nth(row).unwrap();
    line.split(',').nth(idx).unwrap().to_string()
}

#[test]
fn control_ode_reproduces_the_squares_example() {
    let dir = tmp_dir("ex1");
    write(&dir.join("config.toml"), EXAMPLE_ONE);
    let status = bin()
        .args(["control-ode", "--config"])
        .arg(dir.join("config.toml"))
        .arg("--out")
        .arg(dir.join("run"))
        .status()
        .unwrap();
    assert!(status.success());

    let t_est: f64 = csv_cell(&dir.join("run/summary.csv"), 0, "t_est").parse().unwrap();
    assert!((t_est - 1.0).abs() <= 1e-6, "t_est = {t_est}");
    let gamma: f64 = csv_cell(&dir.join("run/summary.csv"), 0, "gamma_fit").parse().unwrap();
    assert!((gamma - 0.2).abs() <= 0.02);

    // trajectory carries segment tags and explicit singular markers
    let traj = fs::read_to_string(dir.join("run/trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,u,segment_tag,is_singular_endpoint\n"));
    assert!(traj.contains("singular-growth"));
    assert!(traj.contains("reflected"));
    assert!(traj.contains("periodic"));
    assert!(traj.contains(",inf,"));
    assert!(!traj.contains('\r'), "LF line endings required");
}

#[test]
fn unknown_config_keys_exit_with_usage_error() {
    let dir = tmp_dir("badkey");
    write(&dir.join("config.toml"), "[forcing]\nkind = \"power\"\np = 2.0\nlambda = 1.0\nwhat = 1\n");
    let status = bin()
        .args(["ode", "--config"])
        .arg(dir.join("config.toml"))
        .arg("--out")
        .arg(dir.join("run"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn domination_gate_exits_with_contract_violation() {
    let dir = tmp_dir("gate");
    write(
        &dir.join("config.toml"),
        r#"
[forcing]
kind = "power"
p = 2.0
lambda = 0.3

[absorption]
kind = "power"
m = 3.0

[geometry]
radius = 1.0
dimension = 3

[scalar]
u0 = 2.0
cap = 1e6
"#,
    );
    let status = bin()
        .args(["dynbc", "--config"])
        .arg(dir.join("config.toml"))
        .arg("--out")
        .arg(dir.join("run"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn sweep_is_deterministic_across_worker_counts() {
    let dir = tmp_dir("sweep");
    write(
        &dir.join("config.toml"),
        r#"
[forcing]
kind = "power"
p = 3.0
lambda = 1.0

[absorption]
kind = "power"
m = 3.0

[geometry]
radius = 1.0
dimension = 3

[scalar]
u0 = 2.0

[sweep]
p = [2.0, 3.0]
lambda = [0.5, 1.0]
m = [3.0]
u0 = [2.0]
cap = 1e5
"#,
    );
    for workers in ["1", "4"] {
        let status = bin()
            .args(["sweep", "--config"])
            .arg(dir.join("config.toml"))
            .arg("--out")
            .arg(dir.join(format!("w{workers}")))
            .args(["--workers", workers])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = fs::read(dir.join("w1/sweep.csv")).unwrap();
    let b = fs::read(dir.join("w4/sweep.csv")).unwrap();
    assert_eq!(a, b, "sweep CSV must be byte-identical regardless of workers");

    // the λ axis crosses λ₀ = 1/√2 for p = 2: the status column flips
    let text = String::from_utf8(a).unwrap();
    assert!(text.contains("domination-failed"));
    assert!(text.contains(",ok,"));
}

#[test]
fn sidecar_round_trip_reproduces_the_run() {
    let dir = tmp_dir("sidecar");
    write(&dir.join("config.toml"), EXAMPLE_ONE);
    let run = |config: &Path, out: &Path| {
        let status = bin()
            .args(["ode", "--config"])
            .arg(config)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    };
    run(&dir.join("config.toml"), &dir.join("a"));
    run(&dir.join("a/ode.meta.toml"), &dir.join("b"));
    let a = fs::read(dir.join("a/summary.csv")).unwrap();
    let b = fs::read(dir.join("b/summary.csv")).unwrap();
    assert_eq!(a, b, "re-ingested sidecar must reproduce the run");

    // the squares law blows up at exactly one
    let t_est: f64 = csv_cell(&dir.join("a/summary.csv"), 0, "t_est").parse().unwrap();
    assert!((t_est - 1.0).abs() <= 1e-6, "t_est = {t_est}");
}

#[test]
fn selfsim_serializes_singular_values_with_flag() {
    let dir = tmp_dir("selfsim");
    write(
        &dir.join("config.toml"),
        "[selfsim]\nm = 3.0\nsamples = 200\nspan = 4.0\n\n[output]\nseed = 7\n",
    );
    let status = bin()
        .args(["selfsim", "--config"])
        .arg(dir.join("config.toml"))
        .arg("--out")
        .arg(dir.join("run"))
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(dir.join("run/selfsim.csv")).unwrap();
    assert!(text.starts_with("x_n,t,u_or_flag,is_blown_up,t_inf_of_xn\n"));
    let mut finite = 0;
    let mut blown = 0;
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        match (cells[2], cells[3]) {
            ("inf", "1") => blown += 1,
            (v, "0") => {
                v.parse::<f64>().unwrap();
                finite += 1;
            }
            other => panic!("bad row {other:?}"),
        }
    }
    assert!(finite > 0 && blown > 0, "finite {finite}, blown {blown}");
}

#[test]
fn single_cell_sweep_matches_a_plain_run() {
    let dir = tmp_dir("onecell");
    write(
        &dir.join("config.toml"),
        r#"
[forcing]
kind = "power"
p = 3.0
lambda = 1.0

[absorption]
kind = "power"
m = 3.0

[geometry]
radius = 1.0
dimension = 3

[scalar]
u0 = 2.0
cap = 1e6

[sweep]
p = [3.0]
lambda = [1.0]
m = [3.0]
u0 = [2.0]
cap = 1e6
"#,
    );
    for (cmd, out) in [("dynbc", "single"), ("sweep", "swept")] {
        let status = bin()
            .args([cmd, "--config"])
            .arg(dir.join("config.toml"))
            .arg("--out")
            .arg(dir.join(out))
            .status()
            .unwrap();
        assert!(status.success());
    }
    let single: f64 =
        csv_cell(&dir.join("single/summary.csv"), 0, "t_inf_est").parse().unwrap();
    let swept: f64 = csv_cell(&dir.join("swept/sweep.csv"), 0, "t_inf_est").parse().unwrap();
    assert_eq!(single, swept, "a one-cell sweep must equal the plain run");
}

#[test]
fn check_battery_passes() {
    let out = bin().arg("check").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().filter(|l| l.starts_with("[PASS]")).count() >= 10);
    assert!(!text.contains("[FAIL]"));
}

#[test]
fn elliptic_profile_schema() {
    let dir = tmp_dir("elliptic");
    write(
        &dir.join("config.toml"),
        r#"
[absorption]
kind = "power"
m = 3.0

[geometry]
radius = 1.0
dimension = 3

[elliptic]
beta = 10.0
"#,
    );
    let status = bin()
        .args(["elliptic", "--config"])
        .arg(dir.join("config.toml"))
        .arg("--out")
        .arg(dir.join("run"))
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(dir.join("run/profile.csv")).unwrap();
    assert!(text.starts_with("r,u,u_prime,psi_inv_of_dist,ratio\n"));
    let ok: f64 = csv_cell(&dir.join("run/summary.csv"), 0, "gradient_bound_ok").parse().unwrap();
    assert_eq!(ok, 1.0);
}
