use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn rhodyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rhodyn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, text: &str) -> String {
    let path = dir.path().join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn run_ok(dir: &TempDir, text: &str, extra: &[&str]) -> std::path::PathBuf {
    let cfg = write_config(dir, text);
    let out = dir.path().join("out");
    let mut args = vec!["--config", cfg.as_str(), "--out-dir", out.to_str().unwrap(), "--quiet"];
    args.extend_from_slice(extra);
    let res = rhodyn(&args);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    assert!(res.stdout.is_empty());
    out
}

/// Rows of a CSV file as parsed floats, after checking the header.
fn read_csv(path: &Path, header: &str) -> Vec<Vec<f64>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(header));
    lines
        .map(|l| {
            l.split(',')
                .map(|v| if v.is_empty() { f64::NAN } else { v.parse().unwrap() })
                .collect()
        })
        .collect()
}

const SERIES: &str =
    "t,trace_pre_norm,purity,hermiticity_residual,min_eig,mean_x,mean_p,var_x,continuity_residual_max";

const CLOSED: &str = r#"
scenario = "closed"
[grid]
n = 64
x_min = -10.0
x_max = 10.0
[physics]
potential = "harmonic"
omega = 1.0
[packet]
x0 = 1.0
sigma = 0.8
p0 = 0.5
[evolve]
dt = 0.01
steps = 40
record_every = 5
continuity = true
[output]
snapshot_every = 20
"#;

#[test]
fn closed_trace_constant_and_files_present() {
    let dir = TempDir::new().unwrap();
    let out = run_ok(&dir, CLOSED, &[]);
    let rows = read_csv(&out.join("series.csv"), SERIES);
    assert_eq!(rows.len(), 9);
    for r in &rows {
        assert!((r[1] - 1.0).abs() <= 1e-12, "trace {}", r[1]);
    }
    for step in [0, 20, 40] {
        let d = read_csv(&out.join(format!("rho_diag_{step}.csv")), "x,rho_diag");
        assert_eq!(d.len(), 64);
        let dx = 20.0 / 64.0;
        let mass: f64 = d.iter().map(|r| r[1]).sum::<f64>() * dx;
        assert!((mass - 1.0).abs() < 1e-12);
    }
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.starts_with(&format!("# rhodyn-cli {}", env!("CARGO_PKG_VERSION"))));
    assert!(manifest.contains("scenario = \"closed\""));
    assert!(manifest.contains("omega = 1.0"));
}

#[test]
fn identical_config_and_seed_give_identical_bytes() {
    let text = r#"
scenario = "position-measurement"
[grid]
n = 64
x_min = -16.0
x_max = 16.0
[packet]
x0 = 0.5
sigma = 3.0
[detector]
centers = [-6.0, -2.0, 2.0, 6.0]
width = 3.0
gain = 300.0
[evolve]
dt = 0.001
steps = 100
record_every = 20
[ensemble]
n_runs = 200
seed = 7
[output]
rho_abs = true
"#;
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let oa = run_ok(&a, text, &[]);
    let ob = run_ok(&b, text, &[]);
    let mut names: Vec<_> = fs::read_dir(&oa).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 7);
    for name in names {
        let name = name.to_str().unwrap();
        if name == "manifest.txt" {
            continue;
        }
        assert_eq!(fs::read(oa.join(name)).unwrap(), fs::read(ob.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn position_measurement_concentrates_on_fired_element() {
    let text = r#"
scenario = "position-measurement"
[grid]
n = 128
x_min = -16.0
x_max = 16.0
[packet]
x0 = 0.5
sigma = 3.0
[detector]
centers = [-7.0, -5.0, -3.0, -1.0, 1.0, 3.0, 5.0, 7.0]
width = 1.5
gain = 3000.0
[evolve]
dt = 1e-4
steps = 100
record_every = 100
"#;
    let dir = TempDir::new().unwrap();
    let out = run_ok(&dir, text, &["--seed", "11"]);
    let el = read_csv(&out.join("elements.csv"), "element,center,born_weight,final_mass");
    let fired: Vec<&Vec<f64>> = el.iter().filter(|r| r[3] > 0.5).collect();
    assert_eq!(fired.len(), 1);
    assert!(fired[0][3] >= 0.999);
    let center = fired[0][1];
    let d = read_csv(&out.join("rho_diag_100.csv"), "x,rho_diag");
    let peak = d.iter().max_by(|a, b| a[1].total_cmp(&b[1])).unwrap()[0];
    assert!((peak - center).abs() <= 0.75, "peak {peak} element {center}");
}

#[test]
fn kernel_validation_table_decreases() {
    let text = r#"
scenario = "kernel-validation"
[grid]
n = 256
x_min = -3.5
x_max = 3.5
[kernel]
time = 1.0
slices = [4, 8, 16, 32]
"#;
    let dir = TempDir::new().unwrap();
    let out = run_ok(&dir, text, &[]);
    let rows = read_csv(&out.join("kernel_convergence.csv"), "slices,center_rel_error,max_rel_error");
    assert_eq!(rows.iter().map(|r| r[0] as usize).collect::<Vec<_>>(), vec![4, 8, 16, 32]);
    assert!(rows.windows(2).all(|w| w[1][1] < w[0][1] && w[1][2] < w[0][2]), "{rows:?}");
    assert!(!out.join("series.csv").exists());
}

#[test]
fn csv_values_round_trip_at_double_precision() {
    let dir = TempDir::new().unwrap();
    let out = run_ok(&dir, CLOSED, &[]);
    let text = fs::read_to_string(out.join("series.csv")).unwrap();
    for field in text.lines().skip(1).flat_map(|l| l.split(',')).filter(|f| !f.is_empty()) {
        let v: f64 = field.parse().unwrap();
        assert_eq!(format!("{v:.16e}"), field);
    }
}

#[test]
fn large_grid_matrix_dump_is_raw_f64() {
    let text = CLOSED
        .replace("n = 64", "n = 258")
        .replace("snapshot_every = 20", "snapshot_every = 0\nrho_abs = true");
    let dir = TempDir::new().unwrap();
    let out = run_ok(&dir, &text, &["--steps", "2", "--dt", "0.005"]);
    let bytes = fs::read(out.join("rho_2.f64")).unwrap();
    assert_eq!(bytes.len(), 258 * 258 * 16);
    let re = |k: usize| f64::from_le_bytes(bytes[16 * k..16 * k + 8].try_into().unwrap());
    let im = |k: usize| f64::from_le_bytes(bytes[16 * k + 8..16 * k + 16].try_into().unwrap());
    let dx = 20.0 / 258.0;
    let trace: f64 = (0..258).map(|i| re(i * 258 + i)).sum::<f64>() * dx;
    assert!((trace - 1.0).abs() < 1e-12);
    assert!((0..258).all(|i| im(i * 258 + i).abs() < 1e-14));
    assert!(!out.join("rho_abs_2.csv").exists());
}

#[test]
fn epr_momentum_pipelines_agree() {
    let text = r#"
scenario = "epr-momentum"
[grid]
n = 64
x_min = -6.4
x_max = 6.4
[epr]
sigma_rel = 0.5
sigma_cm = 3.456
gain = 300.0
p2m = 0.9817477042468103
band = 1.4726215563702154
[evolve]
dt = 1e-3
steps = 100
record_every = 100
"#;
    let dir = TempDir::new().unwrap();
    let out = run_ok(&dir, text, &[]);
    let rows = read_csv(&out.join("comparison.csv"), "p,influence_model,composite");
    let p2m = 0.9817477042468103;
    let band = 1.4726215563702154 + 1e-9;
    for col in [1, 2] {
        let inside: f64 = rows.iter().filter(|r| (r[0] + p2m).abs() <= band).map(|r| r[col]).sum();
        assert!(inside >= 0.99, "column {col}: {inside}");
    }
}

#[test]
fn invalid_config_exits_nonzero_listing_all_errors() {
    let text = CLOSED.replace("dt = 0.01", "dt = -0.1").replace("n = 64", "n = 7");
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &text);
    let res = rhodyn(&["--config", &cfg]);
    assert!(!res.status.success());
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("2 configuration errors"), "{err}");
    assert!(err.contains("[evolve] dt: must be finite and > 0, got -0.1"), "{err}");
    assert!(err.contains("[grid] n: must be even and >= 8, got 7"), "{err}");
}

#[test]
fn missing_config_file_and_unknown_scenario_fail() {
    let res = rhodyn(&["--config", "/nonexistent/run.toml"]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("/nonexistent/run.toml"));

    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, CLOSED);
    let res = rhodyn(&["--config", &cfg, "--scenario", "teleport"]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("unknown scenario \"teleport\""));
}

#[test]
fn simulation_errors_exit_nonzero() {
    let text = CLOSED.replace("sigma = 0.8", "sigma = 1e-3");
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &text);
    let out = dir.path().join("out");
    let res = rhodyn(&["--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("simulation failed"));
}
