use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use boulder_traverse::config::ExperimentConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_boulder-traverse"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const FAST: &str = "\n[settings]\nseed_grid = 3\nyaw_samples = 1\n";

#[test]
fn committed_configs_parse() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 5);
}

#[test]
fn flat_landscape_is_constant_and_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("flat.toml");
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = run(&["landscape", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--phi-range", "-0.01", "0.01", "--phi-step", "0.005"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("phi_m,energy_j,alpha_rad"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r[1] == rows[0][1]));
    assert_eq!(rows[0][1], "4.9050000000000005e-1");
    assert!(!text.contains('\r'));
}

#[test]
fn flat_sweep_reports_no_motion() {
    let o = run(&["sweep", "--config", configs_dir().join("flat.toml").to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("connection_c_m,connection_c_ubl,dot_v1v2,displacement_ubl,classification,jamming_count")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.ends_with(",NoMotion,0")));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let flat = configs_dir().join("flat.toml");
    let flat = flat.to_str().unwrap();

    // Empty sweep range.
    let o = run(&["sweep", "--config", flat, "--c-min", "0.06", "--c-max", "0.05"]);
    assert_eq!(o.status.code(), Some(2));

    // Unknown key, reported with its line.
    let bad = write_config(dir.path(), "bad.toml", "[terrain]\nflat = true\nspacing = 0.05\nwobble = 1\n");
    let o = run(&["sweep", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4") && err.contains("wobble"), "{err}");

    // No jamming states on flat ground.
    let o = run(&["jamming", "--config", flat]);
    assert_eq!(o.status.code(), Some(3));

    // No feasible connection on flat ground.
    let o = run(&["plan", "--config", flat]);
    assert_eq!(o.status.code(), Some(3));

    // Relaxation cut off long before convergence.
    let slow = write_config(
        dir.path(),
        "slow.toml",
        "[pair]\nconnection_c = 0.055\n[terrain]\nradius = 0.025\nspacing = 0.05\n[rollout]\nstrides = 1\nstart = [0.013, 0.007, 0.05]\n[settings]\niter_max = 1\n",
    );
    let o = run(&["rollout", "--config", &slow]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));

    // Bad thread cap.
    let o = bin().env("BOULDER_TRAVERSE_THREADS", "zero").args(["sweep", "--config", flat]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));

    // Missing file.
    let o = run(&["sweep", "--config", dir.path().join("nope.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn rollout_csv_layout_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "r.toml",
        &format!(
            "[pair]\nconnection_c = 0.055\n[terrain]\nradius = 0.025\n[[terrain.segments]]\nx_start = 0.0\nx_end = 0.3\nspacing = 0.05\n[[terrain.segments]]\nx_start = 0.3\nx_end = 0.6\nspacing = 0.06\n[rollout]\nstrides = 2\nstart = [0.1, 0.0, 0.0]\n{FAST}"
        ),
    );
    let runs: Vec<String> = (0..2)
        .map(|_| {
            let o = bin().env("BOULDER_TRAVERSE_THREADS", "1").args(["rollout", "--config", &cfg, "--strides", "3"]).output().unwrap();
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            String::from_utf8(o.stdout).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    let lines: Vec<&str> = runs[0].lines().collect();
    assert_eq!(lines[0], "stride,x_m,y_m,theta_rad,z_m,alpha_rad,stance,event");
    // Initial settle plus two touchdown/jam pairs per stride.
    assert_eq!(lines.len(), 1 + 2 + 3 * 4);
    assert!(lines[1].starts_with("0,") && lines[1].ends_with(",group1,Touchdown"));
    assert!(lines[3].starts_with("1,") && lines[3].ends_with(",group2,Touchdown"));
    assert!(lines[4].ends_with(",group2,Jammed"));
}

#[test]
fn plan_failure_names_segment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "p.toml",
        &format!("[terrain]\nflat = true\n[[terrain.segments]]\nx_start = 0.0\nx_end = 0.5\nspacing = 0.05\n[sweep]\nc_min = 0.05\nc_max = 0.051\nc_step = 0.001\n{FAST}"),
    );
    let o = run(&["plan", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("segment 0"));
}
