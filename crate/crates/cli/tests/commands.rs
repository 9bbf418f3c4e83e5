use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vortwave"))
}

fn config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str], config: Option<&Path>, out: Option<&Path>) -> Output {
    let mut cmd = bin();
    cmd.args(args);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    if let Some(o) = out {
        cmd.arg("--out").arg(o);
    }
    cmd.output().unwrap()
}

const ONSET: &str = "vorticity = zero\nr = 1.8\nnq = 32\nnp = 24\na0 = 1e-3\n";

#[test]
fn regime_reports_and_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let ok = config(dir.path(), "ok.conf", "vorticity = zero\nr = 2.0\n");
    let out = run(&["regime"], Some(&ok), Some(dir.path()));
    assert_eq!(out.status.code(), Some(0));
    let reg: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((reg["s_minus"].as_f64().unwrap() - 0.539).abs() < 1e-3);
    assert_eq!(reg["d0"], "inf");
    assert!(dir.path().join("regime.json").exists());
    for r in ["1.4", "1.5"] {
        let c = config(dir.path(), "low.conf", &format!("vorticity = zero\nr = {r}\n"));
        let out = run(&["regime"], Some(&c), Some(dir.path()));
        assert_eq!(out.status.code(), Some(2), "r = {r}");
    }
}

#[test]
fn sweep_writes_one_directory_per_r() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path(), "sweep.conf", "vorticity = constant\nvorticity_value = 0.2\nr = 1.7, 1.9, 2.1\n");
    let out = bin().args(["regime", "--jobs", "3", "--config"]).arg(&c).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    for r in ["1.7", "1.9", "2.1"] {
        assert!(dir.path().join(format!("r_{r}")).join("regime.json").exists());
    }
}

#[test]
fn usage_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let zero = config(dir.path(), "zero.conf", &ONSET.replace("a0 = 1e-3", "a0 = 0"));
    assert_eq!(run(&["bifurcate"], Some(&zero), Some(dir.path())).status.code(), Some(3));
    let missing = config(dir.path(), "missing.conf", "vorticity = zero\nr = 1.8\nnp = 24\na0 = 1e-3\n");
    let out = run(&["bifurcate"], Some(&missing), Some(dir.path()));
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`nq`"));
    assert_eq!(run(&["regime"], None, None).status.code(), Some(3));
    assert_eq!(run(&["frobnicate"], None, None).status.code(), Some(3));
}

fn onset_dir() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path(), "onset.conf", ONSET);
    let out = run(&["bifurcate"], Some(&c), Some(&dir.path().join("branch")));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    (dir, c)
}

fn current_stem(branch: &Path) -> PathBuf {
    let state: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(branch.join("state.json")).unwrap()).unwrap();
    branch.join(state["current"].as_str().unwrap())
}

#[test]
fn verify_passes_stored_wave_and_flags_damage() {
    let (dir, c) = onset_dir();
    let stem = current_stem(&dir.path().join("branch"));
    let csv = stem.with_extension("csv");
    let report = dir.path().join("report");
    let out = bin().arg("verify").arg(&csv).arg("--config").arg(&c).arg("--out").arg(&report).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let diag: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(diag["diagnostics"]["bounds"].as_array().unwrap().iter().all(|b| b["pass"] == true));
    let velocity = std::fs::read_to_string(report.join("velocity.csv")).unwrap();
    assert!(velocity.starts_with("x,y,psi_x,psi_y\n"));
    assert!(std::fs::read_to_string(report.join("surface.csv")).unwrap().starts_with("x,eta\n"));

    // lift one surface node
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let row = 25;
    let cols: Vec<&str> = lines[row].split(',').collect();
    let h: f64 = cols[2].parse().unwrap();
    lines[row] = format!("{},{},{:.16e}", cols[0], cols[1], h + 1e-3);
    let bumped = dir.path().join("bumped.csv");
    std::fs::write(&bumped, lines.join("\n") + "\n").unwrap();
    std::fs::copy(stem.with_extension("json"), bumped.with_extension("json")).unwrap();
    assert_eq!(bin().arg("verify").arg(&bumped).arg("--config").arg(&c).output().unwrap().status.code(), Some(1));

    let truncated = dir.path().join("short.csv");
    std::fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    std::fs::copy(stem.with_extension("json"), truncated.with_extension("json")).unwrap();
    assert_eq!(bin().arg("verify").arg(&truncated).arg("--config").arg(&c).output().unwrap().status.code(), Some(3));
}

#[test]
fn continue_from_seed_checkpoint() {
    let (dir, _) = onset_dir();
    let body = format!("{ONSET}max_points = 6\nseed_checkpoint = branch\n");
    let c = config(dir.path(), "cont.conf", &body);
    let out = run(&["continue"], Some(&c), Some(&dir.path().join("cont")));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let outcome: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(outcome["label"], "Undecided");
    let log = std::fs::read_to_string(dir.path().join("cont").join("branch.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 6);
    assert!(dir.path().join("cont").join("outcome.json").exists());
}

fn log_line(r: f64, t: f64) -> String {
    format!(
        "{{\"index\":0,\"t\":{t},\"r\":{r},\"lambda\":2.5,\"Lambda\":2.5,\"amplitude\":0.1,\"max_eta\":1.7,\
         \"min_eta\":1.5,\"stagnation_gap\":0.1,\"max_slope\":0.2,\"residual_norm\":1e-12,\"iterations\":2,\
         \"bernoulli_residual\":1e-12,\"flowforce_spread\":1e-7,\"flow_force\":2.0,\"G_surface_max\":1e-7,\
         \"crest_angle\":null,\"diagnostics_pass\":true}}\n"
    )
}

#[test]
fn export_tables() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("three.jsonl");
    std::fs::write(&log, [0.0, 0.1, 0.2].map(|t| log_line(1.8, t)).concat()).unwrap();
    let out_dir = dir.path().join("tables");
    assert_eq!(bin().arg("export").arg(&log).arg("--out").arg(&out_dir).status().unwrap().code(), Some(0));
    for (name, header) in [
        ("lambda_vs_t.csv", "t,Lambda"),
        ("gap_vs_t.csv", "t,stagnation_gap"),
        ("flow_force.csv", "r,flow_force"),
    ] {
        let text = std::fs::read_to_string(out_dir.join(name)).unwrap();
        assert_eq!(text.lines().next(), Some(header));
        assert_eq!(text.lines().count(), 4);
    }

    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let empty_out = dir.path().join("empty_tables");
    assert_eq!(bin().arg("export").arg(&empty).arg("--out").arg(&empty_out).status().unwrap().code(), Some(0));
    assert_eq!(std::fs::read_to_string(empty_out.join("gap_vs_t.csv")).unwrap(), "t,stagnation_gap\n");

    let mixed = dir.path().join("mixed.jsonl");
    std::fs::write(&mixed, log_line(1.8, 0.0) + &log_line(2.0, 0.1)).unwrap();
    let out = bin().arg("export").arg(&mixed).arg("--out").arg(dir.path()).output().unwrap();
    assert_ne!(out.status.code(), Some(0));
}
