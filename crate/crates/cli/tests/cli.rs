use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SOLVE: &str = r#"
[domain]
delta = 0.2

[mesh]
h = 0.005

[kernel]
family = "constant"

[forcing]
kind = "polynomial"
coeffs = [0.0, 0.0, 12.0]

[collar]
kind = "polynomial"
left = [0.0, 0.0, 0.0, 0.0, 1.0]
right = [0.0, 0.0, 0.0, 0.0, 1.0]
"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nonloc-stab")).args(args).output().expect("binary runs")
}

fn config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn go(cmd: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_writes_profile_and_manifest() {
    let t = TempDir::new().unwrap();
    let out = t.path().join("out");
    let o = go("solve", &config(t.path(), SOLVE), &out, &["--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let profile = fs::read_to_string(out.join("solution.csv")).unwrap();
    // 200 cells in Ω, 40 in each collar side, plus the header
    assert_eq!(profile.lines().count(), 281);
    assert!(fs::read_to_string(out.join("manifest.toml")).unwrap().contains("command = \"solve\""));
    assert!(!out.join(".nonloc-stab.lock").exists());
}

#[test]
fn power_law_above_one_is_a_config_error() {
    let t = TempDir::new().unwrap();
    let text = SOLVE.replace("family = \"constant\"", "family = \"power_law\"\neps = 1.5");
    let out = t.path().join("out");
    let o = go("solve", &config(t.path(), &text), &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("integrability requires ε<1"), "{}", stderr(&o));
    assert!(stderr(&o).contains("kernel.eps"));
    // validation failed, so nothing was created
    assert!(!out.exists());
}

#[test]
fn unknown_key_is_named_with_position() {
    let t = TempDir::new().unwrap();
    let text = SOLVE.replace("[kernel]", "[kernle]");
    let o = go("solve", &config(t.path(), &text), &t.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("kernle"), "{e}");
    assert!(e.contains("config 8:"), "{e}");
}

#[test]
fn h_not_below_delta_is_rejected() {
    let t = TempDir::new().unwrap();
    let o = go("solve", &config(t.path(), SOLVE), &t.path().join("out"), &["--h", "0.25"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--h"));
}

#[test]
fn unwritable_out_dir_exits_3() {
    let t = TempDir::new().unwrap();
    let blocker = t.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let o = go("solve", &config(t.path(), SOLVE), &blocker.join("out"), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn missing_config_file_exits_3() {
    let t = TempDir::new().unwrap();
    let o = go("solve", &t.path().join("absent.toml"), &t.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn locked_out_dir_is_refused() {
    let t = TempDir::new().unwrap();
    let out = t.path().join("out");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join(".nonloc-stab.lock"), "pid = 1\n").unwrap();
    let o = go("solve", &config(t.path(), SOLVE), &out, &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("in use"));
    assert!(!out.join("solution.csv").exists());
}

#[test]
fn c2_infeasible_audit_reports_not_applicable() {
    let t = TempDir::new().unwrap();
    let text = format!("{SOLVE}\n[perturbed.forcing]\nkind = \"polynomial\"\ncoeffs = [1.0, 0.0, 12.0]\n");
    let out = t.path().join("out");
    let o = go("audit", &config(t.path(), &text), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let reports = fs::read_to_string(out.join("reports.csv")).unwrap();
    let row = reports.lines().find(|l| l.starts_with("mean_value_weighted")).unwrap();
    assert!(row.contains("not applicable"), "{row}");
    let energy = reports.lines().find(|l| l.starts_with("energy,")).unwrap();
    assert!(energy.contains("satisfied"));
}

#[test]
fn audit_needs_exactly_one_perturbation() {
    let t = TempDir::new().unwrap();
    let text = format!(
        "{SOLVE}\n[perturbed.forcing]\nkind = \"zero\"\n\n[perturbed.collar]\nkind = \"zero\"\n"
    );
    let out = t.path().join("out");
    let o = go("audit", &config(t.path(), &text), &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("perturbed"));
    assert!(!out.exists());
}

#[test]
fn kernel_audit_runs_both_variants() {
    let t = TempDir::new().unwrap();
    let text = format!("{SOLVE}\n[perturbed.kernel]\nfamily = \"power_law\"\neps = 0.2\n");
    let out = t.path().join("out");
    let o = go("audit", &config(t.path(), &text), &out, &["--h", "0.02"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("kernel_slices") && stdout.contains("kernel_l2"), "{stdout}");
}

#[test]
fn preset_is_reproducible() {
    let t = TempDir::new().unwrap();
    let cfg = config(t.path(), "[preset]\nname = \"sinusoid\"\n");
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    for d in [&a, &b] {
        let o = go("preset", &cfg, d, &["--quiet"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n == "sinusoid_table.csv"));
    assert!(names.iter().any(|n| n == "sinusoid_profile_1.csv"));
    for n in &names {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n:?}");
    }
}

#[test]
fn preset_rejects_problem_tables() {
    let t = TempDir::new().unwrap();
    let text = format!("[preset]\nname = \"sinusoid\"\n{SOLVE}");
    let o = go("preset", &config(t.path(), &text), &t.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn identities_prints_a_pass_table() {
    let t = TempDir::new().unwrap();
    let cfg = config(t.path(), "[identities]\ntrials = 20\nseed = 3\n");
    let out = t.path().join("out");
    let o = go("identities", &cfg, &out, &["--h", "0.02"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("integration_by_parts") && stdout.contains("pass"));
    assert!(!stdout.contains("FAIL"));
    assert!(out.join("identities.csv").exists());
}

#[test]
fn bad_arguments_exit_1() {
    assert_eq!(run(&["frobnicate", "--config", "x", "--out", "y"]).status.code(), Some(1));
    assert_eq!(run(&["solve"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
