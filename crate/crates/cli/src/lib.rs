//! `nonloc-stab`: config-driven front end over the nonloc core.

// `!(x > 0)`-style guards are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;

use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use nonloc::experiments::{emit_tables, run_preset};
use nonloc::identities::{run_suite, IdentityCheck};
use nonloc::solve::solve_semilinear;
use nonloc::stability::{audit_kernel_solved, bond_removal_solved, AuditContext, KernelVariant, Solved};
use nonloc::{build_mesh, field_norm, BoundReport, KernelFamily, Region};

pub use config::{parse_config, AuditKind, Command, ConfigError, Job, RunConfig};

/// Failure categories; see [`CliError::exit_code`].
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("I/O failure: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<nonloc::Error> for CliError {
    fn from(e: nonloc::Error) -> Self {
        match e {
            nonloc::Error::Io(m) => CliError::Io(m),
            e => CliError::Numeric(e.to_string()),
        }
    }
}

fn io(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Reads and validates the config file. Nothing numeric runs here.
pub fn load(command: Command, config: &Path, out_dir: PathBuf, h: Option<f64>, quiet: bool) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(config).map_err(|e| io(config, e))?;
    let job = parse_config(&text, command, h)?;
    Ok(RunConfig { command, job, out_dir, quiet })
}

const LOCK: &str = ".nonloc-stab.lock";

/// Exclusive hold on an output directory for the duration of a run.
struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    fn acquire(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let path = dir.join(LOCK);
        let mut f = OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::AlreadyExists => {
                CliError::Io(format!("{} is in use by another run (remove {LOCK} if stale)", dir.display()))
            }
            _ => io(&path, e),
        })?;
        writeln!(f, "pid = {}", std::process::id()).map_err(|e| io(&path, e))?;
        Ok(Self { path })
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn write(dir: &Path, name: &str, body: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let mut f = File::create(&path).map_err(|e| io(&path, e))?;
    f.write_all(body.as_bytes()).map_err(|e| io(&path, e))?;
    Ok(path)
}

fn csv_line(fields: &[String]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(fields).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn reports_csv(reports: &[BoundReport<f64>]) -> String {
    let mut s = csv_line(&["estimate", "verdict", "lhs", "rhs", "ratio", "constant", "hypotheses"].map(String::from));
    for r in reports {
        let hyp = r.hypotheses.iter().map(|h| format!("{}={}:{}", h.name, h.value, if h.pass { "ok" } else { "fails" })).collect::<Vec<_>>();
        s += &csv_line(&[
            r.estimate.to_string(),
            r.verdict.to_string(),
            r.lhs_norm.to_string(),
            r.rhs_norm.to_string(),
            r.ratio.to_string(),
            r.constant.to_string(),
            hyp.join(";"),
        ]);
    }
    s
}

fn reports_table(reports: &[BoundReport<f64>]) -> String {
    let mut s = format!("{:<22} {:>12} {:>12} {:>12}  {}\n", "estimate", "ratio", "constant", "lhs", "verdict");
    for r in reports {
        s += &format!("{:<22} {:>12.6e} {:>12.6e} {:>12.6e}  {}\n", r.estimate.label(), r.ratio, r.constant, r.lhs_norm, r.verdict);
        for h in r.hypotheses.iter().filter(|h| !h.pass) {
            s += &format!("{:<22} hypothesis {} fails ({})\n", "", h.name, h.value);
        }
    }
    s
}

fn identities_table(checks: &[IdentityCheck]) -> String {
    let mut s = format!("{:<22} {:<24} {:>12} {:>10}  {}\n", "check", "kernel", "worst", "threshold", "result");
    for c in checks {
        s += &format!(
            "{:<22} {:<24} {:>12.3e} {:>10.0e}  {}\n",
            c.name,
            c.kernel,
            c.worst,
            c.threshold,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    s
}

fn manifest(cfg: &RunConfig, files: &[PathBuf]) -> String {
    let cmd = match cfg.command {
        Command::Solve => "solve",
        Command::Audit => "audit",
        Command::Preset => "preset",
        Command::Identities => "identities",
    };
    let names: Vec<String> = files.iter().filter_map(|p| p.file_name()).map(|n| format!("{:?}", n.to_string_lossy())).collect();
    format!("software = \"nonloc-stab {}\"\ncommand = \"{cmd}\"\nfiles = [{}]\n", env!("CARGO_PKG_VERSION"), names.join(", "))
}

/// Runs a validated job; returns the text shown on stdout.
pub fn execute(cfg: &RunConfig) -> Result<String, CliError> {
    let _lock = OutputLock::acquire(&cfg.out_dir)?;
    let dir = &cfg.out_dir;
    let mut files = Vec::new();
    let text = match &cfg.job {
        Job::Solve { problem, h, semilinear } => {
            let mesh = build_mesh(&problem.domain, *h)?;
            let sol = solve_semilinear(problem, &mesh, *semilinear)?;
            let path = dir.join("solution.csv");
            sol.field.write_csv(&path)?;
            files.push(path);
            let norms = [
                ("l2_omega", field_norm(&sol.field, Region::Omega, 2.0)),
                ("l2_closure", field_norm(&sol.field, Region::Closure, 2.0)),
                ("linf_omega", field_norm(&sol.field, Region::Omega, f64::INFINITY)),
            ];
            let mut summary = csv_line(&["quantity".into(), "value".into()]);
            for (k, v) in norms {
                summary += &csv_line(&[k.into(), v.to_string()]);
            }
            summary += &csv_line(&["iterations".into(), sol.iterations.to_string()]);
            files.push(write(dir, "summary.csv", &summary)?);
            let mut s = format!("cells {}, iterations {}\n", mesh.len(), sol.iterations);
            for (k, v) in norms {
                s += &format!("{k:<12} {v:.6e}\n");
            }
            s
        }
        Job::Audit { kind, base, perturbed, h, semilinear } => {
            let mesh = build_mesh(&base.domain, *h)?;
            let reports = match kind {
                AuditKind::Forcing => AuditContext::new(&base.kernel, &mesh)?.forcing(base, perturbed)?,
                AuditKind::Collar => AuditContext::new(&base.kernel, &mesh)?.collar(base, perturbed)?,
                AuditKind::Nonlinear => vec![AuditContext::new(&base.kernel, &mesh)?.nonlinear(base, perturbed, *semilinear)?],
                AuditKind::Kernel => {
                    let s1 = Solved::new(base, &mesh)?;
                    let s2 = Solved::new(perturbed, &mesh)?;
                    match perturbed.kernel.family() {
                        KernelFamily::BondRemoval { base: b, excised, .. } if **b == base.kernel => {
                            vec![bond_removal_solved(&s1, &s2, *excised)?]
                        }
                        _ => vec![
                            audit_kernel_solved(&s1, &s2, KernelVariant::Slices)?,
                            audit_kernel_solved(&s1, &s2, KernelVariant::L2)?,
                        ],
                    }
                }
            };
            files.push(write(dir, "reports.csv", &reports_csv(&reports))?);
            reports_table(&reports)
        }
        Job::Preset { id, overrides } => {
            let result = run_preset(*id, overrides)?;
            files.extend(emit_tables(&result, dir, overrides)?);
            // the preset writer leaves its own manifest; nothing more to add
            return Ok(result.table_csv()?);
        }
        Job::Identities { h, trials, seed } => {
            let checks = run_suite(*h, *trials, *seed)?;
            let mut body = csv_line(&["check", "kernel", "worst", "threshold", "trials", "pass"].map(String::from));
            for c in &checks {
                body += &csv_line(&[
                    c.name.clone(),
                    c.kernel.clone(),
                    c.worst.to_string(),
                    c.threshold.to_string(),
                    c.trials.to_string(),
                    c.pass.to_string(),
                ]);
            }
            files.push(write(dir, "identities.csv", &body)?);
            let table = identities_table(&checks);
            write(dir, "manifest.toml", &manifest(cfg, &files))?;
            if let Some(c) = checks.iter().find(|c| !c.pass) {
                return Err(CliError::Numeric(format!("identity {} on {} off by {:e}\n{table}", c.name, c.kernel, c.worst)));
            }
            return Ok(table);
        }
    };
    write(dir, "manifest.toml", &manifest(cfg, &files))?;
    Ok(text)
}
