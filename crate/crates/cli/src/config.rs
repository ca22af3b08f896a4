//! TOML run configuration: parsed strictly, then validated into core types before
//! anything numeric happens.

use std::fmt;
use std::path::PathBuf;

use serde::Deserialize;

use nonloc::experiments::{Overrides, PresetId};
use nonloc::solve::{CollarData, ForcingSpec, IterationMethod, ProblemSpec, SemilinearOptions};
use nonloc::{BondMode, DomainSpec, Interval, KernelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Audit,
    Preset,
    Identities,
}

impl Command {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "solve" => Command::Solve,
            "audit" => Command::Audit,
            "preset" => Command::Preset,
            "identities" => Command::Identities,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Syntax { line: usize, column: usize, message: String },
    Semantic { path: String, message: String },
}

impl ConfigError {
    fn at(path: &str, message: impl Into<String>) -> Self {
        ConfigError::Semantic { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax { line, column, message } => write!(f, "config {line}:{column}: {message}"),
            ConfigError::Semantic { path, message } => write!(f, "config key `{path}`: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    domain: Option<RawDomain>,
    mesh: Option<RawMesh>,
    kernel: Option<RawKernel>,
    forcing: Option<RawForcing>,
    collar: Option<RawCollar>,
    perturbed: Option<RawPerturbed>,
    preset: Option<RawPreset>,
    tolerances: Option<RawTolerances>,
    identities: Option<RawIdentities>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    a: Option<f64>,
    b: Option<f64>,
    delta: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMesh {
    h: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
enum RawKernel {
    /// c on the ball; defaults to 3δ⁻³
    Constant { c: Option<f64> },
    PowerLaw { eps: f64 },
    HeterogeneousExp { eps: f64 },
    TruncatedGaussian,
    /// constant kernel with the bonds touching `excised` removed
    BondRemoval { c: Option<f64>, excised: [f64; 2], mode: Option<RawBondMode> },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawBondMode {
    Decouple,
    CrossOnly,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawForcing {
    PiecewiseSinusoid { eps: f64 },
    Sigmoid { eps: f64 },
    Polynomial { coeffs: Vec<f64> },
    Zero,
    NonlinearArctan { eta: f64, theta: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawCollar {
    Polynomial { left: Vec<f64>, right: Vec<f64> },
    PiecewiseJump { eps: f64 },
    Zero,
    Linear,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPerturbed {
    kernel: Option<RawKernel>,
    forcing: Option<RawForcing>,
    collar: Option<RawCollar>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPreset {
    name: String,
    grid: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    tol: Option<f64>,
    max_iter: Option<usize>,
    method: Option<IterationMethod>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIdentities {
    trials: Option<usize>,
    seed: Option<u64>,
}

/// What changes between the two problems of an audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditKind {
    Forcing,
    Collar,
    Kernel,
    Nonlinear,
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Job {
    Solve { problem: ProblemSpec<f64>, h: f64, semilinear: SemilinearOptions<f64> },
    Audit { kind: AuditKind, base: ProblemSpec<f64>, perturbed: ProblemSpec<f64>, h: f64, semilinear: SemilinearOptions<f64> },
    Preset { id: PresetId, overrides: Overrides<f64> },
    Identities { h: f64, trials: usize, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub job: Job,
    pub out_dir: PathBuf,
    pub quiet: bool,
}

fn syntax(text: &str, e: toml::de::Error) -> ConfigError {
    let (line, column) = match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
            (line, column)
        }
        None => (0, 0),
    };
    ConfigError::Syntax { line, column, message: e.message().trim().to_string() }
}

fn positive(path: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::at(path, format!("must be a positive number, got {v}")))
    }
}

fn finite(path: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::at(path, format!("must be finite, got {v}")))
    }
}

fn domain(raw: &Option<RawDomain>) -> Result<DomainSpec<f64>, ConfigError> {
    let d = raw.as_ref().ok_or_else(|| ConfigError::at("domain", "missing table"))?;
    let delta = positive("domain.delta", d.delta)?;
    let a = finite("domain.a", d.a.unwrap_or(0.0))?;
    let b = finite("domain.b", d.b.unwrap_or(1.0))?;
    if !(b > a) {
        return Err(ConfigError::at("domain.b", format!("must exceed domain.a ({a}), got {b}")));
    }
    DomainSpec::new(a, b, delta).map_err(|e| ConfigError::at("domain", e.to_string()))
}

fn kernel(path: &str, raw: &RawKernel, delta: f64) -> Result<KernelSpec<f64>, ConfigError> {
    let wrap = |r: nonloc::Result<KernelSpec<f64>>| r.map_err(|e| ConfigError::at(path, e.to_string()));
    match raw {
        RawKernel::Constant { c } => match c {
            Some(c) => wrap(KernelSpec::constant(positive(&format!("{path}.c"), *c)?, delta)),
            None => wrap(KernelSpec::constant_standard(delta)),
        },
        RawKernel::PowerLaw { eps } => {
            let p = format!("{path}.eps");
            if !(finite(&p, *eps)? < 1.0) {
                return Err(ConfigError::at(&p, format!("integrability requires ε<1, got {eps}")));
            }
            if *eps < 0.0 {
                return Err(ConfigError::at(&p, format!("must be ≥ 0, got {eps}")));
            }
            wrap(KernelSpec::power_law(*eps, delta))
        }
        RawKernel::HeterogeneousExp { eps } => wrap(KernelSpec::heterogeneous_exp(finite(&format!("{path}.eps"), *eps)?, delta)),
        RawKernel::TruncatedGaussian => wrap(KernelSpec::truncated_gaussian(delta)),
        RawKernel::BondRemoval { c, excised, mode } => {
            let p = format!("{path}.excised");
            let iv = Interval::new(finite(&p, excised[0])?, finite(&p, excised[1])?).map_err(|e| ConfigError::at(&p, e.to_string()))?;
            let base = match c {
                Some(c) => wrap(KernelSpec::constant(positive(&format!("{path}.c"), *c)?, delta))?,
                None => wrap(KernelSpec::constant_standard(delta))?,
            };
            let mode = match mode.unwrap_or(RawBondMode::Decouple) {
                RawBondMode::Decouple => BondMode::Decouple,
                RawBondMode::CrossOnly => BondMode::CrossOnly,
            };
            wrap(KernelSpec::bond_removal(base, iv, mode))
        }
    }
}

fn forcing(path: &str, raw: &RawForcing) -> Result<ForcingSpec<f64>, ConfigError> {
    let f = match raw.clone() {
        RawForcing::PiecewiseSinusoid { eps } => ForcingSpec::PiecewiseSinusoid { eps },
        RawForcing::Sigmoid { eps } => ForcingSpec::Sigmoid { eps },
        RawForcing::Polynomial { coeffs } => ForcingSpec::Polynomial { coeffs },
        RawForcing::Zero => ForcingSpec::Zero,
        RawForcing::NonlinearArctan { eta, theta } => ForcingSpec::NonlinearArctan { eta, theta },
    };
    f.validate().map_err(|e| ConfigError::at(path, e.to_string()))?;
    Ok(f)
}

fn collar(path: &str, raw: &RawCollar) -> Result<CollarData<f64>, ConfigError> {
    let c = match raw.clone() {
        RawCollar::Polynomial { left, right } => {
            if left.iter().chain(&right).any(|v| !v.is_finite()) {
                return Err(ConfigError::at(path, "coefficients must be finite"));
            }
            CollarData::Polynomial { left, right }
        }
        RawCollar::PiecewiseJump { eps } => CollarData::PiecewiseJump { eps: positive_or_zero(&format!("{path}.eps"), eps)? },
        RawCollar::Zero => CollarData::Zero,
        RawCollar::Linear => CollarData::Linear,
    };
    Ok(c)
}

fn positive_or_zero(path: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::at(path, format!("must be ≥ 0, got {v}")))
    }
}

fn mesh_h(raw: &Raw, cli_h: Option<f64>, delta: Option<f64>) -> Result<f64, ConfigError> {
    let (path, h) = match (cli_h, &raw.mesh) {
        (Some(h), _) => ("--h", h),
        (None, Some(m)) => ("mesh.h", m.h),
        (None, None) => ("mesh.h", 1.0 / 200.0),
    };
    let h = positive(path, h)?;
    if let Some(d) = delta {
        if !(h < d) {
            return Err(ConfigError::at(path, format!("mesh width must be below the horizon δ = {d}, got {h}")));
        }
    }
    Ok(h)
}

fn semilinear(raw: &Raw) -> Result<SemilinearOptions<f64>, ConfigError> {
    let mut o = SemilinearOptions::default();
    if let Some(t) = &raw.tolerances {
        if let Some(tol) = t.tol {
            o.tol = positive("tolerances.tol", tol)?;
        }
        if let Some(m) = t.max_iter {
            if m == 0 {
                return Err(ConfigError::at("tolerances.max_iter", "must be at least 1"));
            }
            o.max_iter = m;
        }
        if let Some(m) = t.method {
            o.method = m;
        }
    }
    Ok(o)
}

fn problem(raw: &Raw, d: DomainSpec<f64>) -> Result<ProblemSpec<f64>, ConfigError> {
    let k = raw.kernel.as_ref().ok_or_else(|| ConfigError::at("kernel", "missing table"))?;
    let f = raw.forcing.as_ref().ok_or_else(|| ConfigError::at("forcing", "missing table"))?;
    let c = raw.collar.as_ref().ok_or_else(|| ConfigError::at("collar", "missing table"))?;
    let kernel = kernel("kernel", k, d.delta)?;
    let (forcing, collar) = (forcing("forcing", f)?, collar("collar", c)?);
    ProblemSpec::new(d, kernel, forcing, collar).map_err(|e| ConfigError::at("kernel", e.to_string()))
}

fn reject(raw_present: bool, path: &str, command: &str) -> Result<(), ConfigError> {
    if raw_present {
        Err(ConfigError::at(path, format!("not used by the `{command}` command")))
    } else {
        Ok(())
    }
}

/// Parses and validates `text` for `command`; `cli_h` overrides `mesh.h`.
pub fn parse_config(text: &str, command: Command, cli_h: Option<f64>) -> Result<Job, ConfigError> {
    let raw: Raw = toml::from_str(text).map_err(|e| syntax(text, e))?;
    match command {
        Command::Solve => {
            reject(raw.perturbed.is_some(), "perturbed", "solve")?;
            reject(raw.preset.is_some(), "preset", "solve")?;
            let d = domain(&raw.domain)?;
            let h = mesh_h(&raw, cli_h, Some(d.delta))?;
            Ok(Job::Solve { problem: problem(&raw, d)?, h, semilinear: semilinear(&raw)? })
        }
        Command::Audit => {
            reject(raw.preset.is_some(), "preset", "audit")?;
            let d = domain(&raw.domain)?;
            let h = mesh_h(&raw, cli_h, Some(d.delta))?;
            let base = problem(&raw, d)?;
            let p = raw.perturbed.as_ref().ok_or_else(|| ConfigError::at("perturbed", "missing table"))?;
            let mut perturbed = base.clone();
            let mut changed = Vec::new();
            if let Some(k) = &p.kernel {
                perturbed.kernel = kernel("perturbed.kernel", k, d.delta)?;
                changed.push(AuditKind::Kernel);
            }
            if let Some(f) = &p.forcing {
                perturbed.forcing = forcing("perturbed.forcing", f)?;
                let nonlinear = !(base.forcing.is_u_independent() && perturbed.forcing.is_u_independent());
                changed.push(if nonlinear { AuditKind::Nonlinear } else { AuditKind::Forcing });
            }
            if let Some(c) = &p.collar {
                perturbed.collar = collar("perturbed.collar", c)?;
                changed.push(AuditKind::Collar);
            }
            let kind = match changed.as_slice() {
                [k] => *k,
                [] => return Err(ConfigError::at("perturbed", "set exactly one of kernel, forcing, collar")),
                _ => return Err(ConfigError::at("perturbed", "perturb one of kernel, forcing, collar at a time")),
            };
            if kind == AuditKind::Nonlinear && perturbed.forcing.sup_difference(&base.forcing, &d).is_none() {
                return Err(ConfigError::at(
                    "perturbed.forcing",
                    "u-dependent audits need two nonlinear_arctan (or zero) forcings",
                ));
            }
            if kind != AuditKind::Nonlinear && !base.forcing.is_u_independent() {
                return Err(ConfigError::at("forcing", "kernel and collar audits need a forcing independent of u"));
            }
            Ok(Job::Audit { kind, base, perturbed, h, semilinear: semilinear(&raw)? })
        }
        Command::Preset => {
            for (present, path) in [
                (raw.domain.is_some(), "domain"),
                (raw.kernel.is_some(), "kernel"),
                (raw.forcing.is_some(), "forcing"),
                (raw.collar.is_some(), "collar"),
                (raw.perturbed.is_some(), "perturbed"),
            ] {
                reject(present, path, "preset")?;
            }
            let p = raw.preset.as_ref().ok_or_else(|| ConfigError::at("preset", "missing table"))?;
            let id: PresetId = p.name.parse().map_err(|_| {
                let names: Vec<&str> = PresetId::ALL.iter().map(|p| p.name()).collect();
                ConfigError::at("preset.name", format!("unknown preset `{}`; expected one of {}", p.name, names.join(", ")))
            })?;
            if let Some(g) = &p.grid {
                if g.is_empty() {
                    return Err(ConfigError::at("preset.grid", "must not be empty"));
                }
                for v in g {
                    finite("preset.grid", *v)?;
                }
            }
            let h = if cli_h.is_some() || raw.mesh.is_some() { Some(mesh_h(&raw, cli_h, None)?) } else { None };
            let tol = raw.tolerances.as_ref();
            if tol.and_then(|t| t.method).is_some() {
                return Err(ConfigError::at("tolerances.method", "presets fix their iteration method"));
            }
            let s = semilinear(&raw)?;
            let overrides = Overrides {
                h,
                grid: p.grid.clone(),
                tol: tol.and_then(|t| t.tol).map(|_| s.tol),
                max_iter: tol.and_then(|t| t.max_iter),
            };
            // range checks that depend on the preset's own horizon and family
            let preset = nonloc::experiments::Preset::new(id, &overrides).map_err(|e| ConfigError::at("preset", e.to_string()))?;
            if let Some(h) = overrides.h {
                if !(h < preset.delta) {
                    return Err(ConfigError::at("mesh.h", format!("mesh width must be below the horizon δ = {}", preset.delta)));
                }
            }
            for &g in &preset.grid {
                preset.problem(g).map_err(|e| ConfigError::at("preset.grid", format!("value {g}: {e}")))?;
            }
            Ok(Job::Preset { id, overrides })
        }
        Command::Identities => {
            let h = mesh_h(&raw, cli_h, Some(0.2))?;
            let i = raw.identities.as_ref();
            let trials = i.and_then(|i| i.trials).unwrap_or(100);
            if trials == 0 {
                return Err(ConfigError::at("identities.trials", "must be at least 1"));
            }
            Ok(Job::Identities { h, trials, seed: i.and_then(|i| i.seed).unwrap_or(2021) })
        }
    }
}
