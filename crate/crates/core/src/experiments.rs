//! Named parameter sweeps: each preset fixes a problem family, a baseline
//! parameter and a grid, solves every member, and audits it against the baseline.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::discretize::{build_mesh, Field, Mesh};
use crate::domain::{DomainSpec, Interval, Region};
use crate::error::{Error, Result};
use crate::kernels::{BondMode, KernelSpec};
use crate::scalar::Scalar;
use crate::solve::{CollarData, ForcingSpec, IterationMethod, LinearSystem, ProblemSpec, SemilinearOptions};
use crate::stability::{
    audit_kernel_solved, bond_removal_solved, discrete_normalized_gap, field_norm, power_law_poincare, AuditContext,
    BoundReport, KernelVariant, Solved,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetId {
    Sinusoid,
    Sigmoid,
    Collar,
    KernelSingularity,
    HeterogeneousX,
    BondRemoval,
    NonlinearEta,
    NonlinearTheta,
    ExpKernelEta,
    ExpKernelTheta,
    DeltaSweep,
}

impl PresetId {
    pub const ALL: [PresetId; 11] = [
        PresetId::Sinusoid,
        PresetId::Sigmoid,
        PresetId::Collar,
        PresetId::KernelSingularity,
        PresetId::HeterogeneousX,
        PresetId::BondRemoval,
        PresetId::NonlinearEta,
        PresetId::NonlinearTheta,
        PresetId::ExpKernelEta,
        PresetId::ExpKernelTheta,
        PresetId::DeltaSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PresetId::Sinusoid => "sinusoid",
            PresetId::Sigmoid => "sigmoid",
            PresetId::Collar => "collar",
            PresetId::KernelSingularity => "kernel_singularity",
            PresetId::HeterogeneousX => "heterogeneous_x",
            PresetId::BondRemoval => "bond_removal",
            PresetId::NonlinearEta => "nonlinear_eta",
            PresetId::NonlinearTheta => "nonlinear_theta",
            PresetId::ExpKernelEta => "exp_kernel_eta",
            PresetId::ExpKernelTheta => "exp_kernel_theta",
            PresetId::DeltaSweep => "delta_sweep",
        }
    }

    /// Grid, baseline and horizon.
    fn defaults(self) -> (Vec<f64>, f64, f64) {
        match self {
            PresetId::Sinusoid => (vec![1.0, 2.0, 3.0, 4.0], 0.0, 0.2),
            PresetId::Sigmoid => (vec![0.1, 0.2, 0.3, 0.4], 0.0, 0.2),
            PresetId::Collar => (vec![0.075, 0.05, 0.025, 0.0], 0.1, 0.1),
            PresetId::KernelSingularity => (vec![0.2, 0.4, 0.6, 0.8], 0.0, 0.2),
            PresetId::HeterogeneousX => (vec![0.2, 0.3, 0.4, 0.5], 0.1, 0.2),
            PresetId::BondRemoval => (vec![0.01, 0.02, 0.03, 0.04], 0.0, 0.2),
            PresetId::NonlinearEta => (vec![1.0, 2.0, 3.0, 4.0], 0.0, 0.1),
            PresetId::NonlinearTheta => (vec![4.5, 4.0, 3.5, 3.0], 5.0, 0.1),
            PresetId::ExpKernelEta => (vec![0.1, 0.2, 0.3, 0.4], 0.0, 0.1),
            PresetId::ExpKernelTheta => (vec![0.9, 0.8, 0.7, 0.6], 1.0, 0.1),
            PresetId::DeltaSweep => (vec![0.15, 0.175, 0.225, 0.25], 0.2, 0.2),
        }
    }

    /// Header of the emitted table; the first four columns are always
    /// parameter, data norm, solution norm, ratio.
    pub fn table_columns(self) -> &'static [&'static str] {
        match self {
            PresetId::Sinusoid | PresetId::Sigmoid => &["eps", "df_l2", "du_l2", "ratio"],
            PresetId::Collar => &["eps", "dg_l2", "du_l2", "ratio"],
            PresetId::KernelSingularity => &["eps", "b", "du_l2", "ratio", "c_p"],
            PresetId::HeterogeneousX => &["eps", "b", "du_l2", "ratio", "constant", "dmu_l2", "k_f"],
            PresetId::BondRemoval => &["eps", "b", "du_l2", "ratio_squared", "dmu_l2", "u2_l2"],
            PresetId::NonlinearEta | PresetId::ExpKernelEta => &["eta", "df_sup", "du_l2", "ratio"],
            PresetId::NonlinearTheta | PresetId::ExpKernelTheta => &["theta", "df_sup", "du_l2", "ratio"],
            PresetId::DeltaSweep => &["delta", "d_delta", "du_l2", "slope"],
        }
    }
}

impl fmt::Display for PresetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PresetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PresetId::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Incompatible(format!("unknown preset `{s}`")))
    }
}

/// The tunable parts of a preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Overrides<T> {
    pub h: Option<T>,
    pub grid: Option<Vec<T>>,
    pub tol: Option<T>,
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Preset<T: Scalar> {
    pub id: PresetId,
    pub h: T,
    pub grid: Vec<T>,
    pub baseline: T,
    pub delta: T,
    pub semilinear: SemilinearOptions<T>,
}

impl<T: Scalar> Preset<T> {
    pub fn new(id: PresetId, overrides: &Overrides<T>) -> Result<Self> {
        let (grid, baseline, delta) = id.defaults();
        let mut semilinear = SemilinearOptions::default();
        if matches!(id, PresetId::ExpKernelEta | PresetId::ExpKernelTheta) {
            // C_P·L ≫ 1 here, so the fixed-point map is not a contraction
            semilinear.method = IterationMethod::Newton;
        }
        if let Some(t) = overrides.tol {
            if !(t > T::zero()) {
                return Err(Error::InvalidMesh(format!("tolerance must be positive, got {t}")));
            }
            semilinear.tol = t;
        }
        if let Some(m) = overrides.max_iter {
            semilinear.max_iter = m;
        }
        let grid = overrides.grid.clone().unwrap_or_else(|| grid.into_iter().map(T::lit).collect());
        if grid.is_empty() || grid.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidMesh("preset grid must be non-empty and finite".into()));
        }
        Ok(Self { id, h: overrides.h.unwrap_or(T::lit(1.0 / 200.0)), grid, baseline: T::lit(baseline), delta: T::lit(delta), semilinear })
    }

    fn domain(&self) -> Result<DomainSpec<T>> {
        DomainSpec::unit(self.delta)
    }

    /// The problem at parameter value `p`.
    pub fn problem(&self, p: T) -> Result<ProblemSpec<T>> {
        let d = self.delta;
        let domain = self.domain()?;
        let quartic_collar = || CollarData::Polynomial { left: quartic(), right: quartic() };
        let parabola = ForcingSpec::Polynomial { coeffs: vec![T::zero(), T::zero(), T::lit(12.0)] };
        let constant = || KernelSpec::constant_standard(d);
        let (kernel, forcing, collar) = match self.id {
            PresetId::Sinusoid => (
                constant()?,
                ForcingSpec::PiecewiseSinusoid { eps: p },
                CollarData::Polynomial { left: monomial(3), right: monomial(4) },
            ),
            PresetId::Sigmoid => (
                constant()?,
                ForcingSpec::Sigmoid { eps: p },
                CollarData::Polynomial {
                    left: vec![T::lit(-0.5), T::one()],
                    right: vec![T::lit(0.125), T::lit(-0.5), T::lit(0.5)],
                },
            ),
            PresetId::Collar => (constant()?, parabola, CollarData::PiecewiseJump { eps: p }),
            PresetId::KernelSingularity => (KernelSpec::power_law(p, d)?, parabola, quartic_collar()),
            PresetId::HeterogeneousX => (KernelSpec::heterogeneous_exp(p, d)?, parabola, quartic_collar()),
            PresetId::BondRemoval => {
                let base = constant()?;
                let k = if p == T::zero() {
                    base
                } else {
                    let half = T::lit(0.5);
                    KernelSpec::bond_removal(base, Interval::new(half - p, half + p)?, BondMode::Decouple)?
                };
                (k, ForcingSpec::Zero, CollarData::Linear)
            }
            PresetId::NonlinearEta => (constant()?, ForcingSpec::NonlinearArctan { eta: p, theta: T::one() }, CollarData::Zero),
            PresetId::NonlinearTheta => {
                (constant()?, ForcingSpec::NonlinearArctan { eta: T::one() / T::lit(9.0), theta: p }, CollarData::Zero)
            }
            PresetId::ExpKernelEta => {
                (KernelSpec::truncated_gaussian(d)?, ForcingSpec::NonlinearArctan { eta: p, theta: T::one() }, CollarData::Zero)
            }
            PresetId::ExpKernelTheta => (
                KernelSpec::truncated_gaussian(d)?,
                ForcingSpec::NonlinearArctan { eta: T::one() / T::lit(9.0), theta: p },
                CollarData::Zero,
            ),
            PresetId::DeltaSweep => {
                let domain = DomainSpec::unit(p)?;
                return ProblemSpec::new(domain, KernelSpec::constant_standard(p)?, parabola, quartic_collar());
            }
        };
        ProblemSpec::new(domain, kernel, forcing, collar)
    }
}

fn monomial<T: Scalar>(k: usize) -> Vec<T> {
    let mut c = vec![T::zero(); k + 1];
    c[k] = T::one();
    c
}

fn quartic<T: Scalar>() -> Vec<T> {
    monomial(4)
}

fn ratio<T: Scalar>(a: T, b: T) -> T {
    if a == T::zero() {
        T::zero()
    } else {
        a / b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow<T: Scalar> {
    pub parameter: T,
    /// values in the order of [`PresetId::table_columns`], parameter first
    pub values: Vec<T>,
    /// bound reports against the baseline, primary first (empty for the δ sweep)
    pub reports: Vec<BoundReport<T>>,
}

impl<T: Scalar> TableRow<T> {
    pub fn data_norm(&self) -> T {
        self.values[1]
    }

    pub fn solution_norm(&self) -> T {
        self.values[2]
    }

    pub fn ratio(&self) -> T {
        self.values[3]
    }

    pub fn column(&self, id: PresetId, name: &str) -> Option<T> {
        id.table_columns().iter().position(|c| *c == name).map(|i| self.values[i])
    }

    pub fn primary(&self) -> Option<&BoundReport<T>> {
        self.reports.first()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult<T: Scalar> {
    pub preset: Preset<T>,
    /// mesh of the baseline problem
    pub mesh: Mesh<T>,
    pub baseline_field: Field<T>,
    pub fields: Vec<Field<T>>,
    pub rows: Vec<TableRow<T>>,
    pub footnotes: Vec<String>,
}

impl<T: Scalar> ExperimentResult<T> {
    pub fn id(&self) -> PresetId {
        self.preset.id
    }

    pub fn ratios(&self) -> Vec<T> {
        self.rows.iter().map(TableRow::ratio).collect()
    }

    pub fn column(&self, name: &str) -> Vec<T> {
        self.rows.iter().filter_map(|r| r.column(self.id(), name)).collect()
    }

    /// The table as CSV text, footnotes as trailing `#` lines.
    pub fn table_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = self.id().table_columns().iter().map(|s| s.to_string()).collect();
        header.extend(["estimate", "constant", "bound_lhs", "bound_rhs", "bound_ratio", "verdict"].map(String::from));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec: Vec<String> = r.values.iter().map(|v| v.to_string()).collect();
            match r.primary() {
                Some(b) => rec.extend([
                    b.estimate.to_string(),
                    b.constant.to_string(),
                    b.lhs_norm.to_string(),
                    b.rhs_norm.to_string(),
                    b.ratio.to_string(),
                    b.verdict.to_string(),
                ]),
                None => rec.extend(std::iter::repeat_n(String::new(), 6)),
            }
            w.write_record(&rec)?;
        }
        let mut s = String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?).map_err(|e| Error::Io(e.to_string()))?;
        for f in &self.footnotes {
            s.push_str("# ");
            s.push_str(f);
            s.push('\n');
        }
        Ok(s)
    }

    /// Every bound report, one CSV row each.
    pub fn reports_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["parameter", "estimate", "constant", "lhs", "rhs", "ratio", "verdict", "hypotheses", "extras"])?;
        for r in &self.rows {
            for b in &r.reports {
                let hyps: Vec<String> =
                    b.hypotheses.iter().map(|h| format!("{}={}:{}", h.name, h.value, if h.pass { "pass" } else { "fail" })).collect();
                let extras: Vec<String> = b.extras.iter().map(|(k, v)| format!("{k}={v}")).collect();
                w.write_record([
                    r.parameter.to_string(),
                    b.estimate.to_string(),
                    b.constant.to_string(),
                    b.lhs_norm.to_string(),
                    b.rhs_norm.to_string(),
                    b.ratio.to_string(),
                    b.verdict.to_string(),
                    hyps.join("; "),
                    extras.join("; "),
                ])?;
            }
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?).map_err(|e| Error::Io(e.to_string()))
    }
}

fn tag<T: Scalar>(id: PresetId, p: T) -> impl FnOnce(Error) -> Error {
    move |e| Error::Preset { preset: id.to_string(), parameter: p.f64(), source: Box::new(e) }
}

/// Solves the baseline and every grid member and audits each against the baseline.
pub fn run_preset<T: Scalar>(id: PresetId, overrides: &Overrides<T>) -> Result<ExperimentResult<T>> {
    let preset = Preset::new(id, overrides)?;
    let b = preset.baseline;
    let base = preset.problem(b).map_err(tag(id, b))?;
    let mesh = build_mesh(&base.domain, preset.h)?;
    let mut footnotes = Vec::new();
    if id == PresetId::Sigmoid && overrides.grid.is_none() {
        footnotes.push("grid {0.1, 0.2, 0.3, 0.4}: the source table lists 0.3 twice; the second row is read as 0.2".into());
    }

    let (baseline_field, out) = match id {
        PresetId::Sinusoid | PresetId::Sigmoid | PresetId::Collar => {
            let ctx = AuditContext::new(&base.kernel, &mesh)?;
            let u0 = ctx.solve(&base).map_err(tag(id, b))?;
            let rows = preset
                .grid
                .par_iter()
                .map(|&p| {
                    let run = || -> Result<(Field<T>, TableRow<T>)> {
                        let prob = preset.problem(p)?;
                        let u = ctx.solve(&prob)?;
                        let reports =
                            if id == PresetId::Collar { ctx.collar(&base, &prob)? } else { ctx.forcing(&base, &prob)? };
                        let data = reports[0].rhs_norm;
                        // the collar table measures the change over Ω∪Γ, where it includes Δg itself
                        let region = if id == PresetId::Collar { Region::Closure } else { Region::Omega };
                        let du = field_norm(&u.sub(&u0), region, T::lit(2.0));
                        Ok((u, TableRow { parameter: p, values: vec![p, data, du, ratio(du, data)], reports }))
                    };
                    run().map_err(tag(id, p))
                })
                .collect::<Result<Vec<_>>>()?;
            (u0, rows)
        }
        PresetId::KernelSingularity | PresetId::HeterogeneousX => {
            let s0 = Solved::new(&base, &mesh).map_err(tag(id, b))?;
            let rows = preset
                .grid
                .par_iter()
                .map(|&p| {
                    let run = || -> Result<(Field<T>, TableRow<T>)> {
                        let s = Solved::new(&preset.problem(p)?, &mesh)?;
                        let l2 = audit_kernel_solved(&s0, &s, KernelVariant::L2)?;
                        let slices = audit_kernel_solved(&s0, &s, KernelVariant::Slices)?;
                        let x = |k: &str| l2.extra(k).unwrap_or(T::nan());
                        let du = l2.lhs_norm;
                        let u0 = x("u1_l2_omega");
                        let values = if id == PresetId::KernelSingularity {
                            let bb = T::lit(2.0) * u0 * discrete_normalized_gap(&s0, &s) + x("k_sup") * x("f_l2");
                            vec![p, bb, du, ratio(du, bb), power_law_poincare(p)]
                        } else {
                            let kf = x("lambda_gap") * x("f_l2");
                            let bb = u0 * x("diff_l2") + kf;
                            vec![p, bb, du, ratio(du, bb), l2.constant, x("diff_l2"), kf]
                        };
                        Ok((s.field, TableRow { parameter: p, values, reports: vec![l2, slices] }))
                    };
                    run().map_err(tag(id, p))
                })
                .collect::<Result<Vec<_>>>()?;
            (s0.field, rows)
        }
        PresetId::BondRemoval => {
            let s0 = Solved::new(&base, &mesh).map_err(tag(id, b))?;
            let rows = preset
                .grid
                .par_iter()
                .map(|&p| {
                    let run = || -> Result<(Field<T>, TableRow<T>)> {
                        let s = Solved::new(&preset.problem(p)?, &mesh)?;
                        let half = T::lit(0.5);
                        let r = bond_removal_solved(&s0, &s, Interval::new(half - p, half + p.max(T::epsilon()))?)?;
                        let x = |k: &str| r.extra(k).unwrap_or(T::nan());
                        // the printed ‖u₂‖ column is the Ω norm
                        let bb = T::lit(2.0) * x("u2_l2_omega") * x("diff_l2");
                        let du = r.lhs_norm;
                        let values = vec![p, bb, du, ratio(du * du, bb), x("diff_l2"), x("u2_l2_omega")];
                        Ok((s.field, TableRow { parameter: p, values, reports: vec![r] }))
                    };
                    run().map_err(tag(id, p))
                })
                .collect::<Result<Vec<_>>>()?;
            (s0.field, rows)
        }
        PresetId::NonlinearEta | PresetId::NonlinearTheta | PresetId::ExpKernelEta | PresetId::ExpKernelTheta => {
            let ctx = AuditContext::new(&base.kernel, &mesh)?;
            let opts = preset.semilinear;
            let u0 = ctx.solve_semilinear(&base, opts).map_err(tag(id, b))?;
            let rows = preset
                .grid
                .par_iter()
                .map(|&p| {
                    let run = || -> Result<(Field<T>, TableRow<T>)> {
                        let prob = preset.problem(p)?;
                        let u = ctx.solve_semilinear(&prob, opts)?;
                        let r = ctx.nonlinear(&base, &prob, opts)?;
                        let du = r.lhs_norm;
                        // the constant-kernel θ table lists |Δθ| rather than the sup 2|Δθ|
                        let data = if id == PresetId::NonlinearTheta { (p - b).abs() } else { r.rhs_norm };
                        Ok((u, TableRow { parameter: p, values: vec![p, data, du, ratio(du, data)], reports: vec![r] }))
                    };
                    run().map_err(tag(id, p))
                })
                .collect::<Result<Vec<_>>>()?;
            (u0, rows)
        }
        PresetId::DeltaSweep => {
            let u0 = solve_on(&base, preset.h).map_err(tag(id, b))?;
            let rows = preset
                .grid
                .par_iter()
                .map(|&p| {
                    let run = || -> Result<(Field<T>, TableRow<T>)> {
                        let u = solve_on(&preset.problem(p)?, preset.h)?;
                        let du = omega_gap(&u0, &u)?;
                        let dd = (p - b).abs();
                        Ok((u, TableRow { parameter: p, values: vec![p, dd, du, ratio(du, dd)], reports: Vec::new() }))
                    };
                    run().map_err(tag(id, p))
                })
                .collect::<Result<Vec<_>>>()?;
            (u0, rows)
        }
    };
    let (fields, rows) = out.into_iter().unzip();
    Ok(ExperimentResult { preset, mesh, baseline_field, fields, rows, footnotes })
}

fn solve_on<T: Scalar>(p: &ProblemSpec<T>, h: T) -> Result<Field<T>> {
    let mesh = build_mesh(&p.domain, h)?;
    let sys = LinearSystem::assemble(&p.kernel, &mesh)?;
    sys.solve(&p.forcing_values(&mesh), &p.collar_values(&mesh))
}

/// ‖u₂ − u₁‖_{L²(Ω)} for fields on meshes sharing Ω and h but not the collar.
fn omega_gap<T: Scalar>(a: &Field<T>, b: &Field<T>) -> Result<T> {
    let (va, vb) = (a.omega_values(), b.omega_values());
    if va.len() != vb.len() || a.mesh().h() != b.mesh().h() {
        return Err(Error::Incompatible("fields do not share an Ω mesh".into()));
    }
    let s: T = va.iter().zip(&vb).map(|(x, y)| (*y - *x) * (*y - *x)).sum();
    Ok((s * a.mesh().h()).sqrt())
}

/// Writes `<preset>_table.csv`, `<preset>_reports.csv`, one profile per parameter
/// (plus the baseline), and `manifest.toml`. Returns the paths written.
pub fn emit_tables<T: Scalar>(result: &ExperimentResult<T>, out_dir: &Path, overrides: &Overrides<T>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let name = result.id().name();
    let mut written = Vec::new();
    let mut put = |file: String, body: String| -> Result<()> {
        let path = out_dir.join(file);
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    put(format!("{name}_table.csv"), result.table_csv()?)?;
    if result.rows.iter().any(|r| !r.reports.is_empty()) {
        put(format!("{name}_reports.csv"), result.reports_csv()?)?;
    }
    put(format!("{name}_profile_baseline.csv"), profile_csv(&result.baseline_field)?)?;
    for (r, f) in result.rows.iter().zip(&result.fields) {
        put(format!("{name}_profile_{}.csv", r.parameter), profile_csv(f)?)?;
    }
    put("manifest.toml".into(), manifest(result, overrides))?;
    Ok(written)
}

fn profile_csv<T: Scalar>(f: &Field<T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "u"])?;
    for (x, u) in f.mesh().midpoints().iter().zip(f.values()) {
        w.write_record([x.to_string(), u.to_string()])?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?).map_err(|e| Error::Io(e.to_string()))
}

fn manifest<T: Scalar>(r: &ExperimentResult<T>, o: &Overrides<T>) -> String {
    let list = |v: &[T]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
    let opt = |v: Option<String>| v.unwrap_or_else(|| "\"default\"".into());
    let p = &r.preset;
    format!(
        "software = \"nonloc-core {}\"\npreset = \"{}\"\nh = {}\ndelta = {}\nbaseline = {}\ngrid = [{}]\ncells = {}\n\n[overrides]\nh = {}\ngrid = {}\ntol = {}\nmax_iter = {}\n",
        env!("CARGO_PKG_VERSION"),
        p.id,
        r.mesh.h(),
        p.delta,
        p.baseline,
        list(&p.grid),
        r.mesh.len(),
        opt(o.h.map(|h| h.to_string())),
        opt(o.grid.as_ref().map(|g| format!("[{}]", list(g)))),
        opt(o.tol.map(|t| t.to_string())),
        opt(o.max_iter.map(|m| m.to_string())),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for id in PresetId::ALL {
            assert_eq!(id.name().parse::<PresetId>().unwrap(), id);
        }
        assert!("sinus".parse::<PresetId>().is_err());
    }

    #[test]
    fn every_preset_builds_its_problems() {
        for id in PresetId::ALL {
            let p = Preset::<f64>::new(id, &Overrides::default()).unwrap();
            p.problem(p.baseline).unwrap();
            for &g in &p.grid {
                p.problem(g).unwrap();
            }
            assert!(p.id.table_columns().len() >= 4);
        }
    }

    #[test]
    fn baseline_against_itself() {
        let o = Overrides { h: Some(0.02), grid: Some(vec![0.0]), ..Default::default() };
        let r = run_preset::<f64>(PresetId::Sinusoid, &o).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(&r.rows[0].values[1..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn sigmoid_footnote_only_on_default_grid() {
        let o = Overrides { h: Some(0.05), ..Default::default() };
        assert_eq!(run_preset::<f64>(PresetId::Sigmoid, &o).unwrap().footnotes.len(), 1);
        let o = Overrides { h: Some(0.05), grid: Some(vec![0.1]), ..Default::default() };
        assert!(run_preset::<f64>(PresetId::Sigmoid, &o).unwrap().footnotes.is_empty());
    }
}
