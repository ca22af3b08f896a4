//! Problem data, the dense linear solve, and semilinear iterations.

use serde::{Deserialize, Serialize};

use crate::discretize::{assemble, AssembledOperator, Field, Mesh};
use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::linalg::{DenseMatrix, Lu};
use crate::scalar::Scalar;

fn poly<T: Scalar>(c: &[T], x: T) -> T {
    c.iter().rev().fold(T::zero(), |acc, &a| acc * x + a)
}

/// Right-hand sides f(x) or f(x, u).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub enum ForcingSpec<T> {
    /// 6x + 4 sin(20εx) for x ≤ ½, 12x² beyond
    PiecewiseSinusoid { eps: T },
    /// logistic step of width ε at x = ½; ε = 0 is the Heaviside step
    Sigmoid { eps: T },
    /// Σ c_k x^k
    Polynomial { coeffs: Vec<T> },
    Zero,
    /// 2(η arctan u + θ)/(x² + 1)
    NonlinearArctan { eta: T, theta: T },
}

impl<T: Scalar> ForcingSpec<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidDomain(m));
        match self {
            ForcingSpec::PiecewiseSinusoid { eps } if !eps.is_finite() => bad("sinusoid ε must be finite".into()),
            ForcingSpec::Sigmoid { eps } if !(eps.is_finite() && *eps >= T::zero()) => {
                bad(format!("sigmoid width must be ≥ 0, got {eps}"))
            }
            ForcingSpec::Polynomial { coeffs } if coeffs.iter().any(|c| !c.is_finite()) => {
                bad("polynomial coefficients must be finite".into())
            }
            ForcingSpec::NonlinearArctan { eta, theta } if !(eta.is_finite() && theta.is_finite() && *eta >= T::zero()) => {
                bad(format!("arctan forcing needs finite θ and η ≥ 0, got η={eta}, θ={theta}"))
            }
            _ => Ok(()),
        }
    }

    pub fn is_u_independent(&self) -> bool {
        !matches!(self, ForcingSpec::NonlinearArctan { eta, .. } if *eta != T::zero())
    }

    /// Lipschitz constant of f in u (sup over x ∈ Ω ⊂ ℝ of |∂f/∂u|, taken at x = 0).
    pub fn lipschitz_in_u(&self) -> T {
        match self {
            ForcingSpec::NonlinearArctan { eta, .. } => T::lit(2.0) * *eta,
            _ => T::zero(),
        }
    }

    pub fn eval(&self, x: T, u: T) -> T {
        let half = T::lit(0.5);
        match self {
            ForcingSpec::PiecewiseSinusoid { eps } => {
                if x <= half {
                    T::lit(6.0) * x + T::lit(4.0) * (T::lit(20.0) * *eps * x).sin()
                } else {
                    T::lit(12.0) * x * x
                }
            }
            ForcingSpec::Sigmoid { eps } => {
                if *eps == T::zero() {
                    return if x > half {
                        T::one()
                    } else if x < half {
                        T::zero()
                    } else {
                        half
                    };
                }
                let z = (x - half) / *eps;
                if z >= T::zero() {
                    T::one() / (T::one() + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (T::one() + e)
                }
            }
            ForcingSpec::Polynomial { coeffs } => poly(coeffs, x),
            ForcingSpec::Zero => T::zero(),
            ForcingSpec::NonlinearArctan { eta, theta } => {
                T::lit(2.0) * (*eta * u.atan() + *theta) / (x * x + T::one())
            }
        }
    }

    /// ∂f/∂u
    pub fn du(&self, x: T, u: T) -> T {
        match self {
            ForcingSpec::NonlinearArctan { eta, .. } => T::lit(2.0) * *eta / ((T::one() + u * u) * (x * x + T::one())),
            _ => T::zero(),
        }
    }

    /// Jump locations in x.
    pub fn discontinuities(&self) -> Vec<T> {
        match self {
            ForcingSpec::PiecewiseSinusoid { .. } => vec![T::lit(0.5)],
            ForcingSpec::Sigmoid { eps } if *eps == T::zero() => vec![T::lit(0.5)],
            _ => Vec::new(),
        }
    }

    /// sup over x ∈ Ω, u ∈ ℝ of |f₂(x,u) − f₁(x,u)| in closed form, where one exists.
    pub fn sup_difference(&self, other: &Self, domain: &DomainSpec<T>) -> Option<T> {
        use ForcingSpec::NonlinearArctan as A;
        let (a, b) = (domain.omega.lo, domain.omega.hi);
        // sup of 1/(x²+1) over the closure of Ω
        let weight = if a <= T::zero() && b >= T::zero() {
            T::one()
        } else {
            let m = a.abs().min(b.abs());
            T::one() / (m * m + T::one())
        };
        let arctan = |f: &Self| match f {
            A { eta, theta } => Some((*eta, *theta)),
            ForcingSpec::Zero => Some((T::zero(), T::zero())),
            _ => None,
        };
        let (e1, t1) = arctan(self)?;
        let (e2, t2) = arctan(other)?;
        // |Δη arctan u + Δθ| peaks at |Δη|π/2 + |Δθ| as u → ±∞
        let s = (e2 - e1).abs() * T::FRAC_PI_2() + (t2 - t1).abs();
        Some(T::lit(2.0) * s * weight)
    }
}

/// Volume-constraint data g on Γ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub enum CollarData<T> {
    /// polynomial on each side, ascending coefficients
    Polynomial { left: Vec<T>, right: Vec<T> },
    /// 1 on (−δ, −ε), x⁴ elsewhere on Γ
    PiecewiseJump { eps: T },
    Zero,
    /// g(x) = x
    Linear,
}

impl<T: Scalar> CollarData<T> {
    pub fn eval(&self, x: T, domain: &DomainSpec<T>) -> T {
        let left = x < domain.omega.lo;
        match self {
            CollarData::Polynomial { left: l, right: r } => poly(if left { l } else { r }, x),
            CollarData::PiecewiseJump { eps } => {
                if left && x < -*eps {
                    T::one()
                } else {
                    x.powi(4)
                }
            }
            CollarData::Zero => T::zero(),
            CollarData::Linear => x,
        }
    }

    pub fn discontinuities(&self) -> Vec<T> {
        match self {
            CollarData::PiecewiseJump { eps } => vec![-*eps],
            _ => Vec::new(),
        }
    }

    /// g(x) = c, both sides.
    pub fn constant(c: T) -> Self {
        CollarData::Polynomial { left: vec![c], right: vec![c] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct ProblemSpec<T: Scalar> {
    pub domain: DomainSpec<T>,
    pub kernel: KernelSpec<T>,
    pub forcing: ForcingSpec<T>,
    pub collar: CollarData<T>,
}

impl<T: Scalar> ProblemSpec<T> {
    pub fn new(domain: DomainSpec<T>, kernel: KernelSpec<T>, forcing: ForcingSpec<T>, collar: CollarData<T>) -> Result<Self> {
        if (kernel.delta() - domain.delta).abs() > domain.delta * T::lit(1e-12) {
            return Err(Error::Incompatible(format!(
                "kernel horizon {} differs from the domain's {}",
                kernel.delta(),
                domain.delta
            )));
        }
        forcing.validate()?;
        Ok(Self { domain, kernel, forcing, collar })
    }

    /// f sampled on Ω-cells at u = 0 (exact for u-independent forcing).
    pub fn forcing_values(&self, mesh: &Mesh<T>) -> Vec<T> {
        mesh.omega_cells().map(|i| self.forcing.eval(mesh.midpoint(i), T::zero())).collect()
    }

    pub fn collar_values(&self, mesh: &Mesh<T>) -> Vec<T> {
        mesh.gamma_cells().into_iter().map(|i| self.collar.eval(mesh.midpoint(i), &self.domain)).collect()
    }

    /// f (Ω-cells) and g (Γ-cells) as one field.
    pub fn data_field(&self, mesh: &Mesh<T>) -> Result<Field<T>> {
        let mut v = vec![T::zero(); mesh.len()];
        for (i, f) in mesh.omega_cells().zip(self.forcing_values(mesh)) {
            v[i] = f;
        }
        for (i, g) in mesh.gamma_cells().into_iter().zip(self.collar_values(mesh)) {
            v[i] = g;
        }
        Field::new(*mesh, v)
    }
}

/// A factored operator, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct LinearSystem<T> {
    op: AssembledOperator<T>,
    lu: Lu<T>,
    condition: T,
}

fn condition_limit<T: Scalar>() -> T {
    T::lit(1e12).min(T::lit(0.01) / T::epsilon())
}

/// A with decoupled rows replaced by identity rows (u = 0 there).
fn pinned<T: Scalar>(op: &AssembledOperator<T>) -> DenseMatrix<T> {
    let mut a = op.a().clone();
    for &r in op.decoupled() {
        a.row_mut(r).iter_mut().for_each(|v| *v = T::zero());
        a[(r, r)] = T::one();
    }
    a
}

fn factor_checked<T: Scalar>(a: &DenseMatrix<T>) -> Result<(Lu<T>, T)> {
    let lu = Lu::factor(a)?;
    let condition = lu.condition_estimate();
    if !(condition <= condition_limit::<T>()) {
        let (row, pivot) = lu.smallest_pivot();
        return Err(Error::IllConditioned { condition: condition.f64(), row, pivot: pivot.f64() });
    }
    Ok((lu, condition))
}

impl<T: Scalar> LinearSystem<T> {
    pub fn new(op: AssembledOperator<T>) -> Result<Self> {
        if !op.decoupled().is_empty() {
            log::warn!(
                "{} Ω-cells carry no kernel mass; they are pinned to zero and their values are not physical",
                op.decoupled().len()
            );
        }
        let (lu, condition) = factor_checked(&pinned(&op))?;
        Ok(Self { op, lu, condition })
    }

    pub fn assemble(kernel: &KernelSpec<T>, mesh: &Mesh<T>) -> Result<Self> {
        Self::new(assemble(kernel, mesh)?)
    }

    pub fn operator(&self) -> &AssembledOperator<T> {
        &self.op
    }

    pub fn condition(&self) -> T {
        self.condition
    }

    /// Solves A u_Ω = f − B g; `f` on Ω-cells, `g` on Γ-cells.
    pub fn solve(&self, f: &[T], g: &[T]) -> Result<Field<T>> {
        let mesh = *self.op.mesh();
        if let Some(i) = f.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("forcing in Ω-cell {i}")));
        }
        let bg = self.op.b().matvec(g);
        let mut rhs: Vec<T> = f.iter().zip(&bg).map(|(a, b)| *a - *b).collect();
        for &r in self.op.decoupled() {
            rhs[r] = T::zero();
        }
        let uo = self.lu.solve(&rhs);
        let mut v = vec![T::zero(); mesh.len()];
        for (i, u) in mesh.omega_cells().zip(&uo) {
            v[i] = *u;
        }
        for (i, x) in mesh.gamma_cells().into_iter().zip(g) {
            v[i] = *x;
        }
        let field = Field::new(mesh, v)?;
        self.check_residual(&field, f)?;
        Ok(field)
    }

    fn check_residual(&self, u: &Field<T>, f: &[T]) -> Result<()> {
        let lu = self.op.apply(u);
        let fmax = f.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let skip = self.op.decoupled();
        let res = lu
            .iter()
            .zip(f)
            .enumerate()
            .filter(|(r, _)| !skip.contains(r))
            .fold(T::zero(), |m, (_, (a, b))| m.max((*a - *b).abs()));
        let umax = u.values().iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let scale = self.op.a().max_abs() * umax * T::of(self.op.a().rows());
        let tol = (T::lit(1e-9) * (T::one() + fmax)).max(T::lit(10.0) * T::epsilon() * scale);
        if !(res <= tol) {
            return Err(Error::NoConvergence { iterations: 1, residual: res.f64() });
        }
        Ok(())
    }
}

pub fn solve_linear<T: Scalar>(problem: &ProblemSpec<T>, mesh: &Mesh<T>) -> Result<Field<T>> {
    if !problem.forcing.is_u_independent() {
        return Err(Error::Incompatible("solve_linear needs a forcing independent of u".into()));
    }
    let sys = LinearSystem::assemble(&problem.kernel, mesh)?;
    sys.solve(&problem.forcing_values(mesh), &problem.collar_values(mesh))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationMethod {
    #[default]
    Picard,
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SemilinearOptions<T> {
    pub tol: T,
    pub max_iter: usize,
    pub method: IterationMethod,
}

impl<T: Scalar> Default for SemilinearOptions<T> {
    fn default() -> Self {
        Self { tol: T::lit(1e-10), max_iter: 500, method: IterationMethod::Picard }
    }
}

#[derive(Debug, Clone)]
pub struct SemilinearSolution<T> {
    pub field: Field<T>,
    pub iterations: usize,
    /// ‖u^{k+1} − u^k‖_∞ per iteration
    pub increments: Vec<T>,
}

pub fn solve_semilinear<T: Scalar>(
    problem: &ProblemSpec<T>,
    mesh: &Mesh<T>,
    opts: SemilinearOptions<T>,
) -> Result<SemilinearSolution<T>> {
    let sys = LinearSystem::assemble(&problem.kernel, mesh)?;
    solve_semilinear_with(&sys, problem, opts)
}

/// As [`solve_semilinear`] with a pre-assembled system for `problem.kernel`.
pub fn solve_semilinear_with<T: Scalar>(
    sys: &LinearSystem<T>,
    problem: &ProblemSpec<T>,
    opts: SemilinearOptions<T>,
) -> Result<SemilinearSolution<T>> {
    let mesh = *sys.operator().mesh();
    let g = problem.collar_values(&mesh);
    let xs: Vec<T> = mesh.omega_cells().map(|i| mesh.midpoint(i)).collect();
    let forcing = |u: &[T]| -> Result<Vec<T>> {
        let f: Vec<T> = xs.iter().zip(u).map(|(&x, &v)| problem.forcing.eval(x, v)).collect();
        match f.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite(format!("forcing at x = {}", xs[i]))),
            None => Ok(f),
        }
    };
    if problem.forcing.is_u_independent() {
        let field = sys.solve(&forcing(&vec![T::zero(); xs.len()])?, &g)?;
        return Ok(SemilinearSolution { field, iterations: 1, increments: vec![] });
    }
    if opts.method == IterationMethod::Picard {
        warn_if_not_contractive(problem);
    }
    let mut u = vec![T::zero(); xs.len()];
    let mut increments = Vec::new();
    for k in 1..=opts.max_iter {
        let next = match opts.method {
            IterationMethod::Picard => sys.solve(&forcing(&u)?, &g)?.omega_values(),
            IterationMethod::Newton => newton_step(sys, problem, &xs, &u, &g)?,
        };
        let inc = next.iter().zip(&u).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
        if !inc.is_finite() {
            return Err(Error::NonFinite(format!("iterate {k}")));
        }
        increments.push(inc);
        u = next;
        if inc < opts.tol {
            let mut v = vec![T::zero(); mesh.len()];
            for (i, x) in mesh.omega_cells().zip(&u) {
                v[i] = *x;
            }
            for (i, x) in mesh.gamma_cells().into_iter().zip(&g) {
                v[i] = *x;
            }
            return Ok(SemilinearSolution { field: Field::new(mesh, v)?, iterations: k, increments });
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, residual: increments.last().map_or(f64::NAN, |v| v.f64()) })
}

fn newton_step<T: Scalar>(sys: &LinearSystem<T>, problem: &ProblemSpec<T>, xs: &[T], u: &[T], g: &[T]) -> Result<Vec<T>> {
    let op = sys.operator();
    let mut j = pinned(op);
    let au = op.a().matvec(u);
    let bg = op.b().matvec(g);
    let mut r: Vec<T> = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        if op.decoupled().contains(&i) {
            r.push(u[i]);
            continue;
        }
        let f = problem.forcing.eval(xs[i], u[i]);
        if !f.is_finite() {
            return Err(Error::NonFinite(format!("forcing at x = {}", xs[i])));
        }
        r.push(au[i] + bg[i] - f);
        j[(i, i)] = j[(i, i)] - problem.forcing.du(xs[i], u[i]);
    }
    let (lu, _) = factor_checked(&j)?;
    let d = lu.solve(&r);
    Ok(u.iter().zip(d).map(|(a, b)| *a - b).collect())
}

fn warn_if_not_contractive<T: Scalar>(problem: &ProblemSpec<T>) {
    let l = problem.forcing.lipschitz_in_u();
    if l == T::zero() {
        return;
    }
    if let Ok(cp) = crate::stability::poincare_constant(&problem.kernel, &problem.domain, T::lit(2.0)) {
        if cp.c_p * l >= T::one() {
            log::warn!("C_P·L = {} ≥ 1: Picard iteration is not guaranteed to contract", (cp.c_p * l).f64());
        }
    }
}

/// A strictly monotone scalar map with a known inverse on its range.
pub trait MonotoneMap<T>: Sync {
    fn forward(&self, z: T) -> T;
    /// None outside the invertible range.
    fn inverse(&self, v: T) -> Option<T>;
}

pub struct IdentityMap;

impl<T: Scalar> MonotoneMap<T> for IdentityMap {
    fn forward(&self, z: T) -> T {
        z
    }
    fn inverse(&self, v: T) -> Option<T> {
        Some(v)
    }
}

/// sin on [−π/2, π/2].
pub struct SineMap;

impl<T: Scalar> MonotoneMap<T> for SineMap {
    fn forward(&self, z: T) -> T {
        z.sin()
    }
    fn inverse(&self, v: T) -> Option<T> {
        (v.abs() <= T::one()).then(|| v.asin())
    }
}

/// Solves ∫(h(u(y)) − h(u(x)))μ = f with u = g on Γ, through v = h(u).
pub fn solve_with_nonlinearity_in_operator<T: Scalar>(
    problem: &ProblemSpec<T>,
    map: &dyn MonotoneMap<T>,
    mesh: &Mesh<T>,
) -> Result<Field<T>> {
    if !problem.forcing.is_u_independent() {
        return Err(Error::Incompatible("the forcing must not depend on u here".into()));
    }
    let g = problem.collar_values(mesh);
    let hg: Vec<T> = g.iter().map(|&z| map.forward(z)).collect();
    let sys = LinearSystem::assemble(&problem.kernel, mesh)?;
    let v = sys.solve(&problem.forcing_values(mesh), &hg)?;
    let mut out = vec![T::zero(); mesh.len()];
    let mut bad = Vec::new();
    for i in mesh.omega_cells() {
        match map.inverse(v.values()[i]) {
            Some(u) => out[i] = u,
            None => bad.push(i),
        }
    }
    if !bad.is_empty() {
        return Err(Error::RangeViolation(bad));
    }
    for (i, x) in mesh.gamma_cells().into_iter().zip(g) {
        out[i] = x;
    }
    Field::new(*mesh, out)
}
