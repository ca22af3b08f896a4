//! Kernel families μ(x, y) and the functionals λ_μ, γ_μ, M_{μ,p} derived from them.

use serde::{Deserialize, Serialize};

use crate::domain::{DomainSpec, Interval, Region};
use crate::error::{Error, Result};
use crate::quadrature::{adaptive, breakpoints, QuadOptions};
use crate::scalar::Scalar;
use crate::twopoint::{integrate_line, integrate_rect, integrate_x, integrate_y, Abs, Asym, Square, TwoPoint};

/// Which bonds a [`KernelFamily::BondRemoval`] kernel drops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BondMode {
    /// every bond touching the excised interval (it becomes fully decoupled)
    #[default]
    Decouple,
    /// only bonds with exactly one end inside the excised interval
    CrossOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "family",
    rename_all = "snake_case",
    bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>")
)]
pub enum KernelFamily<T: Scalar> {
    Constant { c: T },
    /// (3−ε)δ^{ε−3} |x−y|^{−ε}
    PowerLaw { eps: T },
    /// (4−x) e^{xyε} / δ³
    HeterogeneousExp { eps: T },
    /// c_δ e^{−(x−y)²}, c_δ normalising the mass to one
    TruncatedGaussian,
    BondRemoval {
        base: Box<KernelSpec<T>>,
        excised: Interval<T>,
        #[serde(default)]
        mode: BondMode,
    },
    /// Bilinear interpolation of values on a uniform nx × ny grid (row-major in x); zero off-grid.
    Tabulated { x: Interval<T>, y: Interval<T>, nx: usize, ny: usize, values: Vec<T>, symmetric: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
struct KernelRepr<T: Scalar> {
    #[serde(flatten)]
    family: KernelFamily<T>,
    delta: T,
    #[serde(default = "T::one")]
    scale: T,
}

/// A validated kernel: family, horizon δ, an overall positive scale and symmetry metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "KernelRepr<T>",
    into = "KernelRepr<T>",
    bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct KernelSpec<T: Scalar> {
    family: KernelFamily<T>,
    delta: T,
    scale: T,
    symmetric: bool,
    gauss_c: T,
}

impl<T: Scalar> TryFrom<KernelRepr<T>> for KernelSpec<T> {
    type Error = Error;
    fn try_from(r: KernelRepr<T>) -> Result<Self> {
        Self::new(r.family, r.delta)?.scaled(r.scale)
    }
}

impl<T: Scalar> From<KernelSpec<T>> for KernelRepr<T> {
    fn from(k: KernelSpec<T>) -> Self {
        Self { family: k.family, delta: k.delta, scale: k.scale }
    }
}

/// Translation-invariant profiles k(s) with |s| < δ that admit faster integration.
#[derive(Debug, Clone, Copy)]
enum Profile<T> {
    /// coef·|s|^{−beta}
    Power { coef: T, beta: T, delta: T },
    /// coef·e^{−alpha s²}
    Gauss { coef: T, alpha: T, delta: T },
}

impl<T: Scalar> Profile<T> {
    fn squared(self) -> Self {
        match self {
            Profile::Power { coef, beta, delta } => Profile::Power { coef: coef * coef, beta: beta * T::lit(2.0), delta },
            Profile::Gauss { coef, alpha, delta } => Profile::Gauss { coef: coef * coef, alpha: alpha * T::lit(2.0), delta },
        }
    }

    fn delta(&self) -> T {
        match *self {
            Profile::Power { delta, .. } | Profile::Gauss { delta, .. } => delta,
        }
    }

    fn k(&self, s: T) -> T {
        let a = s.abs();
        if a >= self.delta() {
            return T::zero();
        }
        match *self {
            Profile::Power { coef, beta, .. } => {
                if beta == T::zero() {
                    coef
                } else {
                    coef * a.powf(-beta)
                }
            }
            Profile::Gauss { coef, alpha, .. } => coef * (-alpha * a * a).exp(),
        }
    }

    /// ∫₀^s k (odd in s). Power profiles only.
    fn first(&self, s: T) -> T {
        let Profile::Power { coef, beta, delta } = *self else { unreachable!() };
        let a = s.abs().min(delta);
        let one = T::one();
        s.signum() * coef * a.powf(one - beta) / (one - beta)
    }

    /// ∫₀^s ∫₀^t k (even in s), continued linearly past the horizon.
    fn second(&self, s: T) -> T {
        let Profile::Power { coef, beta, delta } = *self else { unreachable!() };
        let a = s.abs();
        let (one, two) = (T::one(), T::lit(2.0));
        let g = |r: T| coef * r.powf(two - beta) / ((one - beta) * (two - beta));
        if a <= delta {
            g(a)
        } else {
            g(delta) + coef * delta.powf(one - beta) / (one - beta) * (a - delta)
        }
    }

    fn rect(&self, xr: Interval<T>, yr: Interval<T>, opts: QuadOptions<T>) -> Result<T> {
        let d = self.delta();
        // y − x ranges over [yr.lo − xr.hi, yr.hi − xr.lo]
        let (smin, smax) = (yr.lo - xr.hi, yr.hi - xr.lo);
        if smin >= d || smax <= -d {
            return Ok(T::zero());
        }
        match *self {
            Profile::Power { beta, .. } => {
                if beta >= T::one() && smin < T::zero() && smax > T::zero() {
                    return Ok(T::infinity());
                }
                let g = |s: T| self.second(s);
                let v = g(yr.hi - xr.lo) - g(yr.hi - xr.hi) - g(yr.lo - xr.lo) + g(yr.lo - xr.hi);
                Ok(v.max(T::zero()))
            }
            Profile::Gauss { .. } => {
                // ∫ k(s)·|{x ∈ xr : x + s ∈ yr}| ds
                let w = |s: T| (xr.hi.min(yr.hi - s) - xr.lo.max(yr.lo - s)).max(T::zero());
                let lo = smin.max(-d);
                let hi = smax.min(d);
                let extra = [yr.lo - xr.lo, yr.hi - xr.hi, T::zero()];
                let e = integrate_line(|s| self.k(s) * w(s), lo, hi, None, T::zero(), &extra, opts)?;
                Ok(e.value)
            }
        }
    }

    /// ∫_lo^hi k(s) ds
    fn line(&self, lo: T, hi: T, opts: QuadOptions<T>) -> Result<T> {
        let d = self.delta();
        let (lo, hi) = (lo.max(-d), hi.min(d));
        if hi <= lo {
            return Ok(T::zero());
        }
        match *self {
            Profile::Power { beta, .. } => {
                if beta >= T::one() && lo < T::zero() && hi > T::zero() {
                    return Ok(T::infinity());
                }
                Ok(self.first(hi) - self.first(lo))
            }
            Profile::Gauss { .. } => Ok(integrate_line(|s| self.k(s), lo, hi, None, T::zero(), &[T::zero()], opts)?.value),
        }
    }
}

fn gauss_normaliser<T: Scalar>(delta: T) -> Result<T> {
    let opts = QuadOptions { abs_tol: T::lit(1e-12), rel_tol: T::lit(1e-14), max_depth: 40 };
    let m = adaptive(|s: T| (-s * s).exp(), -delta, delta, opts)?;
    Ok(T::one() / m.value)
}

impl<T: Scalar> KernelSpec<T> {
    pub fn new(family: KernelFamily<T>, delta: T) -> Result<Self> {
        if !(delta > T::zero() && delta.is_finite()) {
            return Err(Error::InvalidKernel(format!("horizon must be positive, got {delta}")));
        }
        let finite = |name: &str, v: T| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidKernel(format!("{name} must be finite")))
            }
        };
        let mut gauss_c = T::zero();
        let symmetric = match &family {
            KernelFamily::Constant { c } => {
                finite("c", *c)?;
                if *c <= T::zero() {
                    return Err(Error::InvalidKernel(format!("constant kernel needs c > 0, got {c}")));
                }
                true
            }
            KernelFamily::PowerLaw { eps } => {
                finite("eps", *eps)?;
                if *eps < T::zero() {
                    return Err(Error::InvalidKernel(format!("power-law exponent must be ≥ 0, got {eps}")));
                }
                if *eps >= T::one() {
                    return Err(Error::InvalidKernel(format!("integrability requires ε<1, got ε={eps}")));
                }
                true
            }
            KernelFamily::HeterogeneousExp { eps } => {
                finite("eps", *eps)?;
                false
            }
            KernelFamily::TruncatedGaussian => {
                gauss_c = gauss_normaliser(delta)?;
                true
            }
            KernelFamily::BondRemoval { base, excised, .. } => {
                if excised.hi <= excised.lo {
                    return Err(Error::InvalidKernel("excised interval is empty".into()));
                }
                if base.delta != delta {
                    return Err(Error::InvalidKernel(format!(
                        "bond-removal horizon {delta} differs from its base kernel's {}",
                        base.delta
                    )));
                }
                base.symmetric
            }
            KernelFamily::Tabulated { x, y, nx, ny, values, symmetric } => {
                if *nx < 2 || *ny < 2 || values.len() != nx * ny {
                    return Err(Error::InvalidKernel(format!(
                        "tabulated kernel needs nx, ny ≥ 2 and nx·ny values (got {nx}×{ny}, {} values)",
                        values.len()
                    )));
                }
                if x.hi <= x.lo || y.hi <= y.lo {
                    return Err(Error::InvalidKernel("tabulated grid has an empty axis".into()));
                }
                if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < T::zero()) {
                    return Err(Error::InvalidKernel(format!("tabulated value {v} is negative or non-finite")));
                }
                *symmetric
            }
        };
        let k = Self { family, delta, scale: T::one(), symmetric, gauss_c };
        if let KernelFamily::Tabulated { symmetric: true, .. } = k.family {
            k.check_tabulated_symmetry()?;
        }
        Ok(k)
    }

    pub fn constant(c: T, delta: T) -> Result<Self> {
        Self::new(KernelFamily::Constant { c }, delta)
    }

    /// The constant kernel 3δ⁻³ used throughout the experiments.
    pub fn constant_standard(delta: T) -> Result<Self> {
        Self::constant(T::lit(3.0) / delta.powi(3), delta)
    }

    pub fn power_law(eps: T, delta: T) -> Result<Self> {
        Self::new(KernelFamily::PowerLaw { eps }, delta)
    }

    pub fn heterogeneous_exp(eps: T, delta: T) -> Result<Self> {
        Self::new(KernelFamily::HeterogeneousExp { eps }, delta)
    }

    pub fn truncated_gaussian(delta: T) -> Result<Self> {
        Self::new(KernelFamily::TruncatedGaussian, delta)
    }

    pub fn bond_removal(base: KernelSpec<T>, excised: Interval<T>, mode: BondMode) -> Result<Self> {
        let delta = base.delta;
        Self::new(KernelFamily::BondRemoval { base: Box::new(base), excised, mode }, delta)
    }

    /// The same kernel multiplied by t > 0.
    pub fn scaled(mut self, t: T) -> Result<Self> {
        if !(t > T::zero() && t.is_finite()) {
            return Err(Error::InvalidKernel(format!("scale must be positive, got {t}")));
        }
        self.scale = self.scale * t;
        Ok(self)
    }

    pub fn family(&self) -> &KernelFamily<T> {
        &self.family
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// c_δ for the truncated Gaussian (zero for other families).
    pub fn gaussian_normaliser(&self) -> T {
        self.gauss_c
    }

    fn profile(&self) -> Option<Profile<T>> {
        let delta = self.delta;
        match &self.family {
            KernelFamily::Constant { c } => Some(Profile::Power { coef: *c * self.scale, beta: T::zero(), delta }),
            KernelFamily::PowerLaw { eps } => {
                let coef = (T::lit(3.0) - *eps) * delta.powf(*eps - T::lit(3.0)) * self.scale;
                Some(Profile::Power { coef, beta: *eps, delta })
            }
            KernelFamily::TruncatedGaussian => {
                Some(Profile::Gauss { coef: self.gauss_c * self.scale, alpha: T::one(), delta })
            }
            _ => None,
        }
    }

    fn check_tabulated_symmetry(&self) -> Result<()> {
        let KernelFamily::Tabulated { x, y, .. } = &self.family else { return Ok(()) };
        let (lo, hi) = (x.lo.max(y.lo), x.hi.min(y.hi));
        let n = 40;
        for i in 0..=n {
            for j in 0..=n {
                let a = lo + (hi - lo) * T::of(i) / T::of(n);
                let b = lo + (hi - lo) * T::of(j) / T::of(n);
                let (u, v) = (self.eval(a, b), self.eval(b, a));
                if (u - v).abs() > T::lit(1e-12) * u.abs().max(v.abs()).max(T::one()) {
                    return Err(Error::InvalidKernel(format!(
                        "tabulated kernel flagged symmetric but μ({a},{b}) = {u} ≠ μ({b},{a}) = {v}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// μ(x, y); +∞ on the diagonal of a singular power law.
    pub fn evaluate(&self, x: T, y: T) -> T {
        self.evaluate_offset(x, y - x)
    }

    /// μ(x, x + s), exact in s for translation-invariant families.
    pub fn evaluate_offset(&self, x: T, s: T) -> T {
        if s.abs() >= self.delta {
            return T::zero();
        }
        if let Some(p) = self.profile() {
            return p.k(s);
        }
        let y = x + s;
        match &self.family {
            KernelFamily::HeterogeneousExp { eps } => {
                self.scale * (T::lit(4.0) - x) * (x * y * *eps).exp() / self.delta.powi(3)
            }
            KernelFamily::BondRemoval { base, excised, mode } => {
                let (ix, iy) = (excised.contains(x), excised.contains(y));
                let drop = match mode {
                    BondMode::Decouple => ix || iy,
                    BondMode::CrossOnly => ix != iy,
                };
                if drop {
                    T::zero()
                } else {
                    self.scale * base.evaluate_offset(x, s)
                }
            }
            KernelFamily::Tabulated { x: gx, y: gy, nx, ny, values, .. } => {
                if x < gx.lo || x > gx.hi || y < gy.lo || y > gy.hi {
                    return T::zero();
                }
                let fx = (x - gx.lo) / gx.len() * T::of(nx - 1);
                let fy = (y - gy.lo) / gy.len() * T::of(ny - 1);
                let i = fx.floor().to_usize().unwrap_or(0).min(nx - 2);
                let j = fy.floor().to_usize().unwrap_or(0).min(ny - 2);
                let (tx, ty) = (fx - T::of(i), fy - T::of(j));
                let v = |a: usize, b: usize| values[a * ny + b];
                let one = T::one();
                let r = v(i, j) * (one - tx) * (one - ty)
                    + v(i + 1, j) * tx * (one - ty)
                    + v(i, j + 1) * (one - tx) * ty
                    + v(i + 1, j + 1) * tx * ty;
                self.scale * r
            }
            _ => unreachable!("profile families handled above"),
        }
    }

    fn opts() -> QuadOptions<T> {
        QuadOptions::default()
    }

    /// λ_μ(x) restricted to `region`: ∫_region μ(x, y) dy.
    pub fn lambda_at(&self, x: T, region: Interval<T>) -> Result<T> {
        if let Some(p) = self.profile() {
            return p.line(region.lo - x, region.hi - x, Self::opts());
        }
        match &self.family {
            KernelFamily::HeterogeneousExp { eps } => {
                let (a, b) = (region.lo.max(x - self.delta), region.hi.min(x + self.delta));
                if b <= a {
                    return Ok(T::zero());
                }
                // ∫_a^b e^{kx y} dy with k = xε, stable as k → 0
                let k = x * *eps;
                let line = if k == T::zero() { b - a } else { (k * a).exp() * (k * (b - a)).exp_m1() / k };
                Ok(self.scale * (T::lit(4.0) - x) * line / self.delta.powi(3))
            }
            KernelFamily::BondRemoval { base, excised, mode } => {
                let keep = keep_set(region, excised, *mode, excised.contains(x));
                let mut s = T::zero();
                for r in keep {
                    s = s + base.lambda_at(x, r)?;
                }
                Ok(s * self.scale)
            }
            _ => Ok(integrate_y(self, x, region, Self::opts())?.value),
        }
    }

    /// γ_μ(y) restricted to `region`: ∫_region μ(x, y) dx.
    pub fn gamma_at(&self, y: T, region: Interval<T>) -> Result<T> {
        if let Some(p) = self.profile() {
            return p.line(y - region.hi, y - region.lo, Self::opts());
        }
        match &self.family {
            KernelFamily::BondRemoval { base, excised, mode } => {
                let keep = keep_set(region, excised, *mode, excised.contains(y));
                let mut s = T::zero();
                for r in keep {
                    s = s + base.gamma_at(y, r)?;
                }
                Ok(s * self.scale)
            }
            _ => Ok(integrate_x(self, y, region, Self::opts())?.value),
        }
    }

    /// ∫_xr ∫_yr μ(x, y) dy dx.
    pub fn rect_integral(&self, xr: Interval<T>, yr: Interval<T>) -> Result<T> {
        self.rect_power(xr, yr, false)
    }

    /// ∫_xr ∫_yr μ(x, y)² dy dx.
    pub fn rect_integral_sq(&self, xr: Interval<T>, yr: Interval<T>) -> Result<T> {
        self.rect_power(xr, yr, true)
    }

    fn rect_power(&self, xr: Interval<T>, yr: Interval<T>, squared: bool) -> Result<T> {
        if let Some(p) = self.profile() {
            let p = if squared { p.squared() } else { p };
            return p.rect(xr, yr, Self::opts());
        }
        match &self.family {
            KernelFamily::BondRemoval { base, excised, mode } => {
                let mut s = T::zero();
                let pairs: Vec<(Interval<T>, Interval<T>)> = match mode {
                    BondMode::Decouple => {
                        let (xs, ys) = (xr.minus(excised), yr.minus(excised));
                        xs.iter().flat_map(|a| ys.iter().map(move |b| (*a, *b))).collect()
                    }
                    BondMode::CrossOnly => {
                        let (xs, ys) = (xr.minus(excised), yr.minus(excised));
                        let mut v: Vec<_> = xs.iter().flat_map(|a| ys.iter().map(move |b| (*a, *b))).collect();
                        if let (Some(a), Some(b)) = (xr.intersect(excised), yr.intersect(excised)) {
                            v.push((a, b));
                        }
                        v
                    }
                };
                for (a, b) in pairs {
                    s = s + base.rect_power(a, b, squared)?;
                }
                Ok(if squared { s * self.scale * self.scale } else { s * self.scale })
            }
            _ => {
                let v = if squared {
                    integrate_rect(&Square(self), xr, yr, Self::opts())?
                } else {
                    integrate_rect(self, xr, yr, Self::opts())?
                };
                Ok(v.value)
            }
        }
    }
}

/// Parts of `region` whose bonds to a point survive bond removal.
fn keep_set<T: Scalar>(region: Interval<T>, excised: &Interval<T>, mode: BondMode, point_inside: bool) -> Vec<Interval<T>> {
    match (mode, point_inside) {
        (BondMode::Decouple, true) => Vec::new(),
        (BondMode::CrossOnly, true) => region.intersect(excised).into_iter().collect(),
        (_, false) => region.minus(excised),
    }
}

impl<T: Scalar> TwoPoint<T> for KernelSpec<T> {
    fn eval(&self, x: T, y: T) -> T {
        self.evaluate(x, y)
    }

    fn eval_offset(&self, x: T, s: T) -> T {
        self.evaluate_offset(x, s)
    }

    fn horizon(&self) -> T {
        self.delta
    }

    fn singular_order(&self) -> T {
        match &self.family {
            KernelFamily::PowerLaw { eps } => *eps,
            KernelFamily::BondRemoval { base, .. } => base.singular_order(),
            _ => T::zero(),
        }
    }

    fn breaks(&self) -> Vec<T> {
        match &self.family {
            KernelFamily::BondRemoval { base, excised, .. } => {
                let mut b = base.breaks();
                b.extend([excised.lo, excised.hi]);
                b
            }
            KernelFamily::Tabulated { x, y, nx, ny, .. } => {
                let mut b: Vec<T> = (0..*nx).map(|i| x.lo + x.len() * T::of(i) / T::of(nx - 1)).collect();
                b.extend((0..*ny).map(|j| y.lo + y.len() * T::of(j) / T::of(ny - 1)));
                b
            }
            _ => Vec::new(),
        }
    }

    fn annulus_inf(&self, _domain: &DomainSpec<T>, t: T, p: T) -> Option<T> {
        match self.profile()? {
            Profile::Power { coef, beta, delta } => {
                if t >= delta {
                    return Some(T::zero());
                }
                // coef·s^{p−β} on t < s < δ
                let e = p - beta;
                Some(if e >= T::zero() { coef * t.powf(e) } else { coef * delta.powf(e) })
            }
            Profile::Gauss { .. } => None,
        }
    }
}

/// μ/λ_μ(x) for x ∈ Ω, zero otherwise.
#[derive(Debug, Clone)]
pub struct NormalizedKernel<T: Scalar> {
    kernel: KernelSpec<T>,
    domain: DomainSpec<T>,
    floor: T,
    lenient: bool,
}

impl<T: Scalar> NormalizedKernel<T> {
    pub fn kernel(&self) -> &KernelSpec<T> {
        &self.kernel
    }

    /// λ_μ(x) over Ω ∪ Γ (zero below the positivity floor when lenient).
    pub fn lambda(&self, x: T) -> Result<T> {
        self.kernel.lambda_at(x, self.domain.closure())
    }

    fn inv_lambda(&self, x: T) -> T {
        if !self.domain.omega.contains(x) {
            return T::zero();
        }
        match self.lambda(x) {
            Ok(l) if l > self.floor => T::one() / l,
            Ok(_) if self.lenient => T::zero(),
            _ => T::nan(),
        }
    }

    /// 1/λ_μ(x), or `None` on a degenerate (zero-λ) point.
    pub fn reciprocal_lambda(&self, x: T) -> Option<T> {
        let l = self.lambda(x).ok()?;
        (l > self.floor).then(|| T::one() / l)
    }
}

/// Normalises μ by its row mass, rejecting kernels with λ_μ(x) ≈ 0 somewhere in Ω.
pub fn normalize<T: Scalar>(kernel: &KernelSpec<T>, domain: &DomainSpec<T>) -> Result<NormalizedKernel<T>> {
    build_normalized(kernel, domain, false)
}

/// As [`normalize`], but rows with vanishing mass (bond removal) become zero rows.
pub fn normalize_lenient<T: Scalar>(kernel: &KernelSpec<T>, domain: &DomainSpec<T>) -> Result<NormalizedKernel<T>> {
    build_normalized(kernel, domain, true)
}

fn build_normalized<T: Scalar>(kernel: &KernelSpec<T>, domain: &DomainSpec<T>, lenient: bool) -> Result<NormalizedKernel<T>> {
    let xs = domain.sup_samples(Region::Omega, sample_width(domain));
    let mut lam = Vec::with_capacity(xs.len());
    for &x in &xs {
        lam.push(kernel.lambda_at(x, domain.closure())?);
    }
    let top = lam.iter().copied().fold(T::zero(), T::max);
    let floor = top * T::lit(1e-10);
    if !lenient {
        if let Some(i) = lam.iter().position(|&l| !(l > floor)) {
            return Err(Error::DegenerateKernel { x: xs[i].f64(), lambda: lam[i].f64() });
        }
    }
    Ok(NormalizedKernel { kernel: kernel.clone(), domain: *domain, floor, lenient })
}

impl<T: Scalar> TwoPoint<T> for NormalizedKernel<T> {
    fn eval(&self, x: T, y: T) -> T {
        let r = self.inv_lambda(x);
        if r == T::zero() {
            return T::zero();
        }
        self.kernel.evaluate(x, y) * r
    }

    fn horizon(&self) -> T {
        self.kernel.delta
    }

    fn singular_order(&self) -> T {
        self.kernel.singular_order()
    }

    fn breaks(&self) -> Vec<T> {
        let mut b = self.kernel.breaks();
        b.extend([self.domain.omega.lo, self.domain.omega.hi]);
        b
    }

    fn eval_offset(&self, x: T, s: T) -> T {
        let r = self.inv_lambda(x);
        if r == T::zero() {
            return T::zero();
        }
        self.kernel.evaluate_offset(x, s) * r
    }

    fn row<'a>(&'a self, x: T) -> Box<dyn Fn(T) -> T + 'a> {
        let r = self.inv_lambda(x);
        Box::new(move |s| if r == T::zero() { T::zero() } else { self.kernel.evaluate_offset(x, s) * r })
    }
}

pub(crate) fn sample_width<T: Scalar>(domain: &DomainSpec<T>) -> T {
    (domain.diam() / T::lit(200.0)).min(domain.delta / T::lit(4.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelStats<T> {
    pub p: T,
    pub lambda_sup: T,
    pub gamma_sup: T,
    pub m_mu_p: T,
    pub l1_restricted: T,
    pub l2_omega_gamma: T,
    pub l2_full: T,
    /// ‖μ_asym‖ in L²(Ω×Ω)
    pub asym_l2: T,
    /// M_{μ_asym,2} over Ω×Ω
    pub m_asym_2: T,
    /// relative change of the sampled sups when the sample grid is halved
    pub sup_refinement_change: T,
}

/// sup over Ω of λ(x) = ∫_{Ω∪Γ} ν(x,·), and sup over Ω∪Γ of γ(y) = ∫_Ω ν(·,y).
pub fn slice_sups<T: Scalar, L, G>(domain: &DomainSpec<T>, h: T, lambda: L, gamma: G) -> Result<(T, T)>
where
    L: Fn(T) -> Result<T> + Sync,
    G: Fn(T) -> Result<T> + Sync,
{
    use rayon::prelude::*;
    let xs = domain.sup_samples(Region::Omega, h);
    let ys = domain.sup_samples(Region::Closure, h);
    let l = xs.par_iter().map(|&x| lambda(x)).collect::<Result<Vec<T>>>()?;
    let g = ys.par_iter().map(|&y| gamma(y)).collect::<Result<Vec<T>>>()?;
    let sup = |v: Vec<T>| v.into_iter().fold(T::zero(), T::max);
    Ok((sup(l), sup(g)))
}

/// M_{μ,p} = γ_sup^{1/p} λ_sup^{1−1/p}
pub fn m_functional<T: Scalar>(gamma_sup: T, lambda_sup: T, p: T) -> T {
    let inv = T::one() / p;
    gamma_sup.powf(inv) * lambda_sup.powf(T::one() - inv)
}

pub fn kernel_stats<T: Scalar>(kernel: &KernelSpec<T>, domain: &DomainSpec<T>, p: T) -> Result<KernelStats<T>> {
    if !(p >= T::one()) {
        return Err(Error::InvalidKernel(format!("exponent p must be ≥ 1, got {p}")));
    }
    let (om, cl) = (domain.omega, domain.closure());
    let h = sample_width(domain);
    let lam = |x: T| kernel.lambda_at(x, cl);
    let gam = |y: T| kernel.gamma_at(y, om);
    let (lambda_sup, gamma_sup) = slice_sups(domain, h, lam, gam)?;
    let (l2, g2) = slice_sups(domain, h * T::lit(2.0), lam, gam)?;
    let rel = |a: T, b: T| if a > T::zero() { (a - b).abs() / a } else { T::zero() };
    let sup_refinement_change = rel(lambda_sup, l2).max(rel(gamma_sup, g2));

    let l1_restricted = kernel.rect_integral(cl, cl)?;
    let l2_omega_gamma = (kernel.rect_integral_sq(om, domain.gamma_left())?
        + kernel.rect_integral_sq(om, domain.gamma_right())?)
    .sqrt();
    let l2_full = kernel.rect_integral_sq(cl, cl)?.sqrt();
    let (asym_l2, m_asym_2) = if kernel.is_symmetric() {
        (T::zero(), T::zero())
    } else {
        asym_norms(kernel, domain)?
    };
    Ok(KernelStats {
        p,
        lambda_sup,
        gamma_sup,
        m_mu_p: m_functional(gamma_sup, lambda_sup, p),
        l1_restricted,
        l2_omega_gamma,
        l2_full,
        asym_l2,
        m_asym_2,
        sup_refinement_change,
    })
}

/// (‖ν_asym‖_{L²(Ω×Ω)}, M_{ν_asym,2} over Ω×Ω) for any two-point function.
pub fn asym_norms<T: Scalar, K: TwoPoint<T>>(k: &K, domain: &DomainSpec<T>) -> Result<(T, T)> {
    let om = domain.omega;
    let opts = QuadOptions::default();
    let a = Asym(k);
    let l2 = integrate_rect(&Square(&a), om, om, opts)?.value.max(T::zero()).sqrt();
    let abs = Abs(&a);
    let (lam, gam) = slice_sups(
        domain,
        sample_width(domain),
        |x| Ok(if om.contains(x) || x == om.lo || x == om.hi { integrate_y(&abs, x, om, opts)?.value } else { T::zero() }),
        |y| Ok(if om.contains(y) || y == om.lo || y == om.hi { integrate_x(&abs, y, om, opts)?.value } else { T::zero() }),
    )?;
    Ok((l2, m_functional(gam, lam, T::lit(2.0))))
}

/// inf of ν(x, x+s)|s|^p over sampled x ∈ Ω and t < |s| < horizon.
pub fn annulus_lower_bound<T: Scalar, K: TwoPoint<T>>(k: &K, domain: &DomainSpec<T>, t: T, p: T) -> T {
    if let Some(v) = k.annulus_inf(domain, t, p) {
        return v;
    }
    let d = k.horizon();
    if t >= d {
        return T::zero();
    }
    let xs = domain.sup_samples(Region::Omega, domain.diam() / T::lit(50.0));
    let ns = 24;
    let top = d * (T::one() - T::lit(1e-9));
    let mut inf = T::infinity();
    for &x in &xs {
        for i in 0..=ns {
            let s = t + (top - t) * T::of(i) / T::of(ns);
            let s = s.max(t * (T::one() + T::lit(1e-12)));
            for y in [x - s, x + s] {
                let v = k.eval(x, y) * s.powf(p);
                if v < inf {
                    inf = v;
                }
            }
        }
    }
    inf.max(T::zero())
}

/// (M1): μ ≥ 0 at sampled pairs of Ω × (Ω∪Γ).
pub fn check_nonnegative<T: Scalar>(kernel: &KernelSpec<T>, domain: &DomainSpec<T>) -> Result<()> {
    let xs = breakpoints(domain.omega.lo, domain.omega.hi, (1..64).map(|i| domain.omega.lo + domain.diam() * T::of(i) / T::lit(64.0)));
    let d = kernel.delta();
    for &x in &xs {
        for i in 0..=32 {
            let y = x - d + d * T::lit(2.0) * T::of(i) / T::lit(32.0);
            let v = kernel.evaluate(x, y);
            if v < T::zero() || v.is_nan() {
                return Err(Error::InvalidKernel(format!("μ({x}, {y}) = {v} violates nonnegativity")));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn evaluate_examples() {
        let k = KernelSpec::constant_standard(0.2).unwrap();
        assert_relative_eq!(k.evaluate(0.5, 0.6), 375.0, max_relative = 1e-12);
        assert_eq!(k.evaluate(0.5, 0.8), 0.0);
        let h = KernelSpec::heterogeneous_exp(0.2, 0.2).unwrap();
        assert_relative_eq!(h.evaluate(0.0, 0.1), 500.0, max_relative = 1e-12);
        assert!(!h.is_symmetric());
    }

    #[test]
    fn construction_guards() {
        assert!(matches!(KernelSpec::power_law(1.5, 0.2), Err(Error::InvalidKernel(m)) if m.contains("ε<1")));
        assert!(KernelSpec::constant(1.0, 0.0).is_err());
        assert!(KernelSpec::constant(-1.0, 0.1).is_err());
        assert!(KernelSpec::constant(1.0, 0.1).unwrap().scaled(0.0).is_err());
    }

    #[test]
    fn lambda_examples() {
        let k = KernelSpec::constant_standard(0.2).unwrap();
        let cl = Interval { lo: -0.2, hi: 1.2 };
        assert_relative_eq!(k.lambda_at(0.5, cl).unwrap(), 150.0, max_relative = 1e-12);
        assert_relative_eq!(k.gamma_at(0.5, cl).unwrap(), 150.0, max_relative = 1e-12);
        // 2(3−ε)δ^{ε−3}δ^{1−ε}/(1−ε) = 250 at ε = ½, δ = 0.2
        let p = KernelSpec::power_law(0.5, 0.2).unwrap();
        let l = p.lambda_at(0.5, cl).unwrap();
        assert_relative_eq!(l, 250.0, max_relative = 1e-12);
        let oracle = integrate_y(&p, 0.5, cl, QuadOptions::default()).unwrap().value;
        assert_relative_eq!(l, oracle, max_relative = 1e-9);
        let g = KernelSpec::truncated_gaussian(0.2).unwrap();
        assert_relative_eq!(g.lambda_at(0.5, cl).unwrap(), 1.0, max_relative = 1e-10);
    }

    #[test]
    fn heterogeneous_gamma_at_eps_zero() {
        let k = KernelSpec::heterogeneous_exp(0.0, 0.2).unwrap();
        let y = 0.5;
        // ∫_{y−δ}^{y+δ} (4−x)/δ³ dx = 2δ(4−y)/δ³
        let exact = 2.0 * 0.2 * (4.0 - y) / 0.008;
        assert_relative_eq!(k.gamma_at(y, Interval { lo: -0.2, hi: 1.2 }).unwrap(), exact, max_relative = 1e-10);
    }

    #[test]
    fn bond_removal_semantics() {
        let base = KernelSpec::constant_standard(0.2).unwrap();
        let xi = Interval { lo: 0.45, hi: 0.55 };
        let k = KernelSpec::bond_removal(base.clone(), xi, BondMode::Decouple).unwrap();
        let cl = Interval { lo: -0.2, hi: 1.2 };
        assert_eq!(k.gamma_at(0.5, cl).unwrap(), 0.0);
        assert_eq!(k.evaluate(0.5, 0.52), 0.0);
        assert_eq!(k.evaluate(0.4, 0.5), 0.0);
        assert_relative_eq!(k.lambda_at(0.3, cl).unwrap(), 150.0 - 375.0 * 0.05, max_relative = 1e-12);
        let c = KernelSpec::bond_removal(base, xi, BondMode::CrossOnly).unwrap();
        assert_relative_eq!(c.evaluate(0.5, 0.52), 375.0, max_relative = 1e-14);
        assert_relative_eq!(c.lambda_at(0.5, cl).unwrap(), 375.0 * 0.1, max_relative = 1e-12);
    }

    #[test]
    fn power_rect_matches_generic_quadrature() {
        let k = KernelSpec::power_law(0.4, 0.2).unwrap();
        let (a, b) = (Interval { lo: 0.1, hi: 0.135 }, Interval { lo: 0.12, hi: 0.3 });
        let exact = k.rect_integral(a, b).unwrap();
        let generic = integrate_rect(&k, a, b, QuadOptions::default()).unwrap().value;
        assert_relative_eq!(exact, generic, max_relative = 1e-9);
        let sq = k.rect_integral_sq(a, b).unwrap();
        let gsq = integrate_rect(&Square(&k), a, b, QuadOptions::default()).unwrap().value;
        assert_relative_eq!(sq, gsq, max_relative = 1e-8);
    }

    #[test]
    fn gaussian_rect_matches_generic_quadrature() {
        let k = KernelSpec::truncated_gaussian(0.1).unwrap();
        let (a, b) = (Interval { lo: 0.0, hi: 0.05 }, Interval { lo: 0.03, hi: 0.2 });
        let exact = k.rect_integral(a, b).unwrap();
        let generic = integrate_rect(&k, a, b, QuadOptions::default()).unwrap().value;
        assert_relative_eq!(exact, generic, max_relative = 1e-9);
    }

    #[test]
    fn l2_omega_gamma_constant() {
        // μ = 3δ⁻³ on a band of area δ²/2 per side: ‖μ‖² = 9δ⁻⁶·δ² so ‖μ‖ = 3δ⁻²
        let d = DomainSpec::unit(0.1).unwrap();
        let s = kernel_stats(&KernelSpec::constant_standard(0.1).unwrap(), &d, 2.0).unwrap();
        assert_relative_eq!(s.l2_omega_gamma, 300.0, max_relative = 1e-10);
        assert_relative_eq!(s.m_mu_p, s.lambda_sup, max_relative = 1e-12);
        assert_relative_eq!(s.lambda_sup, 600.0, max_relative = 1e-12);
        assert_eq!(s.asym_l2, 0.0);
    }

    #[test]
    fn heterogeneous_asym_part() {
        let k = KernelSpec::heterogeneous_exp(0.3, 0.2).unwrap();
        let a = Asym(&k);
        for &(x, y) in &[(0.1, 0.2), (0.7, 0.55)] {
            let expect = (y - x) * (x * y * 0.3f64).exp() / (2.0 * 0.008);
            assert_relative_eq!(a.eval(x, y), expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn normalized_rows_sum_to_one() {
        let d = DomainSpec::unit(0.2).unwrap();
        for k in [KernelSpec::power_law(0.4, 0.2).unwrap(), KernelSpec::heterogeneous_exp(0.2, 0.2).unwrap()] {
            let n = normalize(&k, &d).unwrap();
            for i in 0..20 {
                let x = 0.025 + 0.05 * i as f64;
                let s = integrate_y(&n, x, d.closure(), QuadOptions::default()).unwrap().value;
                assert_relative_eq!(s, 1.0, epsilon = 1e-10);
            }
        }
        let c = normalize(&KernelSpec::constant_standard(0.2).unwrap(), &d).unwrap();
        assert_relative_eq!(c.eval(0.5, 0.6), 2.5, max_relative = 1e-12);
        assert_eq!(c.eval(-0.1, 0.0), 0.0);
    }

    #[test]
    fn degenerate_normalisation() {
        let d = DomainSpec::unit(0.2).unwrap();
        let k = KernelSpec::bond_removal(
            KernelSpec::constant_standard(0.2).unwrap(),
            Interval { lo: 0.49, hi: 0.51 },
            BondMode::Decouple,
        )
        .unwrap();
        assert!(matches!(normalize(&k, &d), Err(Error::DegenerateKernel { .. })));
        let n = normalize_lenient(&k, &d).unwrap();
        assert_eq!(n.eval(0.5, 0.45), 0.0);
    }

    #[test]
    fn tabulated_bilinear() {
        let k = KernelSpec::new(
            KernelFamily::Tabulated {
                x: Interval { lo: 0.0, hi: 1.0 },
                y: Interval { lo: 0.0, hi: 1.0 },
                nx: 2,
                ny: 2,
                values: vec![1.0, 2.0, 2.0, 3.0],
                symmetric: true,
            },
            0.5,
        )
        .unwrap();
        assert_relative_eq!(k.evaluate(0.25, 0.5), 1.75, epsilon = 1e-14);
        assert!(KernelSpec::new(
            KernelFamily::Tabulated {
                x: Interval { lo: 0.0, hi: 1.0 },
                y: Interval { lo: 0.0, hi: 1.0 },
                nx: 2,
                ny: 2,
                values: vec![1.0, 2.0, 5.0, 3.0],
                symmetric: true,
            },
            0.5
        )
        .is_err());
    }

    #[test]
    fn serde_round_trip() {
        let k = KernelSpec::bond_removal(
            KernelSpec::power_law(0.3, 0.2).unwrap(),
            Interval { lo: 0.4, hi: 0.6 },
            BondMode::CrossOnly,
        )
        .unwrap();
        let s = serde_json::to_string(&k).unwrap();
        assert!(s.contains("\"family\":\"bond_removal\""));
        let back: KernelSpec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, k);
        let bad = s.replace("0.3", "1.3");
        assert!(serde_json::from_str::<KernelSpec<f64>>(&bad).is_err());
    }
}
