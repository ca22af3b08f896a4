//! Adaptive Gauss–Kronrod (7/15) quadrature with endpoint-singularity handling.

#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
// Gauss weights for the odd-indexed Kronrod nodes (and the centre).
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_depth: usize,
}

impl<T: Scalar> Default for QuadOptions<T> {
    fn default() -> Self {
        Self { abs_tol: T::lit(1e-10), rel_tol: T::lit(1e-12), max_depth: 40 }
    }
}

impl<T: Scalar> QuadOptions<T> {
    pub fn with_abs_tol(mut self, tol: T) -> Self {
        self.abs_tol = tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
}

impl<T: Scalar> Estimate<T> {
    pub fn zero() -> Self {
        Self { value: T::zero(), error: T::zero() }
    }

    fn add(self, o: Self) -> Self {
        Self { value: self.value + o.value, error: self.error + o.error }
    }
}

/// One 15-point Kronrod panel: (integral, |K15 − G7|).
pub fn gk15<T: Scalar, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half = (b - a) * T::lit(0.5);
    let mid = (a + b) * T::lit(0.5);
    let fc = f(mid);
    let mut k = fc * T::lit(WGK[7]);
    let mut g = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let (f1, f2) = (f(mid - dx), f(mid + dx));
        k = k + (f1 + f2) * T::lit(WGK[j]);
        if j % 2 == 1 {
            g = g + (f1 + f2) * T::lit(WG[j / 2]);
        }
    }
    (k * half, ((k - g) * half).abs())
}

/// Globally adaptive bisection on [a, b]: the panel with the largest error
/// estimate is split until the total error meets the tolerance.
pub fn adaptive<T: Scalar, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    opts: QuadOptions<T>,
) -> Result<Estimate<T>> {
    if a == b {
        return Ok(Estimate::zero());
    }
    struct Panel<T> {
        a: T,
        b: T,
        v: T,
        e: T,
        depth: usize,
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut panels = vec![Panel { a, b, v, e, depth: 0 }];
    let limit = 50 * opts.max_depth.max(1);
    loop {
        let value: T = panels.iter().map(|p| p.v).sum();
        let error: T = panels.iter().map(|p| p.e).sum();
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::NonFinite(format!("integrand on [{a}, {b}]")));
        }
        let tol = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= tol {
            return Ok(Estimate { value, error });
        }
        let roundoff = |p: &Panel<T>| p.e <= T::lit(50.0) * T::epsilon() * p.v.abs().max(T::min_positive_value());
        let worst = panels
            .iter()
            .enumerate()
            .filter(|(_, p)| p.depth < opts.max_depth && !roundoff(p))
            .max_by(|x, y| x.1.e.partial_cmp(&y.1.e).unwrap())
            .map(|(i, _)| i);
        let Some(i) = worst.filter(|_| panels.len() < limit) else {
            let mass: T = panels.iter().map(|p| p.v.abs()).sum();
            if error <= T::lit(100.0) * T::epsilon() * mass {
                return Ok(Estimate { value, error });
            }
            return Err(Error::Quadrature { estimate: value.f64(), error: error.f64() });
        };
        let p = panels.swap_remove(i);
        let m = (p.a + p.b) * T::lit(0.5);
        let (lv, le) = gk15(&mut f, p.a, m);
        let (rv, re) = gk15(&mut f, m, p.b);
        panels.push(Panel { a: p.a, b: m, v: lv, e: le, depth: p.depth + 1 });
        panels.push(Panel { a: m, b: p.b, v: rv, e: re, depth: p.depth + 1 });
    }
}

/// Integrates across sorted breakpoints; the budget is shared in proportion to length.
pub fn adaptive_breaks<T: Scalar, F: FnMut(T) -> T>(
    mut f: F,
    breaks: &[T],
    opts: QuadOptions<T>,
) -> Result<Estimate<T>> {
    let mut total = Estimate::zero();
    if breaks.len() < 2 {
        return Ok(total);
    }
    let span = breaks[breaks.len() - 1] - breaks[0];
    if span <= T::zero() {
        return Ok(total);
    }
    for w in breaks.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let o = QuadOptions { abs_tol: opts.abs_tol * (w[1] - w[0]) / span, ..opts };
        total = total.add(adaptive(&mut f, w[0], w[1], o)?);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Left,
    Right,
}

/// Integrates f with an integrable singularity |s − s₀|^{−order} at one endpoint,
/// after the substitution s = s₀ ± L·t^q that flattens it.
pub fn adaptive_singular<T: Scalar, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    at: Endpoint,
    order: T,
    opts: QuadOptions<T>,
) -> Result<Estimate<T>> {
    if order <= T::zero() {
        return adaptive(f, a, b, opts);
    }
    if order >= T::one() {
        return Err(Error::Quadrature { estimate: f64::INFINITY, error: f64::INFINITY });
    }
    let q = (T::lit(2.0) / (T::one() - order)).ceil();
    let len = b - a;
    let g = |t: T| {
        if t <= T::zero() {
            return T::zero();
        }
        let jac = q * len * t.powf(q - T::one());
        let s = match at {
            Endpoint::Left => a + len * t.powf(q),
            Endpoint::Right => b - len * t.powf(q),
        };
        // Where s rounds onto the pole the true contribution is O(t^{q(1−order)−1}) → 0.
        let v = f(s) * jac;
        if v.is_finite() {
            v
        } else {
            T::zero()
        }
    };
    adaptive(g, T::zero(), T::one(), opts)
}

/// Sorts, clips to [lo, hi] and deduplicates candidate breakpoints (endpoints included).
pub fn breakpoints<T: Scalar>(lo: T, hi: T, extra: impl IntoIterator<Item = T>) -> Vec<T> {
    let mut v: Vec<T> = vec![lo, hi];
    v.extend(extra.into_iter().filter(|&t| t > lo && t < hi));
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    let tiny = (hi - lo).abs() * T::lit(1e-13);
    v.dedup_by(|a, b| (*a - *b).abs() <= tiny);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let e = adaptive(|x: f64| x.powi(5) - 3.0 * x, 0.0, 2.0, QuadOptions::default()).unwrap();
        assert_relative_eq!(e.value, 64.0 / 6.0 - 6.0, epsilon = 1e-13);
    }

    #[test]
    fn kink_needs_breaks() {
        let f = |x: f64| (x - 0.3).abs();
        let e = adaptive_breaks(f, &[0.0, 0.3, 1.0], QuadOptions::default()).unwrap();
        assert_relative_eq!(e.value, 0.045 + 0.245, epsilon = 1e-14);
    }

    #[test]
    fn endpoint_singularity() {
        for &eps in &[0.2, 0.5, 0.8, 0.95] {
            let exact = 1.0 / (1.0 - eps);
            let l = adaptive_singular(|s: f64| s.powf(-eps), 0.0, 1.0, Endpoint::Left, eps, QuadOptions::default())
                .unwrap();
            let r = adaptive_singular(
                |s: f64| (-s).powf(-eps),
                -1.0,
                0.0,
                Endpoint::Right,
                eps,
                QuadOptions::default(),
            )
            .unwrap();
            assert_relative_eq!(l.value, exact, max_relative = 1e-10);
            assert_relative_eq!(r.value, exact, max_relative = 1e-10);
        }
    }

    #[test]
    fn single_precision() {
        let e = adaptive(|x: f32| x.exp(), 0.0, 1.0, QuadOptions::default()).unwrap();
        assert!((e.value - (1f32.exp() - 1.0)).abs() < 1e-5);
    }

    #[test]
    fn nan_is_reported() {
        let r = adaptive(|_x: f64| f64::NAN, 0.0, 1.0, QuadOptions::default());
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn breakpoints_dedup() {
        let b = breakpoints(0.0, 1.0, [0.5, 0.5 + 1e-16, -1.0, 2.0, 0.25]);
        assert_eq!(b, vec![0.0, 0.25, 0.5, 1.0]);
    }
}
