//! Two-point functions ν(x, y) and the integrals over lines and rectangles that
//! every kernel functional reduces to.

use std::cell::RefCell;

use crate::domain::{DomainSpec, Interval};
use crate::error::{Error, Result};
use crate::quadrature::{adaptive, adaptive_breaks, adaptive_singular, breakpoints, Endpoint, Estimate, QuadOptions};
use crate::scalar::Scalar;

pub trait TwoPoint<T: Scalar>: Sync {
    fn eval(&self, x: T, y: T) -> T;

    /// ν(x, y) = 0 once |x − y| ≥ horizon.
    fn horizon(&self) -> T;

    /// ν behaves like |x − y|^{−order} at the diagonal.
    fn singular_order(&self) -> T {
        T::zero()
    }

    /// Coordinates c where ν is non-smooth along x = c or y = c.
    fn breaks(&self) -> Vec<T> {
        Vec::new()
    }

    /// Offsets s (besides 0 and ±horizon) where s ↦ ν(x, x+s) is non-smooth.
    fn offset_breaks(&self) -> Vec<T> {
        Vec::new()
    }

    /// ν(x, x + s). Near the diagonal y − x cannot be recovered from a rounded y,
    /// so singular families override this to use s directly.
    fn eval_offset(&self, x: T, s: T) -> T {
        self.eval(x, x + s)
    }

    /// s ↦ ν(x, x + s); implementors with expensive per-row setup override this.
    fn row<'a>(&'a self, x: T) -> Box<dyn Fn(T) -> T + 'a> {
        Box::new(move |s| self.eval_offset(x, s))
    }

    /// Closed-form inf of ν(x, x+s)|s|^p over x ∈ Ω, t < |s| < horizon, if known.
    fn annulus_inf(&self, _domain: &DomainSpec<T>, _t: T, _p: T) -> Option<T> {
        None
    }
}

impl<T: Scalar, K: TwoPoint<T> + ?Sized> TwoPoint<T> for &K {
    fn eval(&self, x: T, y: T) -> T {
        (**self).eval(x, y)
    }
    fn eval_offset(&self, x: T, s: T) -> T {
        (**self).eval_offset(x, s)
    }
    fn horizon(&self) -> T {
        (**self).horizon()
    }
    fn singular_order(&self) -> T {
        (**self).singular_order()
    }
    fn breaks(&self) -> Vec<T> {
        (**self).breaks()
    }
    fn row<'a>(&'a self, x: T) -> Box<dyn Fn(T) -> T + 'a> {
        (**self).row(x)
    }
    fn annulus_inf(&self, d: &DomainSpec<T>, t: T, p: T) -> Option<T> {
        (**self).annulus_inf(d, t, p)
    }
}

/// ½[ν(x,y) + ν(y,x)]
pub struct Sym<K>(pub K);
/// ½[ν(x,y) − ν(y,x)]
pub struct Asym<K>(pub K);
/// ν₁ − ν₂
pub struct Diff<A, B>(pub A, pub B);
/// |ν|
pub struct Abs<K>(pub K);
/// ν²
pub struct Square<K>(pub K);

impl<T: Scalar, K: TwoPoint<T>> TwoPoint<T> for Sym<K> {
    fn eval(&self, x: T, y: T) -> T {
        (self.0.eval(x, y) + self.0.eval(y, x)) * T::lit(0.5)
    }
    fn eval_offset(&self, x: T, s: T) -> T {
        (self.0.eval_offset(x, s) + self.0.eval_offset(x + s, -s)) * T::lit(0.5)
    }
    fn horizon(&self) -> T {
        self.0.horizon()
    }
    fn singular_order(&self) -> T {
        self.0.singular_order()
    }
    fn breaks(&self) -> Vec<T> {
        self.0.breaks()
    }
    fn row<'a>(&'a self, x: T) -> Box<dyn Fn(T) -> T + 'a> {
        let r = self.0.row(x);
        Box::new(move |s| (r(s) + self.0.eval_offset(x + s, -s)) * T::lit(0.5))
    }
}

impl<T: Scalar, K: TwoPoint<T>> TwoPoint<T> for Asym<K> {
    fn eval(&self, x: T, y: T) -> T {
        (self.0.eval(x, y) - self.0.eval(y, x)) * T::lit(0.5)
    }
    fn eval_offset(&self, x: T, s: T) -> T {
        (self.0.eval_offset(x, s) - self.0.eval_offset(x + s, -s)) * T::lit(0.5)
    }
    fn horizon(&self) -> T {
        self.0.horizon()
    }
    fn singular_order(&self) -> T {
        self.0.singular_order()
    }
    fn breaks(&self) -> Vec<T> {
        self.0.breaks()
    }
    fn row<'a>(&'a self, x: T) -> Box<dyn Fn(T) -> T + 'a> {
        let r = self.0.row(x);
        Box::new(move |s| (r(s) - self.0.eval_offset(x + s, -s)) * T::lit(0.5))
    }
}

impl<T: Scalar, A: TwoPoint<T>, B: TwoPoint<T>> TwoPoint<T> for Diff<A, B> {
    fn eval(&self, x: T, y: T) -> T {
        self.0.eval(x, y) - self.1.eval(x, y)
    }
    fn eval_offset(&self, x: T, s: T) -> T {
        self.0.eval_offset(x, s) - self.1.eval_offset(x, s)
    }
    fn horizon(&self) -> T {
        self.0.horizon().max(self.1.horizon())
    }
    fn singular_order(&self) -> T {
        self.0.singular_order().max(self.1.singular_order())
    }
    fn breaks(&self) -> Vec<T> {
        let mut b = self.0.breaks();
        b.extend(self.1.breaks());
        b
    }
    fn row<'a>(&'a self, x: T) -> Box<dyn Fn(T) -> T + 'a> {
        let (a, b) = (self.0.row(x), self.1.row(x));
        Box::new(move |y| a(y) - b(y))
    }
}

impl<T: Scalar, K: TwoPoint<T>> TwoPoint<T> for Abs<K> {
    fn eval(&self, x: T, y: T) -> T {
        self.0.eval(x, y).abs()
    }
    fn eval_offset(&self, x: T, s: T) -> T {
        self.0.eval_offset(x, s).abs()
    }
    fn horizon(&self) -> T {
        self.0.horizon()
    }
    fn singular_order(&self) -> T {
        self.0.singular_order()
    }
    fn breaks(&self) -> Vec<T> {
        self.0.breaks()
    }
    fn row<'a>(&'a self, x: T) -> Box<dyn Fn(T) -> T + 'a> {
        let r = self.0.row(x);
        Box::new(move |y| r(y).abs())
    }
}

impl<T: Scalar, K: TwoPoint<T>> TwoPoint<T> for Square<K> {
    fn eval(&self, x: T, y: T) -> T {
        let v = self.0.eval(x, y);
        v * v
    }
    fn eval_offset(&self, x: T, s: T) -> T {
        let v = self.0.eval_offset(x, s);
        v * v
    }
    fn horizon(&self) -> T {
        self.0.horizon()
    }
    fn singular_order(&self) -> T {
        self.0.singular_order() * T::lit(2.0)
    }
    fn breaks(&self) -> Vec<T> {
        self.0.breaks()
    }
    fn row<'a>(&'a self, x: T) -> Box<dyn Fn(T) -> T + 'a> {
        let r = self.0.row(x);
        Box::new(move |y| {
            let v = r(y);
            v * v
        })
    }
}

/// |ν|^q
pub struct Powered<K, T>(pub K, pub T);

impl<T: Scalar, K: TwoPoint<T>> TwoPoint<T> for Powered<K, T> {
    fn eval(&self, x: T, y: T) -> T {
        self.0.eval(x, y).abs().powf(self.1)
    }
    fn eval_offset(&self, x: T, s: T) -> T {
        self.0.eval_offset(x, s).abs().powf(self.1)
    }
    fn horizon(&self) -> T {
        self.0.horizon()
    }
    fn singular_order(&self) -> T {
        self.0.singular_order() * self.1
    }
    fn breaks(&self) -> Vec<T> {
        self.0.breaks()
    }
    fn row<'a>(&'a self, x: T) -> Box<dyn Fn(T) -> T + 'a> {
        let r = self.0.row(x);
        Box::new(move |s| r(s).abs().powf(self.1))
    }
}

fn near<T: Scalar>(a: T, b: T, scale: T) -> bool {
    (a - b).abs() <= scale * T::lit(1e-12)
}

/// Integrates a 1D function on [lo, hi] that may be singular at `pole`, splitting at `extra`.
pub(crate) fn integrate_line<T: Scalar, F: FnMut(T) -> T>(
    mut f: F,
    lo: T,
    hi: T,
    pole: Option<T>,
    order: T,
    extra: &[T],
    opts: QuadOptions<T>,
) -> Result<Estimate<T>> {
    if hi <= lo {
        return Ok(Estimate::zero());
    }
    let brk = breakpoints(lo, hi, extra.iter().copied().chain(pole));
    if order <= T::zero() || pole.is_none() {
        return adaptive_breaks(f, &brk, opts);
    }
    if order >= T::one() {
        return Ok(Estimate { value: T::infinity(), error: T::zero() });
    }
    let p = pole.unwrap();
    let scale = (hi - lo).abs().max(T::one());
    let span = hi - lo;
    let mut total = Estimate::zero();
    for w in brk.windows(2) {
        let o = QuadOptions { abs_tol: opts.abs_tol * (w[1] - w[0]) / span, ..opts };
        let e = if near(w[1], p, scale) {
            adaptive_singular(&mut f, w[0], w[1], Endpoint::Right, order, o)?
        } else if near(w[0], p, scale) {
            adaptive_singular(&mut f, w[0], w[1], Endpoint::Left, order, o)?
        } else {
            adaptive(&mut f, w[0], w[1], o)?
        };
        total.value = total.value + e.value;
        total.error = total.error + e.error;
    }
    Ok(total)
}

fn offset_cuts<T: Scalar, K: TwoPoint<T> + ?Sized>(k: &K) -> Vec<T> {
    let d = k.horizon();
    let mut v = k.offset_breaks();
    v.extend([d, -d]);
    v
}

/// ∫_region ν(x, y) dy, integrated in the offset s = y − x.
pub fn integrate_y<T: Scalar, K: TwoPoint<T> + ?Sized>(
    k: &K,
    x: T,
    region: Interval<T>,
    opts: QuadOptions<T>,
) -> Result<Estimate<T>> {
    let d = k.horizon();
    let (lo, hi) = ((region.lo - x).max(-d), (region.hi - x).min(d));
    let row = k.row(x);
    let mut extra: Vec<T> = k.breaks().into_iter().map(|c| c - x).collect();
    extra.extend(offset_cuts(k));
    integrate_line(row, lo, hi, Some(T::zero()), k.singular_order(), &extra, opts)
}

/// ∫_region ν(x, y) dx, integrated in the offset s = y − x.
pub fn integrate_x<T: Scalar, K: TwoPoint<T> + ?Sized>(
    k: &K,
    y: T,
    region: Interval<T>,
    opts: QuadOptions<T>,
) -> Result<Estimate<T>> {
    let d = k.horizon();
    let (lo, hi) = ((y - region.hi).max(-d), (y - region.lo).min(d));
    let mut extra: Vec<T> = k.breaks().into_iter().map(|c| y - c).collect();
    extra.extend(offset_cuts(k));
    integrate_line(|s| k.eval_offset(y - s, s), lo, hi, Some(T::zero()), k.singular_order(), &extra, opts)
}

/// ∫_xr ∫_yr ν(x, y) dy dx, iterated, with both levels split where the
/// integrand's support or smoothness changes.
pub fn integrate_rect<T: Scalar, K: TwoPoint<T> + ?Sized>(
    k: &K,
    xr: Interval<T>,
    yr: Interval<T>,
    opts: QuadOptions<T>,
) -> Result<Estimate<T>> {
    let d = k.horizon();
    if xr.lo >= yr.hi + d || yr.lo >= xr.hi + d {
        return Ok(Estimate::zero());
    }
    if k.singular_order() >= T::one() && xr.intersect(&yr).is_some() {
        return Ok(Estimate { value: T::infinity(), error: T::zero() });
    }
    let mut cuts = Vec::new();
    let offs = offset_cuts(k);
    for c in [yr.lo, yr.hi].into_iter().chain(k.breaks()) {
        cuts.push(c);
        cuts.extend(offs.iter().map(|&o| c - o));
    }
    let brk = breakpoints(xr.lo, xr.hi, cuts);
    let inner = QuadOptions { abs_tol: opts.abs_tol * T::lit(0.1) / xr.len().max(T::lit(1e-300)), ..opts };
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let outer = |x: T| match integrate_y(k, x, yr, inner) {
        Ok(e) => e.value,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            T::nan()
        }
    };
    let res = adaptive_breaks(outer, &brk, opts);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    res
}

/// L² norm of ν over xr × yr.
pub fn l2_norm<T: Scalar, K: TwoPoint<T>>(k: K, xr: Interval<T>, yr: Interval<T>, opts: QuadOptions<T>) -> Result<T> {
    Ok(integrate_rect(&Square(k), xr, yr, opts)?.value.max(T::zero()).sqrt())
}

/// L¹ norm of ν over xr × yr.
pub fn l1_norm<T: Scalar, K: TwoPoint<T>>(k: K, xr: Interval<T>, yr: Interval<T>, opts: QuadOptions<T>) -> Result<T> {
    Ok(integrate_rect(&Abs(k), xr, yr, opts)?.value)
}
