use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Open interval (lo, hi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Interval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(Error::InvalidDomain(format!("interval ({lo}, {hi}) is empty or non-finite")));
        }
        Ok(Self { lo, hi })
    }

    pub fn len(&self) -> T {
        self.hi - self.lo
    }

    pub fn mid(&self) -> T {
        (self.lo + self.hi) * T::lit(0.5)
    }

    pub fn contains(&self, x: T) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn intersect(&self, o: &Self) -> Option<Self> {
        let (lo, hi) = (self.lo.max(o.lo), self.hi.min(o.hi));
        (hi > lo).then_some(Self { lo, hi })
    }

    /// The parts of `self` outside `cut` (zero, one or two pieces).
    pub fn minus(&self, cut: &Self) -> Vec<Self> {
        let mut out = Vec::with_capacity(2);
        if cut.lo > self.lo {
            out.push(Self { lo: self.lo, hi: self.hi.min(cut.lo) });
        }
        if cut.hi < self.hi {
            out.push(Self { lo: self.lo.max(cut.hi), hi: self.hi });
        }
        out.retain(|i| i.hi > i.lo);
        out
    }
}

/// Ω = (a, b) with horizon δ; the collar is Γ = (a − δ, a) ∪ (b, b + δ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec<T> {
    pub omega: Interval<T>,
    pub delta: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Omega,
    Gamma,
    Closure,
}

impl<T: Scalar> DomainSpec<T> {
    pub fn new(a: T, b: T, delta: T) -> Result<Self> {
        let omega = Interval::new(a, b)?;
        if !(delta > T::zero()) || !delta.is_finite() {
            return Err(Error::InvalidDomain(format!("horizon must be positive, got {delta}")));
        }
        Ok(Self { omega, delta })
    }

    pub fn unit(delta: T) -> Result<Self> {
        Self::new(T::zero(), T::one(), delta)
    }

    pub fn gamma_left(&self) -> Interval<T> {
        Interval { lo: self.omega.lo - self.delta, hi: self.omega.lo }
    }

    pub fn gamma_right(&self) -> Interval<T> {
        Interval { lo: self.omega.hi, hi: self.omega.hi + self.delta }
    }

    /// Ω ∪ Γ (as one interval; the union is connected).
    pub fn closure(&self) -> Interval<T> {
        Interval { lo: self.omega.lo - self.delta, hi: self.omega.hi + self.delta }
    }

    pub fn pieces(&self, region: Region) -> Vec<Interval<T>> {
        match region {
            Region::Omega => vec![self.omega],
            Region::Gamma => vec![self.gamma_left(), self.gamma_right()],
            Region::Closure => vec![self.closure()],
        }
    }

    pub fn diam(&self) -> T {
        self.omega.len()
    }

    pub fn with_delta(&self, delta: T) -> Result<Self> {
        Self::new(self.omega.lo, self.omega.hi, delta)
    }

    /// Points used for sup-norms over `region`: a uniform grid of width `h`, a
    /// ten-times finer grid within one horizon of ∂Ω, and the endpoints.
    pub fn sup_samples(&self, region: Region, h: T) -> Vec<T> {
        let mut pts = Vec::new();
        let bounds = [self.omega.lo, self.omega.hi];
        for piece in self.pieces(region) {
            let n = (piece.len() / h).ceil().to_usize().unwrap_or(1).max(1);
            let step = piece.len() / T::of(n);
            for i in 0..=n {
                pts.push(piece.lo + step * T::of(i));
            }
            let fine = step / T::lit(10.0);
            for &c in &bounds {
                if let Some(w) = piece.intersect(&Interval { lo: c - self.delta, hi: c + self.delta }) {
                    let m = (w.len() / fine).ceil().to_usize().unwrap_or(1).max(1);
                    let st = w.len() / T::of(m);
                    for i in 0..=m {
                        pts.push(w.lo + st * T::of(i));
                    }
                }
            }
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        pts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collar_layout() {
        let d = DomainSpec::unit(0.2).unwrap();
        assert_eq!(d.gamma_left(), Interval { lo: -0.2, hi: 0.0 });
        assert_eq!(d.closure(), Interval { lo: -0.2, hi: 1.2 });
        assert!(DomainSpec::new(1.0, 0.0, 0.1).is_err());
        assert!(DomainSpec::unit(0.0).is_err());
    }

    #[test]
    fn interval_minus() {
        let i = Interval { lo: 0.0, hi: 1.0 };
        assert_eq!(i.minus(&Interval { lo: 0.4, hi: 0.6 }).len(), 2);
        assert_eq!(i.minus(&Interval { lo: -1.0, hi: 0.5 }), vec![Interval { lo: 0.5, hi: 1.0 }]);
        assert!(i.minus(&Interval { lo: -1.0, hi: 2.0 }).is_empty());
    }

    #[test]
    fn samples_cover_endpoints() {
        let d = DomainSpec::unit(0.2).unwrap();
        let s = d.sup_samples(Region::Omega, 0.005);
        assert_eq!(s[0], 0.0);
        assert_eq!(*s.last().unwrap(), 1.0);
        assert!(s.len() > 900);
    }
}
