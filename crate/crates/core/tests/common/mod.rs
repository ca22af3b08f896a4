//! Reference quadrature shared by the oracle and acceptance targets.

use nonloc::kernels::KernelSpec;
use nonloc::Interval;

/// Gauss–Legendre nodes and weights on [−1, 1] by Newton on Pₙ.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            loop {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    (p0, p1) = (p1, ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k);
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    let w = 2.0 / ((1.0 - x * x) * dp * dp);
                    return (x, w);
                }
            }
        })
        .collect()
}

pub fn gl(f: impl Fn(f64) -> f64, a: f64, b: f64, rule: &[(f64, f64)]) -> f64 {
    let (m, r) = ((a + b) / 2.0, (b - a) / 2.0);
    rule.iter().map(|(x, w)| w * f(m + r * x)).sum::<f64>() * r
}

/// (1/h) ∫_{cell x} ∫_{cell y ∩ (x−δ, x+δ)} μ, the outer integral split wherever the
/// clipped inner limits change form, so every piece is smooth.
pub fn brute_coupling(k: &KernelSpec<f64>, xi: Interval<f64>, yj: Interval<f64>, h: f64, rule: &[(f64, f64)]) -> f64 {
    let d = k.delta();
    let mut cuts = vec![xi.lo, xi.hi];
    for c in [yj.lo - d, yj.lo + d, yj.hi - d, yj.hi + d] {
        if c > xi.lo && c < xi.hi {
            cuts.push(c);
        }
    }
    cuts.sort_by(f64::total_cmp);
    let inner = |x: f64| {
        let (a, b) = (yj.lo.max(x - d), yj.hi.min(x + d));
        if b <= a {
            0.0
        } else {
            gl(|y| k.evaluate(x, y), a, b, rule)
        }
    };
    cuts.windows(2).map(|w| gl(inner, w[0], w[1], rule)).sum::<f64>() / h
}

pub fn split(c: Interval<f64>, at: Interval<f64>) -> Vec<Interval<f64>> {
    let mut pts = vec![c.lo, c.hi];
    for p in [at.lo, at.hi] {
        if p > c.lo && p < c.hi {
            pts.push(p);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.windows(2).map(|w| Interval::new(w[0], w[1]).unwrap()).collect()
}

/// Max |W_ij − oracle| over Ω-rows of a 10-cell mesh, for the smooth families.
pub fn ten_cell_discrepancy(delta: f64) -> f64 {
    use nonloc::{assemble, build_mesh, BondMode, DomainSpec};
    let rule = gauss_legendre(24);
    let domain = DomainSpec::unit(delta).unwrap();
    let mesh = build_mesh(&domain, 0.1).unwrap();
    assert_eq!(mesh.n_omega(), 10);
    let excised = Interval::new(0.42, 0.58).unwrap();
    let kernels = [
        KernelSpec::constant_standard(delta).unwrap(),
        KernelSpec::heterogeneous_exp(0.5, delta).unwrap(),
        KernelSpec::truncated_gaussian(delta).unwrap(),
        KernelSpec::bond_removal(KernelSpec::constant_standard(delta).unwrap(), excised, BondMode::Decouple).unwrap(),
    ];
    let mut worst = 0f64;
    for k in &kernels {
        let op = assemble(k, &mesh).unwrap();
        let w = op.couplings();
        for i in mesh.omega_cells() {
            for j in 0..mesh.len() {
                // bond removal is discontinuous at the excised endpoints; split there too
                let mut want = 0.0;
                for xs in split(mesh.cell(i), excised) {
                    for ys in split(mesh.cell(j), excised) {
                        want += brute_coupling(k, xs, ys, mesh.h(), &rule);
                    }
                }
                worst = worst.max((w[(i, j)] - want).abs());
            }
        }
    }
    worst
}

/// |W_ii − oracle| for a power-law diagonal cell at h = 1/200, the oracle a
/// 10⁶-point composite midpoint rule after s = t^m, m = 1/(1−ε), which removes
/// the singularity from (2/h)∫₀ʰ (h−s) μ(s) ds.
pub fn power_law_diagonal_discrepancy(eps: f64) -> f64 {
    use nonloc::{assemble, build_mesh, DomainSpec};
    let h = 0.005;
    let mesh = build_mesh(&DomainSpec::unit(0.2).unwrap(), h).unwrap();
    let k = KernelSpec::power_law(eps, 0.2).unwrap();
    let op = assemble(&k, &mesh).unwrap();
    let i = mesh.omega_cells().start + 17;
    let x0 = mesh.midpoint(i);
    let m = 1.0 / (1.0 - eps);
    let n = 1_000_000;
    let dt = h.powf(1.0 / m) / n as f64;
    let mut s = 0.0;
    for q in 0..n {
        let t = (q as f64 + 0.5) * dt;
        let sv = t.powf(m);
        s += (h - sv) * k.evaluate_offset(x0, sv) * m * t.powf(m - 1.0);
    }
    (op.couplings()[(i, i)] - 2.0 / h * s * dt).abs()
}
