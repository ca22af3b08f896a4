//! Uniform meshes on Ω ∪ Γ, piecewise-constant fields, and assembly of the
//! discrete nonlocal Laplacian.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::domain::{DomainSpec, Interval, Region};
use crate::error::{Error, Result};
use crate::kernels::{check_nonnegative, KernelSpec};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// n cells of width h in Ω, flanked by m cells on each side of the collar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh<T> {
    domain: DomainSpec<T>,
    h: T,
    n: usize,
    m: usize,
}

/// Snaps h to |Ω|/round(|Ω|/h) and the collar to round(δ/h) cells.
pub fn build_mesh<T: Scalar>(domain: &DomainSpec<T>, h: T) -> Result<Mesh<T>> {
    if !(h > T::zero() && h.is_finite()) {
        return Err(Error::InvalidMesh(format!("cell width must be positive, got {h}")));
    }
    if h >= domain.delta {
        return Err(Error::InvalidMesh(format!("h = {h} ≥ δ = {}: the collar needs at least one cell", domain.delta)));
    }
    let n = (domain.diam() / h).round().to_usize().unwrap_or(0).max(1);
    let h = domain.diam() / T::of(n);
    let m = (domain.delta / h).round().to_usize().unwrap_or(0).max(1);
    let gap = (T::of(m) * h - domain.delta).abs();
    if gap > domain.delta * T::lit(1e-9) {
        log::warn!("δ = {} is not a multiple of h = {h}; collar snapped to {m} cells", domain.delta);
    }
    Ok(Mesh { domain: *domain, h, n, m })
}

impl<T: Scalar> Mesh<T> {
    pub fn domain(&self) -> &DomainSpec<T> {
        &self.domain
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn n_omega(&self) -> usize {
        self.n
    }

    pub fn n_collar_side(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.n + 2 * self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn left(&self) -> T {
        self.domain.omega.lo - T::of(self.m) * self.h
    }

    pub fn cell(&self, i: usize) -> Interval<T> {
        // offsets from the nearer end of Ω keep cell edges on a, b exactly
        let lo = if i <= self.m + self.n / 2 {
            self.domain.omega.lo + (T::of(i) - T::of(self.m)) * self.h
        } else {
            self.domain.omega.hi - (T::of(self.m + self.n) - T::of(i)) * self.h
        };
        Interval { lo, hi: lo + self.h }
    }

    pub fn midpoint(&self, i: usize) -> T {
        self.cell(i).lo + self.h * T::lit(0.5)
    }

    pub fn midpoints(&self) -> Vec<T> {
        (0..self.len()).map(|i| self.midpoint(i)).collect()
    }

    pub fn is_omega(&self, i: usize) -> bool {
        i >= self.m && i < self.m + self.n
    }

    pub fn omega_cells(&self) -> std::ops::Range<usize> {
        self.m..self.m + self.n
    }

    /// Collar cells in order: left side, then right side.
    pub fn gamma_cells(&self) -> Vec<usize> {
        (0..self.m).chain(self.m + self.n..self.len()).collect()
    }

    pub fn region_cells(&self, region: Region) -> Vec<usize> {
        match region {
            Region::Omega => self.omega_cells().collect(),
            Region::Gamma => self.gamma_cells(),
            Region::Closure => (0..self.len()).collect(),
        }
    }

    /// Cell containing x (clamped to the mesh).
    pub fn locate(&self, x: T) -> usize {
        let k = ((x - self.left()) / self.h).floor();
        k.max(T::zero()).to_usize().unwrap_or(0).min(self.len() - 1)
    }

    /// Where a jump at `x` lands after midpoint sampling: the nearest cell edge.
    pub fn snap(&self, x: T) -> T {
        let c = self.cell(self.locate(x));
        if x - c.lo <= c.hi - x {
            c.lo
        } else {
            c.hi
        }
    }
}

/// One value per cell of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    mesh: Mesh<T>,
    values: Vec<T>,
}

impl<T: Scalar> Field<T> {
    pub fn new(mesh: Mesh<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::InvalidMesh(format!("field has {} values for {} cells", values.len(), mesh.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field value in cell {i}")));
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Mesh<T>) -> Self {
        Self { mesh, values: vec![T::zero(); mesh.len()] }
    }

    pub fn constant(mesh: Mesh<T>, c: T) -> Self {
        Self { mesh, values: vec![c; mesh.len()] }
    }

    /// Samples f at cell midpoints.
    pub fn sample(mesh: Mesh<T>, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(mesh, mesh.midpoints().into_iter().map(f).collect())
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn omega_values(&self) -> Vec<T> {
        self.values[self.mesh.omega_cells()].to_vec()
    }

    pub fn gamma_values(&self) -> Vec<T> {
        self.mesh.gamma_cells().into_iter().map(|i| self.values[i]).collect()
    }

    pub fn sub(&self, o: &Self) -> Self {
        assert_eq!(self.mesh, o.mesh, "fields live on different meshes");
        Self { mesh: self.mesh, values: self.values.iter().zip(&o.values).map(|(a, b)| *a - *b).collect() }
    }

    /// Zero outside `region`.
    pub fn restricted(&self, region: Region) -> Self {
        let mut v = vec![T::zero(); self.values.len()];
        for i in self.mesh.region_cells(region) {
            v[i] = self.values[i];
        }
        Self { mesh: self.mesh, values: v }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "value"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([format!("{}", self.mesh.midpoint(i).f64()), format!("{}", v.f64())])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// W_ij = (1/h)∫_{I_i}∫_{I_j} μ; rows of Ω give A = W_ΩΩ − diag(λ_h) and B = W_ΩΓ.
#[derive(Debug, Clone)]
pub struct AssembledOperator<T> {
    mesh: Mesh<T>,
    w: DenseMatrix<T>,
    a: DenseMatrix<T>,
    b: DenseMatrix<T>,
    row_sums: Vec<T>,
    lambda_full: Vec<T>,
    decoupled: Vec<usize>,
    symmetric_kernel: bool,
}

/// (1/h)∫_{cell_i}∫_{cell_j} μ(x, y) dy dx
pub fn cell_pair_coupling<T: Scalar>(kernel: &KernelSpec<T>, mesh: &Mesh<T>, i: usize, j: usize) -> Result<T> {
    Ok(kernel.rect_integral(mesh.cell(i), mesh.cell(j))? / mesh.h())
}

pub fn assemble<T: Scalar>(kernel: &KernelSpec<T>, mesh: &Mesh<T>) -> Result<AssembledOperator<T>> {
    let d = mesh.domain();
    if (kernel.delta() - d.delta).abs() > d.delta * T::lit(1e-12) {
        return Err(Error::Incompatible(format!("kernel horizon {} differs from the domain's {}", kernel.delta(), d.delta)));
    }
    check_nonnegative(kernel, d)?;
    let n = mesh.len();
    let h = mesh.h();
    // cells further apart than this never interact
    let band = (kernel.delta() / h).ceil().to_usize().unwrap_or(n) + 1;
    let translation_invariant = matches!(
        kernel.family(),
        crate::KernelFamily::Constant { .. } | crate::KernelFamily::PowerLaw { .. } | crate::KernelFamily::TruncatedGaussian
    );
    let mut w = DenseMatrix::zeros(n, n);
    if translation_invariant {
        let mid = mesh.n_collar_side() + mesh.n_omega() / 2;
        let by_offset = (0..=band.min(n - 1))
            .into_par_iter()
            .map(|k| {
                let j = if mid + k < n { mid + k } else { mid - k };
                cell_pair_coupling(kernel, mesh, mid, j)
            })
            .collect::<Result<Vec<T>>>()?;
        for i in 0..n {
            for j in i.saturating_sub(band)..(i + band + 1).min(n) {
                w[(i, j)] = by_offset[i.abs_diff(j)];
            }
        }
    } else {
        let rows = (0..n)
            .into_par_iter()
            .map(|i| {
                let lo = i.saturating_sub(band);
                let hi = (i + band + 1).min(n);
                let mut r = vec![T::zero(); hi - lo];
                for j in lo..hi {
                    if kernel.is_symmetric() && j < i {
                        continue;
                    }
                    r[j - lo] = cell_pair_coupling(kernel, mesh, i, j)?;
                }
                Ok((lo, r))
            })
            .collect::<Result<Vec<_>>>()?;
        for (i, (lo, r)) in rows.into_iter().enumerate() {
            for (k, v) in r.into_iter().enumerate() {
                let j = lo + k;
                if kernel.is_symmetric() && j < i {
                    continue;
                }
                w[(i, j)] = v;
                if kernel.is_symmetric() {
                    w[(j, i)] = v;
                }
            }
        }
    }
    // mass that Γ-cells see beyond Ω ∪ Γ
    let lambda_full = (0..n)
        .into_par_iter()
        .map(|i| {
            let inner: T = w.row(i).iter().copied().sum();
            if mesh.is_omega(i) {
                return Ok(inner);
            }
            let c = mesh.cell(i);
            let cl = d.closure();
            let mut outside = T::zero();
            let left = Interval { lo: c.lo - kernel.delta(), hi: cl.lo };
            let right = Interval { lo: cl.hi, hi: c.hi + kernel.delta() };
            for r in [left, right] {
                if r.hi > r.lo {
                    outside = outside + kernel.rect_integral(c, r)? / h;
                }
            }
            Ok(inner + outside)
        })
        .collect::<Result<Vec<T>>>()?;

    let om: Vec<usize> = mesh.omega_cells().collect();
    let ga = mesh.gamma_cells();
    let mut a = DenseMatrix::zeros(om.len(), om.len());
    let mut b = DenseMatrix::zeros(om.len(), ga.len());
    let mut row_sums = Vec::with_capacity(om.len());
    let mut decoupled = Vec::new();
    let top = (0..n).map(|i| w.row(i).iter().copied().sum::<T>()).fold(T::zero(), T::max);
    for (r, &i) in om.iter().enumerate() {
        let s: T = w.row(i).iter().copied().sum();
        for (c, &j) in om.iter().enumerate() {
            a[(r, c)] = w[(i, j)];
        }
        for (c, &j) in ga.iter().enumerate() {
            b[(r, c)] = w[(i, j)];
        }
        a[(r, r)] = a[(r, r)] - s;
        if s <= top * T::lit(1e-13) {
            decoupled.push(r);
        }
        row_sums.push(s);
    }
    Ok(AssembledOperator { mesh: *mesh, w, a, b, row_sums, lambda_full, decoupled, symmetric_kernel: kernel.is_symmetric() })
}

impl<T: Scalar> AssembledOperator<T> {
    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    /// Couplings between all cells of Ω ∪ Γ.
    pub fn couplings(&self) -> &DenseMatrix<T> {
        &self.w
    }

    pub fn a(&self) -> &DenseMatrix<T> {
        &self.a
    }

    pub fn b(&self) -> &DenseMatrix<T> {
        &self.b
    }

    /// λ_h per Ω-cell.
    pub fn row_sums(&self) -> &[T] {
        &self.row_sums
    }

    /// Ω-cell indices (0-based within Ω) whose kernel mass vanishes.
    pub fn decoupled(&self) -> &[usize] {
        &self.decoupled
    }

    pub fn symmetric_kernel(&self) -> bool {
        self.symmetric_kernel
    }

    /// (𝓛u)_i = Σ_j W_ij (u_j − u_i) on Ω-cells.
    pub fn apply(&self, u: &Field<T>) -> Vec<T> {
        let uo = u.omega_values();
        let ug = u.gamma_values();
        let x = self.a.matvec(&uo);
        let y = self.b.matvec(&ug);
        x.into_iter().zip(y).map(|(p, q)| p + q).collect()
    }

    /// 𝓛u on every cell, u extended by zero beyond Ω ∪ Γ.
    pub fn apply_everywhere(&self, u: &Field<T>) -> Vec<T> {
        let v = u.values();
        let wu = self.w.matvec(v);
        wu.into_iter().zip(v).zip(&self.lambda_full).map(|((s, &ui), &l)| s - l * ui).collect()
    }

    /// max over Ω-rows of |Σ_j A_ij + Σ_k B_ik|
    pub fn row_sum_defect(&self) -> T {
        (0..self.a.rows())
            .map(|r| {
                let s: T = self.a.row(r).iter().copied().sum::<T>() + self.b.row(r).iter().copied().sum::<T>();
                s.abs()
            })
            .fold(T::zero(), T::max)
    }

    pub fn write_matrix(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.a.to_text().as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit(delta: f64, h: f64) -> Mesh<f64> {
        build_mesh(&DomainSpec::unit(delta).unwrap(), h).unwrap()
    }

    #[test]
    fn mesh_counts() {
        let m = unit(0.2, 1.0 / 200.0);
        assert_eq!((m.len(), m.n_omega(), m.n_collar_side()), (280, 200, 40));
        assert_eq!(unit(0.1, 1.0 / 200.0).len(), 240);
        assert!(build_mesh(&DomainSpec::unit(0.2).unwrap(), 0.3).is_err());
        assert_eq!(m.cell(40).lo, 0.0);
        assert_eq!(m.cell(240).lo, 1.0);
        for i in 0..m.len() - 1 {
            assert_relative_eq!(m.cell(i).hi, m.cell(i + 1).lo, epsilon = 1e-15);
        }
    }

    #[test]
    fn constants_in_kernel() {
        let m = unit(0.2, 0.01);
        for k in [
            KernelSpec::constant_standard(0.2).unwrap(),
            KernelSpec::power_law(0.5, 0.2).unwrap(),
            KernelSpec::heterogeneous_exp(0.3, 0.2).unwrap(),
        ] {
            let op = assemble(&k, &m).unwrap();
            let lu = op.apply(&Field::constant(m, 2.5));
            let scale = op.row_sums().iter().copied().fold(0.0, f64::max);
            assert!(lu.iter().all(|v| v.abs() < 1e-12 * scale), "{:?}", k.family());
            assert!(op.row_sum_defect() < 1e-12 * scale);
        }
    }

    #[test]
    fn linear_field_interior() {
        let m = unit(0.2, 0.01);
        let op = assemble(&KernelSpec::constant_standard(0.2).unwrap(), &m).unwrap();
        let lu = op.apply(&Field::sample(m, |x| x).unwrap());
        for (r, i) in m.omega_cells().enumerate() {
            let x = m.midpoint(i);
            if x > 0.2 && x < 0.8 {
                assert!(lu[r].abs() < 1e-8);
            }
        }
    }

    #[test]
    fn constant_neighbours() {
        // fully inside the horizon: 3δ⁻³·h
        let m = unit(0.2, 0.01);
        let k = KernelSpec::constant_standard(0.2).unwrap();
        assert_relative_eq!(cell_pair_coupling(&k, &m, 100, 101).unwrap(), 375.0 * 0.01, max_relative = 1e-10);
        assert_eq!(cell_pair_coupling(&k, &m, 100, 125).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_matrix() {
        let m = unit(0.1, 0.01);
        let op = assemble(&KernelSpec::truncated_gaussian(0.1).unwrap(), &m).unwrap();
        assert!(op.a().asymmetry() < 1e-12);
        let op = assemble(&KernelSpec::heterogeneous_exp(0.3, 0.1).unwrap(), &m).unwrap();
        assert!(op.a().asymmetry() > 1e-6);
    }

    #[test]
    fn snapping() {
        let m = unit(0.1, 0.01);
        assert_relative_eq!(m.snap(0.503), 0.5, epsilon = 1e-12);
        assert_relative_eq!(m.snap(-0.0751), -0.08, epsilon = 1e-12);
    }

    #[test]
    fn csv_rows() {
        let m = unit(0.1, 0.05);
        let f = Field::sample(m, |x| x * x).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        f.write_csv(&p).unwrap();
        let s = std::fs::read_to_string(p).unwrap();
        assert_eq!(s.lines().count(), m.len() + 1);
    }
}
