//! Orthonormal bases of the model space `𝒟 = H² ⊖ bH²`.
//!
//! The canonical basis is the Takenaka–Malmquist system
//! `w_j = (1 − |α_j|²)^{1/2}/(1 − ᾱ_j z) · Π_{k<j} b_{α_k}`, evaluated in closed form.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::blaschke::{factor, BlaschkeProduct, BranchSystem};
use crate::boundary::{l2_inner, sample_blaschke, BoundaryFunction, CircleGrid, FourierSeries, OuterFunction};
use crate::error::{Error, Result};
use crate::transfer::{ModuleVector, TransferOperator, GRAM_TOL};

/// Accepted deviation of `U*U` from the identity.
pub const UNITARY_TOL: f64 = 1e-10;

/// Tolerances applied to user-supplied bases.
pub const USER_GRAM_TOL: f64 = 1e-8;
pub const USER_ANALYTIC_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Canonical,
    Rotated,
    User,
}

/// `N` orthonormal elements of `𝒟` attached to their Blaschke product.
#[derive(Debug, Clone)]
pub struct ModelBasis {
    owner: BlaschkeProduct,
    elements: Vec<ModuleVector>,
    kind: BasisKind,
}

/// Numerical membership report for a candidate basis of `𝒟`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasisCheck {
    /// `max |(v_i, v_j) − δ_ij|`.
    pub gram_deviation: f64,
    /// Largest negative-mode energy among the elements.
    pub neg_energy: f64,
    /// `max |(v_i, b·e_n)|` over the tested modes.
    pub bh2_overlap: f64,
    /// Smallest modulus attained on the grid.
    pub min_modulus: f64,
}

impl ModelBasis {
    /// Accepts a user family after checking orthonormality, analyticity and orthogonality to `bH²`.
    pub fn from_user(owner: BlaschkeProduct, elements: Vec<ModuleVector>, grid: CircleGrid, window: usize) -> Result<Self> {
        if elements.len() != owner.degree() {
            return Err(Error::Shape(format!("{} elements for a model space of dimension {}", elements.len(), owner.degree())));
        }
        let basis = Self { owner, elements, kind: BasisKind::User };
        let check = basis.check(grid, window)?;
        if check.gram_deviation > USER_GRAM_TOL {
            return Err(Error::GramCheck { deviation: check.gram_deviation });
        }
        let samples = basis.samples(grid)?;
        for (index, s) in samples.iter().enumerate() {
            let energy = s.fourier_coeffs(window)?.neg_energy();
            if energy > USER_ANALYTIC_TOL {
                return Err(Error::NotInModelSpace { index, reason: format!("negative-mode energy {energy:e}") });
            }
        }
        if check.bh2_overlap > USER_GRAM_TOL {
            return Err(Error::NotInModelSpace { index: 0, reason: format!("overlap {:e} with b·H²", check.bh2_overlap) });
        }
        Ok(basis)
    }

    pub fn owner(&self) -> &BlaschkeProduct {
        &self.owner
    }

    pub fn elements(&self) -> &[ModuleVector] {
        &self.elements
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn samples(&self, grid: CircleGrid) -> Result<Vec<BoundaryFunction>> {
        self.elements.iter().map(|v| v.sample(grid)).collect()
    }

    /// Fourier windows of the elements, for export.
    pub fn to_series(&self, grid: CircleGrid, window: usize) -> Result<Vec<FourierSeries>> {
        self.samples(grid)?.iter().map(|s| s.fourier_coeffs(window)).collect()
    }

    /// Gram, analyticity and `bH²`-orthogonality diagnostics on the grid, testing `b·e_n` for `n ≤ window`.
    pub fn check(&self, grid: CircleGrid, window: usize) -> Result<BasisCheck> {
        let samples = self.samples(grid)?;
        let mut gram_deviation = 0.0f64;
        for (i, vi) in samples.iter().enumerate() {
            for (j, vj) in samples.iter().enumerate() {
                let delta = if i == j { 1.0 } else { 0.0 };
                gram_deviation = gram_deviation.max((l2_inner(vi, vj)? - delta).norm());
            }
        }
        let mut neg_energy = 0.0f64;
        for s in &samples {
            neg_energy = neg_energy.max(s.fourier_coeffs(window.min(grid.max_window()))?.neg_energy());
        }
        let b = sample_blaschke(&self.owner, grid)?;
        let mut bh2_overlap = 0.0f64;
        let mut shifted = b.clone();
        let e1 = FourierSeries::monomial(1).synthesize_grid(grid);
        for _ in 0..=window {
            for s in &samples {
                bh2_overlap = bh2_overlap.max(l2_inner(s, &shifted)?.norm());
            }
            shifted = shifted.mul(&e1)?;
        }
        let min_modulus = samples.iter().flat_map(|s| s.values().iter().map(|v| v.norm())).fold(f64::INFINITY, f64::min);
        Ok(BasisCheck { gram_deviation, neg_energy, bh2_overlap, min_modulus })
    }

    /// The module vectors `m_i = v_i·J^{−1/2}`; `j_inv_half` must be the outer function with power `−1/2`.
    pub fn module_family(&self, j_inv_half: &OuterFunction) -> Vec<ModuleVector> {
        self.elements
            .iter()
            .map(|v| {
                let j = j_inv_half.clone();
                v.mul_fn("J^-1/2", move |t| j.eval_angle(t))
            })
            .collect()
    }
}

/// The Takenaka–Malmquist basis built from the partial products of `b`, in zero order.
pub fn canonical_basis(b: &BlaschkeProduct) -> ModelBasis {
    let zeros = b.zeros().to_vec();
    let elements = (0..zeros.len())
        .map(|j| {
            let zs = zeros.clone();
            ModuleVector::from_fn(format!("w_{}", j + 1), move |t| {
                let z = Complex64::from_polar(1.0, t);
                let a = zs[j];
                let mut acc = Complex64::new((1.0 - a.norm_sqr()).sqrt(), 0.0) / (1.0 - a.conj() * z);
                for &ak in &zs[..j] {
                    acc *= factor(ak, z).expect("no poles on the circle");
                }
                acc
            })
        })
        .collect();
    ModelBasis { owner: b.clone(), elements, kind: BasisKind::Canonical }
}

/// `max_ij |(U*U − I)_ij|`.
pub fn unitary_deviation(u: &DMatrix<Complex64>) -> f64 {
    let n = u.nrows();
    let g = u.adjoint() * u;
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((g[(i, j)] - delta).norm());
        }
    }
    dev
}

/// `ṽ_i = Σ_j U_ij v_j` for a scalar unitary `U`.
pub fn rotate_basis(basis: &ModelBasis, u: &DMatrix<Complex64>) -> Result<ModelBasis> {
    let n = basis.len();
    if u.nrows() != n || u.ncols() != n {
        return Err(Error::Shape(format!("{}×{} matrix for a basis of {n} elements", u.nrows(), u.ncols())));
    }
    let deviation = unitary_deviation(u);
    if deviation.is_nan() || deviation >= UNITARY_TOL {
        return Err(Error::NonUnitary { deviation });
    }
    let elements = (0..n)
        .map(|i| {
            let row: Vec<Complex64> = (0..n).map(|j| u[(i, j)]).collect();
            let parts = basis.elements.clone();
            ModuleVector::from_fn(format!("rot_{}", i + 1), move |t| row.iter().zip(&parts).map(|(c, v)| c * v.eval_angle(t)).sum())
        })
        .collect();
    Ok(ModelBasis { owner: basis.owner.clone(), elements, kind: BasisKind::Rotated })
}

/// `max |(v_i bⁿ, v_j bᵐ) − δ_ij δ_nm|` over `n, m ∈ [lo, hi]`.
pub fn check_wandering(basis: &ModelBasis, lo: i64, hi: i64, grid: CircleGrid) -> Result<f64> {
    let b = sample_blaschke(&basis.owner, grid)?;
    let samples = basis.samples(grid)?;
    let mut family = Vec::new();
    for n in lo..=hi {
        let bn = b.map(|v| if n >= 0 { v.powi(n as i32) } else { v.conj().powi((-n) as i32) });
        for (i, s) in samples.iter().enumerate() {
            family.push(((i, n), s.mul(&bn)?));
        }
    }
    let mut deviation = 0.0f64;
    for (a, fa) in &family {
        for (c, fc) in &family {
            let delta = if a == c { 1.0 } else { 0.0 };
            deviation = deviation.max((l2_inner(fa, fc)? - delta).norm());
        }
    }
    Ok(deviation)
}

/// Largest norm of `e_k − P(e_k)` over `k ≤ window`, where `P` projects onto
/// `span{v_i} ⊕ span{b·e_n : n ≤ window}`. Near zero exactly when the basis spans `𝒟`.
pub fn complement_defect(basis: &ModelBasis, window: usize, grid: CircleGrid) -> Result<f64> {
    let b = sample_blaschke(&basis.owner, grid)?;
    let mut spanning = basis.samples(grid)?;
    let e1 = FourierSeries::monomial(1).synthesize_grid(grid);
    let mut shifted = b;
    for _ in 0..=window {
        spanning.push(shifted.clone());
        shifted = shifted.mul(&e1)?;
    }
    let mut worst = 0.0f64;
    for k in 0..=window as i64 {
        let ek = FourierSeries::monomial(k).synthesize_grid(grid);
        let mut residual = ek.clone();
        for s in &spanning {
            let c = l2_inner(&ek, s)?;
            residual = residual.zip_with(s, |r, v| r - c * v)?;
        }
        worst = worst.max(l2_inner(&residual, &residual)?.re.sqrt());
    }
    Ok(worst)
}

/// Matrix of module inner products `u_ij = ⟨A_i, B_j⟩` linking two orthonormal module bases.
#[derive(Debug, Clone)]
pub struct LinkingUnitary {
    pub entries: Vec<Vec<BoundaryFunction>>,
    /// `max_z max_σ |σ(u(z)) − 1|` over singular values, off excluded nodes.
    pub unitarity_deviation: f64,
    /// `max |B_j − Σ_i A_i·β(u_ij)|` off excluded nodes.
    pub reconstruction_residual: f64,
    pub excluded: Vec<usize>,
}

impl LinkingUnitary {
    /// The scalar matrix `u(t_k)` at grid node `k`.
    pub fn at_node(&self, k: usize) -> DMatrix<Complex64> {
        let n = self.entries.len();
        DMatrix::from_fn(n, n, |i, j| self.entries[i][j].values()[k])
    }
}

/// Computes the linking matrix between two orthonormal module bases.
pub fn linking_unitary(bs: &BranchSystem, a: &[ModuleVector], b: &[ModuleVector], grid: CircleGrid) -> Result<LinkingUnitary> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("families of sizes {} and {}", a.len(), b.len())));
    }
    let op = TransferOperator::new(bs, grid);
    for family in [a, b] {
        let gram = op.gram(family);
        if gram.deviation.is_nan() || gram.deviation >= GRAM_TOL {
            return Err(Error::GramCheck { deviation: gram.deviation });
        }
    }
    let n = a.len();
    let mut excluded = Vec::new();
    let mut entries = Vec::with_capacity(n);
    let mut pulled = Vec::with_capacity(n);
    for ai in a {
        let mut row = Vec::with_capacity(n);
        let mut prow = Vec::with_capacity(n);
        for bj in b {
            let integrand = ai.conj().mul(bj);
            let out = op.apply(&integrand);
            let back = op.expectation(&integrand);
            excluded.extend_from_slice(&out.excluded);
            excluded.extend_from_slice(&back.excluded);
            row.push(out.values);
            prow.push(back.values);
        }
        entries.push(row);
        pulled.push(prow);
    }
    for v in a.iter().chain(b) {
        excluded.extend((0..grid.size()).filter(|&k| v.near_exception(grid.node(k), crate::transfer::EXCEPTION_RADIUS)));
    }
    excluded.sort_unstable();
    excluded.dedup();

    let mut result = LinkingUnitary { entries, unitarity_deviation: 0.0, reconstruction_residual: 0.0, excluded };
    let mut skip = result.excluded.iter().peekable();
    for k in 0..grid.size() {
        if skip.peek() == Some(&&k) {
            skip.next();
            continue;
        }
        let u = result.at_node(k);
        for s in u.singular_values().iter() {
            result.unitarity_deviation = result.unitarity_deviation.max((s - 1.0).abs());
        }
        let t = grid.node(k);
        for (j, bj) in b.iter().enumerate() {
            let recon: Complex64 = (0..n).map(|i| a[i].eval_angle(t) * pulled[i][j].values()[k]).sum();
            result.reconstruction_residual = result.reconstruction_residual.max((recon - bj.eval_angle(t)).norm());
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn product(zeros: &[Complex64]) -> BlaschkeProduct {
        BlaschkeProduct::new(zeros.to_vec()).unwrap()
    }

    #[test]
    fn canonical_examples() {
        let basis = canonical_basis(&product(&[c(0.0, 0.0); 2]));
        let t = 0.9;
        assert_abs_diff_eq!((basis.elements()[0].eval_angle(t) - 1.0).norm(), 0.0);
        assert_abs_diff_eq!((basis.elements()[1].eval_angle(t) - Complex64::from_polar(1.0, t)).norm(), 0.0, epsilon = 1e-15);

        let basis = canonical_basis(&product(&[c(0.5, 0.0)]));
        let z = Complex64::from_polar(1.0, t);
        assert_abs_diff_eq!((basis.elements()[0].eval_angle(t) - 0.75f64.sqrt() / (1.0 - 0.5 * z)).norm(), 0.0, epsilon = 1e-15);

        let grid = CircleGrid::new(4096).unwrap();
        let basis = canonical_basis(&product(&[c(0.5, 0.0), c(0.0, -0.3)]));
        let check = basis.check(grid, 32).unwrap();
        assert!(check.gram_deviation < 1e-10);
        assert!(check.neg_energy < 1e-20);
        assert!(check.bh2_overlap < 1e-12);
        assert!(check.min_modulus > 0.1);
    }

    #[test]
    fn rotation_examples() {
        let basis = canonical_basis(&product(&[c(0.0, 0.0); 2]));
        let same = rotate_basis(&basis, &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(same.kind(), BasisKind::Rotated);
        assert_abs_diff_eq!((same.elements()[1].eval_angle(0.3) - basis.elements()[1].eval_angle(0.3)).norm(), 0.0);

        let r = FRAC_1_SQRT_2;
        let u = DMatrix::from_row_slice(2, 2, &[c(r, 0.0), c(r, 0.0), c(-r, 0.0), c(r, 0.0)]);
        let rot = rotate_basis(&basis, &u).unwrap();
        let t = 1.4;
        let z = Complex64::from_polar(1.0, t);
        assert_abs_diff_eq!((rot.elements()[0].eval_angle(t) - (1.0 + z) * r).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((rot.elements()[1].eval_angle(t) - (z - 1.0) * r).norm(), 0.0, epsilon = 1e-15);
        assert!(rot.check(CircleGrid::new(256).unwrap(), 8).unwrap().gram_deviation < 1e-14);

        let bad = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.1, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(rotate_basis(&basis, &bad), Err(Error::NonUnitary { .. })));
    }

    #[test]
    fn wandering_examples() {
        let grid = CircleGrid::new(1024).unwrap();
        let basis = canonical_basis(&product(&[c(0.0, 0.0); 2]));
        assert!(check_wandering(&basis, -3, 3, grid).unwrap() < 1e-12);
        let basis = canonical_basis(&product(&[c(0.5, 0.0)]));
        let d = check_wandering(&basis, -4, 4, grid).unwrap();
        assert!(d < 1e-9);
        let phases = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![Complex64::from_polar(1.0, 0.7)]));
        let rotated = rotate_basis(&basis, &phases).unwrap();
        assert_abs_diff_eq!(check_wandering(&rotated, -4, 4, grid).unwrap(), d, epsilon = 1e-12);
    }

    #[test]
    fn dimension_of_model_space() {
        let grid = CircleGrid::new(1024).unwrap();
        let b = product(&[c(0.3, 0.2), c(-0.4, 0.0), c(0.1, -0.5)]);
        let basis = canonical_basis(&b);
        assert!(complement_defect(&basis, 12, grid).unwrap() < 1e-10);
        let short = ModelBasis { owner: b, elements: basis.elements()[..2].to_vec(), kind: BasisKind::User };
        assert!(complement_defect(&short, 12, grid).unwrap() > 0.1);
    }

    #[test]
    fn user_bases_are_validated() {
        let grid = CircleGrid::new(512).unwrap();
        let b = product(&[c(0.0, 0.0); 2]);
        let good = vec![ModuleVector::exponential(1), ModuleVector::exponential(0)];
        assert!(ModelBasis::from_user(b.clone(), good, grid, 16).is_ok());
        let outside = vec![ModuleVector::exponential(0), ModuleVector::exponential(2)];
        assert!(matches!(ModelBasis::from_user(b.clone(), outside, grid, 16), Err(Error::NotInModelSpace { .. })));
        let negative = vec![ModuleVector::exponential(0), ModuleVector::exponential(-1)];
        assert!(matches!(ModelBasis::from_user(b.clone(), negative, grid, 16), Err(Error::NotInModelSpace { .. })));
        let repeated = vec![ModuleVector::exponential(0), ModuleVector::exponential(0)];
        assert!(matches!(ModelBasis::from_user(b, repeated, grid, 16), Err(Error::GramCheck { .. })));
    }

    #[test]
    fn linking_identity_and_rotation() {
        let grid = CircleGrid::new(256).unwrap();
        let b = product(&[c(0.3, 0.1), c(-0.2, 0.4)]);
        let bs = b.branches(1024).unwrap();
        let j = crate::boundary::outer_symbol(&b, CircleGrid::new(4096).unwrap(), -0.5).unwrap();
        let basis = canonical_basis(&b);
        let m = basis.module_family(&j);
        let same = linking_unitary(&bs, &m, &m, grid).unwrap();
        for i in 0..2 {
            for k in 0..2 {
                let want = if i == k { 1.0 } else { 0.0 };
                assert!(same.entries[i][k].values().iter().all(|v| (v - want).norm() < 1e-9));
            }
        }
        let u = DMatrix::from_row_slice(2, 2, &[c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.8), c(0.6, 0.0)]);
        let rotated = rotate_basis(&basis, &u).unwrap().module_family(&j);
        let link = linking_unitary(&bs, &m, &rotated, grid).unwrap();
        for i in 0..2 {
            for k in 0..2 {
                let want = u[(k, i)];
                assert!(link.entries[i][k].values().iter().all(|v| (v - want).norm() < 1e-8));
            }
        }
        assert!(link.unitarity_deviation < 1e-8);
        assert!(link.reconstruction_residual < 1e-8);
    }
}
