//! The transfer operator `ℒ(ξ)(z) = (1/N) Σ_{b(w)=z} ξ(w)` and the Hilbert-module structure it induces.
//!
//! Module vectors are evaluated at exact preimages rather than interpolated, so band-limited
//! inputs and indicator functions are handled alike. A node whose preimage falls within
//! [`EXCEPTION_RADIUS`] of a declared exception point of the input is reported in
//! [`TransferOutput::excluded`] and kept in the output with its half-open-arc value.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::blaschke::BranchSystem;
use crate::boundary::{BoundaryFunction, CircleGrid, FourierSeries};
use crate::error::{Error, Result};

/// Angular distance below which a preimage counts as hitting an exception point.
pub const EXCEPTION_RADIUS: f64 = 1e-10;

/// Sup-norm deviation of a module Gram matrix from the identity accepted as orthonormal.
pub const GRAM_TOL: f64 = 1e-6;

type Evaluator = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// How a [`ModuleVector`] is evaluated.
#[derive(Clone)]
pub enum Representation {
    Series(FourierSeries),
    Function(Evaluator),
}

/// An element of the module `L^∞(𝕋)`, evaluable at any angle.
#[derive(Clone)]
pub struct ModuleVector {
    repr: Representation,
    label: String,
    exceptions: Vec<f64>,
}

impl fmt::Debug for ModuleVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.repr {
            Representation::Series(_) => "series",
            Representation::Function(_) => "function",
        };
        f.debug_struct("ModuleVector").field("label", &self.label).field("repr", &kind).field("exceptions", &self.exceptions).finish()
    }
}

impl ModuleVector {
    pub fn from_series(series: FourierSeries, label: impl Into<String>) -> Self {
        Self { repr: Representation::Series(series), label: label.into(), exceptions: Vec::new() }
    }

    /// A vector given by `t ↦ f(t)` on the circle `e^{it}`.
    pub fn from_fn<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64) -> Complex64 + Send + Sync + 'static,
    {
        Self { repr: Representation::Function(Arc::new(f)), label: label.into(), exceptions: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::from_fn(format!("{c}"), move |_| c)
    }

    /// The exponential `e_n`.
    pub fn exponential(n: i64) -> Self {
        Self::from_fn(format!("e_{n}"), move |t| Complex64::from_polar(1.0, n as f64 * t))
    }

    /// Declares angles where the vector is discontinuous.
    pub fn with_exceptions(mut self, exceptions: Vec<f64>) -> Self {
        self.exceptions = exceptions.into_iter().map(|t| t.rem_euclid(TAU)).collect();
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn exceptions(&self) -> &[f64] {
        &self.exceptions
    }

    pub fn representation(&self) -> &Representation {
        &self.repr
    }

    pub fn as_series(&self) -> Option<&FourierSeries> {
        match &self.repr {
            Representation::Series(s) => Some(s),
            Representation::Function(_) => None,
        }
    }

    #[inline]
    pub fn eval_angle(&self, t: f64) -> Complex64 {
        match &self.repr {
            Representation::Series(s) => s.eval_angle(t),
            Representation::Function(f) => f(t),
        }
    }

    pub fn sample(&self, grid: CircleGrid) -> Result<BoundaryFunction> {
        BoundaryFunction::sample(grid, |t| self.eval_angle(t))
    }

    /// Whether a preimage at angle `t` lies within `radius` of an exception point.
    pub fn near_exception(&self, t: f64, radius: f64) -> bool {
        let t = t.rem_euclid(TAU);
        self.exceptions.iter().any(|&e| {
            let d = (t - e).abs();
            d.min(TAU - d) < radius
        })
    }

    fn merged_exceptions(&self, other: &Self) -> Vec<f64> {
        let mut e = self.exceptions.clone();
        e.extend_from_slice(&other.exceptions);
        e.sort_by(f64::total_cmp);
        e.dedup();
        e
    }

    pub fn conj(&self) -> Self {
        let repr = match &self.repr {
            Representation::Series(s) => {
                let m = s.window();
                Representation::Series(FourierSeries::from_fn(m, |n| s.coeff(-n).conj()))
            }
            Representation::Function(f) => {
                let f = f.clone();
                Representation::Function(Arc::new(move |t| f(t).conj()))
            }
        };
        Self { repr, label: format!("conj({})", self.label), exceptions: self.exceptions.clone() }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Self {
        let (a, b) = (self.clone(), other.clone());
        let exceptions = self.merged_exceptions(other);
        Self::from_fn(format!("{}·{}", self.label, other.label), move |t| a.eval_angle(t) * b.eval_angle(t)).with_exceptions(exceptions)
    }

    /// Pointwise sum.
    pub fn add(&self, other: &Self) -> Self {
        if let (Some(s), Some(o)) = (self.as_series(), other.as_series()) {
            return Self::from_series(s.add(o), format!("{}+{}", self.label, other.label));
        }
        let (a, b) = (self.clone(), other.clone());
        let exceptions = self.merged_exceptions(other);
        Self::from_fn(format!("{}+{}", self.label, other.label), move |t| a.eval_angle(t) + b.eval_angle(t)).with_exceptions(exceptions)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        if let Some(series) = self.as_series() {
            return Self::from_series(series.scale(s), format!("{s}·{}", self.label));
        }
        let a = self.clone();
        Self::from_fn(format!("{s}·{}", self.label), move |t| s * a.eval_angle(t)).with_exceptions(self.exceptions.clone())
    }

    /// `t ↦ g(t)·ξ(t)` for a closure `g`.
    pub fn mul_fn<F>(&self, label: &str, g: F) -> Self
    where
        F: Fn(f64) -> Complex64 + Send + Sync + 'static,
    {
        let a = self.clone();
        Self::from_fn(format!("{label}·{}", self.label), move |t| g(t) * a.eval_angle(t)).with_exceptions(self.exceptions.clone())
    }
}

/// Values of a transfer computation on a grid and the nodes flagged near exception points.
#[derive(Debug, Clone)]
pub struct TransferOutput {
    pub values: BoundaryFunction,
    pub excluded: Vec<usize>,
}

impl TransferOutput {
    /// `max |values − target|` over the nodes not excluded.
    pub fn sup_distance_off_excluded(&self, target: impl Fn(usize) -> Complex64) -> f64 {
        let mut skip = self.excluded.iter().peekable();
        let mut worst = 0.0f64;
        for (k, v) in self.values.values().iter().enumerate() {
            if skip.peek() == Some(&&k) {
                skip.next();
                continue;
            }
            worst = worst.max((v - target(k)).norm());
        }
        worst
    }
}

/// Preimage angles of a list of target angles, `N` per target, stored contiguously.
#[derive(Debug, Clone)]
pub struct PreimageTable {
    degree: usize,
    angles: Vec<f64>,
}

impl PreimageTable {
    /// Preimages of `e^{iφ}` for each `φ` in `targets`.
    pub fn new(bs: &BranchSystem, targets: &[f64]) -> Self {
        let angles = targets.par_iter().flat_map_iter(|&phi| bs.preimage_angles(phi)).collect();
        Self { degree: bs.degree(), angles }
    }

    pub fn len(&self) -> usize {
        self.angles.len() / self.degree
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn preimages(&self, k: usize) -> &[f64] {
        &self.angles[k * self.degree..(k + 1) * self.degree]
    }

    /// `ℒ(ξ)` at every target plus the indices of targets with a preimage near an exception point.
    pub fn average(&self, xi: &ModuleVector) -> (Vec<Complex64>, Vec<usize>) {
        let n = self.degree as f64;
        let values: Vec<Complex64> =
            (0..self.len()).into_par_iter().map(|k| self.preimages(k).iter().map(|&t| xi.eval_angle(t)).sum::<Complex64>() / n).collect();
        let excluded = if xi.exceptions().is_empty() {
            Vec::new()
        } else {
            (0..self.len()).filter(|&k| self.preimages(k).iter().any(|&t| xi.near_exception(t, EXCEPTION_RADIUS))).collect()
        };
        (values, excluded)
    }
}

/// `ℒ` and `𝔼 = β∘ℒ` on a fixed grid, with the preimage tables computed once.
#[derive(Debug, Clone)]
pub struct TransferOperator {
    branches: BranchSystem,
    grid: CircleGrid,
    at_nodes: PreimageTable,
    at_images: PreimageTable,
}

impl TransferOperator {
    pub fn new(bs: &BranchSystem, grid: CircleGrid) -> Self {
        let nodes = grid.nodes();
        let images: Vec<f64> = nodes.iter().map(|&t| bs.owner().eval_angle(t).arg()).collect();
        Self { branches: bs.clone(), grid, at_nodes: PreimageTable::new(bs, &nodes), at_images: PreimageTable::new(bs, &images) }
    }

    pub fn grid(&self) -> CircleGrid {
        self.grid
    }

    pub fn branches(&self) -> &BranchSystem {
        &self.branches
    }

    /// Preimages of each grid node.
    pub fn node_preimages(&self) -> &PreimageTable {
        &self.at_nodes
    }

    /// `ℒ(ξ)` sampled on the grid.
    pub fn apply(&self, xi: &ModuleVector) -> TransferOutput {
        let (values, excluded) = self.at_nodes.average(xi);
        TransferOutput { values: BoundaryFunction::from_values(self.grid, values).expect("finite input"), excluded }
    }

    /// `𝔼(f) = ℒ(f)∘b` sampled on the grid.
    pub fn expectation(&self, f: &ModuleVector) -> TransferOutput {
        let (values, excluded) = self.at_images.average(f);
        TransferOutput { values: BoundaryFunction::from_values(self.grid, values).expect("finite input"), excluded }
    }

    /// `⟨ξ, η⟩ = ℒ(ξ̄η)` sampled on the grid.
    pub fn inner(&self, xi: &ModuleVector, eta: &ModuleVector) -> TransferOutput {
        self.apply(&xi.conj().mul(eta))
    }

    /// Module Gram functions `G_ij = ⟨ξ_i, ξ_j⟩` and their sup deviation from `δ_ij` off excluded nodes.
    pub fn gram(&self, family: &[ModuleVector]) -> ModuleGram {
        let n = family.len();
        let mut entries = Vec::with_capacity(n);
        let mut excluded = Vec::new();
        let mut deviation = 0.0f64;
        for i in 0..n {
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                let out = self.inner(&family[i], &family[j]);
                let delta = if i == j { 1.0 } else { 0.0 };
                deviation = deviation.max(out.sup_distance_off_excluded(|_| Complex64::new(delta, 0.0)));
                excluded.extend_from_slice(&out.excluded);
                row.push(out.values);
            }
            entries.push(row);
        }
        excluded.sort_unstable();
        excluded.dedup();
        ModuleGram { entries, deviation, excluded }
    }

    /// Expansion `f = Σ m_i·β(⟨m_i, f⟩)` against an orthonormal module basis.
    pub fn expand(&self, basis: &[ModuleVector], f: &ModuleVector) -> Result<ModuleExpansion> {
        let gram = self.gram(basis);
        if gram.deviation.is_nan() || gram.deviation >= GRAM_TOL {
            return Err(Error::GramCheck { deviation: gram.deviation });
        }
        let mut coefficients = Vec::with_capacity(basis.len());
        let mut excluded = gram.excluded.clone();
        let mut recon = vec![Complex64::new(0.0, 0.0); self.grid.size()];
        for m in basis {
            let integrand = m.conj().mul(f);
            let coeff = self.apply(&integrand);
            let pulled = self.expectation(&integrand);
            excluded.extend_from_slice(&coeff.excluded);
            excluded.extend_from_slice(&pulled.excluded);
            for (k, r) in recon.iter_mut().enumerate() {
                *r += m.eval_angle(self.grid.node(k)) * pulled.values.values()[k];
            }
            coefficients.push(coeff.values);
        }
        for m in basis.iter().chain(std::iter::once(f)) {
            excluded.extend((0..self.grid.size()).filter(|&k| m.near_exception(self.grid.node(k), EXCEPTION_RADIUS)));
        }
        excluded.sort_unstable();
        excluded.dedup();
        let reconstruction = BoundaryFunction::from_values(self.grid, recon)?;
        let target = f.sample(self.grid)?;
        let out = TransferOutput { values: reconstruction.clone(), excluded: excluded.clone() };
        let residual = out.sup_distance_off_excluded(|k| target.values()[k]);
        Ok(ModuleExpansion { coefficients, reconstruction, residual, excluded })
    }
}

/// Module Gram matrix of a family of vectors.
#[derive(Debug, Clone)]
pub struct ModuleGram {
    pub entries: Vec<Vec<BoundaryFunction>>,
    pub deviation: f64,
    pub excluded: Vec<usize>,
}

/// Result of [`module_expand`].
#[derive(Debug, Clone)]
pub struct ModuleExpansion {
    /// `⟨m_i, f⟩` on the grid.
    pub coefficients: Vec<BoundaryFunction>,
    /// `Σ m_i·β(⟨m_i, f⟩)` on the grid.
    pub reconstruction: BoundaryFunction,
    /// Sup distance between reconstruction and `f` off excluded nodes.
    pub residual: f64,
    pub excluded: Vec<usize>,
}

/// `ℒ(ξ)(e^{iφ})` at a single point.
pub fn transfer_at(bs: &BranchSystem, xi: &ModuleVector, phi: f64) -> Complex64 {
    let pre = bs.preimage_angles(phi);
    pre.iter().map(|&t| xi.eval_angle(t)).sum::<Complex64>() / pre.len() as f64
}

/// `β(φ) = φ∘b` as a module vector.
pub fn compose_with_b(bs: &BranchSystem, phi: &ModuleVector) -> ModuleVector {
    let b = bs.owner().clone();
    let inner = phi.clone();
    let exceptions = phi.exceptions().iter().flat_map(|&e| bs.preimage_angles(e)).collect();
    ModuleVector::from_fn(format!("{}∘b", phi.label()), move |t| inner.eval_angle(b.eval_angle(t).arg())).with_exceptions(exceptions)
}

/// `ℒ(ξ)` on a grid.
pub fn transfer_apply(bs: &BranchSystem, xi: &ModuleVector, grid: CircleGrid) -> TransferOutput {
    let (values, excluded) = PreimageTable::new(bs, &grid.nodes()).average(xi);
    TransferOutput { values: BoundaryFunction::from_values(grid, values).expect("finite input"), excluded }
}

/// `𝔼(f) = ℒ(f)∘b` on a grid.
pub fn conditional_expectation(bs: &BranchSystem, f: &ModuleVector, grid: CircleGrid) -> TransferOutput {
    let images: Vec<f64> = grid.nodes().iter().map(|&t| bs.owner().eval_angle(t).arg()).collect();
    let (values, excluded) = PreimageTable::new(bs, &images).average(f);
    TransferOutput { values: BoundaryFunction::from_values(grid, values).expect("finite input"), excluded }
}

/// `⟨ξ, η⟩ = ℒ(ξ̄η)` on a grid; conjugate-linear in `ξ`.
pub fn module_inner(bs: &BranchSystem, xi: &ModuleVector, eta: &ModuleVector, grid: CircleGrid) -> TransferOutput {
    transfer_apply(bs, &xi.conj().mul(eta), grid)
}

/// The arcs basis `√N·1_{A_i}`, exceptional at the arc endpoints.
pub fn arcs_basis(bs: &BranchSystem) -> Vec<ModuleVector> {
    let n = bs.degree();
    let root = (n as f64).sqrt();
    (0..n)
        .map(|i| {
            let branches = bs.clone();
            ModuleVector::from_fn(format!("arc_{}", i + 1), move |t| {
                if branches.arc_index(t) == i {
                    Complex64::new(root, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .with_exceptions(bs.endpoints()[..n].to_vec())
        })
        .collect()
}

/// Module expansion of `f` against `basis`, after a Gram check.
pub fn module_expand(bs: &BranchSystem, basis: &[ModuleVector], f: &ModuleVector, grid: CircleGrid) -> Result<ModuleExpansion> {
    TransferOperator::new(bs, grid).expand(basis, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blaschke::BlaschkeProduct;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn branches(zeros: &[Complex64]) -> BranchSystem {
        BlaschkeProduct::new(zeros.to_vec()).unwrap().branches(4096).unwrap()
    }

    fn e(n: i64, grid: CircleGrid) -> BoundaryFunction {
        FourierSeries::monomial(n).synthesize_grid(grid)
    }

    #[test]
    fn unital_and_square_examples() {
        let bs = branches(&[c(0.0, 0.0); 2]);
        let grid = CircleGrid::new(128).unwrap();
        let one = transfer_apply(&bs, &ModuleVector::constant(c(1.0, 0.0)), grid);
        assert!(one.values.values().iter().all(|v| (v - 1.0).norm() < 1e-15));
        for n in -5..=5i64 {
            let out = transfer_apply(&bs, &ModuleVector::exponential(n), grid);
            let want = if n % 2 == 0 { e(n / 2, grid) } else { BoundaryFunction::constant(grid, c(0.0, 0.0)) };
            assert!(out.values.sup_distance(&want).unwrap() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn left_inverse_of_composition() {
        let grid = CircleGrid::new(256).unwrap();
        for zeros in [vec![c(0.5, 0.0)], vec![c(0.3, -0.2), c(-0.4, 0.5), c(0.0, 0.1)]] {
            let bs = branches(&zeros);
            for n in -8..=8 {
                let composed = compose_with_b(&bs, &ModuleVector::exponential(n));
                let out = transfer_apply(&bs, &composed, grid);
                assert!(out.values.sup_distance(&e(n, grid)).unwrap() < 1e-10, "n = {n}");
            }
        }
    }

    #[test]
    fn composition_examples() {
        let bs = branches(&[c(0.0, 0.0); 2]);
        let e1b = compose_with_b(&bs, &ModuleVector::exponential(1));
        assert_abs_diff_eq!((e1b.eval_angle(0.4) - Complex64::from_polar(1.0, 0.8)).norm(), 0.0, epsilon = 1e-15);
        let bs = branches(&[c(0.5, 0.0)]);
        let e1b = compose_with_b(&bs, &ModuleVector::exponential(1));
        assert_abs_diff_eq!((e1b.eval_angle(1.3) - bs.owner().eval_angle(1.3)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn expectation_examples() {
        let grid = CircleGrid::new(128).unwrap();
        let bs = branches(&[c(0.0, 0.0); 2]);
        let out = conditional_expectation(&bs, &ModuleVector::exponential(1), grid);
        assert!(out.values.sup_norm() < 1e-13);
        let out = conditional_expectation(&bs, &ModuleVector::constant(c(2.0, -1.0)), grid);
        assert!(out.values.values().iter().all(|v| (v - c(2.0, -1.0)).norm() < 1e-14));

        let bs = branches(&[c(0.2, 0.3), c(-0.5, 0.0)]);
        let g = ModuleVector::from_series(FourierSeries::from_fn(3, |n| c(1.0 / (1 + n.abs()) as f64, 0.1 * n as f64)), "g");
        let f = compose_with_b(&bs, &g);
        let out = conditional_expectation(&bs, &f, grid);
        assert!(out.values.sup_distance(&f.sample(grid).unwrap()).unwrap() < 1e-10);
    }

    #[test]
    fn arcs_basis_is_orthonormal() {
        let bs = branches(&[c(0.0, 0.0); 2]);
        let arcs = arcs_basis(&bs);
        assert_eq!(arcs[0].eval_angle(1.0), c(2f64.sqrt(), 0.0));
        assert_eq!(arcs[0].eval_angle(4.0), c(0.0, 0.0));
        assert_eq!(arcs[1].eval_angle(4.0), c(2f64.sqrt(), 0.0));

        let bs = branches(&[c(0.3, 0.1), c(-0.2, -0.6), c(0.5, 0.0)]);
        let op = TransferOperator::new(&bs, CircleGrid::new(256).unwrap());
        let gram = op.gram(&arcs_basis(&bs));
        assert!(gram.deviation < 1e-12);
        let partition = arcs_basis(&bs).iter().map(|a| a.eval_angle(2.0).norm_sqr()).sum::<f64>() / 3.0;
        assert_abs_diff_eq!(partition, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn arcs_expansion_reconstructs() {
        let bs = branches(&[c(0.0, 0.0); 2]);
        let grid = CircleGrid::new(256).unwrap();
        let f = ModuleVector::from_series(FourierSeries::new(0, vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap(), "e0+e1");
        let out = module_expand(&bs, &arcs_basis(&bs), &f, grid).unwrap();
        assert!(out.residual < 1e-8);
        let not_onb = vec![ModuleVector::constant(c(1.0, 0.0)), ModuleVector::constant(c(1.0, 0.0))];
        assert!(matches!(module_expand(&bs, &not_onb, &f, grid), Err(Error::GramCheck { .. })));
    }

    #[test]
    fn node_at_branch_point_is_flagged_for_arcs() {
        let bs = branches(&[c(0.0, 0.0); 2]);
        let grid = CircleGrid::new(64).unwrap();
        let arcs = arcs_basis(&bs);
        let out = module_inner(&bs, &arcs[0], &arcs[0], grid);
        assert_eq!(out.excluded, vec![0]);
        // The half-open convention still yields the right value there.
        assert_abs_diff_eq!((out.values.values()[0] - 1.0).norm(), 0.0);
    }

    #[test]
    fn conjugation_of_series_vectors() {
        let s = FourierSeries::new(-1, vec![c(1.0, 2.0), c(0.5, 0.0), c(0.0, -3.0)]).unwrap();
        let v = ModuleVector::from_series(s, "s");
        for t in [0.1, 2.0] {
            assert_abs_diff_eq!((v.conj().eval_angle(t) - v.eval_angle(t).conj()).norm(), 0.0, epsilon = 1e-14);
        }
    }
}
