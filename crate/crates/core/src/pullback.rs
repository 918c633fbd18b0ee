//! Matrix entries of `S_i = π(m_i)C_b` computed by integrating over the target circle.
//!
//! For a module family `{m_i}` the entries of `S_i*S_j`, `Σ S_i S_i*` and
//! `Σ S_i π(φ) S_i*` are integrals of `ℒ`-images, so they can be evaluated through the
//! inverse branches without ever expanding `m_i` in Fourier modes. This keeps
//! discontinuous families such as the arcs basis free of Gibbs error: each branch is
//! smooth on the open arc `θ(0) < s < θ(0) + 2π`, and composite Gauss–Legendre panels
//! on that interval never evaluate the branch point.

use std::f64::consts::TAU;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::blaschke::BranchSystem;
use crate::boundary::{sample_blaschke, CircleGrid, FourierSeries, OuterFunction};
use crate::error::Result;
use crate::transfer::{ModuleVector, PreimageTable, TransferOperator};

/// Preimages of one quadrature node, the family values there and `1/J^{1/2}` there.
type NodeSamples = (Vec<f64>, Vec<Vec<Complex64>>, Vec<Complex64>);

/// Gauss–Legendre nodes per panel.
pub const PANEL_ORDER: usize = 16;

/// Composite quadrature over the target angle, with the preimages of every node.
#[derive(Debug, Clone)]
pub struct PullbackQuadrature {
    angles: Vec<f64>,
    weights: Vec<f64>,
    preimages: PreimageTable,
}

impl PullbackQuadrature {
    /// `panels` equal panels on `(θ(0), θ(0) + 2π)`; weights sum to one.
    pub fn new(bs: &BranchSystem, panels: usize) -> Self {
        let rule = GaussLegendre::new(NonZeroUsize::new(PANEL_ORDER).expect("nonzero"));
        let h = TAU / panels as f64;
        let mut angles = Vec::with_capacity(panels * PANEL_ORDER);
        let mut weights = Vec::with_capacity(panels * PANEL_ORDER);
        for p in 0..panels {
            let mid = bs.theta0() + (p as f64 + 0.5) * h;
            for &(x, w) in rule.as_node_weight_pairs() {
                angles.push(mid + 0.5 * h * x);
                weights.push(0.5 * h * w / TAU);
            }
        }
        let preimages = PreimageTable::new(bs, &angles);
        Self { angles, weights, preimages }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn angle(&self, q: usize) -> f64 {
        self.angles[q]
    }

    /// `ℒ(ξ)` at quadrature node `q`.
    pub fn transfer(&self, q: usize, xi: impl Fn(f64) -> Complex64) -> Complex64 {
        let pre = self.preimages.preimages(q);
        pre.iter().map(|&t| xi(t)).sum::<Complex64>() / pre.len() as f64
    }
}

/// Residuals of the Cuntz relations for `S_i = π(m_i)C_b` on modes `[−M, M]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyRelations {
    /// Module Gram deviation `sup |⟨m_i, m_j⟩ − δ_ij|` on the grid.
    pub gram_deviation: f64,
    /// `max |(S_i*S_j)(m, n) − δ_ij δ_mn|`.
    pub orthogonality: f64,
    /// `max |(Σ S_i S_i*)(m, n) − δ_mn|`.
    pub completeness: f64,
    /// `max |(Σ S_i π(e_1) S_i*)(m, n) − (b)^(m − n)|`.
    pub covariance: f64,
    /// `max |(S_i*S_j)(m, n) − π(⟨m_i, m_j⟩)(m, n)|` with the right side from grid samples.
    pub consistency: f64,
}

/// Default number of panels for a mode window `M`.
pub fn default_panels(modes: usize) -> usize {
    256 * modes.div_ceil(32).max(1)
}

/// Evaluates the Cuntz relations of `π(m_i)C_b` for a module family.
///
/// `j_half` is the outer function of power `1/2`; its grid is used for the module Gram
/// check and the grid-side consistency comparison.
pub fn family_relations(bs: &BranchSystem, family: &[ModuleVector], j_half: &OuterFunction, modes: usize) -> Result<FamilyRelations> {
    let grid = j_half.boundary().grid();
    let quad = PullbackQuadrature::new(bs, default_panels(modes));
    let m = modes as i64;
    let n_fam = family.len();
    let q_len = quad.len();

    // Family values and 1/J^{1/2} at every preimage, shared by the moments and the A_i below.
    let samples: Vec<NodeSamples> = (0..q_len)
        .map(|q| {
            let pre = quad.preimages.preimages(q).to_vec();
            let vals = pre.iter().map(|&t| family.iter().map(|f| f.eval_angle(t)).collect()).collect();
            let inv_j = pre.iter().map(|&t| j_half.eval_angle(t).inv()).collect();
            (pre, vals, inv_j)
        })
        .collect();

    // Moments μ_ij(d) = ∫ ℒ(m̄_i m_j)(e^{is}) e^{ids} ds/2π for |d| ≤ 2M.
    let mut transfer_ij = vec![vec![Complex64::new(0.0, 0.0); q_len]; n_fam * n_fam];
    for (q, (pre, vals, _)) in samples.iter().enumerate() {
        for i in 0..n_fam {
            for j in 0..n_fam {
                let s: Complex64 = vals.iter().map(|v: &Vec<Complex64>| v[i].conj() * v[j]).sum();
                transfer_ij[i * n_fam + j][q] = s / pre.len() as f64;
            }
        }
    }
    let moment = |ij: usize, d: i64| -> Complex64 {
        (0..q_len).map(|q| quad.weights[q] * transfer_ij[ij][q] * Complex64::from_polar(1.0, d as f64 * quad.angle(q))).sum()
    };

    let op = TransferOperator::new(bs, grid);
    let gram = op.gram(family);
    let mut orthogonality = 0.0f64;
    let mut consistency = 0.0f64;
    for i in 0..n_fam {
        for j in 0..n_fam {
            let on_grid = gram.entries[i][j].fourier_coeffs(grid.max_window().min(2 * modes))?;
            for d in -2 * m..=2 * m {
                let mu = moment(i * n_fam + j, d);
                let delta = if i == j && d == 0 { 1.0 } else { 0.0 };
                orthogonality = orthogonality.max((mu - delta).norm());
                consistency = consistency.max((mu - on_grid.coeff(-d)).norm());
            }
        }
    }

    // A_i[q, m] = √w_q · ℒ(m̄_i e_m / J^{1/2})(e^{is_q}), so Σ_i A_i* A_i = Σ_i S_i S_i*.
    let width = (2 * m + 1) as usize;
    let mut completeness_matrix = DMatrix::<Complex64>::zeros(width, width);
    let mut covariance_matrix = DMatrix::<Complex64>::zeros(width, width);
    for i in 0..n_fam {
        let mut a = DMatrix::<Complex64>::zeros(q_len, width);
        for (q, (pre, vals, inv_j)) in samples.iter().enumerate() {
            let scale = quad.weights[q].sqrt() / pre.len() as f64;
            for (k, &t) in pre.iter().enumerate() {
                let base = vals[k][i].conj() * inv_j[k] * scale;
                let step = Complex64::from_polar(1.0, t);
                let mut e = Complex64::from_polar(1.0, -(m as f64) * t);
                for col in 0..width {
                    a[(q, col)] += base * e;
                    e *= step;
                }
            }
        }
        let shifted = DMatrix::from_fn(q_len, width, |q, col| a[(q, col)] * Complex64::from_polar(1.0, quad.angle(q)));
        completeness_matrix += a.adjoint() * &a;
        covariance_matrix += a.adjoint() * shifted;
    }
    let b_series: FourierSeries = sample_blaschke(bs.owner(), grid)?.fourier_coeffs(grid.max_window().min(4 * modes))?;
    let mut completeness = 0.0f64;
    let mut covariance = 0.0f64;
    for r in 0..width {
        for c in 0..width {
            let delta = if r == c { 1.0 } else { 0.0 };
            completeness = completeness.max((completeness_matrix[(r, c)] - delta).norm());
            let want = b_series.coeff(r as i64 - c as i64);
            covariance = covariance.max((covariance_matrix[(r, c)] - want).norm());
        }
    }
    Ok(FamilyRelations { gram_deviation: gram.deviation, orthogonality, completeness, covariance, consistency })
}

/// Grid used by [`family_relations`] callers that only hold a Blaschke product.
pub fn outer_half(bs: &BranchSystem, grid: CircleGrid) -> Result<OuterFunction> {
    crate::boundary::outer_symbol(bs.owner(), grid, 0.5)
}
