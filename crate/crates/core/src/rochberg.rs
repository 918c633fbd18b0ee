//! The decomposition `f = Σ v_i·(f_i∘b)` with `f_i = ℒ(v̄_i f / J₀)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::blaschke::BranchSystem;
use crate::boundary::{BoundaryFunction, CircleGrid, FourierSeries};
use crate::error::{Error, Result};
use crate::model_space::{BasisKind, ModelBasis};
use crate::transfer::{ModuleVector, TransferOperator};

/// Negative-mode energy below which a coefficient counts as analytic.
pub const ANALYTIC_TOL: f64 = 1e-8;

/// Coefficients below this modulus are dropped from the outer part of each window.
const TRIM: f64 = 1e-17;

/// Analytic-membership report of a Fourier window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub is_h2_like: bool,
    pub neg_energy: f64,
    /// `Σ |c_n|`; a finite value over the window is the summability proxy for continuity.
    pub l1_norm: f64,
}

/// `neg_energy = Σ_{n<0} |c_n|²`, flagged analytic when below `tol`.
pub fn analytic_membership(s: &FourierSeries, tol: f64) -> Membership {
    let neg_energy = s.neg_energy();
    Membership { is_h2_like: neg_energy < tol, neg_energy, l1_norm: s.l1_norm() }
}

/// Result of [`decompose`]; serialises to the export bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub input: FourierSeries,
    pub basis_kind: BasisKind,
    pub coefficients: Vec<FourierSeries>,
    /// `max_k |Σ v_i(t_k) f_i(b(t_k)) − f(t_k)|`.
    pub residual: f64,
    pub membership: Vec<Membership>,
}

impl Decomposition {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("finite values")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn check_owner(bs: &BranchSystem, basis: &ModelBasis) -> Result<()> {
    if bs.owner() != basis.owner() {
        return Err(Error::Invalid("basis and branch system belong to different Blaschke products".into()));
    }
    Ok(())
}

/// Coefficient window used for the `f_i`: the input window or `K/4`, whichever is larger.
fn coefficient_window(input: usize, grid: CircleGrid) -> usize {
    input.max(grid.size() / 4).min(grid.max_window())
}

/// `f_i = ℒ(v̄_i·F/J₀)` on the grid for an arbitrary module vector `F`.
fn coefficients_of(op: &TransferOperator, basis: &ModelBasis, f: &ModuleVector, window: usize) -> Result<Vec<FourierSeries>> {
    let b = basis.owner().clone();
    basis
        .elements()
        .iter()
        .map(|v| {
            let b = b.clone();
            let integrand = v.conj().mul(f).mul_fn("1/J0", move |t| Complex64::new(1.0 / b.j0(t), 0.0));
            Ok(op.apply(&integrand).values.fourier_coeffs(window)?.trimmed(TRIM))
        })
        .collect()
}

/// Decomposes `f` against `basis` and reports reconstruction error and analyticity of each `f_i`.
pub fn decompose(bs: &BranchSystem, basis: &ModelBasis, f: &FourierSeries, grid: CircleGrid) -> Result<Decomposition> {
    check_owner(bs, basis)?;
    if 4 * f.window() + 1 > grid.size() {
        return Err(Error::WindowTooLarge { window: f.window(), grid: grid.size() });
    }
    let op = TransferOperator::new(bs, grid);
    let input = ModuleVector::from_series(f.clone(), "f");
    let coefficients = coefficients_of(&op, basis, &input, coefficient_window(f.window(), grid))?;
    let recon = reconstruct(bs, basis, &coefficients, grid)?;
    let residual = recon.sup_distance(&f.synthesize_grid(grid))?;
    let membership = coefficients.iter().map(|c| analytic_membership(c, ANALYTIC_TOL)).collect();
    Ok(Decomposition { input: f.clone(), basis_kind: basis.kind(), coefficients, residual, membership })
}

/// `Σ v_i(z)·f_i(b(z))` on the grid.
pub fn reconstruct(bs: &BranchSystem, basis: &ModelBasis, coefficients: &[FourierSeries], grid: CircleGrid) -> Result<BoundaryFunction> {
    check_owner(bs, basis)?;
    if coefficients.len() != basis.len() {
        return Err(Error::Shape(format!("{} coefficients for {} basis elements", coefficients.len(), basis.len())));
    }
    let owner = bs.owner();
    BoundaryFunction::sample(grid, |t| {
        let w = owner.eval_angle(t);
        basis.elements().iter().zip(coefficients).map(|(v, c)| v.eval_angle(t) * c.eval(w)).sum()
    })
}

/// Rebuilds `F = Σ v_i·((g_i + p_i)∘b)` and decomposes it again.
///
/// Returns `max_i sup_k |recovered_i(t_k) − (g_i + p_i)(t_k)|`; the recovery is exact for any
/// bounded coefficients, analytic or not.
pub fn uniqueness_check(
    bs: &BranchSystem,
    basis: &ModelBasis,
    base: &[FourierSeries],
    perturbation: &[FourierSeries],
    grid: CircleGrid,
) -> Result<f64> {
    check_owner(bs, basis)?;
    if base.len() != basis.len() || perturbation.len() != basis.len() {
        return Err(Error::Shape("one base and one perturbation coefficient per basis element".into()));
    }
    let target: Vec<FourierSeries> = base.iter().zip(perturbation).map(|(g, p)| g.add(p)).collect();
    let owner = bs.owner().clone();
    let elements = basis.elements().to_vec();
    let coeffs = target.clone();
    let rebuilt = ModuleVector::from_fn("F", move |t| {
        let w = owner.eval_angle(t);
        elements.iter().zip(&coeffs).map(|(v, c)| v.eval_angle(t) * c.eval(w)).sum()
    });
    let op = TransferOperator::new(bs, grid);
    let window = coefficient_window(target.iter().map(|c| c.window()).max().unwrap_or(0), grid);
    let recovered = coefficients_of(&op, basis, &rebuilt, window)?;
    let mut worst = 0.0f64;
    for (r, g) in recovered.iter().zip(&target) {
        worst = worst.max(r.synthesize_grid(grid).sup_distance(&g.synthesize_grid(grid))?);
    }
    Ok(worst)
}
