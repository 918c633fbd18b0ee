//! Truncated matrices of operators on `L²(𝕋)` and `H²(𝕋)` in the exponential basis.
//!
//! Entry `(m, n)` of an operator `T` is `(T e_n, e_m)`. Sampled operators keep a tall row
//! window `[−R, R]` around the column window `[−M, M]` and record, per column, the `L²`
//! mass of `T e_n` outside the stored rows. Identities are then checked only on columns
//! whose tail is below a threshold, which makes every comparison an honest statement
//! about the untruncated operator up to that threshold.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blaschke::BranchSystem;
use crate::boundary::{mode_index, sample_blaschke, BoundaryFunction, CircleGrid, FourierSeries, OuterFunction};
use crate::error::{Error, Result};
use crate::model_space::ModelBasis;
use crate::transfer::{ModuleVector, TransferOperator};

/// Ratio between the default row window and the column window of sampled operators.
pub const ROW_FACTOR: i64 = 8;

/// Default tail threshold for certified columns.
pub const EPS_TAIL: f64 = 1e-10;

/// Inclusive range of Fourier modes.
pub type Modes = (i64, i64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    L2,
    H2,
}

/// A finite block of an operator with its mode labels and truncation certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOperator {
    space: Space,
    row_modes: Modes,
    col_modes: Modes,
    matrix: DMatrix<Complex64>,
    column_tail: Option<Vec<f64>>,
    norm_bound: f64,
}

#[derive(Serialize, Deserialize)]
struct OperatorRecord {
    space: Space,
    row_modes: Modes,
    col_modes: Modes,
    data: Vec<Complex64>,
    column_tail: Option<Vec<f64>>,
    norm_bound: f64,
}

/// Columns that pass the tail test inside `|n| ≤ M_inner`, and those that do not.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certification {
    pub interior: Vec<i64>,
    pub excluded: Vec<i64>,
    pub eps_tail: f64,
}

fn width(m: Modes) -> usize {
    (m.1 - m.0 + 1).max(0) as usize
}

fn contains(m: Modes, n: i64) -> bool {
    m.0 <= n && n <= m.1
}

impl TruncatedOperator {
    /// Assembles an operator, checking dimensions, the `H2` mode range and tail signs.
    pub fn new(
        space: Space,
        row_modes: Modes,
        col_modes: Modes,
        matrix: DMatrix<Complex64>,
        column_tail: Option<Vec<f64>>,
        norm_bound: f64,
    ) -> Result<Self> {
        if row_modes.1 < row_modes.0 || col_modes.1 < col_modes.0 {
            return Err(Error::Shape(format!("empty mode range {row_modes:?} × {col_modes:?}")));
        }
        if matrix.nrows() != width(row_modes) || matrix.ncols() != width(col_modes) {
            return Err(Error::Shape(format!("{}×{} matrix for modes {row_modes:?} × {col_modes:?}", matrix.nrows(), matrix.ncols())));
        }
        if space == Space::H2 && (row_modes.0 < 0 || col_modes.0 < 0) {
            return Err(Error::Shape("H2 operators only carry modes ≥ 0".into()));
        }
        if let Some(tail) = &column_tail {
            if tail.len() != matrix.ncols() || tail.iter().any(|t| t.is_nan() || *t < 0.0) {
                return Err(Error::Shape("column tails must be one nonnegative value per column".into()));
            }
        }
        if matrix.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("operator entry".into()));
        }
        Ok(Self { space, row_modes, col_modes, matrix, column_tail, norm_bound })
    }

    /// The identity on the modes `modes`.
    pub fn identity(space: Space, modes: Modes) -> Result<Self> {
        let n = width(modes);
        Self::new(space, modes, modes, DMatrix::identity(n, n), Some(vec![0.0; n]), 1.0)
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn row_modes(&self) -> Modes {
        self.row_modes
    }

    pub fn col_modes(&self) -> Modes {
        self.col_modes
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn column_tail(&self) -> Option<&[f64]> {
        self.column_tail.as_deref()
    }

    /// An upper bound for the norm of the untruncated operator.
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    /// Entry `(T e_n, e_m)`, or `None` outside the stored block.
    pub fn entry(&self, m: i64, n: i64) -> Option<Complex64> {
        if !contains(self.row_modes, m) || !contains(self.col_modes, n) {
            return None;
        }
        Some(self.matrix[((m - self.row_modes.0) as usize, (n - self.col_modes.0) as usize)])
    }

    /// Tail of column `n`; zero when the operator carries no certificate.
    pub fn tail(&self, n: i64) -> f64 {
        match &self.column_tail {
            Some(t) if contains(self.col_modes, n) => t[(n - self.col_modes.0) as usize],
            _ => 0.0,
        }
    }

    /// Columns `|n| ≤ m_inner` whose tail is below `eps_tail`.
    pub fn certify(&self, m_inner: i64, eps_tail: f64) -> Certification {
        let lo = self.col_modes.0.max(-m_inner);
        let hi = self.col_modes.1.min(m_inner);
        let (interior, excluded) = (lo..=hi).partition(|&n| self.tail(n) < eps_tail);
        Certification { interior, excluded, eps_tail }
    }

    /// `max |T(m, n) − expected(m, n)|` over the listed modes.
    pub fn max_deviation(&self, rows: &[i64], cols: &[i64], expected: impl Fn(i64, i64) -> Complex64) -> Result<f64> {
        let mut worst = 0.0f64;
        for &n in cols {
            for &m in rows {
                let v = self.entry(m, n).ok_or_else(|| Error::Shape(format!("entry ({m}, {n}) is not stored")))?;
                worst = worst.max((v - expected(m, n)).norm());
            }
        }
        Ok(worst)
    }

    /// `max |A(m, n) − B(m, n)|` over the listed modes.
    pub fn max_difference(&self, other: &Self, rows: &[i64], cols: &[i64]) -> Result<f64> {
        let mut worst = 0.0f64;
        for &n in cols {
            for &m in rows {
                let a = self.entry(m, n).ok_or_else(|| Error::Shape(format!("entry ({m}, {n}) is not stored")))?;
                let b = other.entry(m, n).ok_or_else(|| Error::Shape(format!("entry ({m}, {n}) is not stored")))?;
                worst = worst.max((a - b).norm());
            }
        }
        Ok(worst)
    }

    /// The sub-block on the given mode ranges.
    pub fn block(&self, rows: Modes, cols: Modes) -> Result<Self> {
        if rows.0 < self.row_modes.0 || rows.1 > self.row_modes.1 || cols.0 < self.col_modes.0 || cols.1 > self.col_modes.1 {
            return Err(Error::Shape(format!("block {rows:?} × {cols:?} outside {:?} × {:?}", self.row_modes, self.col_modes)));
        }
        let r0 = (rows.0 - self.row_modes.0) as usize;
        let c0 = (cols.0 - self.col_modes.0) as usize;
        let matrix = self.matrix.view((r0, c0), (width(rows), width(cols))).into_owned();
        // Rows dropped from the block join the tail of each column.
        let column_tail = self.column_tail.as_ref().map(|tail| {
            (0..width(cols))
                .map(|j| {
                    let dropped: f64 = (0..self.matrix.nrows())
                        .filter(|&i| i < r0 || i >= r0 + width(rows))
                        .map(|i| self.matrix[(i, c0 + j)].norm_sqr())
                        .sum();
                    (tail[c0 + j].powi(2) + dropped).sqrt()
                })
                .collect()
        });
        let space = if rows.0 >= 0 && cols.0 >= 0 { self.space } else { Space::L2 };
        Self::new(space, rows, cols, matrix, column_tail, self.norm_bound)
    }

    /// Conjugate transpose. The adjoint of a truncation carries no column certificate.
    pub fn adjoint(&self) -> Self {
        Self {
            space: self.space,
            row_modes: self.col_modes,
            col_modes: self.row_modes,
            matrix: self.matrix.adjoint(),
            column_tail: None,
            norm_bound: self.norm_bound,
        }
    }

    /// The product `self · other`; requires `self.col_modes == other.row_modes`.
    ///
    /// Tails propagate as `t_AB(n) = Σ_k |B(k, n)|·t_A(k) + ‖A‖·t_B(n)`, with `‖A‖`
    /// replaced by the recorded norm bound.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.col_modes != other.row_modes {
            return Err(Error::Shape(format!("cannot compose columns {:?} with rows {:?}", self.col_modes, other.row_modes)));
        }
        let matrix = &self.matrix * &other.matrix;
        let column_tail = match (&self.column_tail, &other.column_tail) {
            (Some(ta), Some(tb)) => Some(
                (0..other.matrix.ncols())
                    .map(|j| {
                        let spill: f64 = (0..other.matrix.nrows()).map(|k| other.matrix[(k, j)].norm() * ta[k]).sum();
                        spill + self.norm_bound * tb[j]
                    })
                    .collect(),
            ),
            _ => None,
        };
        let space = if self.space == Space::H2 && other.space == Space::H2 { Space::H2 } else { Space::L2 };
        Self::new(space, self.row_modes, other.col_modes, matrix, column_tail, self.norm_bound * other.norm_bound)
    }

    /// Entrywise difference on identical mode ranges.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.row_modes != other.row_modes || self.col_modes != other.col_modes {
            return Err(Error::Shape("difference of operators on different modes".into()));
        }
        let column_tail = match (&self.column_tail, &other.column_tail) {
            (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| x + y).collect()),
            _ => None,
        };
        Self::new(self.space, self.row_modes, self.col_modes, &self.matrix - &other.matrix, column_tail, self.norm_bound + other.norm_bound)
    }

    /// Largest singular value of the stored block.
    pub fn operator_norm(&self) -> f64 {
        self.matrix.singular_values().iter().copied().fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        let record = OperatorRecord {
            space: self.space,
            row_modes: self.row_modes,
            col_modes: self.col_modes,
            data: self.matrix.transpose().iter().copied().collect(),
            column_tail: self.column_tail.clone(),
            norm_bound: self.norm_bound,
        };
        serde_json::to_string(&record).expect("entries are finite")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: OperatorRecord = serde_json::from_str(text)?;
        let (rows, cols) = (width(r.row_modes), width(r.col_modes));
        if r.data.len() != rows * cols {
            return Err(Error::Shape(format!("{} entries for a {rows}×{cols} block", r.data.len())));
        }
        let matrix = DMatrix::from_row_slice(rows, cols, &r.data);
        Self::new(r.space, r.row_modes, r.col_modes, matrix, r.column_tail, r.norm_bound)
    }

    /// CSV with header `row,col,re,im`, one line per entry in row-major order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,re,im\n");
        for i in 0..self.matrix.nrows() {
            for j in 0..self.matrix.ncols() {
                let v = self.matrix[(i, j)];
                out.push_str(&format!("{},{},{},{}\n", self.row_modes.0 + i as i64, self.col_modes.0 + j as i64, v.re, v.im));
            }
        }
        out
    }
}

/// Default row half-width `min(8M, K/2 − 1)` for sampled operators.
pub fn default_rows(modes: usize, grid: CircleGrid) -> i64 {
    (ROW_FACTOR * modes as i64).min(grid.size() as i64 / 2 - 1)
}

/// Operator whose column `n` is the grid function `column(n)`, rows read off its DFT.
pub fn sampled_operator<F>(
    space: Space,
    rows: Modes,
    cols: Modes,
    grid: CircleGrid,
    norm_bound: f64,
    column: F,
) -> Result<TruncatedOperator>
where
    F: Fn(i64) -> Result<BoundaryFunction> + Sync,
{
    let k = grid.size() as i64;
    if rows.0 <= -k / 2 || rows.1 >= k / 2 {
        return Err(Error::WindowTooLarge { window: rows.0.unsigned_abs().max(rows.1.unsigned_abs()) as usize, grid: grid.size() });
    }
    let columns: Vec<(Vec<Complex64>, f64)> = (cols.0..=cols.1)
        .into_par_iter()
        .map(|n| {
            let f = column(n)?;
            let dft = f.dft();
            let entries: Vec<Complex64> = (rows.0..=rows.1).map(|m| dft[mode_index(m, dft.len())]).collect();
            let outside: f64 = (-k / 2..k / 2).filter(|&m| !contains(rows, m)).map(|m| dft[mode_index(m, dft.len())].norm_sqr()).sum();
            Ok((entries, outside.sqrt()))
        })
        .collect::<Result<_>>()?;
    let matrix = DMatrix::from_fn(width(rows), width(cols), |i, j| columns[j].0[i]);
    let tail = columns.iter().map(|c| c.1).collect();
    TruncatedOperator::new(space, rows, cols, matrix, Some(tail), norm_bound)
}

/// `π(φ)` restricted to rows `rows` and columns `cols`: entries `φ̂(m − n)`.
///
/// Coefficients of `φ` outside its stored window are taken as zero.
pub fn mult_operator_window(phi: &FourierSeries, rows: Modes, cols: Modes, space: Space) -> Result<TruncatedOperator> {
    let matrix = DMatrix::from_fn(width(rows), width(cols), |i, j| phi.coeff(rows.0 + i as i64 - cols.0 - j as i64));
    let tail = (cols.0..=cols.1)
        .map(|n| (phi.min_n()..=phi.max_n()).filter(|&d| !contains(rows, n + d)).map(|d| phi.coeff(d).norm_sqr()).sum::<f64>().sqrt())
        .collect();
    TruncatedOperator::new(space, rows, cols, matrix, Some(tail), phi.l1_norm())
}

/// `π(φ)` on modes `[−M, M]`.
pub fn mult_operator(phi: &FourierSeries, modes: usize) -> Result<TruncatedOperator> {
    if phi.window() > 2 * modes {
        return Err(Error::WindowTooLarge { window: phi.window(), grid: 2 * modes + 1 });
    }
    let m = modes as i64;
    mult_operator_window(phi, (-m, m), (-m, m), Space::L2)
}

/// The Toeplitz operator `τ(φ) = Pπ(φ)P` on modes `[0, M]`.
pub fn toeplitz_operator(phi: &FourierSeries, modes: usize) -> Result<TruncatedOperator> {
    if phi.window() > 2 * modes {
        return Err(Error::WindowTooLarge { window: phi.window(), grid: 2 * modes + 1 });
    }
    let m = modes as i64;
    mult_operator_window(phi, (0, m), (0, m), Space::H2)
}

/// `bⁿ` on the circle, using `b̄^{|n|}` for negative `n`.
fn blaschke_power(b: &BoundaryFunction, n: i64) -> BoundaryFunction {
    b.map(|v| if n >= 0 { v.powi(n as i32) } else { v.conj().powi((-n) as i32) })
}

/// `Γ_b` with explicit row and column windows.
pub fn gamma_b_window(bs: &BranchSystem, rows: Modes, cols: Modes, grid: CircleGrid) -> Result<TruncatedOperator> {
    let b = sample_blaschke(bs.owner(), grid)?;
    let bound = (1.0 / bs.owner().j0_bounds().0).sqrt();
    sampled_operator(Space::L2, rows, cols, grid, bound, |n| Ok(blaschke_power(&b, n)))
}

/// `Γ_b: e_n ↦ bⁿ` on columns `[−M, M]`, rows `[−R, R]` with `R = min(8M, K/2 − 1)`.
pub fn gamma_b_matrix(bs: &BranchSystem, modes: usize, grid: CircleGrid) -> Result<TruncatedOperator> {
    let (r, m) = (default_rows(modes, grid), modes as i64);
    gamma_b_window(bs, (-r, r), (-m, m), grid)
}

/// `C_b = π(J^{1/2})Γ_b` with explicit windows; `j_half` is the outer function of power `1/2`.
pub fn master_isometry_window(bs: &BranchSystem, j_half: &OuterFunction, rows: Modes, cols: Modes) -> Result<TruncatedOperator> {
    let grid = j_half.boundary().grid();
    let b = sample_blaschke(bs.owner(), grid)?;
    let root = j_half.boundary();
    sampled_operator(Space::L2, rows, cols, grid, 1.0, |n| blaschke_power(&b, n).mul(root))
}

/// The master isometry `C_b` on columns `[−M, M]`, rows `[−R, R]`.
pub fn master_isometry_matrix(bs: &BranchSystem, modes: usize, grid: CircleGrid) -> Result<TruncatedOperator> {
    let j_half = crate::boundary::outer_symbol(bs.owner(), grid, 0.5)?;
    let (r, m) = (default_rows(modes, grid), modes as i64);
    master_isometry_window(bs, &j_half, (-r, r), (-m, m))
}

/// `S_i: e_n ↦ v_i bⁿ` with explicit windows, one operator per basis element.
pub fn cuntz_family_window(basis: &ModelBasis, rows: Modes, cols: Modes, grid: CircleGrid) -> Result<Vec<TruncatedOperator>> {
    let b = sample_blaschke(basis.owner(), grid)?;
    basis.samples(grid)?.iter().map(|v| sampled_operator(Space::L2, rows, cols, grid, 1.0, |n| blaschke_power(&b, n).mul(v))).collect()
}

/// The Cuntz family `S_i e_n = v_i bⁿ` on columns `[−M, M]`, rows `[−R, R]`.
pub fn cuntz_family_matrices(basis: &ModelBasis, modes: usize, grid: CircleGrid) -> Result<Vec<TruncatedOperator>> {
    let (r, m) = (default_rows(modes, grid), modes as i64);
    cuntz_family_window(basis, (-r, r), (-m, m), grid)
}

/// The same family built as `π(v_i J^{−1/2})·C_b`, for cross-checking the direct columns.
pub fn cuntz_family_via_master(bs: &BranchSystem, basis: &ModelBasis, modes: usize, grid: CircleGrid) -> Result<Vec<TruncatedOperator>> {
    let (r, m) = (default_rows(modes, grid), modes as i64);
    let j_half = crate::boundary::outer_symbol(bs.owner(), grid, 0.5)?;
    let j_inv_half = crate::boundary::outer_symbol(bs.owner(), grid, -0.5)?;
    let cb = master_isometry_window(bs, &j_half, (-r, r), (-m, m))?;
    basis
        .module_family(&j_inv_half)
        .iter()
        .map(|mi| {
            let series = mi.sample(grid)?.fourier_coeffs(grid.max_window())?;
            mult_operator_window(&series, (-r, r), (-r, r), Space::L2)?.compose(&cb)
        })
        .collect()
}

/// Compression to `H²`: rows and columns restricted to modes `≥ 0`.
pub fn restrict_to_h2(op: &TruncatedOperator) -> Result<TruncatedOperator> {
    let rows = (op.row_modes.0.max(0), op.row_modes.1);
    let cols = (op.col_modes.0.max(0), op.col_modes.1);
    let mut r = op.block(rows, cols)?;
    r.space = Space::H2;
    Ok(r)
}

/// `ℒ: e_n ↦ ℒ(e_n)` with explicit windows, using a prepared transfer operator.
pub fn transfer_window(op: &TransferOperator, rows: Modes, cols: Modes) -> Result<TruncatedOperator> {
    let owner = op.branches().owner();
    let bound = owner.j0_bounds().1.sqrt();
    sampled_operator(Space::L2, rows, cols, op.grid(), bound, |n| Ok(op.apply(&ModuleVector::exponential(n)).values))
}

/// The transfer operator on columns `[−M, M]`, rows `[−R, R]`.
pub fn transfer_matrix(bs: &BranchSystem, modes: usize, grid: CircleGrid) -> Result<TruncatedOperator> {
    let (r, m) = (default_rows(modes, grid), modes as i64);
    transfer_window(&TransferOperator::new(bs, grid), (-r, r), (-m, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blaschke::BlaschkeProduct;
    use crate::model_space::canonical_basis;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn z_squared() -> BranchSystem {
        BlaschkeProduct::new(vec![c(0.0, 0.0); 2]).unwrap().branches(256).unwrap()
    }

    fn modes(m: i64) -> Vec<i64> {
        (-m..=m).collect()
    }

    #[test]
    fn multiplication_examples() {
        let id = mult_operator(&FourierSeries::monomial(0), 4).unwrap();
        assert_eq!(id.matrix(), &DMatrix::identity(9, 9));
        let shift = mult_operator(&FourierSeries::monomial(1), 4).unwrap();
        assert_eq!(shift.entry(1, 0), Some(c(1.0, 0.0)));
        assert_eq!(shift.entry(0, 0), Some(c(0.0, 0.0)));
        assert_abs_diff_eq!(shift.tail(4), 1.0);
        assert_abs_diff_eq!(shift.operator_norm(), 1.0, epsilon = 1e-12);

        let b = BlaschkeProduct::new(vec![c(0.5, 0.0)]).unwrap();
        let series = sample_blaschke(&b, CircleGrid::new(256).unwrap()).unwrap().fourier_coeffs(8).unwrap();
        assert_abs_diff_eq!((mult_operator(&series, 8).unwrap().entry(0, 0).unwrap() - 0.5).norm(), 0.0, epsilon = 1e-14);
        assert!(mult_operator(&FourierSeries::monomial(9), 4).is_err());
    }

    #[test]
    fn toeplitz_shift_defect() {
        let s = toeplitz_operator(&FourierSeries::monomial(1), 6).unwrap();
        let back = toeplitz_operator(&FourierSeries::monomial(-1), 6).unwrap();
        assert_eq!(back.matrix(), &s.adjoint().matrix().clone());
        let sts = s.adjoint().compose(&s).unwrap();
        let sst = s.compose(&s.adjoint()).unwrap();
        let inner: Vec<i64> = (0..6).collect();
        assert!(sts.max_deviation(&inner, &inner, |m, n| c((m == n) as u8 as f64, 0.0)).unwrap() < 1e-15);
        assert_eq!(sst.entry(0, 0), Some(c(0.0, 0.0)));
        assert_eq!(sst.entry(1, 1), Some(c(1.0, 0.0)));
    }

    #[test]
    fn gamma_of_z_squared() {
        let bs = z_squared();
        let grid = CircleGrid::new(256).unwrap();
        let g = gamma_b_matrix(&bs, 8, grid).unwrap();
        assert_eq!(g.row_modes(), (-64, 64));
        assert!(g.max_deviation(&modes(64), &modes(8), |m, n| c((m == 2 * n) as u8 as f64, 0.0)).unwrap() < 1e-14);
        assert!(g.column_tail().unwrap().iter().all(|&t| t < 1e-14));
    }

    #[test]
    fn gamma_gram_entry_is_b_at_zero() {
        let b = BlaschkeProduct::new(vec![c(0.5, 0.0)]).unwrap();
        let bs = b.branches(256).unwrap();
        let g = gamma_b_matrix(&bs, 8, CircleGrid::new(1024).unwrap()).unwrap();
        let gram = g.adjoint().compose(&g).unwrap();
        assert_abs_diff_eq!((gram.entry(0, 1).unwrap() - 0.5).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((g.entry(0, 0).unwrap() - 1.0).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn z_squared_family_interleaves() {
        let b = BlaschkeProduct::new(vec![c(0.0, 0.0); 2]).unwrap();
        let grid = CircleGrid::new(256).unwrap();
        let family = cuntz_family_matrices(&canonical_basis(&b), 8, grid).unwrap();
        let rows = modes(64);
        assert!(family[0].max_deviation(&rows, &modes(8), |m, n| c((m == 2 * n) as u8 as f64, 0.0)).unwrap() < 1e-14);
        assert!(family[1].max_deviation(&rows, &modes(8), |m, n| c((m == 2 * n + 1) as u8 as f64, 0.0)).unwrap() < 1e-14);
        let r = restrict_to_h2(&family[1]).unwrap();
        assert_eq!(r.space(), Space::H2);
        assert_eq!(r.col_modes(), (0, 8));
    }

    #[test]
    fn two_constructions_agree() {
        let b = BlaschkeProduct::new(vec![c(0.3, 0.2), c(-0.4, 0.1)]).unwrap();
        let bs = b.branches(1024).unwrap();
        let grid = CircleGrid::new(2048).unwrap();
        let basis = canonical_basis(&b);
        let direct = cuntz_family_matrices(&basis, 16, grid).unwrap();
        let via = cuntz_family_via_master(&bs, &basis, 16, grid).unwrap();
        for (d, v) in direct.iter().zip(&via) {
            let cert = d.certify(8, EPS_TAIL);
            assert!(d.max_difference(v, &modes(64), &cert.interior).unwrap() < 1e-8);
        }
    }

    #[test]
    fn transfer_of_z_squared() {
        let t = transfer_matrix(&z_squared(), 8, CircleGrid::new(256).unwrap()).unwrap();
        assert!(t.max_deviation(&modes(64), &modes(8), |m, n| c((2 * m == n) as u8 as f64, 0.0)).unwrap() < 1e-13);
    }

    #[test]
    fn restriction_examples() {
        let id = TruncatedOperator::identity(Space::L2, (-4, 4)).unwrap();
        assert_eq!(restrict_to_h2(&id).unwrap().matrix(), &DMatrix::identity(5, 5));
        let shift = mult_operator(&FourierSeries::monomial(1), 5).unwrap();
        assert_eq!(restrict_to_h2(&shift).unwrap().matrix(), toeplitz_operator(&FourierSeries::monomial(1), 5).unwrap().matrix());
    }

    #[test]
    fn shape_errors() {
        let a = TruncatedOperator::identity(Space::L2, (-2, 2)).unwrap();
        let b = TruncatedOperator::identity(Space::L2, (-3, 3)).unwrap();
        assert!(matches!(a.compose(&b), Err(Error::Shape(_))));
        assert!(a.block((-3, 0), (0, 1)).is_err());
        assert!(TruncatedOperator::new(Space::H2, (-1, 1), (0, 0), DMatrix::zeros(3, 1), None, 1.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let b = BlaschkeProduct::new(vec![c(0.5, -0.1)]).unwrap();
        let g = gamma_b_matrix(&b.branches(128).unwrap(), 3, CircleGrid::new(64).unwrap()).unwrap();
        assert_eq!(TruncatedOperator::from_json(&g.to_json()).unwrap(), g);
        let adj = g.adjoint();
        assert_eq!(TruncatedOperator::from_json(&adj.to_json()).unwrap(), adj);
        assert!(g.to_csv().starts_with("row,col,re,im\n"));
    }

    #[test]
    fn compose_tail_bounds_the_true_spill() {
        // π(e_1) truncated to [−4, 4] loses e_5 from column 4; the product with itself
        // must report at least that loss in the columns that feed it.
        let s = mult_operator(&FourierSeries::monomial(1), 4).unwrap();
        let ss = s.compose(&s).unwrap();
        assert!(ss.tail(3) >= 1.0 - 1e-15);
        assert!(ss.tail(4) >= 1.0 - 1e-15);
        assert_eq!(ss.tail(0), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn adjoint_is_an_involution(entries in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 12)) {
            let m = DMatrix::from_iterator(4, 3, entries.iter().map(|&(a, b)| c(a, b)));
            let op = TruncatedOperator::new(Space::L2, (-2, 1), (0, 2), m, None, 10.0).unwrap();
            let twice = op.adjoint().adjoint();
            prop_assert_eq!(twice.matrix(), op.matrix());
            prop_assert!((op.adjoint().operator_norm() - op.operator_norm()).abs() < 1e-12);
        }

        #[test]
        fn multiplication_is_an_algebra_map(a in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 5),
                                            b in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 5)) {
            // π(φ)π(ψ) = π(φψ) on columns far from the window edge.
            let phi = FourierSeries::new(-2, a.iter().map(|&(x, y)| c(x, y)).collect()).unwrap();
            let psi = FourierSeries::new(-2, b.iter().map(|&(x, y)| c(x, y)).collect()).unwrap();
            let grid = CircleGrid::new(64).unwrap();
            let prod = phi.synthesize_grid(grid).mul(&psi.synthesize_grid(grid)).unwrap().fourier_coeffs(8).unwrap();
            let lhs = mult_operator(&phi, 12).unwrap().compose(&mult_operator(&psi, 12).unwrap()).unwrap();
            let rhs = mult_operator(&prod, 12).unwrap();
            prop_assert!(lhs.max_difference(&rhs, &modes(8), &modes(8)).unwrap() < 1e-13);
        }
    }
}
