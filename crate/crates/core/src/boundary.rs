//! Functions on the circle: uniform grids, samples, Fourier windows and outer functions.
//!
//! Inner products follow the convention `(f, g) = ∫ f ḡ dm` with `m` the normalised
//! arc-length measure, discretised as the mean over grid nodes.

use std::cell::RefCell;
use std::f64::consts::TAU;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::blaschke::BlaschkeProduct;
use crate::error::{Error, Result};

/// Smallest admissible minimum of the input to [`outer_function`].
pub const POSITIVITY_FLOOR: f64 = 1e-12;

/// Default grid size.
pub const DEFAULT_GRID: usize = 4096;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place unnormalised DFT, `X_n = Σ_k x_k e^{∓2πikn/K}` (minus sign for the forward transform).
pub(crate) fn fft_in_place(values: &mut [Complex64], inverse: bool) {
    let plan = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(values.len())
        } else {
            p.plan_fft_forward(values.len())
        }
    });
    plan.process(values);
}

/// Index of mode `n` in a length-`k` DFT buffer.
#[inline]
pub(crate) fn mode_index(n: i64, k: usize) -> usize {
    n.rem_euclid(k as i64) as usize
}

/// Uniform grid `t_k = 2πk/K` on the circle, `K` a power of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircleGrid {
    size: usize,
}

impl CircleGrid {
    pub fn new(size: usize) -> Result<Self> {
        if size < 4 || !size.is_power_of_two() {
            return Err(Error::GridSize(size));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn step(&self) -> f64 {
        TAU / self.size as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        TAU * k as f64 / self.size as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.size).map(|k| self.node(k)).collect()
    }

    /// Largest symmetric window `M` with `2M + 1 ≤ K`.
    pub fn max_window(&self) -> usize {
        (self.size - 1) / 2
    }
}

/// Samples of a function on a [`CircleGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFunction {
    grid: CircleGrid,
    values: Vec<Complex64>,
}

impl BoundaryFunction {
    /// Samples `f(t_k)`; `f` receives the node angle.
    pub fn sample<F>(grid: CircleGrid, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Complex64 + Sync,
    {
        let values: Vec<Complex64> = (0..grid.size()).into_par_iter().map(|k| f(grid.node(k))).collect();
        Self::from_values(grid, values)
    }

    pub fn from_values(grid: CircleGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.size() {
            return Err(Error::Shape(format!("{} samples for a grid of {}", values.len(), grid.size())));
        }
        if let Some(k) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite(format!("sample at node {k}")));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: CircleGrid, c: Complex64) -> Self {
        Self { grid, values: vec![c; grid.size()] }
    }

    pub fn grid(&self) -> CircleGrid {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.values.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max_k |f(t_k) − g(t_k)|`.
    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch { left: self.grid.size(), right: other.grid.size() });
        }
        Ok(())
    }

    /// All `K` discrete Fourier coefficients, mode `n` stored at index `n mod K`.
    pub fn dft(&self) -> Vec<Complex64> {
        let mut buf = self.values.clone();
        fft_in_place(&mut buf, false);
        let scale = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    /// Coefficients `c_n = (1/K) Σ_k f(t_k) e^{−int_k}` for `|n| ≤ window`.
    pub fn fourier_coeffs(&self, window: usize) -> Result<FourierSeries> {
        if 2 * window + 1 > self.grid.size() {
            return Err(Error::WindowTooLarge { window, grid: self.grid.size() });
        }
        let all = self.dft();
        let m = window as i64;
        let coeffs = (-m..=m).map(|n| all[mode_index(n, all.len())]).collect();
        Ok(FourierSeries { min_n: -m, coeffs })
    }

    /// CSV with header `t,re,im`, one row per node.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,re,im\n");
        for (k, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", self.grid.node(k), v.re, v.im);
        }
        out
    }
}

/// `(f, g) = (1/K) Σ_k f(t_k) conj(g(t_k))`.
pub fn l2_inner(f: &BoundaryFunction, g: &BoundaryFunction) -> Result<Complex64> {
    f.same_grid(g)?;
    Ok(f.values.iter().zip(&g.values).map(|(a, b)| a * b.conj()).sum::<Complex64>() / f.values.len() as f64)
}

/// Samples `b(e^{it})` on the grid.
pub fn sample_blaschke(b: &BlaschkeProduct, grid: CircleGrid) -> Result<BoundaryFunction> {
    BoundaryFunction::sample(grid, |t| b.eval_angle(t))
}

/// Samples `J₀` on the grid as a real-valued boundary function.
pub fn sample_j0(b: &BlaschkeProduct, grid: CircleGrid) -> Result<BoundaryFunction> {
    BoundaryFunction::sample(grid, |t| Complex64::new(b.j0(t), 0.0))
}

/// A finite two-sided window `Σ_{n=min_n}^{max_n} c_n e^{int}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SeriesRecord")]
pub struct FourierSeries {
    min_n: i64,
    coeffs: Vec<Complex64>,
}

#[derive(Deserialize)]
struct SeriesRecord {
    min_n: i64,
    coeffs: Vec<Complex64>,
}

impl TryFrom<SeriesRecord> for FourierSeries {
    type Error = Error;

    fn try_from(r: SeriesRecord) -> Result<Self> {
        FourierSeries::new(r.min_n, r.coeffs)
    }
}

impl FourierSeries {
    pub fn new(min_n: i64, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Invalid("a Fourier series needs at least one coefficient".into()));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("Fourier coefficient".into()));
        }
        Ok(Self { min_n, coeffs })
    }

    /// Symmetric window `[−window, window]` from a closure `n ↦ c_n`.
    pub fn from_fn(window: usize, f: impl Fn(i64) -> Complex64) -> Self {
        let m = window as i64;
        Self { min_n: -m, coeffs: (-m..=m).map(f).collect() }
    }

    /// The exponential `e_n`.
    pub fn monomial(n: i64) -> Self {
        Self { min_n: n, coeffs: vec![Complex64::new(1.0, 0.0)] }
    }

    pub fn zero() -> Self {
        Self { min_n: 0, coeffs: vec![Complex64::new(0.0, 0.0)] }
    }

    pub fn min_n(&self) -> i64 {
        self.min_n
    }

    pub fn max_n(&self) -> i64 {
        self.min_n + self.coeffs.len() as i64 - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Smallest `M` with every stored mode in `[−M, M]`.
    pub fn window(&self) -> usize {
        self.min_n.unsigned_abs().max(self.max_n().unsigned_abs()) as usize
    }

    pub fn coeff(&self, n: i64) -> Complex64 {
        if n < self.min_n || n > self.max_n() {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[(n - self.min_n) as usize]
    }

    /// Same function stored on the symmetric window `[−window, window]`, dropping modes outside.
    pub fn to_window(&self, window: usize) -> Self {
        Self::from_fn(window, |n| self.coeff(n))
    }

    /// Smallest symmetric window outside which every coefficient is below `eps` in modulus.
    pub fn trimmed(&self, eps: f64) -> Self {
        let keep = (self.min_n..=self.max_n()).filter(|&n| self.coeff(n).norm() >= eps).map(|n| n.unsigned_abs()).max().unwrap_or(0);
        self.to_window(keep as usize)
    }

    pub fn add(&self, other: &Self) -> Self {
        let lo = self.min_n.min(other.min_n);
        let hi = self.max_n().max(other.max_n());
        Self { min_n: lo, coeffs: (lo..=hi).map(|n| self.coeff(n) + other.coeff(n)).collect() }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { min_n: self.min_n, coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    /// `Σ_{n<0} |c_n|²`.
    pub fn neg_energy(&self) -> f64 {
        (self.min_n..0).map(|n| self.coeff(n).norm_sqr()).sum()
    }

    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    /// `Σ c_n z^n` for `z ≠ 0`, evaluated by two Horner passes in `z` and `1/z`.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let hi = self.max_n();
        let mut pos = Complex64::new(0.0, 0.0);
        if hi >= 0 {
            for n in (self.min_n.max(0)..=hi).rev() {
                pos = pos * z + self.coeff(n);
            }
            if self.min_n > 0 {
                pos *= z.powi(self.min_n as i32);
            }
        }
        let mut neg = Complex64::new(0.0, 0.0);
        if self.min_n < 0 {
            // z^n = z^top · w^(top − n) with w = 1/z, so Horner runs upward from min_n.
            let w = z.inv();
            let top = hi.min(-1);
            for n in self.min_n..=top {
                neg = neg * w + self.coeff(n);
            }
            neg *= w.powi((-top) as i32);
        }
        pos + neg
    }

    pub fn eval_angle(&self, t: f64) -> Complex64 {
        self.eval(Complex64::from_polar(1.0, t))
    }

    /// Evaluates the analytic extension `Σ_{n≥0} c_n z^n` for `|z| ≤ 1`.
    ///
    /// Refuses when the negative-mode energy exceeds `tol`.
    pub fn eval_analytic(&self, z: Complex64, tol: f64) -> Result<Complex64> {
        let energy = self.neg_energy();
        if energy > tol {
            return Err(Error::NotAnalytic { energy, tol });
        }
        if z.norm() > 1.0 + 1e-12 {
            return Err(Error::Invalid(format!("analytic extension requested at |z| = {}", z.norm())));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for n in (0..=self.max_n().max(0)).rev() {
            acc = acc * z + self.coeff(n);
        }
        Ok(acc)
    }

    /// Samples the series on a grid. Modes outside `|n| < K/2` alias onto the grid.
    pub fn synthesize_grid(&self, grid: CircleGrid) -> BoundaryFunction {
        let k = grid.size();
        let mut buf = vec![Complex64::new(0.0, 0.0); k];
        for (i, c) in self.coeffs.iter().enumerate() {
            buf[mode_index(self.min_n + i as i64, k)] += c;
        }
        fft_in_place(&mut buf, true);
        BoundaryFunction { grid, values: buf }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("coefficients are finite")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// The outer function `O` with `|O| = h^p` on the circle and `O(0) > 0`.
///
/// `O = exp(G)` where `G = Σ_{n≥0} a_n z^n` is the analytic completion of `p·log h`:
/// `a_0 = c_0`, `a_n = 2c_n` for `0 < n < K/2` and `a_{K/2} = c_{K/2}`, so that
/// `Re G = p·log h` holds exactly on the grid.
#[derive(Debug, Clone)]
pub struct OuterFunction {
    power: f64,
    log_series: Vec<Complex64>,
    boundary: BoundaryFunction,
    tail_bound: f64,
    symmetry_defect: f64,
}

impl OuterFunction {
    pub fn power(&self) -> f64 {
        self.power
    }

    /// Boundary samples on the grid of the input.
    pub fn boundary(&self) -> &BoundaryFunction {
        &self.boundary
    }

    /// Analytic coefficients `a_n` of `log O`, `n = 0..=K/2`, with trailing negligible terms removed.
    pub fn log_coefficients(&self) -> &[Complex64] {
        &self.log_series
    }

    /// Sum of `|a_n|` over the upper half of the retained band, a proxy for the truncation error of `log O`.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// `max_n |c_{−n} − conj(c_n)|` for the coefficients of `p·log h`; zero for real input.
    pub fn symmetry_defect(&self) -> f64 {
        self.symmetry_defect
    }

    /// `O(z)` for `|z| ≤ 1` from the truncated Taylor series of `log O`.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in self.log_series.iter().rev() {
            acc = acc * z + a;
        }
        acc.exp()
    }

    pub fn eval_angle(&self, t: f64) -> Complex64 {
        self.eval(Complex64::from_polar(1.0, t))
    }

    /// `O(0) = exp(p·∫ log h dm)`.
    pub fn value_at_zero(&self) -> f64 {
        self.log_series[0].re.exp()
    }

    /// Fourier window of the boundary values.
    pub fn series(&self, window: usize) -> Result<FourierSeries> {
        self.boundary.fourier_coeffs(window)
    }
}

/// Outer function with modulus `h^power` on the circle, positive at the origin.
///
/// `h` must be real with minimum above [`POSITIVITY_FLOOR`].
pub fn outer_function(h: &BoundaryFunction, power: f64) -> Result<OuterFunction> {
    let min = h.values.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
    if min.is_nan() || min <= POSITIVITY_FLOOR {
        return Err(Error::NonPositive { min });
    }
    let scale = h.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if h.values.iter().any(|v| v.im.abs() > 1e-12 * scale) {
        return Err(Error::Invalid("outer function input must be real-valued".into()));
    }
    let k = h.grid.size();
    let logs = h.map(|v| Complex64::new(power * v.re.ln(), 0.0));
    let c = logs.dft();
    let half = k / 2;
    let symmetry_defect = (1..half).map(|n| (c[k - n] - c[n].conj()).norm()).fold(0.0, f64::max);

    let mut analytic = vec![Complex64::new(0.0, 0.0); k];
    analytic[0] = c[0];
    for n in 1..half {
        analytic[n] = 2.0 * c[n];
    }
    analytic[half] = c[half];

    let mut g = analytic.clone();
    fft_in_place(&mut g, true);
    let boundary = BoundaryFunction { grid: h.grid, values: g.iter().map(|v| v.exp()).collect() };

    let tail_bound = analytic[half / 2..=half].iter().map(|a| a.norm()).sum();
    let mut log_series = analytic[..=half].to_vec();
    // Coefficients below this size are FFT roundoff; keeping them only slows evaluation.
    let negligible = 1e-16 * log_series.iter().map(|a| a.norm()).fold(1.0, f64::max);
    while log_series.len() > 1 && log_series.last().map(|a| a.norm() < negligible).unwrap_or(false) {
        log_series.pop();
    }
    Ok(OuterFunction { power, log_series, boundary, tail_bound, symmetry_defect })
}

/// `J^p` for the Blaschke product `b`, where `J` is the outer function with `|J| = J₀`.
pub fn outer_symbol(b: &BlaschkeProduct, grid: CircleGrid, power: f64) -> Result<OuterFunction> {
    outer_function(&sample_j0(b, grid)?, power)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn half() -> BlaschkeProduct {
        BlaschkeProduct::new(vec![c(0.5, 0.0)]).unwrap()
    }

    #[test]
    fn grid_sizes() {
        assert!(CircleGrid::new(4096).is_ok());
        assert!(matches!(CircleGrid::new(1000), Err(Error::GridSize(1000))));
        assert!(CircleGrid::new(2).is_err());
    }

    #[test]
    fn sampling_examples() {
        let g = CircleGrid::new(4).unwrap();
        let one = BoundaryFunction::sample(g, |_| c(1.0, 0.0)).unwrap();
        assert!(one.values().iter().all(|&v| v == c(1.0, 0.0)));
        let e1 = BoundaryFunction::sample(g, |t| Complex64::from_polar(1.0, t)).unwrap();
        for (v, want) in e1.values().iter().zip([c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)]) {
            assert_abs_diff_eq!((v - want).norm(), 0.0, epsilon = 1e-15);
        }
        let b = sample_blaschke(&half(), g).unwrap();
        assert_abs_diff_eq!((b.values()[0] - c(-1.0, 0.0)).norm(), 0.0, epsilon = 1e-15);
        assert!(BoundaryFunction::sample(g, |_| c(f64::NAN, 0.0)).is_err());
    }

    #[test]
    fn coefficient_examples() {
        let g = CircleGrid::new(512).unwrap();
        let e2 = BoundaryFunction::sample(g, |t| Complex64::from_polar(1.0, 2.0 * t)).unwrap();
        let s = e2.fourier_coeffs(8).unwrap();
        for n in -8..=8 {
            let want = if n == 2 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!((s.coeff(n) - want).norm(), 0.0, epsilon = 1e-14);
        }
        assert!(matches!(e2.fourier_coeffs(256), Err(Error::WindowTooLarge { .. })));

        // Mean-value property, checked at two resolutions.
        for k in [256, 1024] {
            let b = sample_blaschke(&half(), CircleGrid::new(k).unwrap()).unwrap();
            assert_abs_diff_eq!((b.fourier_coeffs(4).unwrap().coeff(0) - 0.5).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn synthesis_examples() {
        assert_eq!(FourierSeries::monomial(0).eval(c(0.3, 0.2)), c(1.0, 0.0));
        assert_abs_diff_eq!((FourierSeries::monomial(1).eval(c(0.0, 1.0)) - c(0.0, 1.0)).norm(), 0.0);
        let g = CircleGrid::new(64).unwrap();
        let e3 = BoundaryFunction::sample(g, |t| Complex64::from_polar(1.0, 3.0 * t)).unwrap();
        let back = e3.fourier_coeffs(31).unwrap().synthesize_grid(g);
        assert!(back.sup_distance(&e3).unwrap() < 1e-14);
    }

    #[test]
    fn laurent_evaluation_matches_direct_sum() {
        let s = FourierSeries::new(-3, (0..7).map(|k| c(k as f64 - 2.5, 0.3 * k as f64)).collect()).unwrap();
        for t in [0.0, 0.7, 2.9] {
            let direct: Complex64 = (-3..=3).map(|n| s.coeff(n) * Complex64::from_polar(1.0, n as f64 * t)).sum();
            assert_abs_diff_eq!((s.eval_angle(t) - direct).norm(), 0.0, epsilon = 1e-13);
        }
        let s = FourierSeries::new(2, vec![c(1.0, 0.0), c(0.0, 2.0)]).unwrap();
        let z = c(0.3, -0.5);
        assert_abs_diff_eq!((s.eval(z) - (z * z + c(0.0, 2.0) * z * z * z)).norm(), 0.0, epsilon = 1e-15);
        let s = FourierSeries::new(-4, vec![c(1.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]).unwrap();
        let z = Complex64::from_polar(1.0, 1.1);
        assert_abs_diff_eq!((s.eval(z) - (z.powi(-4) + 2.0 * z.powi(-2))).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn analytic_extension_is_guarded() {
        let s = FourierSeries::monomial(-1);
        assert!(matches!(s.eval_analytic(c(0.1, 0.0), 1e-10), Err(Error::NotAnalytic { .. })));
        let s = FourierSeries::monomial(2);
        assert_abs_diff_eq!((s.eval_analytic(c(0.5, 0.0), 1e-10).unwrap() - 0.25).norm(), 0.0);
    }

    #[test]
    fn inner_product_examples() {
        let g = CircleGrid::new(128).unwrap();
        let e0 = BoundaryFunction::constant(g, c(1.0, 0.0));
        let e1 = FourierSeries::monomial(1).synthesize_grid(g);
        assert_abs_diff_eq!((l2_inner(&e1, &e1).unwrap() - 1.0).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l2_inner(&e1, &e0).unwrap().norm(), 0.0, epsilon = 1e-15);
        let b = sample_blaschke(&half(), g).unwrap();
        assert_abs_diff_eq!((l2_inner(&b, &e0).unwrap() - 0.5).norm(), 0.0, epsilon = 1e-14);
        let other = BoundaryFunction::constant(CircleGrid::new(64).unwrap(), c(1.0, 0.0));
        assert!(matches!(l2_inner(&e0, &other), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn outer_of_constant() {
        let g = CircleGrid::new(64).unwrap();
        let o = outer_function(&BoundaryFunction::constant(g, c(4.0, 0.0)), 0.5).unwrap();
        assert!(o.boundary().values().iter().all(|v| (v - 2.0).norm() < 1e-14));
        assert_abs_diff_eq!(o.value_at_zero(), 2.0, epsilon = 1e-14);
        assert!(matches!(outer_function(&BoundaryFunction::constant(g, c(0.0, 0.0)), 1.0), Err(Error::NonPositive { .. })));
    }

    #[test]
    fn outer_symbol_of_half_zero() {
        let g = CircleGrid::new(4096).unwrap();
        let j = outer_symbol(&half(), g, 1.0).unwrap();
        let oracle = |z: Complex64| 0.75 / ((1.0 - 0.5 * z) * (1.0 - 0.5 * z));
        let err =
            (0..g.size()).map(|k| (j.boundary().values()[k] - oracle(Complex64::from_polar(1.0, g.node(k)))).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
        assert_abs_diff_eq!(j.value_at_zero(), 0.75, epsilon = 1e-12);
        for z in [c(0.3, 0.4), c(-0.9, 0.0), Complex64::from_polar(1.0, 0.123)] {
            assert_abs_diff_eq!((j.eval(z) - oracle(z)).norm(), 0.0, epsilon = 1e-10);
        }
        assert!(j.symmetry_defect() < 1e-14);
    }

    #[test]
    fn outer_powers_compose() {
        let b = BlaschkeProduct::new(vec![c(0.3, 0.5), c(-0.6, 0.1)]).unwrap();
        let g = CircleGrid::new(4096).unwrap();
        let h = sample_j0(&b, g).unwrap();
        let p = outer_function(&h, 0.5).unwrap();
        let q = outer_function(&h, -0.5).unwrap();
        let one = outer_function(&h, 1.0).unwrap();
        let prod = p.boundary().mul(q.boundary()).unwrap();
        assert!(prod.values().iter().all(|v| (v - 1.0).norm() < 1e-9));
        let pp = p.boundary().mul(p.boundary()).unwrap();
        assert!(pp.sup_distance(one.boundary()).unwrap() < 1e-9);
        for (o, v) in one.boundary().values().iter().zip(h.values()) {
            assert!((o.norm() - v.re).abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn parseval_for_band_limited(coeffs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 17)) {
            let s = FourierSeries::new(-8, coeffs.iter().map(|&(a, b)| c(a, b)).collect()).unwrap();
            let f = s.synthesize_grid(CircleGrid::new(64).unwrap());
            let lhs = l2_inner(&f, &f).unwrap().re;
            prop_assert!((lhs - s.energy()).abs() < 1e-12);
            let back = f.fourier_coeffs(8).unwrap();
            for n in -8..=8 {
                prop_assert!((back.coeff(n) - s.coeff(n)).norm() < 1e-14);
            }
        }

        #[test]
        fn log_coefficients_are_conjugate_symmetric(re in -0.8f64..0.8, im in -0.55f64..0.55) {
            let b = BlaschkeProduct::new(vec![c(re, im)]).unwrap();
            let j = outer_symbol(&b, CircleGrid::new(1024).unwrap(), 0.5).unwrap();
            prop_assert!(j.symmetry_defect() < 1e-13);
            prop_assert!(j.value_at_zero() > 0.0);
        }

        #[test]
        fn json_round_trip(coeffs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..9), lo in -5i64..5) {
            let s = FourierSeries::new(lo, coeffs.iter().map(|&(a, b)| c(a, b)).collect()).unwrap();
            prop_assert_eq!(FourierSeries::from_json(&s.to_json()).unwrap(), s);
        }
    }
}
