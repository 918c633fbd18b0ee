//! Finite Blaschke products on the closed disc.
//!
//! A [`BlaschkeProduct`] is determined by its ordered zero list. On the circle
//! it is a degree-`N` covering map, and [`BranchSystem`] records the increasing
//! lift `θ` of its argument together with the `N` inverse branches `σ_j`.

use std::f64::consts::{PI, TAU};
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default distance from `b(1)` inside which [`BranchSystem::preimages`] refuses to label branches.
pub const BRANCH_EXCLUSION: f64 = 1e-8;

/// Default number of cells in the argument table.
pub const DEFAULT_TABLE_SIZE: usize = 4096;

const ROOT_TOL: f64 = 1e-13;
const CELL_NODES: usize = 16;

/// A finite Blaschke product `b = Π b_{α_j}`, zeros kept in the order given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BlaschkeSpec", into = "BlaschkeSpec")]
pub struct BlaschkeProduct {
    zeros: Vec<Complex64>,
}

/// Wire form `{"zeros": [[re, im], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlaschkeSpec {
    pub zeros: Vec<Complex64>,
}

impl TryFrom<BlaschkeSpec> for BlaschkeProduct {
    type Error = Error;

    fn try_from(spec: BlaschkeSpec) -> Result<Self> {
        BlaschkeProduct::new(spec.zeros)
    }
}

impl From<BlaschkeProduct> for BlaschkeSpec {
    fn from(b: BlaschkeProduct) -> Self {
        BlaschkeSpec { zeros: b.zeros }
    }
}

/// One Möbius factor `b_w(z) = (|w|/w)(w − z)/(1 − w̄z)`, or `z` when `w = 0`.
#[inline]
pub(crate) fn factor(w: Complex64, z: Complex64) -> Option<Complex64> {
    if w == Complex64::new(0.0, 0.0) {
        return Some(z);
    }
    let den = Complex64::new(1.0, 0.0) - w.conj() * z;
    if den.norm() < 1e-14 {
        return None;
    }
    let unimodular = w.conj() / w.norm();
    Some(unimodular * (w - z) / den)
}

#[inline]
fn factor_derivative(w: Complex64, z: Complex64) -> Option<Complex64> {
    if w == Complex64::new(0.0, 0.0) {
        return Some(Complex64::new(1.0, 0.0));
    }
    let den = Complex64::new(1.0, 0.0) - w.conj() * z;
    if den.norm() < 1e-14 {
        return None;
    }
    let unimodular = w.conj() / w.norm();
    Some(unimodular * (w.norm_sqr() - 1.0) / (den * den))
}

impl BlaschkeProduct {
    /// Builds the product from its zeros. Rejects an empty list and any zero off the open disc.
    pub fn new(zeros: Vec<Complex64>) -> Result<Self> {
        if zeros.is_empty() {
            return Err(Error::EmptyZeros);
        }
        for (index, a) in zeros.iter().enumerate() {
            let modulus = a.norm();
            if !modulus.is_finite() || modulus >= 1.0 {
                return Err(Error::ZeroOutsideDisc { index, modulus });
            }
        }
        Ok(Self { zeros })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("zeros are finite")
    }

    pub fn zeros(&self) -> &[Complex64] {
        &self.zeros
    }

    pub fn degree(&self) -> usize {
        self.zeros.len()
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let mut acc = Complex64::new(1.0, 0.0);
        for &a in &self.zeros {
            acc *= factor(a, z).ok_or(Error::Pole { re: z.re, im: z.im })?;
        }
        if !acc.re.is_finite() || !acc.im.is_finite() {
            return Err(Error::NonFinite(format!("b({z})")));
        }
        Ok(acc)
    }

    /// `b(e^{it})`; the circle never meets a pole.
    pub fn eval_angle(&self, t: f64) -> Complex64 {
        let z = Complex64::from_polar(1.0, t);
        self.zeros.iter().fold(Complex64::new(1.0, 0.0), |acc, &a| acc * factor(a, z).expect("poles lie outside the closed disc"))
    }

    /// Exact derivative by the product rule, `b' = Σ_j b_j' Π_{k≠j} b_k`.
    pub fn eval_derivative(&self, z: Complex64) -> Result<Complex64> {
        let pole = || Error::Pole { re: z.re, im: z.im };
        let values = self.zeros.iter().map(|&a| factor(a, z).ok_or_else(pole)).collect::<Result<Vec<_>>>()?;
        let mut total = Complex64::new(0.0, 0.0);
        for (j, &a) in self.zeros.iter().enumerate() {
            let mut term = factor_derivative(a, z).ok_or_else(pole)?;
            for (k, v) in values.iter().enumerate() {
                if k != j {
                    term *= v;
                }
            }
            total += term;
        }
        Ok(total)
    }

    /// `J₀(e^{it}) = (1/N) Σ_j (1 − |α_j|²)/|α_j − e^{it}|²`, strictly positive.
    pub fn j0(&self, t: f64) -> f64 {
        self.theta_rate(t) / self.degree() as f64
    }

    /// `θ'(t) = N·J₀(e^{it})`.
    pub fn theta_rate(&self, t: f64) -> f64 {
        let z = Complex64::from_polar(1.0, t);
        self.zeros.iter().map(|&a| if a == Complex64::new(0.0, 0.0) { 1.0 } else { (1.0 - a.norm_sqr()) / (a - z).norm_sqr() }).sum()
    }

    /// Lower and upper bounds of `J₀` over the circle, attained in the closed form.
    pub fn j0_bounds(&self) -> (f64, f64) {
        let n = self.degree() as f64;
        let lo: f64 = self.zeros.iter().map(|a| (1.0 - a.norm()) / (1.0 + a.norm())).sum();
        let hi: f64 = self.zeros.iter().map(|a| (1.0 + a.norm()) / (1.0 - a.norm())).sum();
        (lo / n, hi / n)
    }

    /// Largest zero modulus; controls how fast every derived symbol decays in Fourier space.
    pub fn max_zero_modulus(&self) -> f64 {
        self.zeros.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// Lifts the boundary argument and tabulates it on `table_size` uniform cells.
    pub fn branches(&self, table_size: usize) -> Result<BranchSystem> {
        BranchSystem::new(self.clone(), table_size)
    }
}

/// The increasing argument lift `θ: [0, 2π] → [θ(0), θ(0) + 2πN]` and the inverse branches.
///
/// `θ` is tabulated by composite Gauss–Legendre quadrature of `θ' = N·J₀`, and evaluated
/// between table nodes by one more quadrature on the partial cell. Branch `j` maps the
/// circle minus `b(1)` onto the arc `A_j = {e^{it} : t_{j−1} ≤ t < t_j}`.
#[derive(Debug, Clone)]
pub struct BranchSystem {
    owner: BlaschkeProduct,
    theta0: f64,
    table: Vec<f64>,
    endpoints: Vec<f64>,
    cell_rule: Vec<(f64, f64)>,
    exclusion: f64,
}

impl BranchSystem {
    pub fn new(owner: BlaschkeProduct, table_size: usize) -> Result<Self> {
        let minimum = 64 * owner.degree();
        if table_size < minimum {
            return Err(Error::TableTooSmall { size: table_size, minimum });
        }
        let rule = GaussLegendre::new(NonZeroUsize::new(CELL_NODES).expect("nonzero"));
        let cell_rule = rule.as_node_weight_pairs().to_vec();

        let b1 = owner.eval_angle(0.0);
        let mut theta0 = b1.im.atan2(b1.re);
        if theta0 <= -PI {
            theta0 = PI;
        }

        let h = TAU / table_size as f64;
        let mut table = Vec::with_capacity(table_size + 1);
        table.push(theta0);
        for k in 0..table_size {
            let a = k as f64 * h;
            let inc = integrate(&cell_rule, a, a + h, |t| owner.theta_rate(t));
            let next = table[k] + inc;
            if inc.is_nan() || inc <= 0.0 || !next.is_finite() {
                return Err(Error::NonMonotoneTable { cell: k });
            }
            table.push(next);
        }

        let mut bs = Self { owner, theta0, table, endpoints: Vec::new(), cell_rule, exclusion: BRANCH_EXCLUSION };
        let n = bs.degree();
        let mut endpoints = vec![0.0];
        for j in 1..n {
            endpoints.push(bs.solve_theta(theta0 + TAU * j as f64));
        }
        endpoints.push(TAU);
        bs.endpoints = endpoints;
        Ok(bs)
    }

    /// Changes the branch-point exclusion radius used by [`preimages`](Self::preimages).
    pub fn with_exclusion(mut self, radius: f64) -> Self {
        self.exclusion = radius;
        self
    }

    pub fn owner(&self) -> &BlaschkeProduct {
        &self.owner
    }

    pub fn degree(&self) -> usize {
        self.owner.degree()
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    /// Tabulated `θ` at `t_k = 2πk/T`, `k = 0..=T`.
    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn table_size(&self) -> usize {
        self.table.len() - 1
    }

    /// Arc endpoints `t_0 = 0 < t_1 < … < t_N = 2π` with `θ(t_j) = θ(0) + 2πj`.
    pub fn endpoints(&self) -> &[f64] {
        &self.endpoints
    }

    /// The branch point `b(1) = e^{iθ(0)}`.
    pub fn branch_point(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.theta0)
    }

    /// `θ(t)` for `t ∈ [0, 2π]`.
    pub fn theta(&self, t: f64) -> f64 {
        let size = self.table_size();
        let h = TAU / size as f64;
        let t = t.clamp(0.0, TAU);
        let k = ((t / h) as usize).min(size - 1);
        let a = k as f64 * h;
        if t == a {
            return self.table[k];
        }
        self.table[k] + integrate(&self.cell_rule, a, t, |s| self.owner.theta_rate(s))
    }

    /// Solves `θ(t) = target` for `target ∈ [θ(0), θ(0) + 2πN]`.
    ///
    /// The table brackets the root in one cell; inside it a safeguarded Newton iteration
    /// with `θ' = N·J₀` falls back to bisection whenever a step leaves the bracket.
    pub(crate) fn solve_theta(&self, target: f64) -> f64 {
        let size = self.table_size();
        let h = TAU / size as f64;
        if target <= self.table[0] {
            return 0.0;
        }
        if target >= self.table[size] {
            return TAU;
        }
        let k = self.table.partition_point(|&v| v <= target) - 1;
        let k = k.min(size - 1);
        let (mut lo, mut hi) = (k as f64 * h, (k + 1) as f64 * h);
        let (v_lo, v_hi) = (self.table[k], self.table[k + 1]);
        let mut t = lo + (target - v_lo) / (v_hi - v_lo) * h;
        for _ in 0..100 {
            let f = self.theta(t) - target;
            if f.abs() < ROOT_TOL {
                break;
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let next = t - f / self.owner.theta_rate(t);
            t = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
            if hi - lo < 4.0 * f64::EPSILON * TAU {
                break;
            }
        }
        // The table carries rounding drift of order 1e-13; one Newton step on the exact
        // phase of b(e^{it}) against e^{i·target} removes it.
        let phase = (self.owner.eval_angle(t) * Complex64::from_polar(1.0, -target)).arg();
        let polished = t - phase / self.owner.theta_rate(t);
        if (polished - t).abs() < 1e-9 {
            polished.clamp(0.0, TAU)
        } else {
            t
        }
    }

    /// Preimage angles of `e^{iφ}`, one per branch, without the branch-point check.
    ///
    /// With `s = (φ − θ(0)) mod 2π`, branch `j` solves `θ(t) = θ(0) + s + 2π(j − 1)`.
    /// At `s = 0` this returns the arc endpoints `t_0, …, t_{N−1}`, which is the
    /// continuous extension of the preimage set through `b(1)`.
    pub fn preimage_angles(&self, phi: f64) -> Vec<f64> {
        let s = (phi - self.theta0).rem_euclid(TAU);
        let s = if s >= TAU { 0.0 } else { s };
        (0..self.degree())
            .map(|j| if s == 0.0 { self.endpoints[j] } else { self.solve_theta(self.theta0 + (s + TAU * j as f64)) })
            .collect()
    }

    /// The `N` preimages `σ_j(z)` of a point on the circle, labelled by arc.
    pub fn preimages(&self, z: Complex64) -> Result<Vec<Complex64>> {
        let modulus = z.norm();
        if (modulus - 1.0).abs() > 1e-10 {
            return Err(Error::NotOnCircle { modulus });
        }
        let distance = (z - self.branch_point()).norm();
        if distance < self.exclusion {
            return Err(Error::BranchPoint { distance });
        }
        Ok(self.preimage_angles(z.arg()).into_iter().map(|t| Complex64::from_polar(1.0, t)).collect())
    }

    /// Index of the arc containing angle `t` (half-open arcs `[t_{j−1}, t_j)`).
    pub fn arc_index(&self, t: f64) -> usize {
        let t = t.rem_euclid(TAU);
        let j = self.endpoints.partition_point(|&e| e <= t);
        j.clamp(1, self.degree()) - 1
    }

    /// Distance from angle `t` to the nearest arc endpoint, measured around the circle.
    pub fn endpoint_distance(&self, t: f64) -> f64 {
        let t = t.rem_euclid(TAU);
        self.endpoints
            .iter()
            .map(|&e| {
                let d = (t - e).abs();
                d.min(TAU - d)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn integrate(rule: &[(f64, f64)], a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    half * rule.iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn z_squared() -> BlaschkeProduct {
        BlaschkeProduct::new(vec![c(0.0, 0.0); 2]).unwrap()
    }

    fn half() -> BlaschkeProduct {
        BlaschkeProduct::new(vec![c(0.5, 0.0)]).unwrap()
    }

    #[test]
    fn construction_rejects_bad_zero_lists() {
        assert!(matches!(BlaschkeProduct::new(vec![]), Err(Error::EmptyZeros)));
        assert!(matches!(BlaschkeProduct::new(vec![c(0.2, 0.0), c(1.0, 0.0)]), Err(Error::ZeroOutsideDisc { index: 1, .. })));
        assert!(BlaschkeProduct::new(vec![c(0.0, 1.2)]).is_err());
    }

    #[test]
    fn evaluation_examples() {
        let b = z_squared();
        assert_abs_diff_eq!((b.eval(c(0.0, 1.0)).unwrap() - c(-1.0, 0.0)).norm(), 0.0, epsilon = 1e-15);
        let w = b.eval(Complex64::from_polar(1.0, PI / 4.0)).unwrap();
        assert_abs_diff_eq!((w - c(0.0, 1.0)).norm(), 0.0, epsilon = 1e-15);

        let h = half();
        assert_abs_diff_eq!((h.eval(c(0.0, 0.0)).unwrap() - c(0.5, 0.0)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((h.eval(c(1.0, 0.0)).unwrap() - c(-1.0, 0.0)).norm(), 0.0, epsilon = 1e-15);

        let hh = BlaschkeProduct::new(vec![c(0.5, 0.0); 2]).unwrap();
        assert_abs_diff_eq!((hh.eval(c(1.0, 0.0)).unwrap() - c(1.0, 0.0)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn pole_is_reported() {
        let h = half();
        assert!(matches!(h.eval(c(2.0, 0.0)), Err(Error::Pole { .. })));
        assert!(h.eval_derivative(c(2.0, 0.0)).is_err());
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let b = z_squared();
        let z = c(0.3, -0.4);
        assert_abs_diff_eq!((b.eval_derivative(z).unwrap() - 2.0 * z).norm(), 0.0, epsilon = 1e-15);

        assert_abs_diff_eq!((half().eval_derivative(c(0.0, 0.0)).unwrap() - c(-0.75, 0.0)).norm(), 0.0, epsilon = 1e-15);

        let b = BlaschkeProduct::new(vec![c(0.3, 0.2), c(-0.5, 0.1), c(0.0, 0.0)]).unwrap();
        let step = 1e-6;
        for z in [c(0.1, 0.2), c(-0.6, 0.3), Complex64::from_polar(1.0, 2.0)] {
            let fd = (b.eval(z + step).unwrap() - b.eval(z - step).unwrap()) / (2.0 * step);
            assert_abs_diff_eq!((b.eval_derivative(z).unwrap() - fd).norm(), 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn j0_examples() {
        let b = z_squared();
        for t in [0.0, 1.0, 4.0] {
            assert_abs_diff_eq!(b.j0(t), 1.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(half().j0(0.0), 3.0, epsilon = 1e-14);
        let (lo, hi) = half().j0_bounds();
        assert_abs_diff_eq!(lo, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 3.0, epsilon = 1e-15);
    }

    #[test]
    fn branch_examples() {
        let bs = z_squared().branches(256).unwrap();
        assert_abs_diff_eq!(bs.theta0(), 0.0);
        for t in [0.3, 1.7, 5.0] {
            assert_abs_diff_eq!(bs.theta(t), 2.0 * t, epsilon = 1e-13);
        }
        assert_abs_diff_eq!(bs.endpoints()[1], PI, epsilon = 1e-13);
        assert_eq!(bs.endpoints().len(), 3);

        let bs = half().branches(256).unwrap();
        assert_eq!(bs.theta0(), PI);

        let p = z_squared().branches(256).unwrap().preimages(c(0.0, 1.0)).unwrap();
        assert_abs_diff_eq!((p[0] - Complex64::from_polar(1.0, PI / 4.0)).norm(), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!((p[1] - Complex64::from_polar(1.0, 5.0 * PI / 4.0)).norm(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn branch_point_is_guarded() {
        let bs = z_squared().branches(256).unwrap();
        assert!(matches!(bs.preimages(c(1.0, 0.0)), Err(Error::BranchPoint { .. })));
        assert!(matches!(bs.preimages(c(0.5, 0.0)), Err(Error::NotOnCircle { .. })));
        // The unchecked form continues through b(1) to the arc endpoints.
        let angles = bs.preimage_angles(0.0);
        assert_eq!(angles, vec![0.0, bs.endpoints()[1]]);
        let bs = z_squared().branches(256).unwrap().with_exclusion(0.0);
        assert!(bs.preimages(c(1.0, 0.0)).is_ok());
    }

    #[test]
    fn preimage_of_one_under_half_zero() {
        // Oracle: dense grid search for the minimiser of |b(w) − 1| on the circle.
        let b = half();
        let grid = 200_000;
        let best = (0..grid)
            .map(|k| TAU * k as f64 / grid as f64)
            .min_by(|&x, &y| {
                let fx = (b.eval_angle(x) - 1.0).norm();
                let fy = (b.eval_angle(y) - 1.0).norm();
                fx.partial_cmp(&fy).unwrap()
            })
            .unwrap();
        let oracle = Complex64::from_polar(1.0, best);
        assert_abs_diff_eq!((oracle - c(-1.0, 0.0)).norm(), 0.0, epsilon = 1e-4);

        let p = b.branches(256).unwrap().preimages(c(1.0, 0.0)).unwrap();
        assert_eq!(p.len(), 1);
        assert_abs_diff_eq!((p[0] - c(-1.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn table_size_is_checked() {
        assert!(matches!(z_squared().branches(100), Err(Error::TableTooSmall { minimum: 128, .. })));
    }

    #[test]
    fn arcs_partition_the_circle() {
        let b = BlaschkeProduct::new(vec![c(0.3, 0.4), c(-0.2, 0.0), c(0.0, -0.6)]).unwrap();
        let bs = b.branches(1024).unwrap();
        let e = bs.endpoints().to_vec();
        assert!(e.windows(2).all(|w| w[0] < w[1]));
        for j in 0..3 {
            let mid = 0.5 * (e[j] + e[j + 1]);
            assert_eq!(bs.arc_index(mid), j);
            assert_eq!(bs.arc_index(e[j]), j);
        }
        let p = bs.preimage_angles(1.234);
        for (j, &t) in p.iter().enumerate() {
            assert_eq!(bs.arc_index(t), j);
        }
    }

    #[test]
    fn json_round_trip() {
        let b = BlaschkeProduct::new(vec![c(0.5, 0.0), c(0.0, -0.3)]).unwrap();
        let text = b.to_json();
        assert_eq!(text, r#"{"zeros":[[0.5,0.0],[0.0,-0.3]]}"#);
        assert_eq!(BlaschkeProduct::from_json(&text).unwrap(), b);
        assert!(BlaschkeProduct::from_json(r#"{"zeros":[[1.5,0.0]]}"#).is_err());
        assert!(BlaschkeProduct::from_json(r#"{"zeros":[]}"#).is_err());
    }
}
