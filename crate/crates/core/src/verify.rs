//! Certification of the operator identities for a given Blaschke product.
//!
//! Every relation produces a [`VerificationReport`] with a residual, the tolerance it is
//! judged against and the truncation parameters. Math modules only return residuals;
//! pass/fail is decided here.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blaschke::{BlaschkeProduct, BranchSystem, DEFAULT_TABLE_SIZE};
use crate::boundary::{outer_symbol, CircleGrid, FourierSeries, OuterFunction, DEFAULT_GRID};
use crate::error::{Error, Result};
use crate::model_space::{canonical_basis, linking_unitary, rotate_basis, ModelBasis};
use crate::operators::{
    cuntz_family_window, gamma_b_window, master_isometry_window, mult_operator_window, restrict_to_h2, transfer_window, Modes, Space,
    TruncatedOperator, EPS_TAIL, ROW_FACTOR,
};
use crate::pullback::family_relations;
use crate::rochberg::decompose;
use crate::transfer::{arcs_basis, compose_with_b, ModuleVector, TransferOperator, GRAM_TOL};

/// Residual differences below this size are treated as noise when checking monotonicity.
pub const NOISE_FLOOR: f64 = 1e-12;

/// The identities checked by [`verify_all`], in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    CuntzOrthogonality,
    CuntzCompleteness,
    #[serde(rename = "covariance_L2")]
    CovarianceL2,
    #[serde(rename = "covariance_H2")]
    CovarianceH2,
    ImplementsTransfer,
    MasterIsometry,
    H2Reduction,
    TransferH2Invariance,
    LeftInverse,
    IsometryCriterion,
    NormFormula,
    ModuleOnb,
    ArcsOnb,
    LinkingUnitary,
    RochbergRoundtrip,
    Solution1Equivalence,
}

impl Relation {
    pub const ALL: [Relation; 16] = [
        Relation::CuntzOrthogonality,
        Relation::CuntzCompleteness,
        Relation::CovarianceL2,
        Relation::CovarianceH2,
        Relation::ImplementsTransfer,
        Relation::MasterIsometry,
        Relation::H2Reduction,
        Relation::TransferH2Invariance,
        Relation::LeftInverse,
        Relation::IsometryCriterion,
        Relation::NormFormula,
        Relation::ModuleOnb,
        Relation::ArcsOnb,
        Relation::LinkingUnitary,
        Relation::RochbergRoundtrip,
        Relation::Solution1Equivalence,
    ];

    pub fn name(&self) -> String {
        serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
    }

    pub fn parse(name: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(name.to_owned())).map_err(|_| Error::Invalid(format!("unknown relation `{name}`")))
    }

    fn tolerance_class(&self) -> ToleranceClass {
        use Relation::*;
        match self {
            TransferH2Invariance | ModuleOnb | RochbergRoundtrip => ToleranceClass::Pointwise,
            NormFormula => ToleranceClass::Norm,
            _ => ToleranceClass::Operator,
        }
    }
}

enum ToleranceClass {
    Operator,
    Pointwise,
    Norm,
}

/// Truncation, tolerance and randomness settings for a verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// Grid size `K`, a power of two.
    pub grid: usize,
    /// Column window `M` of the truncated operators.
    pub modes: usize,
    /// `M_inner = ⌊fraction·M⌋` bounds the certified block.
    pub interior_fraction: f64,
    pub eps_tail: f64,
    pub operator_tol: f64,
    pub pointwise_tol: f64,
    /// Relative tolerance of the norm formula.
    pub norm_tol: f64,
    pub seed: u64,
    pub table_size: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            grid: DEFAULT_GRID,
            modes: 32,
            interior_fraction: 0.5,
            eps_tail: EPS_TAIL,
            operator_tol: 1e-6,
            pointwise_tol: 1e-8,
            norm_tol: 0.05,
            seed: 0,
            table_size: DEFAULT_TABLE_SIZE,
        }
    }
}

impl VerifyConfig {
    /// Replaces all three tolerances by one value.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.operator_tol = tol;
        self.pointwise_tol = tol;
        self.norm_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let grid = CircleGrid::new(self.grid)?;
        if self.modes == 0 || 2 * self.modes + 1 > grid.size() {
            return Err(Error::WindowTooLarge { window: self.modes, grid: self.grid });
        }
        if !(self.interior_fraction > 0.0 && self.interior_fraction <= 1.0) {
            return Err(Error::Invalid(format!("interior fraction {} outside (0, 1]", self.interior_fraction)));
        }
        for (name, v) in [
            ("eps_tail", self.eps_tail),
            ("operator_tol", self.operator_tol),
            ("pointwise_tol", self.pointwise_tol),
            ("norm_tol", self.norm_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn m_inner(&self) -> i64 {
        ((self.interior_fraction * self.modes as f64).floor() as i64).max(1)
    }

    fn tolerance(&self, class: ToleranceClass) -> f64 {
        match class {
            ToleranceClass::Operator => self.operator_tol,
            ToleranceClass::Pointwise => self.pointwise_tol,
            ToleranceClass::Norm => self.norm_tol,
        }
    }
}

/// One certified relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub relation: Relation,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub grid: usize,
    pub modes: usize,
    pub interior: i64,
    pub eps_tail: f64,
    pub basis_kind: String,
    pub zeros: Vec<Complex64>,
    /// Columns inside the interior window whose tail exceeded `eps_tail`.
    pub excluded: Vec<i64>,
    /// Supporting quantities, keyed by name.
    pub metrics: BTreeMap<String, f64>,
    pub error: Option<String>,
}

/// Outcome of a relation computation before policy is applied.
#[derive(Debug, Default)]
struct Outcome {
    residual: f64,
    excluded: Vec<i64>,
    metrics: BTreeMap<String, f64>,
    basis_kind: &'static str,
    /// Overrides `residual < tolerance` when set.
    pass: Option<bool>,
}

impl Outcome {
    fn new(residual: f64, basis_kind: &'static str) -> Self {
        Self { residual, basis_kind, ..Default::default() }
    }

    fn metric(mut self, name: &str, value: f64) -> Self {
        self.metrics.insert(name.to_owned(), value);
        self
    }

    fn excluding(mut self, cols: Vec<i64>) -> Self {
        self.excluded = cols;
        self
    }
}

/// Everything a relation needs, computed once per run.
struct Context {
    config: VerifyConfig,
    b: BlaschkeProduct,
    bs: BranchSystem,
    grid: CircleGrid,
    rows: i64,
    m: i64,
    m_inner: i64,
    j_half: OuterFunction,
    j_inv_half: OuterFunction,
    basis: ModelBasis,
    op: TransferOperator,
    gamma: TruncatedOperator,
    cb: TruncatedOperator,
    family: Vec<TruncatedOperator>,
}

impl Context {
    fn new(b: &BlaschkeProduct, config: &VerifyConfig) -> Result<Self> {
        config.validate()?;
        let grid = CircleGrid::new(config.grid)?;
        let bs = b.branches(config.table_size.max(64 * b.degree()))?;
        let m = config.modes as i64;
        let rows = (ROW_FACTOR * m).min(grid.size() as i64 / 2 - 1);
        let j_half = outer_symbol(b, grid, 0.5)?;
        let j_inv_half = outer_symbol(b, grid, -0.5)?;
        let basis = canonical_basis(b);
        let op = TransferOperator::new(&bs, grid);
        let window: Modes = (-rows, rows);
        let cols: Modes = (-m, m);
        let gamma = gamma_b_window(&bs, window, cols, grid)?;
        let cb = master_isometry_window(&bs, &j_half, window, cols)?;
        let family = cuntz_family_window(&basis, window, cols, grid)?;
        Ok(Self {
            config: config.clone(),
            b: b.clone(),
            bs,
            grid,
            rows,
            m,
            m_inner: config.m_inner().min(m),
            j_half,
            j_inv_half,
            basis,
            op,
            gamma,
            cb,
            family,
        })
    }

    fn all_rows(&self) -> Vec<i64> {
        (-self.rows..=self.rows).collect()
    }

    /// Interior columns certified for every operator in `ops`, plus the rejected ones.
    fn certified(&self, ops: &[&TruncatedOperator]) -> Result<(Vec<i64>, Vec<i64>)> {
        let mut interior: Vec<i64> = (-self.m_inner..=self.m_inner).collect();
        let mut excluded = Vec::new();
        for op in ops {
            let cert = op.certify(self.m_inner, self.config.eps_tail);
            interior.retain(|n| cert.interior.contains(n));
            excluded.extend(cert.excluded);
        }
        excluded.sort_unstable();
        excluded.dedup();
        if interior.is_empty() {
            return Err(uncertified());
        }
        Ok((interior, excluded))
    }

    fn square(&self, phi: &FourierSeries) -> Result<TruncatedOperator> {
        mult_operator_window(phi, (-self.rows, self.rows), (-self.rows, self.rows), Space::L2)
    }

    fn series(&self, f: &crate::boundary::BoundaryFunction) -> Result<FourierSeries> {
        f.fourier_coeffs(self.grid.max_window())
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.config.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    fn module_family(&self) -> Vec<ModuleVector> {
        self.basis.module_family(&self.j_inv_half)
    }
}

fn uncertified() -> Error {
    Error::Invalid("no interior mode passed the tail certificate; raise the grid size".into())
}

fn delta(m: i64, n: i64) -> Complex64 {
    Complex64::new(if m == n { 1.0 } else { 0.0 }, 0.0)
}

fn zero(_: i64, _: i64) -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// A band-limited symbol with window 8 and coefficients uniform in the unit square.
fn random_symbol(rng: &mut ChaCha8Rng) -> FourierSeries {
    let coeffs = (0..17).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * 0.25).collect();
    FourierSeries::new(-8, coeffs).expect("finite coefficients")
}

fn cuntz_orthogonality(ctx: &Context) -> Result<Outcome> {
    let refs: Vec<&TruncatedOperator> = ctx.family.iter().collect();
    let (cols, excluded) = ctx.certified(&refs)?;
    let mut worst = 0.0f64;
    for (i, si) in ctx.family.iter().enumerate() {
        let adj = si.adjoint();
        for (j, sj) in ctx.family.iter().enumerate() {
            let prod = adj.compose(sj)?;
            let scale = if i == j { 1.0 } else { 0.0 };
            worst = worst.max(prod.max_deviation(&cols, &cols, |m, n| delta(m, n) * scale)?);
        }
    }
    Ok(Outcome::new(worst, "canonical").excluding(excluded).metric("certified_columns", cols.len() as f64))
}

fn cuntz_completeness(ctx: &Context) -> Result<Outcome> {
    let max_rate = ctx.b.degree() as f64 * ctx.b.j0_bounds().1;
    let wide = ctx.rows.min((ctx.grid.size() as f64 / (4.0 * max_rate)).floor() as i64).max(ctx.m_inner);
    let rows: Modes = (-ctx.m_inner, ctx.m_inner);
    let family = cuntz_family_window(&ctx.basis, rows, (-wide, wide), ctx.grid)?;
    let width = (2 * ctx.m_inner + 1) as usize;
    let mut sum = DMatrix::<Complex64>::zeros(width, width);
    for s in &family {
        sum += s.matrix() * s.matrix().adjoint();
    }
    // A row is usable when the stored columns capture it: its mass in the outer quarter is negligible.
    let edge = 3 * wide / 4;
    let certified: Vec<usize> = (0..width)
        .filter(|&r| {
            let outer: f64 = family
                .iter()
                .map(|s| {
                    (-wide..=wide)
                        .filter(|k| k.abs() > edge)
                        .map(|k| s.entry(r as i64 - ctx.m_inner, k).map(|v| v.norm_sqr()).unwrap_or(0.0))
                        .sum::<f64>()
                })
                .sum();
            outer.sqrt() < ctx.config.eps_tail
        })
        .collect();
    let mut worst = 0.0f64;
    for &r in &certified {
        for &c in &certified {
            let want = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((sum[(r, c)] - want).norm());
        }
    }
    if certified.is_empty() {
        return Err(uncertified());
    }
    let excluded = (0..width).filter(|r| !certified.contains(r)).map(|r| r as i64 - ctx.m_inner).collect();
    Ok(Outcome::new(worst, "canonical")
        .excluding(excluded)
        .metric("wide_window", wide as f64)
        .metric("certified_rows", certified.len() as f64))
}

fn covariance_l2(ctx: &Context) -> Result<Outcome> {
    let refs: Vec<&TruncatedOperator> = ctx.family.iter().collect();
    let (cols, excluded) = ctx.certified(&refs)?;
    let shift = mult_operator_window(&FourierSeries::monomial(1), (-ctx.m, ctx.m), (-ctx.m, ctx.m), Space::L2)?;
    let pi_b = ctx.square(&ctx.series(&crate::boundary::sample_blaschke(&ctx.b, ctx.grid)?)?)?;
    let rows = ctx.all_rows();
    let mut worst = 0.0f64;
    for s in &ctx.family {
        let lhs = s.compose(&shift)?;
        let rhs = pi_b.compose(s)?;
        worst = worst.max(lhs.max_difference(&rhs, &rows, &cols)?);
    }
    Ok(Outcome::new(worst, "canonical").excluding(excluded))
}

fn covariance_h2(ctx: &Context) -> Result<Outcome> {
    let refs: Vec<&TruncatedOperator> = ctx.family.iter().collect();
    let (cols, excluded) = ctx.certified(&refs)?;
    let cols: Vec<i64> = cols.into_iter().filter(|&n| n >= 0).collect();
    if cols.is_empty() {
        return Err(uncertified());
    }
    let shift = mult_operator_window(&FourierSeries::monomial(1), (0, ctx.m), (0, ctx.m), Space::H2)?;
    let b_series = ctx.series(&crate::boundary::sample_blaschke(&ctx.b, ctx.grid)?)?;
    let tau_b = mult_operator_window(&b_series, (0, ctx.rows), (0, ctx.rows), Space::H2)?;
    let rows: Vec<i64> = (0..=ctx.rows).collect();
    let mut worst = 0.0f64;
    for s in &ctx.family {
        let r = restrict_to_h2(s)?;
        let lhs = r.compose(&shift)?;
        let rhs = tau_b.compose(&r)?;
        worst = worst.max(lhs.max_difference(&rhs, &rows, &cols)?);
    }
    Ok(Outcome::new(worst, "canonical").excluding(excluded))
}

fn implements_transfer(ctx: &Context) -> Result<Outcome> {
    let (cols, excluded) = ctx.certified(&[&ctx.cb])?;
    let mut rng = ctx.rng(5);
    let symbols = [
        ("e0", FourierSeries::monomial(0)),
        ("e1", FourierSeries::monomial(1)),
        ("e2", FourierSeries::monomial(2)),
        ("random", random_symbol(&mut rng)),
    ];
    let adj = ctx.cb.adjoint();
    let mut outcome = Outcome::new(0.0, "none").excluding(excluded);
    for (name, phi) in symbols {
        let lhs = adj.compose(&ctx.square(&phi)?)?.compose(&ctx.cb)?;
        let l_phi = ctx.op.apply(&ModuleVector::from_series(phi.clone(), name)).values;
        let rhs = mult_operator_window(&ctx.series(&l_phi)?, (-ctx.m, ctx.m), (-ctx.m, ctx.m), Space::L2)?;
        let r = lhs.max_difference(&rhs, &cols, &cols)?;
        outcome.residual = outcome.residual.max(r);
        outcome = outcome.metric(&format!("residual_{name}"), r);
    }
    Ok(outcome)
}

fn master_isometry(ctx: &Context) -> Result<Outcome> {
    let (cols, excluded) = ctx.certified(&[&ctx.cb])?;
    let gram = ctx.cb.adjoint().compose(&ctx.cb)?;
    let r = gram.max_deviation(&cols, &cols, delta)?;
    Ok(Outcome::new(r, "none").excluding(excluded).metric("certified_columns", cols.len() as f64))
}

fn h2_reduction(ctx: &Context) -> Result<Outcome> {
    let (cols, excluded) = ctx.certified(&[&ctx.cb])?;
    let neg_rows: Vec<i64> = (-ctx.rows..0).collect();
    let pos_rows: Vec<i64> = (0..=ctx.rows).collect();
    let pos_cols: Vec<i64> = cols.iter().copied().filter(|&n| n >= 0).collect();
    let neg_cols: Vec<i64> = cols.iter().copied().filter(|&n| n < 0).collect();
    let upper = ctx.cb.max_deviation(&neg_rows, &pos_cols, zero)?;
    let lower = ctx.cb.max_deviation(&pos_rows, &neg_cols, zero)?;
    Ok(Outcome::new(upper.max(lower), "none").excluding(excluded).metric("h2_to_complement", upper).metric("complement_to_h2", lower))
}

fn transfer_h2_invariance(ctx: &Context) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for n in 0..=32 {
        let out = ctx.op.apply(&ModuleVector::exponential(n)).values;
        worst = worst.max(ctx.series(&out)?.neg_energy());
    }
    Ok(Outcome::new(worst, "none").metric("max_mode", 32.0))
}

fn left_inverse(ctx: &Context) -> Result<Outcome> {
    let (cols, excluded) = ctx.certified(&[&ctx.gamma])?;
    let window: Modes = (-ctx.rows, ctx.rows);
    let l = transfer_window(&ctx.op, window, window)?;
    let lg = l.compose(&ctx.gamma)?;
    let matrix_residual = lg.max_deviation(&cols, &cols, delta)?;

    // ℒπ(J₀)⁻¹ against Γ_b*, both on the certified block.
    let inv_j0 = crate::boundary::BoundaryFunction::sample(ctx.grid, |t| Complex64::new(1.0 / ctx.b.j0(t), 0.0))?;
    let l_inv = l.compose(&ctx.square(&ctx.series(&inv_j0)?)?)?;
    let mut adjoint_residual = 0.0f64;
    for &n in &cols {
        for &m in &cols {
            let lhs = l_inv.entry(m, n).ok_or_else(|| Error::Shape("entry outside block".into()))?;
            let rhs = ctx.gamma.entry(n, m).ok_or_else(|| Error::Shape("entry outside block".into()))?.conj();
            adjoint_residual = adjoint_residual.max((lhs - rhs).norm());
        }
    }

    let mut pointwise = 0.0f64;
    for n in -8..=8 {
        let composed = compose_with_b(&ctx.bs, &ModuleVector::exponential(n));
        let out = ctx.op.apply(&composed);
        pointwise = pointwise.max(out.sup_distance_off_excluded(|k| Complex64::from_polar(1.0, n as f64 * ctx.grid.node(k))));
    }
    Ok(Outcome::new(matrix_residual.max(adjoint_residual).max(pointwise), "none")
        .excluding(excluded)
        .metric("matrix_residual", matrix_residual)
        .metric("adjoint_residual", adjoint_residual)
        .metric("pointwise_residual", pointwise))
}

fn isometry_criterion(ctx: &Context) -> Result<Outcome> {
    let (cols, excluded) = ctx.certified(&[&ctx.gamma])?;
    let gram = ctx.gamma.adjoint().compose(&ctx.gamma)?;
    let gram_deviation = gram.max_deviation(&cols, &cols, delta)?;
    let b0 = ctx.b.eval(Complex64::new(0.0, 0.0))?;
    let entry = gram.entry(0, 1).ok_or_else(|| Error::Shape("modes 0 and 1 must be stored".into()))?;
    let mut residual = (entry - b0).norm();
    let isometric = b0.norm() < 1e-12;
    if isometric {
        residual = residual.max(gram_deviation);
    }
    Ok(Outcome::new(residual, "none")
        .excluding(excluded)
        .metric("gram_deviation", gram_deviation)
        .metric("gram_01_modulus", entry.norm())
        .metric("b0_modulus", b0.norm())
        .metric("is_isometry", if gram_deviation < ctx.config.operator_tol { 1.0 } else { 0.0 }))
}

fn norm_formula(ctx: &Context) -> Result<Outcome> {
    let symbol = ctx.series(ctx.j_inv_half.boundary())?;
    let t = ctx.square(&symbol)?.compose(&ctx.cb)?;
    let truncated = t.operator_norm();
    let inv_j0 = ModuleVector::from_fn("1/J0", {
        let b = ctx.b.clone();
        move |s| Complex64::new(1.0 / b.j0(s), 0.0)
    });
    let expected = ctx.op.apply(&inv_j0).values.values().iter().map(|v| v.re).fold(0.0, f64::max).sqrt();
    let residual = (truncated - expected).abs() / expected;
    Ok(Outcome::new(residual, "none").metric("truncated_norm", truncated).metric("expected_norm", expected))
}

fn module_onb(ctx: &Context) -> Result<Outcome> {
    let gram = ctx.op.gram(&ctx.module_family());
    Ok(Outcome::new(gram.deviation, "canonical"))
}

fn arcs_onb(ctx: &Context) -> Result<Outcome> {
    let gram = ctx.op.gram(&arcs_basis(&ctx.bs));
    Ok(Outcome::new(gram.deviation, "arcs").metric("excluded_nodes", gram.excluded.len() as f64))
}

fn linking(ctx: &Context) -> Result<Outcome> {
    let link = linking_unitary(&ctx.bs, &ctx.module_family(), &arcs_basis(&ctx.bs), ctx.grid)?;
    Ok(Outcome::new(link.unitarity_deviation.max(link.reconstruction_residual), "canonical")
        .metric("unitarity_deviation", link.unitarity_deviation)
        .metric("reconstruction_residual", link.reconstruction_residual)
        .metric("excluded_nodes", link.excluded.len() as f64))
}

fn rochberg_roundtrip(ctx: &Context) -> Result<Outcome> {
    let mut rng = ctx.rng(15);
    let degree = rng.gen_range(8..=16usize);
    let coeffs = (0..=degree).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let f = FourierSeries::new(0, coeffs)?;
    let d = decompose(&ctx.bs, &ctx.basis, &f, ctx.grid)?;
    let neg = d.membership.iter().map(|m| m.neg_energy).fold(0.0, f64::max);
    Ok(Outcome::new(d.residual.max(neg), "canonical")
        .metric("degree", degree as f64)
        .metric("reconstruction_residual", d.residual)
        .metric("max_neg_energy", neg))
}

fn solution1(ctx: &Context, family: &[ModuleVector], kind: &'static str) -> Result<Outcome> {
    let r = family_relations(&ctx.bs, family, &ctx.j_half, ctx.config.modes.min(ctx.m_inner as usize * 2))?;
    let cuntz = r.orthogonality.max(r.completeness).max(r.covariance);
    let tol = ctx.config.operator_tol;
    let mut outcome = if r.gram_deviation < GRAM_TOL {
        Outcome::new(cuntz.max(r.consistency), kind)
    } else {
        // A non-orthonormal family must break the Cuntz relations exactly as its Gram matrix predicts.
        let mut o = Outcome::new(r.consistency, kind);
        o.pass = Some(r.consistency < tol && cuntz > tol);
        o
    };
    outcome = outcome
        .metric("gram_deviation", r.gram_deviation)
        .metric("orthogonality", r.orthogonality)
        .metric("completeness", r.completeness)
        .metric("covariance", r.covariance)
        .metric("consistency", r.consistency);
    Ok(outcome)
}

fn run(ctx: &Context, relation: Relation) -> Result<Outcome> {
    use Relation::*;
    match relation {
        CuntzOrthogonality => cuntz_orthogonality(ctx),
        CuntzCompleteness => cuntz_completeness(ctx),
        CovarianceL2 => covariance_l2(ctx),
        CovarianceH2 => covariance_h2(ctx),
        ImplementsTransfer => implements_transfer(ctx),
        MasterIsometry => master_isometry(ctx),
        H2Reduction => h2_reduction(ctx),
        TransferH2Invariance => transfer_h2_invariance(ctx),
        LeftInverse => left_inverse(ctx),
        IsometryCriterion => isometry_criterion(ctx),
        NormFormula => norm_formula(ctx),
        ModuleOnb => module_onb(ctx),
        ArcsOnb => arcs_onb(ctx),
        LinkingUnitary => linking(ctx),
        RochbergRoundtrip => rochberg_roundtrip(ctx),
        Solution1Equivalence => solution1(ctx, &arcs_basis(&ctx.bs), "arcs"),
    }
}

fn report(ctx: &Context, relation: Relation, outcome: Result<Outcome>) -> VerificationReport {
    let tolerance = ctx.config.tolerance(relation.tolerance_class());
    let (outcome, error) = match outcome {
        Ok(o) => (o, None),
        Err(e) => (Outcome::new(f64::MAX, "none"), Some(e.to_string())),
    };
    let residual = if outcome.residual.is_finite() { outcome.residual } else { f64::MAX };
    let pass = error.is_none() && outcome.pass.unwrap_or(residual < tolerance);
    VerificationReport {
        relation,
        residual,
        tolerance,
        pass,
        grid: ctx.config.grid,
        modes: ctx.config.modes,
        interior: ctx.m_inner,
        eps_tail: ctx.config.eps_tail,
        basis_kind: outcome.basis_kind.to_owned(),
        zeros: ctx.b.zeros().to_vec(),
        excluded: outcome.excluded,
        metrics: outcome.metrics,
        error,
    }
}

/// Runs the listed relations in the order given.
pub fn verify_relations(b: &BlaschkeProduct, relations: &[Relation], config: &VerifyConfig) -> Result<Vec<VerificationReport>> {
    let ctx = Context::new(b, config)?;
    Ok(relations.iter().map(|&r| report(&ctx, r, run(&ctx, r))).collect())
}

/// Runs every relation; individual failures are recorded in the reports, not returned as errors.
pub fn verify_all(b: &BlaschkeProduct, config: &VerifyConfig) -> Result<Vec<VerificationReport>> {
    verify_relations(b, &Relation::ALL, config)
}

/// Certifies `S_i = π(m_i)C_b` for a module family.
///
/// For an orthonormal family the residual covers both Cuntz relations, covariance and the
/// agreement `S_i*S_j = π(⟨m_i, m_j⟩)`. For a family failing the Gram check the report
/// passes only if that agreement holds while the Cuntz relations fail.
pub fn verify_solution1(bs: &BranchSystem, family: &[ModuleVector], config: &VerifyConfig) -> Result<VerificationReport> {
    let ctx = Context::new(bs.owner(), config)?;
    let outcome = solution1(&ctx, family, "user");
    Ok(report(&ctx, Relation::Solution1Equivalence, outcome))
}

/// A deliberately invalid input and whether the library rejected it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativeControl {
    pub name: String,
    pub rejected: bool,
    pub detail: String,
    pub metrics: BTreeMap<String, f64>,
}

/// The mandatory negative controls: each must be rejected.
pub fn negative_controls(config: &VerifyConfig) -> Result<Vec<NegativeControl>> {
    let mut out = Vec::new();

    let z2 = BlaschkeProduct::new(vec![Complex64::new(0.0, 0.0); 2])?;
    let skew = DMatrix::from_row_slice(
        2,
        2,
        &[Complex64::new(1.0, 0.0), Complex64::new(0.1, 0.0), Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
    );
    let rotation = rotate_basis(&canonical_basis(&z2), &skew);
    out.push(NegativeControl {
        name: "non_unitary_rotation".into(),
        rejected: matches!(rotation, Err(Error::NonUnitary { .. })),
        detail: rotation.err().map(|e| e.to_string()).unwrap_or_default(),
        metrics: BTreeMap::new(),
    });

    let half = BlaschkeProduct::new(vec![Complex64::new(0.5, 0.0)])?;
    let ctx = Context::new(&half, config)?;
    let crit = isometry_criterion(&ctx)?;
    let deviation = crit.metrics["gram_deviation"];
    out.push(NegativeControl {
        name: "isometry_claim_with_nonzero_b0".into(),
        rejected: deviation > config.operator_tol,
        detail: format!("Gram deviation {deviation:e} for b(0) = 0.5"),
        metrics: crit.metrics,
    });

    let bs = z2.branches(config.table_size.max(128))?;
    let ones = vec![ModuleVector::constant(Complex64::new(1.0, 0.0)); 2];
    let rep = verify_solution1(&bs, &ones, config)?;
    let completeness = rep.metrics["completeness"];
    out.push(NegativeControl {
        name: "non_orthonormal_family".into(),
        rejected: completeness > 0.5 && rep.metrics["gram_deviation"] > GRAM_TOL,
        detail: format!("completeness residual {completeness:e}"),
        metrics: rep.metrics,
    });
    Ok(out)
}

/// Residual of one relation for each column window in `modes`.
///
/// The grid is raised to at least `16·M` so that the row window keeps its default ratio.
pub fn convergence_study(b: &BlaschkeProduct, relation: Relation, modes: &[usize], config: &VerifyConfig) -> Result<Vec<(usize, f64)>> {
    modes
        .iter()
        .map(|&m| {
            let mut cfg = config.clone();
            cfg.modes = m;
            cfg.grid = cfg.grid.max((16 * m).next_power_of_two());
            let rep = verify_relations(b, &[relation], &cfg)?.remove(0);
            if let Some(e) = rep.error {
                return Err(Error::Invalid(e));
            }
            Ok((m, rep.residual))
        })
        .collect()
}

/// `modes,residual` CSV of a convergence study.
pub fn convergence_csv(rows: &[(usize, f64)]) -> String {
    let mut out = String::from("modes,residual\n");
    for (m, r) in rows {
        out.push_str(&format!("{m},{r:e}\n"));
    }
    out
}

/// Whether residuals never increase by more than [`NOISE_FLOOR`] along the study.
pub fn is_monotone(rows: &[(usize, f64)]) -> bool {
    rows.windows(2).all(|w| w[1].1 <= w[0].1 + NOISE_FLOOR)
}

/// Serialises reports as a JSON array.
pub fn reports_json(reports: &[VerificationReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports hold finite values")
}

/// Seeded random Blaschke product with `1..=max_degree` zeros of modulus at most `max_modulus`.
pub fn random_blaschke(seed: u64, max_degree: usize, max_modulus: f64) -> BlaschkeProduct {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_degree);
    let zeros = (0..n)
        .map(|_| {
            let r = max_modulus * rng.gen::<f64>().sqrt();
            Complex64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    BlaschkeProduct::new(zeros).expect("moduli are below one")
}
