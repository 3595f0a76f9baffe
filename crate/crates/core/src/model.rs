//! Problem instances: regime-switching dynamics, running profit, interaction
//! maps, and sampled checks of the standing assumptions.
//!
//! Coefficients are plain closures so that both the closed-form benchmark
//! family and user-assembled models (polynomial drifts, test doubles) share
//! one representation. Every closure is `Send + Sync`; instances are immutable
//! after construction and can be shared across worker threads.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficient `(x, regime) -> value`.
pub type RegimeFn = Arc<dyn Fn(f64, usize) -> f64 + Send + Sync>;
/// Profit-type function `(x, theta) -> value`.
pub type ProfitFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Scalar map.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const ROW_SUM_TOL: f64 = 1e-12;

/// Drift and volatility of the uncontrolled state, with their x-derivatives.
#[derive(Clone)]
pub struct Coefficients {
    pub drift: RegimeFn,
    pub drift_x: RegimeFn,
    pub vol: RegimeFn,
    pub vol_x: RegimeFn,
}

/// Markov-modulated diffusion `dX = b(X,Y)dt + σ(X,Y)dW` with chain generator `Q`.
#[derive(Clone)]
pub struct RegimeModel {
    d: usize,
    coeffs: Coefficients,
    rate_matrix: DMatrix<f64>,
    state_interval: (f64, f64),
    dissipativity_c: f64,
}

impl fmt::Debug for RegimeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RegimeModel")
            .field("d", &self.d)
            .field("rate_matrix", &self.rate_matrix)
            .field("state_interval", &self.state_interval)
            .field("dissipativity_c", &self.dissipativity_c)
            .finish_non_exhaustive()
    }
}

impl RegimeModel {
    /// Builds a model after checking the generator and the state interval.
    ///
    /// A single-regime model (`d = 1`) is accepted with `Q = [[0]]`; it is the
    /// reduction target for symmetric instances and per-regime diagnostics.
    pub fn new(
        coeffs: Coefficients,
        rate_matrix: DMatrix<f64>,
        state_interval: (f64, f64),
        dissipativity_c: f64,
    ) -> Result<Self> {
        let d = rate_matrix.nrows();
        if d == 0 || rate_matrix.ncols() != d {
            return Err(Error::InvalidModel("rate matrix must be square and nonempty".into()));
        }
        check_generator(&rate_matrix)?;
        Self::check_common(&rate_matrix, state_interval, dissipativity_c)?;
        Ok(Self { d, coeffs, rate_matrix, state_interval, dissipativity_c })
    }

    /// Skips the generator checks. Meant for test doubles such as a frozen
    /// chain (`Q = 0`) where the structural invariants deliberately fail.
    pub fn new_unvalidated(
        coeffs: Coefficients,
        rate_matrix: DMatrix<f64>,
        state_interval: (f64, f64),
        dissipativity_c: f64,
    ) -> Result<Self> {
        let d = rate_matrix.nrows();
        if d == 0 || rate_matrix.ncols() != d {
            return Err(Error::InvalidModel("rate matrix must be square and nonempty".into()));
        }
        Self::check_common(&rate_matrix, state_interval, dissipativity_c)?;
        Ok(Self { d, coeffs, rate_matrix, state_interval, dissipativity_c })
    }

    fn check_common(q: &DMatrix<f64>, interval: (f64, f64), c: f64) -> Result<()> {
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("rate matrix has non-finite entries".into()));
        }
        if interval.0.is_nan() || interval.1.is_nan() || interval.0 >= interval.1 {
            return Err(Error::InvalidModel(format!(
                "state interval ({}, {}) is empty",
                interval.0, interval.1
            )));
        }
        if !(c > 0.0) {
            return Err(Error::InvalidModel("dissipativity constant must be positive".into()));
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn drift(&self, x: f64, i: usize) -> f64 {
        (self.coeffs.drift)(x, i)
    }

    #[inline]
    pub fn drift_x(&self, x: f64, i: usize) -> f64 {
        (self.coeffs.drift_x)(x, i)
    }

    #[inline]
    pub fn vol(&self, x: f64, i: usize) -> f64 {
        (self.coeffs.vol)(x, i)
    }

    #[inline]
    pub fn vol_x(&self, x: f64, i: usize) -> f64 {
        (self.coeffs.vol_x)(x, i)
    }

    /// Drift of the auxiliary process used by the stopping game, `b + σσ_x`.
    #[inline]
    pub fn hat_drift(&self, x: f64, i: usize) -> f64 {
        self.drift(x, i) + self.vol(x, i) * self.vol_x(x, i)
    }

    #[inline]
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.rate_matrix[(i, j)]
    }

    pub fn rate_matrix(&self) -> &DMatrix<f64> {
        &self.rate_matrix
    }

    pub fn state_interval(&self) -> (f64, f64) {
        self.state_interval
    }

    pub fn dissipativity_c(&self) -> f64 {
        self.dissipativity_c
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coeffs
    }

    /// Same dynamics with a different generator (validated).
    pub fn with_rate_matrix(&self, q: DMatrix<f64>) -> Result<Self> {
        if q.nrows() != self.d {
            return Err(Error::InvalidModel("rate matrix dimension mismatch".into()));
        }
        Self::new(self.coeffs.clone(), q, self.state_interval, self.dissipativity_c)
    }

    /// Regime `i` alone, as a one-regime model with a frozen chain.
    pub fn restrict_to_regime(&self, i: usize) -> Result<Self> {
        if i >= self.d {
            return Err(Error::InvalidModel(format!("regime {i} out of range")));
        }
        let c = self.coeffs.clone();
        let coeffs = Coefficients {
            drift: { let f = c.drift.clone(); Arc::new(move |x, _| f(x, i)) },
            drift_x: { let f = c.drift_x.clone(); Arc::new(move |x, _| f(x, i)) },
            vol: { let f = c.vol.clone(); Arc::new(move |x, _| f(x, i)) },
            vol_x: { let f = c.vol_x.clone(); Arc::new(move |x, _| f(x, i)) },
        };
        Self::new(coeffs, DMatrix::zeros(1, 1), self.state_interval, self.dissipativity_c)
    }

    /// Column sums of `Q`, used by the stationary-law comparison argument.
    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.d).map(|j| self.rate_matrix.column(j).sum()).collect()
    }
}

fn check_generator(q: &DMatrix<f64>) -> Result<()> {
    let d = q.nrows();
    if d == 1 {
        if q[(0, 0)] != 0.0 {
            return Err(Error::InvalidModel("a single-regime generator must be [[0]]".into()));
        }
        return Ok(());
    }
    for i in 0..d {
        let row_sum: f64 = q.row(i).sum();
        let scale = q.row(i).iter().map(|v| v.abs()).fold(1.0, f64::max);
        if row_sum.abs() > ROW_SUM_TOL * scale {
            return Err(Error::InvalidModel(format!("row {i} of Q sums to {row_sum:e}")));
        }
        if q[(i, i)] >= 0.0 {
            return Err(Error::InvalidModel(format!("q[{i}][{i}] must be negative")));
        }
        for j in 0..d {
            if j != i && q[(i, j)] < 0.0 {
                return Err(Error::InvalidModel(format!("q[{i}][{j}] is negative")));
            }
        }
    }
    if !is_irreducible(q) {
        return Err(Error::ReducibleChain("transition graph is not strongly connected".into()));
    }
    Ok(())
}

fn reachable(q: &DMatrix<f64>, transpose: bool) -> Vec<bool> {
    let d = q.nrows();
    let mut seen = vec![false; d];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..d {
            let rate = if transpose { q[(j, i)] } else { q[(i, j)] };
            if j != i && rate > 0.0 && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}

fn is_irreducible(q: &DMatrix<f64>) -> bool {
    reachable(q, false).iter().all(|&s| s) && reachable(q, true).iter().all(|&s| s)
}

/// Stationary law of the chain: solves `pQ = 0`, `Σp = 1`.
pub fn chain_stationary(q: &DMatrix<f64>) -> Result<Vec<f64>> {
    let d = q.nrows();
    if d == 0 || q.ncols() != d {
        return Err(Error::InvalidModel("rate matrix must be square and nonempty".into()));
    }
    if d == 1 {
        return Ok(vec![1.0]);
    }
    if !is_irreducible(q) {
        return Err(Error::ReducibleChain("transition graph is not strongly connected".into()));
    }
    let mut a = q.transpose();
    for j in 0..d {
        a[(d - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(d);
    rhs[d - 1] = 1.0;
    let p = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::ReducibleChain("singular generator".into()))?;
    let mut p: Vec<f64> = p.iter().map(|&v| if v < 0.0 && v > -1e-14 { 0.0 } else { v }).collect();
    if p.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::ReducibleChain(format!("negative stationary weights {p:?}")));
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    Ok(p)
}

/// Largest absolute gap between the `pQ = 0` solution and `κ_i / Σκ_j`.
/// The two coincide only for special generators (e.g. symmetric two-state).
pub fn kappa_formula_discrepancy(q: &DMatrix<f64>) -> Result<f64> {
    let p = chain_stationary(q)?;
    let kappa: Vec<f64> = (0..q.nrows()).map(|i| -q[(i, i)]).collect();
    let total: f64 = kappa.iter().sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    Ok(p.iter().zip(&kappa).map(|(a, k)| (a - k / total).abs()).fold(0.0, f64::max))
}

/// Running profit, action costs and the mean-field interaction maps.
///
/// `outer_map` is `F` (moment to parameter) and `inner_map` is `f` (state weight),
/// so that the consistency condition reads `θ = F(⟨f, ν^θ⟩)`.
#[derive(Clone)]
pub struct ProfitSpec {
    pub profit: ProfitFn,
    pub profit_x: ProfitFn,
    pub k1: f64,
    pub k2: f64,
    pub outer_map: ScalarFn,
    pub inner_map: ScalarFn,
    pub kappa_limit: ScalarFn,
    pub growth_beta: f64,
    pub theta_min: f64,
}

impl fmt::Debug for ProfitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProfitSpec")
            .field("k1", &self.k1)
            .field("k2", &self.k2)
            .field("growth_beta", &self.growth_beta)
            .field("theta_min", &self.theta_min)
            .finish_non_exhaustive()
    }
}

impl ProfitSpec {
    /// Checks the scalar invariants; function shapes are checked by
    /// [`validate_assumptions`] on sampled grids.
    pub fn validated(self) -> Result<Self> {
        if !(self.k2 > 0.0 && self.k2 < self.k1) {
            return Err(Error::InvalidModel(format!(
                "costs must satisfy 0 < k2 < k1 (got k1 = {}, k2 = {})",
                self.k1, self.k2
            )));
        }
        if !(self.growth_beta > 0.0 && self.growth_beta < 1.0) {
            return Err(Error::InvalidModel("growth exponent must lie in (0, 1)".into()));
        }
        if !(self.theta_min > 0.0) {
            return Err(Error::InvalidModel("theta_min must be positive".into()));
        }
        Ok(self)
    }

    pub fn check_theta(&self, theta: f64) -> Result<()> {
        if theta.is_nan() || theta < self.theta_min {
            return Err(Error::Domain(format!(
                "theta = {theta} is below theta_min = {}",
                self.theta_min
            )));
        }
        Ok(())
    }
}

/// `π(x, θ)`, rejecting `θ < theta_min`.
pub fn eval_profit(spec: &ProfitSpec, x: f64, theta: f64) -> Result<f64> {
    spec.check_theta(theta)?;
    Ok((spec.profit)(x, theta))
}

/// `π_x(x, θ)`, rejecting `θ < theta_min`.
pub fn eval_profit_x(spec: &ProfitSpec, x: f64, theta: f64) -> Result<f64> {
    spec.check_theta(theta)?;
    Ok((spec.profit_x)(x, theta))
}

/// Closed-form benchmark: geometric dynamics `b = −δ_i x`, `σ = σ_i x` on
/// `(0, ∞)` with profit `x^β(θ^{−(1+β)} + κ*)`, `F(m) = m^{1/β}`, `f(x) = x^β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkInstance {
    pub beta: f64,
    pub kappa_star: f64,
    pub delta: Vec<f64>,
    pub sigma: Vec<f64>,
    pub rate_matrix: Vec<Vec<f64>>,
    pub k1: f64,
    pub k2: f64,
    pub theta_min: f64,
}

impl Default for BenchmarkInstance {
    fn default() -> Self {
        Self {
            beta: 0.5,
            kappa_star: 1.0,
            delta: vec![0.5, 1.0],
            sigma: vec![0.2, 0.3],
            rate_matrix: vec![vec![-1.0, 1.0], vec![1.0, -1.0]],
            k1: 1.0,
            k2: 0.5,
            theta_min: 0.05,
        }
    }
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidModel("rate matrix must be square and nonempty".into()));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

impl BenchmarkInstance {
    /// Identical regimes with the given parameters and a symmetric switching rate.
    pub fn symmetric(delta: f64, sigma: f64, rate: f64) -> Self {
        Self {
            delta: vec![delta, delta],
            sigma: vec![sigma, sigma],
            rate_matrix: vec![vec![-rate, rate], vec![rate, -rate]],
            ..Self::default()
        }
    }

    pub fn d(&self) -> usize {
        self.delta.len()
    }

    pub fn model(&self) -> Result<RegimeModel> {
        let d = self.delta.len();
        if self.sigma.len() != d || self.rate_matrix.len() != d {
            return Err(Error::InvalidModel("benchmark parameter lengths disagree".into()));
        }
        if self.delta.iter().chain(&self.sigma).any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidModel("benchmark δ_i and σ_i must be positive".into()));
        }
        let q = matrix_from_rows(&self.rate_matrix)?;
        let delta = Arc::new(self.delta.clone());
        let sigma = Arc::new(self.sigma.clone());
        let coeffs = Coefficients {
            drift: { let dl = delta.clone(); Arc::new(move |x, i| -dl[i] * x) },
            drift_x: { let dl = delta.clone(); Arc::new(move |_, i| -dl[i]) },
            vol: { let s = sigma.clone(); Arc::new(move |x, i| s[i] * x) },
            vol_x: { let s = sigma.clone(); Arc::new(move |_, i| s[i]) },
        };
        let c = self.delta.iter().cloned().fold(f64::INFINITY, f64::min);
        RegimeModel::new(coeffs, q, (0.0, f64::INFINITY), c)
    }

    pub fn profit(&self) -> Result<ProfitSpec> {
        let beta = self.beta;
        let ks = self.kappa_star;
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidModel("benchmark β must lie in (0, 1)".into()));
        }
        if ks < 0.0 {
            return Err(Error::InvalidModel("benchmark κ* must be nonnegative".into()));
        }
        ProfitSpec {
            profit: Arc::new(move |x, th| x.powf(beta) * (th.powf(-(1.0 + beta)) + ks)),
            profit_x: Arc::new(move |x, th| beta * x.powf(beta - 1.0) * (th.powf(-(1.0 + beta)) + ks)),
            k1: self.k1,
            k2: self.k2,
            outer_map: Arc::new(move |m| m.max(0.0).powf(1.0 / beta)),
            inner_map: Arc::new(move |x| x.max(0.0).powf(beta)),
            kappa_limit: Arc::new(move |x| ks * beta * x.powf(beta - 1.0)),
            growth_beta: beta,
            theta_min: self.theta_min,
        }
        .validated()
    }
}

/// Polynomial drift and volatility per regime (ascending coefficients).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialDynamics {
    pub drift: Vec<Vec<f64>>,
    pub vol: Vec<Vec<f64>>,
}

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn poly_deriv(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, &a)| k as f64 * a).collect()
}

impl PolynomialDynamics {
    /// `dissipativity_c = None` estimates `c` as `−max b_x` on a sampled grid.
    pub fn model(
        &self,
        rate_matrix: &[Vec<f64>],
        state_interval: (f64, f64),
        dissipativity_c: Option<f64>,
    ) -> Result<RegimeModel> {
        let d = rate_matrix.len();
        if self.drift.len() != d || self.vol.len() != d {
            return Err(Error::InvalidModel("polynomial coefficient lists must have one entry per regime".into()));
        }
        let q = matrix_from_rows(rate_matrix)?;
        let b = Arc::new(self.drift.clone());
        let bx = Arc::new(self.drift.iter().map(|c| poly_deriv(c)).collect::<Vec<_>>());
        let s = Arc::new(self.vol.clone());
        let sx = Arc::new(self.vol.iter().map(|c| poly_deriv(c)).collect::<Vec<_>>());
        let coeffs = Coefficients {
            drift: { let b = b.clone(); Arc::new(move |x, i| poly_eval(&b[i], x)) },
            drift_x: { let b = bx.clone(); Arc::new(move |x, i| poly_eval(&b[i], x)) },
            vol: { let s = s.clone(); Arc::new(move |x, i| poly_eval(&s[i], x)) },
            vol_x: { let s = sx.clone(); Arc::new(move |x, i| poly_eval(&s[i], x)) },
        };
        let c = match dissipativity_c {
            Some(c) => c,
            None => {
                let pts = search_points(state_interval, 401);
                let worst = (0..d)
                    .flat_map(|i| pts.iter().map(move |&x| (x, i)))
                    .map(|(x, i)| (coeffs.drift_x)(x, i))
                    .fold(f64::NEG_INFINITY, f64::max);
                -worst
            }
        };
        RegimeModel::new(coeffs, q, state_interval, c)
    }
}

/// Sample points strictly inside a possibly unbounded interval. Unbounded
/// sides are covered on a logarithmic scale out to distance `1e6`.
pub fn search_points((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    let n = n.max(3);
    let logs = |n: usize| -> Vec<f64> {
        (0..n).map(|k| 10f64.powf(-6.0 + 12.0 * k as f64 / (n - 1) as f64)).collect()
    };
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => (1..=n).map(|k| lo + (hi - lo) * k as f64 / (n + 1) as f64).collect(),
        (true, false) => logs(n).into_iter().map(|s| lo + s).collect(),
        (false, true) => logs(n).into_iter().rev().map(|s| hi - s).collect(),
        (false, false) => {
            let half = logs(n / 2);
            let mut v: Vec<f64> = half.iter().rev().map(|s| -s).collect();
            v.push(0.0);
            v.extend(half);
            v
        }
    }
}

/// Locates the single `+ → −` sign change of `h` on `pts` and refines it by
/// bisection. Returns `None` if the sign pattern is not of threshold type.
pub fn threshold_root(h: impl Fn(f64) -> f64, pts: &[f64]) -> Option<f64> {
    let vals: Vec<f64> = pts.iter().map(|&x| h(x)).collect();
    let mut changes = 0;
    let mut at = None;
    for k in 0..vals.len().saturating_sub(1) {
        let (a, b) = (vals[k] > 0.0, vals[k + 1] > 0.0);
        if a != b {
            changes += 1;
            if a && !b && at.is_none() {
                at = Some(k);
            }
        }
    }
    if changes != 1 {
        return None;
    }
    let k = at?;
    let (mut a, mut b) = (pts[k], pts[k + 1]);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if h(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Roots of `source(x) + k·b_x(x,i)` for `k = k1` and `k = k2`, per regime.
pub fn threshold_points(
    model: &RegimeModel,
    source: &dyn Fn(f64) -> f64,
    k1: f64,
    k2: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let pts = search_points(model.state_interval(), 4001);
    let mut lo = Vec::with_capacity(model.d());
    let mut hi = Vec::with_capacity(model.d());
    for i in 0..model.d() {
        let xm = threshold_root(|x| source(x) + k1 * model.drift_x(x, i), &pts);
        let xp = threshold_root(|x| source(x) + k2 * model.drift_x(x, i), &pts);
        match (xm, xp) {
            (Some(a), Some(b)) if a < b => {
                lo.push(a);
                hi.push(b);
            }
            _ => {
                return Err(Error::AssumptionViolated(format!(
                    "threshold sign pattern fails in regime {i} (roots {xm:?}, {xp:?})"
                )))
            }
        }
    }
    Ok((lo, hi))
}

/// Sampled sign-change points for one `(regime, θ)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRecord {
    pub regime: usize,
    pub theta: f64,
    pub x_minus: Option<f64>,
    pub x_plus: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionFlags {
    /// `b_x ≤ −c` on the grid.
    pub dissipative: bool,
    /// `σ > 0` on the grid.
    pub positive_vol: bool,
    /// `π(·,θ)` nondecreasing and concave.
    pub profit_shape: bool,
    /// `π_x(x,·)` strictly decreasing.
    pub cross_derivative: bool,
    /// `F`, `f` strictly increasing.
    pub interaction_increasing: bool,
    /// Column sums of `Q` nonpositive.
    pub column_sums: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub thresholds: Vec<ThresholdRecord>,
    pub flags: AssumptionFlags,
    pub warnings: Vec<String>,
    /// Gap between `pQ = 0` and the `κ_i/Σκ_j` formula (zero for symmetric chains).
    pub kappa_formula_gap: f64,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        let f = &self.flags;
        f.dissipative
            && f.positive_vol
            && f.profit_shape
            && f.cross_derivative
            && f.interaction_increasing
            && f.column_sums
            && self.warnings.is_empty()
    }
}

/// Sampled-grid checks of the standing assumptions. Failures are recorded,
/// never fatal.
pub fn validate_assumptions(
    model: &RegimeModel,
    spec: &ProfitSpec,
    grid: &[f64],
    theta_grid: &[f64],
) -> Result<ValidationReport> {
    if grid.len() < 2 || theta_grid.is_empty() {
        return Err(Error::InvalidGrid("validation grids must be nonempty".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(|a, b| a.total_cmp(b));
    let mut thetas = theta_grid.to_vec();
    thetas.sort_by(|a, b| a.total_cmp(b));
    let mut warnings = Vec::new();
    let d = model.d();
    let c = model.dissipativity_c();

    let mut dissipative = true;
    let mut positive_vol = true;
    for i in 0..d {
        for &x in &grid {
            if model.drift_x(x, i) > -c + 1e-12 * c {
                dissipative = false;
            }
            if !(model.vol(x, i) > 0.0) {
                positive_vol = false;
            }
        }
    }

    let mut profit_shape = true;
    let mut cross_derivative = true;
    for &th in &thetas {
        let px: Vec<f64> = grid.iter().map(|&x| (spec.profit_x)(x, th)).collect();
        let p: Vec<f64> = grid.iter().map(|&x| (spec.profit)(x, th)).collect();
        let tol = 1e-12;
        if px.iter().any(|&v| v < -tol)
            || p.windows(2).any(|w| w[1] < w[0] - tol * w[0].abs().max(1.0))
            || px.windows(2).any(|w| w[1] > w[0] + tol * w[0].abs().max(1.0))
        {
            profit_shape = false;
        }
    }
    for &x in &grid {
        let vals: Vec<f64> = thetas.iter().map(|&th| (spec.profit_x)(x, th)).collect();
        if vals.windows(2).any(|w| !(w[1] < w[0])) {
            cross_derivative = false;
        }
    }

    let f_vals: Vec<f64> = grid.iter().map(|&x| (spec.inner_map)(x)).collect();
    let mut m_pts: Vec<f64> = f_vals.iter().map(|v| v.max(0.0)).collect();
    m_pts.sort_by(|a, b| a.total_cmp(b));
    m_pts.dedup();
    let big_f: Vec<f64> = m_pts.iter().map(|&m| (spec.outer_map)(m)).collect();
    let interaction_increasing = f_vals.windows(2).all(|w| w[1] > w[0])
        && big_f.windows(2).all(|w| w[1] > w[0]);

    let column_sums = model.column_sums().iter().all(|&s| s <= 1e-12);

    let mut thresholds = Vec::new();
    for &th in &thetas {
        for i in 0..d {
            let xm = threshold_root(|x| (spec.profit_x)(x, th) + spec.k1 * model.drift_x(x, i), &grid);
            let xp = threshold_root(|x| (spec.profit_x)(x, th) + spec.k2 * model.drift_x(x, i), &grid);
            let ok = matches!((xm, xp), (Some(a), Some(b)) if a < b);
            if !ok {
                warnings.push(format!("threshold sign pattern violated at (i={i}, theta={th})"));
            }
            thresholds.push(ThresholdRecord { regime: i, theta: th, x_minus: xm, x_plus: xp });
        }
    }
    if !dissipative {
        warnings.push("drift derivative exceeds -c on the grid".into());
    }
    if !positive_vol {
        warnings.push("volatility is not positive on the grid".into());
    }
    if !profit_shape {
        warnings.push("profit is not nondecreasing and concave on the grid".into());
    }
    if !cross_derivative {
        warnings.push("profit_x is not strictly decreasing in theta".into());
    }
    if !interaction_increasing {
        warnings.push("interaction maps are not strictly increasing".into());
    }
    if !column_sums {
        warnings.push("a column sum of Q is positive".into());
    }
    let kappa_formula_gap = if d > 1 { kappa_formula_discrepancy(model.rate_matrix())? } else { 0.0 };

    Ok(ValidationReport {
        thresholds,
        flags: AssumptionFlags {
            dissipative,
            positive_vol,
            profit_shape,
            cross_derivative,
            interaction_increasing,
            column_sums,
        },
        warnings,
        kappa_formula_gap,
    })
}
