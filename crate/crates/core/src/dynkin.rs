//! Double-obstacle variational inequality for the auxiliary stopping game.
//!
//! For fixed θ the value `v(·, i)` lies between the obstacles `k2 ≤ v ≤ k1`
//! and satisfies `𝒜v + π_x = 0` where neither obstacle binds, with
//!
//! ```text
//! 𝒜v = ½σ² v'' + (b + σσ_x) v' + b_x v + Σ_{j≠i} q_ij (v_j − v_i).
//! ```
//!
//! The operator is discretized on a uniform grid (central second difference,
//! upwind first difference, implicit potential) and the resulting linear
//! complementarity problem is solved by projected SOR.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{chain_stationary, threshold_points, ProfitSpec, RegimeModel};

/// Uniform truncation grid `x_lo = x_0 < … < x_{n−1} = x_hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_lo: f64,
    pub x_hi: f64,
    pub n: usize,
    pub h: f64,
}

impl Grid {
    pub fn new(x_lo: f64, x_hi: f64, n: usize) -> Result<Self> {
        if !(x_lo.is_finite() && x_hi.is_finite() && x_lo < x_hi) {
            return Err(Error::InvalidGrid(format!("need finite x_lo < x_hi (got {x_lo}, {x_hi})")));
        }
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 nodes (got {n})")));
        }
        Ok(Self { x_lo, x_hi, n, h: (x_hi - x_lo) / (n - 1) as f64 })
    }

    /// Grid over `[lo, hi]` widened by `margin` times its width on each side,
    /// kept strictly inside the state interval.
    pub fn around(model: &RegimeModel, lo: f64, hi: f64, margin: f64, n: usize) -> Result<Self> {
        let w = hi - lo;
        let (sl, sh) = model.state_interval();
        let mut a = lo - margin * w;
        let mut b = hi + margin * w;
        if sl.is_finite() {
            a = a.max(sl + 0.25 * (lo - sl));
        }
        if sh.is_finite() {
            b = b.min(sh - 0.25 * (sh - hi));
        }
        Self::new(a, b, n)
    }

    /// Grid covering `[min_i x_−(i,θ), max_i x_+(i,θ)]` with the given margin.
    pub fn covering(model: &RegimeModel, spec: &ProfitSpec, theta: f64, margin: f64, n: usize) -> Result<Self> {
        spec.check_theta(theta)?;
        let px = spec.profit_x.clone();
        let (lo, hi) = threshold_points(model, &move |x| px(x, theta), spec.k1, spec.k2)?;
        Self::around(model, min(&lo), max(&hi), margin, n)
    }

    /// As [`Grid::covering`] for the auxiliary game driven by `κ`.
    pub fn covering_auxiliary(model: &RegimeModel, spec: &ProfitSpec, margin: f64, n: usize) -> Result<Self> {
        let (lo, hi) = auxiliary_thresholds(model, spec)?;
        Self::around(model, min(&lo), max(&hi), margin, n)
    }

    /// Grid covering every θ in `[theta_lo, theta_hi]`: the thresholds move
    /// monotonically in θ so the two end points suffice.
    pub fn covering_range(
        model: &RegimeModel,
        spec: &ProfitSpec,
        theta_lo: f64,
        theta_hi: f64,
        margin: f64,
        n: usize,
    ) -> Result<Self> {
        let a = Self::covering(model, spec, theta_hi, 0.0, 3)?;
        let b = Self::covering(model, spec, theta_lo, 0.0, 3)?;
        Self::around(model, a.x_lo.min(b.x_lo), a.x_hi.max(b.x_hi), margin, n)
    }

    /// Truncation adapted to the free boundaries at `θ`.
    ///
    /// The boundaries satisfy `α_i ≤ x_−(i,θ)` and `β_i ≥ x_+(i,θ)`, so the
    /// threshold points only give a starting interval. It is widened on
    /// whichever side the stopping region is cut off, using a coarse probe
    /// grid, and the result is the probe boundaries widened by `margin`.
    pub fn fitted(
        model: &RegimeModel,
        spec: &ProfitSpec,
        theta: f64,
        margin: f64,
        n: usize,
        opts: &SolverOptions,
    ) -> Result<Self> {
        spec.check_theta(theta)?;
        let px = spec.profit_x.clone();
        let source = move |x: f64| px(x, theta);
        let start = Self::covering(model, spec, theta, 0.5, PROBE_NODES)?;
        fit(model, &source, start, spec.k1, spec.k2, margin, n, opts)
    }

    /// As [`Grid::fitted`] for the auxiliary game.
    pub fn fitted_auxiliary(
        model: &RegimeModel,
        spec: &ProfitSpec,
        margin: f64,
        n: usize,
        opts: &SolverOptions,
    ) -> Result<Self> {
        let kappa = spec.kappa_limit.clone();
        let source = move |x: f64| kappa(x);
        let start = Self::covering_auxiliary(model, spec, 0.5, PROBE_NODES)?;
        fit(model, &source, start, spec.k1, spec.k2, margin, n, opts)
    }

    #[inline]
    pub fn x(&self, k: usize) -> f64 {
        if k + 1 == self.n {
            self.x_hi
        } else {
            self.x_lo + k as f64 * self.h
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.x(k)).collect()
    }

    /// Same interval with `2(n−1)+1` nodes.
    pub fn refined(&self) -> Self {
        Self::new(self.x_lo, self.x_hi, 2 * (self.n - 1) + 1).expect("refinement of a valid grid")
    }

    /// Cell index `k` with `x_k ≤ x ≤ x_{k+1}` (clamped to the grid).
    fn cell(&self, x: f64) -> (usize, f64) {
        let s = ((x - self.x_lo) / self.h).clamp(0.0, (self.n - 1) as f64);
        let k = (s.floor() as usize).min(self.n - 2);
        (k, x.clamp(self.x_lo, self.x_hi) - self.x(k))
    }
}

const PROBE_NODES: usize = 801;
const MAX_WIDENINGS: usize = 40;

#[allow(clippy::too_many_arguments)]
fn fit(
    model: &RegimeModel,
    source: &dyn Fn(f64) -> f64,
    start: Grid,
    k1: f64,
    k2: f64,
    margin: f64,
    n: usize,
    opts: &SolverOptions,
) -> Result<Grid> {
    let (sl, _) = model.state_interval();
    let probe_opts = SolverOptions { tol: opts.tol.max(1e-8), ..*opts };
    let mut g = start;
    for _ in 0..MAX_WIDENINGS {
        let (v, residual, sweeps) = solve_obstacle(model, source, g, k1, k2, &probe_opts)?;
        match finish(model, f64::NAN, g, v, residual, sweeps, k1, k2, &probe_opts) {
            Ok(sol) => {
                // Pad by two probe cells so the fine boundaries stay inside.
                let lo = min(&sol.alpha) - 2.0 * g.h;
                let hi = max(&sol.beta) + 2.0 * g.h;
                return Grid::around(model, lo.max(g.x_lo), hi.min(g.x_hi), margin, n);
            }
            Err(Error::EnlargeTruncation { side, .. }) => {
                let w = g.x_hi - g.x_lo;
                g = if side == "lower" {
                    let lo = if sl.is_finite() { sl + 0.25 * (g.x_lo - sl) } else { g.x_lo - w };
                    Grid::new(lo, g.x_hi, g.n)?
                } else {
                    Grid::new(g.x_lo, g.x_hi + w, g.n)?
                };
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::InvalidGrid("could not fit a truncation around the stopping regions".into()))
}

pub(crate) fn min(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::INFINITY, f64::min)
}

pub(crate) fn max(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn auxiliary_thresholds(model: &RegimeModel, spec: &ProfitSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let kappa = spec.kappa_limit.clone();
    threshold_points(model, &move |x| kappa(x), spec.k1, spec.k2).map_err(|e| match e {
        Error::AssumptionViolated(msg) => {
            Error::AssumptionViolated(format!("limit slope kappa has no threshold structure: {msg}"))
        }
        e => e,
    })
}

/// Projected SOR settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relaxation factor in `[1, 1.8]`.
    pub omega: f64,
    /// Bound on the diagonally scaled complementarity residual.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Contact tolerance used when extracting the free boundaries.
    pub boundary_tol: f64,
    /// Warm start from a solve on the grid with half as many cells.
    pub nested: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { omega: 1.5, tol: 1e-9, max_sweeps: 2_000_000, boundary_tol: 1e-7, nested: true }
    }
}

impl SolverOptions {
    fn check(&self) -> Result<()> {
        if !(1.0..=1.8).contains(&self.omega) {
            return Err(Error::InvalidModel(format!("omega = {} outside [1, 1.8]", self.omega)));
        }
        if !(self.tol > 0.0) || !(self.boundary_tol > 0.0) {
            return Err(Error::InvalidModel("solver tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Grid solution of the obstacle problem at one θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynkinSolution {
    pub theta: f64,
    pub grid: Grid,
    pub d: usize,
    /// Node-major values, `v[k * d + i] = v(x_k, i)`.
    pub v: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// `λ(θ, i)`; absent for the auxiliary game.
    pub lam: Option<Vec<f64>>,
    pub lam_bar: Option<f64>,
    /// `K_i = −∫_{α_i}^{β_i} v(y, i) dy`.
    #[serde(rename = "K")]
    pub k: Vec<f64>,
    pub residual: f64,
    pub sweeps: usize,
}

impl DynkinSolution {
    #[inline]
    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.v[k * self.d + i]
    }

    pub fn regime_values(&self, i: usize) -> Vec<f64> {
        (0..self.grid.n).map(|k| self.value(k, i)).collect()
    }

    /// Piecewise-linear interpolant of `v(·, i)`.
    pub fn interpolate(&self, x: f64, i: usize) -> f64 {
        let (k, t) = self.grid.cell(x);
        let (a, b) = (self.value(k, i), self.value(k + 1, i));
        a + (b - a) * t / self.grid.h
    }

    /// Signed integral `∫_a^b v(y, i) dy` of the piecewise-linear interpolant.
    pub fn integral(&self, i: usize, a: f64, b: f64) -> f64 {
        integrate_linear(&self.grid, |k| self.value(k, i), b) - integrate_linear(&self.grid, |k| self.value(k, i), a)
    }

    /// Potential `U(x, i) = K_i + ∫_{α_i}^x v(y, i) dy`.
    pub fn potential(&self, x: f64, i: usize) -> f64 {
        self.k[i] + self.integral(i, self.alpha[i], x)
    }
}

/// `∫_{x_lo}^x` of the piecewise-linear interpolant of `vals`.
fn integrate_linear(grid: &Grid, vals: impl Fn(usize) -> f64, x: f64) -> f64 {
    let (kc, t) = grid.cell(x);
    let h = grid.h;
    let mut acc = 0.0;
    for k in 0..kc {
        acc += 0.5 * h * (vals(k) + vals(k + 1));
    }
    let (a, b) = (vals(kc), vals(kc + 1));
    acc + t * a + 0.5 * t * t * (b - a) / h
}

#[derive(Clone, Copy, Default)]
struct Stencil {
    lo: f64,
    up: f64,
    diag: f64,
    g: f64,
}

/// Discrete operator `v ↦ 𝒜v + g` with fixed source `g`.
pub struct DiscreteOperator {
    grid: Grid,
    d: usize,
    stencil: Vec<Stencil>,
    q: Vec<f64>,
    k1: f64,
    k2: f64,
}

impl DiscreteOperator {
    pub fn new(model: &RegimeModel, source: &dyn Fn(f64) -> f64, grid: Grid, k1: f64, k2: f64) -> Self {
        let d = model.d();
        let h = grid.h;
        let mut stencil = vec![Stencil::default(); grid.n * d];
        let q: Vec<f64> = (0..d * d).map(|m| model.rate(m / d, m % d)).collect();
        for k in 1..grid.n - 1 {
            let x = grid.x(k);
            let g = source(x);
            for i in 0..d {
                let s = model.vol(x, i);
                let a = 0.5 * s * s / (h * h);
                let m = model.hat_drift(x, i);
                let (mp, mm) = (m.max(0.0) / h, (-m).max(0.0) / h);
                let qii: f64 = -(0..d).filter(|&j| j != i).map(|j| q[i * d + j]).sum::<f64>();
                stencil[k * d + i] = Stencil {
                    lo: a + mm,
                    up: a + mp,
                    diag: -2.0 * a - mp - mm + model.drift_x(x, i) + qii,
                    g,
                };
            }
        }
        Self { grid, d, stencil, q, k1, k2 }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Off-diagonal part plus source at `(k, i)`.
    #[inline]
    fn partial(&self, v: &[f64], k: usize, i: usize) -> f64 {
        let d = self.d;
        let idx = k * d + i;
        let s = &self.stencil[idx];
        let mut acc = s.lo * v[idx - d] + s.up * v[idx + d] + s.g;
        for j in 0..d {
            if j != i {
                acc += self.q[i * d + j] * v[k * d + j];
            }
        }
        acc
    }

    /// `(𝒜v + g)(x_k, i)` at an interior node.
    pub fn apply(&self, v: &[f64], k: usize, i: usize) -> f64 {
        self.partial(v, k, i) + self.stencil[k * self.d + i].diag * v[k * self.d + i]
    }

    /// Magnitude of the diagonal coefficient, the natural scale of `𝒜v + g`.
    pub fn scale(&self, k: usize, i: usize) -> f64 {
        self.stencil[k * self.d + i].diag.abs()
    }

    /// Max over interior nodes of `|clamp(v_GS, k2, k1) − v|`, which vanishes
    /// exactly when the discrete complementarity conditions hold.
    pub fn residual(&self, v: &[f64]) -> f64 {
        let d = self.d;
        let mut r: f64 = 0.0;
        for k in 1..self.grid.n - 1 {
            for i in 0..d {
                let gs = -self.partial(v, k, i) / self.stencil[k * d + i].diag;
                r = r.max((gs.clamp(self.k2, self.k1) - v[k * d + i]).abs());
            }
        }
        r
    }

    fn initial_guess(&self, model: &RegimeModel) -> Vec<f64> {
        let d = self.d;
        let n = self.grid.n;
        let mut v = vec![0.0; n * d];
        for k in 0..n {
            let x = self.grid.x(k);
            for i in 0..d {
                v[k * d + i] = if k == 0 {
                    self.k1
                } else if k == n - 1 {
                    self.k2
                } else {
                    (self.stencil[k * d + i].g / -model.drift_x(x, i)).clamp(self.k2, self.k1)
                };
            }
        }
        v
    }

    /// Projected SOR from `v`; returns `(residual, sweeps)`.
    ///
    /// Over-relaxation is not guaranteed to converge on rows dominated by the
    /// upwind drift term (small σ). If the sweep change has not reached a new
    /// minimum for `STALL_SWEEPS` sweeps, the iteration continues with ω = 1,
    /// projected Gauss–Seidel, which converges for these diagonally dominant
    /// M-matrices.
    fn psor(&self, v: &mut [f64], omega: f64, tol: f64, max_sweeps: usize) -> Result<(f64, usize)> {
        const STALL_SWEEPS: usize = 1000;
        let d = self.d;
        let n = self.grid.n;
        let (k1, k2) = (self.k1, self.k2);
        let inv: Vec<f64> = self.stencil.iter().map(|s| if s.diag != 0.0 { 1.0 / s.diag } else { 0.0 }).collect();
        let mut omega = omega;
        let mut last = f64::INFINITY;
        let (mut best, mut since_best) = (f64::INFINITY, 0);
        for sweep in 1..=max_sweeps {
            let mut change: f64 = 0.0;
            for k in 1..n - 1 {
                for i in 0..d {
                    let idx = k * d + i;
                    let gs = -self.partial(v, k, i) * inv[idx];
                    let old = v[idx];
                    change = change.max((gs.clamp(k2, k1) - old).abs());
                    v[idx] = (old + omega * (gs - old)).clamp(k2, k1);
                }
            }
            last = change;
            if change < best {
                best = change;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= STALL_SWEEPS && omega > 1.0 {
                    omega = 1.0;
                    since_best = 0;
                }
            }
            if change < tol {
                let r = self.residual(v);
                if r <= tol {
                    return Ok((r, sweep));
                }
            }
        }
        Err(Error::NoConvergence { sweeps: max_sweeps, residual: last })
    }
}

/// Solves the obstacle problem with source `g`; returns `(v, residual, sweeps)`.
fn solve_obstacle(
    model: &RegimeModel,
    source: &dyn Fn(f64) -> f64,
    grid: Grid,
    k1: f64,
    k2: f64,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, f64, usize)> {
    opts.check()?;
    let op = DiscreteOperator::new(model, source, grid, k1, k2);
    let d = model.d();
    let mut v = if opts.nested && grid.n > 257 {
        let coarse = Grid::new(grid.x_lo, grid.x_hi, grid.n.div_ceil(2))?;
        let coarse_opts = SolverOptions { tol: opts.tol.max(1e-7), ..*opts };
        let (vc, _, _) = solve_obstacle(model, source, coarse, k1, k2, &coarse_opts)?;
        let mut v = vec![0.0; grid.n * d];
        for k in 0..grid.n {
            let (kc, t) = coarse.cell(grid.x(k));
            let w = t / coarse.h;
            for i in 0..d {
                v[k * d + i] = ((1.0 - w) * vc[kc * d + i] + w * vc[(kc + 1) * d + i]).clamp(k2, k1);
            }
        }
        for i in 0..d {
            v[i] = k1;
            v[(grid.n - 1) * d + i] = k2;
        }
        v
    } else {
        op.initial_guess(model)
    };
    let (residual, sweeps) = op.psor(&mut v, opts.omega, opts.tol, opts.max_sweeps)?;
    Ok((v, residual, sweeps))
}

/// Free boundaries from grid values: `α_i` is the crossing of level `k1 − tol`
/// after the innermost lower contact node, `β_i` the crossing of `k2 + tol`
/// before the innermost upper contact node.
pub fn extract_boundaries(
    v: &[f64],
    grid: &Grid,
    d: usize,
    k1: f64,
    k2: f64,
    tol: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = grid.n;
    if v.len() != n * d {
        return Err(Error::InvalidGrid("value array does not match the grid".into()));
    }
    let mut alpha = Vec::with_capacity(d);
    let mut beta = Vec::with_capacity(d);
    let at = |k: usize, i: usize| v[k * d + i];
    for i in 0..d {
        let hi_level = k1 - tol;
        let lo_level = k2 + tol;
        let ka = (0..n).rev().find(|&k| at(k, i) >= hi_level);
        let kb = (0..n).find(|&k| at(k, i) <= lo_level);
        let (ka, kb) = match (ka, kb) {
            (Some(a), Some(b)) => (a, b),
            (None, _) => return Err(Error::EmptyStoppingRegion { regime: i, side: "lower" }),
            (_, None) => return Err(Error::EmptyStoppingRegion { regime: i, side: "upper" }),
        };
        if ka + 1 >= n {
            return Err(Error::EmptyStoppingRegion { regime: i, side: "upper" });
        }
        if kb == 0 {
            return Err(Error::EmptyStoppingRegion { regime: i, side: "lower" });
        }
        let (va, vn) = (at(ka, i), at(ka + 1, i));
        let a = grid.x(ka) + grid.h * (va - hi_level) / (va - vn);
        let (vb, vp) = (at(kb, i), at(kb - 1, i));
        let b = grid.x(kb) - grid.h * (lo_level - vb) / (vp - vb);
        if !(a < b) {
            return Err(Error::AssumptionViolated(format!(
                "free boundaries cross in regime {i} (alpha = {a}, beta = {b})"
            )));
        }
        alpha.push(a);
        beta.push(b);
    }
    Ok((alpha, beta))
}

fn integrals(sol: &DynkinSolution) -> Vec<f64> {
    (0..sol.d).map(|i| -sol.integral(i, sol.alpha[i], sol.beta[i])).collect()
}

/// Ergodic constants
/// `λ_i = Σ_{j≠i} q_ij (∫_{α_j}^{α_i} v_j + K_j − K_i) + b(α_i,i) k1 + π(α_i,θ)`
/// and `λ̄ = Σ_i p(i) λ_i`.
///
/// The `K_j − K_i` orientation is the one for which
/// `U(x,i) = K_i + ∫_{α_i}^x v_i` satisfies `ℒU + π = λ_i` on `(α_i, β_i)`.
/// `λ̄` does not depend on it since `pQ = 0`.
pub fn compute_lambda(
    sol: &DynkinSolution,
    model: &RegimeModel,
    spec: &ProfitSpec,
    theta: f64,
) -> Result<(Vec<f64>, f64)> {
    spec.check_theta(theta)?;
    let d = sol.d;
    let kk = integrals(sol);
    let mut lam = Vec::with_capacity(d);
    for i in 0..d {
        let ai = sol.alpha[i];
        let mut acc = 0.0;
        for j in 0..d {
            if j != i {
                acc += model.rate(i, j) * (sol.integral(j, sol.alpha[j], ai) + kk[j] - kk[i]);
            }
        }
        lam.push(acc + model.drift(ai, i) * spec.k1 + (spec.profit)(ai, theta));
    }
    let p = chain_stationary(model.rate_matrix())?;
    let lam_bar = p.iter().zip(&lam).map(|(a, b)| a * b).sum();
    Ok((lam, lam_bar))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    model: &RegimeModel,
    theta: f64,
    grid: Grid,
    v: Vec<f64>,
    residual: f64,
    sweeps: usize,
    k1: f64,
    k2: f64,
    opts: &SolverOptions,
) -> Result<DynkinSolution> {
    let d = model.d();
    let (alpha, beta) = extract_boundaries(&v, &grid, d, k1, k2, opts.boundary_tol).map_err(|e| match e {
        Error::EmptyStoppingRegion { regime, side } => Error::EnlargeTruncation { regime, side },
        e => e,
    })?;
    // Contact only at the artificial boundary nodes means the true stopping
    // region lies outside the truncation.
    for i in 0..d {
        if alpha[i] < grid.x_lo + grid.h {
            return Err(Error::EnlargeTruncation { regime: i, side: "lower" });
        }
        if beta[i] > grid.x_hi - grid.h {
            return Err(Error::EnlargeTruncation { regime: i, side: "upper" });
        }
    }
    let mut sol = DynkinSolution {
        theta,
        grid,
        d,
        v,
        alpha,
        beta,
        lam: None,
        lam_bar: None,
        k: vec![],
        residual,
        sweeps,
    };
    sol.k = integrals(&sol);
    Ok(sol)
}

/// Solves the obstacle problem at `θ` and computes the ergodic constants.
pub fn solve_vi(
    model: &RegimeModel,
    spec: &ProfitSpec,
    theta: f64,
    grid: Grid,
    opts: &SolverOptions,
) -> Result<DynkinSolution> {
    spec.check_theta(theta)?;
    let px = spec.profit_x.clone();
    let source = move |x: f64| px(x, theta);
    let (v, residual, sweeps) = solve_obstacle(model, &source, grid, spec.k1, spec.k2, opts)?;
    let mut sol = finish(model, theta, grid, v, residual, sweeps, spec.k1, spec.k2, opts)?;
    let (lam, lam_bar) = compute_lambda(&sol, model, spec, theta)?;
    sol.lam = Some(lam);
    sol.lam_bar = Some(lam_bar);
    Ok(sol)
}

/// Obstacle problem with `π_x` replaced by the limit slope `κ`; its
/// boundaries bound `α_i(θ)` and `β_i(θ)` from below for every θ.
pub fn solve_auxiliary_vi(
    model: &RegimeModel,
    spec: &ProfitSpec,
    grid: Grid,
    opts: &SolverOptions,
) -> Result<DynkinSolution> {
    auxiliary_thresholds(model, spec)?;
    let kappa = spec.kappa_limit.clone();
    let source = move |x: f64| kappa(x);
    let (v, residual, sweeps) = solve_obstacle(model, &source, grid, spec.k1, spec.k2, opts)?;
    finish(model, f64::INFINITY, grid, v, residual, sweeps, spec.k1, spec.k2, opts)
}
