//! Reflected regime-switching paths and Monte Carlo oracles.
//!
//! Production paths use an Euler step followed by projection onto the band of
//! the new regime, crediting the overshoot to `ξ⁺` or `ξ⁻`. The explicit
//! two-sided Skorokhod map [`gamma_map`] and its Picard iteration
//! [`picard_skorokhod`] are kept as independent constructions of the same path.
//!
//! Randomness: every path owns a ChaCha8 stream selected by `(seed, stream)`,
//! and each Euler step consumes one standard normal followed by one uniform
//! (for the chain transition). Results do not depend on scheduling.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ProfitSpec, RegimeModel};

/// Generator for stream `stream` of run `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Pairwise (cascade) summation; the result depends only on the order of `v`.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub horizon: f64,
}

impl MCEstimate {
    pub fn from_samples(samples: &[f64], horizon: f64) -> Self {
        let n = samples.len();
        let mean = pairwise_sum(samples) / n as f64;
        let std_error = if n > 1 {
            let dev: Vec<f64> = samples.iter().map(|s| (s - mean) * (s - mean)).collect();
            (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std_error, n_samples: n, horizon }
    }

    /// `mean ± z · std_error`.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (self.mean - z * self.std_error, self.mean + z * self.std_error)
    }
}

/// One-step chain transitions from `P = exp(QΔt)`.
#[derive(Debug, Clone)]
pub struct ChainKernel {
    cum: Vec<Vec<f64>>,
}

impl ChainKernel {
    pub fn new(q: &DMatrix<f64>, dt: f64) -> Self {
        let p = (q * dt).exp();
        let d = q.nrows();
        let cum = (0..d)
            .map(|i| {
                let row: Vec<f64> = (0..d).map(|j| p[(i, j)].max(0.0)).collect();
                let total: f64 = row.iter().sum();
                let mut acc = 0.0;
                row.iter()
                    .map(|v| {
                        acc += v / total;
                        acc
                    })
                    .collect()
            })
            .collect();
        Self { cum }
    }

    #[inline]
    pub fn next(&self, y: usize, u: f64) -> usize {
        let row = &self.cum[y];
        row.iter().position(|&c| u < c).unwrap_or(row.len() - 1)
    }
}

/// Pre-drawn noise for one path: per step a normal `z` and a uniform `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub dt: f64,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
}

impl NoisePath {
    pub fn draw(steps: usize, dt: f64, seed: u64, stream: u64) -> Self {
        let mut rng = stream_rng(seed, stream);
        let mut z = Vec::with_capacity(steps);
        let mut u = Vec::with_capacity(steps);
        for _ in 0..steps {
            z.push(rng.sample(StandardNormal));
            u.push(rng.gen::<f64>());
        }
        Self { dt, z, u }
    }

    pub fn steps(&self) -> usize {
        self.z.len()
    }

    /// Regime path `y_0 = i0, y_{k+1} = kernel(y_k, u_k)`.
    pub fn regimes(&self, model: &RegimeModel, i0: usize) -> Vec<usize> {
        let kernel = ChainKernel::new(model.rate_matrix(), self.dt);
        let mut y = Vec::with_capacity(self.steps() + 1);
        y.push(i0);
        for &u in &self.u {
            let last = *y.last().unwrap();
            y.push(kernel.next(last, u));
        }
        y
    }
}

fn check_step(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("time step must be positive (got {dt})")));
    }
    if !(horizon > 0.0) {
        return Err(Error::Domain(format!("horizon must be positive (got {horizon})")));
    }
    Ok((horizon / dt).round().max(1.0) as usize)
}

fn check_band(model: &RegimeModel, alpha: &[f64], beta: &[f64]) -> Result<()> {
    if alpha.len() != model.d() || beta.len() != model.d() {
        return Err(Error::InvalidModel("barrier vectors must have one entry per regime".into()));
    }
    if alpha.iter().zip(beta).any(|(a, b)| !(a < b)) {
        return Err(Error::InvalidModel("barriers must satisfy alpha < beta".into()));
    }
    Ok(())
}

/// Euler step plus projection onto the band of the new regime.
#[derive(Debug, Clone)]
pub struct Reflector<'a> {
    model: &'a RegimeModel,
    alpha: &'a [f64],
    beta: &'a [f64],
    kernel: ChainKernel,
    dt: f64,
    sqdt: f64,
}

/// Result of one reflected step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub x: f64,
    pub y: usize,
    pub dxi_plus: f64,
    pub dxi_minus: f64,
}

impl<'a> Reflector<'a> {
    pub fn new(model: &'a RegimeModel, alpha: &'a [f64], beta: &'a [f64], dt: f64) -> Result<Self> {
        check_band(model, alpha, beta)?;
        check_step(1.0, dt)?;
        Ok(Self { model, alpha, beta, kernel: ChainKernel::new(model.rate_matrix(), dt), dt, sqdt: dt.sqrt() })
    }

    #[inline]
    pub fn raw(&self, x: f64, y: usize, z: f64) -> f64 {
        x + self.model.drift(x, y) * self.dt + self.model.vol(x, y) * self.sqdt * z
    }

    #[inline]
    pub fn next_regime(&self, y: usize, u: f64) -> usize {
        self.kernel.next(y, u)
    }

    #[inline]
    pub fn project(&self, x: f64, y: usize) -> Step {
        let (a, b) = (self.alpha[y], self.beta[y]);
        if x < a {
            Step { x: a, y, dxi_plus: a - x, dxi_minus: 0.0 }
        } else if x > b {
            Step { x: b, y, dxi_plus: 0.0, dxi_minus: x - b }
        } else {
            Step { x, y, dxi_plus: 0.0, dxi_minus: 0.0 }
        }
    }

    #[inline]
    pub fn step(&self, x: f64, y: usize, z: f64, u: f64) -> Step {
        let pre = self.raw(x, y, z);
        self.project(pre, self.next_regime(y, u))
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

/// Recorded reflected path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathBundle {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<usize>,
    pub xi_plus: Vec<f64>,
    pub xi_minus: Vec<f64>,
    pub seed: u64,
    pub dt: f64,
}

impl PathBundle {
    /// Gaps between successive arrivals at the lower barrier `α_y`; these are
    /// the cycle lengths of the regenerative structure. The segment before
    /// the first arrival is not a cycle and is dropped.
    pub fn return_times(&self, alpha: &[f64]) -> Vec<f64> {
        let on = |k: usize| self.x[k] == alpha[self.y[k]];
        let mut last = None;
        let mut out = Vec::new();
        for k in 0..self.x.len() {
            if on(k) && (k == 0 || !on(k - 1)) {
                if let Some(t0) = last {
                    out.push(self.times[k] - t0);
                }
                last = Some(self.times[k]);
            }
        }
        out
    }
}

/// Projection scheme driven by given noise; the first step projects an
/// initial state that lies outside its band.
pub fn reflect_with_noise(
    model: &RegimeModel,
    alpha: &[f64],
    beta: &[f64],
    x0: f64,
    i0: usize,
    noise: &NoisePath,
) -> Result<PathBundle> {
    let r = Reflector::new(model, alpha, beta, noise.dt)?;
    if i0 >= model.d() {
        return Err(Error::InvalidModel(format!("initial regime {i0} out of range")));
    }
    let n = noise.steps();
    let mut out = PathBundle {
        times: Vec::with_capacity(n + 1),
        x: Vec::with_capacity(n + 1),
        y: Vec::with_capacity(n + 1),
        xi_plus: Vec::with_capacity(n + 1),
        xi_minus: Vec::with_capacity(n + 1),
        seed: 0,
        dt: noise.dt,
    };
    let (mut x, mut y, mut xp, mut xm) = (x0, i0, 0.0, 0.0);
    out.times.push(0.0);
    out.x.push(x);
    out.y.push(y);
    out.xi_plus.push(0.0);
    out.xi_minus.push(0.0);
    for k in 0..n {
        let s = r.step(x, y, noise.z[k], noise.u[k]);
        x = s.x;
        y = s.y;
        xp += s.dxi_plus;
        xm += s.dxi_minus;
        out.times.push((k + 1) as f64 * noise.dt);
        out.x.push(x);
        out.y.push(y);
        out.xi_plus.push(xp);
        out.xi_minus.push(xm);
    }
    Ok(out)
}

/// Reflected path on `[0, horizon]` with noise from stream 0 of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_reflected(
    model: &RegimeModel,
    alpha: &[f64],
    beta: &[f64],
    x0: f64,
    i0: usize,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<PathBundle> {
    let n = check_step(horizon, dt)?;
    check_band(model, alpha, beta)?;
    let noise = NoisePath::draw(n, dt, seed, 0);
    let mut out = reflect_with_noise(model, alpha, beta, x0, i0, &noise)?;
    out.seed = seed;
    Ok(out)
}

/// Output of the explicit reflection map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reflection {
    pub x: Vec<f64>,
    pub xi_plus: Vec<f64>,
    pub xi_minus: Vec<f64>,
}

/// Discrete two-sided Skorokhod map with regime-dependent barriers,
/// `Γ(ψ)_k = ψ_k − Ξ_k` with
///
/// ```text
/// Ξ_k = max{ (ψ_0 − β_{y_0})⁺ ∧ min_{u≤k}(ψ_u − α_{y_u}),
///            max_{s≤k} [ (ψ_s − β_{y_s}) ∧ min_{s≤u≤k}(ψ_u − α_{y_u}) ] },
/// ```
///
/// evaluated in O(n) through the recursion
/// `S_k = min(max(S_{k−1}, ψ_k − β_{y_k}), ψ_k − α_{y_k})`.
pub fn gamma_map(raw: &[f64], y: &[usize], alpha: &[f64], beta: &[f64]) -> Reflection {
    assert_eq!(raw.len(), y.len(), "path and regime sequence differ in length");
    let n = raw.len();
    let mut out = Reflection { x: Vec::with_capacity(n), xi_plus: Vec::with_capacity(n), xi_minus: Vec::with_capacity(n) };
    if n == 0 {
        return out;
    }
    let first = (raw[0] - beta[y[0]]).max(0.0);
    let mut run_min = f64::INFINITY;
    let mut s = f64::NEG_INFINITY;
    let (mut prev, mut xp, mut xm) = (0.0, 0.0, 0.0);
    for k in 0..n {
        let lo = raw[k] - alpha[y[k]];
        let hi = raw[k] - beta[y[k]];
        run_min = run_min.min(lo);
        s = s.max(hi).min(lo);
        let xi = first.min(run_min).max(s);
        let dxi = xi - prev;
        if dxi < 0.0 {
            xp -= dxi;
        } else {
            xm += dxi;
        }
        prev = xi;
        out.x.push(raw[k] - xi);
        out.xi_plus.push(xp);
        out.xi_minus.push(xm);
    }
    out
}

/// Picard iterates of `X ↦ Γ(I(X))` on fixed noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardResult {
    pub path: Reflection,
    pub y: Vec<usize>,
    /// Sup-norm change of each iterate.
    pub changes: Vec<f64>,
}

/// Unreflected Euler integral `I(X)_k = x0 + Σ_{m<k} (b(X_m) Δt + σ(X_m) √Δt z_m)`.
fn euler_integral(model: &RegimeModel, x: &[f64], y: &[usize], x0: f64, noise: &NoisePath) -> Vec<f64> {
    let sq = noise.dt.sqrt();
    let mut out = Vec::with_capacity(x.len());
    let mut acc = x0;
    out.push(acc);
    for m in 0..x.len() - 1 {
        acc += model.drift(x[m], y[m]) * noise.dt + model.vol(x[m], y[m]) * sq * noise.z[m];
        out.push(acc);
    }
    out
}

/// Relative change below which Picard iterates are considered converged.
const PICARD_FLOOR: f64 = 1e-13;

/// Solves the reflection problem on fixed noise by Picard iteration,
/// starting from the constant path `x0`. Stops after `n_iter` iterations or
/// once the change is at rounding level.
pub fn picard_skorokhod(
    model: &RegimeModel,
    alpha: &[f64],
    beta: &[f64],
    x0: f64,
    i0: usize,
    noise: &NoisePath,
    n_iter: usize,
) -> Result<PicardResult> {
    check_band(model, alpha, beta)?;
    if n_iter == 0 {
        return Err(Error::Domain("need at least one Picard iteration".into()));
    }
    let y = noise.regimes(model, i0);
    let mut x = vec![x0; y.len()];
    let mut changes = Vec::new();
    let mut growth = 0;
    let mut path = Reflection { x: x.clone(), xi_plus: vec![0.0; y.len()], xi_minus: vec![0.0; y.len()] };
    for _ in 0..n_iter {
        let raw = euler_integral(model, &x, &y, x0, noise);
        path = gamma_map(&raw, &y, alpha, beta);
        let change = path.x.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if let Some(&last) = changes.last() {
            growth = if change > last { growth + 1 } else { 0 };
        }
        changes.push(change);
        if growth >= 3 {
            return Err(Error::NoContraction { changes });
        }
        x.clone_from(&path.x);
        let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if change <= PICARD_FLOOR * scale {
            break;
        }
    }
    Ok(PicardResult { path, y, changes })
}

/// Burn-in and path layout of an ergodic estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErgodicOptions {
    pub horizon: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Fraction of the horizon discarded before averaging.
    pub burn_in: f64,
}

impl Default for ErgodicOptions {
    fn default() -> Self {
        Self { horizon: 1000.0, dt: 1e-3, n_paths: 16, seed: 0, burn_in: 0.1 }
    }
}

/// Draws the initial regime from the chain's stationary law and starts at
/// the middle of its band.
pub(crate) fn initial_state(
    rng: &mut ChaCha8Rng,
    p: &[f64],
    alpha: &[f64],
    beta: &[f64],
) -> (f64, usize) {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut i0 = p.len() - 1;
    for (i, w) in p.iter().enumerate() {
        acc += w;
        if u < acc {
            i0 = i;
            break;
        }
    }
    (0.5 * (alpha[i0] + beta[i0]), i0)
}

/// Long-run average payoff `(1/T)(∫π(X,θ)dt − k1 ξ⁺ + k2 ξ⁻)` of the
/// barrier policy, after burn-in, averaged over independent paths.
pub fn ergodic_payoff_estimate(
    model: &RegimeModel,
    spec: &ProfitSpec,
    theta: f64,
    alpha: &[f64],
    beta: &[f64],
    opts: &ErgodicOptions,
) -> Result<MCEstimate> {
    spec.check_theta(theta)?;
    let n = check_step(opts.horizon, opts.dt)?;
    let r = Reflector::new(model, alpha, beta, opts.dt)?;
    if opts.n_paths == 0 || !(0.0..1.0).contains(&opts.burn_in) {
        return Err(Error::Domain("need n_paths ≥ 1 and burn-in fraction in [0, 1)".into()));
    }
    let p = crate::model::chain_stationary(model.rate_matrix())?;
    let burn = ((n as f64) * opts.burn_in).round() as usize;
    let span = (n - burn) as f64 * opts.dt;
    let samples: Vec<f64> = (0..opts.n_paths as u64)
        .into_par_iter()
        .map(|path| {
            let mut rng = stream_rng(opts.seed, path);
            let (mut x, mut y) = initial_state(&mut rng, &p, alpha, beta);
            let mut acc = Vec::new();
            let mut block = 0.0;
            for k in 0..n {
                if k >= burn {
                    block += (spec.profit)(x, theta) * opts.dt;
                }
                let z: f64 = rng.sample(StandardNormal);
                let u: f64 = rng.gen();
                let s = r.step(x, y, z, u);
                if k >= burn {
                    block += -spec.k1 * s.dxi_plus + spec.k2 * s.dxi_minus;
                }
                x = s.x;
                y = s.y;
                if (k + 1) % 4096 == 0 {
                    acc.push(block);
                    block = 0.0;
                }
            }
            acc.push(block);
            pairwise_sum(&acc) / span
        })
        .collect();
    Ok(MCEstimate::from_samples(&samples, opts.horizon))
}

/// Monte Carlo evaluation of the stopping functional for hitting-time
/// strategies: the auxiliary state `X̂` (drift `b + σσ_x`) is stopped when it
/// falls to `stop_alpha[y]` (payoff `k1`) or rises to `stop_beta[y]` (payoff
/// `k2`), all discounted by `exp(∫ b_x)`, plus the discounted running `π_x`.
/// Paths are truncated once the discount factor is below `1e-12`.
#[allow(clippy::too_many_arguments)]
pub fn mc_dynkin_value(
    model: &RegimeModel,
    spec: &ProfitSpec,
    theta: f64,
    stop_alpha: &[f64],
    stop_beta: &[f64],
    x0: f64,
    i0: usize,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<MCEstimate> {
    spec.check_theta(theta)?;
    let px = spec.profit_x.clone();
    mc_stopping_value(model, &move |x| px(x, theta), spec.k1, spec.k2, stop_alpha, stop_beta, x0, i0, n_paths, dt, seed)
}

/// [`mc_dynkin_value`] with an arbitrary running source in place of `π_x`.
#[allow(clippy::too_many_arguments)]
pub fn mc_stopping_value(
    model: &RegimeModel,
    source: &(dyn Fn(f64) -> f64 + Sync),
    k1: f64,
    k2: f64,
    stop_alpha: &[f64],
    stop_beta: &[f64],
    x0: f64,
    i0: usize,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<MCEstimate> {
    let d = model.d();
    if stop_alpha.len() != d || stop_beta.len() != d || i0 >= d {
        return Err(Error::InvalidModel("barrier vectors or initial regime do not match the model".into()));
    }
    let t_max = (1e12f64).ln() / model.dissipativity_c();
    let n = check_step(t_max, dt)?;
    let kernel = ChainKernel::new(model.rate_matrix(), dt);
    let sq = dt.sqrt();
    let log_floor = (1e-12f64).ln();
    let samples: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|path| {
            let mut rng = stream_rng(seed, path);
            let (mut x, mut y) = (x0, i0);
            let mut logw: f64 = 0.0;
            let mut running: f64 = 0.0;
            for _ in 0..n {
                if x <= stop_alpha[y] {
                    return running + k1 * logw.exp();
                }
                if x >= stop_beta[y] {
                    return running + k2 * logw.exp();
                }
                if logw < log_floor {
                    break;
                }
                let w = logw.exp();
                running += w * source(x) * dt;
                let z: f64 = rng.sample(StandardNormal);
                let u: f64 = rng.gen();
                logw += model.drift_x(x, y) * dt;
                x += model.hat_drift(x, y) * dt + model.vol(x, y) * sq * z;
                y = kernel.next(y, u);
            }
            running
        })
        .collect();
    Ok(MCEstimate::from_samples(&samples, t_max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BenchmarkInstance, Coefficients};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn constant_model(b: f64, s: f64) -> RegimeModel {
        let coeffs = Coefficients {
            drift: Arc::new(move |_, _| b),
            drift_x: Arc::new(|_, _| -1.0),
            vol: Arc::new(move |_, _| s),
            vol_x: Arc::new(|_, _| 0.0),
        };
        RegimeModel::new(coeffs, DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]), (-10.0, 10.0), 1.0).unwrap()
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let v: Vec<f64> = (0..100).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&v), 4950.0);
    }

    #[test]
    fn kernel_is_stochastic() {
        let q = DMatrix::from_row_slice(2, 2, &[-2.0, 2.0, 1.0, -1.0]);
        let k = ChainKernel::new(&q, 0.1);
        assert_abs_diff_eq!(*k.cum[0].last().unwrap(), 1.0, epsilon = 1e-14);
        assert_eq!(k.next(0, 0.0), 0);
        assert_eq!(k.next(0, 0.9999), 1);
    }

    #[test]
    fn no_motion_no_reflection() {
        let m = constant_model(0.0, 0.0);
        let p = simulate_reflected(&m, &[-1.0, -1.0], &[1.0, 1.0], 0.2, 0, 5.0, 0.01, 3).unwrap();
        assert!(p.x.iter().all(|&x| x == 0.2));
        assert!(p.xi_plus.iter().chain(&p.xi_minus).all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_push_at_rate_of_drift() {
        let m = constant_model(-1.0, 0.0);
        let (a, t) = (0.0, 4.0);
        for dt in [1e-2, 1e-3] {
            let p = simulate_reflected(&m, &[a, a], &[5.0, 5.0], a + 0.3, 0, t, dt, 1).unwrap();
            assert_abs_diff_eq!(*p.x.last().unwrap(), a, epsilon = 1e-12);
            assert_abs_diff_eq!(*p.xi_plus.last().unwrap(), t - 0.3, epsilon = 2.0 * dt);
        }
    }

    #[test]
    fn bad_step_is_domain_error() {
        let m = constant_model(0.0, 1.0);
        assert!(matches!(simulate_reflected(&m, &[-1.0, -1.0], &[1.0, 1.0], 0.0, 0, 1.0, 0.0, 1), Err(Error::Domain(_))));
        assert!(matches!(simulate_reflected(&m, &[-1.0, -1.0], &[1.0, 1.0], 0.0, 0, -1.0, 0.1, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn gamma_identity_inside_band() {
        let raw = vec![0.1, 0.3, -0.2, 0.5];
        let r = gamma_map(&raw, &[0, 1, 0, 1], &[-1.0, -0.5], &[1.0, 0.8]);
        assert_eq!(r.x, raw);
        assert!(r.xi_plus.iter().chain(&r.xi_minus).all(|&v| v == 0.0));
    }

    #[test]
    fn gamma_one_sided_reduction() {
        // Lower barrier 0, upper barrier far away: x = ψ + max(0, −min ψ).
        let raw: Vec<f64> = (0..50).map(|k| 1.0 - 0.1 * k as f64 + 0.05 * (k as f64).sin()).collect();
        let y = vec![0; raw.len()];
        let r = gamma_map(&raw, &y, &[0.0], &[1e9]);
        let mut run_min = f64::INFINITY;
        for k in 0..raw.len() {
            run_min = run_min.min(raw[k]);
            assert_abs_diff_eq!(r.x[k], raw[k] + (-run_min).max(0.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn gamma_is_idempotent() {
        let noise = NoisePath::draw(2000, 1e-2, 9, 0);
        let m = BenchmarkInstance::default().model().unwrap();
        let y = noise.regimes(&m, 0);
        let mut raw = vec![5.0];
        for k in 0..noise.steps() {
            raw.push(raw[k] + 2.0 * noise.z[k] * 0.1);
        }
        let (a, b) = ([3.0, 1.0], [9.0, 6.0]);
        let once = gamma_map(&raw, &y, &a, &b);
        let twice = gamma_map(&once.x, &y, &a, &b);
        for (u, v) in once.x.iter().zip(&twice.x) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-12);
        }
    }

    #[test]
    fn picard_constant_coefficients_one_step() {
        let m = constant_model(0.3, 0.7);
        let noise = NoisePath::draw(1000, 1e-3, 5, 0);
        let r = picard_skorokhod(&m, &[-0.2, -0.1], &[0.2, 0.3], 0.0, 0, &noise, 5).unwrap();
        assert!(r.changes.len() >= 2);
        assert!(r.changes[1] <= 1e-12);
    }

    #[test]
    fn ergodic_zero_profit_frozen_interior() {
        let m = constant_model(0.0, 0.0);
        let mut spec = BenchmarkInstance::default().profit().unwrap();
        spec.profit = Arc::new(|_, _| 0.0);
        let opts = ErgodicOptions { horizon: 2.0, dt: 1e-2, n_paths: 4, seed: 1, burn_in: 0.1 };
        let e = ergodic_payoff_estimate(&m, &spec, 1.0, &[-1.0, -1.0], &[1.0, 1.0], &opts).unwrap();
        assert_eq!(e.mean, 0.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn stopping_value_trivial_cases() {
        let m = constant_model(0.0, 0.5);
        let zero = |_: f64| 0.0;
        let never = mc_stopping_value(&m, &zero, 1.0, 0.5, &[-1e9, -1e9], &[1e9, 1e9], 0.0, 0, 64, 1e-2, 2).unwrap();
        assert!(never.mean.abs() < 1e-10);
        let immediate = mc_stopping_value(&m, &zero, 1.0, 0.5, &[0.5, 0.5], &[2.0, 2.0], 0.0, 0, 64, 1e-2, 2).unwrap();
        assert_eq!(immediate.mean, 1.0);
        assert_eq!(immediate.std_error, 0.0);
    }

    #[test]
    fn return_times_count_arrivals() {
        let p = PathBundle {
            times: (0..7).map(|k| k as f64).collect(),
            x: vec![2.0, 1.0, 1.0, 3.0, 1.0, 2.0, 1.0],
            y: vec![0; 7],
            xi_plus: vec![0.0; 7],
            xi_minus: vec![0.0; 7],
            seed: 0,
            dt: 1.0,
        };
        assert_eq!(p.return_times(&[1.0]), vec![3.0, 2.0]);
    }

    #[test]
    fn identical_seed_identical_path() {
        let m = BenchmarkInstance::default().model().unwrap();
        let a = simulate_reflected(&m, &[2.5, 1.0], &[28.0, 18.0], 5.0, 0, 10.0, 1e-3, 77).unwrap();
        let b = simulate_reflected(&m, &[2.5, 1.0], &[28.0, 18.0], 5.0, 0, 10.0, 1e-3, 77).unwrap();
        assert_eq!(a, b);
    }
}
