//! Stationary law of the reflected regime-switching diffusion.
//!
//! The cumulative functions `μ(·, i)` solve the weakly coupled boundary-value
//! problem
//!
//! ```text
//! ½σ² μ'' − (b − σσ_x) μ' + Σ_j q_ji μ(α_j ∨ x ∧ β_j, j) = 0   on (α_i, β_i),
//! μ(α_i, i) = 0,   μ(β_i, i) = p(i).
//! ```
//!
//! All regimes share one grid that contains every `α_j` and `β_j` as a node,
//! and `μ(·, j)` is stored on the whole grid (0 left of `α_j`, `p(j)` right of
//! `β_j`), so the clamped coupling is a plain nodal lookup.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::dynkin::{max, min};
use crate::error::{Error, Result};
use crate::model::{chain_stationary, RegimeModel, ScalarFn};
use crate::reflected::{initial_state, stream_rng, Reflector};

/// Base nodes closer than this (relative to the span) to a boundary node are
/// dropped. Keeps the grid a continuous function of the boundaries.
const MERGE_TOL: f64 = 1e-12;
/// Largest tolerated decrease of a computed CDF.
pub const MONOTONE_TOL: f64 = 1e-10;

/// Per-regime stationary CDFs on a shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryCdf {
    pub x: Vec<f64>,
    pub d: usize,
    /// Node-major, `mu[k * d + i] = μ(x_k, i)`.
    pub mu: Vec<f64>,
    pub p: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Largest residual of the assembled system, each row scaled by its diagonal.
    pub residual: f64,
    /// Distance from each boundary to its grid node (zero: boundaries are nodes).
    pub snapping_error: f64,
    /// Nodes where the central stencil was replaced by an upwind one.
    pub upwind_nodes: usize,
}

impl StationaryCdf {
    #[inline]
    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.mu[k * self.d + i]
    }

    pub fn regime(&self, i: usize) -> Vec<f64> {
        (0..self.x.len()).map(|k| self.value(k, i)).collect()
    }

    /// Linear interpolation of `μ(·, i)`, extended by 0 and `p(i)`.
    pub fn cdf(&self, x: f64, i: usize) -> f64 {
        let n = self.x.len();
        if x <= self.x[0] {
            return self.value(0, i);
        }
        if x >= self.x[n - 1] {
            return self.value(n - 1, i);
        }
        let k = self.x.partition_point(|&t| t <= x) - 1;
        let t = (x - self.x[k]) / (self.x[k + 1] - self.x[k]);
        (1.0 - t) * self.value(k, i) + t * self.value(k + 1, i)
    }

    /// Cell densities `Δμ / Δx` per regime, at cell midpoints.
    pub fn densities(&self) -> Vec<(f64, Vec<f64>)> {
        self.x
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let dx = w[1] - w[0];
                let dens = (0..self.d).map(|i| (self.value(k + 1, i) - self.value(k, i)) / dx).collect();
                (0.5 * (w[0] + w[1]), dens)
            })
            .collect()
    }

    /// Total mass `Σ_i μ(max β, i)`.
    pub fn total_mass(&self) -> f64 {
        let n = self.x.len();
        (0..self.d).map(|i| self.value(n - 1, i)).sum()
    }
}

/// Shared grid: `mesh` uniform nodes on `[min α, max β]` merged with all
/// boundary points.
pub fn merged_grid(alpha: &[f64], beta: &[f64], mesh: usize) -> Result<Vec<f64>> {
    if mesh < 3 {
        return Err(Error::InvalidGrid("stationary mesh needs at least 3 nodes".into()));
    }
    let lo = min(alpha);
    let hi = max(beta);
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidGrid(format!("bad boundary span [{lo}, {hi}]")));
    }
    let span = hi - lo;
    let mut special: Vec<f64> = alpha.iter().chain(beta).cloned().collect();
    special.sort_by(|a, b| a.total_cmp(b));
    special.dedup_by(|a, b| (*a - *b).abs() <= MERGE_TOL * span);
    let near = |x: f64| special.iter().any(|s| (s - x).abs() <= MERGE_TOL * span);
    let mut x: Vec<f64> = (1..mesh - 1)
        .map(|k| lo + span * k as f64 / (mesh - 1) as f64)
        .filter(|&x| !near(x))
        .collect();
    x.extend(special.iter().cloned());
    x.sort_by(|a, b| a.total_cmp(b));
    Ok(x)
}

/// Assembles and solves the coupled system for the given boundaries.
pub fn solve_stationary(model: &RegimeModel, alpha: &[f64], beta: &[f64], mesh: usize) -> Result<StationaryCdf> {
    let d = model.d();
    if alpha.len() != d || beta.len() != d {
        return Err(Error::InvalidModel("boundary vectors must have one entry per regime".into()));
    }
    for i in 0..d {
        if !(alpha[i] < beta[i]) {
            return Err(Error::InvalidModel(format!("need alpha < beta in regime {i}")));
        }
    }
    let p = chain_stationary(model.rate_matrix())?;
    let x = merged_grid(alpha, beta, mesh)?;
    let n = x.len();
    let dim = n * d;
    let mut a = BandMatrix::zeros(dim, d, d);
    let mut rhs = vec![0.0; dim];
    let mut known = vec![false; dim];
    let mut upwind_nodes = 0;
    for k in 0..n {
        for i in 0..d {
            let row = k * d + i;
            let xk = x[k];
            let inside = xk > alpha[i] && xk < beta[i] && k > 0 && k + 1 < n;
            if !inside {
                known[row] = true;
                a.add(row, row, 1.0);
                rhs[row] = if xk <= alpha[i] { 0.0 } else { p[i] };
                continue;
            }
            let (hm, hp) = (xk - x[k - 1], x[k + 1] - xk);
            let s = model.vol(xk, i);
            let diff = 0.5 * s * s;
            // Coefficient of μ' in the equation.
            let m = s * model.vol_x(xk, i) - model.drift(xk, i);
            let d2 = [2.0 / (hm * (hm + hp)), -2.0 / (hm * hp), 2.0 / (hp * (hm + hp))];
            let mut d1 = [-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))];
            let lo = diff * d2[0] + m * d1[0];
            let up = diff * d2[2] + m * d1[2];
            if lo < 0.0 || up < 0.0 {
                upwind_nodes += 1;
                d1 = if m > 0.0 { [0.0, -1.0 / hp, 1.0 / hp] } else { [-1.0 / hm, 1.0 / hm, 0.0] };
            }
            a.add(row, row - d, diff * d2[0] + m * d1[0]);
            a.add(row, row, diff * d2[1] + m * d1[1]);
            a.add(row, row + d, diff * d2[2] + m * d1[2]);
            for j in 0..d {
                a.add(row, k * d + j, model.rate(j, i));
            }
        }
    }
    let check = a.clone();
    let lu = a
        .factor()
        .ok_or_else(|| Error::DegenerateSystem("zero pivot in the banded factorization".into()))?;
    let mut mu = lu.solve(rhs.clone());
    // One step of iterative refinement.
    let r: Vec<f64> = check.mul(&mu).iter().zip(&rhs).map(|(l, r)| r - l).collect();
    for (m, c) in mu.iter_mut().zip(lu.solve(r)) {
        *m += c;
    }
    if mu.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateSystem("non-finite solution".into()));
    }
    // Boundary rows are identities; restore their exact values after pivoting.
    for (row, fixed) in known.iter().enumerate() {
        if *fixed {
            mu[row] = rhs[row];
        }
    }
    let residual = check
        .mul(&mu)
        .iter()
        .zip(&rhs)
        .enumerate()
        .map(|(row, (l, r))| (l - r).abs() / check.get(row, row).abs())
        .fold(0.0, f64::max);
    for i in 0..d {
        for k in 0..n - 1 {
            let drop = mu[k * d + i] - mu[(k + 1) * d + i];
            if drop > MONOTONE_TOL {
                return Err(Error::MonotonicityViolation { regime: i, x: x[k + 1], drop });
            }
        }
    }
    Ok(StationaryCdf {
        x,
        d,
        mu,
        p,
        alpha: alpha.to_vec(),
        beta: beta.to_vec(),
        residual,
        snapping_error: 0.0,
        upwind_nodes,
    })
}

/// `⟨f, ν⟩` with its discretization diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moment {
    pub value: f64,
    /// Mass of negative CDF increments that were set to zero.
    pub clamped_mass: f64,
}

/// Riemann–Stieltjes sum `Σ_i Σ_k f(midpoint_k) (μ(x_{k+1}, i) − μ(x_k, i))`.
pub fn interaction_moment(law: &StationaryCdf, f: &ScalarFn) -> Moment {
    let mut value = 0.0;
    let mut clamped_mass = 0.0;
    for k in 0..law.x.len() - 1 {
        let fm = f(0.5 * (law.x[k] + law.x[k + 1]));
        for i in 0..law.d {
            let dm = law.value(k + 1, i) - law.value(k, i);
            if dm < 0.0 {
                clamped_mass -= dm;
            } else {
                value += fm * dm;
            }
        }
    }
    Moment { value, clamped_mass }
}

/// Occupation statistics of one long reflected path against a solved law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryCheck {
    /// Abscissas of the law.
    pub x: Vec<f64>,
    pub d: usize,
    /// Fraction of post-burn-in time with `Y = i` and `X ≤ x_k`, node-major.
    pub empirical: Vec<f64>,
    /// `sup_k |μ_emp(x_k, i) − μ(x_k, i)|` per regime.
    pub sup_distance: Vec<f64>,
    /// Time fraction spent in each regime.
    pub occupancy: Vec<f64>,
    /// Batch-means standard errors of `occupancy`.
    pub occupancy_se: Vec<f64>,
    /// Time fraction spent exactly on a barrier of the current regime. The
    /// projection scheme puts an atom of order `σ√Δt` times the boundary
    /// density there, which the continuous law does not have.
    pub barrier_mass: Vec<f64>,
    pub samples: usize,
}

impl StationaryCheck {
    pub fn max_distance(&self) -> f64 {
        self.sup_distance.iter().cloned().fold(0.0, f64::max)
    }
}

/// Fraction of the horizon discarded before counting.
const CHECK_BURN_IN: f64 = 0.1;
const CHECK_BATCHES: usize = 20;

/// Simulates one reflected path (stream 0 of `seed`) and compares its
/// occupation measure with `law`, which must belong to the same barriers.
pub fn simulate_stationary_check(
    model: &RegimeModel,
    law: &StationaryCdf,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<StationaryCheck> {
    let d = model.d();
    if law.d != d {
        return Err(Error::InvalidModel("law and model disagree on the number of regimes".into()));
    }
    if !(dt > 0.0 && horizon >= 100.0 * dt) {
        return Err(Error::Domain("need dt > 0 and a horizon of at least 100 steps".into()));
    }
    let r = Reflector::new(model, &law.alpha, &law.beta, dt)?;
    let n = (horizon / dt).round() as usize;
    let burn = ((n as f64) * CHECK_BURN_IN).round() as usize;
    let kept = n - burn;
    let per_batch = kept.div_ceil(CHECK_BATCHES);
    let nx = law.x.len();
    let mut counts = vec![0u64; nx * d];
    let mut batch = vec![vec![0u64; d]; CHECK_BATCHES];
    let mut on_barrier = vec![0u64; d];
    let mut rng = stream_rng(seed, 0);
    let (mut x, mut y) = initial_state(&mut rng, &law.p, &law.alpha, &law.beta);
    for k in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        let u: f64 = rng.gen();
        let s = r.step(x, y, z, u);
        x = s.x;
        y = s.y;
        if k >= burn {
            // First node at or above x: the sample counts for every node from there on.
            let at = law.x.partition_point(|&t| t < x).min(nx - 1);
            counts[at * d + y] += 1;
            batch[(k - burn) / per_batch][y] += 1;
            if x == law.alpha[y] || x == law.beta[y] {
                on_barrier[y] += 1;
            }
        }
    }
    let mut empirical = vec![0.0; nx * d];
    for i in 0..d {
        let mut acc = 0u64;
        for k in 0..nx {
            acc += counts[k * d + i];
            empirical[k * d + i] = acc as f64 / kept as f64;
        }
    }
    let sup_distance = (0..d)
        .map(|i| (0..nx).map(|k| (empirical[k * d + i] - law.value(k, i)).abs()).fold(0.0, f64::max))
        .collect();
    let sizes: Vec<u64> = batch.iter().map(|b| b.iter().sum()).collect();
    let nb = sizes.iter().filter(|&&s| s > 0).count();
    let mut occupancy = vec![0.0; d];
    let mut occupancy_se = vec![0.0; d];
    for i in 0..d {
        let total: u64 = batch.iter().map(|b| b[i]).sum();
        let mean = total as f64 / kept as f64;
        let var = batch
            .iter()
            .zip(&sizes)
            .filter(|(_, &s)| s > 0)
            .map(|(b, &s)| (b[i] as f64 / s as f64 - mean).powi(2))
            .sum::<f64>()
            / (nb - 1).max(1) as f64;
        occupancy[i] = mean;
        occupancy_se[i] = (var / nb as f64).sqrt();
    }
    let barrier_mass = on_barrier.iter().map(|&c| c as f64 / kept as f64).collect();
    Ok(StationaryCheck {
        x: law.x.clone(),
        d,
        empirical,
        sup_distance,
        occupancy,
        occupancy_se,
        barrier_mass,
        samples: kept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BenchmarkInstance;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn near_decoupled() -> RegimeModel {
        let eps = 1e-8;
        BenchmarkInstance {
            rate_matrix: vec![vec![-eps, eps], vec![eps, -eps]],
            ..Default::default()
        }
        .model()
        .unwrap()
    }

    #[test]
    fn merged_grid_contains_boundaries() {
        let x = merged_grid(&[1.0, 1.234567], &[5.0, 3.3], 11).unwrap();
        for b in [1.0, 1.234567, 5.0, 3.3] {
            assert!(x.contains(&b));
        }
        assert!(x.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(x[0], 1.0);
        assert_eq!(*x.last().unwrap(), 5.0);
    }

    #[test]
    fn boundary_conditions_and_mass() {
        let m = BenchmarkInstance::default().model().unwrap();
        let law = solve_stationary(&m, &[2.5, 0.95], &[27.9, 18.1], 2001).unwrap();
        for i in 0..2 {
            let ka = law.x.iter().position(|&x| x == law.alpha[i]).unwrap();
            let kb = law.x.iter().position(|&x| x == law.beta[i]).unwrap();
            assert_eq!(law.value(ka, i), 0.0);
            assert_eq!(law.value(kb, i), law.p[i]);
        }
        assert_abs_diff_eq!(law.total_mass(), 1.0, epsilon = 1e-10);
        assert!(law.residual < 1e-10);
    }

    #[test]
    fn symmetric_regimes_split_single_law() {
        let b = BenchmarkInstance::symmetric(0.5, 0.2, 1.0);
        let m = b.model().unwrap();
        let law = solve_stationary(&m, &[3.0, 3.0], &[20.0, 20.0], 1001).unwrap();
        let single = solve_stationary(&m.restrict_to_regime(0).unwrap(), &[3.0], &[20.0], 1001).unwrap();
        for k in 0..law.x.len() {
            assert_abs_diff_eq!(law.value(k, 0), law.value(k, 1), epsilon = 1e-12);
            assert_abs_diff_eq!(law.value(k, 0), 0.5 * single.value(k, 0), epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_integrand_gives_unit_moment() {
        let m = BenchmarkInstance::default().model().unwrap();
        let law = solve_stationary(&m, &[2.5, 0.95], &[27.9, 18.1], 1001).unwrap();
        let c: ScalarFn = Arc::new(|_| 3.5);
        assert_abs_diff_eq!(interaction_moment(&law, &c).value, 3.5, epsilon = 1e-10);
    }

    #[test]
    fn narrow_bands_concentrate_the_moment() {
        let m = BenchmarkInstance::default().model().unwrap();
        let (a, w) = ([2.0, 5.0], 1e-6);
        let law = solve_stationary(&m, &a, &[a[0] + w, a[1] + w], 51).unwrap();
        let f: ScalarFn = Arc::new(|x: f64| x.sqrt());
        let want: f64 = law.p.iter().zip(&a).map(|(p, x)| p * x.sqrt()).sum();
        assert_abs_diff_eq!(interaction_moment(&law, &f).value, want, epsilon = 1e-6);
    }

    #[test]
    fn near_decoupled_matches_power_law() {
        // Speed density ∝ x^{−2−2δ/σ²}; its CDF on [a, b] is closed form.
        let m = near_decoupled();
        let (alpha, beta) = ([2.5, 0.95], [27.9, 18.1]);
        let law = solve_stationary(&m, &alpha, &beta, 8001).unwrap();
        let params = [(0.5, 0.2), (1.0, 0.3)];
        for i in 0..2 {
            let (dl, s) = params[i];
            let e = 1.0 + 2.0 * dl / (s * s);
            let prim = |x: f64| -x.powf(-e) / e;
            let cdf = |x: f64| (prim(x) - prim(alpha[i])) / (prim(beta[i]) - prim(alpha[i]));
            let mut worst: f64 = 0.0;
            for (k, &x) in law.x.iter().enumerate() {
                let xc = x.clamp(alpha[i], beta[i]);
                worst = worst.max((law.value(k, i) / law.p[i] - cdf(xc)).abs());
            }
            assert!(worst < 1e-3, "regime {i}: {worst}");
        }
    }

    #[test]
    fn near_decoupled_moment_matches_quadrature() {
        let m = near_decoupled();
        let (alpha, beta) = ([2.5, 0.95], [27.9, 18.1]);
        let law = solve_stationary(&m, &alpha, &beta, 8001).unwrap();
        let params = [(0.5, 0.2), (1.0, 0.3)];
        let want: f64 = (0..2)
            .map(|i| {
                let (dl, s) = params[i];
                let e = 1.0 + 2.0 * dl / (s * s);
                let mass = |x: f64| -x.powf(-e) / e;
                let first = |x: f64| x.powf(0.5 - e) / (0.5 - e);
                let (a, b) = (alpha[i], beta[i]);
                law.p[i] * (first(b) - first(a)) / (mass(b) - mass(a))
            })
            .sum();
        let f: ScalarFn = Arc::new(f64::sqrt);
        let got = interaction_moment(&law, &f);
        assert!((got.value - want).abs() < 1e-4, "{} vs {want}", got.value);
        assert!(got.clamped_mass < 1e-9);
    }

    #[test]
    fn symmetric_occupancy_is_balanced() {
        let m = BenchmarkInstance::symmetric(0.5, 0.2, 1.0).model().unwrap();
        let law = solve_stationary(&m, &[1.0, 1.0], &[3.0, 3.0], 401).unwrap();
        let c = simulate_stationary_check(&m, &law, 400.0, 1e-2, 5).unwrap();
        for i in 0..2 {
            assert!((c.occupancy[i] - 0.5).abs() <= 3.0 * c.occupancy_se[i], "{:?}", c);
        }
        assert!((c.occupancy.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(c.barrier_mass.iter().all(|&b| b > 0.0 && b < 0.5));
        for i in 0..2 {
            let col: Vec<f64> = (0..c.x.len()).map(|k| c.empirical[k * 2 + i]).collect();
            assert!(col.windows(2).all(|w| w[0] <= w[1]));
            assert!((col[col.len() - 1] - c.occupancy[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn inverted_boundaries_rejected() {
        let m = BenchmarkInstance::default().model().unwrap();
        assert!(solve_stationary(&m, &[3.0, 1.0], &[2.0, 5.0], 101).is_err());
    }
}
