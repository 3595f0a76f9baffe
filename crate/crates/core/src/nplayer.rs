//! Symmetric N-player game in which every player reflects at the
//! mean-field barriers, and the gain of a single deviating player.
//!
//! Each player owns an independent Brownian motion and regime chain. The
//! interaction felt by player `n` is `θᴺ = F(mean_{ℓ≠n} f(X^ℓ))`. Player 0 is
//! the deviator; the others never see its state in their payoffs, so all
//! candidate barriers for player 0 are simulated in lockstep on one set of
//! noise (common random numbers).

use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::EquilibriumResult;
use crate::error::{Error, Result};
use crate::model::{chain_stationary, ProfitSpec, RegimeModel};
use crate::reflected::{initial_state, pairwise_sum, stream_rng, MCEstimate, Reflector};

/// Steps per partial sum of the running payoff.
const BLOCK: usize = 4096;

/// Stream of player `player` in repetition `rep`.
pub fn player_stream(rep: usize, player: usize) -> u64 {
    ((rep as u64) << 32) | player as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NPlayerOptions {
    pub horizon: f64,
    pub dt: f64,
    /// Fraction of the horizon discarded before averaging.
    pub burn_in: f64,
    pub n_rep: usize,
    pub seed: u64,
    /// Offsets `−radius..=radius` times `step` are applied to the barriers.
    pub radius: usize,
    /// Perturbation step; the equilibrium grid spacing when absent.
    pub step: Option<f64>,
}

impl Default for NPlayerOptions {
    fn default() -> Self {
        Self { horizon: 2000.0, dt: 1e-3, burn_in: 0.1, n_rep: 64, seed: 0, radius: 2, step: None }
    }
}

/// A barrier strategy: reflect at `alpha[y]` from below and `beta[y]` from above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Barriers {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationRun {
    pub n_players: usize,
    pub equilibrium: Barriers,
    /// Strategy box: every barrier must lie in `[khat.0, khat.1]`.
    pub khat: (f64, f64),
    pub horizon: f64,
    pub dt: f64,
    pub burn_in: f64,
    pub n_rep: usize,
    pub seed: u64,
}

impl PopulationRun {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        model: &RegimeModel,
        n_players: usize,
        equilibrium: Barriers,
        khat: (f64, f64),
        horizon: f64,
        dt: f64,
        burn_in: f64,
        n_rep: usize,
        seed: u64,
    ) -> Result<Self> {
        if n_players < 2 {
            return Err(Error::Domain(format!("need at least 2 players, got {n_players}")));
        }
        if n_rep == 0 || !(dt > 0.0) || !(horizon >= dt) || !(0.0..1.0).contains(&burn_in) {
            return Err(Error::Domain("need n_rep ≥ 1, 0 < dt ≤ horizon and burn-in in [0, 1)".into()));
        }
        let run = Self { n_players, equilibrium, khat, horizon, dt, burn_in, n_rep, seed };
        run.check(model, &run.equilibrium)?;
        Ok(run)
    }

    /// Run with the barriers and `K̂` of a solved equilibrium.
    pub fn from_equilibrium(
        model: &RegimeModel,
        eq: &EquilibriumResult,
        n_players: usize,
        opts: &NPlayerOptions,
    ) -> Result<Self> {
        let sol = &eq.solution_at_star;
        let barriers = Barriers { alpha: sol.alpha.clone(), beta: sol.beta.clone() };
        Self::new(model, n_players, barriers, eq.khat(), opts.horizon, opts.dt, opts.burn_in, opts.n_rep, opts.seed)
    }

    /// Domain check for a barrier strategy.
    pub fn check(&self, model: &RegimeModel, b: &Barriers) -> Result<()> {
        let d = model.d();
        if b.alpha.len() != d || b.beta.len() != d {
            return Err(Error::Domain("barrier vectors must have one entry per regime".into()));
        }
        let (lo, hi) = self.khat;
        for i in 0..d {
            let (a, c) = (b.alpha[i], b.beta[i]);
            if !(lo <= a && a < c && c <= hi) {
                return Err(Error::Domain(format!(
                    "barriers ({a}, {c}) of regime {i} must satisfy {lo} ≤ alpha < beta ≤ {hi}"
                )));
            }
        }
        Ok(())
    }

    fn steps(&self) -> (usize, usize) {
        let n = (self.horizon / self.dt).round() as usize;
        (n, ((n as f64) * self.burn_in).round() as usize)
    }
}

/// Shared offsets `(a, b) ∈ {−r..r}²`: every `α_i` moves by `a·step` and
/// every `β_i` by `b·step`. Candidates leaving `K̂` or inverting a band are
/// dropped; the unperturbed strategy comes first.
pub fn deviation_grid(model: &RegimeModel, run: &PopulationRun, step: f64, radius: usize) -> Vec<Barriers> {
    let r = radius as i64;
    let mut offsets: Vec<(i64, i64)> = (-r..=r).flat_map(|a| (-r..=r).map(move |b| (a, b))).collect();
    offsets.sort_by_key(|&(a, b)| (a != 0 || b != 0, a, b));
    offsets
        .into_iter()
        .map(|(a, b)| Barriers {
            alpha: run.equilibrium.alpha.iter().map(|x| x + a as f64 * step).collect(),
            beta: run.equilibrium.beta.iter().map(|x| x + b as f64 * step).collect(),
        })
        .filter(|c| run.check(model, c).is_ok())
        .collect()
}

struct Player {
    rng: ChaCha8Rng,
    x: f64,
    y: usize,
}

impl Player {
    fn start(seed: u64, stream: u64, p: &[f64], b: &Barriers) -> Self {
        let mut rng = stream_rng(seed, stream);
        let (x, y) = initial_state(&mut rng, p, &b.alpha, &b.beta);
        Self { rng, x, y }
    }

    fn noise(&mut self) -> (f64, f64) {
        let z: f64 = self.rng.sample(StandardNormal);
        let u: f64 = self.rng.gen();
        (z, u)
    }
}

/// Running payoff `∫π dt − k1 ξ⁺ + k2 ξ⁻` accumulated in blocks.
#[derive(Default)]
struct Ledger {
    blocks: Vec<f64>,
    cur: f64,
}

impl Ledger {
    fn close(&mut self) {
        self.blocks.push(self.cur);
        self.cur = 0.0;
    }

    fn total(mut self) -> f64 {
        self.close();
        pairwise_sum(&self.blocks)
    }
}

fn interaction(spec: &ProfitSpec, sum_f: f64, count: usize) -> f64 {
    (spec.outer_map)(sum_f / count as f64)
}

fn check_interaction(spec: &ProfitSpec, run: &PopulationRun) -> Result<()> {
    // States stay in the bands, so θᴺ ≥ F(f(min α)).
    let low = (spec.outer_map)((spec.inner_map)(run.khat.0));
    spec.check_theta(low)
}

/// One repetition: time-averaged payoff of player 0 under each candidate in
/// `cands`, all driven by the same noise.
fn deviator_rep(
    model: &RegimeModel,
    spec: &ProfitSpec,
    run: &PopulationRun,
    cands: &[Barriers],
    p: &[f64],
    rep: usize,
) -> Result<Vec<f64>> {
    let (n, burn) = run.steps();
    let eq = Reflector::new(model, &run.equilibrium.alpha, &run.equilibrium.beta, run.dt)?;
    let refl = cands.iter().map(|c| Reflector::new(model, &c.alpha, &c.beta, run.dt)).collect::<Result<Vec<_>>>()?;
    let mut others: Vec<Player> =
        (1..run.n_players).map(|l| Player::start(run.seed, player_stream(rep, l), p, &run.equilibrium)).collect();
    let mut me = Player::start(run.seed, player_stream(rep, 0), p, &run.equilibrium);
    let mut xs: Vec<f64> = cands.iter().map(|c| 0.5 * (c.alpha[me.y] + c.beta[me.y])).collect();
    let mut ledgers: Vec<Ledger> = cands.iter().map(|_| Ledger::default()).collect();
    for k in 0..n {
        let live = k >= burn;
        if live {
            let sum_f: f64 = others.iter().map(|o| (spec.inner_map)(o.x)).sum();
            let theta = interaction(spec, sum_f, run.n_players - 1);
            for (x, l) in xs.iter().zip(ledgers.iter_mut()) {
                l.cur += (spec.profit)(*x, theta) * run.dt;
            }
        }
        let (z, u) = me.noise();
        let y_next = eq.next_regime(me.y, u);
        for ((x, r), l) in xs.iter_mut().zip(&refl).zip(ledgers.iter_mut()) {
            let s = r.project(r.raw(*x, me.y, z), y_next);
            if live {
                l.cur += -spec.k1 * s.dxi_plus + spec.k2 * s.dxi_minus;
            }
            *x = s.x;
        }
        me.y = y_next;
        for o in others.iter_mut() {
            let (z, u) = o.noise();
            let s = eq.step(o.x, o.y, z, u);
            o.x = s.x;
            o.y = s.y;
        }
        if (k + 1) % BLOCK == 0 {
            ledgers.iter_mut().for_each(Ledger::close);
        }
    }
    let span = (n - burn) as f64 * run.dt;
    Ok(ledgers.into_iter().map(|l| l.total() / span).collect())
}

fn deviator_table(
    model: &RegimeModel,
    spec: &ProfitSpec,
    run: &PopulationRun,
    cands: &[Barriers],
) -> Result<Vec<Vec<f64>>> {
    check_interaction(spec, run)?;
    for c in cands {
        run.check(model, c)?;
    }
    let p = chain_stationary(model.rate_matrix())?;
    (0..run.n_rep).into_par_iter().map(|rep| deviator_rep(model, spec, run, cands, &p, rep)).collect()
}

/// Long-run payoff of player 0 when it reflects at `deviation` (or at the
/// equilibrium barriers when `None`) and everyone else plays the equilibrium.
pub fn estimate_player_payoff(
    model: &RegimeModel,
    spec: &ProfitSpec,
    run: &PopulationRun,
    deviation: Option<&Barriers>,
) -> Result<MCEstimate> {
    let cand = deviation.unwrap_or(&run.equilibrium).clone();
    let table = deviator_table(model, spec, run, &[cand])?;
    let samples: Vec<f64> = table.iter().map(|r| r[0]).collect();
    Ok(MCEstimate::from_samples(&samples, run.horizon))
}

/// Long-run payoffs of all players at the equilibrium. Player `k` is driven
/// by the noise stream of slot `perm[k]`.
pub fn population_payoffs(
    model: &RegimeModel,
    spec: &ProfitSpec,
    run: &PopulationRun,
    perm: &[usize],
) -> Result<Vec<MCEstimate>> {
    let m = run.n_players;
    let mut sorted = perm.to_vec();
    sorted.sort_unstable();
    if sorted != (0..m).collect::<Vec<_>>() {
        return Err(Error::Domain("perm must be a permutation of the players".into()));
    }
    check_interaction(spec, run)?;
    let p = chain_stationary(model.rate_matrix())?;
    let (n, burn) = run.steps();
    let span = (n - burn) as f64 * run.dt;
    let per_rep: Vec<Vec<f64>> = (0..run.n_rep)
        .into_par_iter()
        .map(|rep| -> Result<Vec<f64>> {
            let eq = Reflector::new(model, &run.equilibrium.alpha, &run.equilibrium.beta, run.dt)?;
            let mut slots: Vec<Player> =
                (0..m).map(|s| Player::start(run.seed, player_stream(rep, s), &p, &run.equilibrium)).collect();
            let mut ledgers: Vec<Ledger> = (0..m).map(|_| Ledger::default()).collect();
            let mut fx = vec![0.0; m];
            for k in 0..n {
                if k >= burn {
                    for (f, s) in fx.iter_mut().zip(&slots) {
                        *f = (spec.inner_map)(s.x);
                    }
                    let total: f64 = fx.iter().sum();
                    for ((l, s), f) in ledgers.iter_mut().zip(&slots).zip(&fx) {
                        let theta = interaction(spec, total - f, m - 1);
                        l.cur += (spec.profit)(s.x, theta) * run.dt;
                    }
                }
                for (s, l) in slots.iter_mut().zip(ledgers.iter_mut()) {
                    let (z, u) = s.noise();
                    let st = eq.step(s.x, s.y, z, u);
                    if k >= burn {
                        l.cur += -spec.k1 * st.dxi_plus + spec.k2 * st.dxi_minus;
                    }
                    s.x = st.x;
                    s.y = st.y;
                }
                if (k + 1) % BLOCK == 0 {
                    ledgers.iter_mut().for_each(Ledger::close);
                }
            }
            Ok(ledgers.into_iter().map(|l| l.total() / span).collect())
        })
        .collect::<Result<_>>()?;
    Ok(perm
        .iter()
        .map(|&slot| {
            let samples: Vec<f64> = per_rep.iter().map(|r| r[slot]).collect();
            MCEstimate::from_samples(&samples, run.horizon)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub id: usize,
    pub barriers: Barriers,
    pub payoff: MCEstimate,
    /// Mean of the paired differences against the equilibrium strategy.
    pub gain: f64,
    pub gain_se: f64,
}

/// Best gain over a finite set of barrier deviations. Because the set is
/// finite, `epsilon_hat` is a lower bound for the true best-deviation gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonEstimate {
    pub n_players: usize,
    /// `max(0, epsilon_raw)`.
    pub epsilon_hat: f64,
    /// Largest mean gain, possibly negative.
    pub epsilon_raw: f64,
    /// Standard error of the best row's gain.
    pub std_error: f64,
    pub best: usize,
    pub best_deviation: Barriers,
    pub equilibrium_payoff: MCEstimate,
    pub table: Vec<DeviationRow>,
}

/// Paired-difference gains of each candidate over the equilibrium strategy.
pub fn estimate_epsilon(
    model: &RegimeModel,
    spec: &ProfitSpec,
    run: &PopulationRun,
    grid: &[Barriers],
) -> Result<EpsilonEstimate> {
    if grid.is_empty() {
        return Err(Error::Domain("deviation grid is empty".into()));
    }
    let mut cands = vec![run.equilibrium.clone()];
    cands.extend(grid.iter().cloned());
    let table = deviator_table(model, spec, run, &cands)?;
    let column = |j: usize| -> Vec<f64> { table.iter().map(|r| r[j]).collect() };
    let base = column(0);
    let rows: Vec<DeviationRow> = grid
        .iter()
        .enumerate()
        .map(|(id, b)| {
            let own = column(id + 1);
            let diff: Vec<f64> = own.iter().zip(&base).map(|(a, e)| a - e).collect();
            let gain = MCEstimate::from_samples(&diff, run.horizon);
            DeviationRow {
                id,
                barriers: b.clone(),
                payoff: MCEstimate::from_samples(&own, run.horizon),
                gain: gain.mean,
                gain_se: gain.std_error,
            }
        })
        .collect();
    let best = rows
        .iter()
        .enumerate()
        .fold(0, |bi, (i, r)| if r.gain > rows[bi].gain { i } else { bi });
    let epsilon_raw = rows[best].gain;
    Ok(EpsilonEstimate {
        n_players: run.n_players,
        epsilon_hat: epsilon_raw.max(0.0),
        epsilon_raw,
        std_error: rows[best].gain_se,
        best,
        best_deviation: rows[best].barriers.clone(),
        equilibrium_payoff: MCEstimate::from_samples(&base, run.horizon),
        table: rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub n_players: usize,
    pub epsilon_hat: f64,
    pub std_error: f64,
    pub epsilon_raw: f64,
    pub seed: u64,
    pub estimate: EpsilonEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonCurve {
    pub rows: Vec<CurveRow>,
    /// Set when the time budget ran out before every N was processed.
    pub partial: bool,
    pub step: f64,
}

/// `ε̂_N` for each `N` in `n_list`, all with the same seed. Stops early (and
/// flags the table as partial) once `budget` has elapsed.
pub fn epsilon_curve(
    model: &RegimeModel,
    spec: &ProfitSpec,
    eq: &EquilibriumResult,
    n_list: &[usize],
    opts: &NPlayerOptions,
    budget: Option<Duration>,
) -> Result<EpsilonCurve> {
    let start = Instant::now();
    let step = opts.step.unwrap_or(eq.grid.h);
    if !(step > 0.0) {
        return Err(Error::Domain(format!("perturbation step must be positive, got {step}")));
    }
    let mut rows = Vec::new();
    let mut partial = false;
    for &n in n_list {
        if budget.is_some_and(|b| start.elapsed() > b) {
            partial = true;
            break;
        }
        let run = PopulationRun::from_equilibrium(model, eq, n, opts)?;
        let mut grid = deviation_grid(model, &run, step, opts.radius);
        // The unperturbed strategy is compared against itself: gain 0 exactly.
        if grid.is_empty() {
            grid.push(run.equilibrium.clone());
        }
        let est = estimate_epsilon(model, spec, &run, &grid)?;
        rows.push(CurveRow {
            n_players: n,
            epsilon_hat: est.epsilon_hat,
            std_error: est.std_error,
            epsilon_raw: est.epsilon_raw,
            seed: opts.seed,
            estimate: est,
        });
    }
    Ok(EpsilonCurve { rows, partial, step })
}
