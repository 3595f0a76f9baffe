//! Fixed point `θ = T(θ) = F(⟨f, ν^θ⟩)` of the ergodic mean-field game.
//!
//! The bracket comes from the auxiliary game (lower end) and from the upper
//! boundaries at the lower end (upper end). `g = id − T` is nondecreasing, so
//! plain bisection is the primary method.

use serde::{Deserialize, Serialize};

use crate::dynkin::{max, min, solve_auxiliary_vi, solve_vi, DynkinSolution, Grid, SolverOptions};
use crate::error::{Error, Result};
use crate::model::{chain_stationary, ProfitSpec, RegimeModel};
use crate::stationary::{interaction_moment, solve_stationary, StationaryCdf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EquilibriumOptions {
    /// Stop when `|θ − Tθ| ≤ tol`.
    pub tol: f64,
    /// Cap on bisection steps.
    pub max_iter: usize,
    /// Nodes of every value-function grid.
    pub nodes: usize,
    /// Uniform nodes of the stationary grid.
    pub mesh: usize,
    /// Relative margin added around `K̂` (and around fitted grids).
    pub margin: f64,
    /// Weight of `Tθ` in the fallback iteration.
    pub damping: f64,
    pub damped_max_iter: usize,
    pub solver: SolverOptions,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 80,
            nodes: 2001,
            mesh: 4001,
            margin: 0.25,
            damping: 0.5,
            damped_max_iter: 200,
            solver: SolverOptions::default(),
        }
    }
}

impl EquilibriumOptions {
    fn check(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidModel("need tol > 0 and max_iter ≥ 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidModel(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.margin > 0.0) {
            return Err(Error::InvalidGrid("margin must be positive".into()));
        }
        Ok(())
    }
}

/// One evaluation of `T`.
#[derive(Debug, Clone)]
pub struct TEval {
    pub theta: f64,
    pub t_theta: f64,
    /// `⟨f, ν^θ⟩` before the outer map.
    pub moment: f64,
    pub solution: DynkinSolution,
    pub law: StationaryCdf,
}

/// `Tθ` with all intermediate objects.
pub fn t_eval(
    model: &RegimeModel,
    spec: &ProfitSpec,
    theta: f64,
    grid: Grid,
    mesh: usize,
    opts: &SolverOptions,
) -> Result<TEval> {
    let run = || -> Result<TEval> {
        let solution = solve_vi(model, spec, theta, grid, opts)?;
        let law = solve_stationary(model, &solution.alpha, &solution.beta, mesh)?;
        let moment = interaction_moment(&law, &spec.inner_map).value;
        Ok(TEval { theta, t_theta: (spec.outer_map)(moment), moment, solution, law })
    };
    run().map_err(|e| e.at_theta(theta))
}

/// `Tθ = F(⟨f, ν^θ⟩)` on a fixed grid and mesh.
pub fn t_map(
    model: &RegimeModel,
    spec: &ProfitSpec,
    theta: f64,
    grid: Grid,
    mesh: usize,
    opts: &SolverOptions,
) -> Result<f64> {
    t_eval(model, spec, theta, grid, mesh, opts).map(|e| e.t_theta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub theta_lower: f64,
    pub theta_upper: f64,
    /// Boundaries of the auxiliary game.
    pub aux_alpha: Vec<f64>,
    pub aux_beta: Vec<f64>,
    /// Boundaries of the game at `theta_lower`.
    pub alpha_at_lower: Vec<f64>,
    pub beta_at_lower: Vec<f64>,
    /// `[min_j α̲_j, max_j β_j(θ̲)]`, which holds every equilibrium boundary.
    pub khat: (f64, f64),
}

pub fn compute_bracket(model: &RegimeModel, spec: &ProfitSpec, opts: &EquilibriumOptions) -> Result<Bracket> {
    opts.check()?;
    let p = chain_stationary(model.rate_matrix())?;
    let aux_grid = Grid::fitted_auxiliary(model, spec, opts.margin, opts.nodes, &opts.solver)?;
    let aux = solve_auxiliary_vi(model, spec, aux_grid, &opts.solver)?;
    let law = solve_stationary(model, &aux.alpha, &aux.beta, opts.mesh)?;
    let theta_lower = (spec.outer_map)(interaction_moment(&law, &spec.inner_map).value);
    spec.check_theta(theta_lower).map_err(|e| e.at_theta(theta_lower))?;

    let lower = (|| {
        let grid = Grid::fitted(model, spec, theta_lower, opts.margin, opts.nodes, &opts.solver)?;
        solve_vi(model, spec, theta_lower, grid, &opts.solver)
    })()
    .map_err(|e| e.at_theta(theta_lower))?;
    let top: f64 = (0..model.d()).map(|i| p[i] * (spec.inner_map)(lower.beta[i])).sum();
    let theta_upper = (spec.outer_map)(top);
    if theta_lower > theta_upper + opts.tol {
        return Err(Error::BracketInversion { lower: theta_lower, upper: theta_upper });
    }
    let khat = (min(&aux.alpha), max(&lower.beta));
    Ok(Bracket {
        theta_lower,
        theta_upper: theta_upper.max(theta_lower),
        aux_alpha: aux.alpha,
        aux_beta: aux.beta,
        alpha_at_lower: lower.alpha,
        beta_at_lower: lower.beta,
        khat,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub theta: f64,
    pub t_theta: f64,
    /// `θ − Tθ`.
    pub residual: f64,
    /// Bracket after this evaluation.
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bisection,
    Damped,
}

#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    pub theta_star: f64,
    pub bracket: Bracket,
    pub trace: Vec<TracePoint>,
    pub method: Method,
    pub warnings: Vec<String>,
    /// Grid and mesh shared by every `T` evaluation.
    pub grid: Grid,
    pub mesh: usize,
    pub solution_at_star: DynkinSolution,
    pub law_at_star: StationaryCdf,
    /// `⟨f, ν^{θ*}⟩`.
    pub moment_at_star: f64,
}

impl EquilibriumResult {
    pub fn khat(&self) -> (f64, f64) {
        self.bracket.khat
    }

    /// `θ* − T(θ*)` as last evaluated.
    pub fn residual(&self) -> f64 {
        self.trace.iter().rev().find(|t| t.theta == self.theta_star).map_or(f64::NAN, |t| t.residual)
    }
}

/// Brackets, then bisects `g(θ) = θ − Tθ` on one shared grid.
pub fn solve_equilibrium(model: &RegimeModel, spec: &ProfitSpec, opts: &EquilibriumOptions) -> Result<EquilibriumResult> {
    let bracket = compute_bracket(model, spec, opts)?;
    let grid = Grid::around(model, bracket.khat.0, bracket.khat.1, opts.margin, opts.nodes)?;
    solve_on_grid(model, spec, bracket, grid, opts)
}

/// As [`solve_equilibrium`] with a precomputed bracket and a caller-chosen
/// grid. The grid must contain the stopping regions for every θ in the
/// bracket.
pub fn solve_on_grid(
    model: &RegimeModel,
    spec: &ProfitSpec,
    bracket: Bracket,
    grid: Grid,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumResult> {
    opts.check()?;
    let eval = |theta: f64| t_eval(model, spec, theta, grid, opts.mesh, &opts.solver);
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let (mut lo, mut hi) = (bracket.theta_lower, bracket.theta_upper);
    let push = |trace: &mut Vec<TracePoint>, e: &TEval, lo: f64, hi: f64| {
        trace.push(TracePoint { theta: e.theta, t_theta: e.t_theta, residual: e.theta - e.t_theta, lower: lo, upper: hi });
    };
    let done = |e: TEval, trace: Vec<TracePoint>, method, warnings| EquilibriumResult {
        theta_star: e.theta,
        bracket: bracket.clone(),
        trace,
        method,
        warnings,
        grid,
        mesh: opts.mesh,
        moment_at_star: e.moment,
        solution_at_star: e.solution,
        law_at_star: e.law,
    };

    let e_lo = eval(lo)?;
    push(&mut trace, &e_lo, lo, hi);
    let g_lo = lo - e_lo.t_theta;
    if g_lo.abs() <= opts.tol {
        return Ok(done(e_lo, trace, Method::Bisection, warnings));
    }
    let e_hi = eval(hi)?;
    push(&mut trace, &e_hi, lo, hi);
    let g_hi = hi - e_hi.t_theta;
    if g_hi.abs() <= opts.tol {
        return Ok(done(e_hi, trace, Method::Bisection, warnings));
    }
    if g_lo > 0.0 || g_hi < 0.0 {
        return Err(Error::BracketNotStraddling { g_lower: g_lo, g_upper: g_hi });
    }

    // Evaluated (θ, g) pairs, kept sorted, to spot a non-monotone g.
    let mut seen = vec![(lo, g_lo), (hi, g_hi)];
    let mut last = if g_lo.abs() < g_hi.abs() { e_lo } else { e_hi };
    for _ in 0..opts.max_iter {
        let mid = 0.5 * (lo + hi);
        let e = eval(mid)?;
        let g = mid - e.t_theta;
        let at = seen.partition_point(|&(t, _)| t < mid);
        let monotone = seen[at - 1].1 <= g && g <= seen[at].1;
        seen.insert(at, (mid, g));
        if g.abs() <= opts.tol {
            push(&mut trace, &e, lo, hi);
            return Ok(done(e, trace, Method::Bisection, warnings));
        }
        if !monotone {
            push(&mut trace, &e, lo, hi);
            warnings.push(format!(
                "g = θ − Tθ is not monotone near θ = {mid:.9} (g = {g:.3e}); switching to damped iteration"
            ));
            return damped(e, trace, warnings, &eval, opts, bracket.theta_lower, bracket.theta_upper)
                .map(|(e, trace, warnings)| done(e, trace, Method::Damped, warnings));
        }
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        push(&mut trace, &e, lo, hi);
        if (e.theta - e.t_theta).abs() < (last.theta - last.t_theta).abs() {
            last = e;
        }
        // The width rule alone would stop on a steep riser of the discrete
        // map with |g| well above tol, so it only fires once the bracket is
        // at rounding level, i.e. when T really jumps across the diagonal.
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs() {
            warnings.push(format!(
                "T jumps across the diagonal at θ = {:.12}; best |θ − Tθ| = {:.3e} exceeds tol",
                last.theta,
                (last.theta - last.t_theta).abs()
            ));
            return Ok(done(last, trace, Method::Bisection, warnings));
        }
    }
    Err(Error::MaxIterations {
        max_iter: opts.max_iter,
        residual: last.theta - last.t_theta,
        trace: raw(&trace),
    })
}

type Damped = (TEval, Vec<TracePoint>, Vec<String>);

fn damped(
    start: TEval,
    mut trace: Vec<TracePoint>,
    warnings: Vec<String>,
    eval: &dyn Fn(f64) -> Result<TEval>,
    opts: &EquilibriumOptions,
    lo: f64,
    hi: f64,
) -> Result<Damped> {
    let mut cur = start;
    for _ in 0..opts.damped_max_iter {
        let next = ((1.0 - opts.damping) * cur.theta + opts.damping * cur.t_theta).clamp(lo, hi);
        cur = eval(next)?;
        trace.push(TracePoint {
            theta: cur.theta,
            t_theta: cur.t_theta,
            residual: cur.theta - cur.t_theta,
            lower: lo,
            upper: hi,
        });
        if (cur.theta - cur.t_theta).abs() <= opts.tol {
            return Ok((cur, trace, warnings));
        }
    }
    Err(Error::MaxIterations {
        max_iter: opts.damped_max_iter,
        residual: cur.theta - cur.t_theta,
        trace: raw(&trace),
    })
}

fn raw(trace: &[TracePoint]) -> Vec<[f64; 3]> {
    trace.iter().map(|t| [t.theta, t.t_theta, t.residual]).collect()
}
