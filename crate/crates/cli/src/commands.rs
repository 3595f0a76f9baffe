//! Subcommand bodies. Each writes its files into the output directory and
//! finishes with `manifest.json`.

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;
use std::time::Duration;

use regime_mfg::model::search_points;
use regime_mfg::reflected::pairwise_sum;
use regime_mfg::{
    epsilon_curve, ergodic_payoff_estimate, interaction_moment, simulate_reflected, simulate_stationary_check,
    solve_equilibrium, solve_stationary, solve_vi, validate_assumptions, DynkinSolution, EpsilonCurve,
    EquilibriumResult, ProfitSpec, RegimeModel,
};

use crate::config::RunConfig;
use crate::output::{header, Cell, OutDir};

/// Model, profit and output directory of one invocation.
pub struct Ctx {
    pub cfg: RunConfig,
    pub model: RegimeModel,
    pub spec: ProfitSpec,
    pub out: OutDir,
}

impl Ctx {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        let model = cfg.model().context("building the model")?;
        let spec = cfg.profit().context("building the profit specification")?;
        let out = OutDir::create(&cfg.output.dir, cfg.hash())?;
        Ok(Self { cfg, model, spec, out })
    }

    fn d(&self) -> usize {
        self.model.d()
    }

    pub fn manifest(&mut self, command: &str) -> Result<()> {
        let mut files: Vec<String> = self.out.written().to_vec();
        files.push("manifest.json".into());
        let m = json!({
            "command": command,
            "seeds": {
                "simulation": self.cfg.simulation.seed,
                "nplayer": self.cfg.nplayer_options().seed,
            },
            "files": files,
            "config": self.cfg.canonical(),
        });
        self.out.json("manifest.json", &m)
    }
}

pub fn validate(ctx: &mut Ctx) -> Result<bool> {
    let xs = match (ctx.cfg.grid.x_lo, ctx.cfg.grid.x_hi) {
        (Some(a), Some(b)) => (0..ctx.cfg.grid.n).map(|k| a + (b - a) * k as f64 / (ctx.cfg.grid.n - 1) as f64).collect(),
        _ => search_points(ctx.model.state_interval(), 401),
    };
    // θ from θ_min upwards over four decades.
    let tmin = ctx.spec.theta_min;
    let thetas: Vec<f64> = (0..=16).map(|k| tmin * 10f64.powf(k as f64 / 4.0)).collect();
    let report = validate_assumptions(&ctx.model, &ctx.spec, &xs, &thetas)?;
    let passed = report.all_passed();
    ctx.out.json("validation.json", &json!({ "all_passed": passed, "report": report }))?;
    ctx.out.csv(
        "thresholds.csv",
        &["regime", "theta", "x_minus", "x_plus"].map(String::from),
        report.thresholds.iter().map(|t| {
            vec![
                Cell::from(t.regime),
                t.theta.into(),
                t.x_minus.map_or(Cell::S(String::new()), Cell::F),
                t.x_plus.map_or(Cell::S(String::new()), Cell::F),
            ]
        }),
    )?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    ctx.manifest("validate")?;
    Ok(passed)
}

fn write_solution(ctx: &mut Ctx, sol: &DynkinSolution, prefix: &str) -> Result<()> {
    let d = ctx.d();
    ctx.out.csv(
        &format!("{prefix}v.csv"),
        &header(&["x"], "v", d),
        (0..sol.grid.n).map(|k| {
            let mut row = vec![Cell::F(sol.grid.x(k))];
            row.extend((0..d).map(|i| Cell::F(sol.value(k, i))));
            row
        }),
    )?;
    let lam = sol.lam.clone().unwrap_or_else(|| vec![f64::NAN; d]);
    ctx.out.csv(
        &format!("{prefix}boundaries.csv"),
        &["regime", "alpha", "beta", "lambda", "K"].map(String::from),
        (0..d).map(|i| vec![Cell::from(i), sol.alpha[i].into(), sol.beta[i].into(), lam[i].into(), sol.k[i].into()]),
    )
}

#[derive(Serialize)]
struct SolutionSummary<'a> {
    theta: f64,
    grid: regime_mfg::Grid,
    alpha: &'a [f64],
    beta: &'a [f64],
    lambda: Option<&'a [f64]>,
    lambda_bar: Option<f64>,
    #[serde(rename = "K")]
    k: &'a [f64],
    residual: f64,
    sweeps: usize,
}

fn summary(sol: &DynkinSolution) -> SolutionSummary<'_> {
    SolutionSummary {
        theta: sol.theta,
        grid: sol.grid,
        alpha: &sol.alpha,
        beta: &sol.beta,
        lambda: sol.lam.as_deref(),
        lambda_bar: sol.lam_bar,
        k: &sol.k,
        residual: sol.residual,
        sweeps: sol.sweeps,
    }
}

fn solve_at(ctx: &Ctx, theta: f64) -> Result<DynkinSolution> {
    let grid = ctx.cfg.grid_at(&ctx.model, &ctx.spec, theta).context("building the grid")?;
    Ok(solve_vi(&ctx.model, &ctx.spec, theta, grid, &ctx.cfg.solver)?)
}

pub fn dynkin(ctx: &mut Ctx, theta: f64) -> Result<()> {
    let sol = solve_at(ctx, theta)?;
    write_solution(ctx, &sol, "")?;
    ctx.out.json("dynkin.json", &summary(&sol))?;
    ctx.manifest("dynkin")
}

fn write_law(ctx: &mut Ctx, law: &regime_mfg::StationaryCdf, moment: regime_mfg::Moment, theta: f64) -> Result<()> {
    let d = ctx.d();
    ctx.out.csv(
        "cdf.csv",
        &header(&["x"], "mu", d),
        law.x.iter().enumerate().map(|(k, &x)| {
            let mut row = vec![Cell::F(x)];
            row.extend((0..d).map(|i| Cell::F(law.value(k, i))));
            row
        }),
    )?;
    ctx.out.csv(
        "density.csv",
        &header(&["x"], "density", d),
        law.densities().into_iter().map(|(x, dens)| {
            let mut row = vec![Cell::F(x)];
            row.extend(dens.into_iter().map(Cell::F));
            row
        }),
    )?;
    let t_theta = (ctx.spec.outer_map)(moment.value);
    ctx.out.json(
        "stationary.json",
        &json!({
            "theta": theta,
            "alpha": law.alpha,
            "beta": law.beta,
            "p": law.p,
            "total_mass": law.total_mass(),
            "moment": moment.value,
            "clamped_mass": moment.clamped_mass,
            "t_theta": t_theta,
            "residual": law.residual,
            "upwind_nodes": law.upwind_nodes,
            "nodes": law.x.len(),
        }),
    )
}

pub fn stationary(ctx: &mut Ctx, theta: f64) -> Result<()> {
    let sol = solve_at(ctx, theta)?;
    let law = solve_stationary(&ctx.model, &sol.alpha, &sol.beta, ctx.cfg.mesh.n)?;
    let moment = interaction_moment(&law, &ctx.spec.inner_map);
    write_law(ctx, &law, moment, theta)?;
    ctx.manifest("stationary")
}

pub fn run_equilibrium(ctx: &mut Ctx) -> Result<EquilibriumResult> {
    let eq = solve_equilibrium(&ctx.model, &ctx.spec, &ctx.cfg.equilibrium_options())?;
    for w in &eq.warnings {
        eprintln!("warning: {w}");
    }
    ctx.out.csv(
        "trace.csv",
        &["step", "theta", "t_theta", "residual", "lower", "upper"].map(String::from),
        eq.trace.iter().enumerate().map(|(k, t)| {
            vec![Cell::from(k), t.theta.into(), t.t_theta.into(), t.residual.into(), t.lower.into(), t.upper.into()]
        }),
    )?;
    write_solution(ctx, &eq.solution_at_star, "equilibrium_")?;
    let sol = &eq.solution_at_star;
    ctx.out.json(
        "equilibrium.json",
        &json!({
            "theta_star": eq.theta_star,
            "residual": eq.residual(),
            "method": eq.method,
            "warnings": eq.warnings,
            "evaluations": eq.trace.len(),
            "bracket": eq.bracket,
            "khat": [eq.khat().0, eq.khat().1],
            "alpha": sol.alpha,
            "beta": sol.beta,
            "lambda": sol.lam,
            "lambda_bar": sol.lam_bar,
            "moment": eq.moment_at_star,
            "grid": eq.grid,
            "mesh": eq.mesh,
        }),
    )?;
    Ok(eq)
}

pub fn equilibrium(ctx: &mut Ctx) -> Result<()> {
    run_equilibrium(ctx)?;
    ctx.manifest("equilibrium")
}

/// Sample path, ergodic payoff and occupation check at the equilibrium.
pub fn run_simulate(ctx: &mut Ctx, eq: &EquilibriumResult) -> Result<()> {
    let s = ctx.cfg.simulation.clone();
    let sol = &eq.solution_at_star;
    let d = ctx.d();
    let x0 = 0.5 * (sol.alpha[0] + sol.beta[0]);
    let path = simulate_reflected(&ctx.model, &sol.alpha, &sol.beta, x0, 0, s.path_horizon, s.dt, s.seed)?;
    let n = path.x.len();
    ctx.out.csv(
        "path.csv",
        &["t", "x", "regime", "xi_plus", "xi_minus"].map(String::from),
        (0..n).filter(|k| k % s.record_every == 0 || *k == n - 1).map(|k| {
            vec![
                Cell::F(path.times[k]),
                path.x[k].into(),
                path.y[k].into(),
                path.xi_plus[k].into(),
                path.xi_minus[k].into(),
            ]
        }),
    )?;

    let est = ergodic_payoff_estimate(&ctx.model, &ctx.spec, eq.theta_star, &sol.alpha, &sol.beta, &ctx.cfg.ergodic_options())?;
    let check = simulate_stationary_check(&ctx.model, &eq.law_at_star, s.horizon, s.dt, s.seed)?;
    ctx.out.csv(
        "occupation.csv",
        &{
            let mut h = header(&["x"], "empirical", d);
            h.extend((0..d).map(|i| format!("mu_{i}")));
            h
        },
        check.x.iter().enumerate().map(|(k, &x)| {
            let mut row = vec![Cell::F(x)];
            row.extend((0..d).map(|i| Cell::F(check.empirical[k * d + i])));
            row.extend((0..d).map(|i| Cell::F(eq.law_at_star.value(k, i))));
            row
        }),
    )?;
    let long = simulate_reflected(&ctx.model, &sol.alpha, &sol.beta, x0, 0, s.horizon, s.dt, s.seed)?;
    let cycles = long.return_times(&sol.alpha);
    let lam_bar = sol.lam_bar.unwrap_or(f64::NAN);
    ctx.out.json(
        "ergodic.json",
        &json!({
            "theta_star": eq.theta_star,
            "lambda_bar": lam_bar,
            "estimate": est,
            "z_score": (est.mean - lam_bar) / est.std_error,
            "occupation": {
                "sup_distance": check.sup_distance,
                "occupancy": check.occupancy,
                "occupancy_se": check.occupancy_se,
                "chain_stationary": eq.law_at_star.p,
                "barrier_mass": check.barrier_mass,
                "samples": check.samples,
            },
            "return_time": {
                "cycles": cycles.len(),
                "mean": if cycles.is_empty() { f64::NAN } else { pairwise_sum(&cycles) / cycles.len() as f64 },
                "max": cycles.iter().copied().fold(0.0, f64::max),
            },
            "seed": s.seed,
            "dt": s.dt,
        }),
    )
}

pub fn simulate(ctx: &mut Ctx) -> Result<()> {
    let eq = run_equilibrium(ctx)?;
    run_simulate(ctx, &eq)?;
    ctx.manifest("simulate")
}

pub fn run_nplayer(ctx: &mut Ctx, eq: &EquilibriumResult) -> Result<EpsilonCurve> {
    let opts = ctx.cfg.nplayer_options();
    let budget = ctx.cfg.nplayer.budget_secs.map(Duration::from_secs_f64);
    let curve = epsilon_curve(&ctx.model, &ctx.spec, eq, &ctx.cfg.nplayer.n_list, &opts, budget)?;
    let d = ctx.d();
    if curve.partial {
        eprintln!("warning: time budget reached after {} of {} player counts", curve.rows.len(), ctx.cfg.nplayer.n_list.len());
    }
    ctx.out.csv(
        "epsilon.csv",
        &{
            let mut h: Vec<String> = ["n_players", "epsilon_hat", "std_error", "epsilon_raw", "seed"].map(String::from).into();
            h.extend((0..d).map(|i| format!("best_alpha_{i}")));
            h.extend((0..d).map(|i| format!("best_beta_{i}")));
            h
        },
        curve.rows.iter().map(|r| {
            let b = &r.estimate.best_deviation;
            let mut row =
                vec![Cell::from(r.n_players), r.epsilon_hat.into(), r.std_error.into(), r.epsilon_raw.into(), r.seed.into()];
            row.extend(b.alpha.iter().map(|&a| Cell::F(a)));
            row.extend(b.beta.iter().map(|&a| Cell::F(a)));
            row
        }),
    )?;
    ctx.out.csv(
        "deviations.csv",
        &{
            let mut h: Vec<String> = ["n_players", "id"].map(String::from).into();
            h.extend((0..d).map(|i| format!("alpha_{i}")));
            h.extend((0..d).map(|i| format!("beta_{i}")));
            h.extend(["payoff", "payoff_se", "gain", "gain_se"].map(String::from));
            h
        },
        curve.rows.iter().flat_map(|r| {
            r.estimate.table.iter().map(move |t| {
                let mut row = vec![Cell::from(r.n_players), t.id.into()];
                row.extend(t.barriers.alpha.iter().map(|&a| Cell::F(a)));
                row.extend(t.barriers.beta.iter().map(|&a| Cell::F(a)));
                row.extend([t.payoff.mean, t.payoff.std_error, t.gain, t.gain_se].map(Cell::F));
                row
            })
        }),
    )?;
    ctx.out.json(
        "nplayer.json",
        &json!({
            "n_list": ctx.cfg.nplayer.n_list,
            "completed": curve.rows.len(),
            "partial": curve.partial,
            "step": curve.step,
            "radius": opts.radius,
            "n_rep": opts.n_rep,
            "horizon": opts.horizon,
            "dt": opts.dt,
            "seed": opts.seed,
            "note": "epsilon_hat maximizes over a finite deviation grid and is a lower bound for the best-deviation gain",
        }),
    )?;
    Ok(curve)
}

pub fn nplayer(ctx: &mut Ctx) -> Result<()> {
    let eq = run_equilibrium(ctx)?;
    run_nplayer(ctx, &eq)?;
    ctx.manifest("nplayer")
}

pub fn pipeline(ctx: &mut Ctx) -> Result<()> {
    let eq = run_equilibrium(ctx)?;
    run_simulate(ctx, &eq)?;
    run_nplayer(ctx, &eq)?;
    ctx.manifest("pipeline")
}
