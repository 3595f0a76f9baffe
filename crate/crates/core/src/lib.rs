//! Stationary mean-field equilibria of two-sided singular control problems
//! with regime switching.
//!
//! The pipeline for one parameter θ is: obstacle problem for the stopping
//! game ([`dynkin`]) → free boundaries and ergodic constants → stationary law
//! of the reflected process ([`stationary`]) → interaction moment. The fixed
//! point of θ ↦ F(⟨f, ν^θ⟩) is located in [`equilibrium`]. Monte Carlo
//! oracles live in [`reflected`] and [`nplayer`].

pub mod banded;
pub mod dynkin;
pub mod equilibrium;
pub mod error;
pub mod model;
pub mod nplayer;
pub mod reflected;
pub mod stationary;

pub use dynkin::{compute_lambda, extract_boundaries, solve_auxiliary_vi, solve_vi, DynkinSolution, Grid, SolverOptions};
pub use equilibrium::{
    compute_bracket, solve_equilibrium, t_map, Bracket, EquilibriumOptions, EquilibriumResult, Method, TracePoint,
};
pub use error::{Error, Result};
pub use model::{
    chain_stationary, eval_profit, eval_profit_x, validate_assumptions, BenchmarkInstance, ProfitSpec, RegimeModel,
    ValidationReport,
};
pub use nplayer::{
    deviation_grid, epsilon_curve, estimate_epsilon, estimate_player_payoff, population_payoffs, Barriers, EpsilonCurve,
    EpsilonEstimate, NPlayerOptions, PopulationRun,
};
pub use stationary::{
    interaction_moment, simulate_stationary_check, solve_stationary, Moment, StationaryCdf, StationaryCheck,
};
pub use reflected::{
    ergodic_payoff_estimate, gamma_map, mc_dynkin_value, picard_skorokhod, simulate_reflected, ErgodicOptions, MCEstimate,
    NoisePath, PathBundle,
};
