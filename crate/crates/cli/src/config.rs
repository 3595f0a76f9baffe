//! Run configuration: a TOML file whose sections map onto the structs below.
//! Every key is optional; an empty file describes the default benchmark.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use regime_mfg::model::PolynomialDynamics;
use regime_mfg::{
    BenchmarkInstance, EquilibriumOptions, ErgodicOptions, Grid, NPlayerOptions, ProfitSpec, RegimeModel,
    SolverOptions,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Benchmark,
    Polynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    /// Benchmark: `b = −δ_i x`, `σ = σ_i x`.
    pub delta: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Polynomial: ascending coefficients per regime.
    pub drift: Vec<Vec<f64>>,
    pub vol: Vec<Vec<f64>>,
    pub state_interval: (f64, f64),
    pub dissipativity_c: Option<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        let b = BenchmarkInstance::default();
        Self {
            kind: ModelKind::Benchmark,
            delta: b.delta,
            sigma: b.sigma,
            drift: Vec::new(),
            vol: Vec::new(),
            state_interval: (0.0, f64::INFINITY),
            dissipativity_c: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfitSection {
    pub beta: f64,
    pub kappa_star: f64,
    pub k1: f64,
    pub k2: f64,
    pub theta_min: f64,
}

impl Default for ProfitSection {
    fn default() -> Self {
        let b = BenchmarkInstance::default();
        Self { beta: b.beta, kappa_star: b.kappa_star, k1: b.k1, k2: b.k2, theta_min: b.theta_min }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    pub rate_matrix: Vec<Vec<f64>>,
}

impl Default for ChainSection {
    fn default() -> Self {
        Self { rate_matrix: BenchmarkInstance::default().rate_matrix }
    }
}

/// Value-function grid. Without `x_lo`/`x_hi` the truncation is fitted to
/// the free boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub margin: f64,
    pub x_lo: Option<f64>,
    pub x_hi: Option<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: 2001, margin: 0.25, x_lo: None, x_hi: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSection {
    pub n: usize,
}

impl Default for MeshSection {
    fn default() -> Self {
        Self { n: 4001 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub dt: f64,
    /// Horizon of the ergodic estimate and of the occupation check.
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub burn_in: f64,
    /// Length of the recorded sample path.
    pub path_horizon: f64,
    /// Keep every `record_every`-th step of the sample path.
    pub record_every: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let e = ErgodicOptions::default();
        Self {
            dt: e.dt,
            horizon: e.horizon,
            n_paths: e.n_paths,
            seed: e.seed,
            burn_in: e.burn_in,
            path_horizon: 10.0,
            record_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriumSection {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub damped_max_iter: usize,
}

impl Default for EquilibriumSection {
    fn default() -> Self {
        let e = EquilibriumOptions::default();
        Self { tol: e.tol, max_iter: e.max_iter, damping: e.damping, damped_max_iter: e.damped_max_iter }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NPlayerSection {
    pub n_list: Vec<usize>,
    pub n_rep: usize,
    pub horizon: f64,
    pub dt: f64,
    pub burn_in: f64,
    pub radius: usize,
    pub step: Option<f64>,
    /// Wall-clock budget in seconds; the table is flagged partial when hit.
    pub budget_secs: Option<f64>,
}

impl Default for NPlayerSection {
    fn default() -> Self {
        let o = NPlayerOptions::default();
        Self {
            n_list: vec![2, 5, 10, 20, 50],
            n_rep: o.n_rep,
            horizon: o.horizon,
            dt: o.dt,
            burn_in: o.burn_in,
            radius: o.radius,
            step: o.step,
            budget_secs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub profit: ProfitSection,
    pub chain: ChainSection,
    pub grid: GridSection,
    pub mesh: MeshSection,
    pub solver: SolverOptions,
    pub simulation: SimulationSection,
    pub equilibrium: EquilibriumSection,
    pub nplayer: NPlayerSection,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        let positive = [
            ("solver.tol", self.solver.tol),
            ("solver.boundary_tol", self.solver.boundary_tol),
            ("equilibrium.tol", self.equilibrium.tol),
            ("simulation.dt", self.simulation.dt),
            ("simulation.horizon", self.simulation.horizon),
            ("simulation.path_horizon", self.simulation.path_horizon),
            ("nplayer.dt", self.nplayer.dt),
            ("nplayer.horizon", self.nplayer.horizon),
            ("grid.margin", self.grid.margin),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                bail!("{name} must be positive (got {v})");
            }
        }
        if self.grid.x_lo.is_some() != self.grid.x_hi.is_some() {
            bail!("grid.x_lo and grid.x_hi must be given together");
        }
        if self.simulation.record_every == 0 || self.simulation.n_paths == 0 || self.nplayer.n_rep == 0 {
            bail!("record_every, n_paths and n_rep must be at least 1");
        }
        if self.nplayer.n_list.iter().any(|&n| n < 2) {
            bail!("nplayer.n_list entries must be at least 2");
        }
        Ok(())
    }

    /// The effective configuration without the output directory, which does
    /// not change any result.
    pub fn canonical(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let serde_json::Value::Object(map) = &mut v {
            map.remove("output");
        }
        v
    }

    /// SHA-256 of [`RunConfig::canonical`].
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(&self.canonical()).expect("config serializes");
        hex::encode(Sha256::digest(canon.as_bytes()))
    }

    fn benchmark(&self) -> BenchmarkInstance {
        BenchmarkInstance {
            beta: self.profit.beta,
            kappa_star: self.profit.kappa_star,
            delta: self.model.delta.clone(),
            sigma: self.model.sigma.clone(),
            rate_matrix: self.chain.rate_matrix.clone(),
            k1: self.profit.k1,
            k2: self.profit.k2,
            theta_min: self.profit.theta_min,
        }
    }

    pub fn model(&self) -> Result<RegimeModel> {
        Ok(match self.model.kind {
            ModelKind::Benchmark => self.benchmark().model()?,
            ModelKind::Polynomial => PolynomialDynamics { drift: self.model.drift.clone(), vol: self.model.vol.clone() }
                .model(&self.chain.rate_matrix, self.model.state_interval, self.model.dissipativity_c)?,
        })
    }

    pub fn profit(&self) -> Result<ProfitSpec> {
        Ok(self.benchmark().profit()?)
    }

    /// Explicit grid when configured, otherwise fitted at `theta`.
    pub fn grid_at(&self, model: &RegimeModel, spec: &ProfitSpec, theta: f64) -> Result<Grid> {
        Ok(match (self.grid.x_lo, self.grid.x_hi) {
            (Some(a), Some(b)) => Grid::new(a, b, self.grid.n)?,
            _ => Grid::fitted(model, spec, theta, self.grid.margin, self.grid.n, &self.solver)?,
        })
    }

    pub fn equilibrium_options(&self) -> EquilibriumOptions {
        EquilibriumOptions {
            tol: self.equilibrium.tol,
            max_iter: self.equilibrium.max_iter,
            nodes: self.grid.n,
            mesh: self.mesh.n,
            margin: self.grid.margin,
            damping: self.equilibrium.damping,
            damped_max_iter: self.equilibrium.damped_max_iter,
            solver: self.solver,
        }
    }

    pub fn ergodic_options(&self) -> ErgodicOptions {
        let s = &self.simulation;
        ErgodicOptions { horizon: s.horizon, dt: s.dt, n_paths: s.n_paths, seed: s.seed, burn_in: s.burn_in }
    }

    pub fn nplayer_options(&self) -> NPlayerOptions {
        let n = &self.nplayer;
        NPlayerOptions {
            horizon: n.horizon,
            dt: n.dt,
            burn_in: n.burn_in,
            n_rep: n.n_rep,
            seed: self.simulation.seed,
            radius: n.radius,
            step: n.step,
        }
    }
}
