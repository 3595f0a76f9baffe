use thiserror::Error;

/// Errors raised by the solvers and simulators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("reducible chain: {0}")]
    ReducibleChain(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("projected SOR did not converge after {sweeps} sweeps (last residual {residual:.3e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("empty stopping region on grid (regime {regime}, {side} side)")]
    EmptyStoppingRegion { regime: usize, side: &'static str },

    #[error("extracted boundary touches the {side} truncation in regime {regime}; enlarge truncation")]
    EnlargeTruncation { regime: usize, side: &'static str },

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("degenerate FP system: {0}")]
    DegenerateSystem(String),

    #[error("monotonicity violation in regime {regime} at x = {x} (drop {drop:.3e}); refine the mesh")]
    MonotonicityViolation { regime: usize, x: f64, drop: f64 },

    #[error("bracket inversion: lower {lower} > upper {upper}")]
    BracketInversion { lower: f64, upper: f64 },

    #[error("bracket does not straddle the fixed point: g(lower) = {g_lower:.3e}, g(upper) = {g_upper:.3e}")]
    BracketNotStraddling { g_lower: f64, g_upper: f64 },

    #[error("fixed-point search exceeded {max_iter} iterations (last residual {residual:.3e})")]
    MaxIterations {
        max_iter: usize,
        residual: f64,
        /// `(θ_k, Tθ_k, θ_k − Tθ_k)` for every evaluation made.
        trace: Vec<[f64; 3]>,
    },

    #[error("Picard iteration is not contracting: changes {changes:?}")]
    NoContraction { changes: Vec<f64> },

    #[error("at theta = {theta}: {source}")]
    AtTheta {
        theta: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_theta(self, theta: f64) -> Self {
        match self {
            e @ Error::AtTheta { .. } => e,
            e => Error::AtTheta { theta, source: Box::new(e) },
        }
    }

    /// Strips any `AtTheta` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTheta { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
