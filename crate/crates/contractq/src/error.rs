use thiserror::Error;

/// Errors surfaced by environments, wage solvers and optimizers.
///
/// Infeasibility is an ordinary outcome of the incentive program, not a bug,
/// so it carries enough context to diagnose which constraint cannot be met.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("nonzero mean: E[Z] = {mean:.3e} on [{lo}, {hi}] violates E[Z | a=1] = 0")]
    NonzeroMean { lo: f64, hi: f64, mean: f64 },

    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),

    #[error("empty cell: [{lo:.6}, {hi:.6}) carries no probability mass")]
    EmptyCell { lo: f64, hi: f64 },

    #[error("degenerate line: zero normal vector")]
    DegenerateLine,

    #[error("weight precondition violated: need w01+w00 > 0 and w10+w00 > 0, got {weights:?}")]
    WeightPrecondition { weights: [f64; 3] },

    #[error("cutoffs must be strictly increasing, got {0:?}")]
    UnsortedCutoffs(Vec<f64>),

    #[error("invalid utility: {0}")]
    InvalidUtility(String),

    #[error("infeasible: no informative cell (z <= 0 everywhere)")]
    NoInformativeCell,

    #[error("infeasible: utility bound caps constraint {constraint} at {sup:.6} < {required:.6}")]
    UtilityBound {
        constraint: usize,
        sup: f64,
        required: f64,
    },

    #[error("infeasible: constraints jointly unattainable (dual diverges along {direction:?})")]
    JointlyInfeasible { direction: Vec<f64> },

    #[error("infeasible reservation: c + ubar = {required:.6} exceeds achievable utility {sup:.6}")]
    InfeasibleReservation { required: f64, sup: f64 },

    #[error("no incentive possible: a single performance category carries no information")]
    NoIncentivePossible,

    #[error("cell budget exceeded: {cells} cells > K = {k}")]
    CellBudgetExceeded { cells: usize, k: usize },

    #[error("malformed probability vector: {0}")]
    MalformedProbabilities(String),

    #[error("instance too large: {0}")]
    InstanceTooLarge(String),

    #[error("all candidate partitions infeasible: {0}")]
    AllCandidatesInfeasible(String),

    #[error("no convergence after {iterations} iterations (sup-change {sup_change:.3e})")]
    NoConvergence { iterations: usize, sup_change: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
