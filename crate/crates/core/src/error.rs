//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("duplicate id {0}")]
    DuplicateId(u32),
    #[error("nodes {0} and {1} share coordinates ({2}, {3})")]
    DuplicateCoordinates(u32, u32, f64, f64),
    #[error("invariant violation in field `{field}`: {reason}")]
    Invariant { field: &'static str, reason: String },
    #[error("scenario must contain at least one node")]
    Empty,
}

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("cluster count must be at least 1")]
    ZeroClusters,
    #[error("cluster count {m} exceeds node count {n}")]
    TooManyClusters { m: usize, n: usize },
    #[error("invalid clustering: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum TourError {
    #[error("exact tour limited to 15 points, got {0}; use heuristic_tour")]
    TooManyPoints(usize),
    #[error("tour requires at least one point")]
    NoPoints,
}

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("node {0} is not chargeable from any stop")]
    UnchargeableNode(u32),
    #[error("degenerate: zero consumption (cycle time unbounded)")]
    ZeroConsumption,
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("joint schedule infeasible: {0}")]
    JointInfeasible(String),
    #[error("tour error: {0}")]
    Tour(#[from] TourError),
    #[error("lp did not reach an optimum: {0}")]
    Solver(String),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("plan does not match clustering: {0}")]
    PlanMismatch(String),
    #[error("timestep {dt} exceeds shortest stop duration {shortest}")]
    DtTooLarge { dt: f64, shortest: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
}
