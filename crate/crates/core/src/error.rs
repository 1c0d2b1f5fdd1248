use crate::expr::ExprError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("degenerate metric at {point:?}: {detail}")]
    DegenerateMetric { point: Vec<f64>, detail: String },
    #[error("mass metric is not positive definite at {point:?}")]
    NotRiemannian { point: Vec<f64> },
    #[error("inadmissible constraint at {point:?}: rank {rank} < {expected}{}", .detail.as_deref().map(|d| format!(" ({d})")).unwrap_or_default())]
    InadmissibleConstraint {
        rank: usize,
        expected: usize,
        point: Vec<f64>,
        detail: Option<String>,
    },
    #[error("rank error: {0}")]
    Rank(String),
    #[error("invalid coordinate partition: {0}")]
    Partition(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid reference frame: {0}")]
    InvalidFrame(String),
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("singular KKT system at {point:?}")]
    SingularKkt { point: Vec<f64> },
    #[error("admissibility lost at t = {t}: rank {rank} < {expected}")]
    RankDropped { t: f64, rank: usize, expected: usize },
    #[error("initial state is off the constraint: max |f| = {residual:e} > {tolerance:e}")]
    OffConstraint { residual: f64, tolerance: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("sample grids differ: {0}")]
    GridMismatch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
