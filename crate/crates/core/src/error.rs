use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("pair is not controllable (Kalman rank {rank} < {dim})")]
    NotControllable { rank: usize, dim: usize },

    #[error("eigenvalue iteration did not converge for a {0}x{0} matrix")]
    EigenFailure(usize),

    #[error("singular value decomposition did not converge")]
    SvdFailure,

    #[error("Lie closure did not stabilize within depth {max_depth} (dim {dim} so far)")]
    ClosureNotStabilized {
        max_depth: usize,
        dim: usize,
        partial: Box<crate::lie::LieBasis>,
    },

    #[error("constructed signal violates persistent excitation (worst window integral {worst_integral} < {mu})")]
    ConstructionNotAdmissible { worst_integral: f64, mu: f64 },

    #[error("steering failed: {0}")]
    Steering(String),

    #[error("empty signal family")]
    EmptyFamily,

    #[error("numerical diagnostic: {0}")]
    Numerical(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
