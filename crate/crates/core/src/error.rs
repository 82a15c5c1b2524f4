use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("weight breakpoint {value} does not coincide with any mesh breakpoint")]
    Alignment { value: f64 },

    #[error("matrix not positive definite at row {index}")]
    NotSpd { index: usize },

    #[error("negative quadratic form: {0}")]
    NegativeForm(f64),

    #[error("factorial ratio overflow: total order {0} exceeds 170")]
    FactorialOverflow(u32),

    #[error("index {0} is not in the reduced margin")]
    NotInMargin(String),

    #[error("set is not downward closed")]
    NotDownwardClosed,

    #[error("uniform ellipticity violated: theta = {theta}")]
    UeaViolation { theta: f64 },

    #[error("weighted ellipticity violated: delta = {delta}")]
    DeltaViolation { delta: f64 },

    #[error("layer {order} incomplete: {present} of {expected} indices present")]
    IncompleteLayer {
        order: u32,
        present: u64,
        expected: u64,
    },

    #[error("missing backward neighbor {0} in coefficient map")]
    MissingNeighbor(String),

    #[error("conjugate gradient did not converge within {0} iterations")]
    CgStalled(usize),

    #[error("quadrature oracle limited to at most 3 variables, got {0}")]
    DimensionGuard(usize),

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command line frontend:
    /// 2 for validation problems, 3 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Mesh(_)
            | Error::Alignment { .. }
            | Error::Validation(_)
            | Error::DimensionGuard(_)
            | Error::Json(_)
            | Error::Csv(_)
            | Error::Io(_) => 2,
            _ => 3,
        }
    }
}
