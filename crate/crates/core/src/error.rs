use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector of length {0} is not a perfect square")]
    NonSquareLength(usize),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension {dim} exceeds the default limit of {limit}; enable large dimensions explicitly")]
    DimensionTooLarge { dim: usize, limit: usize },

    #[error("operator is not Hermitian (defect {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("{what} is not completely positive (min Choi eigenvalue {min_eigenvalue:e})")]
    NotCompletelyPositive { what: String, min_eigenvalue: f64 },

    #[error("{what} is not unital (residual {residual:e})")]
    NotUnital { what: String, residual: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kernel evaluated outside its domain at t = {t}")]
    OutsideDomain { t: f64 },

    #[error("non-finite values produced at t = {t}")]
    NonFinite { t: f64 },

    #[error("V_t(1) has eigenvalue {min_eigenvalue:e} below the positivity floor {floor:e} at t = {t}")]
    PositivityFloor { t: f64, min_eigenvalue: f64, floor: f64 },

    #[error("series iteration did not converge within {order} orders (last increment {increment:e})")]
    NotConverged { order: usize, increment: f64 },

    #[error("horizon too short for p = {p}: p * t_max = {product} < {required}")]
    InsufficientHorizon { p: f64, product: f64, required: f64 },

    #[error("p = {p} lies at or left of the abscissa {abscissa}")]
    BelowAbscissa { p: f64, abscissa: f64 },

    #[error("singular resolvent at p = {p}")]
    Singular { p: f64 },

    #[error("time grids differ")]
    GridMismatch,
}
