use thiserror::Error;

/// Every failure the lab can report. Variants map one-to-one onto the
/// error kinds documented on each operation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension N = {0} is too small, need N >= 3")]
    DimensionTooSmall(usize),
    #[error("a = {a} must be finite and below (N-2)/2 = {limit}")]
    AOutOfRange { a: f64, limit: f64 },
    #[error("b = {b} must lie in [{lo}, {hi}{}", if *.strict { ")" } else { "]" })]
    BOutOfRange { b: f64, lo: f64, hi: f64, strict: bool },
    #[error("integrability exponent s = {s} must exceed {min}")]
    STooSmall { s: f64, min: f64 },
    #[error("alpha_h estimate {0} is outside (0, 1]")]
    InvalidAlphaH(f64),
    #[error("radius {0} must be positive")]
    NonpositiveRadius(f64),
    #[error("quadrature did not converge: value {value}, estimated error {est_error}")]
    QuadratureNonconvergence { value: f64, est_error: f64 },
    #[error("ball (center {center:?}, radius {radius}) is not inside the grid domain")]
    BallOutsideDomain { center: Vec<f64>, radius: f64 },
    #[error("ball contains no grid nodes")]
    EmptyBall,
    #[error("operation not supported: {0}")]
    Unsupported(String),
    #[error("adaptive subdivision of a cell touching the origin exhausted its budget")]
    OriginCellUnresolved,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("field is identically zero")]
    ZeroField,
    #[error("field does not vanish on the grid boundary")]
    NotCompactlySupported,
    #[error("degenerate exponent: {0}")]
    DegenerateExponent(String),
    #[error("ball has only {interior} interior nodes, need at least 2")]
    BallTooSmall { interior: usize },
    #[error("solver stopped after {iterations} iterations at relative residual {relative_residual}")]
    NoConvergence {
        iterations: usize,
        relative_residual: f64,
        best: Box<crate::field::DiscreteField>,
    },
    #[error("oscillation {osc} at radius {radius} is below 1e-14")]
    DegenerateOscillation { radius: f64, osc: f64 },
    #[error("need at least 3 usable points, got {0}")]
    InsufficientPoints(usize),
    #[error("field is negative at node {node} (value {value})")]
    NegativeField { node: usize, value: f64 },
    #[error("field is not weakly superharmonic at node {node}: residual {residual}")]
    NotSuperharmonic { node: usize, residual: f64 },
    #[error("threshold ell = {0} must be positive")]
    NonpositiveEll(f64),
    #[error("residual {residual} exceeds tolerance {tol}")]
    ResidualTooLarge { residual: f64, tol: f64 },
    #[error("ladder norm at step {k} is not finite")]
    NormOverflow { k: usize },
    #[error("exponents must satisfy 0 < alpha < gamma < beta and A1, A2 > 0: {0}")]
    ExponentOrderViolation(String),
    #[error("subdomain at margin {0} contains no nodes")]
    EmptySubdomain(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("invalid config key `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
