use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 4 cells along x for the stride-2 pressure stencil, got {0}")]
    TooFewCells(usize),
    #[error("grid needs at least one cell along y")]
    EmptyRows,
    #[error("grid spacing must be positive, got dx={dx}, dy={dy}")]
    BadSpacing { dx: f64, dy: f64 },
    #[error("invalid model parameter {name}: {reason}")]
    BadParameter { name: &'static str, reason: String },
    #[error("field arrays have length {got}, grid has {expected} cells")]
    ShapeMismatch { expected: usize, got: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PressureError {
    #[error("density {rho} outside the admissible range (0, {rho_star})")]
    Density { rho: f64, rho_star: f64 },
    #[error("negative implicit pressure {0}: the elliptic solve produced a negative-pressure state")]
    NegativePressure(f64),
    #[error("matching width {delta} is not smaller than the congestion density {rho_star}")]
    MatchingWidth { delta: f64, rho_star: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error(transparent)]
    Pressure(#[from] PressureError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("Newton solve did not converge in {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },
    #[error("elliptic solve requires a negative pressure at cell {cell} (residual {residual:e})")]
    NegativePressure { cell: usize, residual: f64 },
    #[error("explicit step blew up at cell {cell}: {reason}")]
    BlowUp { cell: usize, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Pressure(#[from] PressureError),
    #[error("conservative variables need sin(theta) != 0, got theta = {0}")]
    SinZero(f64),
    #[error("Mach number undefined: sound speed vanishes")]
    UndefinedMach,
    #[error("shock speed undefined for equal densities {0}")]
    EqualDensities(f64),
    #[error("quadrature did not reach tolerance (estimated error {0:e})")]
    Quadrature(f64),
}
