use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid transfer function: {0}")]
    InvalidTransferFunction(String),
    #[error("denominator vanishes on the unit circle at omega = {omega} (|den| = {magnitude:e})")]
    DenominatorZeroOnGrid { omega: f64, magnitude: f64 },
    #[error("polynomial root finding did not converge (degree {degree})")]
    RootFindingFailure { degree: usize },
    #[error("plant has a zero on the unit circle (|z| = {modulus}); it cannot be inverted")]
    ZeroOnUnitCircle { modulus: f64 },
    #[error("plant is not internally stable (max |pole| = {max_modulus})")]
    UnstablePlant { max_modulus: f64 },
    #[error("plant is not strictly proper (instantaneous feedthrough {feedthrough})")]
    NotStrictlyProper { feedthrough: f64 },
    #[error("algebraic loop: instantaneous loop gain equals -1")]
    AlgebraicLoop,
    #[error("invalid frequency response data: {0}")]
    InvalidFrf(String),
    #[error("frequency grids do not match")]
    GridMismatch,
    #[error("frequency grid too coarse near the critical point at omega = {omega}")]
    GridTooCoarse { omega: f64 },
    #[error("return difference 1 + J R vanishes at omega = {omega}")]
    SingularReturnDifference { omega: f64 },
    #[error("sequence length {got} does not match timestamp horizon {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("filter previews (n_L = {n_l}, n_Q = {n_q}) do not fit in buffer of length {buffer}")]
    PreviewExceedsBuffer {
        buffer: usize,
        n_l: usize,
        n_q: usize,
    },
    #[error("duplicate basis frequency {0}")]
    DuplicateFrequency(f64),
    #[error("nominal design infeasible: {0}")]
    NominalDesignInfeasible(String),
    #[error("intermittent design exhausted after {iterations} iterations")]
    DesignExhausted { iterations: usize },
    #[error("ill-posed loop: {0}")]
    IllPosedLoop(String),
    #[error("interpolation needs at least two timestamps, got {0}")]
    TooFewStamps(usize),
    #[error("horizon {horizon} too short, need at least {required} samples")]
    HorizonTooShort { horizon: usize, required: usize },
}
