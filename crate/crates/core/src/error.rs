use thiserror::Error;

/// Errors surfaced by construction and evaluation routines.
///
/// Budget violations carry the minimum that would have been needed so the
/// caller can retry with a larger allocation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("zero photon momentum is excluded from mode grids")]
    ZeroMomentum,
    #[error("symbol singular at mode {mode} (k = {k:?}, omega = {omega})")]
    SingularSymbol { mode: usize, k: [f64; 3], omega: f64 },
    #[error("mode-function length {got} does not match grid with {expected} modes")]
    GridMismatch { expected: usize, got: usize },
    #[error("guard {guard} too small, need at least {required}")]
    GuardTooSmall { guard: u32, required: u32 },
    #[error("truncation n0 = {n0} too small, need at least {required}")]
    TruncationTooSmall { n0: u32, required: u32 },
    #[error("{what} is not Hermitian (defect {defect:.3e})")]
    NonHermitian { what: String, defect: f64 },
    #[error("Pauli conjugation verification failed: {0}")]
    PauliVerification(String),
    #[error("cutoff profile infrared-divergent: ir_integral(s=3/2) = {value:.6e} exceeds ceiling {ceiling:.6e}")]
    InfraredDivergent { value: f64, ceiling: f64 },
    #[error("band limit violated: {0}")]
    Aliasing(String),
    #[error("coincident source positions (pair term undefined)")]
    CoincidentPositions,
    #[error("series remainder {remainder:.3e} above tolerance {tol:.3e}; raise the order")]
    SeriesRemainder { remainder: f64, tol: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown scenario '{name}'; known: {known}")]
    UnknownScenario { name: String, known: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
