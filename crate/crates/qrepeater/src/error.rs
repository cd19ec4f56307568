use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("requested dimension {required} exceeds the configured maximum {max}")]
    DimensionOverflow { required: usize, max: usize },

    #[error("invalid subsystem index {index} for {count} subsystems")]
    InvalidSubsystem { index: usize, count: usize },

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("operator is not a projector (max |P^2 - P| = {deviation:.3e})")]
    NotProjector { deviation: f64 },

    #[error("density operator trace is {trace}, expected 1")]
    BadTrace { trace: f64 },

    #[error("density operator has eigenvalue {min_eigenvalue:.3e} below tolerance")]
    NotPositive { min_eigenvalue: f64 },

    #[error("state norm is {norm}, expected 1")]
    NotNormalized { norm: f64 },

    #[error("measurement outcome has probability {probability:.3e}; cannot normalize")]
    ImpossibleOutcome { probability: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("displacement amount {re}+{im}i must be purely imaginary")]
    NonImaginaryDisplacement { re: f64, im: f64 },

    #[error("odd cat state undefined: displacement offset is zero")]
    DegenerateCat,

    #[error("field amplitude {amplitude} lies outside the supplied field basis (residual norm {residual:.3e})")]
    OutsideFieldBasis { amplitude: String, residual: f64 },

    #[error("Fock cutoff {cutoff} too small: tail mass {tail_mass:.3e}")]
    FockTail { cutoff: usize, tail_mass: f64 },

    #[error("state is not Bell diagonal (max off-diagonal {off_diagonal:.3e})")]
    NotBellDiagonal { off_diagonal: f64 },

    #[error("inputs come from different segments: {0}")]
    MismatchedSegments(String),

    #[error("step size underflow at t = {t}: dt = {dt:.3e}, local error {error:.3e}")]
    StepUnderflow { t: f64, dt: f64, error: f64 },

    #[error("parameter hierarchy violated: {0}")]
    HierarchyViolated(String),

    #[error("target fidelity {target} unachievable; best F_final = {max_achievable}")]
    Infeasible { target: f64, max_achievable: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("configuration error: {0}")]
    Config(String),
}
