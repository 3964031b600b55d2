//! Crate-wide error type.

/// Everything that can go wrong while building states or running protocols.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("grid size {n} must be a power of two with at least {min} points")]
    BadGridSize { n: usize, min: usize },
    #[error("empty domain: x_min = {x_min} must be below x_max = {x_max}")]
    EmptyDomain { x_min: f64, x_max: f64 },
    #[error("packet width s0 = {s0} must be positive")]
    NonPositiveWidth { s0: f64 },
    #[error(
        "state amplitude at the domain edge is {edge_frac:.3e} of the peak \
         (limit {limit:.0e}); widen the domain or narrow the packet"
    )]
    EdgeSupport { edge_frac: f64, limit: f64 },
    #[error("cannot normalize a state with zero norm")]
    ZeroNorm,
    #[error("conditional state has vanishing overlap with the pointer (norm^2 = {norm_sq:.3e})")]
    VanishingOverlap { norm_sq: f64 },
    #[error("pointer spread sigma = {sigma} must be positive")]
    NonPositiveSigma { sigma: f64 },
    #[error("spread parameter {value} must be positive")]
    NonPositiveSpread { value: f64 },
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("time step dt = {dt} must be positive")]
    NonPositiveDt { dt: f64 },
    #[error("drift time tau = {tau} must be positive")]
    NonPositiveTau { tau: f64 },
    #[error("{what} must be positive, got {value}")]
    NonPositiveParameter { what: &'static str, value: f64 },
    #[error("need at least {min} {what}, got {got}")]
    TooFew { what: &'static str, min: usize, got: usize },
    #[error("censored fraction {fraction:.4} exceeds the configured bound {bound:.4}")]
    ExcessCensoring { fraction: f64, bound: f64 },
    #[error("velocity law {law} is a diagnostic mode and not allowed here")]
    DiagnosticLawRejected { law: &'static str },
    #[error("weak-value extrapolation needs strictly increasing positive taus, got {detail}")]
    BadTauLadder { detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;
