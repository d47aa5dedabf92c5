//! Error type shared by every module of the crate.

use thiserror::Error;

/// Which side of the weighted-shift criterion failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriterionSide {
    /// `lim sup |w_{-k} ... w_{-k-n}|^{1/n} < 1` fails.
    Left,
    /// `lim inf |w_k ... w_{k+n}|^{1/n} > 1` fails.
    Right,
}

impl std::fmt::Display for CriterionSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CriterionSide::Left => f.write_str("left (stable side needs margin < 1)"),
            CriterionSide::Right => f.write_str("right (unstable side needs margin > 1)"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("backend mismatch: {0}")]
    BackendMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("shift criterion fails on the {side} side: margin = {margin}")]
    CriterionFailed { side: CriterionSide, margin: f64 },

    #[error("not hyperbolic (finite dimension): eigenvalue modulus {modulus} is within {tolerance} of 1")]
    NotHyperbolic { modulus: f64, tolerance: f64 },

    #[error("matrix is singular or not square: {0}")]
    SingularMatrix(String),

    #[error("spectral splitting failed: {0}")]
    Splitting(String),

    #[error("constants not certifiable at t = {t}: no power n <= {cap} satisfies the decay bound")]
    NotCertifiable { t: f64, cap: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "Lip(beta) = {lip} exceeds the admissible eps = gamma (1 - t) / (c d (1 + t)) = {eps}"
    )]
    EpsExceeded { lip: f64, eps: f64 },

    #[error("contraction condition violated: {0}")]
    ContractionViolated(String),

    #[error("iteration cap of {cap} exceeded (last increment {last_increment:e})")]
    IterationCap { cap: usize, last_increment: f64 },

    #[error("series needs {needed} terms, above the cap of {cap}")]
    SeriesCap { needed: usize, cap: usize },

    #[error("epsilon too large for theta: series ratio {ratio} >= 1 ({which})")]
    EpsTooLarge { ratio: f64, which: &'static str },

    #[error("restriction norms are not contracting (|T|_M| = {norm_t_on_m}, |T^-1|_N| = {norm_tinv_on_n}); renorm first")]
    NotAdapted {
        norm_t_on_m: f64,
        norm_tinv_on_n: f64,
    },

    #[error("cutoff radius underflow: r = {r:e} below minimum {min:e} (nonlinearity too steep)")]
    CutoffUnderflow { r: f64, min: f64 },

    #[error("point is not a fixed point: |F(p) - p| = {defect:e}")]
    NotFixedPoint { defect: f64 },

    #[error("numerical overflow while {0}")]
    Overflow(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
