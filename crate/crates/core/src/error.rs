use num_complex::Complex64;
use thiserror::Error;

use crate::profile::{BenchInfo, ProfileSolution};

/// Errors raised across the stability pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Radicand of the burned-state formula is negative: no detonation end state.
    #[error("(u_plus={u_plus}, q={q}) lies beyond the Chapman-Jouguet boundary")]
    BeyondCj { u_plus: f64, q: f64 },

    #[error("degenerate end-state linearization: {0}")]
    DegenerateLinearization(String),

    /// `bench` is the longest stretch of the last iterate near the weak
    /// burned state; [`BenchInfo::qualifies`] tells whether it is flat.
    #[error("profile solver failed: {reason}")]
    NoProfile {
        reason: String,
        bench: Option<BenchInfo>,
        last_iterate: Option<Box<ProfileSolution>>,
    },

    #[error("profile tail decays too slowly: |x| cap {cap} reached with endpoint error {endpoint_error:.3e}")]
    SlowDecay { cap: f64, endpoint_error: f64 },

    #[error("continuation stopped at parameter index {index}: {source}")]
    ContinuationFrontier {
        index: usize,
        last_good: Option<Box<crate::model::ModelParams>>,
        source: Box<Error>,
    },

    #[error("spectral gap collapsed ({gap:.3e}) at lambda = {lambda}")]
    FrameDegeneracy { lambda: Complex64, gap: f64 },

    #[error("Evans integrator step size underflow at x = {x:.6}")]
    Stiffness { x: f64 },

    #[error("winding number not certified: segment {from} -> {to} still has argument step {arg_step:.3}")]
    UncertifiedWinding {
        from: Complex64,
        to: Complex64,
        arg_step: f64,
    },

    #[error("Evans function nearly vanishes on the contour at lambda = {lambda} (|E| = {modulus:.3e})")]
    NearZeroOnContour { lambda: Complex64, modulus: f64 },

    #[error("zero activation energy profile has no connection: {0}")]
    NoConnection(String),

    #[error("bench frontier not bracketed on [{lo}, {hi}]")]
    FrontierNotBracketed { lo: f64, hi: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
