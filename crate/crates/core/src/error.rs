use thiserror::Error;

/// Every failure surfaced by the library.
///
/// The `Display` strings are single-line and stable; the CLI prints them
/// verbatim on stderr.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("degenerate basis")]
    DegenerateBasis,
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("already well-rounded")]
    AlreadyWellRounded,
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("reduce first: point lies outside the standard fundamental domain")]
    ReduceFirst,
    #[error("not hyperbolic: |trace| = {0}")]
    NotHyperbolic(f64),
    #[error("invalid Fenchel-Nielsen point: {0}")]
    InvalidFnPoint(String),
    #[error("gluing failed: relation residual {0:e}")]
    GluingFailed(f64),
    #[error("no fundamental domain: {0}")]
    FundamentalDomain(String),
    #[error("cutoff too deep: word bound {needed} exceeds cap {cap}")]
    CutoffTooDeep { needed: usize, cap: usize },
    #[error("same class")]
    SameClass,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate stratum: gram conditioning {0:e}")]
    DegenerateStratum(f64),
    #[error("stalled at flow time {time}: step below 1e-10 (systole {systole})")]
    Stalled { time: f64, systole: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
