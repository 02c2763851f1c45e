use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("overflow: gamma({0}) exceeds the double-precision range")]
    Overflow(f64),

    #[error("index error: {0}")]
    Index(String),

    #[error("split point r = {split} must lie in (0, {t_n})")]
    SplitDomain { split: f64, t_n: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("CFL violation: ratio {ratio:.6} exceeds the monotonicity limit {limit:.6}")]
    Cfl { ratio: f64, limit: f64 },

    #[error("grid does not resolve the oscillation: dx = {dx} > eps/16 = {limit}")]
    Resolution { dx: f64, limit: f64 },

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("slope {slope} outside the tabulated range [{min}, {max}]")]
    InterpolationRange { slope: f64, min: f64, max: f64 },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("form error: {0}")]
    Form(String),

    #[error("certification error: {0}")]
    Certification(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}
