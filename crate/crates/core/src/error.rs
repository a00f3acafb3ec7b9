//! Shared error type for all solver modules.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A law failed its construction checks (sign, monotonicity, parameter range).
    #[error("invalid law: {0}")]
    InvalidLaw(String),

    /// The tail integral of 1/f diverges: f is not superlinear.
    #[error("not superlinear: tail integral of 1/f(s) diverges ({0})")]
    NotSuperlinear(String),

    /// The Keller-Osserman integral of 1/sqrt(2G) diverges.
    #[error("Keller-Osserman condition fails: tail integral of 1/sqrt(2G) diverges ({0})")]
    KellerOssermanFails(String),

    /// Requested value lies outside the range of the monotone map being inverted.
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// Quadrature did not reach the requested tolerance.
    #[error("quadrature failed to converge: estimate {estimate}, error {error}")]
    QuadratureNonConverged { estimate: f64, error: f64 },

    /// The trajectory stayed below the blow-up cap past the configured horizon.
    #[error("cap not reached: u = {reached:.3e} < cap {cap:.3e} at horizon t = {horizon}")]
    CapNotReached { reached: f64, cap: f64, horizon: f64 },

    /// A flow evaluation hit the blow-up cap strictly inside the requested interval.
    #[error("trajectory blew past the cap at t = {t} (inside requested interval)")]
    BlowupInsideInterval { t: f64 },

    /// Sampled perturbation violates monotonicity in its state argument.
    #[error("perturbation is not monotone near y = {y} at t = {t}")]
    NonMonotonePerturbation { t: f64, y: f64 },

    /// Picard iteration on the representation identity failed to contract.
    #[error("fixed-point iteration diverged after {iterations} sweeps; residual history {history:?}")]
    FixedPointDiverged { iterations: usize, history: Vec<f64> },

    /// Control-window constraint 2*eps < T_inf violated.
    #[error("bad control window: 2*eps = {two_eps} must be < T_inf = {t_inf}")]
    BadWindow { two_eps: f64, t_inf: f64 },

    /// Kernel exponent outside (0, 1/q).
    #[error("bad kernel exponent: gamma = {gamma} not in (0, 1/q) with q = {q}")]
    BadExponent { gamma: f64, q: f64 },

    /// Periodic template does not close the loop at the period boundary.
    #[error("periodic template mismatch: |u(0) - u(period)| = {gap:.3e} exceeds {tol:.3e}")]
    TemplateMismatch { gap: f64, tol: f64 },

    /// Damped Newton could not reduce the residual any further.
    #[error("Newton stalled: residual {residual:.3e} after {iterations} iterations (damping floor hit {floor_hits} times)")]
    NewtonStalled { residual: f64, iterations: usize, floor_hits: usize },

    /// Grid-refinement cross-check disagreed beyond tolerance.
    #[error("grid refinement check failed: profiles differ by {diff:.3e} > {tol:.3e}")]
    NonConvergedGrid { diff: f64, tol: f64 },

    /// Forcing does not dominate absorption strongly enough for the requested lambda.
    #[error("domination gate failed: lambda = {lambda} <= threshold {threshold} (margin {margin})")]
    DominationFailed { lambda: f64, threshold: f64, margin: f64 },

    /// Fewer than the required number of samples in the terminal decade.
    #[error("insufficient decade: only {got} samples in the last decade, need {need}")]
    InsufficientDecade { got: usize, need: usize },

    /// A residual sample fell on the singular set of the exact solution.
    #[error("sample on singular set: eta_N = {eta_n} too close to the blow-up front {front}")]
    SampleOnSingularSet { eta_n: f64, front: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
