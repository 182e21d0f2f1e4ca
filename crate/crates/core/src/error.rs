//! Error types shared across the crate.

use num_complex::Complex64;
use thiserror::Error;

/// Unified error type for special functions, characteristic-function routes,
/// pricing, simulation and calibration.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Gamma evaluated at (or within 1e-12 of) a non-positive integer.
    #[error("gamma pole at z = {0}")]
    Pole(Complex64),

    /// A series did not meet its tolerance within the term budget.
    #[error("series failed to converge within {max_terms} terms (last term ratio {last_ratio:.3e})")]
    NoConvergence { max_terms: usize, last_ratio: f64 },

    /// Kummer U with b too close to an integer for the reflection formula.
    #[error("U(a,b,z) degenerate: b = {0} is within 1e-8 of an integer")]
    DegenerateB(Complex64),

    /// Power-series expansion requested around a singular point of the ODE.
    #[error("expansion point is not a regular point: leading coefficient is {0} at 0")]
    IrregularPoint(Complex64),

    /// Adaptive Runge-Kutta step size underflowed, likely a finite-time
    /// blow-up of the Riccati solution.
    #[error("ODE step size underflowed at tau = {tau} (suspected blow-up)")]
    StepFailure { tau: f64 },

    /// The closed-form denominator crossed a zero of the transformed solution.
    #[error("closed-form denominator underflow at tau = {tau}: |denom| = {magnitude:.3e}")]
    DenominatorUnderflow { tau: f64, magnitude: f64 },

    /// g1 = kappa1 - i rho1 eta omega vanished; handled by the degenerate
    /// constant-coefficient path, reported if that path is unusable too.
    #[error("degenerate g1 = {0} in the constant vol-of-vol closed form")]
    DegenerateG1(Complex64),

    /// Adaptive quadrature could not reach the requested tolerance.
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    /// Requested price is outside static no-arbitrage bounds for any vol.
    #[error("no implied volatility: price {price} violates no-arbitrage bounds [{lo}, {hi}]")]
    NoImpliedVol { price: f64, lo: f64, hi: f64 },

    /// Correlation left [-1, 1] somewhere on the simulation horizon.
    #[error("invalid correlation |rho({tau})| = {rho} > 1")]
    InvalidCorrelation { tau: f64, rho: f64 },

    /// Parameter set violates its sign/bound constraints.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Calibration could not start from (or project to) a feasible point.
    #[error("infeasible calibration start: {0}")]
    Infeasible(String),

    /// Optimizer hit its iteration cap before converging.
    #[error("optimizer reached the {0}-iteration cap without converging")]
    MaxIterations(usize),

    /// A characteristic-function route was requested that the parameter set
    /// does not support.
    #[error("route mismatch: {0}")]
    RouteMismatch(String),

    /// Malformed input file or value.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
