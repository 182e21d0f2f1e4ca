//! Heston stochastic-volatility model with linearly time-dependent parameters.
//!
//! The variance process follows a CIR-type square-root diffusion whose mean
//! reversion speed, mean level, vol-of-vol and spot-vol correlation are all
//! affine functions of time. The library computes the characteristic function
//! of forward log-moneyness `exp[A(ω,τ) + B(ω,τ)V + iωx]` by three routes:
//!
//! * an exact closed form in confluent hypergeometric (Kummer) functions for
//!   constant vol-of-vol,
//! * an experimental triconfluent-Heun series route for linear vol-of-vol,
//!   guarded by a Riccati residual check with automatic numerical fallback,
//! * an adaptive Runge-Kutta integration of the Riccati system, which doubles
//!   as the ground-truth oracle for the closed forms.
//!
//! On top of the characteristic function sit a Gil-Pelaez Fourier pricer for
//! European options, a full-truncation Euler Monte Carlo engine, and a
//! Nelder-Mead calibrator that fits the eight linear coefficients to option
//! quotes.

pub mod calib;
pub mod charfn;
pub mod error;
pub mod mcsim;
pub mod pricer;
pub mod quad;
pub mod specfun;

pub use charfn::{
    char_fn, heston_constant_cf, riccati_solve_numeric, CharFnValue, LinearParams, ParamPath,
    Route,
};
pub use error::Error;
pub use num_complex::Complex64;
pub use pricer::{MarketContext, PriceResult};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
