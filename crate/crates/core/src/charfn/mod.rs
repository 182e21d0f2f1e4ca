//! Characteristic function f(x, V, tau, omega) = exp[A + B V + i omega x]
//! of forward log-moneyness under the linearly time-dependent Heston model,
//! by three routes: Kummer closed form (constant vol-of-vol), triconfluent
//! Heun series with residual-gated fallback (linear vol-of-vol), and the
//! numerical Riccati oracle.

mod closed;
mod constant;
mod heun;
mod params;
mod riccati;

pub use closed::b_closed_constant_eta;
pub(crate) use closed::b_closed_quality;
pub use constant::heston_constant_cf;
pub use heun::{b_heun_linear_eta, heun_aux, HeunAux, HeunEval, HeunOutcome};
pub use params::{LinearParams, ParamPath, ParamsFile};
pub use riccati::riccati_solve_path;

use num_complex::Complex64;
use std::cell::{Cell, RefCell};
use std::collections::HashMap;

use crate::error::Error;
use crate::quad::adaptive_gk;
use crate::Result;

/// Below this |alpha| the exact limit A = B = 0 is returned instead of
/// evaluating ratios of vanishing quantities (covers omega = 0 and the
/// martingale point omega = -i).
pub(crate) const ALPHA_ZERO_TOL: f64 = 1e-14;

/// alpha(omega) = -(omega^2 + i omega)/2, the constant Riccati source term.
pub fn riccati_alpha(omega: Complex64) -> Complex64 {
    -(omega * omega + Complex64::new(0.0, 1.0) * omega) / 2.0
}

/// beta(tau) = kappa(tau) - rho(tau) eta(tau) i omega.
pub fn riccati_beta<P: ParamPath>(path: &P, tau: f64, omega: Complex64) -> Complex64 {
    Complex64::new(path.kappa(tau), 0.0)
        - Complex64::new(0.0, path.rho(tau) * path.eta(tau)) * omega
}

/// gamma(tau) = eta(tau)^2 / 2.
pub fn riccati_gamma<P: ParamPath>(path: &P, tau: f64) -> f64 {
    let e = path.eta(tau);
    0.5 * e * e
}

/// Coefficient triple (A, B, C = i omega) of the exponential-affine
/// characteristic function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharFnValue {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
}

impl CharFnValue {
    /// Assemble f = exp[A + B V + C x].
    pub fn assemble(&self, x: f64, v: f64) -> Complex64 {
        (self.a + self.b * v + self.c * x).exp()
    }
}

/// Evaluation route for the characteristic function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    /// Closed form when eta1 = 0, Heun-with-fallback otherwise.
    Auto,
    /// Kummer closed form; requires eta1 = 0.
    Closed,
    /// Triconfluent Heun series with residual-gated fallback; requires eta1 != 0.
    Heun,
    /// Adaptive Runge-Kutta on the Riccati system.
    Numeric,
}

impl std::str::FromStr for Route {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Route::Auto),
            "closed" => Ok(Route::Closed),
            "heun" => Ok(Route::Heun),
            "numeric" => Ok(Route::Numeric),
            other => Err(Error::InvalidInput(format!(
                "unknown route '{other}' (expected auto|closed|heun|numeric)"
            ))),
        }
    }
}

impl std::fmt::Display for Route {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Route::Auto => "auto",
            Route::Closed => "closed",
            Route::Heun => "heun",
            Route::Numeric => "numeric",
        };
        f.write_str(s)
    }
}

/// Integrate A(omega, tau) = int_0^tau a(s) B(omega, s) ds by adaptive
/// Gauss-Kronrod quadrature (absolute tolerance 1e-10). B evaluations are
/// memoized per quadrature node since closed-form evaluations are expensive.
pub fn a_from_b<P, F>(params: &P, tau: f64, mut b_eval: F) -> Result<Complex64>
where
    P: ParamPath,
    F: FnMut(f64) -> Result<Complex64>,
{
    if tau == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let memo: RefCell<HashMap<u64, Complex64>> = RefCell::new(HashMap::new());
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let integrand = |s: f64| -> Complex64 {
        if failure.borrow().is_some() {
            return Complex64::new(0.0, 0.0);
        }
        let key = s.to_bits();
        if let Some(&b) = memo.borrow().get(&key) {
            return Complex64::new(params.drift_level(s), 0.0) * b;
        }
        match b_eval(s) {
            Ok(b) => {
                memo.borrow_mut().insert(key, b);
                Complex64::new(params.drift_level(s), 0.0) * b
            }
            Err(e) => {
                *failure.borrow_mut() = Some(e);
                Complex64::new(0.0, 0.0)
            }
        }
    };
    let quad = adaptive_gk(integrand, 0.0, tau, 1e-10, 400);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let (value, _err) = quad?;
    Ok(value)
}

fn coeffs_closed(params: &LinearParams, omega: Complex64, tau: f64) -> Result<CharFnValue> {
    let b = b_closed_constant_eta(params, omega, tau)?;
    let a = a_from_b(params, tau, |s| b_closed_constant_eta(params, omega, s))?;
    Ok(CharFnValue { a, b, c: Complex64::new(0.0, 1.0) * omega })
}

fn coeffs_heun(params: &LinearParams, omega: Complex64, tau: f64) -> Result<CharFnValue> {
    heun::heun_cf_coeffs(params, omega, tau).map(|(v, _)| v)
}

/// A, B, C by the selected route.
pub fn cf_coeffs(
    params: &LinearParams,
    omega: Complex64,
    tau: f64,
    route: Route,
) -> Result<CharFnValue> {
    match route {
        Route::Numeric => riccati_solve_path(params, omega, tau, 1e-10, 1e-12),
        Route::Closed => {
            if params.eta1 != 0.0 {
                return Err(Error::RouteMismatch(format!(
                    "closed route requires eta1 = 0, got {}",
                    params.eta1
                )));
            }
            coeffs_closed(params, omega, tau)
        }
        Route::Heun => {
            if params.eta1 == 0.0 {
                return Err(Error::RouteMismatch(
                    "heun route requires eta1 != 0".into(),
                ));
            }
            coeffs_heun(params, omega, tau)
        }
        Route::Auto => {
            if params.eta1 == 0.0 {
                coeffs_closed(params, omega, tau)
            } else {
                coeffs_heun(params, omega, tau)
            }
        }
    }
}

/// Numerical Riccati solution for linear parameters (the oracle route).
/// `tol` is the relative local tolerance; the absolute one is tol/100.
pub fn riccati_solve_numeric(
    params: &LinearParams,
    omega: Complex64,
    tau: f64,
    tol: f64,
) -> Result<CharFnValue> {
    riccati_solve_path(params, omega, tau, tol, tol * 1e-2)
}

/// The characteristic function f(x, V, tau, omega) itself.
pub fn char_fn(
    params: &LinearParams,
    x: f64,
    v: f64,
    tau: f64,
    omega: Complex64,
    route: Route,
) -> Result<Complex64> {
    if v < 0.0 {
        return Err(Error::InvalidParams(format!("V = {v} < 0")));
    }
    if tau < 0.0 {
        return Err(Error::InvalidParams(format!("tau = {tau} < 0")));
    }
    Ok(cf_coeffs(params, omega, tau, route)?.assemble(x, v))
}

/// Caching coefficient evaluator for a fixed (params, tau, route): pricing
/// integrates over omega and, across strikes, revisits the same nodes, while
/// A and B do not depend on the strike at all.
pub struct CfSolver<'a> {
    params: &'a LinearParams,
    tau: f64,
    route: Route,
    memo: RefCell<HashMap<(u64, u64), (Complex64, Complex64)>>,
    fallback_seen: Cell<bool>,
    worst_quality: Cell<f64>,
}

impl<'a> CfSolver<'a> {
    pub fn new(params: &'a LinearParams, tau: f64, route: Route) -> Self {
        Self {
            params,
            tau,
            route,
            memo: RefCell::new(HashMap::new()),
            fallback_seen: Cell::new(false),
            worst_quality: Cell::new(0.0),
        }
    }

    /// (A, B) at omega, memoized.
    pub fn ab(&self, omega: Complex64) -> Result<(Complex64, Complex64)> {
        let key = (omega.re.to_bits(), omega.im.to_bits());
        if let Some(&v) = self.memo.borrow().get(&key) {
            return Ok(v);
        }
        let value = self.compute(omega)?;
        self.memo.borrow_mut().insert(key, value);
        Ok(value)
    }

    fn compute(&self, omega: Complex64) -> Result<(Complex64, Complex64)> {
        // track closed-form cancellation quality for the pricer's truncation
        if matches!(self.route, Route::Closed)
            || (matches!(self.route, Route::Auto) && self.params.eta1 == 0.0)
        {
            if self.params.eta1 != 0.0 {
                return Err(Error::RouteMismatch(format!(
                    "closed route requires eta1 = 0, got {}",
                    self.params.eta1
                )));
            }
            let worst = Cell::new(0.0_f64);
            let b = {
                let e = b_closed_quality(self.params, omega, self.tau)?;
                worst.set(worst.get().max(e.quality));
                e.b
            };
            let a = a_from_b(self.params, self.tau, |s| {
                let e = b_closed_quality(self.params, omega, s)?;
                worst.set(worst.get().max(e.quality));
                Ok(e.b)
            })?;
            self.worst_quality.set(self.worst_quality.get().max(worst.get()));
            return Ok((a, b));
        }
        if matches!(self.route, Route::Heun | Route::Auto) && self.params.eta1 != 0.0 {
            let (v, fell_back) = heun::heun_cf_coeffs(self.params, omega, self.tau)?;
            if fell_back {
                self.fallback_seen.set(true);
            }
            return Ok((v.a, v.b));
        }
        let v = cf_coeffs(self.params, omega, self.tau, self.route)?;
        Ok((v.a, v.b))
    }

    pub fn fallback_seen(&self) -> bool {
        self.fallback_seen.get()
    }

    /// Worst cancellation-quality estimate seen in closed-form evaluations.
    pub fn worst_quality(&self) -> f64 {
        self.worst_quality.get()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn td_params() -> LinearParams {
        LinearParams {
            kappa1: 0.5,
            kappa2: 1.0,
            theta1: 0.0,
            theta2: 0.04,
            eta1: 0.0,
            eta2: 0.4,
            rho1: 0.1,
            rho2: -0.3,
        }
    }

    #[test]
    fn char_fn_normalization_and_martingale() {
        let p = td_params();
        for route in [Route::Auto, Route::Closed, Route::Numeric] {
            let f0 = char_fn(&p, 0.3, 0.04, 1.0, c(0.0, 0.0), route).unwrap();
            assert!((f0 - c(1.0, 0.0)).norm() < 1e-12, "f(0) != 1 on {route:?}");
            let fm = char_fn(&p, 0.3, 0.04, 1.0, c(0.0, -1.0), route).unwrap();
            assert!(
                (fm - c(0.3f64.exp(), 0.0)).norm() < 1e-9,
                "f(-i) != e^x on {route:?}"
            );
        }
    }

    #[test]
    fn a_from_b_zero_integrand() {
        let p = td_params();
        let a = a_from_b(&p, 1.5, |_| Ok(c(0.0, 0.0))).unwrap();
        assert_eq!(a, c(0.0, 0.0));
        let a0 = a_from_b(&p, 0.0, |_| Ok(c(1.0, 0.0))).unwrap();
        assert_eq!(a0, c(0.0, 0.0));
    }

    #[test]
    fn a_from_b_quadratic_drift() {
        // with B = 1 the integral is int_0^t kappa(s) theta(s) ds, a cubic
        let p = td_params();
        let tau = 2.0;
        let a = a_from_b(&p, tau, |_| Ok(c(1.0, 0.0))).unwrap();
        // kappa = 0.5 s + 1, theta = 0.04: integral = 0.04 (0.25 s^2 + s)
        let exact = 0.04 * (0.25 * tau * tau + tau);
        assert!((a.re - exact).abs() < 1e-12);
        assert!(a.im.abs() < 1e-14);
    }

    #[test]
    fn route_mismatch_errors() {
        let p = td_params(); // eta1 = 0
        assert!(matches!(
            cf_coeffs(&p, c(1.0, 0.0), 1.0, Route::Heun),
            Err(Error::RouteMismatch(_))
        ));
        let mut q = p;
        q.eta1 = 0.2;
        assert!(matches!(
            cf_coeffs(&q, c(1.0, 0.0), 1.0, Route::Closed),
            Err(Error::RouteMismatch(_))
        ));
    }

    #[test]
    fn route_parsing() {
        assert_eq!("auto".parse::<Route>().unwrap(), Route::Auto);
        assert_eq!("numeric".parse::<Route>().unwrap(), Route::Numeric);
        assert!("fft".parse::<Route>().is_err());
    }
}
