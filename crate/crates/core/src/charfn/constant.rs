//! Closed-form characteristic-function coefficients for the classic
//! constant-parameter Heston model, written in the numerically stable
//! "little trap" arrangement. Serves as a test oracle and as the fully
//! degenerate (all slopes zero) route.

use num_complex::Complex64;

use super::{riccati_alpha, CharFnValue, ALPHA_ZERO_TOL};
use crate::specfun::ln_1p_complex as ln_1p;

/// A(omega, tau) and B(omega, tau) for constant kappa, theta, eta, rho.
pub fn heston_constant_cf(
    kappa: f64,
    theta: f64,
    eta: f64,
    rho: f64,
    omega: Complex64,
    tau: f64,
) -> CharFnValue {
    let zero = Complex64::new(0.0, 0.0);
    let i_omega = Complex64::new(0.0, 1.0) * omega;
    let alpha = riccati_alpha(omega);
    if tau == 0.0 || alpha.norm() < ALPHA_ZERO_TOL {
        return CharFnValue { a: zero, b: zero, c: i_omega };
    }

    let beta = Complex64::new(kappa, 0.0) - Complex64::new(0.0, rho * eta) * omega;
    let gamma = 0.5 * eta * eta;
    let kt = kappa * theta;

    let d = (beta * beta - 4.0 * gamma * alpha).sqrt();
    if d.norm() < 1e-12 * (1.0 + beta.norm()) {
        // double-root limit of the Riccati solution
        let bt = beta * tau;
        let b = 2.0 * alpha * tau / (2.0 + bt);
        let a = kt / gamma * (bt / 2.0 - ln_1p(bt / 2.0));
        return CharFnValue { a, b, c: i_omega };
    }

    // beta - d = 4 alpha gamma / (beta + d) avoids cancellation as eta -> 0
    let bpd = beta + d;
    let r_minus = 2.0 * alpha / bpd;
    let g = 4.0 * alpha * gamma / (bpd * bpd);
    let e = (-d * tau).exp();

    let b = r_minus * (Complex64::new(1.0, 0.0) - e)
        / (Complex64::new(1.0, 0.0) - g * e);
    let log_term = ln_1p(-g * e) - ln_1p(-g);
    let a = kt * (r_minus * tau - log_term / gamma);

    CharFnValue { a, b, c: i_omega }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_and_martingale_points() {
        for om in [c(0.0, 0.0), c(0.0, -1.0)] {
            let v = heston_constant_cf(2.0, 0.04, 0.3, -0.5, om, 1.0);
            assert_eq!(v.a, c(0.0, 0.0));
            assert_eq!(v.b, c(0.0, 0.0));
        }
    }

    #[test]
    fn tau_zero_initial_conditions() {
        let v = heston_constant_cf(2.0, 0.04, 0.3, -0.5, c(1.7, 0.0), 0.0);
        assert_eq!(v.a, c(0.0, 0.0));
        assert_eq!(v.b, c(0.0, 0.0));
        assert_eq!(v.c, c(0.0, 1.7));
    }

    #[test]
    fn tiny_eta_is_stable() {
        // near-deterministic variance: B should approach the eta -> 0 limit
        // B0 = alpha (1 - e^{-beta tau}) / beta without blowing up
        let omega = c(1.5, 0.0);
        let alpha = riccati_alpha(omega);
        let kappa = 2.0;
        let tau = 1.0;
        let v = heston_constant_cf(kappa, 0.04, 1e-7, 0.0, omega, tau);
        let beta = c(kappa, 0.0);
        let b0 = alpha * (c(1.0, 0.0) - (-beta * tau).exp()) / beta;
        assert!((v.b - b0).norm() < 1e-9 * (1.0 + b0.norm()));
        assert!(v.b.norm() < 10.0);
    }
}
