//! Numerical integration of the characteristic-function ODE system
//!
//!     dA/dtau = a(tau) B,                A(omega, 0) = 0,
//!     dB/dtau = alpha - beta(tau) B + gamma(tau) B^2,   B(omega, 0) = 0,
//!
//! with an embedded Dormand-Prince 4(5) pair on the complex two-component
//! state. This is the ground-truth oracle for every closed form in the
//! crate and accepts arbitrary (not just linear) parameter paths.

use num_complex::Complex64;

use super::params::ParamPath;
use super::{riccati_alpha, CharFnValue, ALPHA_ZERO_TOL};
use crate::error::Error;
use crate::Result;

// Dormand-Prince coefficients.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 5th-order minus embedded 4th-order weights (error coefficients)
const E1: f64 = 35.0 / 384.0 - 5179.0 / 57600.0;
const E3: f64 = 500.0 / 1113.0 - 7571.0 / 16695.0;
const E4: f64 = 125.0 / 192.0 - 393.0 / 640.0;
const E5: f64 = -2187.0 / 6784.0 - -92097.0 / 339200.0;
const E6: f64 = 11.0 / 84.0 - 187.0 / 2100.0;
const E7: f64 = -1.0 / 40.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

type State = [Complex64; 2]; // [A, B]

fn rhs<P: ParamPath>(path: &P, alpha: Complex64, omega: Complex64, tau: f64, y: &State) -> State {
    let b = y[1];
    let beta = Complex64::new(path.kappa(tau), 0.0)
        - Complex64::new(0.0, 1.0) * Complex64::new(path.rho(tau) * path.eta(tau), 0.0) * omega;
    let gamma = 0.5 * path.eta(tau) * path.eta(tau);
    let db = alpha - beta * b + gamma * b * b;
    let da = Complex64::new(path.drift_level(tau), 0.0) * b;
    [da, db]
}

fn add_scaled(y: &State, k: &[State], w: &[(usize, f64)], h: f64) -> State {
    let mut out = *y;
    for &(i, c) in w {
        out[0] += k[i][0] * (c * h);
        out[1] += k[i][1] * (c * h);
    }
    out
}

/// Integrate the system over [0, tau] for an arbitrary parameter path.
///
/// `rtol`/`atol` are the per-component local error tolerances per unit step.
pub fn riccati_solve_path<P: ParamPath>(
    path: &P,
    omega: Complex64,
    tau: f64,
    rtol: f64,
    atol: f64,
) -> Result<CharFnValue> {
    let i_omega = Complex64::new(0.0, 1.0) * omega;
    let zero = Complex64::new(0.0, 0.0);
    if tau == 0.0 {
        return Ok(CharFnValue { a: zero, b: zero, c: i_omega });
    }
    let alpha = riccati_alpha(omega);
    if alpha.norm() < ALPHA_ZERO_TOL {
        // alpha = 0 makes B = 0 the exact solution, hence A = 0
        return Ok(CharFnValue { a: zero, b: zero, c: i_omega });
    }

    let mut t = 0.0_f64;
    let mut y: State = [zero, zero];
    let mut h = tau / 100.0;
    let h_min = tau * 1e-14;
    let mut k1 = rhs(path, alpha, omega, t, &y);

    while t < tau {
        if h < h_min {
            return Err(Error::StepFailure { tau: t });
        }
        if t + h > tau {
            h = tau - t;
        }

        let y2 = add_scaled(&y, &[k1], &[(0, A21)], h);
        let k2 = rhs(path, alpha, omega, t + C2 * h, &y2);
        let y3 = add_scaled(&y, &[k1, k2], &[(0, A31), (1, A32)], h);
        let k3 = rhs(path, alpha, omega, t + C3 * h, &y3);
        let y4 = add_scaled(&y, &[k1, k2, k3], &[(0, A41), (1, A42), (2, A43)], h);
        let k4 = rhs(path, alpha, omega, t + C4 * h, &y4);
        let y5 = add_scaled(
            &y,
            &[k1, k2, k3, k4],
            &[(0, A51), (1, A52), (2, A53), (3, A54)],
            h,
        );
        let k5 = rhs(path, alpha, omega, t + C5 * h, &y5);
        let y6 = add_scaled(
            &y,
            &[k1, k2, k3, k4, k5],
            &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)],
            h,
        );
        let k6 = rhs(path, alpha, omega, t + h, &y6);
        let y_new = add_scaled(
            &y,
            &[k1, k2, k3, k4, k5, k6],
            &[(0, B1), (2, B3), (3, B4), (4, B5), (5, B6)],
            h,
        );
        let k7 = rhs(path, alpha, omega, t + h, &y_new);

        // embedded error estimate, componentwise scaled
        let mut err_sq = 0.0;
        for c in 0..2 {
            let e = (k1[c] * E1 + k3[c] * E3 + k4[c] * E4 + k5[c] * E5 + k6[c] * E6
                + k7[c] * E7)
                * h;
            let scale = atol + rtol * y[c].norm().max(y_new[c].norm());
            let r = e.norm() / scale;
            err_sq += r * r;
        }
        let err = (err_sq / 2.0).sqrt();

        if !err.is_finite() {
            h *= 0.2;
            continue;
        }
        if err <= 1.0 {
            t += h;
            y = y_new;
            k1 = k7; // FSAL
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
    }

    Ok(CharFnValue { a: y[0], b: y[1], c: i_omega })
}
