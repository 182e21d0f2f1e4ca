//! Closed-form B(omega, tau) for constant vol-of-vol and linear kappa,
//! theta, rho, in terms of Kummer M and U.
//!
//! The Riccati equation is linearized by B = -D'/(gamma D); for eta1 = 0 the
//! D-equation is D'' + (g1 tau + g2) D' + alpha gamma D = 0 with
//! g1 = kappa1 - i rho1 eta omega and g2 = kappa2 - i rho2 eta omega, which
//! the substitution z = -(g1 tau + g2)^2 / (2 g1) turns into the confluent
//! hypergeometric equation with b = 1/2. Writing D = A1 M + A2 U and fixing
//! A1/A2 = F/2 from D'(0) = 0 (F the U/M ratio at z(0), parameters shifted
//! by one) yields
//!
//!   B = -(alpha/g1)(g1 tau + g2)
//!        * [U(s+1, 3/2, z) - F M(s+1, 3/2, z)]
//!        / [F M(s, 1/2, z) + 2 U(s, 1/2, z)],      s = alpha gamma / (2 g1).
//!
//! When |g1| underflows, the D-equation has a constant damping coefficient
//! g2 and is solved in closed exponential form instead.
//!
//! The Kummer evaluation degrades where the series cancel harder than even
//! double-double arithmetic can absorb (the U combination loses a factor of
//! roughly exp|Re z| + exp(2 sqrt|s z|) through its gamma prefactors). Each
//! evaluation therefore carries a quality estimate, and when it cannot
//! certify the target accuracy the same solution D is re-evaluated from its
//! Taylor expansion in tau, stepped across [0, tau] in double-double. That
//! is the identical closed-form object in different coordinates, not a
//! fallback to the Riccati oracle.

use num_complex::Complex64;

use super::params::LinearParams;
use super::{riccati_alpha, ALPHA_ZERO_TOL};
use crate::error::Error;
use crate::specfun::dd::{Dd, DdComplex};
use crate::specfun::{m_eval_dd, u_eval_dd, SeriesPolicy};
use crate::Result;

/// |g1| below this is treated as the constant-damping degenerate case.
pub const G1_DEGENERATE_TOL: f64 = 1e-12;
/// Denominators below this magnitude signal a zero of D (Riccati blow-up).
const DENOM_UNDERFLOW: f64 = 1e-300;
/// Kummer-form quality beyond which the tau-series backstop takes over.
const TAU_SERIES_GATE: f64 = 1e-9;

pub(crate) struct ClosedEval {
    pub b: Complex64,
    /// Estimated relative error from cancellation inside the Kummer series.
    pub quality: f64,
}

/// B(omega, tau) from the constant-eta closed form. Requires eta1 = 0.
pub fn b_closed_constant_eta(
    params: &LinearParams,
    omega: Complex64,
    tau: f64,
) -> Result<Complex64> {
    b_closed_quality(params, omega, tau).map(|e| e.b)
}

pub(crate) fn b_closed_quality(
    params: &LinearParams,
    omega: Complex64,
    tau: f64,
) -> Result<ClosedEval> {
    if params.eta1 != 0.0 {
        return Err(Error::RouteMismatch(format!(
            "closed constant-eta form requires eta1 = 0, got {}",
            params.eta1
        )));
    }
    let zero = Complex64::new(0.0, 0.0);
    let alpha = riccati_alpha(omega);
    if tau == 0.0 || alpha.norm() < ALPHA_ZERO_TOL {
        return Ok(ClosedEval { b: zero, quality: 0.0 });
    }

    let eta = params.eta2;
    let gamma = 0.5 * eta * eta;
    let i = Complex64::new(0.0, 1.0);
    let g1 = Complex64::new(params.kappa1, 0.0) - i * params.rho1 * eta * omega;
    let g2 = Complex64::new(params.kappa2, 0.0) - i * params.rho2 * eta * omega;

    if g1.norm() < G1_DEGENERATE_TOL {
        return b_degenerate_g1(alpha, gamma, g2, tau);
    }

    match b_kummer_form(alpha, gamma, g1, g2, tau) {
        Ok(eval) if eval.quality <= TAU_SERIES_GATE && eval.b.is_finite() => Ok(eval),
        Ok(_) => b_tau_series(alpha, gamma, g1, g2, tau),
        Err(Error::DenominatorUnderflow { tau, magnitude }) => {
            Err(Error::DenominatorUnderflow { tau, magnitude })
        }
        Err(_) => b_tau_series(alpha, gamma, g1, g2, tau),
    }
}

/// The U/M form of B as displayed in the constant-eta solution.
fn b_kummer_form(
    alpha: Complex64,
    gamma: f64,
    g1: Complex64,
    g2: Complex64,
    tau: f64,
) -> Result<ClosedEval> {
    let policy = SeriesPolicy::default();
    let s = alpha * gamma / (2.0 * g1);
    let half = Complex64::new(0.5, 0.0);
    let three_half = Complex64::new(1.5, 0.0);
    let one = Complex64::new(1.0, 0.0);

    let z0 = -(g2 * g2) / (2.0 * g1);
    let gt = g1 * tau + g2;
    let zt = -(gt * gt) / (2.0 * g1);

    let (m0, qm0) = m_eval_dd(s + one, three_half, z0, &policy)?;
    if m0.norm_approx() < DENOM_UNDERFLOW {
        return Err(Error::DenominatorUnderflow { tau: 0.0, magnitude: m0.norm_approx() });
    }
    let (u0, qu0) = u_eval_dd(s + one, three_half, z0, &policy)?;
    let f_ratio = u0.div(m0);

    let (m1, qm1) = m_eval_dd(s + one, three_half, zt, &policy)?;
    let (u1, qu1) = u_eval_dd(s + one, three_half, zt, &policy)?;
    let (mh, qmh) = m_eval_dd(s, half, zt, &policy)?;
    let (uh, quh) = u_eval_dd(s, half, zt, &policy)?;

    // assembled in double-double; rescale by 1/F when the ratio is large so
    // neither side overflows
    let (num, den) = if f_ratio.norm_approx() > 1.0 {
        (
            u1.div(f_ratio).sub(m1),
            mh.add(uh.mul(DdComplex::from_c64(Complex64::new(2.0, 0.0))).div(f_ratio)),
        )
    } else {
        (
            u1.sub(f_ratio.mul(m1)),
            f_ratio.mul(mh).add(uh.mul(DdComplex::from_c64(Complex64::new(2.0, 0.0)))),
        )
    };
    if den.norm_approx() < DENOM_UNDERFLOW {
        return Err(Error::DenominatorUnderflow { tau, magnitude: den.norm_approx() });
    }

    let ratio = num.div(den).to_c64();
    let b = -(alpha / g1) * gt * ratio;

    // crude first-order propagation of the series cancellation estimates
    let q_series = [qm0, qu0, qm1, qu1, qmh, quh]
        .into_iter()
        .fold(0.0_f64, f64::max);
    let num_spread = u1.norm_approx() + f_ratio.norm_approx() * m1.norm_approx();
    let den_spread = f_ratio.norm_approx() * mh.norm_approx() + 2.0 * uh.norm_approx();
    let amplification = (num_spread / num.norm_approx().max(f64::MIN_POSITIVE))
        .max(den_spread / den.norm_approx().max(f64::MIN_POSITIVE))
        .max(1.0);
    let quality = (q_series * amplification).max(f64::EPSILON);

    Ok(ClosedEval { b, quality })
}

/// Evaluate the same solution D (D(0)=1, D'(0)=0) of
/// D'' + (g1 t + g2) D' + alpha gamma D = 0 from its Taylor expansion,
/// stepped across [0, tau] in double-double, then B = -D'/(gamma D).
/// Used when the Kummer-form conditioning cannot certify the result.
fn b_tau_series(
    alpha: Complex64,
    gamma: f64,
    g1: Complex64,
    g2: Complex64,
    tau: f64,
) -> Result<ClosedEval> {
    let q = DdComplex::from_c64(alpha * gamma);
    let p1 = DdComplex::from_c64(g1);
    let one = DdComplex { re: Dd::from_f64(1.0), im: Dd::default() };

    let mut d0 = one; // D
    let mut d1 = DdComplex::default(); // D'
    let mut t = 0.0_f64;
    let mut steps = 0usize;
    const MAX_STEPS: usize = 20_000;
    const MAX_TERMS: usize = 120;

    while t < tau {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::NoConvergence { max_terms: MAX_STEPS, last_ratio: f64::NAN });
        }
        // local expansion at t: P(u) = g1 u + (g1 t + g2)
        let p0 = DdComplex::from_c64(g1 * t + g2);
        let coef_scale =
            p0.norm_approx() + q.norm_approx().sqrt() + p1.norm_approx() * (tau - t);
        let mut h = (tau - t).min(8.0 / coef_scale.max(1e-12));

        'step: loop {
            // Taylor coefficients and sums at u = h, accumulated together
            let mut c_prev = d0; // c_m
            let mut c_curr = d1; // c_{m+1}
            let mut pow = Dd::from_f64(h); // h^{m+1}
            let mut sum_d = d0.add(DdComplex { re: d1.re.mul(pow), im: d1.im.mul(pow) });
            let mut sum_dp = d1;
            let mut max_term = sum_d.norm_approx();
            let mut small = 0usize;
            let mut converged = false;

            for m in 0..MAX_TERMS {
                let mf = m as f64;
                // c_{m+2} = -[p0 (m+1) c_{m+1} + (p1 m + q) c_m] / ((m+2)(m+1))
                let term_a = p0.mul(c_curr).mul(DdComplex {
                    re: Dd::from_f64(mf + 1.0),
                    im: Dd::default(),
                });
                let term_b = p1
                    .mul(DdComplex { re: Dd::from_f64(mf), im: Dd::default() })
                    .add(q)
                    .mul(c_prev);
                let denom = (mf + 2.0) * (mf + 1.0);
                let c_next = term_a.add(term_b).div_f64(-denom);

                // accumulate value and derivative terms
                let next_pow = pow.mul_f64(h); // h^{m+2}
                let tv = DdComplex { re: c_next.re.mul(next_pow), im: c_next.im.mul(next_pow) };
                sum_d = sum_d.add(tv);
                let td = DdComplex {
                    re: c_next.re.mul(pow).mul_f64(mf + 2.0),
                    im: c_next.im.mul(pow).mul_f64(mf + 2.0),
                };
                sum_dp = sum_dp.add(td);

                let mag = tv.norm_approx();
                max_term = max_term.max(mag);
                if !mag.is_finite() || max_term > 1e12 * (d0.norm_approx() + d1.norm_approx() + 1.0)
                {
                    h *= 0.5;
                    continue 'step;
                }
                if mag <= 1e-30 * sum_d.norm_approx().max(f64::MIN_POSITIVE) {
                    small += 1;
                    if small >= 3 {
                        converged = true;
                        break;
                    }
                } else {
                    small = 0;
                }
                c_prev = c_curr;
                c_curr = c_next;
                pow = next_pow;
            }
            if !converged {
                h *= 0.5;
                if h < 1e-12 * tau {
                    return Err(Error::NoConvergence {
                        max_terms: MAX_TERMS,
                        last_ratio: f64::NAN,
                    });
                }
                continue 'step;
            }
            d0 = sum_d;
            d1 = sum_dp;
            t += h;
            break;
        }

        // rescale so magnitudes stay O(1); B is scale-invariant
        let scale = d0.norm_approx().max(d1.norm_approx());
        if scale > 0.0 && (scale > 1e100 || scale < 1e-100) {
            let inv = 1.0 / scale;
            d0 = DdComplex { re: d0.re.mul_f64(inv), im: d0.im.mul_f64(inv) };
            d1 = DdComplex { re: d1.re.mul_f64(inv), im: d1.im.mul_f64(inv) };
        }
    }

    let d_mag = d0.norm_approx();
    if d_mag < 1e-200 {
        return Err(Error::DenominatorUnderflow { tau, magnitude: d_mag });
    }
    let b = -(d1.div(d0).to_c64()) / gamma;
    Ok(ClosedEval { b, quality: 1e-13 * (1.0 + steps as f64).sqrt() })
}

/// g1 = 0 case: D'' + g2 D' + alpha gamma D = 0 with D'(0) = 0, solved with
/// the characteristic roots lambda+- of the constant-coefficient equation.
fn b_degenerate_g1(
    alpha: Complex64,
    gamma: f64,
    g2: Complex64,
    tau: f64,
) -> Result<ClosedEval> {
    let d = (g2 * g2 - 4.0 * gamma * alpha).sqrt();
    if d.norm() < 1e-12 * (1.0 + g2.norm()) {
        // repeated root: B = alpha tau / (1 + g2 tau / 2)
        let b = alpha * tau / (Complex64::new(1.0, 0.0) + g2 * tau / 2.0);
        return Ok(ClosedEval { b, quality: f64::EPSILON });
    }
    // lambda+ = -2 alpha gamma / (g2 + d) (stable), lambda- = -(g2 + d)/2
    let lam_p = -2.0 * alpha * gamma / (g2 + d);
    let lam_m = -(g2 + d) / 2.0;
    let e = ((lam_m - lam_p) * tau).exp(); // = e^{-d tau}
    let den = lam_p * e - lam_m;
    if den.norm() < DENOM_UNDERFLOW {
        return Err(Error::DenominatorUnderflow { tau, magnitude: den.norm() });
    }
    let b = alpha * (Complex64::new(1.0, 0.0) - e) / den;
    Ok(ClosedEval { b, quality: f64::EPSILON })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charfn::heston_constant_cf;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn tau_zero_is_exactly_zero() {
        let p = LinearParams {
            kappa1: 0.5,
            kappa2: 1.0,
            theta1: 0.0,
            theta2: 0.04,
            eta1: 0.0,
            eta2: 0.4,
            rho1: 0.1,
            rho2: -0.3,
        };
        let b = b_closed_constant_eta(&p, c(2.0, 0.0), 0.0).unwrap();
        assert_eq!(b, c(0.0, 0.0));
    }

    #[test]
    fn omega_zero_and_martingale_are_zero() {
        let p = LinearParams {
            kappa1: 0.5,
            kappa2: 1.0,
            theta1: 0.0,
            theta2: 0.04,
            eta1: 0.0,
            eta2: 0.4,
            rho1: 0.1,
            rho2: -0.3,
        };
        assert_eq!(b_closed_constant_eta(&p, c(0.0, 0.0), 1.0).unwrap(), c(0.0, 0.0));
        assert_eq!(b_closed_constant_eta(&p, c(0.0, -1.0), 1.0).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn eta1_nonzero_is_a_route_mismatch() {
        let mut p = LinearParams::constant(2.0, 0.04, 0.3, -0.5);
        p.eta1 = 0.1;
        assert!(matches!(
            b_closed_constant_eta(&p, c(1.0, 0.0), 1.0),
            Err(Error::RouteMismatch(_))
        ));
    }

    #[test]
    fn degenerate_g1_matches_constant_heston() {
        // kappa1 = rho1 = 0 forces g1 = 0 and the model is constant-parameter
        let p = LinearParams::constant(2.0, 0.04, 0.3, -0.5);
        for &(om, tau) in &[(1.0, 0.5), (3.0, 1.5), (-2.0, 0.7), (17.0, 2.0)] {
            let b = b_closed_constant_eta(&p, c(om, 0.0), tau).unwrap();
            let oracle = heston_constant_cf(2.0, 0.04, 0.3, -0.5, c(om, 0.0), tau);
            assert!(
                (b - oracle.b).norm() <= 1e-10 * (1.0 + oracle.b.norm()),
                "omega={om} tau={tau}: {b} vs {}",
                oracle.b
            );
        }
    }
}
