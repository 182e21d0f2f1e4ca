//! Kummer confluent hypergeometric functions M(a,b,z) and U(a,b,z) with
//! derivatives, for complex parameters and argument.
//!
//! M is the direct Taylor series. Its terms peak near exp(2 sqrt|az|) while
//! the sum itself can be orders of magnitude smaller, so the series core
//! escalates to double-double arithmetic once the predicted or measured
//! cancellation would eat into the f64 result. Every evaluation carries a
//! quality estimate (relative error scale) so callers can tell a trusted
//! value from a degraded one.

use num_complex::Complex64;
use std::f64::consts::PI;

use super::dd::{Dd, DdComplex};
use super::gamma::recip_gamma;
use super::{KahanComplex, SeriesPolicy};
use crate::error::Error;
use crate::Result;

const B_POLE_TOL: f64 = 1e-12;
const B_INTEGER_TOL: f64 = 1e-8;
/// Kummer transformation threshold: for Re(z) < 0 beyond this modulus the
/// alternating series cancels catastrophically, so M is evaluated as
/// e^z M(b-a, b, -z) instead.
const KUMMER_TRANSFORM_NORM: f64 = 30.0;
/// Predicted-cancellation threshold |a z| above which the series starts in
/// double-double directly (term peak ~ exp(2 sqrt|az|)).
const DD_UPFRONT: f64 = 25.0;
/// Measured f64 quality beyond which the series is redone in double-double.
const DD_ESCALATE: f64 = 1e-11;
/// Unit roundoff of a double-double significand.
const DD_EPS: f64 = 4.93e-32;

fn near_nonpositive_integer(z: Complex64, tol: f64) -> bool {
    let n = z.re.round();
    n <= 0.0 && Complex64::new(z.re - n, z.im).norm() < tol
}

fn near_integer(z: Complex64, tol: f64) -> bool {
    let n = z.re.round();
    Complex64::new(z.re - n, z.im).norm() < tol
}

/// Plain f64 Taylor summation with compensated accumulation. Returns the
/// value and a cancellation-based relative error estimate.
fn m_series_f64(
    a: Complex64,
    b: Complex64,
    z: Complex64,
    policy: &SeriesPolicy,
) -> Result<(Complex64, f64)> {
    let mut term = Complex64::new(1.0, 0.0);
    let mut acc = KahanComplex::default();
    acc.add(term);
    let mut max_term: f64 = 1.0;
    let mut consecutive_small = 0usize;
    let mut last_ratio = f64::INFINITY;

    for n in 0..policy.max_terms {
        let nf = n as f64;
        term = term * (a + nf) * z / ((b + nf) * (nf + 1.0));
        acc.add(term);
        let mag = term.norm();
        max_term = max_term.max(mag);
        let sum_mag = acc.value().norm();
        last_ratio = mag / sum_mag.max(f64::MIN_POSITIVE);
        // terms of M can dip transiently before growing again, so require
        // three consecutive small terms before declaring convergence
        if mag <= policy.rel_tol * sum_mag {
            consecutive_small += 1;
            if consecutive_small >= 3 {
                let value = acc.value();
                let quality =
                    f64::EPSILON * max_term / value.norm().max(f64::MIN_POSITIVE);
                return Ok((value, quality));
            }
        } else {
            consecutive_small = 0;
        }
        if !mag.is_finite() {
            return Err(Error::NoConvergence {
                max_terms: n + 1,
                last_ratio: f64::INFINITY,
            });
        }
    }
    Err(Error::NoConvergence { max_terms: policy.max_terms, last_ratio })
}

/// Double-double Taylor summation; same contract as [`m_series_f64`] but
/// with ~31-digit internal precision.
fn m_series_dd(
    a: Complex64,
    b: Complex64,
    z: Complex64,
    policy: &SeriesPolicy,
) -> Result<(DdComplex, f64)> {
    let a = DdComplex::from_c64(a);
    let b = DdComplex::from_c64(b);
    let z = DdComplex::from_c64(z);
    let one = DdComplex { re: Dd::from_f64(1.0), im: Dd::default() };
    let mut term = one;
    let mut sum = one;
    let mut max_term: f64 = 1.0;
    let mut consecutive_small = 0usize;
    let mut last_ratio = f64::INFINITY;

    for n in 0..policy.max_terms {
        let nf = n as f64;
        let a_n = DdComplex { re: a.re.add(Dd::from_f64(nf)), im: a.im };
        let b_n = DdComplex { re: b.re.add(Dd::from_f64(nf)), im: b.im };
        term = term.mul(a_n).mul(z).div(b_n).div_f64(nf + 1.0);
        sum = sum.add(term);
        let mag = term.norm_approx();
        max_term = max_term.max(mag);
        let sum_mag = sum.norm_approx();
        last_ratio = mag / sum_mag.max(f64::MIN_POSITIVE);
        if mag <= policy.rel_tol * sum_mag {
            consecutive_small += 1;
            if consecutive_small >= 3 {
                let quality = (DD_EPS * max_term / sum_mag.max(f64::MIN_POSITIVE))
                    .max(f64::EPSILON);
                return Ok((sum, quality));
            }
        } else {
            consecutive_small = 0;
        }
        if !mag.is_finite() {
            return Err(Error::NoConvergence {
                max_terms: n + 1,
                last_ratio: f64::INFINITY,
            });
        }
    }
    Err(Error::NoConvergence { max_terms: policy.max_terms, last_ratio })
}

/// M in double-double with the Kummer transformation and escalation policy
/// applied. The e^z scale factor of the transformation is applied in f64
/// (it is a scale, not a cancellation).
pub(crate) fn m_eval_dd(
    a: Complex64,
    b: Complex64,
    z: Complex64,
    policy: &SeriesPolicy,
) -> Result<(DdComplex, f64)> {
    if near_nonpositive_integer(b, B_POLE_TOL) {
        return Err(Error::Pole(b));
    }
    if z.norm() == 0.0 {
        return Ok((
            DdComplex::from_c64(Complex64::new(1.0, 0.0)),
            f64::EPSILON,
        ));
    }
    let (a, z, scale) = if z.re < 0.0 && z.norm() > KUMMER_TRANSFORM_NORM {
        (b - a, -z, Some(z.exp()))
    } else {
        (a, z, None)
    };

    let predicted_heavy = a.norm() * z.norm() > DD_UPFRONT;
    let (mut value, mut quality) = if predicted_heavy {
        m_series_dd(a, b, z, policy)?
    } else {
        let (v, q) = m_series_f64(a, b, z, policy)?;
        if q > DD_ESCALATE {
            m_series_dd(a, b, z, policy)?
        } else {
            (DdComplex::from_c64(v), q)
        }
    };
    if let Some(s) = scale {
        value = value.mul(DdComplex::from_c64(s));
        quality = quality.max(f64::EPSILON);
    }
    Ok((value, quality))
}

/// U in double-double via the reflection-style combination
///   U(a,b,z) = pi/sin(pi b) [ M(a,b,z) / (Gamma(1+a-b) Gamma(b))
///              - z^{1-b} M(1+a-b, 2-b, z) / (Gamma(a) Gamma(2-b)) ],
/// assembled in dd so the subtraction does not re-lose what the series kept.
/// The gamma factors and the principal-branch power are f64, which floors
/// the reachable quality at ~1e-16 relative before amplification.
pub(crate) fn u_eval_dd(
    a: Complex64,
    b: Complex64,
    z: Complex64,
    policy: &SeriesPolicy,
) -> Result<(DdComplex, f64)> {
    if near_integer(b, B_INTEGER_TOL) {
        return Err(Error::DegenerateB(b));
    }
    let one = Complex64::new(1.0, 0.0);
    let two = Complex64::new(2.0, 0.0);

    let (m1, q1) = m_eval_dd(a, b, z, policy)?;
    let (m2, q2) = m_eval_dd(one + a - b, two - b, z, policy)?;

    let coeff1 = recip_gamma(one + a - b) * recip_gamma(b);
    let coeff2 = recip_gamma(a) * recip_gamma(two - b);

    // principal branch of z^{1-b}, cut along the negative real axis
    let power = if z.norm() == 0.0 {
        if b.re < 1.0 {
            Complex64::new(0.0, 0.0)
        } else {
            return Err(Error::DenominatorUnderflow { tau: 0.0, magnitude: 0.0 });
        }
    } else {
        (z.ln() * (one - b)).exp()
    };

    let t1 = m1.mul(DdComplex::from_c64(coeff1));
    let t2 = m2.mul(DdComplex::from_c64(power * coeff2));
    let prefactor = Complex64::new(PI, 0.0) / (Complex64::new(PI, 0.0) * b).sin();
    let diff = t1.sub(t2);
    let value = diff.mul(DdComplex::from_c64(prefactor));

    let spread = t1.norm_approx() + t2.norm_approx();
    let diff_mag = diff.norm_approx().max(f64::MIN_POSITIVE);
    let quality = (q1.max(q2) + f64::EPSILON) * (spread / diff_mag).max(1.0);
    Ok((value, quality))
}

/// M with a cancellation-quality estimate (relative error scale).
pub(crate) fn kummer_m_quality(
    a: Complex64,
    b: Complex64,
    z: Complex64,
    policy: &SeriesPolicy,
) -> Result<(Complex64, f64)> {
    m_eval_dd(a, b, z, policy).map(|(v, q)| (v.to_c64(), q.max(f64::EPSILON)))
}

/// Kummer's function M(a,b,z) = 1F1(a;b;z).
///
/// Summed until the last term is below `rel_tol` of the partial sum for
/// three consecutive terms. For Re(z) < 0 with |z| > 30 the Kummer
/// transformation M(a,b,z) = e^z M(b-a,b,-z) is applied for conditioning.
pub fn kummer_m(
    a: Complex64,
    b: Complex64,
    z: Complex64,
    policy: &SeriesPolicy,
) -> Result<Complex64> {
    kummer_m_quality(a, b, z, policy).map(|(v, _)| v)
}

/// U with a cancellation-quality estimate (relative error scale).
pub(crate) fn kummer_u_quality(
    a: Complex64,
    b: Complex64,
    z: Complex64,
    policy: &SeriesPolicy,
) -> Result<(Complex64, f64)> {
    u_eval_dd(a, b, z, policy).map(|(v, q)| (v.to_c64(), q.max(f64::EPSILON)))
}

/// Kummer's function of the second kind, U(a,b,z). Requires b away from the
/// integers (the reflection formula divides by sin(pi b)).
pub fn kummer_u(
    a: Complex64,
    b: Complex64,
    z: Complex64,
    policy: &SeriesPolicy,
) -> Result<Complex64> {
    kummer_u_quality(a, b, z, policy).map(|(v, _)| v)
}

/// dM/dz = (a/b) M(a+1, b+1, z).
pub fn kummer_m_prime(
    a: Complex64,
    b: Complex64,
    z: Complex64,
    policy: &SeriesPolicy,
) -> Result<Complex64> {
    if near_nonpositive_integer(b, B_POLE_TOL) {
        return Err(Error::Pole(b));
    }
    if a.norm() == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let one = Complex64::new(1.0, 0.0);
    Ok(a / b * kummer_m(a + one, b + one, z, policy)?)
}

/// dU/dz = -a U(a+1, b+1, z).
pub fn kummer_u_prime(
    a: Complex64,
    b: Complex64,
    z: Complex64,
    policy: &SeriesPolicy,
) -> Result<Complex64> {
    if a.norm() == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let one = Complex64::new(1.0, 0.0);
    Ok(-a * kummer_u(a + one, b + one, z, policy)?)
}
