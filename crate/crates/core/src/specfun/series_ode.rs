//! Power-series solver for second-order ODEs with polynomial coefficients,
//!
//!     leading(z) w'' + p(z) w' + q(z) w = 0,
//!
//! expanded around the origin, which must be a regular point. The coefficient
//! recurrence is exact; evaluation truncates once the terms of both w and w'
//! fall below the policy tolerance. The triconfluent Heun equation has
//! `leading = 1`, making its solutions entire and this engine a global
//! evaluator for them.

use num_complex::Complex64;

use super::{KahanComplex, SeriesPolicy};
use crate::error::Error;
use crate::Result;

/// Polynomial with complex coefficients, ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<Complex64>);

impl Poly {
    pub fn constant(c: Complex64) -> Self {
        Poly(vec![c])
    }

    pub fn from_reals(coeffs: &[f64]) -> Self {
        Poly(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.0.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    fn coeff(&self, k: usize) -> Complex64 {
        self.0.get(k).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }
}

/// A second-order linear ODE with polynomial coefficients.
#[derive(Debug, Clone)]
pub struct PolyCoeffOde {
    /// Multiplies w''.
    pub leading: Poly,
    /// Multiplies w'.
    pub p: Poly,
    /// Multiplies w.
    pub q: Poly,
}

impl PolyCoeffOde {
    /// Taylor coefficients of the solution with w(0) = w0, w'(0) = w0prime.
    ///
    /// From the z^m coefficient of the ODE,
    ///   l0 (m+2)(m+1) c_{m+2} = -[ sum_{k>=1} l_k (m-k+2)(m-k+1) c_{m-k+2}
    ///                              + sum_k p_k (m-k+1) c_{m-k+1}
    ///                              + sum_k q_k c_{m-k} ].
    pub fn series_coefficients(
        &self,
        w0: Complex64,
        w0prime: Complex64,
        n_terms: usize,
    ) -> Result<Vec<Complex64>> {
        let l0 = self.leading.coeff(0);
        if l0.norm() == 0.0 {
            return Err(Error::IrregularPoint(l0));
        }
        let mut c = Vec::with_capacity(n_terms.max(2));
        c.push(w0);
        c.push(w0prime);
        for m in 0..n_terms.saturating_sub(2) {
            let mut rhs = Complex64::new(0.0, 0.0);
            for k in 1..self.leading.0.len() {
                if m + 2 >= k {
                    let idx = m + 2 - k;
                    if idx < c.len() {
                        rhs += self.leading.coeff(k)
                            * Complex64::new((idx as f64) * (idx as f64 - 1.0), 0.0)
                            * c[idx];
                    }
                }
            }
            for k in 0..self.p.0.len() {
                if m + 1 >= k {
                    let idx = m + 1 - k;
                    if idx < c.len() {
                        rhs += self.p.coeff(k) * Complex64::new(idx as f64, 0.0) * c[idx];
                    }
                }
            }
            for k in 0..self.q.0.len() {
                if m >= k {
                    let idx = m - k;
                    if idx < c.len() {
                        rhs += self.q.coeff(k) * c[idx];
                    }
                }
            }
            let denom = l0 * Complex64::new(((m + 2) * (m + 1)) as f64, 0.0);
            c.push(-rhs / denom);
        }
        Ok(c)
    }

    /// Solve for the full series once; reuse across evaluation points.
    pub fn solve_series(
        &self,
        w0: Complex64,
        w0prime: Complex64,
        policy: &SeriesPolicy,
    ) -> Result<SeriesSolution> {
        let coeffs = self.series_coefficients(w0, w0prime, policy.max_terms)?;
        Ok(SeriesSolution { coeffs, policy: *policy })
    }
}

/// Taylor-series solution of a [`PolyCoeffOde`] around the origin.
#[derive(Debug, Clone)]
pub struct SeriesSolution {
    coeffs: Vec<Complex64>,
    policy: SeriesPolicy,
}

impl SeriesSolution {
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Evaluate w and w' at z with truncation control.
    pub fn eval(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        let (w, wp, _) = self.eval_inner(z)?;
        Ok((w, wp))
    }

    /// Evaluate w, w' and w'' at z; w'' comes from the same coefficient
    /// recurrence (term-wise differentiation), not from the ODE identity, so
    /// residual checks against the ODE stay meaningful.
    pub fn eval_with_second(&self, z: Complex64) -> Result<(Complex64, Complex64, Complex64)> {
        self.eval_inner(z)
    }

    fn eval_inner(&self, z: Complex64) -> Result<(Complex64, Complex64, Complex64)> {
        let zero = Complex64::new(0.0, 0.0);
        if z.norm() == 0.0 {
            // only the first three coefficients contribute at z = 0
            let w = self.coeffs.first().copied().unwrap_or(zero);
            let wp = self.coeffs.get(1).copied().unwrap_or(zero);
            let wpp = self.coeffs.get(2).map_or(zero, |&c2| 2.0 * c2);
            return Ok((w, wp, wpp));
        }

        let mut w = KahanComplex::default();
        let mut wp = KahanComplex::default();
        let mut wpp = KahanComplex::default();
        // z^{n-2}; w term uses z^n = zp2 * z^2, w' term z^{n-1} = zp2 * z
        let mut consecutive_small = 0usize;
        let mut last_ratio = f64::INFINITY;
        let mut z_pow = Complex64::new(1.0, 0.0);
        let mut prev1 = Complex64::new(0.0, 0.0); // z^{n-1}
        let mut prev2 = Complex64::new(0.0, 0.0); // z^{n-2}

        for (n, &cn) in self.coeffs.iter().enumerate() {
            let nf = n as f64;
            let term_w = cn * z_pow;
            w.add(term_w);
            if n >= 1 {
                wp.add(cn * Complex64::new(nf, 0.0) * prev1);
            }
            if n >= 2 {
                wpp.add(cn * Complex64::new(nf * (nf - 1.0), 0.0) * prev2);
            }
            let w_mag = w.value().norm().max(f64::MIN_POSITIVE);
            let ratio = term_w.norm() / w_mag;
            last_ratio = ratio;
            if ratio <= self.policy.rel_tol && n >= 4 {
                consecutive_small += 1;
                if consecutive_small >= 3 {
                    return Ok((w.value(), wp.value(), wpp.value()));
                }
            } else {
                consecutive_small = 0;
            }
            prev2 = prev1;
            prev1 = z_pow;
            z_pow *= z;
        }
        if last_ratio <= self.policy.rel_tol * 10.0 {
            // converged to within an order of the tolerance at the cap
            return Ok((w.value(), wp.value(), wpp.value()));
        }
        Err(Error::NoConvergence {
            max_terms: self.coeffs.len(),
            last_ratio,
        })
    }
}

/// Evaluate the unique series solution of `ode` with w(0) = w0 and
/// w'(0) = w0prime at the point z, returning (w, w').
pub fn series_solve_poly_ode(
    ode: &PolyCoeffOde,
    w0: Complex64,
    w0prime: Complex64,
    z: Complex64,
    policy: &SeriesPolicy,
) -> Result<(Complex64, Complex64)> {
    ode.solve_series(w0, w0prime, policy)?.eval(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn one() -> Complex64 {
        c(1.0, 0.0)
    }

    fn zero() -> Complex64 {
        c(0.0, 0.0)
    }

    #[test]
    fn cosh_from_w_double_prime_minus_w() {
        // w'' - w = 0, w(0)=1, w'(0)=0  =>  w = cosh
        let ode = PolyCoeffOde {
            leading: Poly::constant(one()),
            p: Poly(vec![]),
            q: Poly::constant(c(-1.0, 0.0)),
        };
        let (w, wp) =
            series_solve_poly_ode(&ode, one(), zero(), one(), &SeriesPolicy::default()).unwrap();
        assert!((w.re - 1.5430806348152438).abs() < 1e-14);
        assert!((wp.re - 1.0f64.sinh()).abs() < 1e-14);
    }

    #[test]
    fn triconfluent_with_vanishing_w_term_is_constant() {
        // w'' - 3 z^2 w' = 0 with w(0)=1, w'(0)=0 has solution w = 1.
        // This is the canonical triconfluent equation with a = 0, b = 3.
        let ode = PolyCoeffOde {
            leading: Poly::constant(one()),
            p: Poly::from_reals(&[0.0, 0.0, -3.0]),
            q: Poly(vec![]),
        };
        let (w, wp) =
            series_solve_poly_ode(&ode, one(), zero(), c(0.5, 0.0), &SeriesPolicy::default())
                .unwrap();
        assert_eq!(w, one());
        assert_eq!(wp, zero());
    }

    #[test]
    fn irregular_point_is_rejected() {
        // z w'' + w = 0 has a singular point at the origin
        let ode = PolyCoeffOde {
            leading: Poly(vec![zero(), one()]),
            p: Poly(vec![]),
            q: Poly::constant(one()),
        };
        assert!(matches!(
            series_solve_poly_ode(&ode, one(), zero(), one(), &SeriesPolicy::default()),
            Err(Error::IrregularPoint(_))
        ));
    }

    #[test]
    fn residual_vanishes_at_evaluation_point() {
        // airy-like: w'' - z w = 0
        let ode = PolyCoeffOde {
            leading: Poly::constant(one()),
            p: Poly(vec![]),
            q: Poly(vec![zero(), c(-1.0, 0.0)]),
        };
        let sol = ode.solve_series(one(), c(0.3, -0.2), &SeriesPolicy::default()).unwrap();
        for &z in &[c(0.7, 0.0), c(-1.1, 0.4), c(0.0, 1.3)] {
            let (w, wp, wpp) = sol.eval_with_second(z).unwrap();
            let residual =
                (ode.leading.eval(z) * wpp + ode.p.eval(z) * wp + ode.q.eval(z) * w).norm();
            assert!(residual <= 1e-9 * (1.0 + w.norm()), "residual {residual} at {z}");
        }
    }

    #[test]
    fn exp_series_derivative_consistency() {
        // w'' - w' = 0 => w = c1 + c2 e^z; with w(0)=1, w'(0)=1 => w = e^z
        let ode = PolyCoeffOde {
            leading: Poly::constant(one()),
            p: Poly::constant(c(-1.0, 0.0)),
            q: Poly(vec![]),
        };
        let z = c(0.9, 0.4);
        let (w, wp) =
            series_solve_poly_ode(&ode, one(), one(), z, &SeriesPolicy::default()).unwrap();
        let expect = z.exp();
        assert!((w - expect).norm() < 1e-13);
        assert!((wp - expect).norm() < 1e-13);
    }
}
