//! Complex-argument special functions: gamma, the Kummer confluent
//! hypergeometric pair M and U with derivatives, and a power-series engine
//! for second-order ODEs with polynomial coefficients (the evaluator behind
//! the triconfluent Heun solutions).

pub(crate) mod dd;
mod gamma;
mod kummer;
mod series_ode;

pub use gamma::{complex_gamma, recip_gamma};
pub use kummer::{kummer_m, kummer_m_prime, kummer_u, kummer_u_prime};
pub(crate) use kummer::{kummer_m_quality, kummer_u_quality, m_eval_dd, u_eval_dd};
pub use series_ode::{series_solve_poly_ode, Poly, PolyCoeffOde, SeriesSolution};

/// Convergence policy for all series summations in this module.
#[derive(Debug, Clone, Copy)]
pub struct SeriesPolicy {
    /// Relative tolerance on the last term against the partial sum.
    pub rel_tol: f64,
    /// Hard cap on the number of terms.
    pub max_terms: usize,
}

impl SeriesPolicy {
    pub fn new(rel_tol: f64, max_terms: usize) -> Self {
        assert!(rel_tol > 0.0, "rel_tol must be positive");
        assert!(max_terms >= 10, "max_terms must be at least 10");
        Self { rel_tol, max_terms }
    }
}

impl Default for SeriesPolicy {
    fn default() -> Self {
        Self { rel_tol: 1e-14, max_terms: 1000 }
    }
}

use num_complex::Complex64;

/// Compensated (Kahan-Babuska-Neumaier) accumulator for complex sums.
/// Series of Kummer type can cancel heavily; the compensation recovers the
/// rounding part of it even when individual terms dwarf the running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanComplex {
    sum: Complex64,
    comp: Complex64,
}

#[inline]
fn neumaier_add(sum: &mut f64, comp: &mut f64, term: f64) {
    let t = *sum + term;
    if sum.abs() >= term.abs() {
        *comp += (*sum - t) + term;
    } else {
        *comp += (term - t) + *sum;
    }
    *sum = t;
}

impl KahanComplex {
    pub fn add(&mut self, term: Complex64) {
        neumaier_add(&mut self.sum.re, &mut self.comp.re, term.re);
        neumaier_add(&mut self.sum.im, &mut self.comp.im, term.im);
    }

    pub fn value(&self) -> Complex64 {
        self.sum + self.comp
    }
}

/// ln(1 + z) accurate for small |z|, principal branch otherwise.
pub(crate) fn ln_1p_complex(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        // 5 terms leave a relative error below 1e-20 at |z| = 1e-4
        let z2 = z * z;
        z - z2 / 2.0 + z2 * z / 3.0 - z2 * z2 / 4.0 + z2 * z2 * z / 5.0
    } else {
        (Complex64::new(1.0, 0.0) + z).ln()
    }
}
