//! European option prices from the characteristic function by Gil-Pelaez
//! Fourier inversion, in the forward log-moneyness coordinate
//! x0 = log(S0 e^{rT} / K):
//!
//!     P2 = 1/2 + (1/pi) int_0^inf Re[ f(w) / (i w) ] dw
//!     P1 = 1/2 + (1/pi) int_0^inf Re[ f(w - i) / (i w f(-i)) ] dw
//!     call = e^{-rT} K [ f(-i) P1 - P2 ],    f(-i) = e^{x0}
//!
//! so call = S0 P1 - K e^{-rT} P2 and the put follows from parity. Both
//! integrands have a removable singularity at w = 0; the first panel starts
//! just above it. The upper limit extends in doubling panels until the tail
//! contribution is negligible, hard-capped at OMEGA_CAP.

use num_complex::Complex64;
use libm::erfc;

use crate::charfn::{CfSolver, LinearParams, Route};
use crate::error::Error;
use crate::quad::adaptive_gk_real;
use crate::Result;

/// Spot, rate, maturity, strike and initial variance for one instrument.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MarketContext {
    pub spot: f64,
    pub rate: f64,
    pub maturity: f64,
    pub strike: f64,
    pub v0: f64,
}

impl MarketContext {
    pub fn validate(&self) -> Result<()> {
        if !(self.spot > 0.0) {
            return Err(Error::InvalidInput(format!("spot = {} must be > 0", self.spot)));
        }
        if !(self.strike > 0.0) {
            return Err(Error::InvalidInput(format!("strike = {} must be > 0", self.strike)));
        }
        if !(self.maturity > 0.0) {
            return Err(Error::InvalidInput(format!(
                "maturity = {} must be > 0",
                self.maturity
            )));
        }
        if !(self.v0 >= 0.0) {
            return Err(Error::InvalidInput(format!("v0 = {} must be >= 0", self.v0)));
        }
        Ok(())
    }

    /// Forward log-moneyness x0 = log(S0 e^{rT} / K).
    pub fn forward_log_moneyness(&self) -> f64 {
        (self.spot * (self.rate * self.maturity).exp() / self.strike).ln()
    }
}

/// Price output with the Gil-Pelaez probabilities and the quadrature error
/// estimate (integration error plus any truncated tail).
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct PriceResult {
    pub call: f64,
    pub put: f64,
    pub p1: f64,
    pub p2: f64,
    pub quad_error_estimate: f64,
}

const OMEGA_EPS: f64 = 1e-10;
const OMEGA_BASE: f64 = 100.0;
const OMEGA_CAP: f64 = 400.0;
const TAIL_TOL: f64 = 1e-12;
const QUAD_TOL: f64 = 1e-9;

struct GilPelaez<'a> {
    plain: &'a CfSolver<'a>,
    shifted: &'a CfSolver<'a>,
    v0: f64,
}

impl GilPelaez<'_> {
    /// Integrand of P2 (k = 0) or P1 (k = 1) at omega, for log-moneyness x0.
    fn integrand(&self, omega: f64, x0: f64, shifted: bool) -> Result<f64> {
        let (a, b) = if shifted {
            self.shifted.ab(Complex64::new(omega, -1.0))?
        } else {
            self.plain.ab(Complex64::new(omega, 0.0))?
        };
        // f(w-i)/f(-i) = exp(A' + B' v0 + i w x0): the e^{x0} factor cancels
        let phase = a + b * self.v0 + Complex64::new(0.0, omega * x0);
        let val = phase.exp() / Complex64::new(0.0, omega);
        Ok(val.re)
    }

    /// 1/2 + (1/pi) int_0^inf of the selected integrand.
    fn probability(&self, x0: f64, shifted: bool) -> Result<(f64, f64)> {
        let fail: std::cell::RefCell<Option<Error>> = std::cell::RefCell::new(None);
        let mut total = 0.0;
        let mut err_total = 0.0;

        let integrate = |lo: f64, hi: f64, tol: f64| -> Result<(f64, f64)> {
            let r = adaptive_gk_real(
                |w| match self.integrand(w, x0, shifted) {
                    Ok(v) => v,
                    Err(e) => {
                        *fail.borrow_mut() = Some(e);
                        0.0
                    }
                },
                lo,
                hi,
                tol,
                2000,
            );
            if let Some(e) = fail.borrow_mut().take() {
                return Err(e);
            }
            r
        };

        let (head, e_head) = integrate(OMEGA_EPS, OMEGA_BASE, QUAD_TOL * 0.5)?;
        total += head;
        err_total += e_head;

        // extend in doubling panels until the contribution dies out
        let mut lo = OMEGA_BASE;
        let mut truncated_tail = 0.0;
        while lo < OMEGA_CAP {
            let hi = (2.0 * lo).min(OMEGA_CAP);
            let (panel, e_panel) = integrate(lo, hi, QUAD_TOL * 0.25)?;
            total += panel;
            err_total += e_panel;
            if panel.abs() < TAIL_TOL {
                truncated_tail = 0.0;
                break;
            }
            truncated_tail = panel.abs();
            lo = hi;
        }
        // cap reached with the envelope still alive: fold it into the error
        err_total += truncated_tail;

        Ok((0.5 + total / std::f64::consts::PI, err_total))
    }
}

fn price_with_solvers(
    ctx: &MarketContext,
    plain: &CfSolver<'_>,
    shifted: &CfSolver<'_>,
) -> Result<PriceResult> {
    let x0 = ctx.forward_log_moneyness();
    let gp = GilPelaez { plain, shifted, v0: ctx.v0 };
    let (p1, e1) = gp.probability(x0, true)?;
    let (p2, e2) = gp.probability(x0, false)?;

    let df_strike = ctx.strike * (-ctx.rate * ctx.maturity).exp();
    let mut call = ctx.spot * p1 - df_strike * p2;
    // absorb quadrature-level negatives, keeping parity intact
    if call < 0.0 && call > -1e-10 * ctx.spot {
        call = 0.0;
    }
    let put = call - ctx.spot + df_strike;

    Ok(PriceResult { call, put, p1, p2, quad_error_estimate: e1 + e2 })
}

/// European call/put by Gil-Pelaez inversion of the characteristic function.
pub fn price_european(
    ctx: &MarketContext,
    params: &LinearParams,
    route: Route,
) -> Result<PriceResult> {
    ctx.validate()?;
    params.validate(ctx.maturity)?;
    let plain = CfSolver::new(params, ctx.maturity, route);
    let shifted = CfSolver::new(params, ctx.maturity, route);
    price_with_solvers(ctx, &plain, &shifted)
}

/// Price a whole strike ladder sharing the characteristic-function cache:
/// A and B do not depend on the strike.
pub fn price_strikes(
    ctx_base: &MarketContext,
    params: &LinearParams,
    strikes: &[f64],
    route: Route,
) -> Result<Vec<PriceResult>> {
    params.validate(ctx_base.maturity)?;
    let plain = CfSolver::new(params, ctx_base.maturity, route);
    let shifted = CfSolver::new(params, ctx_base.maturity, route);
    strikes
        .iter()
        .map(|&k| {
            let ctx = MarketContext { strike: k, ..*ctx_base };
            ctx.validate()?;
            price_with_solvers(&ctx, &plain, &shifted)
        })
        .collect()
}

/// One smile node: price pair and Black-Scholes implied volatility.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SmilePoint {
    pub strike: f64,
    pub maturity: f64,
    pub call: f64,
    pub put: f64,
    pub implied_vol: f64,
}

/// Price each strike and invert to Black-Scholes implied volatility.
/// Strikes must be positive and sorted ascending.
pub fn smile(
    ctx_base: &MarketContext,
    params: &LinearParams,
    strikes: &[f64],
    route: Route,
) -> Result<Vec<SmilePoint>> {
    if strikes.is_empty() {
        return Err(Error::InvalidInput("empty strike list".into()));
    }
    if strikes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("strikes must be sorted ascending".into()));
    }
    if strikes[0] <= 0.0 {
        return Err(Error::InvalidInput("strikes must be positive".into()));
    }
    let prices = price_strikes(ctx_base, params, strikes, route)?;
    strikes
        .iter()
        .zip(&prices)
        .map(|(&k, pr)| {
            let iv = implied_vol(
                pr.call,
                ctx_base.spot,
                k,
                ctx_base.rate,
                ctx_base.maturity,
            )?;
            Ok(SmilePoint {
                strike: k,
                maturity: ctx_base.maturity,
                call: pr.call,
                put: pr.put,
                implied_vol: iv,
            })
        })
        .collect()
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Black-Scholes call price (no dividends).
pub fn black_scholes_call(spot: f64, strike: f64, rate: f64, maturity: f64, vol: f64) -> f64 {
    let df = (-rate * maturity).exp();
    if vol <= 0.0 || maturity <= 0.0 {
        return (spot - strike * df).max(0.0);
    }
    let st = vol * maturity.sqrt();
    let d1 = ((spot / strike).ln() + (rate + 0.5 * vol * vol) * maturity) / st;
    let d2 = d1 - st;
    spot * norm_cdf(d1) - strike * df * norm_cdf(d2)
}

fn black_scholes_vega(spot: f64, strike: f64, rate: f64, maturity: f64, vol: f64) -> f64 {
    let st = vol * maturity.sqrt();
    let d1 = ((spot / strike).ln() + (rate + 0.5 * vol * vol) * maturity) / st;
    let pdf = (-0.5 * d1 * d1).exp() / (2.0 * std::f64::consts::PI).sqrt();
    spot * maturity.sqrt() * pdf
}

const IV_TOL: f64 = 1e-10;
const IV_LO: f64 = 1e-9;
const IV_HI: f64 = 5.0;

/// Black-Scholes implied volatility of a call price by safeguarded
/// Newton-bisection, to 1e-10 in vol.
pub fn implied_vol(price: f64, spot: f64, strike: f64, rate: f64, maturity: f64) -> Result<f64> {
    let df = (-rate * maturity).exp();
    let lo_bound = (spot - strike * df).max(0.0);
    let hi_bound = spot;
    let slack = 1e-12 * spot.max(1.0);
    if price < lo_bound - slack || price > hi_bound + slack {
        return Err(Error::NoImpliedVol { price, lo: lo_bound, hi: hi_bound });
    }
    if price <= lo_bound + slack {
        return Ok(0.0);
    }

    let mut lo = IV_LO;
    let mut hi = IV_HI;
    // Brenner-Subrahmanyam starting point, clamped into the bracket
    let mut vol = ((2.0 * std::f64::consts::PI / maturity).sqrt() * price / spot)
        .clamp(0.01, 2.0);
    for _ in 0..100 {
        let diff = black_scholes_call(spot, strike, rate, maturity, vol) - price;
        if diff.abs() < 1e-14 * spot {
            return Ok(vol);
        }
        if diff > 0.0 {
            hi = vol;
        } else {
            lo = vol;
        }
        let vega = black_scholes_vega(spot, strike, rate, maturity, vol);
        let newton = vol - diff / vega;
        vol = if vega > 1e-12 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < IV_TOL {
            return Ok(0.5 * (lo + hi));
        }
    }
    Ok(vol)
}
