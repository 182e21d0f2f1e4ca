//! Monte Carlo simulation of the time-dependent Heston SDE system
//!
//!     dS/S = r dt + sqrt(V) dW1
//!     dV   = kappa(t) (theta(t) - V) dt + eta(t) sqrt(V) dW2,
//!     Corr(dW1, dW2) = rho(t),
//!
//! under the risk-neutral measure with the full-truncation Euler scheme:
//! V+ = max(V, 0) enters drift and diffusion, so the variance iterate may
//! dip below zero but never feeds back a negative value. Parameters are
//! sampled at the left endpoint of each step and the correlation is applied
//! by a per-step Cholesky split.
//!
//! Each path draws from its own counter-derived RNG stream (seed, path
//! index), so enlarging the path count never perturbs earlier paths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::io::Write;

use crate::charfn::{LinearParams, ParamPath};
use crate::error::Error;
use crate::pricer::MarketContext;
use crate::Result;

/// Discretization scheme for the variance process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    FullTruncationEuler,
}

/// Simulation configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub antithetic: bool,
    pub scheme: Scheme,
}

impl SimConfig {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Self {
        Self { n_paths, n_steps, seed, antithetic: false, scheme: Scheme::FullTruncationEuler }
    }

    pub fn with_antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::InvalidInput(format!(
                "n_paths = {} must be >= 2",
                self.n_paths
            )));
        }
        if self.antithetic && self.n_paths % 2 != 0 {
            return Err(Error::InvalidInput(
                "antithetic pairing needs an even n_paths".into(),
            ));
        }
        if self.n_steps < 1 {
            return Err(Error::InvalidInput("n_steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// One simulated trajectory of (S, V) on the step grid.
#[derive(Debug, Clone)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub s: Vec<f64>,
    pub v: Vec<f64>,
}

fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Advance one full-truncation Euler step; `negate` flips the normal draws
/// for the antithetic partner. Returns the updated (log-spot, variance).
#[inline]
fn euler_step<P: ParamPath>(
    params: &P,
    rate: f64,
    t: f64,
    dt: f64,
    x: f64,
    v: f64,
    z1: f64,
    z2: f64,
) -> (f64, f64) {
    let v_plus = v.max(0.0);
    let rho = params.rho(t);
    let dw1 = dt.sqrt() * z1;
    let dw2 = dt.sqrt() * (rho * z1 + (1.0 - rho * rho).sqrt() * z2);
    let sqrt_v = v_plus.sqrt();
    let x_next = x + (rate - 0.5 * v_plus) * dt + sqrt_v * dw1;
    let v_next = v + params.kappa(t) * (params.theta(t) - v_plus) * dt + params.eta(t) * sqrt_v * dw2;
    (x_next, v_next)
}

/// Simulate full paths (times, S, V). Intended for modest path counts such
/// as path exports; pricing uses the streaming terminal version.
pub fn simulate_paths(
    ctx: &MarketContext,
    params: &LinearParams,
    cfg: &SimConfig,
) -> Result<Vec<PathSample>> {
    cfg.validate()?;
    params.validate(ctx.maturity)?;
    let dt = ctx.maturity / cfg.n_steps as f64;
    let x0 = ctx.spot.ln();

    let paths: Vec<PathSample> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|pid| {
            let (stream, negate) = if cfg.antithetic {
                (pid / 2, pid % 2 == 1)
            } else {
                (pid, false)
            };
            let mut rng = path_rng(cfg.seed, stream);
            let sign = if negate { -1.0 } else { 1.0 };
            let mut x = x0;
            let mut v = ctx.v0;
            let mut times = Vec::with_capacity(cfg.n_steps + 1);
            let mut s_out = Vec::with_capacity(cfg.n_steps + 1);
            let mut v_out = Vec::with_capacity(cfg.n_steps + 1);
            times.push(0.0);
            s_out.push(ctx.spot);
            v_out.push(ctx.v0.max(0.0));
            for n in 0..cfg.n_steps {
                let t = n as f64 * dt;
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let (xn, vn) = euler_step(params, ctx.rate, t, dt, x, v, sign * z1, sign * z2);
                x = xn;
                v = vn;
                times.push(t + dt);
                s_out.push(x.exp());
                v_out.push(v.max(0.0));
            }
            PathSample { times, s: s_out, v: v_out }
        })
        .collect();
    Ok(paths)
}

/// Terminal spot of one path, streamed without storing the trajectory.
fn terminal_spot<P: ParamPath>(
    params: &P,
    ctx: &MarketContext,
    cfg: &SimConfig,
    stream: u64,
    negate: bool,
) -> f64 {
    let dt = ctx.maturity / cfg.n_steps as f64;
    let mut rng = path_rng(cfg.seed, stream);
    let sign = if negate { -1.0 } else { 1.0 };
    let mut x = ctx.spot.ln();
    let mut v = ctx.v0;
    for n in 0..cfg.n_steps {
        let t = n as f64 * dt;
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let (xn, vn) = euler_step(params, ctx.rate, t, dt, x, v, sign * z1, sign * z2);
        x = xn;
        v = vn;
    }
    x.exp()
}

fn kahan_mean_var(samples: &[f64]) -> (f64, f64) {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for &s in samples {
        let y = s - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    let n = samples.len() as f64;
    let mean = sum / n;
    let mut var_sum = 0.0_f64;
    let mut var_comp = 0.0_f64;
    for &s in samples {
        let d = (s - mean) * (s - mean) - var_comp;
        let t = var_sum + d;
        var_comp = (t - var_sum) - d;
        var_sum = t;
    }
    (mean, var_sum / (n - 1.0).max(1.0))
}

/// Discounted call price and standard error from terminal payoffs. With
/// antithetic pairing each (Z, -Z) pair averages into one sample.
pub fn mc_price(
    ctx: &MarketContext,
    params: &LinearParams,
    cfg: &SimConfig,
) -> Result<(f64, f64)> {
    cfg.validate()?;
    ctx.validate()?;
    params.validate(ctx.maturity)?;
    let df = (-ctx.rate * ctx.maturity).exp();
    let payoff = |s_t: f64| (s_t - ctx.strike).max(0.0);

    let samples: Vec<f64> = if cfg.antithetic {
        (0..(cfg.n_paths as u64) / 2)
            .into_par_iter()
            .map(|pair| {
                let p1 = payoff(terminal_spot(params, ctx, cfg, pair, false));
                let p2 = payoff(terminal_spot(params, ctx, cfg, pair, true));
                0.5 * (p1 + p2)
            })
            .collect()
    } else {
        (0..cfg.n_paths as u64)
            .into_par_iter()
            .map(|pid| payoff(terminal_spot(params, ctx, cfg, pid, false)))
            .collect()
    };

    let (mean, var) = kahan_mean_var(&samples);
    let n = samples.len() as f64;
    Ok((df * mean, df * (var / n).sqrt()))
}

/// Discounted mean terminal spot and its standard error (martingale check).
pub fn mc_forward(
    ctx: &MarketContext,
    params: &LinearParams,
    cfg: &SimConfig,
) -> Result<(f64, f64)> {
    cfg.validate()?;
    params.validate(ctx.maturity)?;
    let df = (-ctx.rate * ctx.maturity).exp();
    let samples: Vec<f64> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|pid| terminal_spot(params, ctx, cfg, pid, false))
        .collect();
    let (mean, var) = kahan_mean_var(&samples);
    let n = samples.len() as f64;
    Ok((df * mean, df * (var / n).sqrt()))
}

/// Export paths as CSV with columns (path_id, t, S, V), 12 significant digits.
pub fn write_paths_csv<W: Write>(out: &mut W, paths: &[PathSample]) -> std::io::Result<()> {
    writeln!(out, "path_id,t,S,V")?;
    for (pid, p) in paths.iter().enumerate() {
        for ((&t, &s), &v) in p.times.iter().zip(&p.s).zip(&p.v) {
            writeln!(out, "{pid},{:.11e},{:.11e},{:.11e}", t, s, v)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> MarketContext {
        MarketContext { spot: 100.0, rate: 0.03, maturity: 1.0, strike: 100.0, v0: 0.04 }
    }

    #[test]
    fn deterministic_given_seed() {
        let params = LinearParams::constant(2.0, 0.04, 0.3, -0.5);
        let cfg = SimConfig::new(8, 50, 42);
        let a = simulate_paths(&ctx(), &params, &cfg).unwrap();
        let b = simulate_paths(&ctx(), &params, &cfg).unwrap();
        for (pa, pb) in a.iter().zip(&b) {
            assert_eq!(pa.s, pb.s);
            assert_eq!(pa.v, pb.v);
        }
    }

    #[test]
    fn earlier_paths_stable_under_path_count_growth() {
        let params = LinearParams::constant(2.0, 0.04, 0.3, -0.5);
        let small = simulate_paths(&ctx(), &params, &SimConfig::new(4, 25, 7)).unwrap();
        let large = simulate_paths(&ctx(), &params, &SimConfig::new(16, 25, 7)).unwrap();
        for i in 0..4 {
            assert_eq!(small[i].s, large[i].s);
        }
    }

    #[test]
    fn variance_stays_nonnegative_in_output() {
        let params = LinearParams::constant(0.5, 0.04, 1.5, -0.9); // violently non-Feller
        let paths = simulate_paths(&ctx(), &params, &SimConfig::new(16, 200, 3)).unwrap();
        for p in &paths {
            assert!(p.v.iter().all(|&v| v >= 0.0));
            assert!(p.s.iter().all(|&s| s > 0.0));
        }
    }

    #[test]
    fn degenerate_gbm_forward() {
        // eta ~ 0, kappa = 0: V frozen at v0, S lognormal.
        // E[S_T] = S0 e^{rT} within 3 standard errors.
        let params = LinearParams::constant(0.0, 0.04, 1e-12, 0.0);
        let m = ctx();
        let cfg = SimConfig::new(40_000, 50, 11);
        let (fwd_pv, se) = mc_forward(&m, &params, &cfg).unwrap();
        assert!(
            (fwd_pv - m.spot).abs() < 3.0 * se,
            "discounted forward {fwd_pv} vs spot {} (se {se})",
            m.spot
        );
    }

    #[test]
    fn deep_itm_call_approaches_spot() {
        let params = LinearParams::constant(2.0, 0.04, 0.3, -0.5);
        let mut m = ctx();
        m.strike = 1e-8;
        let (price, se) = mc_price(&m, &params, &SimConfig::new(20_000, 100, 5)).unwrap();
        assert!((price - m.spot).abs() < 3.0 * se + 1e-6);
    }

    #[test]
    fn antithetic_validates_and_prices() {
        let params = LinearParams::constant(2.0, 0.04, 0.3, -0.5);
        let cfg = SimConfig::new(10_001, 10, 1).with_antithetic(true);
        assert!(mc_price(&ctx(), &params, &cfg).is_err()); // odd count
        let cfg = SimConfig::new(10_000, 10, 1).with_antithetic(true);
        let (price, se) = mc_price(&ctx(), &params, &cfg).unwrap();
        assert!(price > 0.0 && se > 0.0);
    }

    #[test]
    fn invalid_correlation_is_rejected() {
        let mut params = LinearParams::constant(2.0, 0.04, 0.3, -0.9);
        params.rho1 = -0.5; // rho(1) = -1.4
        assert!(matches!(
            simulate_paths(&ctx(), &params, &SimConfig::new(4, 10, 1)),
            Err(Error::InvalidCorrelation { .. })
        ));
    }

    #[test]
    fn csv_export_shape() {
        let params = LinearParams::constant(2.0, 0.04, 0.3, -0.5);
        let paths = simulate_paths(&ctx(), &params, &SimConfig::new(2, 3, 9)).unwrap();
        let mut buf = Vec::new();
        write_paths_csv(&mut buf, &paths).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "path_id,t,S,V");
        assert_eq!(lines.len(), 1 + 2 * 4); // header + 2 paths x (3 steps + t0)
    }
}
