//! Least-squares calibration of the eight linear coefficients (optionally
//! plus v0) to a grid of observed option prices, by Nelder-Mead with an
//! exact penalty on the parameter constraints. The constraints are linear
//! in time, so checking them at the interval endpoints is exact.

use std::collections::BTreeMap;

use crate::charfn::{LinearParams, ParamPath, Route};
use crate::error::Error;
use crate::pricer::{price_strikes, MarketContext};
use crate::Result;

/// One observed option quote.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Quote {
    pub strike: f64,
    pub maturity: f64,
    pub price: f64,
    pub weight: f64,
}

/// A calibration target: call quotes indexed by (strike, maturity).
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
pub struct QuoteGrid {
    pub quotes: Vec<Quote>,
}

impl QuoteGrid {
    pub fn new(quotes: Vec<Quote>) -> Self {
        Self { quotes }
    }

    /// Validate static no-arbitrage bounds against spot and rate:
    /// max(S0 - K e^{-rT}, 0) <= price <= S0, positive weights.
    pub fn validate(&self, spot: f64, rate: f64) -> Result<()> {
        if self.quotes.is_empty() {
            return Err(Error::InvalidInput("empty quote grid".into()));
        }
        for (i, q) in self.quotes.iter().enumerate() {
            if !(q.strike > 0.0) || !(q.maturity > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "quote {i}: strike and maturity must be positive"
                )));
            }
            if !(q.weight > 0.0) {
                return Err(Error::InvalidInput(format!("quote {i}: weight must be > 0")));
            }
            let lo = (spot - q.strike * (-rate * q.maturity).exp()).max(0.0);
            if q.price < lo || q.price > spot {
                return Err(Error::Infeasible(format!(
                    "quote {i} (K={}, T={}) price {} outside no-arbitrage bounds [{lo}, {spot}]",
                    q.strike, q.maturity, q.price
                )));
            }
        }
        Ok(())
    }

    /// Parse CSV with columns (strike, maturity, price, weight); a header
    /// line is allowed and skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut quotes = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if ln == 0 && fields[0].parse::<f64>().is_err() {
                continue; // header
            }
            if fields.len() != 4 {
                return Err(Error::InvalidInput(format!(
                    "quote CSV line {}: expected 4 fields, got {}",
                    ln + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str, what: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| {
                    Error::InvalidInput(format!("quote CSV line {}: bad {what} '{s}'", ln + 1))
                })
            };
            quotes.push(Quote {
                strike: parse(fields[0], "strike")?,
                maturity: parse(fields[1], "maturity")?,
                price: parse(fields[2], "price")?,
                weight: parse(fields[3], "weight")?,
            });
        }
        Ok(Self { quotes })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("strike,maturity,price,weight\n");
        for q in &self.quotes {
            out.push_str(&format!(
                "{:.11e},{:.11e},{:.11e},{:.11e}\n",
                q.strike, q.maturity, q.price, q.weight
            ));
        }
        out
    }

    pub fn max_maturity(&self) -> f64 {
        self.quotes.iter().map(|q| q.maturity).fold(0.0, f64::max)
    }
}

/// Calibration options.
#[derive(Debug, Clone, Copy)]
pub struct CalibOptions {
    /// Characteristic-function route used inside the objective.
    pub route: Route,
    /// Also fit v0 (9 parameters instead of 8).
    pub fit_v0: bool,
    pub max_iterations: usize,
}

impl Default for CalibOptions {
    fn default() -> Self {
        Self { route: Route::Numeric, fit_v0: false, max_iterations: 5000 }
    }
}

/// Calibration output.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CalibResult {
    pub params: LinearParams,
    pub v0: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

const DIAMETER_TOL: f64 = 1e-8;
const STALL_TOL: f64 = 1e-12;
const STALL_WINDOW: usize = 20;
const OBJECTIVE_FLOOR: f64 = 1e-19;
const PENALTY_SCALE: f64 = 1e6;

fn params_from_vec(x: &[f64]) -> LinearParams {
    LinearParams {
        kappa1: x[0],
        kappa2: x[1],
        theta1: x[2],
        theta2: x[3],
        eta1: x[4],
        eta2: x[5],
        rho1: x[6],
        rho2: x[7],
    }
}

fn vec_from_params(p: &LinearParams, v0: Option<f64>) -> Vec<f64> {
    let mut x = vec![p.kappa1, p.kappa2, p.theta1, p.theta2, p.eta1, p.eta2, p.rho1, p.rho2];
    if let Some(v) = v0 {
        x.push(v);
    }
    x
}

/// Exact-penalty term: total constraint violation at the endpoints of
/// [0, t_max], scaled so any violation dominates the price misfit.
fn penalty(p: &LinearParams, v0: f64, t_max: f64) -> f64 {
    let mut viol = 0.0_f64;
    for &tau in &[0.0, t_max] {
        viol += (-p.kappa(tau)).max(0.0);
        viol += (-p.theta(tau)).max(0.0);
        viol += (1e-6 - p.eta(tau)).max(0.0); // eta must stay strictly positive
        viol += (p.rho(tau).abs() - 1.0).max(0.0);
    }
    viol += (-v0).max(0.0);
    PENALTY_SCALE * viol
}

/// Crude feasibility projection for a bad starting point: clamp the level
/// coefficients and flatten any slope that crosses the bounds inside
/// [0, t_max].
fn project_feasible(p: &LinearParams, t_max: f64) -> LinearParams {
    let mut q = *p;
    q.kappa2 = q.kappa2.max(0.0);
    q.theta2 = q.theta2.max(0.0);
    q.eta2 = q.eta2.max(1e-4);
    q.rho2 = q.rho2.clamp(-0.999, 0.999);
    if t_max > 0.0 {
        if q.kappa(t_max) < 0.0 {
            q.kappa1 = -q.kappa2 / t_max * 0.999;
        }
        if q.theta(t_max) < 0.0 {
            q.theta1 = -q.theta2 / t_max * 0.999;
        }
        if q.eta(t_max) <= 0.0 {
            q.eta1 = (1e-4 - q.eta2) / t_max;
        }
        if q.rho(t_max).abs() > 1.0 {
            q.rho1 = (q.rho(t_max).signum() * 0.999 - q.rho2) / t_max;
        }
    }
    q
}

struct Objective<'a> {
    grid: &'a QuoteGrid,
    spot: f64,
    rate: f64,
    t_max: f64,
    route: Route,
    fit_v0: bool,
    v0_fixed: f64,
    /// strikes and quote indices grouped by maturity, so each maturity
    /// shares one characteristic-function cache per evaluation
    by_maturity: BTreeMap<u64, Vec<usize>>,
}

impl<'a> Objective<'a> {
    fn new(
        grid: &'a QuoteGrid,
        spot: f64,
        rate: f64,
        route: Route,
        fit_v0: bool,
        v0_fixed: f64,
    ) -> Self {
        let mut by_maturity: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (i, q) in grid.quotes.iter().enumerate() {
            by_maturity.entry(q.maturity.to_bits()).or_default().push(i);
        }
        Self {
            grid,
            spot,
            rate,
            t_max: grid.max_maturity(),
            route,
            fit_v0,
            v0_fixed,
            by_maturity,
        }
    }

    fn split(&self, x: &[f64]) -> (LinearParams, f64) {
        let p = params_from_vec(x);
        let v0 = if self.fit_v0 { x[8] } else { self.v0_fixed };
        (p, v0)
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let (p, v0) = self.split(x);
        let pen = penalty(&p, v0, self.t_max);
        if pen > 0.0 {
            // stay finite and strictly worse than any feasible point
            return pen + PENALTY_SCALE;
        }
        let mut sse = 0.0_f64;
        for (bits, idxs) in &self.by_maturity {
            let maturity = f64::from_bits(*bits);
            let ctx = MarketContext {
                spot: self.spot,
                rate: self.rate,
                maturity,
                strike: 1.0, // replaced per strike below
                v0,
            };
            let strikes: Vec<f64> = idxs.iter().map(|&i| self.grid.quotes[i].strike).collect();
            match price_strikes(&ctx, &p, &strikes, self.route) {
                Ok(prices) => {
                    for (&i, pr) in idxs.iter().zip(&prices) {
                        let q = &self.grid.quotes[i];
                        let d = pr.call - q.price;
                        sse += q.weight * d * d;
                    }
                }
                Err(_) => return 1e12, // pricing failed: repel the simplex
            }
        }
        sse
    }
}

/// Fit the linear coefficients (and optionally v0) to the quote grid by
/// Nelder-Mead, minimizing sum_i w_i (model_i - quote_i)^2.
pub fn calibrate(
    grid: &QuoteGrid,
    spot: f64,
    rate: f64,
    initial: &LinearParams,
    v0_init: f64,
    opts: &CalibOptions,
) -> Result<CalibResult> {
    grid.validate(spot, rate)?;
    let t_max = grid.max_maturity();

    let start = if initial.validate(t_max).is_ok() && v0_init >= 0.0 {
        *initial
    } else {
        let projected = project_feasible(initial, t_max);
        projected.validate(t_max).map_err(|e| {
            Error::Infeasible(format!("initial point invalid and projection failed: {e}"))
        })?;
        projected
    };
    let v0_start = v0_init.max(0.0);

    let objective = Objective::new(grid, spot, rate, opts.route, opts.fit_v0, v0_start);
    let x0 = vec_from_params(&start, opts.fit_v0.then_some(v0_start));

    let nm = nelder_mead(
        |x| objective.eval(x),
        &x0,
        opts.max_iterations,
    );

    let (params, v0) = objective.split(&nm.x);
    params
        .validate(t_max)
        .map_err(|e| Error::Infeasible(format!("optimizer left the feasible box: {e}")))?;
    if !nm.converged {
        return Err(Error::MaxIterations(opts.max_iterations));
    }
    Ok(CalibResult {
        params,
        v0,
        objective: nm.fx,
        iterations: nm.iterations,
        converged: nm.converged,
    })
}

struct NmResult {
    x: Vec<f64>,
    fx: f64,
    iterations: usize,
    converged: bool,
}

/// Standard Nelder-Mead (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2). Converges on scaled simplex diameter, objective stall over
/// a window, or an absolute objective floor.
fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], max_iter: usize) -> NmResult {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        let step = if v[i].abs() > 1e-8 { 0.1 * v[i].abs() } else { 0.02 };
        v[i] += step;
        simplex.push(v);
    }
    let mut fvals: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let mut history_best = f64::INFINITY;
    let mut stall_count = 0usize;
    let mut iterations = 0usize;
    let mut converged = false;

    for iter in 0..max_iter {
        iterations = iter + 1;
        // order
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| fvals[a].partial_cmp(&fvals[b]).unwrap_or(std::cmp::Ordering::Equal));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        // convergence checks
        let diameter = simplex
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[best])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        let scale = 1.0 + simplex[best].iter().map(|a| a.abs()).fold(0.0, f64::max);
        if fvals[best] < OBJECTIVE_FLOOR || diameter < DIAMETER_TOL * scale {
            converged = true;
            break;
        }
        if history_best - fvals[best] < STALL_TOL {
            stall_count += 1;
            if stall_count >= STALL_WINDOW {
                converged = true;
                break;
            }
        } else {
            stall_count = 0;
            history_best = fvals[best];
        }

        // centroid of all but the worst
        let mut centroid = vec![0.0; n];
        for (i, v) in simplex.iter().enumerate() {
            if i != worst {
                for (c, &vi) in centroid.iter_mut().zip(v) {
                    *c += vi / n as f64;
                }
            }
        }

        let lerp = |from: &[f64], coeff: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(from)
                .map(|(&c, &w)| c + coeff * (c - w))
                .collect()
        };

        let reflected = lerp(&simplex[worst], 1.0);
        let fr = f(&reflected);
        if fr < fvals[best] {
            let expanded = lerp(&simplex[worst], 2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[worst] = expanded;
                fvals[worst] = fe;
            } else {
                simplex[worst] = reflected;
                fvals[worst] = fr;
            }
        } else if fr < fvals[second_worst] {
            simplex[worst] = reflected;
            fvals[worst] = fr;
        } else {
            let contracted = if fr < fvals[worst] {
                lerp(&simplex[worst], 0.5) // outside
            } else {
                lerp(&simplex[worst], -0.5) // inside
            };
            let fc = f(&contracted);
            if fc < fvals[worst].min(fr) {
                simplex[worst] = contracted;
                fvals[worst] = fc;
            } else {
                // shrink toward the best vertex
                let best_point = simplex[best].clone();
                for (i, v) in simplex.iter_mut().enumerate() {
                    if i != best {
                        for (vi, &bi) in v.iter_mut().zip(&best_point) {
                            *vi = bi + 0.5 * (*vi - bi);
                        }
                        fvals[i] = f(v);
                    }
                }
            }
        }
    }

    let best = fvals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, _)| i)
        .unwrap_or(0);
    NmResult {
        x: simplex[best].clone(),
        fx: fvals[best],
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nelder_mead_rosenbrock() {
        let rosen = |x: &[f64]| {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        };
        let r = nelder_mead(rosen, &[-1.2, 1.0], 5000);
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-4, "x = {:?}", r.x);
        assert!((r.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn nelder_mead_quadratic_floor_stop() {
        let quad = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let r = nelder_mead(quad, &[0.0, 0.0, 0.0], 100);
        assert!(r.converged);
        assert_eq!(r.iterations, 1); // already at the floor
        assert!(r.fx < OBJECTIVE_FLOOR);
    }

    #[test]
    fn quote_grid_csv_round_trip() {
        let grid = QuoteGrid::new(vec![
            Quote { strike: 90.0, maturity: 0.5, price: 12.0, weight: 1.0 },
            Quote { strike: 110.0, maturity: 1.0, price: 4.5, weight: 2.0 },
        ]);
        let text = grid.to_csv();
        let back = QuoteGrid::from_csv(&text).unwrap();
        assert_eq!(back.quotes.len(), 2);
        assert_eq!(back.quotes[1].weight, 2.0);
    }

    #[test]
    fn grid_validation_rejects_arbitrage() {
        let grid = QuoteGrid::new(vec![Quote {
            strike: 100.0,
            maturity: 1.0,
            price: 101.0, // above spot
            weight: 1.0,
        }]);
        assert!(matches!(grid.validate(100.0, 0.0), Err(Error::Infeasible(_))));
        let empty = QuoteGrid::default();
        assert!(empty.validate(100.0, 0.0).is_err());
    }

    #[test]
    fn penalty_activates_outside_box() {
        let mut p = LinearParams::constant(2.0, 0.04, 0.3, -0.5);
        assert_eq!(penalty(&p, 0.04, 1.0), 0.0);
        p.rho2 = -1.3;
        assert!(penalty(&p, 0.04, 1.0) > PENALTY_SCALE * 0.2);
    }

    #[test]
    fn projection_repairs_bad_start() {
        let bad = LinearParams {
            kappa1: -10.0,
            kappa2: -1.0,
            theta1: 0.0,
            theta2: 0.04,
            eta1: 0.0,
            eta2: -0.3,
            rho1: 0.0,
            rho2: -1.7,
        };
        let fixed = project_feasible(&bad, 1.0);
        assert!(fixed.validate(1.0).is_ok());
    }
}
