//! Linear-in-time Heston parameter paths.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Time profile of the model coefficients. The numeric Riccati solver is
/// generic over this, so sampled or otherwise non-linear paths can be used
/// as test inputs; the closed forms require [`LinearParams`].
pub trait ParamPath {
    fn kappa(&self, tau: f64) -> f64;
    fn theta(&self, tau: f64) -> f64;
    fn eta(&self, tau: f64) -> f64;
    fn rho(&self, tau: f64) -> f64;

    /// Drift level a(tau) = kappa(tau) theta(tau).
    fn drift_level(&self, tau: f64) -> f64 {
        self.kappa(tau) * self.theta(tau)
    }
}

/// The eight coefficients of the linear parameter model
/// kappa(tau) = kappa1 tau + kappa2, and likewise for theta, eta, rho.
///
/// Units: kappa1 1/time^2, kappa2 1/time; theta1 variance/time, theta2
/// variance; eta1/eta2 vol-of-vol slope and level; rho1/rho2 correlation
/// slope and level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub kappa1: f64,
    pub kappa2: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub rho1: f64,
    pub rho2: f64,
}

impl LinearParams {
    /// Constant-parameter (classic Heston) case: all slopes zero.
    pub fn constant(kappa: f64, theta: f64, eta: f64, rho: f64) -> Self {
        Self {
            kappa1: 0.0,
            kappa2: kappa,
            theta1: 0.0,
            theta2: theta,
            eta1: 0.0,
            eta2: eta,
            rho1: 0.0,
            rho2: rho,
        }
    }

    /// Check kappa >= 0, theta >= 0, eta > 0 and |rho| <= 1 on [0, t_max].
    /// Linear paths make the endpoint check exact.
    pub fn validate(&self, t_max: f64) -> Result<()> {
        if !(t_max >= 0.0) {
            return Err(Error::InvalidParams(format!("t_max = {t_max} must be >= 0")));
        }
        for &tau in &[0.0, t_max] {
            let k = self.kappa(tau);
            let th = self.theta(tau);
            let e = self.eta(tau);
            let r = self.rho(tau);
            if !(k >= 0.0) {
                return Err(Error::InvalidParams(format!("kappa({tau}) = {k} < 0")));
            }
            if !(th >= 0.0) {
                return Err(Error::InvalidParams(format!("theta({tau}) = {th} < 0")));
            }
            if !(e > 0.0) {
                return Err(Error::InvalidParams(format!("eta({tau}) = {e} <= 0")));
            }
            if r.abs() > 1.0 {
                return Err(Error::InvalidCorrelation { tau, rho: r });
            }
        }
        Ok(())
    }
}

impl ParamPath for LinearParams {
    fn kappa(&self, tau: f64) -> f64 {
        self.kappa1 * tau + self.kappa2
    }
    fn theta(&self, tau: f64) -> f64 {
        self.theta1 * tau + self.theta2
    }
    fn eta(&self, tau: f64) -> f64 {
        self.eta1 * tau + self.eta2
    }
    fn rho(&self, tau: f64) -> f64 {
        self.rho1 * tau + self.rho2
    }
}

/// JSON file schema for a parameter set:
/// `{"kappa": [k1, k2], "theta": [t1, t2], "eta": [e1, e2], "rho": [r1, r2],
///   "v0": ..., "T": ...}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsFile {
    pub kappa: [f64; 2],
    pub theta: [f64; 2],
    pub eta: [f64; 2],
    pub rho: [f64; 2],
    pub v0: f64,
    #[serde(rename = "T")]
    pub t: f64,
}

impl ParamsFile {
    pub fn new(params: LinearParams, v0: f64, t: f64) -> Self {
        Self {
            kappa: [params.kappa1, params.kappa2],
            theta: [params.theta1, params.theta2],
            eta: [params.eta1, params.eta2],
            rho: [params.rho1, params.rho2],
            v0,
            t,
        }
    }

    pub fn params(&self) -> LinearParams {
        LinearParams {
            kappa1: self.kappa[0],
            kappa2: self.kappa[1],
            theta1: self.theta[0],
            theta2: self.theta[1],
            eta1: self.eta[0],
            eta2: self.eta[1],
            rho1: self.rho[0],
            rho2: self.rho[1],
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ParamsFile = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("params JSON: {e}")))?;
        file.params().validate(file.t)?;
        if file.v0 < 0.0 {
            return Err(Error::InvalidInput(format!("v0 = {} < 0", file.v0)));
        }
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_evaluation() {
        let p = LinearParams {
            kappa1: 0.5,
            kappa2: 1.0,
            theta1: 0.01,
            theta2: 0.04,
            eta1: 0.1,
            eta2: 0.3,
            rho1: 0.2,
            rho2: -0.5,
        };
        assert_eq!(p.kappa(2.0), 2.0);
        assert_eq!(p.theta(0.0), 0.04);
        assert_eq!(p.eta(1.0), 0.4);
        assert_eq!(p.rho(1.0), -0.3);
        assert_eq!(p.drift_level(0.0), 0.04);
        assert!(p.validate(2.0).is_ok());
    }

    #[test]
    fn endpoint_validation_catches_violations() {
        let mut p = LinearParams::constant(2.0, 0.04, 0.3, -0.5);
        p.kappa1 = -3.0;
        assert!(p.validate(1.0).is_err()); // kappa(1) = -1
        let mut q = LinearParams::constant(2.0, 0.04, 0.3, -0.9);
        q.rho1 = -0.3;
        assert!(matches!(q.validate(1.0), Err(Error::InvalidCorrelation { .. })));
        let r = LinearParams::constant(2.0, 0.04, 0.0, -0.5);
        assert!(r.validate(1.0).is_err()); // eta must be strictly positive
    }

    #[test]
    fn params_file_round_trip() {
        let p = LinearParams {
            kappa1: 0.5,
            kappa2: 1.0,
            theta1: 0.01,
            theta2: 0.04,
            eta1: 0.0,
            eta2: 0.3,
            rho1: 0.2,
            rho2: -0.5,
        };
        let file = ParamsFile::new(p, 0.04, 1.5);
        let text = serde_json::to_string(&file).unwrap();
        assert!(text.contains("\"T\":1.5"));
        let back = ParamsFile::from_json(&text).unwrap();
        assert_eq!(back.params(), p);
        assert_eq!(back.v0, 0.04);
    }
}
