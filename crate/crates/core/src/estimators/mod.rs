//! Watermark-proportion estimators on post-PIT pivotal statistics.
//!
//! Under the mixture model the data CDF is
//! `F(x) = (1 - eps) x + eps F_P(x)` on `[0, 1]`, so any weight `v` gives
//! `eps = (E_0[v] - E_F[v]) / (E_0[v] - E_P[v])`. The indicator weight
//! `1{x <= delta}` yields [`estimate_ini`] (with `F_P(delta) = 0`) and
//! [`estimate_rfn`]; the variance-optimal weight yields the fixed-point
//! estimator in [`fixed_point`].

mod diagnostics;
mod fixed_point;
mod histogram;
mod report;

pub use diagnostics::{variance_bounds, Diagnostics};
pub use fixed_point::{estimate_opt, BinMasses, OptEstimate, OptEstimator};
pub use histogram::{fit_density_ratio, DensityRatioHistogram};
pub use report::{delta_key, estimate_all, EstimateReport};

use serde::{Deserialize, Serialize};

use crate::ecdf::Ecdf;
use crate::error::{Error, Result};
use crate::rng::RandomSeed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub deltas: Vec<f64>,
    pub eps_min: f64,
    pub bins: usize,
    /// Approximate the null integrals with `mc_n` binned uniform draws
    /// instead of the exact per-bin masses.
    pub mc_parity: bool,
    pub mc_n: usize,
    pub mc_seed: RandomSeed,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            deltas: vec![1e-1, 1e-2, 1e-3],
            eps_min: 1e-3,
            bins: 500,
            mc_parity: false,
            mc_n: 1_000_000,
            mc_seed: RandomSeed(0),
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_min > 0.0 && self.eps_min < 0.5) {
            return Err(Error::domain(format!(
                "eps_min {} must lie in (0, 0.5)",
                self.eps_min
            )));
        }
        if self.bins < 2 {
            return Err(Error::domain("need at least two bins"));
        }
        if self.deltas.is_empty() {
            return Err(Error::domain("need at least one delta"));
        }
        for &d in &self.deltas {
            check_delta(d)?;
        }
        if self.mc_parity && self.mc_n == 0 {
            return Err(Error::domain("Monte Carlo mode needs mc_n >= 1"));
        }
        Ok(())
    }

    pub fn project(&self, eps: f64) -> f64 {
        eps.clamp(self.eps_min, 1.0 - self.eps_min)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("delta {delta} must lie in (0, 1]")))
    }
}

/// `1 - F(delta) / delta`. Unprojected; may be negative.
pub fn estimate_ini(data: &Ecdf, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(1.0 - data.query(delta).get() / delta)
}

/// `(delta - F(delta)) / (delta - F_P(delta))`. Unprojected.
pub fn estimate_rfn(data: &Ecdf, wm_ref: &Ecdf, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let denom = delta - wm_ref.query(delta).get();
    if denom == 0.0 {
        return Err(Error::degenerate(format!(
            "watermarked reference CDF equals the null CDF at delta = {delta}"
        )));
    }
    Ok((delta - data.query(delta).get()) / denom)
}

/// Whether every sample is exactly 0 or 1, as produced by the green-red
/// list.
pub fn is_binary(samples: &[f64]) -> bool {
    samples.iter().all(|&y| y == 0.0 || y == 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ecdf_with(n: usize, below: usize, at: f64) -> Ecdf {
        let mut xs = vec![0.9; n];
        for x in xs.iter_mut().take(below) {
            *x = at;
        }
        Ecdf::new(&xs).unwrap()
    }

    #[test]
    fn ini_arithmetic() {
        // F(0.1) = 0.05
        let e = ecdf_with(100, 5, 0.05);
        assert!((estimate_ini(&e, 0.1).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(estimate_ini(&e, 0.0), Err(Error::Domain(_))));
        assert!(estimate_ini(&e, 1.5).is_err());
    }

    #[test]
    fn rfn_arithmetic() {
        let data = ecdf_with(100, 6, 0.05);
        let wm = ecdf_with(100, 2, 0.05);
        assert!((estimate_rfn(&data, &wm, 0.1).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(estimate_rfn(&wm, &wm, 0.1).unwrap(), 1.0);
    }

    #[test]
    fn rfn_degenerate() {
        // F_P(0.5) = 0.5
        let wm = Ecdf::new(&[0.25, 0.75]).unwrap();
        assert!(matches!(
            estimate_rfn(&wm, &wm, 0.5),
            Err(Error::DegenerateDenominator(_))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(EstimatorConfig::default().validate().is_ok());
        let bad = EstimatorConfig {
            eps_min: 0.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = EstimatorConfig {
            bins: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = EstimatorConfig {
            deltas: vec![0.0],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn binary_detection() {
        assert!(is_binary(&[0.0, 1.0, 1.0]));
        assert!(!is_binary(&[0.0, 0.5]));
    }
}
