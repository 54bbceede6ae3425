use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    estimate_ini, estimate_rfn, fit_density_ratio, is_binary, variance_bounds, Diagnostics,
    EstimatorConfig, OptEstimator,
};
use crate::ecdf::Ecdf;
use crate::error::{Error, Result};

/// All estimates for one dataset. INI and RFN are keyed by `delta`
/// written as a decimal string; a `null` RFN entry marks a degenerate
/// denominator. Diagnostics are evaluated at `selected_delta`, the
/// configured delta with the smallest plug-in `sigma_star`. Deltas where the
/// data CDF is 0 or 1 are not eligible: the plug-in variance vanishes there
/// without saying anything about the estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub eps_ini: BTreeMap<String, f64>,
    pub eps_rfn: BTreeMap<String, Option<f64>>,
    pub eps_opt: f64,
    pub sigma_star: f64,
    pub tau_star: f64,
    pub tv: f64,
    pub residual: f64,
    pub selected_delta: f64,
}

pub fn delta_key(delta: f64) -> String {
    format!("{delta}")
}

/// Fits the density ratio on `wm_samples` and runs every estimator.
///
/// Binary reference samples (green-red list) are rejected with
/// [`Error::NonIdentifiable`].
pub fn estimate_all(
    data: &[f64],
    wm_samples: &[f64],
    cfg: &EstimatorConfig,
) -> Result<EstimateReport> {
    cfg.validate()?;
    let data = Ecdf::new(data)?;
    let wm_ref = Ecdf::new(wm_samples)?;
    if is_binary(wm_ref.samples()) {
        return Err(Error::NonIdentifiable(
            "the watermarked reference is binary (green-red list); mixtures of two Bernoulli \
             laws admit many (eps, mu) pairs with the same data distribution"
                .into(),
        ));
    }
    let g_hat = fit_density_ratio(wm_ref.samples(), cfg.bins)?;

    let mut eps_ini = BTreeMap::new();
    let mut eps_rfn = BTreeMap::new();
    for &delta in &cfg.deltas {
        eps_ini.insert(delta_key(delta), estimate_ini(&data, delta)?);
        let rfn = match estimate_rfn(&data, &wm_ref, delta) {
            Ok(v) => Some(v),
            Err(Error::DegenerateDenominator(_)) => None,
            Err(e) => return Err(e),
        };
        eps_rfn.insert(delta_key(delta), rfn);
    }

    let opt = OptEstimator::new(&data, &g_hat, &wm_ref, cfg)?.solve()?;

    let mut selected: Option<(f64, Diagnostics)> = None;
    for &delta in &cfg.deltas {
        let f_bar = data.query(delta).get();
        if f_bar == 0.0 || f_bar == 1.0 {
            continue;
        }
        match variance_bounds(opt.eps, delta, &data, &g_hat, &wm_ref) {
            Ok(d) => {
                let better = match &selected {
                    None => true,
                    Some((_, best)) => d.sigma_star < best.sigma_star,
                };
                if better {
                    selected = Some((delta, d));
                }
            }
            Err(Error::DegenerateDenominator(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let (selected_delta, diag) = selected.ok_or_else(|| {
        Error::degenerate(
            "no configured delta has a data CDF strictly inside (0, 1) and a reference CDF \
             different from the null",
        )
    })?;

    Ok(EstimateReport {
        eps_ini,
        eps_rfn,
        eps_opt: opt.eps,
        sigma_star: diag.sigma_star,
        tau_star: diag.tau_star,
        tv: diag.tv,
        residual: opt.residual,
        selected_delta,
    })
}
