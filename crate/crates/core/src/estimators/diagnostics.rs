use serde::{Deserialize, Serialize};

use super::histogram::DensityRatioHistogram;
use crate::ecdf::Ecdf;
use crate::error::{Error, Result};

/// Asymptotic standard deviations (scaled by `sqrt(n)`) of the best
/// indicator-weight estimator (`sigma_star`) and of the optimal-weight
/// estimator (`tau_star`), and the total variation distance between the
/// null and the watermarked reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub sigma_star: f64,
    pub tau_star: f64,
    pub tv: f64,
}

/// ```text
/// sigma*^2 = F(delta) (1 - F(delta)) / (delta - F_P(delta))^2
/// tau*^2   = 1 / ∫ (1 - g)^2 / ((1 - eps) + eps g) dx
/// tv       = 1/2 ∫ |1 - g| dx
/// ```
pub fn variance_bounds(
    eps_hat: f64,
    delta: f64,
    data: &Ecdf,
    g_hat: &DensityRatioHistogram,
    wm_ref: &Ecdf,
) -> Result<Diagnostics> {
    if !(0.0..1.0).contains(&eps_hat) {
        return Err(Error::domain(format!("eps_hat {eps_hat} outside [0, 1)")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::domain(format!("delta {delta} must lie in (0, 1]")));
    }
    let f_bar = data.query(delta).get();
    let gap = delta - wm_ref.query(delta).get();
    if gap == 0.0 {
        return Err(Error::degenerate(format!(
            "reference CDF equals the null CDF at delta = {delta}"
        )));
    }
    let sigma_star = (f_bar * (1.0 - f_bar)).sqrt() / gap.abs();

    let info: f64 = g_hat
        .heights()
        .iter()
        .map(|&g| (1.0 - g).powi(2) / ((1.0 - eps_hat) + eps_hat * g))
        .sum::<f64>()
        * g_hat.width();
    if info == 0.0 {
        return Err(Error::degenerate(
            "density ratio is identically one; both variances are infinite",
        ));
    }
    Ok(Diagnostics {
        sigma_star,
        tau_star: info.recip().sqrt(),
        tv: g_hat.tv_to_uniform(),
    })
}
