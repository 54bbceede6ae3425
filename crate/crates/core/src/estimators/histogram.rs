use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-constant estimate of the density ratio `dF_P / dF0` on
/// `bins` equal-width cells of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRatioHistogram {
    heights: Vec<f64>,
}

impl DensityRatioHistogram {
    /// Takes heights directly; they must be non-negative and integrate to
    /// one within 1e-9.
    pub fn from_heights(heights: Vec<f64>) -> Result<Self> {
        if heights.len() < 2 {
            return Err(Error::domain("need at least two bins"));
        }
        if heights.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
            return Err(Error::domain("heights must be finite and non-negative"));
        }
        let hist = Self { heights };
        let total = hist.integral();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!(
                "heights integrate to {total}, not 1"
            )));
        }
        Ok(hist)
    }

    pub fn bins(&self) -> usize {
        self.heights.len()
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn width(&self) -> f64 {
        1.0 / self.heights.len() as f64
    }

    /// `bins + 1` uniform breakpoints.
    pub fn edges(&self) -> Vec<f64> {
        let b = self.bins();
        (0..=b).map(|i| i as f64 / b as f64).collect()
    }

    /// Cell holding `x`; `x = 1` falls in the last cell.
    #[inline]
    pub fn bin_of(&self, x: f64) -> usize {
        bin_index(x, self.bins())
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.heights[self.bin_of(x)]
    }

    pub fn integral(&self) -> f64 {
        self.heights.iter().sum::<f64>() * self.width()
    }

    /// Total variation distance to the uniform density, `1/2 ∫|1 - g|`.
    pub fn tv_to_uniform(&self) -> f64 {
        0.5 * self.heights.iter().map(|h| (1.0 - h).abs()).sum::<f64>() * self.width()
    }
}

#[inline]
pub(crate) fn bin_index(x: f64, bins: usize) -> usize {
    ((x * bins as f64) as usize).min(bins - 1)
}

/// Histogram of watermarked samples normalized to a density on `[0, 1]`.
pub fn fit_density_ratio(wm_samples: &[f64], bins: usize) -> Result<DensityRatioHistogram> {
    if wm_samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if bins < 2 {
        return Err(Error::domain("need at least two bins"));
    }
    if let Some(bad) = wm_samples.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::domain(format!("sample {bad} outside [0, 1]")));
    }
    let mut counts = vec![0usize; bins];
    for &x in wm_samples {
        counts[bin_index(x, bins)] += 1;
    }
    let scale = bins as f64 / wm_samples.len() as f64;
    Ok(DensityRatioHistogram {
        heights: counts.into_iter().map(|c| c as f64 * scale).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upper_half_mass() {
        let h = fit_density_ratio(&[0.5, 0.7, 1.0, 0.99], 2).unwrap();
        assert_eq!(h.heights(), &[0.0, 2.0]);
    }

    #[test]
    fn flat_counts() {
        let h = fit_density_ratio(&[0.1, 0.2, 0.6, 0.8], 2).unwrap();
        assert_eq!(h.heights(), &[1.0, 1.0]);
        assert_eq!(h.tv_to_uniform(), 0.0);
        assert_eq!(h.edges(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            fit_density_ratio(&[], 10),
            Err(Error::EmptyDataset)
        ));
        assert!(fit_density_ratio(&[0.5], 1).is_err());
        assert!(fit_density_ratio(&[1.5], 10).is_err());
        assert!(DensityRatioHistogram::from_heights(vec![1.0, 2.0]).is_err());
        assert!(DensityRatioHistogram::from_heights(vec![0.5, 1.5]).is_ok());
    }

    #[test]
    fn binning_edges() {
        assert_eq!(bin_index(0.0, 500), 0);
        assert_eq!(bin_index(1.0, 500), 499);
        assert_eq!(bin_index(0.5, 2), 1);
        assert_eq!(bin_index(0.4999, 2), 0);
    }
}
