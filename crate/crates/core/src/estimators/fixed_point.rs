//! The optimal-weight estimator as a fixed point of
//!
//! ```text
//! T(eps) = proj( ∫v dF0 - mean v(Y) ) / ( ∫v dF0 - mean v(Y_wm) ),
//! v(eps, x) = (1 - g(x)) / ((1 - eps) + eps g(x)).
//! ```
//!
//! `g` is a histogram, so `v` is constant on each bin and every integral
//! reduces to a sum over bin masses.

use rand::Rng;

use super::histogram::{bin_index, DensityRatioHistogram};
use super::EstimatorConfig;
use crate::ecdf::Ecdf;
use crate::error::{Error, Result};

/// Number of compositions of `T` used to seed the solver.
pub const INIT_COMPOSITIONS: usize = 20;
pub const INIT_EPS: f64 = 0.9;
pub const TOLERANCE: f64 = 1e-6;
pub const MAX_EVALUATIONS: usize = 200;

/// Per-bin probability masses of the data, the watermarked reference and
/// the null distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct BinMasses {
    pub data: Vec<f64>,
    pub wm: Vec<f64>,
    pub null: Vec<f64>,
}

impl BinMasses {
    pub fn from_samples(data: &Ecdf, wm_ref: &Ecdf, cfg: &EstimatorConfig) -> Self {
        let bins = cfg.bins;
        let null = if cfg.mc_parity {
            let mut rng = cfg.mc_seed.rng();
            let mut counts = vec![0usize; bins];
            for _ in 0..cfg.mc_n {
                counts[bin_index(rng.random::<f64>(), bins)] += 1;
            }
            normalize(counts, cfg.mc_n)
        } else {
            vec![1.0 / bins as f64; bins]
        };
        Self {
            data: binned(data.samples(), bins),
            wm: binned(wm_ref.samples(), bins),
            null,
        }
    }
}

fn binned(samples: &[f64], bins: usize) -> Vec<f64> {
    let mut counts = vec![0usize; bins];
    for &x in samples {
        counts[bin_index(x, bins)] += 1;
    }
    normalize(counts, samples.len())
}

fn normalize(counts: Vec<usize>, n: usize) -> Vec<f64> {
    counts.into_iter().map(|c| c as f64 / n as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptEstimate {
    pub eps: f64,
    /// `|eps - T(eps)|` at the returned point.
    pub residual: f64,
    /// Operator evaluations spent by the root finder after seeding.
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct OptEstimator {
    heights: Vec<f64>,
    masses: BinMasses,
    eps_min: f64,
}

impl OptEstimator {
    pub fn new(
        data: &Ecdf,
        g_hat: &DensityRatioHistogram,
        wm_ref: &Ecdf,
        cfg: &EstimatorConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if g_hat.bins() != cfg.bins {
            return Err(Error::domain(format!(
                "histogram has {} bins, configuration asks for {}",
                g_hat.bins(),
                cfg.bins
            )));
        }
        Self::from_masses(
            BinMasses::from_samples(data, wm_ref, cfg),
            g_hat,
            cfg.eps_min,
        )
    }

    pub fn from_masses(
        masses: BinMasses,
        g_hat: &DensityRatioHistogram,
        eps_min: f64,
    ) -> Result<Self> {
        let bins = g_hat.bins();
        if masses.data.len() != bins || masses.wm.len() != bins || masses.null.len() != bins {
            return Err(Error::domain("bin masses do not match the histogram"));
        }
        if !(eps_min > 0.0 && eps_min < 0.5) {
            return Err(Error::domain(format!(
                "eps_min {eps_min} must lie in (0, 0.5)"
            )));
        }
        if g_hat.heights().iter().all(|&h| h == 1.0) {
            return Err(Error::degenerate(
                "density ratio is identically one; the watermark carries no signal",
            ));
        }
        Ok(Self {
            heights: g_hat.heights().to_vec(),
            masses,
            eps_min,
        })
    }

    pub fn eps_min(&self) -> f64 {
        self.eps_min
    }

    fn project(&self, eps: f64) -> f64 {
        eps.clamp(self.eps_min, 1.0 - self.eps_min)
    }

    /// `T(eps)`; the input is clamped to `[eps_min, 1 - eps_min]` as well.
    pub fn operator(&self, eps: f64) -> Result<f64> {
        let eps = self.project(eps);
        let (mut num, mut den) = (0.0, 0.0);
        for (b, &g) in self.heights.iter().enumerate() {
            let v = (1.0 - g) / ((1.0 - eps) + eps * g);
            let null = self.masses.null[b];
            num += v * (null - self.masses.data[b]);
            den += v * (null - self.masses.wm[b]);
        }
        if den.is_nan() || den.abs() <= 1e-15 {
            return Err(Error::degenerate(format!(
                "weighted null and watermark moments coincide at eps = {eps}"
            )));
        }
        Ok(self.project(num / den))
    }

    /// Seeds with `T^20(0.9)` and then brackets a root of `eps - T(eps)`.
    ///
    /// `T` maps into `[eps_min, 1 - eps_min]`, so the difference is
    /// non-positive at the lower end and non-negative at the upper end; the
    /// bracket is shrunk with the Illinois variant of regula falsi.
    pub fn solve(&self) -> Result<OptEstimate> {
        let mut eps = INIT_EPS;
        for _ in 0..INIT_COMPOSITIONS {
            eps = self.operator(eps)?;
        }

        let mut evaluations = 0;
        let mut best = (eps, f64::INFINITY);
        let mut h = |e: f64| -> Result<f64> {
            evaluations += 1;
            let r = e - self.operator(e)?;
            if r.abs() < best.1 {
                best = (e, r.abs());
            }
            Ok(r)
        };

        let h0 = h(eps)?;
        if h0.abs() <= TOLERANCE {
            return Ok(OptEstimate {
                eps,
                residual: h0.abs(),
                evaluations: 1,
            });
        }
        let (lo, hi) = (self.eps_min, 1.0 - self.eps_min);
        let (mut a, mut fa, mut b, mut fb) = if h0 < 0.0 {
            (eps, h0, hi, h(hi)?)
        } else {
            (lo, h(lo)?, eps, h0)
        };
        for (x, fx) in [(a, fa), (b, fb)] {
            if fx.abs() <= TOLERANCE {
                return Ok(OptEstimate {
                    eps: x,
                    residual: fx.abs(),
                    evaluations: 2,
                });
            }
        }

        let mut side = 0i8;
        let mut used = 2;
        while used < MAX_EVALUATIONS && b - a > f64::EPSILON {
            let mut c = (a * fb - b * fa) / (fb - fa);
            if !(c > a && c < b) {
                c = 0.5 * (a + b);
            }
            let fc = h(c)?;
            used += 1;
            if fc.abs() <= TOLERANCE {
                return Ok(OptEstimate {
                    eps: c,
                    residual: fc.abs(),
                    evaluations: used,
                });
            }
            if fc < 0.0 {
                a = c;
                fa = fc;
                if side == -1 {
                    fb *= 0.5;
                }
                side = -1;
            } else {
                b = c;
                fb = fc;
                if side == 1 {
                    fa *= 0.5;
                }
                side = 1;
            }
        }
        Err(Error::Convergence {
            best: best.0,
            residual: best.1,
            evaluations,
        })
    }
}

/// Builds an [`OptEstimator`] and solves it.
pub fn estimate_opt(
    data: &Ecdf,
    g_hat: &DensityRatioHistogram,
    wm_ref: &Ecdf,
    cfg: &EstimatorConfig,
) -> Result<OptEstimate> {
    OptEstimator::new(data, g_hat, wm_ref, cfg)?.solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::fit_density_ratio;

    fn linear_g(bins: usize) -> DensityRatioHistogram {
        let heights = (0..bins)
            .map(|b| 2.0 * (b as f64 + 0.5) / bins as f64)
            .collect();
        DensityRatioHistogram::from_heights(heights).unwrap()
    }

    fn population(eps0: f64, bins: usize) -> (BinMasses, DensityRatioHistogram) {
        let g = linear_g(bins);
        let w = 1.0 / bins as f64;
        let wm: Vec<f64> = g.heights().iter().map(|h| h * w).collect();
        let data = wm.iter().map(|m| (1.0 - eps0) * w + eps0 * m).collect();
        (
            BinMasses {
                data,
                wm,
                null: vec![w; bins],
            },
            g,
        )
    }

    #[test]
    fn population_fixed_point_is_flat() {
        let (masses, g) = population(0.5, 500);
        let est = OptEstimator::from_masses(masses, &g, 1e-3).unwrap();
        for eps in [0.001, 0.1, 0.37, 0.5, 0.9, 0.999] {
            assert!((est.operator(eps).unwrap() - 0.5).abs() < 1e-12);
        }
        let sol = est.solve().unwrap();
        assert!((sol.eps - 0.5).abs() < 1e-6);
        assert!(sol.residual <= TOLERANCE);
    }

    #[test]
    fn data_equal_to_reference_projects_to_top() {
        let xs: Vec<f64> = (0..1000)
            .map(|i| ((i as f64 + 0.5) / 1000.0).sqrt())
            .collect();
        let e = Ecdf::new(&xs).unwrap();
        let g = fit_density_ratio(&xs, 500).unwrap();
        let cfg = EstimatorConfig::default();
        let est = OptEstimator::new(&e, &g, &e, &cfg).unwrap();
        assert_eq!(est.operator(0.3).unwrap(), 1.0 - 1e-3);
        let sol = est.solve().unwrap();
        assert_eq!(sol.eps, 1.0 - 1e-3);
    }

    #[test]
    fn flat_ratio_is_degenerate() {
        let g = DensityRatioHistogram::from_heights(vec![1.0; 4]).unwrap();
        let m = vec![0.25; 4];
        let masses = BinMasses {
            data: m.clone(),
            wm: m.clone(),
            null: m,
        };
        assert!(matches!(
            OptEstimator::from_masses(masses, &g, 1e-3),
            Err(Error::DegenerateDenominator(_))
        ));
    }

    #[test]
    fn bin_count_mismatch() {
        let e = Ecdf::new(&[0.2, 0.9]).unwrap();
        let g = fit_density_ratio(&[0.2, 0.9], 10).unwrap();
        assert!(OptEstimator::new(&e, &g, &e, &EstimatorConfig::default()).is_err());
    }

    #[test]
    fn output_stays_projected() {
        for eps0 in [0.0, 1.0] {
            let (masses, g) = population(eps0, 100);
            let est = OptEstimator::from_masses(masses, &g, 1e-3).unwrap();
            let sol = est.solve().unwrap();
            assert!((1e-3..=1.0 - 1e-3).contains(&sol.eps));
        }
    }
}
