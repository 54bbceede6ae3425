//! Mean-absolute-error sweeps over a grid of true proportions.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ecdf::Ecdf;
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_ini, estimate_rfn, fit_density_ratio, is_binary, EstimatorConfig, OptEstimator,
};
use crate::rng::RandomSeed;
use crate::simulation::{
    simulate_null_pivots, simulate_watermarked_pivots, watermarked_count, NtpSimConfig,
};
use crate::watermark::Scheme;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Number of uniformly spaced proportions in `[0, 1]`, endpoints included.
    pub eps_grid: usize,
    pub n: usize,
    /// Size of the watermarked pool per trial; at least `n`.
    pub ref_n: usize,
    pub trials: usize,
    pub scheme: Scheme,
    pub ntp: NtpSimConfig,
    pub seed: RandomSeed,
    pub estimator: EstimatorConfig,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps_grid < 2 {
            return Err(Error::domain("eps grid needs at least two points"));
        }
        if self.trials == 0 || self.n == 0 || self.ref_n == 0 {
            return Err(Error::domain("trials, n and ref_n must be positive"));
        }
        if self.ref_n < self.n {
            return Err(Error::domain("ref_n must be at least n"));
        }
        self.ntp.validate()?;
        self.estimator.validate()
    }

    pub fn eps_values(&self) -> Vec<f64> {
        (0..self.eps_grid)
            .map(|i| i as f64 / (self.eps_grid - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Ini,
    Rfn,
    Opt,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ini => "INI",
            Method::Rfn => "RFN",
            Method::Opt => "OPT",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps_true: f64,
    pub trial: usize,
    pub method: Method,
    pub delta: Option<f64>,
    /// Raw estimate; `None` when the RFN denominator vanished.
    pub estimate: Option<f64>,
    /// `|clip(estimate, 0, 1) - eps_true|`.
    pub abs_error: Option<f64>,
}

/// Mean and standard deviation over the proportion grid of the per-grid-point
/// MAE (mean over trials), in units of 1e-4. Methods suffixed `*` use the
/// delta with the smallest mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub delta: Option<f64>,
    pub mean_e4: f64,
    pub sd_e4: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SummaryRow>,
}

impl SweepOutput {
    pub fn summary_for(&self, method: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.method == method)
    }
}

/// Runs INI, RFN and OPT on every grid point and trial.
///
/// Each trial draws one watermarked pool of `ref_n` statistics and one null
/// pool of `n`. The pool is the reference for `g_hat` and `F_P`, and the
/// dataset at proportion `eps` is its first `round(n eps)` entries plus the
/// first `n - round(n eps)` nulls.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let eps_values = cfg.eps_values();
    let mut grid: Vec<Vec<Vec<SweepRow>>> = vec![Vec::with_capacity(cfg.trials); eps_values.len()];

    for trial in 0..cfg.trials {
        let mut rng = cfg.seed.derive(trial as u64).rng();
        let wm = simulate_watermarked_pivots(&cfg.scheme, &cfg.ntp, cfg.ref_n, &mut rng)?;
        if is_binary(&wm) {
            return Err(Error::NonIdentifiable(
                "binary pivotal statistics do not identify the watermark proportion".into(),
            ));
        }
        let nulls = simulate_null_pivots(&cfg.scheme, cfg.ntp.vocab, cfg.n, &mut rng);
        let wm_ref = Ecdf::new(&wm)?;
        let g_hat = fit_density_ratio(&wm, cfg.estimator.bins)?;

        let per_eps: Vec<Vec<SweepRow>> = eps_values
            .par_iter()
            .map(|&eps| {
                let k = watermarked_count(cfg.n, eps);
                let mut samples = Vec::with_capacity(cfg.n);
                samples.extend_from_slice(&wm[..k]);
                samples.extend_from_slice(&nulls[..cfg.n - k]);
                let data = Ecdf::from_vec(samples)?;
                let mut rows = Vec::with_capacity(2 * cfg.estimator.deltas.len() + 1);
                let row = |method, delta, estimate: Option<f64>| SweepRow {
                    eps_true: eps,
                    trial,
                    method,
                    delta,
                    estimate,
                    abs_error: estimate.map(|e| (e.clamp(0.0, 1.0) - eps).abs()),
                };
                for &delta in &cfg.estimator.deltas {
                    rows.push(row(
                        Method::Ini,
                        Some(delta),
                        Some(estimate_ini(&data, delta)?),
                    ));
                }
                for &delta in &cfg.estimator.deltas {
                    let rfn = match estimate_rfn(&data, &wm_ref, delta) {
                        Ok(v) => Some(v),
                        Err(Error::DegenerateDenominator(_)) => None,
                        Err(e) => return Err(e),
                    };
                    rows.push(row(Method::Rfn, Some(delta), rfn));
                }
                let opt = OptEstimator::new(&data, &g_hat, &wm_ref, &cfg.estimator)?.solve()?;
                rows.push(row(Method::Opt, None, Some(opt.eps)));
                Ok(rows)
            })
            .collect::<Result<_>>()?;
        for (slot, rows) in grid.iter_mut().zip(per_eps) {
            slot.push(rows);
        }
    }

    let rows: Vec<SweepRow> = grid.into_iter().flatten().flatten().collect();
    let summary = summarize(&rows);
    Ok(SweepOutput { rows, summary })
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Recomputes the summary table from sweep rows. Groups with any missing
/// error are skipped.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<(Method, Option<f64>)> = Vec::new();
    for r in rows {
        if !groups.contains(&(r.method, r.delta)) {
            groups.push((r.method, r.delta));
        }
    }
    let mut summary = Vec::new();
    for (method, delta) in groups {
        let mut by_eps: Vec<(f64, f64, usize)> = Vec::new();
        let mut complete = true;
        for r in rows
            .iter()
            .filter(|r| r.method == method && r.delta == delta)
        {
            let Some(err) = r.abs_error else {
                complete = false;
                break;
            };
            match by_eps.iter_mut().find(|(e, _, _)| *e == r.eps_true) {
                Some(slot) => {
                    slot.1 += err;
                    slot.2 += 1;
                }
                None => by_eps.push((r.eps_true, err, 1)),
            }
        }
        if !complete || by_eps.is_empty() {
            continue;
        }
        let maes: Vec<f64> = by_eps.iter().map(|(_, s, c)| s / *c as f64 * 1e4).collect();
        let (mean_e4, sd_e4) = mean_sd(&maes);
        summary.push(SummaryRow {
            method: method.to_string(),
            delta,
            mean_e4,
            sd_e4,
        });
    }
    for method in [Method::Ini, Method::Rfn] {
        let name = method.to_string();
        let best = summary
            .iter()
            .filter(|r| r.method == name)
            .min_by(|a, b| a.mean_e4.total_cmp(&b.mean_e4))
            .cloned();
        if let Some(best) = best {
            summary.push(SummaryRow {
                method: format!("{name}*"),
                ..best
            });
        }
    }
    summary
}

pub const CSV_HEADER: [&str; 6] = [
    "eps_true",
    "trial",
    "method",
    "delta",
    "estimate",
    "abs_error",
];

fn opt_to_string(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Data rows, then two summary rows per method with `eps_true` set to
/// `mean_e4` or `sd_e4` and the statistic in the `estimate` column.
pub fn write_sweep_csv<W: Write>(writer: W, out: &SweepOutput) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Io(e.into());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in &out.rows {
        w.write_record([
            r.eps_true.to_string(),
            r.trial.to_string(),
            r.method.to_string(),
            opt_to_string(r.delta),
            opt_to_string(r.estimate),
            opt_to_string(r.abs_error),
        ])
        .map_err(csv_err)?;
    }
    for s in &out.summary {
        for (label, value) in [("mean_e4", s.mean_e4), ("sd_e4", s.sd_e4)] {
            w.write_record([
                label.to_string(),
                String::new(),
                s.method.clone(),
                opt_to_string(s.delta),
                value.to_string(),
                String::new(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}
