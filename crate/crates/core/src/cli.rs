//! The `wmprop` command-line tool.
//!
//! Exit codes: 0 success, 2 usage/parse/domain errors, 3 degenerate or
//! non-identifiable statistics and solver failures, 4 I/O errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{estimate_all, EstimateReport, EstimatorConfig};
use crate::io::{read_pivotal_file, read_streams_file, write_pivotal, write_streams};
use crate::mle_bias::{run_point, BinaryMixtureParams};
use crate::rng::RandomSeed;
use crate::simulation::{
    apply_edits, build_mixture, simulate_token_stream, simulate_watermarked_pivots, EditKind,
    EditSpec, MixtureSpec, NtpSimConfig, StreamConfig,
};
use crate::sweep::{run_sweep, write_sweep_csv, SweepConfig};
use crate::verifier::{pivotal_sequence, VerifierKey, DEFAULT_CONTEXT};
use crate::watermark::{GreenRedParams, Scheme};

#[derive(Debug, Parser)]
#[command(
    name = "wmprop",
    version,
    about = "Watermark proportion estimation from pivotal statistics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a pivotal-sample file or a token stream.
    Simulate(SimulateArgs),
    /// Run all estimators on a pivotal file against a watermarked reference.
    Estimate(EstimateArgs),
    /// MAE sweep over a grid of true proportions (CSV).
    Sweep(SweepArgs),
    /// Regularized MLE bias for binary pivotal statistics (CSV).
    MleBias(MleBiasArgs),
    /// Recompute pivotal statistics from token streams and estimate.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeKind {
    Gumbel,
    Inverse,
    Greenred,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Pivots,
    Stream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EditArg {
    Substitution,
    Insertion,
    Deletion,
}

impl From<EditArg> for EditKind {
    fn from(e: EditArg) -> Self {
        match e {
            EditArg::Substitution => EditKind::Substitution,
            EditArg::Insertion => EditKind::Insertion,
            EditArg::Deletion => EditKind::Deletion,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SeedArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Draw a seed from the operating system instead of --seed.
    #[arg(long, conflicts_with = "seed")]
    pub entropy: bool,
}

impl SeedArgs {
    fn resolve(&self) -> Result<RandomSeed> {
        match (self.seed, self.entropy) {
            (Some(s), _) => Ok(RandomSeed(s)),
            (None, true) => {
                let seed = RandomSeed::from_entropy();
                eprintln!("seed: {}", seed.0);
                Ok(seed)
            }
            (None, false) => Err(Error::domain("--seed is required (or pass --entropy)")),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SchemeArgs {
    #[arg(long, value_enum, default_value = "gumbel")]
    pub scheme: SchemeKind,
    #[arg(long, default_value_t = 1000)]
    pub vocab: usize,
    /// Dominance parameter of the next-token distribution generator.
    #[arg(long, default_value_t = 0.1)]
    pub delta_dom: f64,
    /// Green-list fraction.
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    /// Green-list logit boost.
    #[arg(long, default_value_t = 2.0)]
    pub gr_delta: f64,
}

impl SchemeArgs {
    fn scheme(&self) -> Result<Scheme> {
        Ok(match self.scheme {
            SchemeKind::Gumbel => Scheme::GumbelMax,
            SchemeKind::Inverse => Scheme::InverseTransform,
            SchemeKind::Greenred => {
                Scheme::GreenRedList(GreenRedParams::new(self.gamma, self.gr_delta)?)
            }
        })
    }

    fn ntp(&self) -> Result<NtpSimConfig> {
        NtpSimConfig::new(self.delta_dom, self.vocab)
    }
}

#[derive(Debug, Clone, Args)]
pub struct EstimatorArgs {
    /// Threshold for the indicator estimators; repeatable.
    #[arg(long = "delta", default_values_t = [0.1, 0.01, 0.001])]
    pub deltas: Vec<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub eps_min: f64,
    #[arg(long, default_value_t = 500)]
    pub bins: usize,
    /// Monte Carlo null integrals instead of exact bin masses.
    #[arg(long)]
    pub mc_parity: bool,
    #[arg(long, default_value_t = 1_000_000)]
    pub mc_n: usize,
}

impl EstimatorArgs {
    fn config(&self, mc_seed: RandomSeed) -> Result<EstimatorConfig> {
        let cfg = EstimatorConfig {
            deltas: self.deltas.clone(),
            eps_min: self.eps_min,
            bins: self.bins,
            mc_parity: self.mc_parity,
            mc_n: self.mc_n,
            mc_seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long, value_enum, default_value = "pivots")]
    pub format: OutputFormat,
    #[arg(long)]
    pub eps: f64,
    /// Number of pivotal samples (pivots format).
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    /// Stream length in tokens (stream format).
    #[arg(long, default_value_t = 1000)]
    pub length: usize,
    #[arg(long, default_value_t = DEFAULT_CONTEXT)]
    pub m: usize,
    #[arg(long)]
    pub key_file: Option<PathBuf>,
    /// Skip the watermark when the context window already occurred.
    #[arg(long)]
    pub masking: bool,
    #[arg(long, value_enum)]
    pub edit: Option<EditArg>,
    #[arg(long, default_value_t = 0.0)]
    pub edit_rate: f64,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    /// Pivotal-sample file to analyse.
    #[arg(long)]
    pub data: PathBuf,
    /// Pivotal-sample file of purely watermarked statistics.
    #[arg(long)]
    pub reference: PathBuf,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    /// Watermarked pool size per trial, at least --n; defaults to --n.
    #[arg(long)]
    pub ref_n: Option<usize>,
    #[arg(long, default_value_t = 200)]
    pub eps_grid: usize,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MleBiasArgs {
    #[arg(long, default_value_t = 0.3)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.9)]
    pub mu: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub lambda: f64,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[arg(long, default_value_t = 21)]
    pub eps_grid: usize,
    #[arg(long, default_value_t = 0.05)]
    pub eps_lo: f64,
    #[arg(long, default_value_t = 0.95)]
    pub eps_hi: f64,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Token streams as JSON Lines.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub key_file: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CONTEXT)]
    pub m: usize,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    /// Watermarked reference pivotal file; simulated when absent.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    pub ref_n: usize,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub seed: SeedArgs,
    /// Also write the recomputed pivotal statistics of all streams.
    #[arg(long)]
    pub pivots_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit status. Results go to `--out` when given, else to `stdout`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<()> {
    match command {
        Command::Simulate(a) => cmd_simulate(&a, stdout),
        Command::Estimate(a) => cmd_estimate(&a, stdout),
        Command::Sweep(a) => cmd_sweep(&a, stdout),
        Command::MleBias(a) => cmd_mle_bias(&a, stdout),
        Command::Verify(a) => cmd_verify(&a, stdout),
    }
}

fn with_output(
    out: Option<&Path>,
    stdout: &mut dyn Write,
    f: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            f(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => f(stdout),
    }
}

fn write_json<T: Serialize>(w: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, value).map_err(std::io::Error::from)?;
    writeln!(w)?;
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs, stdout: &mut dyn Write) -> Result<()> {
    let seed = a.seed.resolve()?;
    let scheme = a.scheme.scheme()?;
    let ntp = a.scheme.ntp()?;
    match a.format {
        OutputFormat::Pivots => {
            let spec = MixtureSpec {
                eps: a.eps,
                n: a.n,
                scheme,
                ntp,
            };
            let samples = build_mixture(&spec, seed)?;
            with_output(a.out.as_deref(), stdout, |w| write_pivotal(w, &samples))
        }
        OutputFormat::Stream => {
            let key_file = a
                .key_file
                .as_deref()
                .ok_or_else(|| Error::domain("--key-file is required for stream output"))?;
            let key = VerifierKey::from_file(key_file, a.m)?;
            let cfg = StreamConfig {
                eps: a.eps,
                length: a.length,
                scheme,
                ntp,
                masking: a.masking,
            };
            let mut stream = simulate_token_stream(&cfg, &key, seed.derive(0))?;
            if let Some(kind) = a.edit {
                let edit = EditSpec {
                    kind: kind.into(),
                    rate: a.edit_rate,
                    seed: seed.derive(1),
                };
                let edited = apply_edits(&stream, &edit, ntp.vocab, a.m)?;
                eprintln!("true_eps: {}", edited.true_eps);
                stream = edited.stream;
            } else {
                eprintln!("realized_eps: {}", stream.realized_eps(a.m));
            }
            with_output(a.out.as_deref(), stdout, |w| {
                write_streams(w, std::slice::from_ref(&stream))
            })
        }
    }
}

fn cmd_estimate(a: &EstimateArgs, stdout: &mut dyn Write) -> Result<()> {
    let mc_seed = if a.estimator.mc_parity {
        a.seed.resolve()?
    } else {
        RandomSeed(0)
    };
    let cfg = a.estimator.config(mc_seed)?;
    let data = read_pivotal_file(&a.data)?;
    let reference = read_pivotal_file(&a.reference)?;
    let report = estimate_all(&data, &reference, &cfg)?;
    with_output(a.out.as_deref(), stdout, |w| {
        serde_json::to_writer_pretty(&mut *w, &report).map_err(std::io::Error::from)?;
        writeln!(w)?;
        Ok(())
    })
}

fn cmd_sweep(a: &SweepArgs, stdout: &mut dyn Write) -> Result<()> {
    let seed = a.seed.resolve()?;
    let cfg = SweepConfig {
        eps_grid: a.eps_grid,
        n: a.n,
        ref_n: a.ref_n.unwrap_or(a.n),
        trials: a.trials,
        scheme: a.scheme.scheme()?,
        ntp: a.scheme.ntp()?,
        seed,
        estimator: a.estimator.config(seed.derive(u64::MAX))?,
    };
    // Fail on an unwritable destination before the expensive part.
    let file = a.out.as_deref().map(File::create).transpose()?;
    let out = run_sweep(&cfg)?;
    match file {
        Some(f) => write_sweep_csv(BufWriter::new(f), &out),
        None => write_sweep_csv(stdout, &out),
    }
}

pub const MLE_CSV_HEADER: [&str; 6] = [
    "true_eps",
    "e_hat",
    "mle_eps",
    "mle_mu",
    "limit_eps",
    "limit_mu",
];

fn cmd_mle_bias(a: &MleBiasArgs, stdout: &mut dyn Write) -> Result<()> {
    let seed = a.seed.resolve()?;
    if a.eps_grid < 2 || !(0.0..=1.0).contains(&a.eps_lo) || !(a.eps_lo..=1.0).contains(&a.eps_hi) {
        return Err(Error::domain(
            "need --eps-grid >= 2 and 0 <= eps-lo <= eps-hi <= 1",
        ));
    }
    let eps: Vec<f64> = (0..a.eps_grid)
        .map(|i| a.eps_lo + (a.eps_hi - a.eps_lo) * i as f64 / (a.eps_grid - 1) as f64)
        .collect();
    let results = eps
        .par_iter()
        .enumerate()
        .map(|(i, &e)| {
            let params = BinaryMixtureParams::new(a.gamma, a.mu, e, a.n, a.lambda)?;
            run_point(&params, seed.derive(i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    with_output(a.out.as_deref(), stdout, |w| {
        let mut csv = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Io(e.into());
        csv.write_record(MLE_CSV_HEADER).map_err(csv_err)?;
        for (e, r) in eps.iter().zip(&results) {
            csv.write_record(
                [
                    e,
                    &r.e_hat,
                    &r.eps_hat,
                    &r.mu_hat,
                    &r.limit_eps,
                    &r.limit_mu,
                ]
                .map(|v| v.to_string()),
            )
            .map_err(csv_err)?;
        }
        csv.flush()?;
        Ok(())
    })
}

#[derive(Debug, Serialize)]
pub struct VerifyRecord {
    pub record: usize,
    pub samples: usize,
    /// Share of flagged positions among the scored ones, when the input
    /// carried watermark flags.
    pub flagged_eps: Option<f64>,
    pub report: EstimateReport,
}

fn cmd_verify(a: &VerifyArgs, stdout: &mut dyn Write) -> Result<()> {
    let key = VerifierKey::from_file(&a.key_file, a.m)?;
    let scheme = a.scheme.scheme()?;
    let streams = read_streams_file(&a.input)?;
    if streams.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let reference = match &a.reference {
        Some(path) => read_pivotal_file(path)?,
        None => {
            let seed = a.seed.resolve()?;
            simulate_watermarked_pivots(&scheme, &a.scheme.ntp()?, a.ref_n, &mut seed.rng())?
        }
    };
    let mc_seed = if a.estimator.mc_parity {
        a.seed.resolve()?.derive(1)
    } else {
        RandomSeed(0)
    };
    let cfg = a.estimator.config(mc_seed)?;

    let mut all_pivots = Vec::new();
    let mut records = Vec::with_capacity(streams.len());
    for (i, s) in streams.iter().enumerate() {
        let ys = pivotal_sequence(&s.tokens, a.scheme.vocab, &key, &scheme)?;
        let report = estimate_all(&ys, &reference, &cfg)?;
        let flagged_eps = (s.wm_flags.len() == s.tokens.len()).then(|| s.realized_eps(a.m));
        records.push(VerifyRecord {
            record: i,
            samples: ys.len(),
            flagged_eps,
            report,
        });
        all_pivots.extend(ys);
    }
    if let Some(path) = &a.pivots_out {
        write_pivotal(BufWriter::new(File::create(path)?), &all_pivots)?;
    }
    with_output(a.out.as_deref(), stdout, |w| {
        for r in &records {
            write_json(w, r)?;
        }
        Ok(())
    })
}
