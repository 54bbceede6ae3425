//! Synthetic data: next-token distributions, watermarked pivotal samples,
//! mixture datasets and autoregressive token streams with edits.

use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ntp::NtpDistribution;
use crate::rng::RandomSeed;
use crate::verifier::{derive_xi, VerifierKey};
use crate::watermark::{decode, pit, pivotal, PseudoRandomness, Scheme};

/// Smallest vocabulary the NTP generator supports: a Zipf head of up to 15
/// tokens, one dominant token and a non-empty uniform tail.
pub const MIN_SIM_VOCAB: usize = 17;

/// Token read in place of positions before the start of a stream when a
/// context window reaches back past it.
pub const PAD_TOKEN: usize = 0;

/// Parameters of the synthetic next-token distribution generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NtpSimConfig {
    /// Dominance parameter: the largest probability is uniform on
    /// `(0, 1 - delta_dom)`.
    pub delta_dom: f64,
    pub vocab: usize,
}

impl NtpSimConfig {
    pub fn new(delta_dom: f64, vocab: usize) -> Result<Self> {
        let cfg = Self { delta_dom, vocab };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_dom > 0.0 && self.delta_dom < 1.0) {
            return Err(Error::domain(format!(
                "dominance parameter {} must lie in (0, 1)",
                self.delta_dom
            )));
        }
        if self.vocab < MIN_SIM_VOCAB {
            return Err(Error::domain(format!(
                "vocabulary {} is below the generator minimum {MIN_SIM_VOCAB}",
                self.vocab
            )));
        }
        Ok(())
    }
}

impl Default for NtpSimConfig {
    fn default() -> Self {
        Self {
            delta_dom: 0.1,
            vocab: 1000,
        }
    }
}

/// Draws one next-token distribution.
///
/// A Zipf head `h_i ∝ (i + b)^-a` over `k` tokens (`a ~ U(0.95, 1.5)`,
/// `b ~ U(0.01, 0.1)`, `k ~ U{5..15}`) is scaled so the largest entry is
/// `1 - d` with `d ~ U(delta_dom, 1)`, the remainder is spread uniformly,
/// and the vector is randomly permuted. When the scaled head would exceed
/// unit mass, the first token takes `1 - d` and the head and tail share `d`
/// equally.
pub fn gen_ntp<R: Rng + ?Sized>(cfg: &NtpSimConfig, rng: &mut R) -> Result<NtpDistribution> {
    cfg.validate()?;
    let vocab = cfg.vocab;
    let a: f64 = rng.random_range(0.95..1.5);
    let b: f64 = rng.random_range(0.01..0.1);
    let k: usize = rng.random_range(5..=15);
    let mut head: Vec<f64> = (1..=k).map(|i| (i as f64 + b).powf(-a)).collect();
    let head_total: f64 = head.iter().sum();
    head.iter_mut().for_each(|h| *h /= head_total);
    let head_max = head.iter().copied().fold(0.0, f64::max);

    let d: f64 = rng.random_range(cfg.delta_dom..1.0);
    let scale = (1.0 - d) / head_max;
    let mut probs = vec![0.0; vocab];
    if scale <= 1.0 {
        for (p, h) in probs.iter_mut().zip(&head) {
            *p = scale * h;
        }
        let tail = (1.0 - scale) / (vocab - k) as f64;
        probs[k..].iter_mut().for_each(|p| *p = tail);
    } else {
        probs[0] = 1.0 - d;
        for (p, h) in probs[1..=k].iter_mut().zip(&head) {
            *p = 0.5 * d * h;
        }
        let tail = 0.5 * d / (vocab - k - 1) as f64;
        probs[k + 1..].iter_mut().for_each(|p| *p = tail);
    }
    probs.shuffle(rng);
    NtpDistribution::from_weights(probs)
}

/// `n` post-PIT pivotal statistics of watermarked tokens, each from a fresh
/// next-token distribution and fresh ideal pseudorandomness.
pub fn simulate_watermarked_pivots<R: Rng + ?Sized>(
    scheme: &Scheme,
    cfg: &NtpSimConfig,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    (0..n)
        .map(|_| {
            let p = gen_ntp(cfg, rng)?;
            let xi = PseudoRandomness::sample(scheme, cfg.vocab, rng);
            let w = decode(scheme, &p, &xi, rng)?;
            Ok(pit(scheme, pivotal(scheme, w, &xi)?))
        })
        .collect()
}

/// Post-PIT null samples: uniform for continuous schemes, Bernoulli with
/// the green fraction for the green-red list.
pub fn simulate_null_pivots<R: Rng + ?Sized>(
    scheme: &Scheme,
    vocab: usize,
    n: usize,
    rng: &mut R,
) -> Vec<f64> {
    match scheme {
        Scheme::GreenRedList(params) => {
            let gamma = params.green_size(vocab) as f64 / vocab as f64;
            (0..n)
                .map(|_| {
                    if rng.random::<f64>() < gamma {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        _ => (0..n).map(|_| rng.random::<f64>()).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub eps: f64,
    pub n: usize,
    pub scheme: Scheme,
    pub ntp: NtpSimConfig,
}

impl MixtureSpec {
    /// `round(n * eps)` with ties to even.
    pub fn watermarked_count(&self) -> usize {
        watermarked_count(self.n, self.eps)
    }
}

pub fn watermarked_count(n: usize, eps: f64) -> usize {
    ((n as f64) * eps).round_ties_even() as usize
}

/// Shuffled mixture of `round(n * eps)` watermarked and the remaining null
/// pivotal samples.
pub fn build_mixture(spec: &MixtureSpec, seed: RandomSeed) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&spec.eps) {
        return Err(Error::domain(format!(
            "proportion {} outside [0, 1]",
            spec.eps
        )));
    }
    let mut rng = seed.rng();
    let k = spec.watermarked_count().min(spec.n);
    let mut samples = simulate_watermarked_pivots(&spec.scheme, &spec.ntp, k, &mut rng)?;
    samples.extend(simulate_null_pivots(
        &spec.scheme,
        spec.ntp.vocab,
        spec.n - k,
        &mut rng,
    ));
    samples.shuffle(&mut rng);
    Ok(samples)
}

/// A generated token sequence.
///
/// `wm_flags[t]` records whether step `t` was produced by the watermark
/// decoder (after edits: whether its window is still intact watermarked
/// generation). `pivots` holds the post-PIT statistic of every step as seen
/// at generation time; it is not part of the file format.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TokenStream {
    pub tokens: Vec<usize>,
    #[serde(default)]
    pub wm_flags: Vec<bool>,
    #[serde(skip)]
    pub pivots: Vec<f64>,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Share of watermarked positions among those the verifier scores
    /// (`t >= m`). Zero when there are none.
    pub fn realized_eps(&self, m: usize) -> f64 {
        if self.wm_flags.len() <= m {
            return 0.0;
        }
        let scored = &self.wm_flags[m..];
        scored.iter().filter(|&&f| f).count() as f64 / scored.len() as f64
    }
}

/// The `m` tokens preceding position `t`, padding before the stream start.
pub(crate) fn context_at(tokens: &[usize], t: usize, m: usize) -> Vec<usize> {
    (0..m)
        .map(|j| {
            let back = m - j;
            if t >= back {
                tokens[t - back]
            } else {
                PAD_TOKEN
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamConfig {
    pub eps: f64,
    pub length: usize,
    pub scheme: Scheme,
    pub ntp: NtpSimConfig,
    /// 1-sequence repeated context masking.
    pub masking: bool,
}

/// Autoregressive generation with keyed pseudorandomness.
///
/// At each step a fresh next-token distribution is drawn and an
/// `eps`-coin decides whether the watermark decoder is used. With masking
/// on, a step whose `m`-token context already occurred earlier in the
/// stream falls back to plain multinomial sampling.
pub fn simulate_token_stream(
    cfg: &StreamConfig,
    key: &VerifierKey,
    seed: RandomSeed,
) -> Result<TokenStream> {
    if !(0.0..=1.0).contains(&cfg.eps) {
        return Err(Error::domain(format!(
            "proportion {} outside [0, 1]",
            cfg.eps
        )));
    }
    if cfg.length <= key.m {
        return Err(Error::domain(format!(
            "stream length {} must exceed the context window {}",
            cfg.length, key.m
        )));
    }
    cfg.ntp.validate()?;
    let mut rng = seed.rng();
    let mut tokens = Vec::with_capacity(cfg.length);
    let mut wm_flags = Vec::with_capacity(cfg.length);
    let mut pivots = Vec::with_capacity(cfg.length);
    let mut seen: HashSet<Vec<usize>> = HashSet::new();

    for t in 0..cfg.length {
        let context = context_at(&tokens, t, key.m);
        let xi = derive_xi(&cfg.scheme, key, &context, cfg.ntp.vocab)?;
        let p = gen_ntp(&cfg.ntp, &mut rng)?;
        let coin = rng.random::<f64>() < cfg.eps;
        let repeated = cfg.masking && seen.contains(&context);
        let watermark = coin && !repeated;
        let w = if watermark {
            decode(&cfg.scheme, &p, &xi, &mut rng)?
        } else {
            p.sample(&mut rng)
        };
        pivots.push(pit(&cfg.scheme, pivotal(&cfg.scheme, w, &xi)?));
        tokens.push(w);
        wm_flags.push(watermark);
        seen.insert(context);
    }
    Ok(TokenStream {
        tokens,
        wm_flags,
        pivots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    Substitution,
    Insertion,
    Deletion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EditSpec {
    pub kind: EditKind,
    pub rate: f64,
    pub seed: RandomSeed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditedStream {
    /// Edited tokens; `wm_flags` marks positions whose `m + 1` token window
    /// is an unmodified, contiguous span ending in a watermarked token.
    pub stream: TokenStream,
    /// Share of flagged positions among `t >= m`.
    pub true_eps: f64,
    /// Original index of each edited position; `None` for substituted or
    /// inserted tokens.
    pub origins: Vec<Option<usize>>,
}

/// Applies `round(rate * len)` random edits of one kind.
///
/// Substitutions pick distinct positions and replace the token with a
/// different uniformly drawn one; deletions remove distinct positions;
/// insertions put a uniform token before a uniformly chosen original
/// position. Windows are re-indexed on the edited stream.
pub fn apply_edits(
    stream: &TokenStream,
    edit: &EditSpec,
    vocab: usize,
    m: usize,
) -> Result<EditedStream> {
    if stream.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(0.0..=1.0).contains(&edit.rate) {
        return Err(Error::domain(format!(
            "edit rate {} outside [0, 1]",
            edit.rate
        )));
    }
    if vocab < 2 {
        return Err(Error::domain(
            "edits need a vocabulary of at least two tokens",
        ));
    }
    let flags_in: Vec<bool> = if stream.wm_flags.len() == stream.len() {
        stream.wm_flags.clone()
    } else {
        vec![false; stream.len()]
    };
    let len = stream.len();
    let count = watermarked_count(len, edit.rate).min(len);
    let mut rng = edit.seed.rng();

    let mut items: Vec<(usize, Option<usize>)> = stream
        .tokens
        .iter()
        .copied()
        .enumerate()
        .map(|(i, w)| (w, Some(i)))
        .collect();
    match edit.kind {
        EditKind::Substitution => {
            for pos in index::sample(&mut rng, len, count).into_vec() {
                let old = items[pos].0;
                let mut new = rng.random_range(0..vocab - 1);
                if new >= old {
                    new += 1;
                }
                items[pos] = (new, None);
            }
        }
        EditKind::Deletion => {
            let mut drop = vec![false; len];
            for pos in index::sample(&mut rng, len, count).into_vec() {
                drop[pos] = true;
            }
            items = items
                .into_iter()
                .zip(drop)
                .filter_map(|(item, d)| (!d).then_some(item))
                .collect();
        }
        EditKind::Insertion => {
            let mut before: Vec<Vec<usize>> = vec![Vec::new(); len + 1];
            for _ in 0..count {
                let pos = rng.random_range(0..=len);
                before[pos].push(rng.random_range(0..vocab));
            }
            let mut out = Vec::with_capacity(len + count);
            for (i, inserted) in before.into_iter().enumerate() {
                out.extend(inserted.into_iter().map(|w| (w, None)));
                if i < len {
                    out.push(items[i]);
                }
            }
            items = out;
        }
    }

    let origins: Vec<Option<usize>> = items.iter().map(|(_, o)| *o).collect();
    let wm_flags: Vec<bool> = (0..items.len())
        .map(|t| window_intact(&origins, t, m) && flags_in[origins[t].unwrap()])
        .collect();
    let stream = TokenStream {
        tokens: items.iter().map(|(w, _)| *w).collect(),
        wm_flags,
        pivots: Vec::new(),
    };
    let true_eps = stream.realized_eps(m);
    Ok(EditedStream {
        stream,
        true_eps,
        origins,
    })
}

/// Window `t - m ..= t` maps onto consecutive original positions. Positions
/// before the stream start count as the original padding.
fn window_intact(origins: &[Option<usize>], t: usize, m: usize) -> bool {
    let Some(end) = origins[t] else {
        return false;
    };
    let end = end as isize;
    (0..=m).all(|back| {
        let expected = end - back as isize;
        let i = t as isize - back as isize;
        if i < 0 {
            expected == i
        } else {
            origins[i as usize].map(|o| o as isize) == Some(expected)
        }
    })
}
