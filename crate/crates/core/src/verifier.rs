//! Keyed reconstruction of the pseudorandomness from token contexts.
//!
//! Byte layout (a repository convention):
//!
//! ```text
//! digest = SHA-256(key[32] || 0x01 || u32_be(ctx_0) || ... || u32_be(ctx_{m-1}) || scheme_tag)
//! ```
//!
//! * Gumbel-max: `U_w = open01(u64_be(SHA-256(digest || u32_be(w))[..8]))`,
//!   evaluated lazily per token.
//! * Inverse transform and green-red: a [`SplitMix64`] seeded with
//!   `u64_be(digest[..8])` drives a Fisher-Yates shuffle of `0..|W|`
//!   (`for i in (1..|W|).rev() { swap(i, below(i + 1)) }`). The shuffled list
//!   `L` places token `L[x]` at position `x`. Inverse transform then draws
//!   `U = open01(next)`; green-red takes `L[..round(gamma |W|)]` as green.
//!
//! `open01(x) = ((x >> 12) + 0.5) / 2^52`.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::watermark::{pit, pivotal, GumbelUniforms, PseudoRandomness, Scheme};

pub const DEFAULT_CONTEXT: usize = 4;

#[derive(Clone, PartialEq, Eq)]
pub struct VerifierKey {
    pub key: [u8; 32],
    /// Context window length.
    pub m: usize,
}

impl std::fmt::Debug for VerifierKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VerifierKey")
            .field("key", &"<redacted>")
            .field("m", &self.m)
            .finish()
    }
}

impl VerifierKey {
    pub fn new(key: [u8; 32], m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::domain("context window must be at least 1"));
        }
        Ok(Self { key, m })
    }

    /// Parses 64 hex characters (surrounding whitespace ignored).
    pub fn from_hex(text: &str, m: usize) -> Result<Self> {
        let text = text.trim();
        let mut key = [0u8; 32];
        hex::decode_to_slice(text, &mut key).map_err(|e| Error::Parse {
            line: 1,
            message: format!("key must be 64 hex characters: {e}"),
        })?;
        Self::new(key, m)
    }

    pub fn from_file(path: &Path, m: usize) -> Result<Self> {
        Self::from_hex(&std::fs::read_to_string(path)?, m)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.key)
    }

    fn digest(&self, scheme: &Scheme, context: &[usize]) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update([0x01]);
        for &t in context {
            h.update((t as u32).to_be_bytes());
        }
        h.update([scheme.tag()]);
        h.finalize().into()
    }
}

/// Pseudorandomness for the token following `context`.
pub fn derive_xi(
    scheme: &Scheme,
    key: &VerifierKey,
    context: &[usize],
    vocab: usize,
) -> Result<PseudoRandomness> {
    if context.len() != key.m {
        return Err(Error::domain(format!(
            "context has {} tokens, expected {}",
            context.len(),
            key.m
        )));
    }
    if vocab < 2 {
        return Err(Error::domain("vocabulary must hold at least two tokens"));
    }
    let digest = key.digest(scheme, context);
    if let Scheme::GumbelMax = scheme {
        return Ok(PseudoRandomness::Gumbel(GumbelUniforms::Keyed {
            digest,
            vocab,
        }));
    }
    let mut seed = [0u8; 8];
    seed.copy_from_slice(&digest[..8]);
    let mut g = SplitMix64::new(u64::from_be_bytes(seed));
    let mut order: Vec<usize> = (0..vocab).collect();
    for i in (1..vocab).rev() {
        let j = g.below(i as u64 + 1) as usize;
        order.swap(i, j);
    }
    Ok(match scheme {
        Scheme::InverseTransform => {
            let mut perm = vec![0usize; vocab];
            for (pos, &w) in order.iter().enumerate() {
                perm[w] = pos;
            }
            PseudoRandomness::Inverse {
                u: g.open01(),
                perm,
            }
        }
        Scheme::GreenRedList(params) => {
            let mut green = vec![false; vocab];
            for &w in &order[..params.green_size(vocab).min(vocab)] {
                green[w] = true;
            }
            PseudoRandomness::GreenRed { green }
        }
        Scheme::GumbelMax => unreachable!(),
    })
}

/// Post-PIT pivotal statistics for positions `m..len`, each computed from
/// the `m` preceding tokens.
pub fn pivotal_sequence(
    tokens: &[usize],
    vocab: usize,
    key: &VerifierKey,
    scheme: &Scheme,
) -> Result<Vec<f64>> {
    if tokens.len() <= key.m {
        return Err(Error::domain(format!(
            "sequence of {} tokens is not longer than the context window {}",
            tokens.len(),
            key.m
        )));
    }
    if let Some(bad) = tokens.iter().find(|&&t| t >= vocab) {
        return Err(Error::domain(format!(
            "token {bad} outside vocabulary of {vocab}"
        )));
    }
    (key.m..tokens.len())
        .map(|t| {
            let xi = derive_xi(scheme, key, &tokens[t - key.m..t], vocab)?;
            Ok(pit(scheme, pivotal(scheme, tokens[t], &xi)?))
        })
        .collect()
}
