//! The three decoding-based watermarks: Gumbel-max, inverse transform and
//! green-red list.
//!
//! Each scheme is described by a decoder `S(P, xi)` that picks the next
//! token from a next-token distribution `P` and pseudorandomness `xi`, and a
//! pivotal statistic `Y(w, xi)` whose law is known when `w` does not depend
//! on `xi`. [`pit`] maps the pivotal statistic to its null CDF value so
//! that unwatermarked statistics are uniform on `[0, 1]` for both
//! continuous schemes.
//!
//! The inverse-transform null and alternative CDFs are the large-vocabulary
//! limits (`r^2` and `(1 - (1 - r) / P_(1))^2`); the finite-vocabulary law
//! differs by `O(1/|W|)`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ecdf::Probability;
use crate::error::{Error, Result};
use crate::ntp::{sample_index, NtpDistribution};
use crate::rng::u64_to_open01;

/// Green-red list parameters: green fraction `gamma` and logit boost `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenRedParams {
    pub gamma: f64,
    pub delta: f64,
}

impl GreenRedParams {
    pub fn new(gamma: f64, delta: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::domain(format!(
                "green fraction {gamma} must lie in (0, 1)"
            )));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::domain(format!(
                "green boost {delta} must be positive"
            )));
        }
        Ok(Self { gamma, delta })
    }

    /// `round(gamma * |W|)`, ties to even.
    pub fn green_size(&self, vocab: usize) -> usize {
        (self.gamma * vocab as f64).round_ties_even() as usize
    }
}

impl Default for GreenRedParams {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            delta: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scheme {
    GumbelMax,
    InverseTransform,
    GreenRedList(GreenRedParams),
}

impl Scheme {
    /// Byte mixed into the keyed hash so schemes never share pseudorandomness.
    pub fn tag(&self) -> u8 {
        match self {
            Scheme::GumbelMax => 1,
            Scheme::InverseTransform => 2,
            Scheme::GreenRedList(_) => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::GumbelMax => "gumbel",
            Scheme::InverseTransform => "inverse",
            Scheme::GreenRedList(_) => "greenred",
        }
    }

    /// Whether the pivotal statistic is continuous (the proportion is
    /// identifiable).
    pub fn is_continuous(&self) -> bool {
        !matches!(self, Scheme::GreenRedList(_))
    }
}

/// Per-token uniforms `U_w` for Gumbel-max.
#[derive(Debug, Clone, PartialEq)]
pub enum GumbelUniforms {
    /// Materialized i.i.d. uniforms, one per token.
    Dense(Vec<f64>),
    /// Lazily derived from a context digest:
    /// `U_w = open01(u64_be(SHA-256(digest || u32_be(w))[..8]))`.
    Keyed { digest: [u8; 32], vocab: usize },
}

impl GumbelUniforms {
    pub fn vocab(&self) -> usize {
        match self {
            GumbelUniforms::Dense(us) => us.len(),
            GumbelUniforms::Keyed { vocab, .. } => *vocab,
        }
    }

    #[inline]
    pub fn get(&self, token: usize) -> f64 {
        match self {
            GumbelUniforms::Dense(us) => us[token],
            GumbelUniforms::Keyed { digest, .. } => keyed_uniform(digest, token),
        }
    }
}

pub(crate) fn keyed_uniform(digest: &[u8; 32], token: usize) -> f64 {
    let mut h = Sha256::new();
    h.update(digest);
    h.update((token as u32).to_be_bytes());
    let out = h.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&out[..8]);
    u64_to_open01(u64::from_be_bytes(word))
}

/// The pseudorandom variable `xi` of one decoding step.
#[derive(Debug, Clone, PartialEq)]
pub enum PseudoRandomness {
    Gumbel(GumbelUniforms),
    /// `perm[w]` is the 0-based position `pi(w) - 1` of token `w`.
    Inverse {
        u: f64,
        perm: Vec<usize>,
    },
    GreenRed {
        green: Vec<bool>,
    },
}

impl PseudoRandomness {
    pub fn gumbel(us: Vec<f64>) -> Result<Self> {
        if us.iter().any(|u| !(*u > 0.0 && *u < 1.0)) {
            return Err(Error::domain("Gumbel uniforms must lie in (0, 1)"));
        }
        Ok(PseudoRandomness::Gumbel(GumbelUniforms::Dense(us)))
    }

    pub fn inverse(u: f64, perm: Vec<usize>) -> Result<Self> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain(
                "inverse-transform uniform must lie in (0, 1)",
            ));
        }
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::domain(
                    "inverse-transform permutation is not a bijection",
                ));
            }
        }
        Ok(PseudoRandomness::Inverse { u, perm })
    }

    pub fn green_red(vocab: usize, green_tokens: &[usize]) -> Result<Self> {
        let mut green = vec![false; vocab];
        for &t in green_tokens {
            *green
                .get_mut(t)
                .ok_or_else(|| Error::domain(format!("green token {t} outside vocabulary")))? =
                true;
        }
        Ok(PseudoRandomness::GreenRed { green })
    }

    /// Draws `xi` from its ideal (perfectly random) distribution.
    pub fn sample<R: Rng + ?Sized>(scheme: &Scheme, vocab: usize, rng: &mut R) -> Self {
        match scheme {
            Scheme::GumbelMax => PseudoRandomness::Gumbel(GumbelUniforms::Dense(
                (0..vocab).map(|_| open01(rng)).collect(),
            )),
            Scheme::InverseTransform => {
                let mut perm: Vec<usize> = (0..vocab).collect();
                for i in (1..vocab).rev() {
                    let j = rng.random_range(0..=i);
                    perm.swap(i, j);
                }
                PseudoRandomness::Inverse {
                    u: open01(rng),
                    perm,
                }
            }
            Scheme::GreenRedList(params) => {
                let mut order: Vec<usize> = (0..vocab).collect();
                let size = params.green_size(vocab);
                // partial Fisher-Yates: the first `size` slots are a uniform subset
                for i in 0..size.min(vocab) {
                    let j = rng.random_range(i..vocab);
                    order.swap(i, j);
                }
                let mut green = vec![false; vocab];
                for &t in &order[..size.min(vocab)] {
                    green[t] = true;
                }
                PseudoRandomness::GreenRed { green }
            }
        }
    }

    pub fn vocab(&self) -> usize {
        match self {
            PseudoRandomness::Gumbel(us) => us.vocab(),
            PseudoRandomness::Inverse { perm, .. } => perm.len(),
            PseudoRandomness::GreenRed { green } => green.len(),
        }
    }

    pub fn is_green(&self, token: usize) -> Option<bool> {
        match self {
            PseudoRandomness::GreenRed { green } => green.get(token).copied(),
            _ => None,
        }
    }
}

#[inline]
fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    u64_to_open01(rng.next_u64())
}

fn scheme_mismatch(scheme: &Scheme) -> Error {
    Error::domain(format!(
        "pseudorandomness does not match the {} scheme",
        scheme.name()
    ))
}

/// Watermarked decoding `S(P, xi)`.
///
/// `rng` is only consumed by the green-red decoder, which samples from the
/// boosted distribution.
pub fn decode<R: Rng + ?Sized>(
    scheme: &Scheme,
    p: &NtpDistribution,
    xi: &PseudoRandomness,
    rng: &mut R,
) -> Result<usize> {
    if p.vocab() != xi.vocab() {
        return Err(Error::domain(format!(
            "distribution has {} tokens but pseudorandomness covers {}",
            p.vocab(),
            xi.vocab()
        )));
    }
    match (scheme, xi) {
        (Scheme::GumbelMax, PseudoRandomness::Gumbel(us)) => {
            // Zero-probability tokens score -inf and are skipped; ties go to
            // the lowest index.
            let mut best = None;
            let mut best_score = f64::NEG_INFINITY;
            for (w, &pw) in p.probs().iter().enumerate() {
                if pw > 0.0 {
                    let score = us.get(w).ln() / pw;
                    if best.is_none() || score > best_score {
                        best = Some(w);
                        best_score = score;
                    }
                }
            }
            best.ok_or_else(|| Error::domain("distribution has no positive entry"))
        }
        (Scheme::InverseTransform, PseudoRandomness::Inverse { u, perm }) => {
            let mut by_position = vec![0usize; perm.len()];
            for (w, &pos) in perm.iter().enumerate() {
                by_position[pos] = w;
            }
            let mut cdf = 0.0;
            let mut last = None;
            for &w in &by_position {
                let pw = p.prob(w);
                if pw > 0.0 {
                    cdf += pw;
                    last = Some(w);
                    if cdf >= *u {
                        return Ok(w);
                    }
                }
            }
            last.ok_or_else(|| Error::domain("distribution has no positive entry"))
        }
        (Scheme::GreenRedList(params), PseudoRandomness::GreenRed { green }) => {
            let boost = params.delta.exp();
            let weights: Vec<f64> = p
                .probs()
                .iter()
                .zip(green)
                .map(|(&pw, &g)| if g { pw * boost } else { pw })
                .collect();
            Ok(sample_index(&weights, rng))
        }
        _ => Err(scheme_mismatch(scheme)),
    }
}

/// Pivotal statistic `Y(w, xi)` on the raw scale.
pub fn pivotal(scheme: &Scheme, token: usize, xi: &PseudoRandomness) -> Result<f64> {
    let vocab = xi.vocab();
    if token >= vocab {
        return Err(Error::domain(format!(
            "token {token} outside vocabulary of {vocab}"
        )));
    }
    match (scheme, xi) {
        (Scheme::GumbelMax, PseudoRandomness::Gumbel(us)) => Ok(us.get(token)),
        (Scheme::InverseTransform, PseudoRandomness::Inverse { u, perm }) => {
            if vocab < 2 {
                return Err(Error::domain("inverse transform needs at least two tokens"));
            }
            // (pi(w) - 1) / (|W| - 1) with 1-based pi; perm already stores pi(w) - 1
            let eta = perm[token] as f64 / (vocab - 1) as f64;
            Ok(1.0 - (u - eta).abs())
        }
        (Scheme::GreenRedList(_), PseudoRandomness::GreenRed { green }) => {
            Ok(if green[token] { 1.0 } else { 0.0 })
        }
        _ => Err(scheme_mismatch(scheme)),
    }
}

/// Null CDF `F0(y)`: uniform for Gumbel-max, `y^2` for inverse transform.
/// Green-red statistics are binary and pass through unchanged.
pub fn pit(scheme: &Scheme, y: f64) -> f64 {
    match scheme {
        Scheme::GumbelMax => y,
        Scheme::InverseTransform => y * y,
        Scheme::GreenRedList(_) => y,
    }
}

/// Green-token probability under the boosted distribution.
pub fn green_red_mu(p: &NtpDistribution, green: &[bool], delta: f64) -> f64 {
    let boost = delta.exp();
    let (g, r) = p
        .probs()
        .iter()
        .zip(green)
        .fold(
            (0.0, 0.0),
            |(g, r), (&pw, &is_green)| {
                if is_green {
                    (g + pw, r)
                } else {
                    (g, r + pw)
                }
            },
        );
    g * boost / (g * boost + r)
}

/// Alternative CDF `F_P(r)` of the raw pivotal statistic.
///
/// The green-red CDF depends on the green set, which is taken from `xi`.
pub fn alt_cdf(
    scheme: &Scheme,
    p: &NtpDistribution,
    r: f64,
    xi: Option<&PseudoRandomness>,
) -> Result<Probability> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::domain(format!("CDF argument {r} outside [0, 1]")));
    }
    let value = match scheme {
        Scheme::GumbelMax => p
            .probs()
            .iter()
            .filter(|&&pw| pw > 0.0)
            .map(|&pw| pw * r.powf(1.0 / pw))
            .sum(),
        Scheme::InverseTransform => {
            let inner = (1.0 - (1.0 - r) / p.max_prob()).clamp(0.0, 1.0);
            inner * inner
        }
        Scheme::GreenRedList(params) => {
            let green = match xi {
                Some(PseudoRandomness::GreenRed { green }) if green.len() == p.vocab() => green,
                _ => {
                    return Err(Error::domain(
                        "green-red CDF needs the green set of matching size",
                    ))
                }
            };
            let mu = green_red_mu(p, green, params.delta);
            if r < 1.0 {
                1.0 - mu
            } else {
                1.0
            }
        }
    };
    Ok(Probability::saturating(value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomSeed;

    fn ntp(p: &[f64]) -> NtpDistribution {
        NtpDistribution::new(p.to_vec()).unwrap()
    }

    #[test]
    fn gumbel_singleton_support() {
        let p = ntp(&[1.0, 0.0, 0.0]);
        let mut rng = RandomSeed(0).rng();
        for _ in 0..50 {
            let xi = PseudoRandomness::sample(&Scheme::GumbelMax, 3, &mut rng);
            assert_eq!(decode(&Scheme::GumbelMax, &p, &xi, &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn gumbel_argmax_formula() {
        let p = ntp(&[0.5, 0.5]);
        let xi = PseudoRandomness::gumbel(vec![0.9, 0.1]).unwrap();
        let mut rng = RandomSeed(0).rng();
        // ln(0.9)/0.5 = -0.21 > ln(0.1)/0.5 = -4.6
        assert_eq!(decode(&Scheme::GumbelMax, &p, &xi, &mut rng).unwrap(), 0);
        assert_eq!(pivotal(&Scheme::GumbelMax, 1, &xi).unwrap(), 0.1);
    }

    #[test]
    fn gumbel_tie_breaks_low() {
        let p = ntp(&[0.5, 0.5]);
        let xi = PseudoRandomness::gumbel(vec![0.3, 0.3]).unwrap();
        let mut rng = RandomSeed(0).rng();
        assert_eq!(decode(&Scheme::GumbelMax, &p, &xi, &mut rng).unwrap(), 0);
    }

    #[test]
    fn inverse_generalized_inverse() {
        let p = ntp(&[0.2, 0.3, 0.5]);
        let xi = PseudoRandomness::inverse(0.6, vec![0, 1, 2]).unwrap();
        let mut rng = RandomSeed(0).rng();
        assert_eq!(
            decode(&Scheme::InverseTransform, &p, &xi, &mut rng).unwrap(),
            2
        );
        let xi = PseudoRandomness::inverse(0.2, vec![0, 1, 2]).unwrap();
        assert_eq!(
            decode(&Scheme::InverseTransform, &p, &xi, &mut rng).unwrap(),
            0
        );
        // permuted: token 2 first, so U = 0.6 lands in token 0 (cdf 0.5 -> 0.7)
        let xi = PseudoRandomness::inverse(0.6, vec![1, 2, 0]).unwrap();
        assert_eq!(
            decode(&Scheme::InverseTransform, &p, &xi, &mut rng).unwrap(),
            0
        );
    }

    #[test]
    fn inverse_pivotal_formula() {
        // pi(w) = 2 (1-based) -> eta = 0.5
        let xi = PseudoRandomness::inverse(0.7, vec![0, 1, 2]).unwrap();
        let y = pivotal(&Scheme::InverseTransform, 1, &xi).unwrap();
        assert!((y - 0.8).abs() < 1e-15);
    }

    #[test]
    fn green_red_indicator() {
        let scheme = Scheme::GreenRedList(GreenRedParams::default());
        let xi = PseudoRandomness::green_red(4, &[1, 3]).unwrap();
        assert_eq!(pivotal(&scheme, 1, &xi).unwrap(), 1.0);
        assert_eq!(pivotal(&scheme, 0, &xi).unwrap(), 0.0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let p = ntp(&[0.5, 0.5]);
        let xi = PseudoRandomness::gumbel(vec![0.5, 0.5, 0.5]).unwrap();
        let mut rng = RandomSeed(0).rng();
        assert!(matches!(
            decode(&Scheme::GumbelMax, &p, &xi, &mut rng),
            Err(Error::Domain(_))
        ));
        let xi = PseudoRandomness::gumbel(vec![0.5, 0.5]).unwrap();
        assert!(decode(&Scheme::InverseTransform, &p, &xi, &mut rng).is_err());
    }

    #[test]
    fn inverse_needs_two_tokens() {
        let xi = PseudoRandomness::Inverse {
            u: 0.5,
            perm: vec![0],
        };
        assert!(matches!(
            pivotal(&Scheme::InverseTransform, 0, &xi),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn bad_permutation_rejected() {
        assert!(PseudoRandomness::inverse(0.5, vec![0, 0, 1]).is_err());
        assert!(PseudoRandomness::inverse(0.5, vec![0, 3, 1]).is_err());
    }

    #[test]
    fn alt_cdf_examples() {
        let p = ntp(&[0.5, 0.5]);
        let v = alt_cdf(&Scheme::GumbelMax, &p, 0.5, None).unwrap().get();
        assert!((v - 0.25).abs() < 1e-15);

        let p = ntp(&[0.4, 0.35, 0.25]);
        assert_eq!(
            alt_cdf(&Scheme::InverseTransform, &p, 0.5, None)
                .unwrap()
                .get(),
            0.0
        );
        let v = alt_cdf(&Scheme::InverseTransform, &p, 0.8, None)
            .unwrap()
            .get();
        assert!((v - 0.25).abs() < 1e-12);

        let scheme = Scheme::GreenRedList(GreenRedParams::new(0.5, 2.0).unwrap());
        let p = ntp(&[0.5, 0.5]);
        let xi = PseudoRandomness::green_red(2, &[0]).unwrap();
        let e2 = 2f64.exp();
        let mu = e2 / (e2 + 1.0);
        let v = alt_cdf(&scheme, &p, 0.5, Some(&xi)).unwrap().get();
        assert!((v - (1.0 - mu)).abs() < 1e-15);
        assert_eq!(alt_cdf(&scheme, &p, 1.0, Some(&xi)).unwrap().get(), 1.0);
        assert!(alt_cdf(&scheme, &p, 0.5, None).is_err());
    }

    #[test]
    fn alt_cdf_rejects_out_of_range() {
        let p = ntp(&[0.5, 0.5]);
        assert!(alt_cdf(&Scheme::GumbelMax, &p, 1.5, None).is_err());
        assert!(alt_cdf(&Scheme::GumbelMax, &p, -0.1, None).is_err());
    }

    #[test]
    fn alt_cdf_endpoints_and_monotone() {
        let p = ntp(&[0.1, 0.2, 0.3, 0.4]);
        for scheme in [Scheme::GumbelMax, Scheme::InverseTransform] {
            assert_eq!(alt_cdf(&scheme, &p, 0.0, None).unwrap().get(), 0.0);
            assert!((alt_cdf(&scheme, &p, 1.0, None).unwrap().get() - 1.0).abs() < 1e-12);
            let mut prev = 0.0;
            for i in 0..=200 {
                let v = alt_cdf(&scheme, &p, i as f64 / 200.0, None).unwrap().get();
                assert!(v >= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn pit_values() {
        assert_eq!(pit(&Scheme::InverseTransform, 0.5), 0.25);
        assert_eq!(pit(&Scheme::GumbelMax, 0.73), 0.73);
        assert_eq!(
            pit(&Scheme::GreenRedList(GreenRedParams::default()), 1.0),
            1.0
        );
    }

    #[test]
    fn green_size_rounds_half_even() {
        let params = GreenRedParams::new(0.5, 2.0).unwrap();
        assert_eq!(params.green_size(5), 2);
        assert_eq!(params.green_size(7), 4);
        assert_eq!(params.green_size(1000), 500);
        let params = GreenRedParams::new(0.25, 2.0).unwrap();
        assert_eq!(params.green_size(10), 2);
        assert_eq!(params.green_size(6), 2);
    }

    #[test]
    fn sampled_green_set_has_rounded_size() {
        let scheme = Scheme::GreenRedList(GreenRedParams::new(0.3, 1.0).unwrap());
        let mut rng = RandomSeed(4).rng();
        let xi = PseudoRandomness::sample(&scheme, 17, &mut rng);
        let count = (0..17).filter(|&t| xi.is_green(t).unwrap()).count();
        assert_eq!(count, 5);
    }
}
