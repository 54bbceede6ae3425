//! Regularized maximum likelihood for a two-Bernoulli mixture, where
//! `(eps, mu)` cannot be identified from the data.
//!
//! With `Y ~ (1 - eps) Ber(gamma) + eps Ber(mu)` the data law depends on
//! `(eps, mu)` only through `p = gamma + eps (mu - gamma)`. The penalized
//! objective
//!
//! ```text
//! L(eps, mu) = -e log p - (1 - e) log(1 - p) + lambda (mu^2 + eps^2)
//! ```
//!
//! therefore picks one point on the level set `p = e`, which converges as
//! `lambda -> 0` to `(x sqrt(x^2 + gamma), x^2 + gamma)` where `x` solves
//! `x^3 sqrt(x^2 + gamma) = e - gamma`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomSeed;

const GRID: usize = 200;
const NEWTON_STEPS: usize = 50;
/// Distance from a bound below which a coordinate counts as sitting on it.
const BOUND_SLACK: f64 = 1e-9;
/// Bound on the projected-gradient norm at a returned optimum.
pub const KKT_TOLERANCE: f64 = 1e-4;
pub const LIMIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryMixtureParams {
    pub gamma: f64,
    pub mu: f64,
    pub eps: f64,
    pub n: usize,
    pub lambda: f64,
}

impl BinaryMixtureParams {
    pub fn new(gamma: f64, mu: f64, eps: f64, n: usize, lambda: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < mu && mu < 1.0) {
            return Err(Error::domain(format!(
                "need 0 < gamma < mu < 1, got gamma = {gamma}, mu = {mu}"
            )));
        }
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::domain(format!("proportion {eps} outside [0, 1]")));
        }
        if n == 0 {
            return Err(Error::domain("need at least one sample"));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::domain(format!("lambda {lambda} must be positive")));
        }
        Ok(Self {
            gamma,
            mu,
            eps,
            n,
            lambda,
        })
    }

    /// Success probability of one draw, `(1 - eps) gamma + eps mu`.
    pub fn p(&self) -> f64 {
        (1.0 - self.eps) * self.gamma + self.eps * self.mu
    }
}

/// Mean of `n` Bernoulli draws from the mixture.
pub fn sample_binary_mixture(params: &BinaryMixtureParams, seed: RandomSeed) -> f64 {
    let mut rng = seed.rng();
    let p = params.p();
    let hits = (0..params.n).filter(|_| rng.random::<f64>() < p).count();
    hits as f64 / params.n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleFit {
    pub eps: f64,
    pub mu: f64,
    /// Set when `e_hat <= gamma`: no evidence of watermarking, the corner
    /// `(0, gamma)` is returned without optimization.
    pub no_evidence: bool,
    /// Projected-gradient norm at the returned point.
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleResult {
    pub eps_hat: f64,
    pub mu_hat: f64,
    pub e_hat: f64,
    pub limit_eps: f64,
    pub limit_mu: f64,
}

struct Objective {
    e: f64,
    gamma: f64,
    lambda: f64,
}

impl Objective {
    fn value(&self, eps: f64, mu: f64) -> f64 {
        let p = self.gamma + eps * (mu - self.gamma);
        if p <= 0.0 || p >= 1.0 {
            return f64::INFINITY;
        }
        -self.e * p.ln() - (1.0 - self.e) * (1.0 - p).ln() + self.lambda * (mu * mu + eps * eps)
    }

    fn gradient(&self, eps: f64, mu: f64) -> [f64; 2] {
        let p = self.gamma + eps * (mu - self.gamma);
        let s = -self.e / p + (1.0 - self.e) / (1.0 - p);
        [
            s * (mu - self.gamma) + 2.0 * self.lambda * eps,
            s * eps + 2.0 * self.lambda * mu,
        ]
    }

    fn hessian(&self, eps: f64, mu: f64) -> [[f64; 2]; 2] {
        let p = self.gamma + eps * (mu - self.gamma);
        let s = -self.e / p + (1.0 - self.e) / (1.0 - p);
        let q = self.e / (p * p) + (1.0 - self.e) / ((1.0 - p) * (1.0 - p));
        let d = mu - self.gamma;
        [
            [q * d * d + 2.0 * self.lambda, q * eps * d + s],
            [q * eps * d + s, q * eps * eps + 2.0 * self.lambda],
        ]
    }
}

/// Box `[0, 1] x [gamma, 1]` for `(eps, mu)`.
fn clamp_point(x: [f64; 2], gamma: f64) -> [f64; 2] {
    [x[0].clamp(0.0, 1.0), x[1].clamp(gamma, 1.0)]
}

fn projected_gradient(obj: &Objective, x: [f64; 2]) -> f64 {
    let g = obj.gradient(x[0], x[1]);
    let y = clamp_point([x[0] - g[0], x[1] - g[1]], obj.gamma);
    (x[0] - y[0]).abs().max((x[1] - y[1]).abs())
}

/// Minimizes the penalized negative log-likelihood over
/// `eps in [0, 1]`, `mu in [gamma, 1]`.
///
/// A 200 x 200 grid picks the starting point; up to 50 projected Newton
/// steps with backtracking refine it. Variables sitting on a bound with the
/// gradient pointing outward are held fixed.
pub fn regularized_mle(e_hat: f64, gamma: f64, lambda: f64) -> Result<MleFit> {
    if !(e_hat > 0.0 && e_hat < 1.0) {
        return Err(Error::domain(format!("sample mean {e_hat} outside (0, 1)")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::domain(format!("gamma {gamma} outside (0, 1)")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("lambda {lambda} must be positive")));
    }
    if e_hat <= gamma {
        return Ok(MleFit {
            eps: 0.0,
            mu: gamma,
            no_evidence: true,
            kkt_residual: 0.0,
        });
    }
    let obj = Objective {
        e: e_hat,
        gamma,
        lambda,
    };

    let mut x = [0.0, gamma];
    let mut fx = obj.value(x[0], x[1]);
    for i in 0..GRID {
        let eps = i as f64 / (GRID - 1) as f64;
        for j in 0..GRID {
            let mu = gamma + (1.0 - gamma) * j as f64 / (GRID - 1) as f64;
            let f = obj.value(eps, mu);
            if f < fx {
                x = [eps, mu];
                fx = f;
            }
        }
    }

    for _ in 0..NEWTON_STEPS {
        if projected_gradient(&obj, x) <= 1e-12 {
            break;
        }
        let g = obj.gradient(x[0], x[1]);
        let lower = [0.0, gamma];
        let free: [bool; 2] = std::array::from_fn(|k| {
            !((x[k] <= lower[k] + BOUND_SLACK && g[k] > 0.0)
                || (x[k] >= 1.0 - BOUND_SLACK && g[k] < 0.0))
        });
        let h = obj.hessian(x[0], x[1]);
        let step = newton_direction(&h, &g, free);
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-12 {
            let trial = clamp_point([x[0] - t * step[0], x[1] - t * step[1]], gamma);
            let ft = obj.value(trial[0], trial[1]);
            if ft < fx {
                x = trial;
                fx = ft;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }

    Ok(MleFit {
        eps: x[0],
        mu: x[1],
        no_evidence: false,
        kkt_residual: projected_gradient(&obj, x),
    })
}

/// Newton direction on the free coordinates, falling back to the gradient
/// when the reduced Hessian is not positive definite.
fn newton_direction(h: &[[f64; 2]; 2], g: &[f64; 2], free: [bool; 2]) -> [f64; 2] {
    match free {
        [true, true] => {
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            if h[0][0] > 0.0 && det > 0.0 {
                [
                    (h[1][1] * g[0] - h[0][1] * g[1]) / det,
                    (h[0][0] * g[1] - h[1][0] * g[0]) / det,
                ]
            } else {
                *g
            }
        }
        [true, false] if h[0][0] > 0.0 => [g[0] / h[0][0], 0.0],
        [false, true] if h[1][1] > 0.0 => [0.0, g[1] / h[1][1]],
        [true, false] => [g[0], 0.0],
        [false, true] => [0.0, g[1]],
        [false, false] => [0.0, 0.0],
    }
}

/// Large-sample limit of the regularized MLE as `lambda -> 0`.
///
/// Bisects `x^3 sqrt(x^2 + gamma) = e_hat - gamma` on `[0, x_hi]`, with
/// `x_hi` the smallest power of two whose left side exceeds the right.
/// For `e_hat > gamma + (1 - gamma)^1.5` the returned `mu` exceeds 1: the
/// limit is the unconstrained one, while the fit stays on `mu <= 1`.
pub fn limit_solution(e_hat: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::domain(format!("gamma {gamma} outside (0, 1)")));
    }
    if !(e_hat >= gamma && e_hat <= 1.0) {
        return Err(Error::domain(format!(
            "limit needs gamma <= e_hat <= 1, got e_hat = {e_hat}, gamma = {gamma}"
        )));
    }
    let rhs = e_hat - gamma;
    if rhs == 0.0 {
        return Ok((0.0, gamma));
    }
    let lhs = |x: f64| x.powi(3) * (x * x + gamma).sqrt();

    let mut hi = 1.0f64;
    while lhs(hi) <= rhs {
        hi *= 2.0;
    }
    while lhs(hi * 0.5) > rhs {
        hi *= 0.5;
    }
    let mut lo = 0.0f64;
    let mut x = 0.5 * hi;
    for _ in 0..200 {
        x = 0.5 * (lo + hi);
        let r = lhs(x) - rhs;
        if r.abs() < LIMIT_TOLERANCE * 1e-2 || x == lo || x == hi {
            break;
        }
        if r > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
    }
    Ok((x * (x * x + gamma).sqrt(), x * x + gamma))
}

/// One point of the bias experiment: sample, fit, and compare with the
/// limit. Below-null sample means use the `(0, gamma)` limit.
pub fn run_point(params: &BinaryMixtureParams, seed: RandomSeed) -> Result<MleResult> {
    let e_hat = sample_binary_mixture(params, seed);
    let fit = regularized_mle(e_hat, params.gamma, params.lambda)?;
    let (limit_eps, limit_mu) = if e_hat <= params.gamma {
        (0.0, params.gamma)
    } else {
        limit_solution(e_hat, params.gamma)?
    };
    Ok(MleResult {
        eps_hat: fit.eps,
        mu_hat: fit.mu,
        e_hat,
        limit_eps,
        limit_mu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(BinaryMixtureParams::new(0.3, 0.9, 0.5, 100, 1e-2).is_ok());
        assert!(BinaryMixtureParams::new(0.3, 0.2, 0.5, 100, 1e-2).is_err());
        assert!(BinaryMixtureParams::new(0.3, 0.9, 1.5, 100, 1e-2).is_err());
        assert!(BinaryMixtureParams::new(0.3, 0.9, 0.5, 100, 0.0).is_err());
    }

    #[test]
    fn sample_means() {
        for (eps, target) in [(0.0, 0.3), (1.0, 0.9), (0.5, 0.6)] {
            let p = BinaryMixtureParams::new(0.3, 0.9, eps, 100_000, 1e-2).unwrap();
            let e = sample_binary_mixture(&p, RandomSeed(3));
            let se = (target * (1.0 - target) / 1e5f64).sqrt();
            assert!((e - target).abs() <= 3.0 * se, "{eps}: {e}");
        }
    }

    #[test]
    fn limit_identity_and_residual() {
        let gamma = 0.3;
        for i in 1..100 {
            let e = gamma + (1.0 - gamma) * i as f64 / 100.0;
            let (le, lm) = limit_solution(e, gamma).unwrap();
            assert!((le * le - lm * (lm - gamma)).abs() < 1e-8);
            let x = (lm - gamma).sqrt();
            assert!((x.powi(3) * (x * x + gamma).sqrt() - (e - gamma)).abs() < 1e-12);
        }
    }

    #[test]
    fn limit_boundaries() {
        assert_eq!(limit_solution(0.3, 0.3).unwrap(), (0.0, 0.3));
        assert!(matches!(limit_solution(0.2, 0.3), Err(Error::Domain(_))));
    }

    #[test]
    fn mle_no_evidence_corner() {
        let fit = regularized_mle(0.3, 0.3, 1e-2).unwrap();
        assert!(fit.no_evidence);
        assert_eq!((fit.eps, fit.mu), (0.0, 0.3));
        let fit = regularized_mle(0.2, 0.3, 1e-2).unwrap();
        assert!(fit.no_evidence);
    }

    #[test]
    fn mle_close_to_limit() {
        let fit = regularized_mle(0.6, 0.3, 1e-2).unwrap();
        let (le, _) = limit_solution(0.6, 0.3).unwrap();
        assert!((fit.eps - le).abs() <= 0.02, "{} vs {le}", fit.eps);
        assert!(fit.kkt_residual <= KKT_TOLERANCE);
    }

    #[test]
    fn mle_approaches_limit_as_lambda_shrinks() {
        let (le, _) = limit_solution(0.5, 0.25).unwrap();
        let gaps: Vec<f64> = [1e-1, 1e-2, 1e-3]
            .iter()
            .map(|&l| (regularized_mle(0.5, 0.25, l).unwrap().eps - le).abs())
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    }

    #[test]
    fn mle_rejects_bad_inputs() {
        assert!(regularized_mle(0.0, 0.3, 1e-2).is_err());
        assert!(regularized_mle(0.5, 0.3, -1.0).is_err());
    }
}
