//! End-to-end acceptance checks. Each test prints one line:
//!
//! ```text
//! [PASS] criterion N <name>: <measured values>
//! ```
//!
//! The line goes straight to stderr, so it shows up without `--nocapture`.

use std::io::Write;
use std::time::Instant;

use rand::Rng;
use wmprop::cli;
use wmprop::ecdf::Ecdf;
use wmprop::estimators::{fit_density_ratio, variance_bounds, EstimatorConfig, OptEstimator};
use wmprop::io::write_pivotal_file;
use wmprop::mle_bias::{limit_solution, run_point, BinaryMixtureParams};
use wmprop::simulation::{
    apply_edits, build_mixture, gen_ntp, simulate_token_stream, simulate_watermarked_pivots,
    EditKind, EditSpec, MixtureSpec, NtpSimConfig, StreamConfig,
};
use wmprop::sweep::{run_sweep, SweepConfig};
use wmprop::verifier::{pivotal_sequence, VerifierKey};
use wmprop::watermark::{alt_cdf, decode, pit, pivotal, GreenRedParams, PseudoRandomness, Scheme};
use wmprop::RandomSeed;

fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    let line = format!(
        "[{}] criterion {id} {name}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(pass, "criterion {id} {name} failed: {detail}");
}

fn table_sweep(scheme: Scheme, seed: u64) -> (f64, f64, f64, f64) {
    let cfg = SweepConfig {
        eps_grid: 20,
        n: 100_000,
        ref_n: 100_000,
        trials: 1,
        scheme,
        ntp: NtpSimConfig::new(0.1, 1000).unwrap(),
        seed: RandomSeed(seed),
        estimator: EstimatorConfig::default(),
    };
    let start = Instant::now();
    let out = run_sweep(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let get = |m: &str| out.summary_for(m).unwrap().mean_e4 * 1e-4;
    (get("OPT"), get("RFN*"), get("INI*"), secs)
}

#[test]
fn criterion_1_gumbel_mae_ordering() {
    let (opt, rfn, ini, secs) = table_sweep(Scheme::GumbelMax, 20_250_101);
    let pass = opt < rfn && rfn < ini && opt <= 1e-2;
    verdict(
        1,
        "gumbel MAE ordering",
        pass,
        format!("OPT {opt:.5} < RFN {rfn:.5} < INI {ini:.5}, OPT <= 0.01 ({secs:.1}s)"),
    );
}

#[test]
fn criterion_2_inverse_opt_mae() {
    let (opt, rfn, ini, secs) = table_sweep(Scheme::InverseTransform, 20_250_102);
    verdict(
        2,
        "inverse OPT MAE",
        opt <= 1e-2,
        format!("OPT {opt:.5} <= 0.01 (RFN {rfn:.5}, INI {ini:.5}, {secs:.1}s)"),
    );
}

#[test]
fn criterion_3_calibration() {
    let start = Instant::now();
    let n = 100_000;
    let band = 1.36 / (n as f64).sqrt();
    let ntp = NtpSimConfig::new(0.1, 1000).unwrap();
    let mut details = Vec::new();
    let mut pass = true;

    for (scheme, seed) in [(Scheme::GumbelMax, 31u64), (Scheme::InverseTransform, 32)] {
        let mut rng = RandomSeed(seed).rng();
        let ys: Vec<f64> = (0..n)
            .map(|_| {
                let p = gen_ntp(&ntp, &mut rng).unwrap();
                let w = p.sample(&mut rng);
                let xi = PseudoRandomness::sample(&scheme, ntp.vocab, &mut rng);
                pit(&scheme, pivotal(&scheme, w, &xi).unwrap())
            })
            .collect();
        let ks = Ecdf::from_vec(ys).unwrap().ks_uniform();
        pass &= ks <= band;
        details.push(format!("{} null KS {ks:.5} <= {band:.5}", scheme.name()));
    }

    let mut rng = RandomSeed(33).rng();
    let p = gen_ntp(&ntp, &mut rng).unwrap();
    let ys: Vec<f64> = (0..n)
        .map(|_| {
            let xi = PseudoRandomness::sample(&Scheme::GumbelMax, ntp.vocab, &mut rng);
            let w = decode(&Scheme::GumbelMax, &p, &xi, &mut rng).unwrap();
            pivotal(&Scheme::GumbelMax, w, &xi).unwrap()
        })
        .collect();
    let e = Ecdf::from_vec(ys).unwrap();
    let sup = (0..=100)
        .map(|i| {
            let r = i as f64 / 100.0;
            (e.query(r).get() - alt_cdf(&Scheme::GumbelMax, &p, r, None).unwrap().get()).abs()
        })
        .fold(0.0, f64::max);
    pass &= sup <= 0.01;
    details.push(format!("gumbel alternative sup {sup:.5} <= 0.01"));

    let secs = start.elapsed().as_secs_f64();
    pass &= secs <= 30.0;
    details.push(format!("{secs:.1}s <= 30s"));
    verdict(3, "calibration", pass, details.join(", "));
}

#[test]
fn criterion_4_mle_bias() {
    let start = Instant::now();
    let (gamma, mu, lambda, n) = (0.3, 0.9, 1e-2, 100_000);
    let mut worst_limit_gap: f64 = 0.0;
    let mut max_bias: f64 = 0.0;
    for i in 0..21 {
        let eps = 0.05 + 0.9 * i as f64 / 20.0;
        let params = BinaryMixtureParams::new(gamma, mu, eps, n, lambda).unwrap();
        let r = run_point(&params, RandomSeed(40).derive(i)).unwrap();
        worst_limit_gap = worst_limit_gap.max((r.eps_hat - r.limit_eps).abs());
        max_bias = max_bias.max((r.eps_hat - eps).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst_limit_gap <= 0.05 && max_bias >= 0.05 && secs <= 60.0;
    verdict(
        4,
        "regularized MLE bias",
        pass,
        format!("max |mle - limit| {worst_limit_gap:.4} <= 0.05, max |mle - eps| {max_bias:.4} >= 0.05 ({secs:.1}s)"),
    );
}

#[test]
fn criterion_5_green_red_failure() {
    let scheme = Scheme::GreenRedList(GreenRedParams::new(0.5, 2.0).unwrap());
    let ntp = NtpSimConfig::new(0.1, 1000).unwrap();
    let data = build_mixture(
        &MixtureSpec {
            eps: 0.5,
            n: 20_000,
            scheme,
            ntp,
        },
        RandomSeed(51),
    )
    .unwrap();
    let reference = build_mixture(
        &MixtureSpec {
            eps: 1.0,
            n: 20_000,
            scheme,
            ntp,
        },
        RandomSeed(52),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (d, r) = (dir.path().join("data.csv"), dir.path().join("ref.csv"));
    write_pivotal_file(&d, &data).unwrap();
    write_pivotal_file(&r, &reference).unwrap();
    let mut out = Vec::new();
    let code = cli::run(
        [
            "wmprop",
            "estimate",
            "--data",
            d.to_str().unwrap(),
            "--reference",
            r.to_str().unwrap(),
        ],
        &mut out,
    );
    verdict(
        5,
        "green-red non-identifiability",
        code == 3,
        format!("estimate exit code {code} == 3"),
    );
}

#[test]
fn criterion_6_sigma_dominates_tau() {
    let mut rng = RandomSeed(60).rng();
    let cfg = EstimatorConfig::default();
    let mut checked = 0;
    let mut violations = 0;
    let mut min_ratio = f64::INFINITY;
    for i in 0..100u64 {
        let delta_dom = rng.random_range(0.05..0.6);
        let eps = rng.random_range(0.05..0.95);
        let ntp = NtpSimConfig::new(delta_dom, 1000).unwrap();
        let seed = RandomSeed(61).derive(i);
        let data = build_mixture(
            &MixtureSpec {
                eps,
                n: 10_000,
                scheme: Scheme::GumbelMax,
                ntp,
            },
            seed,
        )
        .unwrap();
        let wm = simulate_watermarked_pivots(
            &Scheme::GumbelMax,
            &ntp,
            10_000,
            &mut seed.derive(1).rng(),
        )
        .unwrap();
        let data = Ecdf::from_vec(data).unwrap();
        let wm_ref = Ecdf::from_vec(wm).unwrap();
        let g = fit_density_ratio(wm_ref.samples(), cfg.bins).unwrap();
        let opt = OptEstimator::new(&data, &g, &wm_ref, &cfg)
            .unwrap()
            .solve()
            .unwrap();
        for delta in [0.1, 0.01] {
            let d = variance_bounds(opt.eps, delta, &data, &g, &wm_ref).unwrap();
            if d.sigma_star.is_finite() && d.tau_star.is_finite() {
                checked += 1;
                min_ratio = min_ratio.min(d.sigma_star / d.tau_star);
                if d.sigma_star < d.tau_star {
                    violations += 1;
                }
            }
        }
    }
    verdict(
        6,
        "sigma* >= tau*",
        violations == 0 && checked > 0,
        format!("{violations} violations in {checked} checks, min sigma*/tau* {min_ratio:.3}"),
    );
}

#[test]
fn criterion_7_contraction() {
    let cfg = EstimatorConfig::default();
    let ntp = NtpSimConfig::new(0.1, 1000).unwrap();
    let wm =
        simulate_watermarked_pivots(&Scheme::GumbelMax, &ntp, 100_000, &mut RandomSeed(70).rng())
            .unwrap();
    let wm_ref = Ecdf::from_vec(wm).unwrap();
    let g = fit_density_ratio(wm_ref.samples(), cfg.bins).unwrap();
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for (k, eps0) in [0.2, 0.5, 0.8].into_iter().enumerate() {
        let spec = MixtureSpec {
            eps: eps0,
            n: 100_000,
            scheme: Scheme::GumbelMax,
            ntp,
        };
        let data =
            Ecdf::from_vec(build_mixture(&spec, RandomSeed(71).derive(k as u64)).unwrap()).unwrap();
        let est = OptEstimator::new(&data, &g, &wm_ref, &cfg).unwrap();
        let (lo, hi) = (cfg.eps_min, 1.0 - cfg.eps_min);
        for i in 0..50 {
            let e = lo + (hi - lo) * i as f64 / 49.0;
            let (a, b) = ((e - h).max(lo), (e + h).min(hi));
            let slope = (est.operator(b).unwrap() - est.operator(a).unwrap()) / (b - a);
            worst = worst.max(slope.abs());
        }
    }
    verdict(
        7,
        "contraction",
        worst < 1.0,
        format!("max |dT/deps| {worst:.4} < 1"),
    );
}

#[test]
fn criterion_8_verifier_round_trip() {
    let key = VerifierKey::from_hex(&"5a".repeat(32), 4).unwrap();
    let ntp = NtpSimConfig::new(0.1, 100).unwrap();
    let scheme = Scheme::GumbelMax;
    let cfg = StreamConfig {
        eps: 1.0,
        length: 5000,
        scheme,
        ntp,
        masking: false,
    };
    let stream = simulate_token_stream(&cfg, &key, RandomSeed(80)).unwrap();
    let ys = pivotal_sequence(&stream.tokens, ntp.vocab, &key, &scheme).unwrap();
    let bit_exact = ys == stream.pivots[key.m..];

    let est_cfg = EstimatorConfig::default();
    let wm =
        simulate_watermarked_pivots(&scheme, &ntp, 100_000, &mut RandomSeed(81).rng()).unwrap();
    let wm_ref = Ecdf::from_vec(wm).unwrap();
    let g = fit_density_ratio(wm_ref.samples(), est_cfg.bins).unwrap();
    let opt = |ys: Vec<f64>| {
        let data = Ecdf::from_vec(ys).unwrap();
        OptEstimator::new(&data, &g, &wm_ref, &est_cfg)
            .unwrap()
            .solve()
            .unwrap()
            .eps
    };
    let clean = opt(ys);

    let edit = EditSpec {
        kind: EditKind::Substitution,
        rate: 0.1,
        seed: RandomSeed(82),
    };
    let edited = apply_edits(&stream, &edit, ntp.vocab, key.m).unwrap();
    let edited_ys = pivotal_sequence(&edited.stream.tokens, ntp.vocab, &key, &scheme).unwrap();
    let noisy = opt(edited_ys);
    let bound = 1.0 - 5.0 * 0.1 - 0.01;

    let pass = bit_exact
        && clean >= 0.97
        && edited.true_eps >= bound
        && (noisy - edited.true_eps).abs() <= 0.05;
    verdict(
        8,
        "verifier round trip",
        pass,
        format!(
            "bit-exact pivots {bit_exact}, clean OPT {clean:.4} >= 0.97, edited true_eps {:.4} >= {bound:.2}, |OPT {noisy:.4} - true_eps| <= 0.05",
            edited.true_eps
        ),
    );
}

#[test]
fn criterion_9_oracles() {
    let mut rng = RandomSeed(90).rng();

    let mut ecdf_ok = true;
    for _ in 0..200 {
        let n = rng.random_range(1..=200);
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random::<f64>() < 0.2 {
                    0.5
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        let e = Ecdf::new(&xs).unwrap();
        for &x in &xs {
            let count = xs.iter().filter(|&&s| s <= x).count();
            ecdf_ok &= e.query(x).get() == count as f64 / n as f64;
        }
    }

    let ntp = NtpSimConfig::new(0.1, 1000).unwrap();
    let closed = EstimatorConfig::default();
    let mc = EstimatorConfig {
        mc_parity: true,
        mc_n: 1_000_000,
        mc_seed: RandomSeed(91),
        ..closed.clone()
    };
    let wm =
        simulate_watermarked_pivots(&Scheme::GumbelMax, &ntp, 100_000, &mut RandomSeed(92).rng())
            .unwrap();
    let wm_ref = Ecdf::from_vec(wm).unwrap();
    let g = fit_density_ratio(wm_ref.samples(), closed.bins).unwrap();
    let spec = MixtureSpec {
        eps: 0.4,
        n: 100_000,
        scheme: Scheme::GumbelMax,
        ntp,
    };
    let data = Ecdf::from_vec(build_mixture(&spec, RandomSeed(93)).unwrap()).unwrap();
    let t_closed = OptEstimator::new(&data, &g, &wm_ref, &closed).unwrap();
    let t_mc = OptEstimator::new(&data, &g, &wm_ref, &mc).unwrap();
    let mut parity: f64 = 0.0;
    for _ in 0..10 {
        let eps = rng.random_range(closed.eps_min..1.0 - closed.eps_min);
        parity = parity.max((t_closed.operator(eps).unwrap() - t_mc.operator(eps).unwrap()).abs());
    }

    let gamma = 0.3;
    let mut residual: f64 = 0.0;
    for i in 1..1000 {
        let e_hat = gamma + (1.0 - gamma) * i as f64 / 1000.0;
        let (_, mu) = limit_solution(e_hat, gamma).unwrap();
        let x = (mu - gamma).sqrt();
        residual = residual.max((x.powi(3) * (x * x + gamma).sqrt() - (e_hat - gamma)).abs());
    }

    let pass = ecdf_ok && parity <= 5e-3 && residual < 1e-12;
    verdict(
        9,
        "oracle equivalence",
        pass,
        format!("ecdf vs counting {ecdf_ok}, closed vs MC {parity:.2e} <= 5e-3, limit residual {residual:.1e} < 1e-12"),
    );
}
