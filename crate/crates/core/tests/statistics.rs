//! Statistical behavior of the full pipeline on planted data: consistency of
//! the plug-in estimator, spike recovery through the certificate witness, and
//! the whitening of the observed covariance.

use speccert_core::cumulant::{khat, sample_moments};
use speccert_core::harness::estimate_error_distribution;
use speccert_core::linalg::{dot, norm2};
use speccert_core::planted::{sample_dataset, Hypothesis, PlantedConfig, TwoPointDist};
use speccert_core::specnorm::{lower_cert_power, PowerIterConfig};
use speccert_core::stream::substream;

fn planted_cfg(p: usize, n: usize, a: f64, q: f64, seed: u64) -> PlantedConfig {
    let w = TwoPointDist::from_bernoulli(q).unwrap();
    PlantedConfig::with_ones_spike(p, n, a, 3, w, seed).unwrap()
}

#[test]
fn certificate_witness_recovers_the_spike_direction() {
    let cfg = planted_cfg(3, 100_000, 1.0, 0.2, 2001);
    let data = sample_dataset(&cfg, Hypothesis::Planted).unwrap();
    let est = khat(&data, cfg.d).unwrap();
    let mut rng = substream(cfg.seed, "witness-power", 0);
    let cert = lower_cert_power(&est.tensor, &PowerIterConfig::default(), &mut rng).unwrap();
    let witness = cert.witness.expect("nonzero tensor must carry a witness");

    let su = cfg.whitened_spike();
    let su_norm = norm2(&su);
    let align = (dot(&witness, &su) / su_norm).abs();
    assert!(align >= 0.95, "alignment {align}");
}

#[test]
fn median_estimation_error_shrinks_with_sample_size() {
    let reps = 50;
    let small = estimate_error_distribution(&planted_cfg(3, 1_000, 1.0, 0.2, 404), reps).unwrap();
    let large = estimate_error_distribution(&planted_cfg(3, 16_000, 1.0, 0.2, 404), reps).unwrap();
    let median = |report: &speccert_core::harness::GapReport| {
        report
            .est_upper_quantiles
            .iter()
            .find(|(level, _)| *level == 0.5)
            .map(|(_, v)| *v)
            .unwrap()
    };
    assert!(
        median(&large) < median(&small),
        "median at n=16000 ({}) should fall below median at n=1000 ({})",
        median(&large),
        median(&small)
    );
}

#[test]
fn planted_rows_have_near_identity_covariance() {
    let n = 200_000;
    let p = 10;
    let cfg = planted_cfg(p, n, 0.5, 0.2, 909);
    let data = sample_dataset(&cfg, Hypothesis::Planted).unwrap();
    let (_, cov) = sample_moments(&data);
    let mut dist_sq = 0.0f64;
    for i in 0..p {
        for j in 0..p {
            let want = if i == j { 1.0 } else { 0.0 };
            dist_sq += (cov.get(i, j) - want).powi(2);
        }
    }
    let dist = dist_sq.sqrt();
    let budget = 5.0 * p as f64 / (n as f64).sqrt();
    assert!(dist <= budget, "Frobenius distance {dist} vs budget {budget}");
}
