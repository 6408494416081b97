//! The planted-spike observation model.
//!
//! Under the null hypothesis each observation is standard Gaussian noise.
//! Under the planted alternative a rank-one spike `sqrt(a/p) * W_i * U` with
//! a standardized two-point coefficient `W_i` is added and the result is
//! whitened, so both hypotheses share the identity covariance and differ only
//! in cumulants of order 3 and up. Sampling is fully deterministic given the
//! config seed: observation `i` draws its spike coefficient first (planted
//! runs only), then its `p` noise coordinates in row order, each from its own
//! derived substream, so null data never touches the spike stream.

use rand::RngCore;

use crate::cumulant::{check_spike, SampleSet};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::stream::{substream, unit_open, GaussianSource};

/// A mean-zero, unit-variance distribution supported on two points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoPointDist {
    lo: f64,
    hi: f64,
    p_hi: f64,
}

impl TwoPointDist {
    /// Validates the mean-zero / unit-variance contract to 1e-12.
    pub fn new(lo: f64, hi: f64, p_hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && p_hi.is_finite()) {
            return Err(Error::non_finite("two-point distribution parameters"));
        }
        if !(0.0 < p_hi && p_hi < 1.0) {
            return Err(Error::domain(format!(
                "p_hi must lie strictly in (0,1), got {p_hi}"
            )));
        }
        let mean = p_hi * hi + (1.0 - p_hi) * lo;
        let var = p_hi * hi * hi + (1.0 - p_hi) * lo * lo;
        if mean.abs() > 1e-12 {
            return Err(Error::domain(format!("two-point mean is {mean}, not 0")));
        }
        if (var - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("two-point variance is {var}, not 1")));
        }
        Ok(TwoPointDist { lo, hi, p_hi })
    }

    /// The centered, standardized Bernoulli(q): `hi = (1-q)/sqrt(q(1-q))`
    /// with probability q, `lo = -q/sqrt(q(1-q))` otherwise.
    pub fn from_bernoulli(q: f64) -> Result<Self> {
        if !q.is_finite() || !(0.0 < q && q < 1.0) {
            return Err(Error::domain(format!(
                "Bernoulli parameter must lie strictly in (0,1), got {q}"
            )));
        }
        let sd = (q * (1.0 - q)).sqrt();
        TwoPointDist::new(-q / sd, (1.0 - q) / sd, q)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn p_hi(&self) -> f64 {
        self.p_hi
    }

    /// Raw moment `E W^k`.
    pub fn moment(&self, k: usize) -> f64 {
        self.p_hi * self.hi.powi(k as i32) + (1.0 - self.p_hi) * self.lo.powi(k as i32)
    }

    /// The k-th cumulant for `1 <= k <= 6`, via the moment-to-cumulant
    /// recursion `kappa_n = m_n - sum_{j<n} C(n-1, j-1) kappa_j m_{n-j}`.
    pub fn cumulant(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::domain("cumulant order must be at least 1"));
        }
        if k > 6 {
            return Err(Error::unsupported(format!(
                "cumulants implemented up to order 6, got {k}"
            )));
        }
        let m: Vec<f64> = (0..=k).map(|j| self.moment(j)).collect();
        let mut kappa = vec![0.0; k + 1];
        for n in 1..=k {
            let mut acc = m[n];
            for j in 1..n {
                acc -= choose(n - 1, j - 1) * kappa[j] * m[n - j];
            }
            kappa[n] = acc;
        }
        Ok(kappa[k])
    }

    /// Draws one value, consuming exactly one uniform variate.
    pub fn sample<R: RngCore>(&self, rng: &mut R) -> f64 {
        if unit_open(rng) < self.p_hi {
            self.hi
        } else {
            self.lo
        }
    }
}

fn choose(n: usize, k: usize) -> f64 {
    let mut acc = 1.0;
    for i in 0..k.min(n - k) {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Which data-generating process to sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hypothesis {
    /// Pure standard Gaussian noise (H0).
    Null,
    /// Whitened spiked observations (H1).
    Planted,
}

/// Everything needed to draw one planted-model dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedConfig {
    pub p: usize,
    pub n: usize,
    /// Spike strength; 0 makes both hypotheses identical.
    pub a: f64,
    /// Cumulant order under study (3 or 4).
    pub d: usize,
    /// Spike direction with `||u||_2 = sqrt(p)`.
    pub u: Vec<f64>,
    pub w: TwoPointDist,
    pub seed: u64,
}

impl PlantedConfig {
    pub fn new(
        p: usize,
        n: usize,
        a: f64,
        d: usize,
        u: Vec<f64>,
        w: TwoPointDist,
        seed: u64,
    ) -> Result<Self> {
        let cfg = PlantedConfig { p, n, a, d, u, w, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Convenience constructor with the all-ones spike (norm exactly sqrt(p)).
    pub fn with_ones_spike(
        p: usize,
        n: usize,
        a: f64,
        d: usize,
        w: TwoPointDist,
        seed: u64,
    ) -> Result<Self> {
        PlantedConfig::new(p, n, a, d, vec![1.0; p], w, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::domain(format!(
                "need at least 2 observations, got {}",
                self.n
            )));
        }
        if self.d != 3 && self.d != 4 {
            return Err(Error::domain(format!(
                "cumulant order must be 3 or 4, got {}",
                self.d
            )));
        }
        if !self.a.is_finite() || self.a < 0.0 {
            return Err(Error::domain(format!(
                "spike strength must be finite and nonnegative, got {}",
                self.a
            )));
        }
        if self.u.len() != self.p {
            return Err(Error::domain(format!(
                "spike vector has length {}, expected p = {}",
                self.u.len(),
                self.p
            )));
        }
        check_spike(&self.u)
    }

    /// The whitened spike direction `S u = u / sqrt(1+a)`.
    pub fn whitened_spike(&self) -> Vec<f64> {
        let shrink = 1.0 / (1.0 + self.a).sqrt();
        self.u.iter().map(|v| v * shrink).collect()
    }
}

/// Draws a dataset under the given hypothesis.
///
/// Planted rows are `S(sqrt(a/p) W_i U + Z_i)` expanded in closed form, so no
/// matrix is materialized: `S Z = Z - beta (<U,Z>/p) U` with
/// `beta = a/(1+a+sqrt(1+a))` and `S U = U/sqrt(1+a)`. With `a = 0` the
/// planted rows reduce to the same values as the null rows under the same
/// seed, since both hypotheses read noise from identical substreams.
pub fn sample_dataset(cfg: &PlantedConfig, hypothesis: Hypothesis) -> Result<SampleSet> {
    cfg.validate()?;
    let p = cfg.p;
    let pf = p as f64;
    let beta = cfg.a / (1.0 + cfg.a + (1.0 + cfg.a).sqrt());
    let spike_scale = (cfg.a / pf).sqrt() / (1.0 + cfg.a).sqrt();
    let mut data = Vec::with_capacity(cfg.n * p);
    let mut z = vec![0.0; p];
    for i in 0..cfg.n {
        let w_i = match hypothesis {
            Hypothesis::Planted => {
                let mut spike_rng = substream(cfg.seed, "spike", i as u64);
                cfg.w.sample(&mut spike_rng)
            }
            Hypothesis::Null => 0.0,
        };
        let mut noise = GaussianSource::new(substream(cfg.seed, "noise", i as u64));
        for zi in &mut z {
            *zi = noise.next_normal();
        }
        match hypothesis {
            Hypothesis::Null => data.extend_from_slice(&z),
            Hypothesis::Planted => {
                let shrink = beta * dot(&cfg.u, &z) / pf;
                data.extend(
                    cfg.u
                        .iter()
                        .zip(&z)
                        .map(|(ui, zi)| spike_scale * w_i * ui + zi - shrink * ui),
                );
            }
        }
    }
    SampleSet::new(cfg.n, p, data)
}

/// Spike strength and sample count from the scaling recipe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegimeParams {
    pub a: f64,
    pub n: usize,
    /// True when `p^{d/2} < n < p^{d-1}` holds strictly.
    pub regime_ok: bool,
}

/// Exact integer check of `p^{d/2} < n < p^{d-1}`, squared to avoid roots.
pub fn in_regime(p: usize, n: usize, d: usize) -> bool {
    let (p, n) = (p as u128, n as u128);
    let lhs = match (p.checked_pow(d as u32), n.checked_mul(n)) {
        (Some(pd), Some(n2)) => pd < n2,
        (Some(_), None) => true,
        (None, _) => false,
    };
    let rhs = match p.checked_pow(d as u32 - 1) {
        Some(pd1) => n < pd1,
        None => true,
    };
    lhs && rhs
}

/// Builds `a = sqrt(p) / (n^{1/d} (ln p)^{c0})` and, when `n` is omitted,
/// `n = floor(p^{d-1} / 2)`. The logarithm is the natural one. `regime_ok`
/// flags whether the returned pair lies strictly inside `p^{d/2} < n <
/// p^{d-1}`; at desk scale the default `n` always sits on the boundary.
pub fn regime_params(p: usize, n: Option<usize>, d: usize, c0: f64) -> Result<RegimeParams> {
    if p < 2 {
        return Err(Error::domain(format!("dimension must be at least 2, got {p}")));
    }
    if d < 2 {
        return Err(Error::domain(format!("order must be at least 2, got {d}")));
    }
    if !c0.is_finite() || c0 <= 8.0 {
        return Err(Error::domain(format!("c0 must exceed 8, got {c0}")));
    }
    let n = match n {
        Some(n) if n >= 2 => n,
        Some(n) => {
            return Err(Error::domain(format!(
                "need at least 2 observations, got {n}"
            )))
        }
        None => {
            let pd1 = (p as u128).checked_pow(d as u32 - 1).ok_or_else(|| {
                Error::unsupported(format!("p^(d-1) overflows for p={p}, d={d}"))
            })?;
            usize::try_from(pd1 / 2).map_err(|_| {
                Error::unsupported(format!("default n = p^(d-1)/2 overflows for p={p}, d={d}"))
            })?
        }
    };
    let pf = p as f64;
    let a = pf.sqrt() / ((n as f64).powf(1.0 / d as f64) * pf.ln().powf(c0));
    Ok(RegimeParams {
        a,
        n,
        regime_ok: in_regime(p, n, d),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_hand_cases() {
        let r = TwoPointDist::from_bernoulli(0.5).unwrap();
        assert!((r.hi() - 1.0).abs() < 1e-12);
        assert!((r.lo() + 1.0).abs() < 1e-12);
        assert_eq!(r.p_hi(), 0.5);

        let w = TwoPointDist::from_bernoulli(0.2).unwrap();
        assert!((w.hi() - 2.0).abs() < 1e-12);
        assert!((w.lo() + 0.5).abs() < 1e-12);

        assert!(TwoPointDist::from_bernoulli(0.9).is_ok());
        assert!(TwoPointDist::from_bernoulli(0.0).is_err());
        assert!(TwoPointDist::from_bernoulli(1.0).is_err());
    }

    #[test]
    fn bernoulli_grid_is_standardized() {
        for i in 1..100 {
            let q = i as f64 / 100.0;
            let w = TwoPointDist::from_bernoulli(q).unwrap();
            let mean = w.p_hi() * w.hi() + (1.0 - w.p_hi()) * w.lo();
            let var = w.moment(2);
            assert!(mean.abs() <= 1e-12, "q={q}: mean {mean}");
            assert!((var - 1.0).abs() <= 1e-12, "q={q}: var {var}");
        }
    }

    #[test]
    fn new_rejects_unstandardized_points() {
        assert!(TwoPointDist::new(-1.0, 1.0, 0.3).is_err());
        assert!(TwoPointDist::new(-0.5, 2.0, 0.5).is_err());
        assert!(TwoPointDist::new(-1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn cumulants_match_central_moment_formulas() {
        let r = TwoPointDist::from_bernoulli(0.5).unwrap();
        assert!((r.cumulant(1).unwrap()).abs() < 1e-12);
        assert!((r.cumulant(2).unwrap() - 1.0).abs() < 1e-12);
        assert!((r.cumulant(3).unwrap()).abs() < 1e-12);
        assert!((r.cumulant(4).unwrap() + 2.0).abs() < 1e-12);

        // q = 0.2: kappa_3 = 3/2, kappa_4 = 1/4, kappa_5 = -69/8,
        // kappa_6 = -455/16, from the mean-zero central-moment identities
        // k5 = m5 - 10 m3 m2 and k6 = m6 - 15 m4 m2 - 10 m3^2 + 30 m2^3.
        let w = TwoPointDist::from_bernoulli(0.2).unwrap();
        let q: f64 = 0.2;
        let skew = (1.0 - 2.0 * q) / (q * (1.0 - q)).sqrt();
        assert!((w.cumulant(3).unwrap() - 1.5).abs() < 1e-12);
        assert!((w.cumulant(3).unwrap() - skew).abs() < 1e-12);
        assert!((w.cumulant(4).unwrap() - 0.25).abs() < 1e-12);
        assert!((w.cumulant(5).unwrap() + 69.0 / 8.0).abs() < 1e-12);
        assert!((w.cumulant(6).unwrap() + 455.0 / 16.0).abs() < 1e-12);

        assert!(w.cumulant(0).is_err());
        assert!(w.cumulant(7).is_err());
    }

    #[test]
    fn sampled_moments_match_in_five_standard_errors() {
        let w = TwoPointDist::from_bernoulli(0.2).unwrap();
        let n = 1_000_000usize;
        let mut rng = crate::stream::substream(99, "twopoint-moments", 0);
        let (mut s3, mut s4) = (0.0f64, 0.0f64);
        for _ in 0..n {
            let v = w.sample(&mut rng);
            s3 += v.powi(3);
            s4 += v.powi(4);
        }
        let (m3, m4) = (s3 / n as f64, s4 / n as f64);
        for (sample, k) in [(m3, 3usize), (m4, 4usize)] {
            let want = w.moment(k);
            let var = w.moment(2 * k) - want * want;
            let se = (var / n as f64).sqrt();
            assert!(
                (sample - want).abs() <= 5.0 * se,
                "moment {k}: {sample} vs {want} (se {se})"
            );
        }
    }

    #[test]
    fn config_validation() {
        let w = TwoPointDist::from_bernoulli(0.2).unwrap();
        assert!(PlantedConfig::with_ones_spike(3, 100, 1.0, 3, w, 1).is_ok());
        assert!(PlantedConfig::with_ones_spike(3, 1, 1.0, 3, w, 1).is_err());
        assert!(PlantedConfig::with_ones_spike(3, 100, -1.0, 3, w, 1).is_err());
        assert!(PlantedConfig::with_ones_spike(3, 100, 1.0, 5, w, 1).is_err());
        assert!(PlantedConfig::new(3, 100, 1.0, 3, vec![1.0, 1.0], w, 1).is_err());
        assert!(PlantedConfig::new(2, 100, 1.0, 3, vec![2.0, 1.0], w, 1).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let w = TwoPointDist::from_bernoulli(0.2).unwrap();
        let cfg = PlantedConfig::with_ones_spike(4, 50, 1.0, 3, w, 12345).unwrap();
        for hyp in [Hypothesis::Null, Hypothesis::Planted] {
            let x = sample_dataset(&cfg, hyp).unwrap();
            let y = sample_dataset(&cfg, hyp).unwrap();
            assert_eq!(x, y);
        }
    }

    #[test]
    fn zero_spike_strength_collapses_the_hypotheses() {
        let w = TwoPointDist::from_bernoulli(0.2).unwrap();
        let cfg = PlantedConfig::with_ones_spike(5, 40, 0.0, 3, w, 777).unwrap();
        let h0 = sample_dataset(&cfg, Hypothesis::Null).unwrap();
        let h1 = sample_dataset(&cfg, Hypothesis::Planted).unwrap();
        assert_eq!(h0, h1);
    }

    #[test]
    fn null_data_ignores_the_spike_distribution() {
        let cfg_a = PlantedConfig::with_ones_spike(
            4,
            30,
            1.0,
            3,
            TwoPointDist::from_bernoulli(0.2).unwrap(),
            2024,
        )
        .unwrap();
        let mut cfg_b = cfg_a.clone();
        cfg_b.w = TwoPointDist::from_bernoulli(0.7).unwrap();
        let h0_a = sample_dataset(&cfg_a, Hypothesis::Null).unwrap();
        let h0_b = sample_dataset(&cfg_b, Hypothesis::Null).unwrap();
        assert_eq!(h0_a, h0_b);

        let h1_a = sample_dataset(&cfg_a, Hypothesis::Planted).unwrap();
        let h1_b = sample_dataset(&cfg_b, Hypothesis::Planted).unwrap();
        assert_ne!(h1_a, h1_b);
    }

    #[test]
    fn regime_recipe_examples() {
        let r = regime_params(16, Some(64), 3, 9.0).unwrap();
        assert!((r.a - 1.03283495734132503e-4).abs() < 1e-14 * r.a.abs().max(1.0));
        assert_eq!(r.n, 64);
        assert!(!r.regime_ok);

        let r = regime_params(4, None, 3, 9.0).unwrap();
        assert_eq!(r.n, 8);
        // p^{d/2} = 8 equals n, so the strict regime check fails.
        assert!(!r.regime_ok);

        let r = regime_params(9, Some(40), 3, 8.5).unwrap();
        assert!(r.regime_ok);

        assert!(regime_params(4, None, 3, 8.0).is_err());
        assert!(regime_params(1, None, 3, 9.0).is_err());
        assert!(regime_params(4, Some(1), 3, 9.0).is_err());
    }

    #[test]
    fn regime_window_integer_check() {
        assert!(!in_regime(4, 8, 3));
        assert!(in_regime(4, 9, 3));
        assert!(in_regime(4, 15, 3));
        assert!(!in_regime(4, 16, 3));
        assert!(in_regime(10, 40, 3));
    }
}
