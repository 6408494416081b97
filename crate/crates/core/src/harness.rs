//! Monte Carlo experiment drivers.
//!
//! Everything here is a deterministic function of a `PlantedConfig` and a rep
//! count: each rep derives its own seed from the config seed and the rep
//! index, so reports are byte-stable across runs and independent of any
//! execution order. The drivers measure the estimation-error distribution of
//! the plug-in cumulant, sweep detection thresholds, evaluate the
//! threshold-window and bound arithmetic that links estimation error to
//! detection power, sum the low-degree bound series, and fit scaling slopes.

use crate::cumulant::{khat, population_norm, population_planted_cumulant};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::planted::{in_regime, sample_dataset, Hypothesis, PlantedConfig};
use crate::specnorm::{lower_cert_power, upper_cert_unfold, PowerIterConfig};
use crate::stream::{derive_seed, substream};
use crate::symtensor::SymmetricTensor;

/// Quantile levels reported for the error sandwich.
pub const QUANTILE_LEVELS: [f64; 7] = [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95];

/// Quantile level feeding the detection bound.
pub const BOUND_QUANTILE: f64 = 0.9;

/// Nearest-rank quantile: the `ceil(level * N)`-th smallest value.
pub fn quantile_nearest_rank(sorted: &[f64], level: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::domain("quantile of an empty sample"));
    }
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::domain(format!(
            "quantile level must lie in (0,1], got {level}"
        )));
    }
    let rank = (level * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Which spectral-norm certificate serves as the test statistic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestStatistic {
    /// Restarted shifted power iteration (a lower certificate).
    LowerPower,
    /// Unfolding operator norm (an upper certificate).
    UpperUnfold,
}

fn certificate_stat(
    tensor: &SymmetricTensor,
    stat: TestStatistic,
    power_cfg: &PowerIterConfig,
    seed: u64,
) -> Result<f64> {
    match stat {
        TestStatistic::LowerPower => {
            let mut rng = substream(seed, "power", 0);
            Ok(lower_cert_power(tensor, power_cfg, &mut rng)?.value)
        }
        TestStatistic::UpperUnfold => Ok(upper_cert_unfold(tensor)?.value),
    }
}

/// One rep of the estimation-error experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapRow {
    pub rep: usize,
    pub err_lower: f64,
    pub err_upper: f64,
}

/// Distribution of the spectral-norm error sandwich of the plug-in cumulant.
#[derive(Clone, Debug, PartialEq)]
pub struct GapReport {
    pub config: PlantedConfig,
    pub reps: usize,
    pub rows: Vec<GapRow>,
    /// (level, value) pairs, ascending in level.
    pub est_lower_quantiles: Vec<(f64, f64)>,
    pub est_upper_quantiles: Vec<(f64, f64)>,
    /// Planted population spectral norm `|kappa_d(W)| (a/(1+a))^{d/2}`.
    pub d_det_proxy: f64,
    /// `d_det_proxy / (4 * upper-error quantile at` [`BOUND_QUANTILE`]`)`.
    pub bound: f64,
}

impl GapReport {
    /// The detection bound recomputed at a different error quantile.
    pub fn bound_at(&self, level: f64) -> Result<f64> {
        let mut uppers: Vec<f64> = self.rows.iter().map(|r| r.err_upper).collect();
        uppers.sort_by(f64::total_cmp);
        Ok(self.d_det_proxy / (4.0 * quantile_nearest_rank(&uppers, level)?))
    }
}

/// Measures the error `khat - population cumulant` in the certificate
/// sandwich over `reps` independent planted datasets.
pub fn estimate_error_distribution(cfg: &PlantedConfig, reps: usize) -> Result<GapReport> {
    cfg.validate()?;
    if reps == 0 {
        return Err(Error::domain("need at least one rep"));
    }
    let wcum = cfg.w.cumulant(cfg.d)?;
    let pop = population_planted_cumulant(cfg.a, &cfg.u, wcum, cfg.d)?;
    let power_cfg = PowerIterConfig::default();
    let mut rows = Vec::with_capacity(reps);
    for rep in 0..reps {
        let mut rep_cfg = cfg.clone();
        rep_cfg.seed = derive_seed(cfg.seed, "estgap-rep", rep as u64);
        let data = sample_dataset(&rep_cfg, Hypothesis::Planted)?;
        let err = SymmetricTensor::axpy(-1.0, &pop.tensor, &khat(&data, cfg.d)?.tensor)?;
        let mut rng = substream(rep_cfg.seed, "power", 0);
        let lower = lower_cert_power(&err, &power_cfg, &mut rng)?;
        let upper = upper_cert_unfold(&err)?;
        rows.push(GapRow {
            rep,
            err_lower: lower.value,
            err_upper: upper.value,
        });
    }
    let mut lowers: Vec<f64> = rows.iter().map(|r| r.err_lower).collect();
    let mut uppers: Vec<f64> = rows.iter().map(|r| r.err_upper).collect();
    lowers.sort_by(f64::total_cmp);
    uppers.sort_by(f64::total_cmp);
    let mut est_lower_quantiles = Vec::with_capacity(QUANTILE_LEVELS.len());
    let mut est_upper_quantiles = Vec::with_capacity(QUANTILE_LEVELS.len());
    for &level in &QUANTILE_LEVELS {
        est_lower_quantiles.push((level, quantile_nearest_rank(&lowers, level)?));
        est_upper_quantiles.push((level, quantile_nearest_rank(&uppers, level)?));
    }
    let d_det_proxy = population_norm(cfg.a, wcum, cfg.d);
    let bound = d_det_proxy / (4.0 * quantile_nearest_rank(&uppers, BOUND_QUANTILE)?);
    Ok(GapReport {
        config: cfg.clone(),
        reps,
        rows,
        est_lower_quantiles,
        est_upper_quantiles,
        d_det_proxy,
        bound,
    })
}

/// Type I / type II error curves over a threshold grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectionReport {
    pub tau_grid: Vec<f64>,
    pub type1: Vec<f64>,
    pub type2: Vec<f64>,
    /// Minimum of `type1 + type2` over the grid.
    pub best_sum: f64,
    /// Smallest threshold attaining `best_sum`.
    pub best_tau: f64,
    /// Per-rep statistics under the null, in rep order.
    pub stat0: Vec<f64>,
    /// Per-rep statistics under the planted alternative, in rep order.
    pub stat1: Vec<f64>,
}

fn auto_grid(stat0: &[f64], stat1: &[f64]) -> Vec<f64> {
    let pooled = stat0.iter().chain(stat1);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &s in pooled {
        lo = lo.min(s);
        hi = hi.max(s);
    }
    (0..=100)
        .map(|i| lo + (hi - lo) * i as f64 / 100.0)
        .collect()
}

/// Runs `reps` null and `reps` planted datasets through the chosen statistic
/// and sweeps the decision threshold.
///
/// `type1(tau)` is the fraction of null reps with statistic strictly above
/// `tau`; `type2(tau)` the fraction of planted reps at or below it. With no
/// explicit grid, 101 evenly spaced thresholds span the pooled observed
/// statistics.
pub fn detection_experiment(
    cfg: &PlantedConfig,
    stat: TestStatistic,
    tau_grid: Option<&[f64]>,
    reps: usize,
) -> Result<DetectionReport> {
    cfg.validate()?;
    if reps < 2 {
        return Err(Error::domain(format!("need at least 2 reps, got {reps}")));
    }
    if let Some(grid) = tau_grid {
        if grid.is_empty() {
            return Err(Error::domain("threshold grid must be nonempty"));
        }
        if grid.iter().any(|t| !t.is_finite()) {
            return Err(Error::non_finite("threshold grid"));
        }
    }
    let power_cfg = PowerIterConfig::default();
    let mut stat0 = Vec::with_capacity(reps);
    let mut stat1 = Vec::with_capacity(reps);
    for rep in 0..reps {
        let mut rep_cfg = cfg.clone();
        rep_cfg.seed = derive_seed(cfg.seed, "detect-null", rep as u64);
        let data = sample_dataset(&rep_cfg, Hypothesis::Null)?;
        let tensor = khat(&data, cfg.d)?.tensor;
        stat0.push(certificate_stat(&tensor, stat, &power_cfg, rep_cfg.seed)?);

        rep_cfg.seed = derive_seed(cfg.seed, "detect-alt", rep as u64);
        let data = sample_dataset(&rep_cfg, Hypothesis::Planted)?;
        let tensor = khat(&data, cfg.d)?.tensor;
        stat1.push(certificate_stat(&tensor, stat, &power_cfg, rep_cfg.seed)?);
    }
    let grid = match tau_grid {
        Some(g) => g.to_vec(),
        None => auto_grid(&stat0, &stat1),
    };
    let nf = reps as f64;
    let type1: Vec<f64> = grid
        .iter()
        .map(|&t| stat0.iter().filter(|&&s| s > t).count() as f64 / nf)
        .collect();
    let type2: Vec<f64> = grid
        .iter()
        .map(|&t| stat1.iter().filter(|&&s| s <= t).count() as f64 / nf)
        .collect();
    let (mut best_sum, mut best_tau) = (f64::INFINITY, f64::INFINITY);
    for ((&tau, &e1), &e2) in grid.iter().zip(&type1).zip(&type2) {
        let sum = e1 + e2;
        if sum < best_sum || (sum == best_sum && tau < best_tau) {
            best_sum = sum;
            best_tau = tau;
        }
    }
    Ok(DetectionReport {
        tau_grid: grid,
        type1,
        type2,
        best_sum,
        best_tau,
        stat0,
        stat1,
    })
}

/// The open threshold interval `(2 zeta d_est, d_det / (2 rho))`, nonempty
/// exactly when `2 d_est rho zeta < d_det / 2`.
pub fn separation_window(
    rho: f64,
    zeta: f64,
    d_est: f64,
    d_det: f64,
) -> Result<Option<(f64, f64)>> {
    for (name, v) in [("rho", rho), ("zeta", zeta)] {
        if !v.is_finite() || v < 1.0 {
            return Err(Error::domain(format!("{name} must be at least 1, got {v}")));
        }
    }
    for (name, v) in [("d_est", d_est), ("d_det", d_det)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::domain(format!(
                "{name} must be finite and nonnegative, got {v}"
            )));
        }
    }
    if 2.0 * d_est * rho * zeta < d_det / 2.0 {
        Ok(Some((2.0 * zeta * d_est, d_det / (2.0 * rho))))
    } else {
        Ok(None)
    }
}

/// The detection-to-estimation quotient `d_det / (4 d_est)`.
pub fn framework_bound(d_det: f64, d_est: f64) -> Result<f64> {
    if !d_est.is_finite() || d_est <= 0.0 {
        return Err(Error::domain(format!(
            "d_est must be positive, got {d_est}"
        )));
    }
    if !d_det.is_finite() || d_det < 0.0 {
        return Err(Error::domain(format!(
            "d_det must be finite and nonnegative, got {d_det}"
        )));
    }
    Ok(d_det / (4.0 * d_est))
}

/// Parameters of the low-degree bound series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowDegreeBoundParams {
    pub a: f64,
    pub n: f64,
    pub p: f64,
    pub d: f64,
    /// Exposed order constant; defaults to 1 in the CLI.
    pub c_d: f64,
    pub c0: f64,
    /// Degree cap M.
    pub m_cap: usize,
}

impl LowDegreeBoundParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a", self.a),
            ("n", self.n),
            ("p", self.p),
            ("d", self.d),
            ("c_d", self.c_d),
            ("c0", self.c0),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// The per-term ratio `r(m) = (a/(1+a)) c_d m^4 n^{1/d} / sqrt(p)`.
    pub fn term_ratio(&self, m: usize) -> f64 {
        self.a / (1.0 + self.a) * self.c_d * (m as f64).powi(4) * self.n.powf(1.0 / self.d)
            / self.p.sqrt()
    }
}

/// The series value plus regime diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowDegreeBound {
    pub value: f64,
    /// Largest per-term ratio encountered, `r(m_cap)` when the cap is positive.
    pub max_term_ratio: f64,
    /// First `m` whose term overflowed, if any; `value` is then infinite.
    pub overflow_at: Option<usize>,
}

/// Sums `sum_{m=0}^{M} r(m)^m` with the `m = 0` term equal to 1.
pub fn lowdeg_bound_sum(params: &LowDegreeBoundParams) -> Result<LowDegreeBound> {
    params.validate()?;
    let mut value = 1.0;
    let mut max_term_ratio = 0.0f64;
    for m in 1..=params.m_cap {
        let r = params.term_ratio(m);
        max_term_ratio = max_term_ratio.max(r);
        let term = r.powi(m as i32);
        value += term;
        if !value.is_finite() {
            return Ok(LowDegreeBound {
                value: f64::INFINITY,
                max_term_ratio,
                overflow_at: Some(m),
            });
        }
    }
    Ok(LowDegreeBound {
        value,
        max_term_ratio,
        overflow_at: None,
    })
}

/// One rep of the scaling sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    pub rep: usize,
    pub err_upper: f64,
}

/// Median upper-certificate error against sample count, with a log-log fit.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingReport {
    pub n_values: Vec<usize>,
    pub medians: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// States how many grid points fall inside the `p^{d/2} < n < p^{d-1}`
    /// window; outside it the error follows the central-limit rate.
    pub regime_note: String,
    pub rows: Vec<ScalingRow>,
}

/// Least squares on `(ln x, ln y)`; returns `(slope, intercept)`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::domain(format!(
            "fit needs matching lengths, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::domain("fit needs at least 2 points"));
    }
    for &v in xs.iter().chain(ys) {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::domain(format!(
                "log-log fit needs positive finite data, got {v}"
            )));
        }
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let dx: Vec<f64> = lx.iter().map(|v| v - mx).collect();
    let dy: Vec<f64> = ly.iter().map(|v| v - my).collect();
    let sxx = dot(&dx, &dx);
    if sxx == 0.0 {
        return Err(Error::domain("fit needs at least two distinct x values"));
    }
    let slope = dot(&dx, &dy) / sxx;
    Ok((slope, my - slope * mx))
}

/// Repeats the estimation-error measurement across a grid of sample counts
/// and fits the decay exponent of the median upper-certificate error.
pub fn scaling_sweep(
    cfg_base: &PlantedConfig,
    n_grid: &[usize],
    reps: usize,
) -> Result<ScalingReport> {
    cfg_base.validate()?;
    if n_grid.len() < 3 {
        return Err(Error::domain(format!(
            "scaling grid needs at least 3 points, got {}",
            n_grid.len()
        )));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("scaling grid must be strictly increasing"));
    }
    if n_grid[0] < 2 {
        return Err(Error::domain("scaling grid entries must be at least 2"));
    }
    if reps == 0 {
        return Err(Error::domain("need at least one rep"));
    }
    let wcum = cfg_base.w.cumulant(cfg_base.d)?;
    let pop = population_planted_cumulant(cfg_base.a, &cfg_base.u, wcum, cfg_base.d)?;
    let mut rows = Vec::with_capacity(n_grid.len() * reps);
    let mut medians = Vec::with_capacity(n_grid.len());
    for (gi, &n) in n_grid.iter().enumerate() {
        let grid_seed = derive_seed(cfg_base.seed, "scaling-n", gi as u64);
        let mut errs = Vec::with_capacity(reps);
        for rep in 0..reps {
            let mut cfg = cfg_base.clone();
            cfg.n = n;
            cfg.seed = derive_seed(grid_seed, "rep", rep as u64);
            let data = sample_dataset(&cfg, Hypothesis::Planted)?;
            let err_t = SymmetricTensor::axpy(-1.0, &pop.tensor, &khat(&data, cfg.d)?.tensor)?;
            let err = upper_cert_unfold(&err_t)?.value;
            rows.push(ScalingRow {
                n,
                rep,
                err_upper: err,
            });
            errs.push(err);
        }
        errs.sort_by(f64::total_cmp);
        medians.push(quantile_nearest_rank(&errs, 0.5)?);
    }
    let ns: Vec<f64> = n_grid.iter().map(|&n| n as f64).collect();
    let (slope, intercept) = fit_loglog(&ns, &medians)?;
    let inside = n_grid
        .iter()
        .filter(|&&n| in_regime(cfg_base.p, n, cfg_base.d))
        .count();
    let regime_note = format!(
        "{inside} of {} grid points lie strictly inside p^(d/2) < n < p^(d-1) \
         for p={}, d={}; outside that window the plug-in error decays at the \
         central-limit rate n^(-1/2)",
        n_grid.len(),
        cfg_base.p,
        cfg_base.d,
    );
    Ok(ScalingReport {
        n_values: n_grid.to_vec(),
        medians,
        slope,
        intercept,
        regime_note,
        rows,
    })
}
