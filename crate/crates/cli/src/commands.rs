//! The seven subcommands: config validation, orchestration, output files.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use speccert_core::cumulant::{khat, SampleSet};
use speccert_core::harness::{
    detection_experiment, estimate_error_distribution, lowdeg_bound_sum, scaling_sweep,
    LowDegreeBoundParams, TestStatistic,
};
use speccert_core::planted::{Hypothesis, PlantedConfig, TwoPointDist};
use speccert_core::specnorm::{lower_cert_power, oracle_net, upper_cert_unfold, PowerIterConfig};
use speccert_core::stream::substream;
use speccert_core::symtensor::SymmetricTensor;

use crate::config::Config;
use crate::emit::{g17, write_manifest, write_raw, write_summary, write_text};
use crate::{usage, CliError};

pub fn run(command: &str, cfg: &Config) -> Result<(), CliError> {
    match command {
        "norm" => cmd_norm(cfg),
        "gen" => cmd_gen(cfg),
        "cumulant" => cmd_cumulant(cfg),
        "detect" => cmd_detect(cfg),
        "estgap" => cmd_estgap(cfg),
        "scaling" => cmd_scaling(cfg),
        "lowdeg" => cmd_lowdeg(cfg),
        other => Err(usage(format!(
            "unknown command `{other}`; expected one of norm, gen, cumulant, detect, estgap, scaling, lowdeg"
        ))),
    }
}

/// Attaches the file path to bare I/O errors from core readers/writers.
fn with_path(err: speccert_core::Error, path: &PathBuf) -> CliError {
    match err {
        speccert_core::Error::Io(source) => CliError::Io {
            path: path.clone(),
            source,
        },
        other => CliError::Run(other),
    }
}

fn ensure_out_dir(cfg: &Config) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(cfg.require("out_dir")?);
    fs::create_dir_all(&dir).map_err(|source| CliError::Io {
        path: dir.clone(),
        source,
    })?;
    Ok(dir)
}

fn key_p(cfg: &Config) -> Result<usize, CliError> {
    let p = cfg.require_usize("p")?;
    if p == 0 {
        return Err(usage("config key `p`: must be at least 1"));
    }
    Ok(p)
}

fn key_n(cfg: &Config) -> Result<usize, CliError> {
    let n = cfg.require_usize("n")?;
    if n < 2 {
        return Err(usage(format!(
            "config key `n`: need at least 2 observations, got {n}"
        )));
    }
    Ok(n)
}

fn key_a(cfg: &Config, required: bool) -> Result<f64, CliError> {
    let a = match (required, cfg.get_f64("a")?) {
        (true, _) => cfg.require_f64("a")?,
        (false, given) => given.unwrap_or(0.0),
    };
    if !a.is_finite() || a < 0.0 {
        return Err(usage(format!(
            "config key `a`: must be finite and nonnegative, got {a}"
        )));
    }
    Ok(a)
}

fn key_w(cfg: &Config, required: bool) -> Result<(f64, TwoPointDist), CliError> {
    let q = match (required, cfg.get_f64("q")?) {
        (true, _) => cfg.require_f64("q")?,
        (false, given) => given.unwrap_or(0.5),
    };
    let w = TwoPointDist::from_bernoulli(q).map_err(|e| usage(format!("config key `q`: {e}")))?;
    Ok((q, w))
}

fn key_seed(cfg: &Config) -> Result<u64, CliError> {
    Ok(cfg.get_u64("seed")?.unwrap_or(0))
}

/// Model keys shared by `detect`, `estgap`, and `scaling`: all of p, a, d, q
/// are required, and d must be a supported cumulant order.
fn experiment_model(
    cfg: &Config,
    n: usize,
) -> Result<(PlantedConfig, BTreeMap<String, String>), CliError> {
    let p = key_p(cfg)?;
    let a = key_a(cfg, true)?;
    let d = cfg.require_usize("d")?;
    if d != 3 && d != 4 {
        return Err(usage(format!(
            "config key `d`: only cumulant orders 3 and 4 are supported, got {d}"
        )));
    }
    let (q, w) = key_w(cfg, true)?;
    let seed = key_seed(cfg)?;
    let model = PlantedConfig::with_ones_spike(p, n, a, d, w, seed)
        .map_err(|e| usage(format!("invalid model config: {e}")))?;
    let mut resolved = BTreeMap::new();
    resolved.insert("p".to_string(), p.to_string());
    resolved.insert("a".to_string(), g17(a));
    resolved.insert("d".to_string(), d.to_string());
    resolved.insert("q".to_string(), g17(q));
    resolved.insert("seed".to_string(), seed.to_string());
    Ok((model, resolved))
}

const NORM_KEYS: &[&str] = &[
    "input", "out_dir", "seed", "starts", "max_iters", "tol", "shift", "oracle_eps",
];

fn cmd_norm(cfg: &Config) -> Result<(), CliError> {
    cfg.check_keys("norm", NORM_KEYS)?;
    let input = PathBuf::from(cfg.require("input")?);
    let dir = ensure_out_dir(cfg)?;
    let seed = key_seed(cfg)?;
    let tensor = SymmetricTensor::read_from(&input).map_err(|e| with_path(e, &input))?;
    let defaults = PowerIterConfig::default();
    let power = PowerIterConfig {
        starts: cfg.get_usize("starts")?,
        max_iters: cfg.get_usize("max_iters")?.unwrap_or(defaults.max_iters),
        tol: cfg.get_f64("tol")?.unwrap_or(defaults.tol),
        shift: cfg.get_f64("shift")?,
    };
    let mut rng = substream(seed, "norm-power", 0);
    let lower = lower_cert_power(&tensor, &power, &mut rng)?;
    let upper = upper_cert_unfold(&tensor)?;

    let mut summary = vec![
        ("lower".to_string(), g17(lower.value)),
        ("upper".to_string(), g17(upper.value)),
    ];
    println!("lower = {}", g17(lower.value));
    println!("upper = {}", g17(upper.value));

    let mut resolved = BTreeMap::new();
    resolved.insert("input".to_string(), input.display().to_string());
    resolved.insert("out_dir".to_string(), dir.display().to_string());
    resolved.insert("seed".to_string(), seed.to_string());
    resolved.insert("max_iters".to_string(), power.max_iters.to_string());
    resolved.insert("tol".to_string(), g17(power.tol));
    if let Some(starts) = power.starts {
        resolved.insert("starts".to_string(), starts.to_string());
    }
    if let Some(shift) = power.shift {
        resolved.insert("shift".to_string(), g17(shift));
    }
    if let Some(eps) = cfg.get_f64("oracle_eps")? {
        let oracle = oracle_net(&tensor, eps)?;
        println!("oracle = {}", g17(oracle.value));
        println!("oracle_error_bound = {}", g17(oracle.error_bound));
        summary.push(("oracle".to_string(), g17(oracle.value)));
        summary.push(("oracle_error_bound".to_string(), g17(oracle.error_bound)));
        resolved.insert("oracle_eps".to_string(), g17(eps));
    }
    write_summary(&dir, &summary)?;
    write_manifest(&dir, "norm", &resolved)?;
    Ok(())
}

const GEN_KEYS: &[&str] = &["hypothesis", "p", "n", "a", "d", "q", "seed", "out_dir"];

fn cmd_gen(cfg: &Config) -> Result<(), CliError> {
    cfg.check_keys("gen", GEN_KEYS)?;
    let dir = ensure_out_dir(cfg)?;
    let hypothesis = match cfg.require("hypothesis")? {
        "null" => Hypothesis::Null,
        "planted" => Hypothesis::Planted,
        other => {
            return Err(usage(format!(
                "config key `hypothesis`: expected `null` or `planted`, got `{other}`"
            )))
        }
    };
    let planted = hypothesis == Hypothesis::Planted;
    let p = key_p(cfg)?;
    let n = key_n(cfg)?;
    let a = key_a(cfg, planted)?;
    let d = cfg.get_usize("d")?.unwrap_or(3);
    if d < 2 {
        return Err(usage(format!("config key `d`: must be at least 2, got {d}")));
    }
    let (q, w) = key_w(cfg, planted)?;
    let seed = key_seed(cfg)?;
    let model = PlantedConfig::with_ones_spike(p, n, a, d, w, seed)
        .map_err(|e| usage(format!("invalid model config: {e}")))?;
    let set = speccert_core::planted::sample_dataset(&model, hypothesis)?;
    let path = dir.join("samples.csv");
    set.write_csv(&path).map_err(|e| with_path(e, &path))?;
    println!("wrote {} ({n} rows, {p} columns)", path.display());

    let mut resolved = BTreeMap::new();
    resolved.insert(
        "hypothesis".to_string(),
        if planted { "planted" } else { "null" }.to_string(),
    );
    resolved.insert("p".to_string(), p.to_string());
    resolved.insert("n".to_string(), n.to_string());
    resolved.insert("a".to_string(), g17(a));
    resolved.insert("d".to_string(), d.to_string());
    resolved.insert("q".to_string(), g17(q));
    resolved.insert("seed".to_string(), seed.to_string());
    resolved.insert("out_dir".to_string(), dir.display().to_string());
    write_manifest(&dir, "gen", &resolved)?;
    Ok(())
}

const CUMULANT_KEYS: &[&str] = &["input", "order", "out_dir", "seed"];

fn cmd_cumulant(cfg: &Config) -> Result<(), CliError> {
    cfg.check_keys("cumulant", CUMULANT_KEYS)?;
    let input = PathBuf::from(cfg.require("input")?);
    let order = cfg.require_usize("order")?;
    if order != 3 && order != 4 {
        return Err(usage(format!(
            "config key `order`: only orders 3 and 4 are supported, got {order}"
        )));
    }
    let dir = ensure_out_dir(cfg)?;
    let set = SampleSet::read_csv(&input).map_err(|e| with_path(e, &input))?;
    let est = khat(&set, order)?;
    let path = dir.join("cumulant.symtensor");
    est.tensor.write_to(&path).map_err(|e| with_path(e, &path))?;
    println!(
        "wrote {} (frobenius = {})",
        path.display(),
        g17(est.tensor.frobenius())
    );

    let mut resolved = BTreeMap::new();
    resolved.insert("input".to_string(), input.display().to_string());
    resolved.insert("order".to_string(), order.to_string());
    resolved.insert("out_dir".to_string(), dir.display().to_string());
    write_manifest(&dir, "cumulant", &resolved)?;
    Ok(())
}

fn parse_stat(cfg: &Config) -> Result<(&'static str, TestStatistic), CliError> {
    match cfg.get("stat").unwrap_or("upper_unfold") {
        "lower_power" => Ok(("lower_power", TestStatistic::LowerPower)),
        "upper_unfold" => Ok(("upper_unfold", TestStatistic::UpperUnfold)),
        other => Err(usage(format!(
            "config key `stat`: expected `lower_power` or `upper_unfold`, got `{other}`"
        ))),
    }
}

fn tau_grid_from(
    cfg: &Config,
    resolved: &mut BTreeMap<String, String>,
) -> Result<Option<Vec<f64>>, CliError> {
    match (
        cfg.get_f64("tau_min")?,
        cfg.get_f64("tau_max")?,
        cfg.get_usize("tau_count")?,
    ) {
        (None, None, None) => Ok(None),
        (Some(lo), Some(hi), Some(count)) => {
            if count == 0 {
                return Err(usage("config key `tau_count`: must be at least 1"));
            }
            if !(hi >= lo) {
                return Err(usage(format!(
                    "config key `tau_max`: must be at least tau_min, got {hi} < {lo}"
                )));
            }
            resolved.insert("tau_min".to_string(), g17(lo));
            resolved.insert("tau_max".to_string(), g17(hi));
            resolved.insert("tau_count".to_string(), count.to_string());
            let grid = if count == 1 {
                vec![lo]
            } else {
                (0..count)
                    .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
                    .collect()
            };
            Ok(Some(grid))
        }
        _ => Err(usage(
            "config keys `tau_min`, `tau_max`, `tau_count` must be given together",
        )),
    }
}

const DETECT_KEYS: &[&str] = &[
    "p", "n", "a", "d", "q", "seed", "reps", "stat", "tau_min", "tau_max", "tau_count", "out_dir",
];

fn cmd_detect(cfg: &Config) -> Result<(), CliError> {
    cfg.check_keys("detect", DETECT_KEYS)?;
    let dir = ensure_out_dir(cfg)?;
    let n = key_n(cfg)?;
    let (model, mut resolved) = experiment_model(cfg, n)?;
    let reps = cfg.get_usize("reps")?.unwrap_or(100);
    if reps < 2 {
        return Err(usage(format!(
            "config key `reps`: need at least 2 reps, got {reps}"
        )));
    }
    let (stat_name, stat) = parse_stat(cfg)?;
    let grid = tau_grid_from(cfg, &mut resolved)?;
    let report = detection_experiment(&model, stat, grid.as_deref(), reps)?;

    let mut rows = Vec::with_capacity(2 * reps);
    for (rep, s) in report.stat0.iter().enumerate() {
        rows.push(vec![rep.to_string(), "null".to_string(), g17(*s)]);
    }
    for (rep, s) in report.stat1.iter().enumerate() {
        rows.push(vec![rep.to_string(), "planted".to_string(), g17(*s)]);
    }
    write_raw(&dir, "rep,hypothesis,statistic", &rows)?;

    let mut summary = vec![
        ("reps".to_string(), reps.to_string()),
        ("best_sum".to_string(), g17(report.best_sum)),
        ("best_tau".to_string(), g17(report.best_tau)),
    ];
    if let Some(i) = report.tau_grid.iter().position(|t| *t == report.best_tau) {
        summary.push(("type1_at_best_tau".to_string(), g17(report.type1[i])));
        summary.push(("type2_at_best_tau".to_string(), g17(report.type2[i])));
    }
    write_summary(&dir, &summary)?;

    resolved.insert("n".to_string(), n.to_string());
    resolved.insert("reps".to_string(), reps.to_string());
    resolved.insert("stat".to_string(), stat_name.to_string());
    resolved.insert("out_dir".to_string(), dir.display().to_string());
    write_manifest(&dir, "detect", &resolved)?;
    println!("best_sum = {}", g17(report.best_sum));
    println!("best_tau = {}", g17(report.best_tau));
    Ok(())
}

const ESTGAP_KEYS: &[&str] = &["p", "n", "a", "d", "q", "seed", "reps", "out_dir"];

fn cmd_estgap(cfg: &Config) -> Result<(), CliError> {
    cfg.check_keys("estgap", ESTGAP_KEYS)?;
    let dir = ensure_out_dir(cfg)?;
    let n = key_n(cfg)?;
    let (model, mut resolved) = experiment_model(cfg, n)?;
    let reps = cfg.get_usize("reps")?.unwrap_or(100);
    if reps == 0 {
        return Err(usage("config key `reps`: need at least 1 rep"));
    }
    let report = estimate_error_distribution(&model, reps)?;

    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| vec![r.rep.to_string(), g17(r.err_lower), g17(r.err_upper)])
        .collect();
    write_raw(&dir, "rep,err_lower,err_upper", &rows)?;

    let mut summary = vec![
        ("reps".to_string(), reps.to_string()),
        ("d_det_proxy".to_string(), g17(report.d_det_proxy)),
        ("bound".to_string(), g17(report.bound)),
    ];
    for (i, (level, lower_v)) in report.est_lower_quantiles.iter().enumerate() {
        let (_, upper_v) = report.est_upper_quantiles[i];
        summary.push((format!("err_lower_q{level}"), g17(*lower_v)));
        summary.push((format!("err_upper_q{level}"), g17(upper_v)));
    }
    write_summary(&dir, &summary)?;

    resolved.insert("n".to_string(), n.to_string());
    resolved.insert("reps".to_string(), reps.to_string());
    resolved.insert("out_dir".to_string(), dir.display().to_string());
    write_manifest(&dir, "estgap", &resolved)?;
    println!("d_det_proxy = {}", g17(report.d_det_proxy));
    println!("bound = {}", g17(report.bound));
    Ok(())
}

const SCALING_KEYS: &[&str] = &["p", "a", "d", "q", "seed", "reps", "n_grid", "out_dir"];

fn cmd_scaling(cfg: &Config) -> Result<(), CliError> {
    cfg.check_keys("scaling", SCALING_KEYS)?;
    let dir = ensure_out_dir(cfg)?;
    let n_grid = cfg.require_usize_list("n_grid")?;
    if n_grid.len() < 3 {
        return Err(usage(format!(
            "config key `n_grid`: need at least 3 sample counts, got {}",
            n_grid.len()
        )));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(usage("config key `n_grid`: must be strictly increasing"));
    }
    if n_grid[0] < 2 {
        return Err(usage("config key `n_grid`: every count must be at least 2"));
    }
    let (model, mut resolved) = experiment_model(cfg, n_grid[0])?;
    let reps = cfg.get_usize("reps")?.unwrap_or(50);
    if reps == 0 {
        return Err(usage("config key `reps`: need at least 1 rep"));
    }
    let report = scaling_sweep(&model, &n_grid, reps)?;

    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| vec![r.n.to_string(), r.rep.to_string(), g17(r.err_upper)])
        .collect();
    write_raw(&dir, "n,rep,err_upper", &rows)?;

    let mut summary = vec![
        ("slope".to_string(), g17(report.slope)),
        ("intercept".to_string(), g17(report.intercept)),
    ];
    for (i, n) in report.n_values.iter().enumerate() {
        summary.push((format!("median_err_upper_n{n}"), g17(report.medians[i])));
    }
    write_summary(&dir, &summary)?;
    write_text(&dir.join("notes.txt"), &format!("{}\n", report.regime_note))?;

    let grid_echo: Vec<String> = n_grid.iter().map(usize::to_string).collect();
    resolved.insert("n_grid".to_string(), grid_echo.join(","));
    resolved.insert("reps".to_string(), reps.to_string());
    resolved.insert("out_dir".to_string(), dir.display().to_string());
    write_manifest(&dir, "scaling", &resolved)?;
    println!("slope = {}", g17(report.slope));
    println!("note: {}", report.regime_note);
    Ok(())
}

const LOWDEG_KEYS: &[&str] = &["a", "n", "p", "d", "c_d", "c0", "m_cap", "out_dir"];

fn cmd_lowdeg(cfg: &Config) -> Result<(), CliError> {
    cfg.check_keys("lowdeg", LOWDEG_KEYS)?;
    let dir = ensure_out_dir(cfg)?;
    let params = LowDegreeBoundParams {
        a: cfg.require_f64("a")?,
        n: cfg.require_f64("n")?,
        p: cfg.require_f64("p")?,
        d: cfg.require_f64("d")?,
        c_d: cfg.get_f64("c_d")?.unwrap_or(1.0),
        c0: cfg.get_f64("c0")?.unwrap_or(9.0),
        m_cap: cfg.require_usize("m_cap")?,
    };
    let bound = lowdeg_bound_sum(&params)
        .map_err(|e| usage(format!("invalid low-degree config: {e}")))?;

    println!("value = {}", g17(bound.value));
    let mut summary = vec![
        ("value".to_string(), g17(bound.value)),
        ("max_term_ratio".to_string(), g17(bound.max_term_ratio)),
    ];
    if let Some(m) = bound.overflow_at {
        println!("overflowed at degree {m}; the sum is reported as infinite");
        summary.push(("overflow_at".to_string(), m.to_string()));
    }
    write_summary(&dir, &summary)?;

    let mut resolved = BTreeMap::new();
    resolved.insert("a".to_string(), g17(params.a));
    resolved.insert("n".to_string(), g17(params.n));
    resolved.insert("p".to_string(), g17(params.p));
    resolved.insert("d".to_string(), g17(params.d));
    resolved.insert("c_d".to_string(), g17(params.c_d));
    resolved.insert("c0".to_string(), g17(params.c0));
    resolved.insert("m_cap".to_string(), params.m_cap.to_string());
    resolved.insert("out_dir".to_string(), dir.display().to_string());
    write_manifest(&dir, "lowdeg", &resolved)?;
    Ok(())
}
