//! Monte Carlo detection-rate harness.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{add_awgn, apply_channel, complex_gaussian, sample_paths_with, NoiseSpec, Path, PathSet};
use crate::error::{Error, Result};
use crate::estimators::Source;
use crate::fusion::{parallel_estimate, single_estimate, EstimateSet, FusionParams};
use crate::signal_model::{transmit_samples, GridConfig, SignalModelKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    DopplerFirst,
    DelayFirst,
    Parallel,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::DopplerFirst, Method::DelayFirst, Method::Parallel];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::DopplerFirst => "doppler-first",
            Method::DelayFirst => "delay-first",
            Method::Parallel => "parallel",
        }
    }
}

/// How the true paths of each trial are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Geometry {
    /// Delays uniform on `(0, T)`, Dopplers uniform on `(-1/(2T), 1/(2T))`.
    Random,
    /// Fixed `(delay / T, doppler * T)` pairs; only the gains are random.
    Fixed(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub cfg: GridConfig,
    pub path_count: usize,
    /// `None` is noiseless.
    pub snr_db: Option<f64>,
    pub runs: usize,
    pub base_seed: u64,
    pub method: Method,
    /// Match radius in units of `T`.
    pub match_delta_t: f64,
    /// Match radius in units of `1/T`.
    pub match_delta_f: f64,
    pub model: SignalModelKind,
    pub fusion: FusionParams,
    pub geometry: Geometry,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            cfg: GridConfig::default(),
            path_count: 2,
            snr_db: Some(20.0),
            runs: 1000,
            base_seed: 0,
            method: Method::Parallel,
            match_delta_t: 0.5,
            match_delta_f: 0.5,
            model: SignalModelKind::TruncatedSinc,
            fusion: FusionParams::default(),
            geometry: Geometry::Random,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        self.fusion.validate()?;
        if self.runs == 0 {
            return Err(Error::Argument("runs must be at least 1".into()));
        }
        if !(self.match_delta_t > 0.0 && self.match_delta_f > 0.0) {
            return Err(Error::Argument("match radii must be positive".into()));
        }
        if self.path_count == 0 {
            return Err(Error::Argument("path count must be at least 1".into()));
        }
        if let Geometry::Fixed(pts) = &self.geometry {
            if pts.len() != self.path_count {
                return Err(Error::Argument(format!(
                    "{} fixed paths but path count {}",
                    pts.len(),
                    self.path_count
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub matched: usize,
    /// Sum of `|Δt| / T` over matched pairs.
    pub delay_err: f64,
    /// Sum of `|Δf| T` over matched pairs.
    pub doppler_err: f64,
    pub failed: bool,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub truth: usize,
    pub estimate: usize,
    pub delay_err: f64,
    pub doppler_err: f64,
}

/// Greedy one-to-one matching: the closest admissible (truth, estimate)
/// pair under `max(|Δt| / (dt T), |Δf| / (df / T))` is taken first.
pub fn match_pairs(truth: &PathSet, est: &EstimateSet, dt: f64, df: f64, period: f64) -> Vec<MatchedPair> {
    let rt = dt * period;
    let rf = df / period;
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    for (i, t) in truth.iter().enumerate() {
        for (j, e) in est.paths.iter().enumerate() {
            let ddt = (t.delay - e.delay).abs();
            let ddf = (t.doppler - e.doppler).abs();
            if ddt <= rt && ddf <= rf {
                cands.push(((ddt / rt).max(ddf / rf), i, j));
            }
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_t = vec![false; truth.count()];
    let mut used_e = vec![false; est.paths.len()];
    let mut out = Vec::new();
    for (_, i, j) in cands {
        if used_t[i] || used_e[j] {
            continue;
        }
        used_t[i] = true;
        used_e[j] = true;
        let t = &truth.paths[i];
        let e = &est.paths[j];
        out.push(MatchedPair {
            truth: i,
            estimate: j,
            delay_err: (t.delay - e.delay).abs() / period,
            doppler_err: (t.doppler - e.doppler).abs() * period,
        });
    }
    out
}

/// Matched count; radii in units of `T` and `1/T`.
pub fn match_paths(truth: &PathSet, est: &EstimateSet, dt: f64, df: f64, period: f64) -> usize {
    match_pairs(truth, est, dt, df, period).len()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `index`; depends only on the base seed and the index.
pub fn trial_seed(base_seed: u64, index: usize) -> u64 {
    splitmix64(base_seed ^ splitmix64(index as u64))
}

/// Paths of one trial, drawn from the trial generator.
pub fn trial_paths(scenario: &Scenario, rng: &mut ChaCha8Rng) -> Result<PathSet> {
    let cfg = &scenario.cfg;
    match &scenario.geometry {
        Geometry::Random => sample_paths_with(rng, scenario.path_count, cfg),
        Geometry::Fixed(pts) => Ok(pts
            .iter()
            .map(|&(t, f)| Path::new(complex_gaussian(rng), t * cfg.slot_duration, f / cfg.slot_duration))
            .collect()),
    }
}

/// Runs the scenario's estimator on one received frame.
pub fn estimate_with(
    method: Method,
    rx: &crate::signal_model::ExtendedFrame,
    cfg: &GridConfig,
    params: &FusionParams,
    kind: SignalModelKind,
) -> Result<EstimateSet> {
    match method {
        Method::Parallel => parallel_estimate(rx, cfg, params, kind),
        Method::DopplerFirst => single_estimate(rx, cfg, params, kind, Source::DopplerFirst),
        Method::DelayFirst => single_estimate(rx, cfg, params, kind, Source::DelayFirst),
    }
}

fn trial_inner(scenario: &Scenario, index: usize) -> Result<(PathSet, EstimateSet)> {
    let cfg = &scenario.cfg;
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(scenario.base_seed, index));
    let truth = trial_paths(scenario, &mut rng)?;
    let noise_seed: u64 = rng.random();
    let tx = transmit_samples(cfg, scenario.model);
    let clean = apply_channel(&tx, &truth, cfg, scenario.model)?;
    let noise = match scenario.snr_db {
        Some(snr) => NoiseSpec::with_snr(snr, noise_seed),
        None => NoiseSpec::noiseless(),
    };
    let rx = add_awgn(&clean, &noise, cfg)?;
    let est = estimate_with(scenario.method, &rx, cfg, &scenario.fusion, scenario.model)?;
    Ok((truth, est))
}

/// One randomized trial. A failing estimator yields a result with
/// `failed` set and no matches.
pub fn run_trial(scenario: &Scenario, index: usize) -> Result<TrialResult> {
    scenario.validate()?;
    if index >= scenario.runs {
        return Err(Error::Argument(format!("trial {index} outside [0, {})", scenario.runs)));
    }
    Ok(run_trial_unchecked(scenario, index))
}

fn run_trial_unchecked(scenario: &Scenario, index: usize) -> TrialResult {
    let start = Instant::now();
    let out = trial_inner(scenario, index);
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    match out {
        Ok((truth, est)) => {
            let pairs = match_pairs(
                &truth,
                &est,
                scenario.match_delta_t,
                scenario.match_delta_f,
                scenario.cfg.slot_duration,
            );
            TrialResult {
                matched: pairs.len(),
                delay_err: pairs.iter().map(|p| p.delay_err).sum(),
                doppler_err: pairs.iter().map(|p| p.doppler_err).sum(),
                failed: false,
                elapsed_ms,
            }
        }
        Err(_) => TrialResult {
            matched: 0,
            delay_err: 0.0,
            doppler_err: 0.0,
            failed: true,
            elapsed_ms,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: usize,
    pub m: usize,
    pub model: String,
    pub method: String,
    #[serde(rename = "P")]
    pub p: usize,
    /// `None` is noiseless.
    pub snr_db: Option<f64>,
    pub runs: usize,
    pub detection_rate: f64,
    pub mean_delay_err_over_t: f64,
    pub mean_doppler_err_times_t: f64,
    pub fail_count: usize,
    /// Filled only when timing is requested; wall-clock time is not reproducible.
    pub mean_trial_ms: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub rows: Vec<ReportRow>,
}

pub const CSV_HEADER: [&str; 12] = [
    "n",
    "m",
    "model",
    "method",
    "P",
    "snr_db",
    "runs",
    "detection_rate",
    "mean_delay_err_over_T",
    "mean_doppler_err_times_T",
    "fail_count",
    "mean_trial_ms",
];

impl DetectionReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.m.to_string(),
                r.model.clone(),
                r.method.clone(),
                r.p.to_string(),
                r.snr_db.map_or_else(|| "inf".to_string(), |s| s.to_string()),
                r.runs.to_string(),
                r.detection_rate.to_string(),
                r.mean_delay_err_over_t.to_string(),
                r.mean_doppler_err_times_t.to_string(),
                r.fail_count.to_string(),
                r.mean_trial_ms.map_or_else(String::new, |t| format!("{t:.3}")),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| {
                serde_json::json!({
                    "n": r.n,
                    "m": r.m,
                    "model": r.model,
                    "method": r.method,
                    "P": r.p,
                    "snr_db": r.snr_db,
                    "runs": r.runs,
                    "detection_rate": r.detection_rate,
                    "mean_delay_err_over_T": r.mean_delay_err_over_t,
                    "mean_doppler_err_times_T": r.mean_doppler_err_times_t,
                    "fail_count": r.fail_count,
                    "mean_trial_ms": r.mean_trial_ms,
                })
            })
            .collect();
        Ok(serde_json::to_string_pretty(&serde_json::json!({ "rows": rows }))?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    /// Worker threads; `0` uses the available parallelism.
    pub workers: usize,
    pub timing: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { workers: 0, timing: false }
    }
}

/// Aggregates trial results, in index order, into one report row.
pub fn aggregate(scenario: &Scenario, trials: &[TrialResult], timing: bool) -> ReportRow {
    let matched: usize = trials.iter().map(|t| t.matched).sum();
    let delay_err: f64 = trials.iter().map(|t| t.delay_err).sum();
    let doppler_err: f64 = trials.iter().map(|t| t.doppler_err).sum();
    let mean = |s: f64| if matched > 0 { s / matched as f64 } else { f64::NAN };
    ReportRow {
        n: scenario.cfg.n_slots,
        m: scenario.cfg.n_subcarriers,
        model: scenario.model.as_str().to_string(),
        method: scenario.method.as_str().to_string(),
        p: scenario.path_count,
        snr_db: scenario.snr_db,
        runs: scenario.runs,
        detection_rate: matched as f64 / (scenario.runs * scenario.path_count) as f64,
        mean_delay_err_over_t: mean(delay_err),
        mean_doppler_err_times_t: mean(doppler_err),
        fail_count: trials.iter().filter(|t| t.failed).count(),
        mean_trial_ms: timing.then(|| trials.iter().map(|t| t.elapsed_ms).sum::<f64>() / trials.len() as f64),
    }
}

/// Runs every trial of every scenario and reports one row per scenario.
pub fn sweep(scenarios: &[Scenario], opts: SweepOptions) -> Result<DetectionReport> {
    if scenarios.is_empty() {
        return Err(Error::Argument("no scenarios to run".into()));
    }
    for s in scenarios {
        s.validate()?;
    }
    let jobs: Vec<(usize, usize)> = scenarios
        .iter()
        .enumerate()
        .flat_map(|(s, sc)| (0..sc.runs).map(move |i| (s, i)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<TrialResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(s, i)| run_trial_unchecked(&scenarios[s], i))
            .collect()
    });
    let mut rows = Vec::with_capacity(scenarios.len());
    let mut at = 0;
    for sc in scenarios {
        rows.push(aggregate(sc, &results[at..at + sc.runs], opts.timing));
        at += sc.runs;
    }
    Ok(DetectionReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::EstimatedPath;
    use num_complex::Complex64;

    fn truth(pts: &[(f64, f64)]) -> PathSet {
        pts.iter().map(|&(t, f)| Path::new(Complex64::new(1.0, 0.0), t, f)).collect()
    }

    fn est(pts: &[(f64, f64)]) -> EstimateSet {
        EstimateSet {
            paths: pts
                .iter()
                .map(|&(delay, doppler)| EstimatedPath {
                    delay,
                    doppler,
                    gain: Complex64::new(1.0, 0.0),
                })
                .collect(),
            ..Default::default()
        }
    }

    #[test]
    fn match_examples() {
        let pts = [(0.1, 0.2), (0.5, -0.3), (0.8, 0.0)];
        assert_eq!(match_paths(&truth(&pts), &est(&pts), 0.5, 0.5, 1.0), 3);
        assert_eq!(match_paths(&truth(&pts), &est(&[]), 0.5, 0.5, 1.0), 0);
        let two = truth(&[(0.2, 0.0), (0.4, 0.0)]);
        assert_eq!(match_paths(&two, &est(&[(0.3, 0.0)]), 0.5, 0.5, 1.0), 1);
    }

    #[test]
    fn match_prefers_closest_pair() {
        let t = truth(&[(0.20, 0.0), (0.30, 0.0)]);
        let e = est(&[(0.29, 0.0)]);
        let pairs = match_pairs(&t, &e, 0.5, 0.5, 1.0);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].truth, 1);
    }

    #[test]
    fn match_respects_radius() {
        let t = truth(&[(0.2, 0.0)]);
        assert_eq!(match_paths(&t, &est(&[(0.26, 0.0)]), 0.05, 0.05, 1.0), 0);
        assert_eq!(match_paths(&t, &est(&[(0.24, 0.0)]), 0.05, 0.05, 1.0), 1);
    }

    #[test]
    fn trial_seeds_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| trial_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(trial_seed(0, 1), trial_seed(1, 0));
    }

    fn small(method: Method) -> Scenario {
        Scenario {
            cfg: GridConfig::new(16, 16, 1.0).unwrap(),
            runs: 4,
            method,
            ..Default::default()
        }
    }

    #[test]
    fn trial_deterministic() {
        let s = small(Method::Parallel);
        let a = run_trial(&s, 2).unwrap();
        let b = run_trial(&s, 2).unwrap();
        assert_eq!((a.matched, a.delay_err, a.doppler_err), (b.matched, b.delay_err, b.doppler_err));
        assert!(run_trial(&s, 4).is_err());
    }

    #[test]
    fn noiseless_single_path_detected() {
        let s = Scenario {
            cfg: GridConfig::new(16, 16, 1.0).unwrap(),
            path_count: 1,
            snr_db: None,
            runs: 3,
            model: SignalModelKind::IdealPeriodic,
            ..Default::default()
        };
        for i in 0..3 {
            assert_eq!(run_trial(&s, i).unwrap().matched, 1);
        }
    }

    #[test]
    fn six_paths_in_range() {
        let s = Scenario {
            cfg: GridConfig::new(16, 16, 1.0).unwrap(),
            path_count: 6,
            runs: 1,
            ..Default::default()
        };
        let r = run_trial(&s, 0).unwrap();
        assert!(r.matched <= 6);
    }

    #[test]
    fn sweep_quantization_and_repeat() {
        let mut s = small(Method::DopplerFirst);
        s.runs = 1;
        let rep = sweep(&[s.clone(), s], SweepOptions { workers: 1, timing: false }).unwrap();
        assert_eq!(rep.rows[0], rep.rows[1]);
        let r = rep.rows[0].detection_rate * 2.0;
        assert!((r - r.round()).abs() < 1e-12);
        assert!(rep.to_csv().unwrap().lines().next().unwrap().starts_with("n,m,model,method,P,"));
    }

    #[test]
    fn sweep_rejects_bad_input() {
        assert!(sweep(&[], SweepOptions::default()).is_err());
        let mut s = small(Method::Parallel);
        s.runs = 0;
        assert!(sweep(&[s], SweepOptions::default()).is_err());
    }
}
