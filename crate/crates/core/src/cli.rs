//! Command-line front end. Delays and Dopplers cross this boundary in
//! normalised units (`delay / T`, `doppler * T`).

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::json;

use crate::channel::{add_awgn, apply_channel, sample_paths, NoiseSpec, Path, PathSet};
use crate::error::{Error, Result};
use crate::estimators::{delay_first, doppler_first, CandidateSet};
use crate::fusion::{EstimateSet, FusionParams, MergeRule};
use crate::montecarlo::{estimate_with, sweep, Method, Scenario, SweepOptions};
use crate::sampling::{fd_matrix, fd_samples, retained_td_matrix};
use crate::signal_model::{transmit_samples, ExtendedFrame, GridConfig, SignalModelKind};

/// Environment variable that takes precedence over `--seed`.
pub const SEED_ENV: &str = "DD_PRONY_SEED";

#[derive(Debug, Parser)]
#[command(name = "dd-prony", version, about = "Delay-Doppler estimation from an OTFS pilot frame")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesise a received pilot frame and write it as CSV.
    Genframe(GenframeArgs),
    /// Estimate delay-Doppler pairs from a frame CSV.
    Estimate(EstimateArgs),
    /// Monte Carlo detection-rate sweep.
    Simulate(SimulateArgs),
    /// Run the built-in example checks.
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    /// T-periodic Dirichlet waveform.
    Ideal,
    /// Truncated sinc pulse train.
    Sinc,
}

impl From<ModelArg> for SignalModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Ideal => SignalModelKind::IdealPeriodic,
            ModelArg::Sinc => SignalModelKind::TruncatedSinc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    DopplerFirst,
    DelayFirst,
    Parallel,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::DopplerFirst => Method::DopplerFirst,
            MethodArg::DelayFirst => Method::DelayFirst,
            MethodArg::Parallel => Method::Parallel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MergeRuleArg {
    /// Any two pooled candidates may merge, repeatedly.
    Pooled,
    /// Only one Doppler-first with one delay-first candidate.
    CrossPairs,
}

impl From<MergeRuleArg> for MergeRule {
    fn from(m: MergeRuleArg) -> Self {
        match m {
            MergeRuleArg::Pooled => MergeRule::Pooled,
            MergeRuleArg::CrossPairs => MergeRule::CrossPairs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Number of slots N.
    #[arg(long = "n", default_value_t = 32)]
    pub n: usize,
    /// Number of subcarriers M.
    #[arg(long = "m", default_value_t = 32)]
    pub m: usize,
    /// Slot duration T in seconds.
    #[arg(long, default_value_t = 1.0)]
    pub slot_duration: f64,
    /// Time oversampling factor U_t.
    #[arg(long, default_value_t = 2)]
    pub ut: usize,
    /// Frequency oversampling factor U_f.
    #[arg(long, default_value_t = 2)]
    pub uf: usize,
    /// Guard slots N_0 on each side of the frame.
    #[arg(long, default_value_t = 2)]
    pub n0: usize,
    /// Transmit waveform model.
    #[arg(long, value_enum, default_value_t = ModelArg::Sinc)]
    pub model: ModelArg,
}

impl GridArgs {
    pub fn config(&self) -> Result<GridConfig> {
        let cfg = GridConfig {
            n_slots: self.n,
            n_subcarriers: self.m,
            slot_duration: self.slot_duration,
            upsample_time: self.ut,
            upsample_freq: self.uf,
            tail_slots: self.n0,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct FusionArgs {
    /// Delay merge radius, units of T.
    #[arg(long, default_value_t = 0.1)]
    pub delta_t: f64,
    /// Doppler merge radius, units of 1/T.
    #[arg(long, default_value_t = 0.1)]
    pub delta_f: f64,
    /// Relative gain threshold for pruning.
    #[arg(long, default_value_t = 0.01)]
    pub delta_alpha: f64,
    /// Which candidate pairs may merge.
    #[arg(long, value_enum, default_value_t = MergeRuleArg::Pooled)]
    pub merge_rule: MergeRuleArg,
}

impl FusionArgs {
    pub fn params(&self) -> Result<FusionParams> {
        let p = FusionParams {
            delta_t: self.delta_t,
            delta_f: self.delta_f,
            delta_alpha: self.delta_alpha,
            merge_rule: self.merge_rule.into(),
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenframeArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    /// Number of random paths (ignored when --path is given).
    #[arg(long, default_value_t = 2)]
    pub paths: usize,
    /// Explicit path `delay/T,doppler*T[,gain_re,gain_im]`; repeatable.
    #[arg(long = "path", value_name = "SPEC")]
    pub path: Vec<String>,
    /// SNR over the retained window, dB.
    #[arg(long, conflicts_with = "noiseless")]
    pub snr_db: Option<f64>,
    /// No noise (the default when --snr-db is absent).
    #[arg(long)]
    pub noiseless: bool,
    /// Random seed; DD_PRONY_SEED overrides it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Frame CSV destination; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the true paths as JSON here.
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub fusion: FusionArgs,
    /// Frame CSV with columns index,t_over_T,re,im.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Parallel)]
    pub method: MethodArg,
    /// Same as --method parallel.
    #[arg(long, conflicts_with = "method")]
    pub parallel: bool,
    /// Print the raw pipeline candidates instead of fitted paths.
    #[arg(long)]
    pub candidates: bool,
    /// JSON destination; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub fusion: FusionArgs,
    /// Path counts to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 4, 6])]
    pub paths: Vec<usize>,
    /// SNR values to sweep, dB.
    #[arg(long, value_delimiter = ',', conflicts_with = "noiseless", default_values_t = [20.0f64, 40.0])]
    pub snr_db: Vec<f64>,
    /// Sweep without noise instead.
    #[arg(long)]
    pub noiseless: bool,
    /// Trials per scenario.
    #[arg(long, default_value_t = 1000)]
    pub runs: usize,
    /// Base seed; DD_PRONY_SEED overrides it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Methods to compare.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MethodArg::DopplerFirst, MethodArg::DelayFirst, MethodArg::Parallel])]
    pub method: Vec<MethodArg>,
    /// Delay match radius, units of T.
    #[arg(long, default_value_t = 0.5)]
    pub match_dt: f64,
    /// Doppler match radius, units of 1/T.
    #[arg(long, default_value_t = 0.5)]
    pub match_df: f64,
    /// Worker threads; 0 uses all available cores.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Fill the mean_trial_ms column (makes output non-reproducible).
    #[arg(long)]
    pub timing: bool,
    /// Report destination; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
}

fn seed_override(flag: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Argument(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(flag),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Parses `delay/T,doppler*T[,gain_re,gain_im]`.
pub fn parse_path_spec(spec: &str, cfg: &GridConfig) -> Result<Path> {
    let vals: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Argument(format!("bad path spec {spec:?}")))?;
    let gain = match vals.len() {
        2 => Complex64::new(1.0, 0.0),
        4 => Complex64::new(vals[2], vals[3]),
        _ => return Err(Error::Argument(format!("path spec {spec:?} needs 2 or 4 numbers"))),
    };
    let p = Path::new(gain, vals[0] * cfg.slot_duration, vals[1] / cfg.slot_duration);
    p.validate(cfg)?;
    Ok(p)
}

pub fn frame_to_csv(frame: &ExtendedFrame, cfg: &GridConfig) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "t_over_T", "re", "im"])?;
    let per_slot = cfg.samples_per_slot() as f64;
    for (i, s) in frame.samples.iter().enumerate() {
        let l = frame.sample_index(i);
        w.write_record([
            l.to_string(),
            (l as f64 / per_slot).to_string(),
            s.re.to_string(),
            s.im.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Reads a frame CSV; the sample indices must cover the grid's extended support.
pub fn frame_from_csv(text: &str, cfg: &GridConfig) -> Result<ExtendedFrame> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut frame = ExtendedFrame::zeros(cfg);
    let (lo, _) = cfg.sample_index_range();
    let mut seen = vec![false; frame.len()];
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| -> Result<&str> {
            rec.get(i)
                .ok_or_else(|| Error::Argument(format!("frame row has {} fields, need 4", rec.len())))
        };
        let index: i64 = field(0)?
            .trim()
            .parse()
            .map_err(|_| Error::Argument(format!("bad sample index {:?}", field(0).unwrap_or(""))))?;
        let num = |i: usize| -> Result<f64> {
            let s = field(i)?;
            s.trim().parse().map_err(|_| Error::Argument(format!("bad number {s:?}")))
        };
        let pos = index - lo;
        if pos < 0 || pos as usize >= frame.len() {
            return Err(Error::Config(format!("sample index {index} outside the extended support")));
        }
        frame.samples[pos as usize] = Complex64::new(num(2)?, num(3)?);
        seen[pos as usize] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Config(format!(
            "frame is missing sample index {}",
            missing as i64 + lo
        )));
    }
    Ok(frame)
}

pub fn estimate_json(est: &EstimateSet, cfg: &GridConfig) -> serde_json::Value {
    let t = cfg.slot_duration;
    let paths: Vec<_> = est
        .paths
        .iter()
        .map(|p| {
            json!({
                "delay_over_T": p.delay / t,
                "doppler_times_T": p.doppler * t,
                "gain_re": p.gain.re,
                "gain_im": p.gain.im,
            })
        })
        .collect();
    json!({
        "path_count": est.paths.len(),
        "paths": paths,
        "diagnostics": est.diagnostics,
    })
}

pub fn candidates_json(sets: &[CandidateSet], cfg: &GridConfig) -> serde_json::Value {
    let t = cfg.slot_duration;
    let all: Vec<_> = sets
        .iter()
        .flat_map(|s| {
            s.pairs.iter().map(move |c| {
                json!({
                    "delay_over_T": c.delay / t,
                    "doppler_times_T": c.doppler * t,
                    "energy": c.energy,
                    "degenerate": c.degenerate,
                    "source": s.source.as_str(),
                })
            })
        })
        .collect();
    json!({ "candidates": all })
}

fn genframe(a: &GenframeArgs) -> Result<()> {
    let cfg = a.grid.config()?;
    let kind = a.grid.model.into();
    let seed = seed_override(a.seed)?;
    let truth = if a.path.is_empty() {
        sample_paths(seed, a.paths, &cfg)?
    } else {
        a.path
            .iter()
            .map(|s| parse_path_spec(s, &cfg))
            .collect::<Result<PathSet>>()?
    };
    let clean = apply_channel(&transmit_samples(&cfg, kind), &truth, &cfg, kind)?;
    let noise = match a.snr_db {
        Some(snr) if !a.noiseless => NoiseSpec::with_snr(snr, seed.wrapping_add(1)),
        _ => NoiseSpec::noiseless(),
    };
    let rx = add_awgn(&clean, &noise, &cfg)?;
    if let Some(path) = &a.truth_out {
        let t = cfg.slot_duration;
        let paths: Vec<_> = truth
            .iter()
            .map(|p| {
                json!({
                    "delay_over_T": p.delay / t,
                    "doppler_times_T": p.doppler * t,
                    "gain_re": p.gain.re,
                    "gain_im": p.gain.im,
                })
            })
            .collect();
        std::fs::write(path, serde_json::to_string_pretty(&json!({ "paths": paths }))?)?;
    }
    emit(&a.out, &frame_to_csv(&rx, &cfg)?)
}

fn estimate(a: &EstimateArgs) -> Result<()> {
    let cfg = a.grid.config()?;
    let kind = a.grid.model.into();
    let params = a.fusion.params()?;
    let rx = frame_from_csv(&std::fs::read_to_string(&a.input)?, &cfg)?;
    let method: Method = if a.parallel { Method::Parallel } else { a.method.into() };
    let value = if a.candidates {
        let df = || -> Result<CandidateSet> { Ok(doppler_first(&retained_td_matrix(&rx, &cfg)?, &cfg)?.0) };
        let dl = || -> Result<CandidateSet> { Ok(delay_first(&fd_matrix(&fd_samples(&rx, &cfg)?, &cfg)?, &cfg)?.0) };
        let sets = match method {
            Method::DopplerFirst => vec![df()?],
            Method::DelayFirst => vec![dl()?],
            Method::Parallel => vec![df()?, dl()?],
        };
        candidates_json(&sets, &cfg)
    } else {
        estimate_json(&estimate_with(method, &rx, &cfg, &params, kind)?, &cfg)
    };
    emit(&a.out, &(serde_json::to_string_pretty(&value)? + "\n"))
}

/// Scenarios of a `simulate` invocation, in output-row order.
pub fn simulate_scenarios(a: &SimulateArgs) -> Result<Vec<Scenario>> {
    let cfg = a.grid.config()?;
    let fusion = a.fusion.params()?;
    let seed = seed_override(a.seed)?;
    let snrs: Vec<Option<f64>> = if a.noiseless {
        vec![None]
    } else {
        a.snr_db.iter().map(|&s| Some(s)).collect()
    };
    let mut out = Vec::new();
    for &p in &a.paths {
        for &snr in &snrs {
            for &m in &a.method {
                out.push(Scenario {
                    cfg,
                    path_count: p,
                    snr_db: snr,
                    runs: a.runs,
                    base_seed: seed,
                    method: m.into(),
                    match_delta_t: a.match_dt,
                    match_delta_f: a.match_df,
                    model: a.grid.model.into(),
                    fusion,
                    ..Default::default()
                });
            }
        }
    }
    Ok(out)
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let scenarios = simulate_scenarios(a)?;
    let report = sweep(
        &scenarios,
        SweepOptions {
            workers: a.workers,
            timing: a.timing,
        },
    )?;
    let text = match a.format {
        FormatArg::Csv => report.to_csv()?,
        FormatArg::Json => report.to_json()? + "\n",
    };
    emit(&a.out, &text)
}

fn selftest() -> Result<bool> {
    let results = crate::selftest::run();
    let mut ok = true;
    for (name, pass) in &results {
        println!("{} {name}", if *pass { "PASS" } else { "FAIL" });
        ok &= pass;
    }
    println!("{}/{} checks passed", results.iter().filter(|r| r.1).count(), results.len());
    Ok(ok)
}

/// Runs a parsed command; `Ok(false)` means a check failed.
pub fn dispatch(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Genframe(a) => genframe(a).map(|_| true),
        Command::Estimate(a) => estimate(a).map(|_| true),
        Command::Simulate(a) => simulate(a).map(|_| true),
        Command::Selftest => selftest(),
    }
}
