//! Multipath Doppler channel and AWGN.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_model::{waveform, ExtendedFrame, GridConfig, SignalModelKind};

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub gain: Complex64,
    /// Seconds, in `(0, T)`.
    pub delay: f64,
    /// Hertz, in `(-1/(2T), 1/(2T))`.
    pub doppler: f64,
}

impl Path {
    pub fn new(gain: Complex64, delay: f64, doppler: f64) -> Self {
        Self { gain, delay, doppler }
    }

    /// Checks the delay/Doppler range contract.
    pub fn validate(&self, cfg: &GridConfig) -> Result<()> {
        let t = cfg.slot_duration;
        if !(self.delay > 0.0 && self.delay < t) {
            return Err(Error::Argument(format!("delay {} outside (0, T)", self.delay)));
        }
        if !(self.doppler.abs() < 0.5 / t) {
            return Err(Error::Argument(format!(
                "Doppler {} outside (-1/(2T), 1/(2T))",
                self.doppler
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub paths: Vec<Path>,
}

impl PathSet {
    pub fn new(paths: Vec<Path>) -> Self {
        Self { paths }
    }

    pub fn count(&self) -> usize {
        self.paths.len()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Path> {
        self.paths.iter()
    }
}

impl FromIterator<Path> for PathSet {
    fn from_iter<I: IntoIterator<Item = Path>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

/// Noise level and generator seed. `snr_db = None` means noiseless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub snr_db: Option<f64>,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        Self { snr_db: None, seed: 0 }
    }

    pub fn with_snr(snr_db: f64, seed: u64) -> Self {
        Self {
            snr_db: Some(snr_db),
            seed,
        }
    }
}

/// Draws from `(lo, hi)`, rejecting the closed endpoints.
fn open_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    loop {
        let x = lo + (hi - lo) * rng.random::<f64>();
        if x > lo && x < hi {
            return x;
        }
    }
}

/// Unit-variance circular complex Gaussian.
pub fn complex_gaussian(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Random paths: delays uniform on `(0, T)`, Dopplers uniform on
/// `(-1/(2T), 1/(2T))`, gains standard complex Gaussian.
pub fn sample_paths(rng_seed: u64, count: usize, cfg: &GridConfig) -> Result<PathSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    sample_paths_with(&mut rng, count, cfg)
}

pub fn sample_paths_with(rng: &mut impl Rng, count: usize, cfg: &GridConfig) -> Result<PathSet> {
    if count < 1 {
        return Err(Error::Argument("path count must be >= 1".into()));
    }
    let t = cfg.slot_duration;
    Ok((0..count)
        .map(|_| {
            let delay = open_uniform(rng, 0.0, t);
            let doppler = open_uniform(rng, -0.5 / t, 0.5 / t);
            let gain = complex_gaussian(rng);
            Path::new(gain, delay, doppler)
        })
        .collect())
}

/// Response of one path at the frame's sampling instants:
/// `s(ℓT_s - t_d) e^{j2π f_D ℓ T_s}`, with `s` evaluated analytically.
pub fn path_response(delay: f64, doppler: f64, cfg: &GridConfig, kind: SignalModelKind) -> Vec<Complex64> {
    let ts = cfg.sample_interval();
    let (start, end) = cfg.sample_index_range();
    (start..end)
        .map(|l| {
            let t = l as f64 * ts;
            waveform(t - delay, cfg, kind) * Complex64::from_polar(1.0, 2.0 * PI * doppler * t)
        })
        .collect()
}

/// Noiseless multipath sum `Σ_p α_p s(ℓT_s - t_{d,p}) e^{j2π f_{D,p} ℓT_s}`.
///
/// The transmit frame only fixes the geometry; the delayed waveform is
/// re-evaluated, so fractional delays carry no interpolation error.
pub fn apply_channel(
    tx: &ExtendedFrame,
    paths: &PathSet,
    cfg: &GridConfig,
    kind: SignalModelKind,
) -> Result<ExtendedFrame> {
    tx.check(cfg)?;
    let mut out = ExtendedFrame::zeros(cfg);
    for p in paths.iter() {
        let resp = path_response(p.delay, p.doppler, cfg, kind);
        for (o, r) in out.samples.iter_mut().zip(resp) {
            *o += p.gain * r;
        }
    }
    Ok(out)
}

/// Mean `|r|²` over the retained window `t ∈ [T, (N+1)T)`.
pub fn retained_power(frame: &ExtendedFrame, cfg: &GridConfig) -> f64 {
    let start = frame.origin_offset + cfg.samples_per_slot();
    let len = cfg.n_slots * cfg.samples_per_slot();
    let window = &frame.samples[start..start + len];
    window.iter().map(|z| z.norm_sqr()).sum::<f64>() / len as f64
}

/// Adds circular white Gaussian noise with per-sample variance
/// `P_sig / 10^(snr/10)`, `P_sig` taken over the retained window.
pub fn add_awgn(frame: &ExtendedFrame, noise: &NoiseSpec, cfg: &GridConfig) -> Result<ExtendedFrame> {
    if frame.is_empty() {
        return Err(Error::Argument("cannot add noise to an empty frame".into()));
    }
    let Some(snr_db) = noise.snr_db else {
        return Ok(frame.clone());
    };
    if !snr_db.is_finite() {
        return Err(Error::Argument(format!("SNR must be finite, got {snr_db}")));
    }
    let p_sig = retained_power(frame, cfg);
    let sigma = (p_sig / 10f64.powf(snr_db / 10.0)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut out = frame.clone();
    for s in out.samples.iter_mut() {
        *s += complex_gaussian(&mut rng) * sigma;
    }
    Ok(out)
}
