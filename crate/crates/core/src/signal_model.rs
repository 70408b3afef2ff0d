//! Pilot frame synthesis.
//!
//! The pilot is a single delay-Doppler impulse `X_DD[0,0] = 1`. Two
//! continuous-time models of the transmitted waveform are provided:
//!
//! * [`SignalModelKind::IdealPeriodic`]: the Dirichlet kernel, exactly
//!   `T`-periodic over the whole extended support. The factorisations both
//!   estimators rely on hold exactly under this model.
//! * [`SignalModelKind::TruncatedSinc`]: a finite sum of frequency-shifted
//!   sinc pulses, one per transmitted peak. This is the physical model.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this `|sin(pi t / T)|` the Dirichlet kernel is evaluated by its limit.
const DIRICHLET_SINGULAR_EPS: f64 = 1e-9;

/// Frame geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// `N`, time slots per frame.
    pub n_slots: usize,
    /// `M`, subcarriers; must be even.
    pub n_subcarriers: usize,
    /// `T`, slot duration in seconds.
    pub slot_duration: f64,
    /// `U_t`, time-domain upsampling factor.
    pub upsample_time: usize,
    /// `U_f`, frequency-domain upsampling factor.
    pub upsample_freq: usize,
    /// `N_0`, tail length in slots on each side of the frame.
    pub tail_slots: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_slots: 32,
            n_subcarriers: 32,
            slot_duration: 1.0,
            upsample_time: 2,
            upsample_freq: 2,
            tail_slots: 2,
        }
    }
}

impl GridConfig {
    pub fn new(n_slots: usize, n_subcarriers: usize, slot_duration: f64) -> Result<Self> {
        let cfg = Self {
            n_slots,
            n_subcarriers,
            slot_duration,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_slots < 2 {
            return Err(Error::Config(format!("N must be >= 2, got {}", self.n_slots)));
        }
        if self.n_subcarriers < 2 || self.n_subcarriers % 2 != 0 {
            return Err(Error::Config(format!(
                "M must be even and >= 2, got {}",
                self.n_subcarriers
            )));
        }
        if !(self.slot_duration.is_finite() && self.slot_duration > 0.0) {
            return Err(Error::Config(format!(
                "slot duration must be positive, got {}",
                self.slot_duration
            )));
        }
        if self.upsample_time < 1 || self.upsample_freq < 1 {
            return Err(Error::Config("upsampling factors must be >= 1".into()));
        }
        if self.tail_slots < 1 {
            return Err(Error::Config("tail length N_0 must be >= 1".into()));
        }
        if !(self.sample_interval() > 0.0) {
            return Err(Error::Config("sample interval underflows to zero".into()));
        }
        Ok(())
    }

    /// `T_s = T / (U_t M)`.
    pub fn sample_interval(&self) -> f64 {
        self.slot_duration / (self.upsample_time * self.n_subcarriers) as f64
    }

    /// `Δf = 1 / (U_f N T)`.
    pub fn freq_bin(&self) -> f64 {
        1.0 / ((self.upsample_freq * self.n_slots) as f64 * self.slot_duration)
    }

    /// Samples per slot, `U_t M`.
    pub fn samples_per_slot(&self) -> usize {
        self.upsample_time * self.n_subcarriers
    }

    /// Frequency bins per subcarrier spacing, `U_f N`.
    pub fn bins_per_subcarrier(&self) -> usize {
        self.upsample_freq * self.n_slots
    }

    /// Number of transmitted Dirichlet/sinc peaks: the `N` frame slots plus
    /// two guard peaks.
    pub fn transmitted_peaks(&self) -> usize {
        self.n_slots + 2
    }

    /// `(N + 1 + 2 N_0) U_t M`.
    pub fn extended_len(&self) -> usize {
        (self.n_slots + 1 + 2 * self.tail_slots) * self.samples_per_slot()
    }

    /// Array index of the sample at `t = 0`, `N_0 U_t M`.
    pub fn origin_offset(&self) -> usize {
        self.tail_slots * self.samples_per_slot()
    }

    /// Zero-padded DFT length `U_f U_t N M`.
    pub fn fd_len(&self) -> usize {
        self.upsample_freq * self.upsample_time * self.n_slots * self.n_subcarriers
    }

    /// First and one-past-last signed sample index of the extended support.
    pub fn sample_index_range(&self) -> (i64, i64) {
        let start = -(self.origin_offset() as i64);
        (start, start + self.extended_len() as i64)
    }
}

/// Which continuous-time model of the transmit waveform is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignalModelKind {
    IdealPeriodic,
    TruncatedSinc,
}

impl SignalModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SignalModelKind::IdealPeriodic => "ideal",
            SignalModelKind::TruncatedSinc => "sinc",
        }
    }
}

/// `N x M` delay-Doppler grid, row-major in the Doppler index `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DDGrid {
    n: usize,
    m: usize,
    values: Vec<Complex64>,
}

impl DDGrid {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            values: vec![Complex64::new(0.0, 0.0); n * m],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    /// Periodic in both indices.
    pub fn get(&self, k: i64, l: i64) -> Complex64 {
        let k = k.rem_euclid(self.n as i64) as usize;
        let l = l.rem_euclid(self.m as i64) as usize;
        self.values[k * self.m + l]
    }

    pub fn set(&mut self, k: i64, l: i64, v: Complex64) {
        let k = k.rem_euclid(self.n as i64) as usize;
        let l = l.rem_euclid(self.m as i64) as usize;
        self.values[k * self.m + l] = v;
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

/// Complex samples on the extended support `[-N_0 T, (N+1+N_0) T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedFrame {
    pub samples: Vec<Complex64>,
    /// Array index of `t = 0`.
    pub origin_offset: usize,
}

impl ExtendedFrame {
    pub fn zeros(cfg: &GridConfig) -> Self {
        Self {
            samples: vec![Complex64::new(0.0, 0.0); cfg.extended_len()],
            origin_offset: cfg.origin_offset(),
        }
    }

    /// Checks the length contract against `cfg`.
    pub fn check(&self, cfg: &GridConfig) -> Result<()> {
        if self.samples.len() != cfg.extended_len() || self.origin_offset != cfg.origin_offset() {
            return Err(Error::Config(format!(
                "frame has {} samples (origin {}), geometry expects {} (origin {})",
                self.samples.len(),
                self.origin_offset,
                cfg.extended_len(),
                cfg.origin_offset()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Signed sample index `ℓ` of array position `i`.
    pub fn sample_index(&self, i: usize) -> i64 {
        i as i64 - self.origin_offset as i64
    }

    /// Sampling instants `ℓ T_s` for every array position.
    pub fn times(&self, cfg: &GridConfig) -> Vec<f64> {
        let ts = cfg.sample_interval();
        (0..self.samples.len())
            .map(|i| self.sample_index(i) as f64 * ts)
            .collect()
    }
}

/// Dirichlet waveform `sin(Mπt/T) / (T sin(πt/T)) · e^{-jπt/T}`, equal to
/// `(1/T) Σ_{m=-M/2}^{M/2-1} e^{j2πmt/T}`.
pub fn dirichlet_waveform(t: f64, cfg: &GridConfig) -> Complex64 {
    let period = cfg.slot_duration;
    let m = cfg.n_subcarriers as f64;
    let den = (PI * t / period).sin();
    if den.abs() < DIRICHLET_SINGULAR_EPS {
        // For even M the limit is M/T at every multiple of T.
        return Complex64::new(m / period, 0.0);
    }
    let mag = (m * PI * t / period).sin() / (period * den);
    Complex64::from_polar(1.0, -PI * t / period) * mag
}

/// One frequency-shifted sinc pulse `sin(πMt/T)/(πt) · e^{-jπt/T}`.
pub fn sinc_pulse(t: f64, cfg: &GridConfig) -> Complex64 {
    let period = cfg.slot_duration;
    let m = cfg.n_subcarriers as f64;
    let x = PI * m * t / period;
    let mag = if x.abs() < 1e-8 {
        m / period
    } else {
        x.sin() / (PI * t)
    };
    Complex64::from_polar(1.0, -PI * t / period) * mag
}

/// Continuous-time transmit waveform `s(t)` of the pilot frame.
pub fn waveform(t: f64, cfg: &GridConfig, kind: SignalModelKind) -> Complex64 {
    let inv_n = 1.0 / cfg.n_slots as f64;
    match kind {
        SignalModelKind::IdealPeriodic => dirichlet_waveform(t, cfg) * inv_n,
        SignalModelKind::TruncatedSinc => truncated_sinc(t, cfg) * inv_n,
    }
}

/// `Σ_{n=0}^{N+1} p_T(t - nT)`.
///
/// Uses `sin(πM(t-nT)/T) = sin(πMt/T)` and `e^{-jπ(t-nT)/T} = (-1)^n e^{-jπt/T}`
/// (`M` even) so only one sine is evaluated per instant; the term whose
/// peak sits within `1e-6 T` of `t` is evaluated on its own.
fn truncated_sinc(t: f64, cfg: &GridConfig) -> Complex64 {
    let period = cfg.slot_duration;
    let m = cfg.n_subcarriers as f64;
    let peaks = cfg.transmitted_peaks();
    let common = (PI * m * t / period).sin();
    let mut acc = 0.0;
    let mut near: Option<usize> = None;
    for n in 0..peaks {
        let u = t - n as f64 * period;
        if u.abs() < 1e-6 * period {
            near = Some(n);
            continue;
        }
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign / (PI * u);
    }
    let mut out = Complex64::from_polar(1.0, -PI * t / period) * (common * acc);
    if let Some(n) = near {
        out += sinc_pulse(t - n as f64 * period, cfg);
    }
    out
}

pub fn pilot_dd_grid(cfg: &GridConfig) -> DDGrid {
    let mut grid = DDGrid::zeros(cfg.n_slots, cfg.n_subcarriers);
    grid.set(0, 0, Complex64::new(1.0, 0.0));
    grid
}

/// Inverse discrete Zak transform:
/// `x[nM + ℓ] = (1/N) Σ_k X[k, ℓ] e^{-j2πnk/N}`.
pub fn idzt(grid: &DDGrid, cfg: &GridConfig) -> Result<Vec<Complex64>> {
    let (n, m) = grid.dims();
    if n != cfg.n_slots || m != cfg.n_subcarriers {
        return Err(Error::Config(format!(
            "grid is {n}x{m}, geometry expects {}x{}",
            cfg.n_slots, cfg.n_subcarriers
        )));
    }
    let inv_n = 1.0 / n as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); n * m];
    for slot in 0..n {
        for l in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                let x = grid.values[k * m + l];
                if x != Complex64::new(0.0, 0.0) {
                    let phase = -2.0 * PI * ((slot * k) % n) as f64 / n as f64;
                    acc += x * Complex64::from_polar(1.0, phase);
                }
            }
            out[slot * m + l] = acc * inv_n;
        }
    }
    Ok(out)
}

/// Samples `s(ℓ T_s)` of the pilot waveform over the extended support.
pub fn transmit_samples(cfg: &GridConfig, kind: SignalModelKind) -> ExtendedFrame {
    let mut frame = ExtendedFrame::zeros(cfg);
    let times = frame.times(cfg);
    for (s, t) in frame.samples.iter_mut().zip(times) {
        *s = waveform(t, cfg, kind);
    }
    frame
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, m: usize) -> GridConfig {
        GridConfig::new(n, m, 1.0).unwrap()
    }

    /// Direct tone sum, independent of the closed form.
    fn tone_sum(t: f64, cfg: &GridConfig) -> Complex64 {
        let m = cfg.n_subcarriers as i64;
        (-m / 2..m / 2)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 * t / cfg.slot_duration))
            .sum::<Complex64>()
            / cfg.slot_duration
    }

    #[test]
    fn dirichlet_examples() {
        let c = cfg(32, 32);
        let d0 = dirichlet_waveform(0.0, &c);
        assert!((d0 - Complex64::new(32.0, 0.0)).norm() < 1e-12);
        assert!(dirichlet_waveform(1.0 / 32.0, &c).norm() < 1e-12);
        let d1 = dirichlet_waveform(1.0, &c);
        assert!((d1 - Complex64::new(32.0, 0.0)).norm() < 1e-12);
        // Limit from either side.
        for eps in [1e-9, -1e-9] {
            let v = dirichlet_waveform(1.0 + eps, &c);
            assert!((v - Complex64::new(32.0, 0.0)).norm() < 1e-5, "{v}");
        }
    }

    #[test]
    fn dirichlet_matches_tone_sum() {
        let c = cfg(8, 16);
        for i in 0..200 {
            let t = -3.0 + i as f64 * 0.0371;
            let a = dirichlet_waveform(t, &c);
            let b = tone_sum(t, &c);
            assert!((a - b).norm() < 1e-9, "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn dirichlet_zero_crossings() {
        let c = cfg(4, 16);
        for q in -40i64..40 {
            if q % 16 == 0 {
                continue;
            }
            let t = q as f64 / 16.0;
            assert!(dirichlet_waveform(t, &c).norm() < 1e-11, "q={q}");
        }
    }

    #[test]
    fn dirichlet_energy_over_one_period() {
        let c = cfg(4, 32);
        let ts = c.sample_interval();
        let energy: f64 = (0..c.samples_per_slot())
            .map(|l| dirichlet_waveform(l as f64 * ts, &c).norm_sqr() * ts)
            .sum();
        let expected = c.n_subcarriers as f64 / c.slot_duration.powi(2);
        assert!(((energy - expected) / expected).abs() < 1e-9);
    }

    #[test]
    fn pilot_grid_examples() {
        let g = pilot_dd_grid(&cfg(2, 2));
        assert_eq!(g.values(), &[1.0, 0.0, 0.0, 0.0].map(|x| Complex64::new(x, 0.0)));
        let g = pilot_dd_grid(&cfg(32, 32));
        assert_eq!(g.values().iter().filter(|v| v.norm() > 0.0).count(), 1);
        let energy: f64 = g.values().iter().map(|v| v.norm_sqr()).sum();
        assert_eq!(energy, 1.0);
    }

    #[test]
    fn idzt_examples() {
        let c = cfg(4, 4);
        let x = idzt(&pilot_dd_grid(&c), &c).unwrap();
        for (i, v) in x.iter().enumerate() {
            let want = if i % 4 == 0 { 0.25 } else { 0.0 };
            assert!((v - Complex64::new(want, 0.0)).norm() < 1e-15);
        }

        let x = idzt(&DDGrid::zeros(4, 4), &c).unwrap();
        assert!(x.iter().all(|v| v.norm() == 0.0));

        let c2 = cfg(2, 2);
        let mut g = DDGrid::zeros(2, 2);
        g.set(1, 0, Complex64::new(1.0, 0.0));
        let x = idzt(&g, &c2).unwrap();
        let want = [0.5, 0.0, -0.5, 0.0];
        for (v, w) in x.iter().zip(want) {
            assert!((v - Complex64::new(w, 0.0)).norm() < 1e-15);
        }

        assert!(matches!(idzt(&DDGrid::zeros(3, 4), &c), Err(Error::Config(_))));
    }

    #[test]
    fn transmit_samples_examples() {
        let c = cfg(32, 32);
        let tx = transmit_samples(&c, SignalModelKind::IdealPeriodic);
        assert_eq!(tx.len(), c.extended_len());
        assert_eq!(tx.origin_offset, 2 * 64);
        let at0 = tx.samples[tx.origin_offset];
        assert!((at0 - Complex64::new(1.0, 0.0)).norm() < 1e-12); // M/(N T)
        // t = T/M is two samples later at U_t = 2.
        assert!(tx.samples[tx.origin_offset + 2].norm() < 1e-12);
    }

    #[test]
    fn sinc_and_periodic_agree_at_frame_center() {
        let c = cfg(32, 32);
        let t = 16.0;
        let a = waveform(t, &c, SignalModelKind::IdealPeriodic);
        let b = waveform(t, &c, SignalModelKind::TruncatedSinc);
        assert!((a - b).norm() < 1e-3 * 32.0 / 32.0);
    }

    #[test]
    fn truncated_sinc_matches_direct_pulse_sum() {
        let c = cfg(8, 8);
        for i in 0..300 {
            let t = -2.0 + i as f64 * 0.0417;
            let direct: Complex64 = (0..c.transmitted_peaks())
                .map(|n| sinc_pulse(t - n as f64, &c))
                .sum::<Complex64>()
                / 8.0;
            let fast = waveform(t, &c, SignalModelKind::TruncatedSinc);
            assert!((direct - fast).norm() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(GridConfig::new(1, 32, 1.0).is_err());
        assert!(GridConfig::new(32, 31, 1.0).is_err());
        assert!(GridConfig::new(32, 32, 0.0).is_err());
        let mut c = GridConfig::default();
        c.tail_slots = 0;
        assert!(c.validate().is_err());
        assert!(GridConfig::default().validate().is_ok());
    }
}
