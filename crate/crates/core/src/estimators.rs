//! The two two-stage pipelines.
//!
//! * Doppler-first factors the time-domain matrix `R = E V`, where `E`
//!   carries only Dopplers, estimates the Dopplers with an order `N-1`
//!   annihilating filter, then reads one delay per Doppler from the
//!   demodulated spectrum.
//! * Delay-first does the same on the frequency-domain matrix
//!   `R' = E' V'`, where `E'` carries only delays, with order `M-1`.
//!
//! Both return one candidate per polynomial root, so `N-1` and `M-1`
//! candidates respectively regardless of how many paths are present.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::CMatrix;
use crate::prony::{
    annihilating_filter, ls_separate, phase_to_delay, phase_to_doppler, polynomial_roots,
    single_mode_ratio, RootSet,
};
use crate::sampling::{FDMatrix, TDMatrix};
use crate::signal_model::GridConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    DopplerFirst,
    DelayFirst,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::DopplerFirst => "doppler-first",
            Source::DelayFirst => "delay-first",
        }
    }
}

/// One (delay, Doppler) pair in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub delay: f64,
    pub doppler: f64,
    /// In-band energy of the stage-2 spectrum.
    pub energy: f64,
    /// The root or its spectrum carried no usable phase.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub source: Source,
    pub pairs: Vec<Candidate>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `(delay, doppler)` of every candidate, in order.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.pairs.iter().map(|c| (c.delay, c.doppler)).collect()
    }
}

/// Intermediate quantities of one pipeline run.
///
/// For Doppler-first: the Doppler roots, `V̂`, `Ṽ`, and the `U_t M`-point
/// spectra `Y_p`. For delay-first: the delay roots, `V̂'`, `Ṽ'`, and the
/// `U_f N`-point sequences `Y'_p`.
#[derive(Debug, Clone)]
pub struct StageTrace {
    pub outer_roots: RootSet,
    pub separated: CMatrix,
    pub demodulated: CMatrix,
    pub spectra: Vec<Vec<Complex64>>,
}

/// Doppler-first pipeline on the `N x U_t M` retained matrix.
pub fn doppler_first(r: &TDMatrix, cfg: &GridConfig) -> Result<(CandidateSet, StageTrace)> {
    let r = &r.0;
    let n = cfg.n_slots;
    let cols = cfg.samples_per_slot();
    assert_eq!(r.shape(), (n, cols), "TD matrix shape");
    let period = cfg.slot_duration;
    let ts = cfg.sample_interval();

    // Stage 1: rows of T are the columns of R in reversed slot order.
    let t = CMatrix::from_fn(cols, n, |l, j| r[(n - 1 - j, l)]);
    let filter = annihilating_filter(&t, n - 1)?;
    let roots = if filter.degenerate {
        RootSet {
            roots: vec![Complex64::new(0.0, 0.0); n - 1],
        }
    } else {
        polynomial_roots(&filter)?
    };
    let dopplers: Vec<Option<f64>> = roots
        .roots
        .iter()
        .map(|&z| phase_to_doppler(z, period).ok())
        .collect();
    let f_hat: Vec<f64> = dopplers.iter().map(|f| f.unwrap_or(0.0)).collect();

    // Separate, then strip each Doppler's phase ramp within the slot.
    let e_hat = CMatrix::from_fn(n, f_hat.len(), |row, p| {
        Complex64::from_polar(1.0, 2.0 * PI * f_hat[p] * row as f64 * period)
    });
    let v_hat = ls_separate(&e_hat, r)?;
    let v_tilde = CMatrix::from_fn(v_hat.nrows(), cols, |p, l| {
        v_hat[(p, l)] * Complex64::from_polar(1.0, -2.0 * PI * f_hat[p] * l as f64 * ts)
    });

    // Stage 2: U_t M-point DFT, in-band bins m = -M/2 .. M/2-1 in order.
    let fft = FftPlanner::new().plan_fft_forward(cols);
    let half = cfg.n_subcarriers as i64 / 2;
    let band: Vec<usize> = (-half..half).map(|m| m.rem_euclid(cols as i64) as usize).collect();
    let mut spectra = Vec::with_capacity(f_hat.len());
    let mut pairs = Vec::with_capacity(f_hat.len());
    for p in 0..f_hat.len() {
        let mut y: Vec<Complex64> = v_tilde.row(p).iter().copied().collect();
        fft.process(&mut y);
        let in_band: Vec<Complex64> = band.iter().map(|&i| y[i]).collect();
        let energy = in_band.iter().map(|z| z.norm_sqr()).sum();
        let delay = single_mode_ratio(&in_band)
            .and_then(|z| phase_to_delay(z, period))
            .ok();
        pairs.push(Candidate {
            delay: delay.unwrap_or(0.0),
            doppler: f_hat[p],
            energy,
            degenerate: filter.degenerate || dopplers[p].is_none() || delay.is_none(),
        });
        spectra.push(y);
    }

    Ok((
        CandidateSet {
            source: Source::DopplerFirst,
            pairs,
        },
        StageTrace {
            outer_roots: roots,
            separated: v_hat,
            demodulated: v_tilde,
            spectra,
        },
    ))
}

/// Modulus of root `p` raised to `row`, scaled so the column peaks at 1.
///
/// Off-circle roots often share the phase of a true root; keeping their
/// moduli stops those columns of the separation matrix from coinciding.
fn root_decay(roots: &RootSet, p: usize, row: usize, rows: usize) -> f64 {
    let ln = roots.roots[p].norm().ln();
    if !ln.is_finite() {
        return 1.0;
    }
    let peak = if ln > 0.0 { (rows - 1) as f64 * ln } else { 0.0 };
    (row as f64 * ln - peak).exp()
}

/// Slot indices `n` whose entries of `Y'_p[n]` carry the Doppler phase
/// progression: the transmitted peaks `0..=N+1`, capped at `U_f N`.
pub fn delay_first_slots(cfg: &GridConfig) -> std::ops::Range<usize> {
    0..cfg.transmitted_peaks().min(cfg.bins_per_subcarrier())
}

/// Delay-first pipeline on the `M x U_f N` frequency-domain matrix.
pub fn delay_first(rp: &FDMatrix, cfg: &GridConfig) -> Result<(CandidateSet, StageTrace)> {
    let rp = &rp.0;
    let m = cfg.n_subcarriers;
    let cols = cfg.bins_per_subcarrier();
    assert_eq!(rp.shape(), (m, cols), "FD matrix shape");
    let period = cfg.slot_duration;
    let df = cfg.freq_bin();
    let m0 = -(m as i64 / 2);
    let k0 = -(cols as i64 / 2);

    // Stage 1: rows of T' are the columns of R' in reversed subcarrier order.
    let t = CMatrix::from_fn(cols, m, |k, j| rp[(m - 1 - j, k)]);
    let filter = annihilating_filter(&t, m - 1)?;
    let roots = if filter.degenerate {
        RootSet {
            roots: vec![Complex64::new(0.0, 0.0); m - 1],
        }
    } else {
        polynomial_roots(&filter)?
    };
    let delays: Vec<Option<f64>> = roots
        .roots
        .iter()
        .map(|&z| phase_to_delay(z, period).ok())
        .collect();
    let t_hat: Vec<f64> = delays.iter().map(|d| d.unwrap_or(0.0)).collect();

    let e_hat = CMatrix::from_fn(m, t_hat.len(), |row, p| {
        let sub = (m0 + row as i64) as f64;
        Complex64::from_polar(root_decay(&roots, p, row, m), -2.0 * PI * t_hat[p] * sub / period)
    });
    let v_hat = ls_separate(&e_hat, rp)?;
    // The delay ramp across fine bins is e^{-j2π t k Δf}, Δf = 1/(U_f N T).
    let v_tilde = CMatrix::from_fn(v_hat.nrows(), cols, |p, j| {
        let k = (k0 + j as i64) as f64;
        v_hat[(p, j)] * Complex64::from_polar(1.0, 2.0 * PI * t_hat[p] * k * df)
    });

    // Stage 2: Y'_p[n] = Σ_k Ṽ'_{p,k} e^{+j2πnk/(U_f N)}; the kernel is
    // periodic in k so the signed bins go to position k mod U_f N.
    let ifft = FftPlanner::new().plan_fft_inverse(cols);
    let slots = delay_first_slots(cfg);
    let mut spectra = Vec::with_capacity(t_hat.len());
    let mut pairs = Vec::with_capacity(t_hat.len());
    for p in 0..t_hat.len() {
        let mut y = vec![Complex64::new(0.0, 0.0); cols];
        for j in 0..cols {
            let pos = (k0 + j as i64).rem_euclid(cols as i64) as usize;
            y[pos] = v_tilde[(p, j)];
        }
        ifft.process(&mut y);
        let seq = &y[slots.clone()];
        let energy = seq.iter().map(|z| z.norm_sqr()).sum();
        let doppler = single_mode_ratio(seq)
            .and_then(|z| phase_to_doppler(z, period))
            .ok();
        pairs.push(Candidate {
            delay: t_hat[p],
            doppler: doppler.unwrap_or(0.0),
            energy,
            degenerate: filter.degenerate || delays[p].is_none() || doppler.is_none(),
        });
        spectra.push(y);
    }

    Ok((
        CandidateSet {
            source: Source::DelayFirst,
            pairs,
        },
        StageTrace {
            outer_roots: roots,
            separated: v_hat,
            demodulated: v_tilde,
            spectra,
        },
    ))
}
