//! Reshaping a received frame into the matrices the two pipelines factor.
//!
//! * [`TDMatrix`]: `N x U_t M`, row `n` holds slot `n` of the retained window
//!   `t ∈ [T, (N+1)T)`. Tails are dropped.
//! * [`FDMatrix`]: `M x U_f N`, built from the zero-padded DFT of the full
//!   extended frame (tails kept).

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::signal_model::{ExtendedFrame, GridConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TDMatrix(pub CMatrix);

/// Row `i` is subcarrier `m = i - M/2`, column `j` is fine bin
/// `k = j - U_f N / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FDMatrix(pub CMatrix);

impl FDMatrix {
    /// Entry at signed indices `(m, k)`.
    pub fn at(&self, m: i64, k: i64) -> Complex64 {
        let rows = self.0.nrows() as i64;
        let cols = self.0.ncols() as i64;
        self.0[((m + rows / 2) as usize, (k + cols / 2) as usize)]
    }
}

/// Retained-window samples reshaped row-major into `N x U_t M`.
pub fn retained_td_matrix(rx: &ExtendedFrame, cfg: &GridConfig) -> Result<TDMatrix> {
    rx.check(cfg)?;
    let per_slot = cfg.samples_per_slot();
    let start = rx.origin_offset + per_slot;
    let window = &rx.samples[start..start + cfg.n_slots * per_slot];
    Ok(TDMatrix(CMatrix::from_row_slice(cfg.n_slots, per_slot, window)))
}

/// Frequency samples `R_FD[k] = T_s Σ_ℓ r[ℓ] e^{-j2πkℓ/L}`,
/// `L = U_f U_t N M`, over the full extended support.
///
/// The signed sample index `ℓ` is placed at position `ℓ mod L` of the
/// zero-padded buffer, so bin `k` is the transform at frequency `k Δf`.
/// Small grids whose extended support exceeds `L` wrap around and add,
/// which still samples the transform exactly.
/// The kernel uses the negative exponent: with it a path at delay `τ` puts
/// the phase `e^{-j2π m τ / T}` on subcarrier row `m`. The opposite sign
/// mirrors the spectrum and returns `(T - τ, -f_D)` from the delay-first
/// pipeline.
pub fn fd_samples(rx: &ExtendedFrame, cfg: &GridConfig) -> Result<Vec<Complex64>> {
    rx.check(cfg)?;
    let len = cfg.fd_len();
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (i, &s) in rx.samples.iter().enumerate() {
        let pos = rx.sample_index(i).rem_euclid(len as i64) as usize;
        buf[pos] += s;
    }
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let ts = cfg.sample_interval();
    buf.iter_mut().for_each(|z| *z *= ts);
    Ok(buf)
}

/// `R'_{m,k} = R_FD[(m U_f N + k) mod L]`.
pub fn fd_matrix(fd: &[Complex64], cfg: &GridConfig) -> Result<FDMatrix> {
    let len = cfg.fd_len();
    if fd.len() != len {
        return Err(Error::Config(format!(
            "expected {len} frequency samples, got {}",
            fd.len()
        )));
    }
    let rows = cfg.n_subcarriers;
    let cols = cfg.bins_per_subcarrier();
    let m0 = -(rows as i64 / 2);
    let k0 = -(cols as i64 / 2);
    Ok(FDMatrix(CMatrix::from_fn(rows, cols, |i, j| {
        let idx = (m0 + i as i64) * cols as i64 + k0 + j as i64;
        fd[idx.rem_euclid(len as i64) as usize]
    })))
}
