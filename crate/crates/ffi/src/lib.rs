//! C ABI for the dd-prony estimator.
//!
//! Objects are opaque handles created by `ddp_*_new`/`ddp_frame_*`/
//! `ddp_estimate_*` and released with the matching `*_free`. Every fallible
//! call returns a [`DdpStatus`]; on failure [`ddp_last_error`] describes it.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dd_prony::channel::{add_awgn, apply_channel, NoiseSpec, Path, PathSet};
use dd_prony::estimators::{delay_first, doppler_first, CandidateSet, Source};
use dd_prony::fusion::{FusionParams, MergeRule};
use dd_prony::montecarlo::{estimate_with, Method};
use dd_prony::sampling::{fd_matrix, fd_samples, retained_td_matrix};
use dd_prony::signal_model::{transmit_samples, ExtendedFrame, GridConfig, SignalModelKind};
use dd_prony::{EstimateSet, Error};
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Degenerate = 4,
    Numerical = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdpModel {
    IdealPeriodic = 0,
    TruncatedSinc = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdpMethod {
    DopplerFirst = 0,
    DelayFirst = 1,
    Parallel = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdpMergeRule {
    Pooled = 0,
    CrossPairs = 1,
}

/// One path in normalised units.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdpPath {
    pub delay_over_t: f64,
    pub doppler_times_t: f64,
    pub gain_re: f64,
    pub gain_im: f64,
}

/// One raw pipeline candidate in normalised units.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdpCandidate {
    pub delay_over_t: f64,
    pub doppler_times_t: f64,
    pub energy: f64,
    /// Non-zero when the candidate carries no usable estimate.
    pub degenerate: u8,
    pub source: DdpMethod,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdpFusionParams {
    pub delta_t: f64,
    pub delta_f: f64,
    pub delta_alpha: f64,
    pub merge_rule: DdpMergeRule,
}

pub struct DdpGrid {
    cfg: GridConfig,
}

pub struct DdpFrame {
    cfg: GridConfig,
    frame: ExtendedFrame,
}

pub struct DdpEstimate {
    period: f64,
    set: EstimateSet,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(DdpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Config(_) => DdpStatus::Config,
            Error::Argument(_) => DdpStatus::InvalidArgument,
            Error::Degenerate(_) => DdpStatus::Degenerate,
            Error::RootNonConvergence { .. } => DdpStatus::Numerical,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => DdpStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DdpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DdpStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DdpStatus::Panic
        }
    }
}

fn null() -> Failure {
    Failure(DdpStatus::NullPointer, "null pointer argument".into())
}

fn invalid(msg: &str) -> Failure {
    Failure(DdpStatus::InvalidArgument, msg.into())
}

unsafe fn obj<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(null)
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null());
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn drop_handle<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn model(m: DdpModel) -> SignalModelKind {
    match m {
        DdpModel::IdealPeriodic => SignalModelKind::IdealPeriodic,
        DdpModel::TruncatedSinc => SignalModelKind::TruncatedSinc,
    }
}

fn method(m: DdpMethod) -> Method {
    match m {
        DdpMethod::DopplerFirst => Method::DopplerFirst,
        DdpMethod::DelayFirst => Method::DelayFirst,
        DdpMethod::Parallel => Method::Parallel,
    }
}

unsafe fn fusion(p: *const DdpFusionParams) -> Result<FusionParams, Failure> {
    let Some(p) = p.as_ref() else {
        return Ok(FusionParams::default());
    };
    let params = FusionParams {
        delta_t: p.delta_t,
        delta_f: p.delta_f,
        delta_alpha: p.delta_alpha,
        merge_rule: match p.merge_rule {
            DdpMergeRule::Pooled => MergeRule::Pooled,
            DdpMergeRule::CrossPairs => MergeRule::CrossPairs,
        },
    };
    params.validate()?;
    Ok(params)
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ddp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn ddp_fusion_params_default() -> DdpFusionParams {
    let d = FusionParams::default();
    DdpFusionParams {
        delta_t: d.delta_t,
        delta_f: d.delta_f,
        delta_alpha: d.delta_alpha,
        merge_rule: DdpMergeRule::Pooled,
    }
}

/// Grid with `N` slots, `M` subcarriers and slot duration `T`; the
/// upsampling factors and tail length take their defaults (2, 2, 2).
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ddp_grid_new(n: usize, m: usize, slot_duration: f64, out: *mut *mut DdpGrid) -> DdpStatus {
    guard(|| {
        let cfg = GridConfig::new(n, m, slot_duration)?;
        put(out, DdpGrid { cfg })
    })
}

/// Grid with every geometry parameter explicit.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ddp_grid_new_ext(
    n: usize,
    m: usize,
    slot_duration: f64,
    upsample_time: usize,
    upsample_freq: usize,
    tail_slots: usize,
    out: *mut *mut DdpGrid,
) -> DdpStatus {
    guard(|| {
        let cfg = GridConfig {
            n_slots: n,
            n_subcarriers: m,
            slot_duration,
            upsample_time,
            upsample_freq,
            tail_slots,
        };
        cfg.validate()?;
        put(out, DdpGrid { cfg })
    })
}

/// Samples in a frame on this grid, or 0 for a null grid.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ddp_grid_extended_len(grid: *const DdpGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.cfg.extended_len())
}

/// # Safety
/// `grid` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ddp_grid_free(grid: *mut DdpGrid) {
    drop_handle(grid);
}

/// Clean pilot frame.
///
/// # Safety
/// `grid` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ddp_frame_transmit(grid: *const DdpGrid, kind: DdpModel, out: *mut *mut DdpFrame) -> DdpStatus {
    guard(|| {
        let cfg = obj(grid)?.cfg;
        put(
            out,
            DdpFrame {
                cfg,
                frame: transmit_samples(&cfg, model(kind)),
            },
        )
    })
}

/// Frame from caller samples; `len` must equal [`ddp_grid_extended_len`].
///
/// # Safety
/// `re` and `im` must each point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn ddp_frame_from_samples(
    grid: *const DdpGrid,
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut DdpFrame,
) -> DdpStatus {
    guard(|| {
        let cfg = obj(grid)?.cfg;
        if re.is_null() || im.is_null() {
            return Err(null());
        }
        let mut frame = ExtendedFrame::zeros(&cfg);
        if len != frame.len() {
            return Err(invalid(&format!("expected {} samples, got {len}", frame.len())));
        }
        let (re, im) = (std::slice::from_raw_parts(re, len), std::slice::from_raw_parts(im, len));
        for ((s, &r), &i) in frame.samples.iter_mut().zip(re).zip(im) {
            *s = Complex64::new(r, i);
        }
        put(out, DdpFrame { cfg, frame })
    })
}

/// Noiseless multipath response to the transmit frame `tx`.
///
/// # Safety
/// `paths` must point to `count` readable entries.
#[no_mangle]
pub unsafe extern "C" fn ddp_frame_apply_channel(
    tx: *const DdpFrame,
    paths: *const DdpPath,
    count: usize,
    kind: DdpModel,
    out: *mut *mut DdpFrame,
) -> DdpStatus {
    guard(|| {
        let tx = obj(tx)?;
        if paths.is_null() && count > 0 {
            return Err(null());
        }
        let t = tx.cfg.slot_duration;
        let list = if count == 0 { &[][..] } else { std::slice::from_raw_parts(paths, count) };
        let set: PathSet = list
            .iter()
            .map(|p| Path::new(Complex64::new(p.gain_re, p.gain_im), p.delay_over_t * t, p.doppler_times_t / t))
            .collect();
        for p in set.iter() {
            p.validate(&tx.cfg)?;
        }
        let frame = apply_channel(&tx.frame, &set, &tx.cfg, model(kind))?;
        put(out, DdpFrame { cfg: tx.cfg, frame })
    })
}

/// Copy of `frame` with seeded complex Gaussian noise at `snr_db`.
///
/// # Safety
/// `frame` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ddp_frame_add_awgn(
    frame: *const DdpFrame,
    snr_db: f64,
    seed: u64,
    out: *mut *mut DdpFrame,
) -> DdpStatus {
    guard(|| {
        let f = obj(frame)?;
        if !snr_db.is_finite() {
            return Err(invalid("SNR must be finite"));
        }
        let noisy = add_awgn(&f.frame, &NoiseSpec::with_snr(snr_db, seed), &f.cfg)?;
        put(out, DdpFrame { cfg: f.cfg, frame: noisy })
    })
}

/// # Safety
/// `frame` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ddp_frame_len(frame: *const DdpFrame) -> usize {
    frame.as_ref().map_or(0, |f| f.frame.len())
}

/// Copies the samples out; `len` must equal [`ddp_frame_len`].
///
/// # Safety
/// `re` and `im` must each point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ddp_frame_get(frame: *const DdpFrame, re: *mut f64, im: *mut f64, len: usize) -> DdpStatus {
    guard(|| {
        let f = obj(frame)?;
        if re.is_null() || im.is_null() {
            return Err(null());
        }
        if len != f.frame.len() {
            return Err(invalid(&format!("frame has {} samples, buffer {len}", f.frame.len())));
        }
        let (re, im) = (std::slice::from_raw_parts_mut(re, len), std::slice::from_raw_parts_mut(im, len));
        for (i, s) in f.frame.samples.iter().enumerate() {
            re[i] = s.re;
            im[i] = s.im;
        }
        Ok(())
    })
}

/// # Safety
/// `frame` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ddp_frame_free(frame: *mut DdpFrame) {
    drop_handle(frame);
}

/// Estimates paths with one method; `params` may be null for defaults.
///
/// # Safety
/// `frame` must be a live handle, `params` null or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ddp_estimate(
    frame: *const DdpFrame,
    which: DdpMethod,
    params: *const DdpFusionParams,
    kind: DdpModel,
    out: *mut *mut DdpEstimate,
) -> DdpStatus {
    guard(|| {
        let f = obj(frame)?;
        let params = fusion(params)?;
        let set = estimate_with(method(which), &f.frame, &f.cfg, &params, model(kind))?;
        put(
            out,
            DdpEstimate {
                period: f.cfg.slot_duration,
                set,
            },
        )
    })
}

/// [`ddp_estimate`] with the parallel method.
///
/// # Safety
/// As for [`ddp_estimate`].
#[no_mangle]
pub unsafe extern "C" fn ddp_estimate_parallel(
    frame: *const DdpFrame,
    params: *const DdpFusionParams,
    kind: DdpModel,
    out: *mut *mut DdpEstimate,
) -> DdpStatus {
    ddp_estimate(frame, DdpMethod::Parallel, params, kind, out)
}

/// # Safety
/// `est` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ddp_estimate_len(est: *const DdpEstimate) -> usize {
    est.as_ref().map_or(0, |e| e.set.paths.len())
}

/// # Safety
/// `est` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ddp_estimate_get(est: *const DdpEstimate, index: usize, out: *mut DdpPath) -> DdpStatus {
    guard(|| {
        let e = obj(est)?;
        if out.is_null() {
            return Err(null());
        }
        let p = e
            .set
            .paths
            .get(index)
            .ok_or_else(|| invalid(&format!("index {index} out of range ({} paths)", e.set.paths.len())))?;
        *out = DdpPath {
            delay_over_t: p.delay / e.period,
            doppler_times_t: p.doppler * e.period,
            gain_re: p.gain.re,
            gain_im: p.gain.im,
        };
        Ok(())
    })
}

/// # Safety
/// `est` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ddp_estimate_free(est: *mut DdpEstimate) {
    drop_handle(est);
}

/// Raw pipeline candidates before fusion. With `Parallel` both lists are
/// written, Doppler-first first. `written` receives the number available;
/// at most `capacity` entries are copied into `out`, which may be null when
/// `capacity` is 0.
///
/// # Safety
/// `out` must point to `capacity` writable entries; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddp_candidates(
    frame: *const DdpFrame,
    which: DdpMethod,
    out: *mut DdpCandidate,
    capacity: usize,
    written: *mut usize,
) -> DdpStatus {
    guard(|| {
        let f = obj(frame)?;
        if written.is_null() || (out.is_null() && capacity > 0) {
            return Err(null());
        }
        let (cfg, rx) = (&f.cfg, &f.frame);
        let df = || -> Result<CandidateSet, Failure> { Ok(doppler_first(&retained_td_matrix(rx, cfg)?, cfg)?.0) };
        let dl = || -> Result<CandidateSet, Failure> { Ok(delay_first(&fd_matrix(&fd_samples(rx, cfg)?, cfg)?, cfg)?.0) };
        let sets = match which {
            DdpMethod::DopplerFirst => vec![df()?],
            DdpMethod::DelayFirst => vec![dl()?],
            DdpMethod::Parallel => vec![df()?, dl()?],
        };
        let t = cfg.slot_duration;
        let all: Vec<DdpCandidate> = sets
            .iter()
            .flat_map(|s| {
                let source = match s.source {
                    Source::DopplerFirst => DdpMethod::DopplerFirst,
                    Source::DelayFirst => DdpMethod::DelayFirst,
                };
                s.pairs.iter().map(move |c| DdpCandidate {
                    delay_over_t: c.delay / t,
                    doppler_times_t: c.doppler * t,
                    energy: c.energy,
                    degenerate: u8::from(c.degenerate),
                    source,
                })
            })
            .collect();
        *written = all.len();
        let n = all.len().min(capacity);
        if n > 0 {
            ptr::copy_nonoverlapping(all.as_ptr(), out, n);
        }
        Ok(())
    })
}
