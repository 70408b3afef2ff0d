//! Delay-Doppler channel estimation from an OTFS pilot frame with the
//! two-stage Prony method, run in both orders (Doppler-first and
//! delay-first) and fused.
//!
//! The crate is organised bottom-up:
//!
//! * [`signal_model`] synthesises the pilot frame and the Dirichlet waveform.
//! * [`channel`] applies a multipath Doppler channel and AWGN.
//! * [`sampling`] turns a received frame into the time-domain and
//!   frequency-domain matrices both pipelines factor.
//! * [`prony`] holds the shared numerical kernels.
//! * [`estimators`] runs the two pipelines.
//! * [`fusion`] merges their candidates, fits gains and prunes.
//! * [`montecarlo`] reproduces detection-rate sweeps.
//! * [`cli`] is the command-line front end.
//!
//! Internally every quantity is in SI units (seconds, hertz); conversion to
//! the normalised units `delay / T` and `doppler * T` happens at the I/O
//! boundary.

pub mod channel;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod fusion;
pub mod linalg;
pub mod montecarlo;
pub mod prony;
pub mod sampling;
pub mod selftest;
pub mod signal_model;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use channel::{NoiseSpec, Path, PathSet};
pub use estimators::{Candidate, CandidateSet, Source, StageTrace};
pub use fusion::{EstimateSet, EstimatedPath, FusionParams};
pub use montecarlo::{DetectionReport, Method, Scenario};
pub use signal_model::{ExtendedFrame, GridConfig, SignalModelKind};
