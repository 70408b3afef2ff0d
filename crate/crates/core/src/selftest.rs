//! Quick end-to-end checks run by `dd-prony selftest`.

use std::panic::{catch_unwind, AssertUnwindSafe};

use num_complex::Complex64;

use crate::channel::{apply_channel, sample_paths, Path, PathSet};
use crate::estimators::{delay_first, doppler_first, Candidate, CandidateSet, Source};
use crate::fusion::{merge_candidates, prune, EstimateSet, EstimatedPath, FusionParams};
use crate::linalg::CMatrix;
use crate::montecarlo::match_paths;
use crate::prony::{annihilating_filter, phase_to_doppler, polynomial_roots};
use crate::sampling::{fd_matrix, fd_samples, retained_td_matrix};
use crate::signal_model::{dirichlet_waveform, pilot_dd_grid, transmit_samples, ExtendedFrame, GridConfig, SignalModelKind};

type Check = (&'static str, fn() -> bool);

fn small() -> GridConfig {
    GridConfig::new(8, 8, 1.0).expect("valid grid")
}

fn near(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn waveform_peak() -> bool {
    let c = small();
    near(dirichlet_waveform(0.0, &c).norm(), 8.0, 1e-12) && near(dirichlet_waveform(1.0, &c).norm(), 8.0, 1e-9)
}

fn pilot_grid() -> bool {
    let g = pilot_dd_grid(&small());
    g.values().iter().filter(|v| v.norm() > 0.0).count() == 1 && g.get(0, 0) == Complex64::new(1.0, 0.0)
}

fn path_sampling() -> bool {
    let c = small();
    let a = sample_paths(5, 3, &c);
    let b = sample_paths(5, 3, &c);
    matches!((a, b), (Ok(a), Ok(b)) if a == b && a.iter().all(|p| p.validate(&c).is_ok()))
}

fn identity_channel() -> bool {
    let c = small();
    let kind = SignalModelKind::IdealPeriodic;
    let tx = transmit_samples(&c, kind);
    let one = PathSet::new(vec![Path::new(Complex64::new(1.0, 0.0), 0.0, 0.0)]);
    match apply_channel(&tx, &one, &c, kind) {
        Ok(rx) => rx.samples.iter().zip(&tx.samples).all(|(a, b)| (a - b).norm() < 1e-9),
        Err(_) => false,
    }
}

fn zero_spectrum() -> bool {
    let c = small();
    fd_samples(&ExtendedFrame::zeros(&c), &c).is_ok_and(|fd| fd.iter().all(|z| z.norm() == 0.0))
}

fn single_root() -> bool {
    let z = Complex64::from_polar(1.0, 0.7);
    let data = CMatrix::from_fn(6, 2, |i, j| z.powi(1 - j as i32 + i as i32));
    let Ok(a) = annihilating_filter(&data, 1) else { return false };
    let Ok(r) = polynomial_roots(&a) else { return false };
    r.roots.len() == 1 && (r.roots[0] - z).norm() < 1e-10
}

fn unit_phase_is_zero_doppler() -> bool {
    phase_to_doppler(Complex64::new(1.0, 0.0), 1.0).is_ok_and(|f| f == 0.0)
}

fn single_path_both_pipelines() -> bool {
    let c = small();
    let kind = SignalModelKind::IdealPeriodic;
    let truth = PathSet::new(vec![Path::new(Complex64::new(0.8, -0.3), 0.37, 0.21)]);
    let Ok(rx) = apply_channel(&transmit_samples(&c, kind), &truth, &c, kind) else {
        return false;
    };
    let hit = |s: &CandidateSet, tol: f64| s.pairs.iter().any(|p| near(p.delay, 0.37, tol) && near(p.doppler, 0.21, tol));
    let df = retained_td_matrix(&rx, &c).and_then(|r| doppler_first(&r, &c));
    let dl = fd_samples(&rx, &c)
        .and_then(|fd| fd_matrix(&fd, &c))
        .and_then(|r| delay_first(&r, &c));
    matches!((df, dl), (Ok((a, _)), Ok((b, _))) if hit(&a, 1e-6) && hit(&b, 1e-3))
}

fn merge_close_pair() -> bool {
    let one = |source, d, f| CandidateSet {
        source,
        pairs: vec![Candidate {
            delay: d,
            doppler: f,
            energy: 1.0,
            degenerate: false,
        }],
    };
    let out = merge_candidates(
        &one(Source::DopplerFirst, 0.30, 0.20),
        &one(Source::DelayFirst, 0.31, 0.21),
        &FusionParams::default(),
        1.0,
    );
    out.len() == 1 && near(out[0].0, 0.305, 1e-12) && near(out[0].1, 0.205, 1e-12)
}

fn prune_weak_path() -> bool {
    let gains = [Complex64::new(1.0, 0.0), Complex64::new(0.005, 0.0)];
    prune(&[(0.1, 0.0), (0.2, 0.0)], &gains, &FusionParams::default()).is_ok_and(|e| e.count() == 1)
}

fn matching_laws() -> bool {
    let truth: PathSet = [(0.2, 0.0), (0.4, 0.0)]
        .iter()
        .map(|&(t, f)| Path::new(Complex64::new(1.0, 0.0), t, f))
        .collect();
    let est = |pts: &[(f64, f64)]| EstimateSet {
        paths: pts
            .iter()
            .map(|&(delay, doppler)| EstimatedPath {
                delay,
                doppler,
                gain: Complex64::new(1.0, 0.0),
            })
            .collect(),
        ..Default::default()
    };
    match_paths(&truth, &est(&[(0.2, 0.0), (0.4, 0.0)]), 0.5, 0.5, 1.0) == 2
        && match_paths(&truth, &est(&[]), 0.5, 0.5, 1.0) == 0
        && match_paths(&truth, &est(&[(0.3, 0.0)]), 0.5, 0.5, 1.0) == 1
}

const CHECKS: [Check; 12] = [
    ("signal_model: waveform peak is M/T", waveform_peak),
    ("signal_model: pilot is a single DD impulse", pilot_grid),
    ("channel: path sampling is seeded and in range", path_sampling),
    ("channel: identity channel", identity_channel),
    ("sampling: zero frame has zero spectrum", zero_spectrum),
    ("prony: single exponential root", single_root),
    ("prony: unit root maps to zero Doppler", unit_phase_is_zero_doppler),
    ("estimators: single noiseless path", single_path_both_pipelines),
    ("fusion: close pair merges", merge_close_pair),
    ("fusion: weak path pruned", prune_weak_path),
    ("montecarlo: one-to-one matching", matching_laws),
    ("fusion: zero frame gives no paths", zero_input_estimate),
];

fn zero_input_estimate() -> bool {
    let c = small();
    crate::fusion::parallel_estimate(&ExtendedFrame::zeros(&c), &c, &FusionParams::default(), SignalModelKind::IdealPeriodic)
        .is_ok_and(|e| e.count() == 0)
}

/// Runs every check; a panicking check counts as a failure.
pub fn run() -> Vec<(&'static str, bool)> {
    CHECKS
        .iter()
        .map(|&(name, f)| (name, catch_unwind(AssertUnwindSafe(f)).unwrap_or(false)))
        .collect()
}
