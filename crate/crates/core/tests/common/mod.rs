#![allow(dead_code)]

use dd_prony::channel::{add_awgn, apply_channel, NoiseSpec, Path, PathSet};
use dd_prony::estimators::{Candidate, CandidateSet, Source};
use dd_prony::fusion::{amplitude_fit, merge_candidates, prune, regressors, FusionParams};
use dd_prony::signal_model::{transmit_samples, GridConfig, SignalModelKind};
use dd_prony::Complex64;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub type Points = Vec<(f64, f64)>;

pub fn candidate_set(source: Source, pts: &[(f64, f64)]) -> CandidateSet {
    CandidateSet {
        source,
        pairs: pts
            .iter()
            .map(|&(delay, doppler)| Candidate {
                delay,
                doppler,
                energy: 1.0,
                degenerate: false,
            })
            .collect(),
    }
}

/// Two candidate lists of up to `N - 1` and `M - 1` points (N = M = 32),
/// squeezed into a random fraction of the domain so merges are frequent.
pub fn candidate_lists() -> impl Strategy<Value = (Points, Points)> {
    (0.05..1.0f64).prop_flat_map(|s| {
        let pt = (0.0..s, -0.5 * s..0.5 * s);
        (
            prop::collection::vec(pt.clone(), 0..=31),
            prop::collection::vec(pt, 0..=31),
        )
    })
}

pub fn check_merge_termination((a, b): (Points, Points)) -> Result<(), TestCaseError> {
    let p = FusionParams::default();
    let n = a.len() + b.len();
    let out = merge_candidates(
        &candidate_set(Source::DopplerFirst, &a),
        &candidate_set(Source::DelayFirst, &b),
        &p,
        1.0,
    );
    let merges = n - out.len();
    prop_assert!(merges <= 32 + 32 - 3);
    prop_assert!(n == 0 || !out.is_empty());
    for i in 0..out.len() {
        for j in i + 1..out.len() {
            let close = (out[i].0 - out[j].0).abs() < p.delta_t && (out[i].1 - out[j].1).abs() < p.delta_f;
            prop_assert!(!close, "{:?} and {:?} left unmerged", out[i], out[j]);
        }
    }
    Ok(())
}

pub fn gains_and_thresholds() -> impl Strategy<Value = (Vec<(f64, f64)>, f64, f64)> {
    (
        prop::collection::vec((0.0..2.0f64, -3.2..3.2f64), 1..40),
        0.001..0.999f64,
        0.001..0.999f64,
    )
}

pub fn check_prune_monotone((polar, d1, d2): (Vec<(f64, f64)>, f64, f64)) -> Result<(), TestCaseError> {
    let gains: Vec<Complex64> = polar.iter().map(|&(r, th)| Complex64::from_polar(r, th)).collect();
    let theta: Vec<(f64, f64)> = (0..gains.len()).map(|i| (i as f64 / 64.0, 0.0)).collect();
    let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
    let count = |d: f64| {
        let p = FusionParams {
            delta_alpha: d,
            ..Default::default()
        };
        prune(&theta, &gains, &p).map(|e| e.count())
    };
    let (n_lo, n_hi) = (count(lo).unwrap(), count(hi).unwrap());
    prop_assert!(n_hi <= n_lo, "{n_hi} survivors at {hi} vs {n_lo} at {lo}");
    Ok(())
}

pub type LsCase = (Vec<(f64, f64, f64, f64)>, Points, u64, bool);

/// Random true paths on a small grid, a random pair set to fit, and noise.
pub fn ls_cases() -> impl Strategy<Value = LsCase> {
    (
        prop::collection::vec((0.01..0.99f64, -0.49..0.49f64, -1.0..1.0f64, -1.0..1.0f64), 1..4),
        prop::collection::vec((0.01..0.99f64, -0.49..0.49f64), 1..6),
        any::<u64>(),
        any::<bool>(),
    )
}

pub fn check_ls_orthogonal((paths, theta, seed, sinc): LsCase) -> Result<(), TestCaseError> {
    let cfg = GridConfig::new(8, 8, 1.0).unwrap();
    let kind = if sinc {
        SignalModelKind::TruncatedSinc
    } else {
        SignalModelKind::IdealPeriodic
    };
    let truth: PathSet = paths
        .iter()
        .map(|&(t, f, re, im)| Path::new(Complex64::new(re, im), t, f))
        .collect();
    let clean = apply_channel(&transmit_samples(&cfg, kind), &truth, &cfg, kind).unwrap();
    let rx = add_awgn(&clean, &NoiseSpec::with_snr(20.0, seed), &cfg).unwrap();
    let fit = amplitude_fit(&theta, &rx, &cfg, kind).unwrap();
    let a = regressors(&theta, &cfg, kind);
    let mut res = rx.samples.clone();
    for (p, g) in fit.gains.iter().enumerate() {
        for (r, x) in res.iter_mut().zip(a.column(p).iter()) {
            *r -= g * x;
        }
    }
    let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let (rn, bn) = (norm(&res), norm(&rx.samples));
    for p in 0..theta.len() {
        let col: Vec<Complex64> = a.column(p).iter().copied().collect();
        let gram: Complex64 = col.iter().zip(&res).map(|(x, r)| x.conj() * r).sum();
        let an = norm(&col);
        prop_assert!(
            gram.norm() <= 1e-8 * an * rn + 1e-12 * an * bn,
            "column {p}: |<a, r>| = {:e}, |a| |r| = {:e}",
            gram.norm(),
            an * rn
        );
    }
    Ok(())
}
