mod common;

use std::f64::consts::PI;

use dd_prony::channel::{add_awgn, apply_channel, NoiseSpec, Path, PathSet};
use dd_prony::estimators::{delay_first, doppler_first, Source};
use dd_prony::fusion::{merge_candidates, merge_points, EstimateSet, EstimatedPath, FusionParams};
use dd_prony::linalg::CMatrix;
use dd_prony::montecarlo::{match_paths, sweep, Method, Scenario, SweepOptions};
use dd_prony::prony::{annihilating_filter, phase_to_delay, phase_to_doppler, polynomial_roots, single_mode_ratio, ROOT_RESIDUAL_TOL};
use dd_prony::sampling::{fd_matrix, fd_samples, retained_td_matrix};
use dd_prony::signal_model::{dirichlet_waveform, idzt, pilot_dd_grid, transmit_samples, GridConfig, SignalModelKind};
use dd_prony::Complex64;
use proptest::prelude::*;

use common::*;

const IDEAL: SignalModelKind = SignalModelKind::IdealPeriodic;

fn even_m() -> impl Strategy<Value = usize> {
    prop_oneof![Just(4usize), Just(8), Just(16), Just(32)]
}

fn single_path() -> impl Strategy<Value = Path> {
    (0.01..0.99f64, -0.49..0.49f64, 0.2..1.5f64, -PI..PI).prop_map(|(t, f, r, th)| Path::new(Complex64::from_polar(r, th), t, f))
}

fn received(paths: Vec<Path>, cfg: &GridConfig) -> dd_prony::ExtendedFrame {
    apply_channel(&transmit_samples(cfg, IDEAL), &PathSet::new(paths), cfg, IDEAL).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn dirichlet_is_t_periodic(t in -5.0..5.0f64, m in even_m(), period in 0.5..2.0f64) {
        let cfg = GridConfig::new(8, m, period).unwrap();
        let a = dirichlet_waveform(t * period, &cfg);
        let b = dirichlet_waveform(t * period + period, &cfg);
        // Relative to the waveform scale M/T: near a zero the pointwise value
        // has no significant digits left to compare.
        prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(m as f64 / period), "{a} vs {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn dirichlet_zero_crossings(q in -200i64..200, m in even_m()) {
        prop_assume!(q.rem_euclid(m as i64) != 0);
        let cfg = GridConfig::new(8, m, 1.0).unwrap();
        let v = dirichlet_waveform(q as f64 / m as f64, &cfg);
        prop_assert!(v.norm() < 1e-9 * m as f64, "{v}");
    }

    #[test]
    fn pilot_idzt_is_impulse_train(n in prop_oneof![Just(4usize), Just(8), Just(16), Just(32)], m in even_m()) {
        let cfg = GridConfig::new(n, m, 1.0).unwrap();
        let x = idzt(&pilot_dd_grid(&cfg), &cfg).unwrap();
        prop_assert_eq!(x.len(), n * m);
        for (i, v) in x.iter().enumerate() {
            let want = if i % m == 0 { 1.0 / n as f64 } else { 0.0 };
            prop_assert!((v - Complex64::new(want, 0.0)).norm() < 1e-15, "index {}: {}", i, v);
        }
    }

    #[test]
    fn channel_is_linear(a in prop::collection::vec(single_path(), 1..4), b in prop::collection::vec(single_path(), 1..4)) {
        let cfg = GridConfig::new(8, 8, 1.0).unwrap();
        let both: Vec<Path> = a.iter().chain(&b).copied().collect();
        let ra = received(a, &cfg);
        let rb = received(b, &cfg);
        let rab = received(both, &cfg);
        let scale = rab.samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for i in 0..rab.len() {
            prop_assert!((rab.samples[i] - ra.samples[i] - rb.samples[i]).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn doppler_phase_is_exact(p in single_path()) {
        let cfg = GridConfig::new(8, 8, 1.0).unwrap();
        let moving = received(vec![p], &cfg);
        let still = received(vec![Path::new(p.gain, p.delay, 0.0)], &cfg);
        let ts = cfg.sample_interval();
        for i in 0..moving.len() {
            if still.samples[i].norm() > 1e-6 {
                let l = moving.sample_index(i) as f64;
                let want = Complex64::from_polar(1.0, 2.0 * PI * p.doppler * l * ts);
                prop_assert!((moving.samples[i] / still.samples[i] - want).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn noise_is_reproducible(seed in any::<u64>(), snr in -10.0..60.0f64) {
        let cfg = GridConfig::new(8, 8, 1.0).unwrap();
        let rx = received(vec![Path::new(Complex64::new(1.0, 0.0), 0.3, 0.1)], &cfg);
        let a = add_awgn(&rx, &NoiseSpec::with_snr(snr, seed), &cfg).unwrap();
        let b = add_awgn(&rx, &NoiseSpec::with_snr(snr, seed), &cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn td_rows_shift_by_doppler_phase(p in single_path()) {
        let cfg = GridConfig::new(8, 8, 1.0).unwrap();
        let r = retained_td_matrix(&received(vec![p], &cfg), &cfg).unwrap().0;
        let step = Complex64::from_polar(1.0, 2.0 * PI * p.doppler * cfg.slot_duration);
        let scale = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for n in 0..cfg.n_slots - 1 {
            for l in 0..cfg.samples_per_slot() {
                prop_assert!((r[(n + 1, l)] - r[(n, l)] * step).norm() <= 1e-9 * scale);
            }
        }
    }
}

/// `count` phases on the circle, pairwise at least `2π / 100` apart.
fn separated_phases(count: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-PI..PI, count).prop_filter("phases too close", |ph| {
        let min_gap = 2.0 * PI / 100.0;
        (0..ph.len()).all(|i| {
            (i + 1..ph.len()).all(|j| {
                let d = (ph[i] - ph[j]).rem_euclid(2.0 * PI);
                d.min(2.0 * PI - d) >= min_gap
            })
        })
    })
}

fn exponential_case() -> impl Strategy<Value = (Vec<f64>, Vec<Complex64>)> {
    (1usize..=8).prop_flat_map(|p| {
        (
            separated_phases(p),
            prop::collection::vec((0.5..1.5f64, -PI..PI).prop_map(|(r, th)| Complex64::from_polar(r, th)), p),
        )
    })
}

fn lagged(phases: &[f64], amps: &[Complex64], order: usize, len: usize) -> CMatrix {
    let x = |n: usize| -> Complex64 {
        phases
            .iter()
            .zip(amps)
            .map(|(&ph, a)| a * Complex64::from_polar(1.0, ph * n as f64))
            .sum()
    };
    CMatrix::from_fn(len - order, order + 1, |i, j| x(i + order - j))
}

fn phase_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn prony_recovers_generators((phases, amps) in exponential_case()) {
        let p = phases.len();
        let a = annihilating_filter(&lagged(&phases, &amps, p, 40), p).unwrap();
        let roots = polynomial_roots(&a).unwrap();
        prop_assert_eq!(roots.roots.len(), p);
        for &ph in &phases {
            let best = roots.roots.iter().map(|z| phase_gap(z.arg(), ph)).fold(f64::INFINITY, f64::min);
            prop_assert!(best < 1e-8, "phase {} missed by {:e}", ph, best);
        }
        for z in &roots.roots {
            prop_assert!(a.relative_residual(*z) <= ROOT_RESIDUAL_TOL);
            prop_assert!((z.norm() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn phase_maps_stay_in_range(re in -10.0..10.0f64, im in -10.0..10.0f64, period in 0.1..10.0f64) {
        let z = Complex64::new(re, im);
        prop_assume!(z.norm() > 1e-9);
        let t = phase_to_delay(z, period).unwrap();
        prop_assert!((0.0..period).contains(&t), "{}", t);
        let f = phase_to_doppler(z, period).unwrap();
        prop_assert!(f.abs() <= 0.5 / period, "{}", f);
    }

    #[test]
    fn ratio_is_scale_invariant(
        y in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 3..40),
        r in 1e-3..1e3f64,
        th in -PI..PI,
    ) {
        let y: Vec<Complex64> = y.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
        prop_assume!(y[..y.len() - 1].iter().map(|z| z.norm_sqr()).sum::<f64>() > 1e-6);
        let c = Complex64::from_polar(r, th);
        let scaled: Vec<Complex64> = y.iter().map(|z| z * c).collect();
        let a = single_mode_ratio(&y).unwrap();
        let b = single_mode_ratio(&scaled).unwrap();
        prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pipelines_agree_on_single_path(p in single_path()) {
        let cfg = GridConfig::default();
        let rx = received(vec![p], &cfg);
        let (c1, _) = doppler_first(&retained_td_matrix(&rx, &cfg).unwrap(), &cfg).unwrap();
        let (c2, _) = delay_first(&fd_matrix(&fd_samples(&rx, &cfg).unwrap(), &cfg).unwrap(), &cfg).unwrap();
        prop_assert_eq!(c1.len(), cfg.n_slots - 1);
        prop_assert_eq!(c2.len(), cfg.n_subcarriers - 1);
        let a = c1.pairs.iter().max_by(|a, b| a.energy.total_cmp(&b.energy)).copied().unwrap();
        let gap = |b: &dd_prony::Candidate| {
            let dt = (a.delay - b.delay).abs();
            dt.min(1.0 - dt).max((a.doppler - b.doppler).abs())
        };
        let b = c2.pairs.iter().min_by(|x, y| gap(x).total_cmp(&gap(y))).copied().unwrap();
        prop_assert!(gap(&b) < 1e-3, "{:?} vs {:?}", a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn merge_terminates_within_bound(lists in candidate_lists()) {
        check_merge_termination(lists)?;
    }

    #[test]
    fn prune_is_monotone_in_threshold(case in gains_and_thresholds()) {
        check_prune_monotone(case)?;
    }

    #[test]
    fn ls_residual_is_orthogonal(case in ls_cases()) {
        check_ls_orthogonal(case)?;
    }

    #[test]
    fn merge_is_idempotent((a, b) in candidate_lists()) {
        let p = FusionParams::default();
        let once = merge_candidates(&candidate_set(Source::DopplerFirst, &a), &candidate_set(Source::DelayFirst, &b), &p, 1.0);
        let twice = merge_candidates(&candidate_set(Source::DopplerFirst, &once), &candidate_set(Source::DelayFirst, &[]), &p, 1.0);
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn merge_ignores_input_order((a, b) in candidate_lists(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let p = FusionParams::default();
        let reference = merge_candidates(&candidate_set(Source::DopplerFirst, &a), &candidate_set(Source::DelayFirst, &b), &p, 1.0);
        let mut all: Vec<(f64, f64)> = a.iter().chain(&b).copied().collect();
        all.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(merge_points(all, &p, 1.0), reference);
    }

    #[test]
    fn matches_bounded(
        truth in prop::collection::vec((0.0..1.0f64, -0.5..0.5f64), 0..8),
        est in prop::collection::vec((0.0..1.0f64, -0.5..0.5f64), 0..12),
        r in 0.01..0.5f64,
    ) {
        let t: PathSet = truth.iter().map(|&(d, f)| Path::new(Complex64::new(1.0, 0.0), d, f)).collect();
        let e = EstimateSet {
            paths: est.iter().map(|&(delay, doppler)| EstimatedPath { delay, doppler, gain: Complex64::new(1.0, 0.0) }).collect(),
            ..Default::default()
        };
        let d = match_paths(&t, &e, r, r, 1.0);
        prop_assert!(d <= truth.len().min(est.len()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn sweep_is_schedule_invariant(seed in any::<u64>(), workers in 2usize..5) {
        let scenario = Scenario {
            cfg: GridConfig::new(8, 8, 1.0).unwrap(),
            runs: 6,
            base_seed: seed,
            method: Method::Parallel,
            ..Default::default()
        };
        let one = sweep(&[scenario.clone()], SweepOptions { workers: 1, timing: false }).unwrap();
        let many = sweep(&[scenario], SweepOptions { workers, timing: false }).unwrap();
        prop_assert_eq!(&one, &many);
        let rate = one.rows[0].detection_rate;
        prop_assert!((0.0..=1.0).contains(&rate));
    }
}
