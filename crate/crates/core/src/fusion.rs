//! Fusion of the two candidate sets: merge nearby pairs, fit complex gains
//! by least squares over the full extended frame, prune weak paths.

use std::cmp::Ordering;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::path_response;
use crate::error::{Error, Result};
use crate::estimators::{delay_first, doppler_first, CandidateSet, Source};
use crate::linalg::{lstsq, CMatrix};
use crate::sampling::{fd_matrix, fd_samples, retained_td_matrix};
use crate::signal_model::{ExtendedFrame, GridConfig, SignalModelKind};

/// Regressor sets above this condition number are flagged.
pub const ILL_CONDITIONED: f64 = 1e12;
/// Relative singular-value cutoff for the gain fit.
const FIT_RCOND: f64 = 1e-12;

/// Which candidate pairs may be averaged together.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum MergeRule {
    /// Any two pooled points, including two from the same pipeline and
    /// points that are already averages.
    #[default]
    Pooled,
    /// Only a Doppler-first point with a delay-first point; an averaged
    /// point does not merge again.
    CrossPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionParams {
    /// Delay merge radius in units of `T`, in `[0, 0.5)`.
    pub delta_t: f64,
    /// Doppler merge radius in units of `1/T`, in `[0, 0.5)`.
    pub delta_f: f64,
    /// Relative gain magnitude below which a path is dropped, in `(0, 1)`.
    pub delta_alpha: f64,
    #[serde(default)]
    pub merge_rule: MergeRule,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            delta_t: 0.1,
            delta_f: 0.1,
            delta_alpha: 0.01,
            merge_rule: MergeRule::Pooled,
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.delta_t) || !(0.0..0.5).contains(&self.delta_f) {
            return Err(Error::Argument(format!(
                "merge radii must lie in [0, 0.5), got ({}, {})",
                self.delta_t, self.delta_f
            )));
        }
        if !(self.delta_alpha > 0.0 && self.delta_alpha < 1.0) {
            return Err(Error::Argument(format!(
                "prune ratio must lie in (0, 1), got {}",
                self.delta_alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatedPath {
    pub delay: f64,
    pub doppler: f64,
    pub gain: Complex64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FusionDiagnostics {
    /// Candidates entering the merge.
    pub candidates: usize,
    /// Pairs left after merging (`|Θ|`).
    pub merged: usize,
    /// Pairs removed by the gain threshold.
    pub pruned: usize,
    /// The first gain fit was rank deficient or badly conditioned.
    pub ill_conditioned: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateSet {
    pub paths: Vec<EstimatedPath>,
    pub diagnostics: FusionDiagnostics,
}

impl EstimateSet {
    pub fn count(&self) -> usize {
        self.paths.len()
    }
}

#[derive(Debug, Clone)]
pub struct AmplitudeFit {
    pub gains: Vec<Complex64>,
    pub condition: f64,
    pub ill_conditioned: bool,
}

/// Pools both candidate sets and repeatedly averages the closest pair
/// with `|Δt| < δ_t T` and `|Δf| < δ_f / T`, until no such pair remains.
///
/// Closeness is `max(|Δt| / (δ_t T), |Δf| / (δ_f / T))`; ties are broken on
/// the coordinates, and the output is sorted, so the result does not depend
/// on input order. Which pairs may merge is set by [`MergeRule`].
/// Degenerate candidates carry no phase information and are left out.
pub fn merge_candidates(
    c1: &CandidateSet,
    c2: &CandidateSet,
    params: &FusionParams,
    period: f64,
) -> Vec<(f64, f64)> {
    let tagged = |set: &CandidateSet, tag: u8| -> Vec<(f64, f64, u8)> {
        set.pairs
            .iter()
            .filter(|c| !c.degenerate)
            .map(|c| (c.delay, c.doppler, tag))
            .collect()
    };
    let mut pool = tagged(c1, 1);
    pool.extend(tagged(c2, 2));
    merge_tagged(pool, params, period)
}

/// Merge rule on bare `(delay, doppler)` points, all from one source.
pub fn merge_points(pts: Vec<(f64, f64)>, params: &FusionParams, period: f64) -> Vec<(f64, f64)> {
    merge_tagged(pts.into_iter().map(|(t, f)| (t, f, 1)).collect(), params, period)
}

/// Points carry a bit mask of the sources averaged into them.
fn merge_tagged(mut pts: Vec<(f64, f64, u8)>, params: &FusionParams, period: f64) -> Vec<(f64, f64)> {
    let rt = params.delta_t * period;
    let rf = params.delta_f / period;
    let order = |a: &(f64, f64, u8), b: &(f64, f64, u8)| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2));
    pts.sort_by(order);
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if params.merge_rule == MergeRule::CrossPairs && pts[i].2 & pts[j].2 != 0 {
                    continue;
                }
                let dt = (pts[i].0 - pts[j].0).abs();
                let df = (pts[i].1 - pts[j].1).abs();
                if !(dt < rt && df < rf) {
                    continue;
                }
                let d = (dt / rt).max(df / rf);
                // Points stay sorted, so (i, j) order is the coordinate tie-break.
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else {
            return pts.into_iter().map(|(t, f, _)| (t, f)).collect();
        };
        let merged = (
            (pts[i].0 + pts[j].0) / 2.0,
            (pts[i].1 + pts[j].1) / 2.0,
            pts[i].2 | pts[j].2,
        );
        pts.remove(j);
        pts.remove(i);
        let at = pts.partition_point(|p| order(p, &merged) == Ordering::Less);
        pts.insert(at, merged);
    }
}

/// Regressor matrix with one column `s(ℓT_s - t̂_p) e^{j2π f̂_p ℓT_s}` per pair,
/// over the full extended support.
pub fn regressors(theta: &[(f64, f64)], cfg: &GridConfig, kind: SignalModelKind) -> CMatrix {
    let rows = cfg.extended_len();
    let mut a = CMatrix::zeros(rows, theta.len());
    for (p, &(delay, doppler)) in theta.iter().enumerate() {
        let col = path_response(delay, doppler, cfg, kind);
        a.column_mut(p).copy_from_slice(&col);
    }
    a
}

/// Least-squares complex gains of `theta` against the received frame.
pub fn amplitude_fit(
    theta: &[(f64, f64)],
    rx: &ExtendedFrame,
    cfg: &GridConfig,
    kind: SignalModelKind,
) -> Result<AmplitudeFit> {
    rx.check(cfg)?;
    if theta.is_empty() {
        return Err(Error::Argument("no delay-Doppler pairs to fit".into()));
    }
    let a = regressors(theta, cfg, kind);
    let b = CMatrix::from_column_slice(rx.len(), 1, &rx.samples);
    let sol = lstsq(&a, &b, FIT_RCOND);
    Ok(AmplitudeFit {
        gains: sol.x.iter().copied().collect(),
        condition: sol.condition,
        ill_conditioned: sol.rank < theta.len() || sol.condition > ILL_CONDITIONED,
    })
}

/// Drops pairs with `|α_p| < δ_α max |α|`. All-zero gains leave nothing.
pub fn prune(theta: &[(f64, f64)], gains: &[Complex64], params: &FusionParams) -> Result<EstimateSet> {
    if theta.len() != gains.len() {
        return Err(Error::Argument(format!(
            "{} pairs but {} gains",
            theta.len(),
            gains.len()
        )));
    }
    let max = gains.iter().map(|g| g.norm()).fold(0.0, f64::max);
    let paths: Vec<EstimatedPath> = theta
        .iter()
        .zip(gains)
        .filter(|(_, g)| max > 0.0 && g.norm() >= params.delta_alpha * max)
        .map(|(&(delay, doppler), &gain)| EstimatedPath { delay, doppler, gain })
        .collect();
    Ok(EstimateSet {
        diagnostics: FusionDiagnostics {
            candidates: theta.len(),
            merged: theta.len(),
            pruned: theta.len() - paths.len(),
            ill_conditioned: false,
        },
        paths,
    })
}

/// Re-fits the gains of the surviving paths; detection is unaffected.
pub fn refit(est: &mut EstimateSet, rx: &ExtendedFrame, cfg: &GridConfig, kind: SignalModelKind) -> Result<()> {
    if est.paths.is_empty() {
        return Ok(());
    }
    let theta: Vec<(f64, f64)> = est.paths.iter().map(|p| (p.delay, p.doppler)).collect();
    let fit = amplitude_fit(&theta, rx, cfg, kind)?;
    for (p, g) in est.paths.iter_mut().zip(fit.gains) {
        p.gain = g;
    }
    Ok(())
}

/// Gain fit, prune and refit over an already merged pair set.
pub fn fit_and_prune(
    theta: Vec<(f64, f64)>,
    candidates: usize,
    rx: &ExtendedFrame,
    cfg: &GridConfig,
    params: &FusionParams,
    kind: SignalModelKind,
) -> Result<EstimateSet> {
    if theta.is_empty() {
        return Ok(EstimateSet {
            paths: Vec::new(),
            diagnostics: FusionDiagnostics {
                candidates,
                ..FusionDiagnostics::default()
            },
        });
    }
    let fit = amplitude_fit(&theta, rx, cfg, kind)?;
    let mut est = prune(&theta, &fit.gains, params)?;
    est.diagnostics.candidates = candidates;
    est.diagnostics.ill_conditioned = fit.ill_conditioned;
    refit(&mut est, rx, cfg, kind)?;
    Ok(est)
}

/// Runs both pipelines on `rx`, the two in parallel.
pub fn candidate_sets(rx: &ExtendedFrame, cfg: &GridConfig) -> Result<(CandidateSet, CandidateSet)> {
    let (c1, c2) = rayon::join(
        || -> Result<CandidateSet> { Ok(doppler_first(&retained_td_matrix(rx, cfg)?, cfg)?.0) },
        || -> Result<CandidateSet> {
            let fd = fd_samples(rx, cfg)?;
            Ok(delay_first(&fd_matrix(&fd, cfg)?, cfg)?.0)
        },
    );
    Ok((c1?, c2?))
}

/// Parallel method end to end: both pipelines, merge, fit, prune, refit.
pub fn parallel_estimate(
    rx: &ExtendedFrame,
    cfg: &GridConfig,
    params: &FusionParams,
    kind: SignalModelKind,
) -> Result<EstimateSet> {
    params.validate()?;
    let (c1, c2) = candidate_sets(rx, cfg)?;
    let theta = merge_candidates(&c1, &c2, params, cfg.slot_duration);
    fit_and_prune(theta, c1.len() + c2.len(), rx, cfg, params, kind)
}

/// One pipeline alone, through the same merge, fit and prune stages as the
/// parallel method with an empty second candidate set.
pub fn single_estimate(
    rx: &ExtendedFrame,
    cfg: &GridConfig,
    params: &FusionParams,
    kind: SignalModelKind,
    source: Source,
) -> Result<EstimateSet> {
    params.validate()?;
    let set = match source {
        Source::DopplerFirst => doppler_first(&retained_td_matrix(rx, cfg)?, cfg)?.0,
        Source::DelayFirst => {
            let fd = fd_samples(rx, cfg)?;
            delay_first(&fd_matrix(&fd, cfg)?, cfg)?.0
        }
    };
    let empty = CandidateSet {
        source: set.source,
        pairs: Vec::new(),
    };
    let theta = merge_candidates(&set, &empty, params, cfg.slot_duration);
    fit_and_prune(theta, set.len(), rx, cfg, params, kind)
}
