//! Onset envelope isolation: pick the subband whose envelope pulses at a
//! regular period, and turn that period into a tempo.
//!
//! Per band the envelope is
//!
//! 1. scaled to unit peak,
//! 2. given an upper envelope (natural cubic spline through local maxima at
//!    least `n_p` samples apart, plus both endpoints),
//! 3. shifted down by the mean of that upper envelope and rectified,
//! 4. thresholded at `H` evenly spaced levels; at each level the surviving
//!    indices form runs whose centroids are spaced by a gap vector `c`, and
//!    the level is scored by the cosine between `c` and the all-ones vector,
//! 5. scored by the best level.
//!
//! Bands scoring within `epsilon` of 1 form the isolation set. The highest
//! scoring one (lowest index on ties) supplies the tempo,
//! `round(60 * rate / mean(c))`.

mod spline;

use rayon::prelude::*;
use serde::Serialize;

pub use spline::NaturalCubicSpline;

use crate::envelopes::OnsetEnvelope;
use crate::error::{Error, Result};

/// `n_p`, `H` and `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsolationParams {
    pub min_peak_distance: usize,
    pub thresholds: usize,
    pub epsilon: f64,
}

impl Default for IsolationParams {
    fn default() -> Self {
        Self {
            min_peak_distance: 40,
            thresholds: 100,
            epsilon: 1e-3,
        }
    }
}

impl IsolationParams {
    pub fn new(min_peak_distance: usize, thresholds: usize, epsilon: f64) -> Result<Self> {
        let p = Self {
            min_peak_distance,
            thresholds,
            epsilon,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_peak_distance < 1 {
            return Err(Error::config("peak separation n_p must be >= 1"));
        }
        if self.thresholds < 2 {
            return Err(Error::config(format!(
                "threshold count H must be >= 2, got {}",
                self.thresholds
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::config(format!(
                "isolation accuracy epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Divides by the largest magnitude.
pub fn normalize(values: &[f64]) -> Result<Vec<f64>> {
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 || !peak.is_finite() {
        return Err(Error::DegenerateEnvelope);
    }
    Ok(values.iter().map(|v| v / peak).collect())
}

/// Strict interior local maxima, thinned greedily so that kept peaks are at
/// least `min_distance` apart. Taller peaks win; equal heights go to the
/// lower index. Returned in ascending index order.
pub fn find_peaks(x: &[f64], min_distance: usize) -> Vec<usize> {
    if x.len() < 3 {
        return Vec::new();
    }
    let mut candidates: Vec<usize> = (1..x.len() - 1)
        .filter(|&k| x[k - 1] < x[k] && x[k] > x[k + 1])
        .collect();
    candidates.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));

    let reach = min_distance.max(1) - 1;
    let mut blocked = vec![false; x.len()];
    let mut kept = Vec::new();
    for k in candidates {
        if blocked[k] {
            continue;
        }
        kept.push(k);
        let lo = k.saturating_sub(reach);
        let hi = (k + reach).min(x.len() - 1);
        blocked[lo..=hi].fill(true);
    }
    kept.sort_unstable();
    kept
}

/// Natural cubic spline through `(k, x[k])` for every peak plus both
/// endpoints, sampled at every index.
pub fn upper_envelope(x: &[f64], peaks: &[usize]) -> Vec<f64> {
    let len = x.len();
    let mut knots: Vec<usize> = Vec::with_capacity(peaks.len() + 2);
    knots.push(0);
    knots.extend(peaks.iter().copied().filter(|&k| k > 0 && k + 1 < len));
    if len > 1 {
        knots.push(len - 1);
    }
    knots.dedup();
    if knots.len() < 2 {
        let top = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return vec![top; len];
    }
    let xs: Vec<f64> = knots.iter().map(|&k| k as f64).collect();
    let ys: Vec<f64> = knots.iter().map(|&k| x[k]).collect();
    NaturalCubicSpline::new(&xs, &ys).sample_integers(len)
}

/// `max(0, x - mean(upper))`.
pub fn center_rectify(x: &[f64], upper: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), upper.len(), "envelope and upper envelope differ in length");
    let level = upper.iter().sum::<f64>() / upper.len() as f64;
    x.iter().map(|v| (v - level).max(0.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreconditionedEnvelope {
    pub normalized: Vec<f64>,
    pub peaks: Vec<usize>,
    pub upper: Vec<f64>,
    pub centered: Vec<f64>,
}

pub fn precondition(values: &[f64], min_peak_distance: usize) -> Result<PreconditionedEnvelope> {
    let normalized = normalize(values)?;
    let peaks = find_peaks(&normalized, min_peak_distance);
    let upper = upper_envelope(&normalized, &peaks);
    let centered = center_rectify(&normalized, &upper);
    Ok(PreconditionedEnvelope {
        normalized,
        peaks,
        upper,
        centered,
    })
}

/// Inclusive index range of consecutive supra-threshold samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Run {
    pub first: usize,
    pub last: usize,
}

impl Run {
    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Mean index.
    pub fn centroid(&self) -> f64 {
        (self.first + self.last) as f64 / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterAnalysis {
    pub threshold: f64,
    pub runs: Vec<Run>,
    pub centroids: Vec<f64>,
    pub gaps: Vec<f64>,
    pub score: f64,
}

/// Cosine between the gap vector and the all-ones vector. Fewer than two
/// gaps score 0: one interval says nothing about periodicity.
pub fn regularity_score(gaps: &[f64]) -> f64 {
    if gaps.len() < 2 {
        return 0.0;
    }
    let sum: f64 = gaps.iter().sum();
    let norm = gaps.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    (sum / ((gaps.len() as f64).sqrt() * norm)).clamp(0.0, 1.0)
}

pub fn clusters_at_threshold(x: &[f64], threshold: f64) -> ClusterAnalysis {
    let mut runs = Vec::new();
    let mut open: Option<usize> = None;
    for (k, &v) in x.iter().enumerate() {
        match (v >= threshold, open) {
            (true, None) => open = Some(k),
            (false, Some(first)) => {
                runs.push(Run { first, last: k - 1 });
                open = None;
            }
            _ => {}
        }
    }
    if let Some(first) = open {
        runs.push(Run {
            first,
            last: x.len() - 1,
        });
    }
    let centroids: Vec<f64> = runs.iter().map(Run::centroid).collect();
    let gaps: Vec<f64> = centroids.windows(2).map(|w| w[1] - w[0]).collect();
    let score = regularity_score(&gaps);
    ClusterAnalysis {
        threshold,
        runs,
        centroids,
        gaps,
        score,
    }
}

/// Result of scanning all threshold levels of one rectified envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdScan {
    /// Best score `b`.
    pub score: f64,
    /// 1-based level `j` that attained `b` (smallest on ties).
    pub best_level: usize,
    pub best: ClusterAnalysis,
    /// Score at each level, `v_1 .. v_H`.
    pub level_scores: Vec<f64>,
    /// Number of runs at each level.
    pub level_runs: Vec<usize>,
}

impl ThresholdScan {
    /// Level whose gaps represent the band.
    ///
    /// Among levels scoring within `epsilon` of 1, the one keeping the most
    /// runs (smallest on ties); otherwise `best_level`. High levels can keep
    /// an evenly spaced subset of the pulses whose gaps are multiples of the
    /// period, so the densest periodic level is preferred.
    pub fn period_level(&self, epsilon: f64) -> usize {
        let mut chosen: Option<usize> = None;
        for (i, (&v, &n)) in self.level_scores.iter().zip(&self.level_runs).enumerate() {
            if (1.0 - v).abs() <= epsilon && n >= 2 && chosen.is_none_or(|c| n > self.level_runs[c]) {
                chosen = Some(i);
            }
        }
        chosen.map_or(self.best_level, |i| i + 1)
    }
}

/// Threshold `l_j` for 1-based level `j`.
pub fn level_threshold(top: f64, j: usize, levels: usize) -> f64 {
    (j - 1) as f64 * top / levels as f64
}

/// Scores levels `l_j = (j - 1) max(x) / H`, `j = 1..=H`.
pub fn score_band(x: &[f64], levels: usize) -> ThresholdScan {
    assert!(levels >= 1, "need at least one threshold level");
    let top = x.iter().copied().fold(0.0f64, f64::max);
    let mut best: Option<(usize, ClusterAnalysis)> = None;
    let mut level_scores = Vec::with_capacity(levels);
    let mut level_runs = Vec::with_capacity(levels);
    for j in 1..=levels {
        let analysis = clusters_at_threshold(x, level_threshold(top, j, levels));
        level_scores.push(analysis.score);
        level_runs.push(analysis.runs.len());
        if best.as_ref().is_none_or(|(_, b)| analysis.score > b.score) {
            best = Some((j, analysis));
        }
    }
    let (best_level, best) = best.expect("at least one level");
    ThresholdScan {
        score: best.score,
        best_level,
        best,
        level_scores,
        level_runs,
    }
}

/// Per-band diagnostics: score `b`, the level reporting the gaps
/// (see [`ThresholdScan::period_level`]) and its gap vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandScore {
    pub band_index: usize,
    pub score: f64,
    /// The envelope was identically zero and was not analysed.
    pub degenerate: bool,
    pub best_level: Option<usize>,
    pub threshold: Option<f64>,
    pub gaps: Vec<f64>,
    pub level_scores: Vec<f64>,
}

pub fn score_envelope(envelope: &OnsetEnvelope, params: &IsolationParams) -> BandScore {
    match precondition(&envelope.values, params.min_peak_distance) {
        Ok(pre) => {
            let scan = score_band(&pre.centered, params.thresholds);
            let level = scan.period_level(params.epsilon);
            let chosen = if level == scan.best_level {
                scan.best
            } else {
                let top = pre.centered.iter().copied().fold(0.0f64, f64::max);
                clusters_at_threshold(&pre.centered, level_threshold(top, level, params.thresholds))
            };
            BandScore {
                band_index: envelope.band_index,
                score: scan.score,
                degenerate: false,
                best_level: Some(level),
                threshold: Some(chosen.threshold),
                gaps: chosen.gaps,
                level_scores: scan.level_scores,
            }
        }
        Err(_) => BandScore {
            band_index: envelope.band_index,
            score: 0.0,
            degenerate: true,
            best_level: None,
            threshold: None,
            gaps: Vec::new(),
            level_scores: Vec::new(),
        },
    }
}

/// Scores every band; output is in input order.
pub fn score_bands(envelopes: &[OnsetEnvelope], params: &IsolationParams) -> Vec<BandScore> {
    envelopes.par_iter().map(|e| score_envelope(e, params)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TempoEstimate {
    pub selected_band: usize,
    pub score: f64,
    pub best_gaps: Vec<f64>,
    pub bpm: f64,
    pub effective_rate: f64,
    pub isolation_set: Vec<usize>,
}

/// No band scored within `epsilon` of 1.
#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("isolation failure: no band within epsilon of a periodic onset pattern (scores {scores:?})")]
pub struct IsolationFailure {
    pub scores: Vec<f64>,
    pub degenerate_bands: Vec<usize>,
}

pub fn select(
    bands: &[BandScore],
    epsilon: f64,
    effective_rate: f64,
) -> std::result::Result<TempoEstimate, IsolationFailure> {
    let failure = || IsolationFailure {
        scores: bands.iter().map(|b| b.score).collect(),
        degenerate_bands: bands.iter().filter(|b| b.degenerate).map(|b| b.band_index).collect(),
    };
    let passing: Vec<&BandScore> = bands
        .iter()
        .filter(|b| (1.0 - b.score).abs() <= epsilon && !b.gaps.is_empty())
        .collect();
    let mut chosen: Option<&BandScore> = None;
    for b in &passing {
        if chosen.is_none_or(|c| b.score > c.score || (b.score == c.score && b.band_index < c.band_index)) {
            chosen = Some(b);
        }
    }
    let chosen = chosen.ok_or_else(failure)?;
    let bpm = bpm_estimate(&chosen.gaps, effective_rate).map_err(|_| failure())?;
    Ok(TempoEstimate {
        selected_band: chosen.band_index,
        score: chosen.score,
        best_gaps: chosen.gaps.clone(),
        bpm,
        effective_rate,
        isolation_set: passing.iter().map(|b| b.band_index).collect(),
    })
}

pub fn isolate(
    envelopes: &[OnsetEnvelope],
    params: &IsolationParams,
) -> std::result::Result<TempoEstimate, IsolationFailure> {
    let rate = envelopes.first().map_or(1.0, |e| e.effective_rate);
    select(&score_bands(envelopes, params), params.epsilon, rate)
}

/// `round(60 * rate / mean(gaps))`, gaps measured in envelope samples.
pub fn bpm_estimate(gaps: &[f64], effective_rate: f64) -> Result<f64> {
    if gaps.is_empty() {
        return Err(Error::NoPeriod);
    }
    if !(effective_rate.is_finite() && effective_rate > 0.0) {
        return Err(Error::config("effective rate must be positive"));
    }
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    if mean.is_nan() || mean <= 0.0 {
        return Err(Error::NoPeriod);
    }
    Ok((60.0 * effective_rate / mean).round())
}
