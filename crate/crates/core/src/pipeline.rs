//! End-to-end analysis of one excerpt.

use serde::Serialize;

use crate::envelopes::{band_edges, subband_envelopes, OnsetEnvelope};
use crate::error::{Error, Result};
use crate::ingest::{downsample, fit_to_grid, AudioBuffer, GridConfig};
use crate::isolation::{score_bands, select, BandScore, IsolationFailure, IsolationParams, TempoEstimate};
use crate::tfr::dft;

/// All knobs of the analysis. `band_rows = None` derives `K` from the
/// excerpt length so that the `Q` bands cover the full spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub downsample: usize,
    pub band_rows: Option<usize>,
    pub bands: usize,
    pub isolation: IsolationParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            downsample: 40,
            band_rows: None,
            bands: 10,
            isolation: IsolationParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        GridConfig::new(self.downsample, self.band_rows.unwrap_or(1), self.bands)?;
        self.isolation.validate()
    }

    /// Fixes `K` for an input of `len` samples.
    ///
    /// When `K` is not given it is the largest value with `2QKD <= len`,
    /// i.e. `floor(M / 2Q)` for the untrimmed decimated length `M`.
    pub fn resolve_grid(&self, len: usize) -> Result<GridConfig> {
        self.validate()?;
        let band_rows = match self.band_rows {
            Some(k) => k,
            None => {
                let decimated = if len == 0 { 0 } else { 1 + (len - 1) / self.downsample };
                let k = decimated / (2 * self.bands);
                if k == 0 {
                    return Err(Error::InsufficientAudio {
                        have: len,
                        need: 2 * self.bands * self.downsample,
                    });
                }
                k
            }
        };
        GridConfig::new(self.downsample, band_rows, self.bands)
    }
}

/// Everything the analysis produced for one excerpt.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub grid: GridConfig,
    /// Input samples kept after trimming to the grid.
    pub samples_used: usize,
    pub effective_rate: f64,
    pub envelopes: Vec<OnsetEnvelope>,
    pub band_edges: Vec<(f64, f64)>,
    pub band_scores: Vec<BandScore>,
    pub outcome: std::result::Result<TempoEstimate, IsolationFailure>,
}

impl Analysis {
    /// Decimated length `M`.
    pub fn decimated_len(&self) -> usize {
        self.grid.decimated_len()
    }
}

/// Onset envelopes of one excerpt with the grid they were computed on.
#[derive(Debug, Clone)]
pub struct EnvelopeSet {
    pub grid: GridConfig,
    /// Input samples kept after trimming to the grid.
    pub samples_used: usize,
    pub envelopes: Vec<OnsetEnvelope>,
    /// `(low, high)` frequency of each band in Hz.
    pub band_edges: Vec<(f64, f64)>,
}

/// Onset envelopes for `buf` under `cfg`.
pub fn compute_envelopes(buf: &AudioBuffer, cfg: &PipelineConfig) -> Result<EnvelopeSet> {
    let grid = cfg.resolve_grid(buf.len())?;
    let fitted = fit_to_grid(buf, &grid)?;
    let y = downsample(&fitted, grid.downsample)?;
    let rate = y.sample_rate();
    let m = y.len();
    let mean = y.samples().iter().sum::<f64>() / m as f64;
    let spectrum = dft(y.samples())?;
    let envelopes = subband_envelopes(&spectrum, mean, grid.band_rows, rate)?;
    let edges = band_edges(grid.band_rows, grid.bands, m, rate);
    Ok(EnvelopeSet {
        grid,
        samples_used: fitted.len(),
        envelopes,
        band_edges: edges,
    })
}

pub fn analyze(buf: &AudioBuffer, cfg: &PipelineConfig) -> Result<Analysis> {
    let EnvelopeSet {
        grid,
        samples_used,
        envelopes,
        band_edges,
    } = compute_envelopes(buf, cfg)?;
    let effective_rate = buf.sample_rate() / grid.downsample as f64;
    let band_scores = score_bands(&envelopes, &cfg.isolation);
    let outcome = select(&band_scores, cfg.isolation.epsilon, effective_rate);
    Ok(Analysis {
        grid,
        samples_used,
        effective_rate,
        envelopes,
        band_edges,
        band_scores,
        outcome,
    })
}
