//! Normalized DFT and the absolute discrete S-transform.
//!
//! The S-transform row ("voice") at frequency index `p > 0` is
//!
//! ```text
//! F[p, n] = sum_m Y[(m + p) mod M] * exp(-2 pi^2 m'^2 / p^2) * exp(+j 2 pi m n / M)
//! ```
//!
//! with the circular lag `m' = min(m, M - m)`. Row 0 is the signal mean at
//! every time index. Each row is one unnormalized inverse FFT of the shifted,
//! Gaussian-weighted spectrum, so the full `(M/2) x M` matrix costs
//! `O(M^2 log M)`. Rows are independent and are evaluated in parallel.

use std::io::Write;
use std::sync::Arc;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// `exp(x)` is exactly zero in f64 below this argument.
const EXP_UNDERFLOW: f64 = -746.0;

/// DFT bins `Y[k] = (1/M) sum_n y[n] exp(-j 2 pi n k / M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    bins: Vec<Complex64>,
}

impl Spectrum {
    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }
}

pub fn dft(y: &[f64]) -> Result<Spectrum> {
    if y.is_empty() {
        return Err(Error::config("DFT input must be nonempty"));
    }
    if let Some(index) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let m = y.len();
    let mut bins: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut bins);
    let scale = 1.0 / m as f64;
    for b in &mut bins {
        *b *= scale;
    }
    Ok(Spectrum { bins })
}

/// `|F|` with rows indexed by frequency and columns by time.
#[derive(Debug, Clone, PartialEq)]
pub struct STMagnitude {
    values: Array2<f64>,
    effective_rate: f64,
}

impl STMagnitude {
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Number of frequency rows, `M/2`.
    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    /// Number of time columns, `M`.
    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn effective_rate(&self) -> f64 {
        self.effective_rate
    }

    /// Frequency of row `p` in Hz.
    pub fn row_frequency(&self, p: usize) -> f64 {
        row_frequency(p, self.cols(), self.effective_rate)
    }

    /// Writes the matrix as CSV, one frequency row per line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for row in self.values.rows() {
            let mut first = true;
            for v in row {
                if !first {
                    out.write_all(b",")?;
                }
                first = false;
                write!(out, "{v}")?;
            }
            out.write_all(b"\n")?;
        }
        out.flush()
    }
}

pub(crate) fn row_frequency(p: usize, m: usize, rate: f64) -> f64 {
    p as f64 * rate / m as f64
}

/// Per-thread buffers for [`StransformRows`].
pub struct RowScratch {
    voice: Vec<Complex64>,
    fft: Vec<Complex64>,
    weights: Vec<f64>,
}

/// Evaluates individual S-transform rows of one spectrum.
///
/// Shared read-only between threads; each thread brings its own
/// [`RowScratch`].
pub struct StransformRows<'a> {
    spectrum: &'a [Complex64],
    mean: f64,
    ifft: Arc<dyn Fft<f64>>,
}

impl<'a> StransformRows<'a> {
    pub fn new(spectrum: &'a Spectrum, y_mean: f64) -> Result<Self> {
        let m = spectrum.len();
        if m < 2 || !m.is_multiple_of(2) {
            return Err(Error::config(format!(
                "S-transform needs an even signal length >= 2, got {m}"
            )));
        }
        Ok(Self {
            spectrum: &spectrum.bins,
            mean: y_mean,
            ifft: FftPlanner::new().plan_fft_inverse(m),
        })
    }

    pub fn signal_len(&self) -> usize {
        self.spectrum.len()
    }

    pub fn row_count(&self) -> usize {
        self.spectrum.len() / 2
    }

    pub fn scratch(&self) -> RowScratch {
        let m = self.signal_len();
        RowScratch {
            voice: vec![Complex64::default(); m],
            fft: vec![Complex64::default(); self.ifft.get_inplace_scratch_len()],
            weights: vec![0.0; m / 2 + 1],
        }
    }

    /// Complex row `F[p, .]`, left in `work` and returned as a slice of it.
    pub fn complex_row_into<'w>(&self, p: usize, work: &'w mut RowScratch) -> &'w [Complex64] {
        assert!(p < self.row_count(), "row {p} out of range");
        let m = self.signal_len();
        if p == 0 {
            work.voice.fill(Complex64::new(self.mean, 0.0));
            return &work.voice;
        }

        let scale = -2.0 * std::f64::consts::PI * std::f64::consts::PI / (p * p) as f64;
        for (lag, w) in work.weights.iter_mut().enumerate() {
            let arg = scale * (lag * lag) as f64;
            *w = if arg < EXP_UNDERFLOW { 0.0 } else { arg.exp() };
        }

        // voice[idx] = Y[(idx + p) mod M] * w(min(idx, M - idx))
        let (head, tail) = work.voice.split_at_mut(m - p);
        let shifted = self.spectrum[p..].iter().zip(head.iter_mut().enumerate()).chain(
            self.spectrum[..p]
                .iter()
                .zip(tail.iter_mut().enumerate().map(|(i, s)| (i + m - p, s))),
        );
        for (y, (idx, slot)) in shifted {
            let w = work.weights[idx.min(m - idx)];
            *slot = if w == 0.0 { Complex64::default() } else { y * w };
        }
        self.ifft.process_with_scratch(&mut work.voice, &mut work.fft);
        &work.voice
    }

    pub fn complex_row(&self, p: usize) -> Vec<Complex64> {
        let mut work = self.scratch();
        self.complex_row_into(p, &mut work).to_vec()
    }

    /// Writes `|F[p, .]|` into `out`.
    pub fn magnitude_row_into(&self, p: usize, out: &mut [f64], work: &mut RowScratch) {
        assert_eq!(out.len(), self.signal_len());
        let row = self.complex_row_into(p, work);
        for (o, v) in out.iter_mut().zip(row) {
            // Plain sqrt; `norm` goes through `hypot`, several times slower.
            *o = (v.re * v.re + v.im * v.im).sqrt();
        }
    }
}

/// Computes the full `(M/2) x M` magnitude matrix.
///
/// Memory is `M^2 / 2` doubles; for long excerpts prefer
/// [`crate::envelopes::subband_envelopes`], which never materializes it.
pub fn stransform(spectrum: &Spectrum, y_mean: f64, effective_rate: f64) -> Result<STMagnitude> {
    if !(effective_rate.is_finite() && effective_rate > 0.0) {
        return Err(Error::config("effective rate must be positive"));
    }
    let rows = StransformRows::new(spectrum, y_mean)?;
    let m = rows.signal_len();
    let mut values = Array2::<f64>::zeros((m / 2, m));
    values.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each_init(
        || rows.scratch(),
        |work, (p, mut out)| {
            let out = out
                .as_slice_mut()
                .expect("rows of a standard-layout array are contiguous");
            rows.magnitude_row_into(p, out, work);
        },
    );
    Ok(STMagnitude { values, effective_rate })
}
