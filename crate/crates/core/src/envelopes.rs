//! Subband splitting and per-band onset envelopes.
//!
//! The `M/2` frequency rows are cut into `Q` contiguous blocks of `K` rows
//! (band 1 is the lowest). Each band's onset envelope is its column mean.
//! A band about 50 Hz wide works well for rhythm material; at an effective
//! rate `f` and length `M` that is `K ~ 50 M / f` rows.

use std::io::Write;

use ndarray::{s, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tfr::{row_frequency, STMagnitude, Spectrum, StransformRows};

/// One band's onset envelope `r_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct OnsetEnvelope {
    pub values: Vec<f64>,
    /// 1-based, 1 = lowest frequencies.
    pub band_index: usize,
    pub effective_rate: f64,
}

/// Views into the `Q` row blocks of an [`STMagnitude`].
#[derive(Debug, Clone)]
pub struct SubbandSet<'a> {
    pub bands: Vec<ArrayView2<'a, f64>>,
    /// `(low, high)` in Hz per band.
    pub band_edges: Vec<(f64, f64)>,
    pub effective_rate: f64,
}

impl SubbandSet<'_> {
    /// Stacks the bands back into one matrix.
    pub fn concat(&self) -> Array2<f64> {
        ndarray::concatenate(Axis(0), &self.bands).expect("bands share a column count")
    }

    pub fn envelopes(&self) -> Result<Vec<OnsetEnvelope>> {
        self.bands
            .iter()
            .enumerate()
            .map(|(i, band)| band_mean(band.view(), i + 1, self.effective_rate))
            .collect()
    }
}

fn band_count(rows: usize, k: usize) -> Result<usize> {
    if k == 0 || !rows.is_multiple_of(k) {
        return Err(Error::config(format!(
            "subband size K={k} does not divide the {rows} frequency rows (M/2)"
        )));
    }
    Ok(rows / k)
}

/// `(low, high)` edges in Hz of `q` bands of `k` rows over a length-`m` signal.
pub fn band_edges(k: usize, q: usize, m: usize, rate: f64) -> Vec<(f64, f64)> {
    (0..q)
        .map(|i| (row_frequency(i * k, m, rate), row_frequency((i + 1) * k, m, rate)))
        .collect()
}

pub fn split_bands(st: &STMagnitude, k: usize) -> Result<SubbandSet<'_>> {
    let q = band_count(st.rows(), k)?;
    let bands = (0..q).map(|i| st.values().slice(s![i * k..(i + 1) * k, ..])).collect();
    Ok(SubbandSet {
        bands,
        band_edges: band_edges(k, q, st.cols(), st.effective_rate()),
        effective_rate: st.effective_rate(),
    })
}

/// Column mean `r = K^-1 S_i^T 1` of one band.
pub fn band_mean(band: ArrayView2<'_, f64>, band_index: usize, effective_rate: f64) -> Result<OnsetEnvelope> {
    let (k, m) = band.dim();
    if k == 0 || m == 0 {
        return Err(Error::config("cannot average an empty band"));
    }
    let mut acc = vec![0.0; m];
    for row in band.rows() {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    let k = k as f64;
    acc.iter_mut().for_each(|a| *a /= k);
    Ok(OnsetEnvelope {
        values: acc,
        band_index,
        effective_rate,
    })
}

/// Onset envelopes of all bands straight from the spectrum.
///
/// Rows are generated and folded into their band's running sum one at a
/// time, so memory stays `O(QM)` instead of `O(M^2)`. The result is
/// bit-identical to [`split_bands`] followed by [`band_mean`].
pub fn subband_envelopes(
    spectrum: &Spectrum,
    y_mean: f64,
    k: usize,
    effective_rate: f64,
) -> Result<Vec<OnsetEnvelope>> {
    let rows = StransformRows::new(spectrum, y_mean)?;
    let q = band_count(rows.row_count(), k)?;
    let m = rows.signal_len();

    Ok((0..q)
        .into_par_iter()
        .map(|i| {
            let mut work = rows.scratch();
            let mut row = vec![0.0; m];
            let mut acc = vec![0.0; m];
            for p in i * k..(i + 1) * k {
                rows.magnitude_row_into(p, &mut row, &mut work);
                for (a, v) in acc.iter_mut().zip(&row) {
                    *a += v;
                }
            }
            let kf = k as f64;
            acc.iter_mut().for_each(|a| *a /= kf);
            OnsetEnvelope {
                values: acc,
                band_index: i + 1,
                effective_rate,
            }
        })
        .collect())
}

/// Writes envelopes as CSV: a header of band edges (`low-high` in Hz), then
/// one row per time index with one column per band.
pub fn write_envelopes_csv<W: Write>(envelopes: &[OnsetEnvelope], edges: &[(f64, f64)], out: W) -> Result<()> {
    let to_err = |e: csv::Error| Error::Output {
        path: "<envelope csv>".into(),
        message: e.to_string(),
    };
    if envelopes.len() != edges.len() {
        return Err(Error::config("one band edge pair per envelope is required"));
    }
    let m = envelopes.first().map_or(0, |e| e.values.len());
    if envelopes.iter().any(|e| e.values.len() != m) {
        return Err(Error::config("envelopes differ in length"));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(edges.iter().map(|(lo, hi)| format!("{lo:.3}-{hi:.3}")))
        .map_err(to_err)?;
    for n in 0..m {
        w.write_record(envelopes.iter().map(|e| e.values[n].to_string()))
            .map_err(to_err)?;
    }
    w.flush().map_err(|e| to_err(e.into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tfr::{dft, stransform};
    use ndarray::array;

    fn test_matrix(m: usize) -> STMagnitude {
        let y: Vec<f64> = (0..m)
            .map(|i| (i as f64 * 0.37).sin() + 0.2 * (i as f64 * 1.9).cos())
            .collect();
        let mean = y.iter().sum::<f64>() / m as f64;
        stransform(&dft(&y).unwrap(), mean, m as f64).unwrap()
    }

    #[test]
    fn split_into_two_bands() {
        let st = test_matrix(8);
        let set = split_bands(&st, 2).unwrap();
        assert_eq!(set.bands.len(), 2);
        assert_eq!(set.bands[0], st.values().slice(s![0..2, ..]));
        assert_eq!(set.bands[1], st.values().slice(s![2..4, ..]));
        assert_eq!(set.band_edges, vec![(0.0, 2.0), (2.0, 4.0)]);
    }

    #[test]
    fn single_band_is_whole_matrix() {
        let st = test_matrix(12);
        let set = split_bands(&st, 6).unwrap();
        assert_eq!(set.bands.len(), 1);
        assert_eq!(set.concat(), *st.values());
    }

    #[test]
    fn band_count_at_table_size() {
        assert_eq!(band_count(11030, 1103).unwrap(), 10);
    }

    #[test]
    fn non_dividing_k_reports_both_values() {
        let st = test_matrix(10);
        let err = split_bands(&st, 2).unwrap_err().to_string();
        assert!(err.contains("K=2") && err.contains("5"), "{err}");
    }

    #[test]
    fn mean_of_single_row() {
        let band = array![[1.0, 4.0, 2.0]];
        let env = band_mean(band.view(), 1, 1.0).unwrap();
        assert_eq!(env.values, vec![1.0, 4.0, 2.0]);
    }

    #[test]
    fn mean_of_ones() {
        let band = Array2::<f64>::ones((3, 5));
        assert_eq!(band_mean(band.view(), 1, 1.0).unwrap().values, vec![1.0; 5]);
    }

    #[test]
    fn mean_by_hand() {
        let band = array![[1.0, 2.0, 3.0], [3.0, 2.0, 1.0]];
        assert_eq!(band_mean(band.view(), 1, 1.0).unwrap().values, vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn mean_lies_within_column_range_and_is_linear() {
        let st = test_matrix(40);
        let set = split_bands(&st, 4).unwrap();
        for band in &set.bands {
            let env = band_mean(band.view(), 1, 1.0).unwrap();
            for (n, v) in env.values.iter().enumerate() {
                let col = band.column(n);
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                assert!(lo <= *v && *v <= hi);
            }
        }

        let a = set.bands[0].to_owned();
        let b = set.bands[1].to_owned();
        let (alpha, beta) = (0.7, -2.5);
        let combo = &a * alpha + &b * beta;
        let lhs = band_mean(combo.view(), 1, 1.0).unwrap().values;
        let ra = band_mean(a.view(), 1, 1.0).unwrap().values;
        let rb = band_mean(b.view(), 1, 1.0).unwrap().values;
        for n in 0..lhs.len() {
            assert!((lhs[n] - (alpha * ra[n] + beta * rb[n])).abs() < 1e-12);
        }
    }

    #[test]
    fn streaming_matches_materialized() {
        let m = 60;
        let y: Vec<f64> = (0..m).map(|i| ((i * i) % 7) as f64 - 3.0).collect();
        let mean = y.iter().sum::<f64>() / m as f64;
        let spec = dft(&y).unwrap();
        let st = stransform(&spec, mean, 30.0).unwrap();
        let direct = split_bands(&st, 5).unwrap().envelopes().unwrap();
        let streamed = subband_envelopes(&spec, mean, 5, 30.0).unwrap();
        assert_eq!(direct, streamed);
    }

    #[test]
    fn csv_shape() {
        let envs: Vec<OnsetEnvelope> = (1..=3)
            .map(|i| OnsetEnvelope {
                values: vec![i as f64; 4],
                band_index: i,
                effective_rate: 8.0,
            })
            .collect();
        let edges = band_edges(1, 3, 8, 8.0);
        let mut out = Vec::new();
        write_envelopes_csv(&envs, &edges, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "0.000-1.000,1.000-2.000,2.000-3.000");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1], "1,2,3");
    }
}
