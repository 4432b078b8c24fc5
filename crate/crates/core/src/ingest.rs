//! Audio input: WAV decoding, mono mixdown, integer decimation and trimming
//! to the analysis grid.
//!
//! Decimation is bare index selection (`y[n] = x[nD]`) with no anti-aliasing
//! filter. Content above `sample_rate / (2D)` folds back into the analysis
//! band, so `D` should be chosen such that the rhythm instruments of interest
//! (roughly 32–512 Hz) stay below the new Nyquist frequency. At 44.1 kHz,
//! `D = 40` gives an effective rate of 1102.5 Hz.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};

/// A mono signal and its sample rate in Hz.
///
/// The rate is kept as a real number because decimation produces
/// non-integer rates (44100 / 40 = 1102.5).
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::config("audio buffer must hold at least one sample"));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::config(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Decimation factor `D`, subband height `K` and subband count `Q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridConfig {
    pub downsample: usize,
    pub band_rows: usize,
    pub bands: usize,
}

impl GridConfig {
    pub fn new(downsample: usize, band_rows: usize, bands: usize) -> Result<Self> {
        validate_factor(downsample)?;
        if band_rows == 0 {
            return Err(Error::config("subband row count K must be positive"));
        }
        if bands == 0 {
            return Err(Error::config("subband count Q must be positive"));
        }
        Ok(Self {
            downsample,
            band_rows,
            bands,
        })
    }

    /// Length `M = 2QK` of the decimated signal.
    pub fn decimated_len(&self) -> usize {
        2 * self.bands * self.band_rows
    }

    /// Input length `2QKD` that [`fit_to_grid`] trims to.
    pub fn required_len(&self) -> usize {
        self.decimated_len() * self.downsample
    }
}

fn validate_factor(d: usize) -> Result<()> {
    if d < 2 || !d.is_multiple_of(2) {
        return Err(Error::config(format!(
            "downsampling factor D must be an even integer >= 2, got {d}"
        )));
    }
    Ok(())
}

/// Reads a 16-bit integer or 32-bit float PCM WAV file and mixes it to mono.
pub fn load_mono(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let decode_err = |e: hound::Error| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let reader = WavReader::new(BufReader::new(file)).map_err(decode_err)?;
    let spec = reader.spec();

    if spec.channels == 0 || spec.channels > 2 {
        return Err(Error::UnsupportedEncoding {
            path: path.to_path_buf(),
            detail: format!("{} channels (only mono and stereo are supported)", spec.channels),
        });
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(decode_err)?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(decode_err)?,
        (format, bits) => {
            return Err(Error::UnsupportedEncoding {
                path: path.to_path_buf(),
                detail: format!("{bits}-bit {format:?} samples"),
            })
        }
    };

    let samples: Vec<f64> = if spec.channels == 2 {
        interleaved
            .chunks_exact(2)
            .map(|frame| 0.5 * (frame[0] + frame[1]))
            .collect()
    } else {
        interleaved
    };

    if samples.is_empty() {
        return Err(Error::EmptyAudio {
            path: path.to_path_buf(),
        });
    }
    AudioBuffer::new(samples, f64::from(spec.sample_rate))
}

/// Writes a mono 16-bit PCM WAV. Samples are clamped to the representable
/// range; the scale (32768) matches [`load_mono`] so a round trip is exact
/// to half an LSB.
pub fn write_wav_i16(path: impl AsRef<Path>, samples: &[f64], sample_rate: u32) -> Result<()> {
    let path = path.as_ref();
    let out_err = |e: hound::Error| Error::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let spec = WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(out_err)?;
    for &s in samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(out_err)?;
    }
    writer.finalize().map_err(out_err)
}

/// `y[n] = x[nD]` for `n = 0 .. 1 + (N-1)/D`.
pub fn downsample(buf: &AudioBuffer, factor: usize) -> Result<AudioBuffer> {
    validate_factor(factor)?;
    let samples: Vec<f64> = buf.samples.iter().step_by(factor).copied().collect();
    Ok(AudioBuffer {
        samples,
        sample_rate: buf.sample_rate / factor as f64,
    })
}

/// Trims the tail so that decimation by `D` yields exactly `2QK` samples.
///
/// The returned prefix has length `2QKD`, the largest `N'` satisfying
/// `(N' - 1) / D == 2QK - 1`.
pub fn fit_to_grid(buf: &AudioBuffer, cfg: &GridConfig) -> Result<AudioBuffer> {
    let need = cfg.required_len();
    if buf.len() < need {
        return Err(Error::InsufficientAudio { have: buf.len(), need });
    }
    if buf.len() == need {
        return Ok(buf.clone());
    }
    Ok(AudioBuffer {
        samples: buf.samples[..need].to_vec(),
        sample_rate: buf.sample_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn buf(samples: Vec<f64>, rate: f64) -> AudioBuffer {
        AudioBuffer::new(samples, rate).unwrap()
    }

    #[test]
    fn rejects_invalid_buffers() {
        assert!(AudioBuffer::new(vec![], 10.0).is_err());
        assert!(AudioBuffer::new(vec![1.0], 0.0).is_err());
        assert!(matches!(
            AudioBuffer::new(vec![0.0, f64::NAN], 10.0),
            Err(Error::NonFinite { index: 1 })
        ));
    }

    #[test]
    fn downsample_by_two() {
        let b = buf((0..10).map(f64::from).collect(), 10.0);
        let y = downsample(&b, 2).unwrap();
        assert_eq!(y.samples(), &[0.0, 2.0, 4.0, 6.0, 8.0]);
        assert_eq!(y.sample_rate(), 5.0);
    }

    #[test]
    fn downsample_cd_rate_by_forty() {
        let b = buf(vec![0.0; 176_400], 44100.0);
        let y = downsample(&b, 40).unwrap();
        assert_eq!(y.len(), 4410);
        assert_eq!(y.sample_rate(), 1102.5);
    }

    #[test]
    fn downsample_factor_equal_to_length() {
        let b = buf(vec![3.0; 8], 8.0);
        let y = downsample(&b, 8).unwrap();
        assert_eq!(y.samples(), &[3.0]);
    }

    #[test]
    fn downsample_rejects_odd_or_small_factor() {
        let b = buf(vec![0.0; 8], 8.0);
        for d in [0, 1, 3, 7] {
            assert!(matches!(downsample(&b, d), Err(Error::Config(_))), "D={d}");
        }
    }

    #[test]
    fn fit_to_grid_four_second_excerpt() {
        let cfg = GridConfig::new(40, 441, 5).unwrap();
        // Every N' in 176361..=176400 satisfies the grid equation; the
        // largest one is returned.
        let valid: Vec<usize> = (1..=176_400usize).filter(|n| (n - 1) / 40 == 2 * 5 * 441 - 1).collect();
        assert_eq!(valid.first(), Some(&176_361));
        assert_eq!(valid.last(), Some(&176_400));

        let b = buf(vec![0.5; 176_400], 44100.0);
        let fitted = fit_to_grid(&b, &cfg).unwrap();
        assert_eq!(fitted.len(), 176_400);
        assert_eq!(downsample(&fitted, 40).unwrap().len(), 4410);

        let longer = buf((0..180_000).map(|i| i as f64 * 1e-6).collect(), 44100.0);
        let fitted = fit_to_grid(&longer, &cfg).unwrap();
        assert_eq!(fitted.len(), *valid.last().unwrap());
        assert_eq!(fitted.samples(), &longer.samples()[..176_400]);
    }

    #[test]
    fn fit_to_grid_conforming_input_unchanged() {
        let cfg = GridConfig::new(2, 3, 2).unwrap();
        let b = buf((0..24).map(f64::from).collect(), 100.0);
        assert_eq!(fit_to_grid(&b, &cfg).unwrap(), b);
    }

    #[test]
    fn fit_to_grid_one_short() {
        let cfg = GridConfig::new(4, 3, 2).unwrap();
        let b = buf(vec![0.0; cfg.required_len() - 1], 100.0);
        match fit_to_grid(&b, &cfg) {
            Err(Error::InsufficientAudio { have, need }) => {
                assert_eq!(need, 48);
                assert_eq!(have, 47);
            }
            other => panic!("expected insufficient audio, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn downsample_selects_every_dth(
            samples in prop::collection::vec(-1.0f64..1.0, 1..200),
            half in 1usize..10,
        ) {
            let d = 2 * half;
            let b = buf(samples.clone(), 1000.0);
            let y = downsample(&b, d).unwrap();
            prop_assert_eq!(y.len(), 1 + (samples.len() - 1) / d);
            for (n, v) in y.samples().iter().enumerate() {
                prop_assert_eq!(*v, samples[n * d]);
            }
        }

        #[test]
        fn fitted_then_downsampled_has_grid_length(
            half in 1usize..6,
            k in 1usize..20,
            q in 1usize..6,
            extra in 0usize..500,
        ) {
            let cfg = GridConfig::new(2 * half, k, q).unwrap();
            let n = cfg.required_len() + extra;
            let b = buf(vec![0.25; n], 8000.0);
            let y = downsample(&fit_to_grid(&b, &cfg).unwrap(), cfg.downsample).unwrap();
            prop_assert_eq!(y.len(), 2 * q * k);
        }
    }
}
