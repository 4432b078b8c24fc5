//! Dataset evaluation and synthetic test material.
//!
//! Accuracy 1 accepts estimates within 4% of the annotated tempo. Accuracy 2
//! also accepts 4% agreement with half, double, three times or one third of
//! it. Isolation failures and unreadable files count as misses in both.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{load_mono, AudioBuffer};
use crate::pipeline::{analyze, PipelineConfig};

/// Tolerance as a percentage of the reference tempo.
const TOLERANCE_PERCENT: f64 = 4.0;

/// Tempo multipliers for Accuracy 2 as `(numerator, denominator)`.
const METRICAL_LEVELS: [(f64, f64); 5] = [(1.0, 3.0), (1.0, 2.0), (1.0, 1.0), (2.0, 1.0), (3.0, 1.0)];

pub fn accuracy1(estimate: f64, truth: f64) -> bool {
    (estimate - truth).abs() <= TOLERANCE_PERCENT * truth / 100.0
}

pub fn accuracy2(estimate: f64, truth: f64) -> bool {
    METRICAL_LEVELS
        .iter()
        .any(|&(num, den)| accuracy1(estimate, truth * num / den))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthEntry {
    pub audio_path: PathBuf,
    pub tempo: f64,
}

/// Reads a `path,bpm` manifest. A first line whose tempo column is not a
/// number is taken as a header. Relative paths resolve against the
/// manifest's directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<GroundTruthEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new(""));
    let bad = |line: usize, msg: &str| Error::Decode {
        path: path.to_path_buf(),
        message: format!("line {line}: {msg}"),
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(i + 1, &e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() < 2 {
            return Err(bad(i + 1, "expected `path,bpm`"));
        }
        let tempo = match record[1].parse::<f64>() {
            Ok(t) => t,
            Err(_) if i == 0 => continue,
            Err(_) => return Err(bad(i + 1, "tempo is not a number")),
        };
        if !(tempo.is_finite() && tempo > 0.0) {
            return Err(bad(i + 1, "tempo must be positive"));
        }
        let audio = PathBuf::from(&record[0]);
        entries.push(GroundTruthEntry {
            audio_path: if audio.is_relative() { base.join(audio) } else { audio },
            tempo,
        });
    }
    Ok(entries)
}

pub fn write_manifest<W: Write>(entries: &[GroundTruthEntry], out: W) -> Result<()> {
    let to_err = |e: csv::Error| Error::Output {
        path: "<manifest>".into(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["path", "bpm"]).map_err(to_err)?;
    for e in entries {
        w.write_record([e.audio_path.display().to_string(), e.tempo.to_string()])
            .map_err(to_err)?;
    }
    w.flush().map_err(|e| to_err(e.into()))
}

fn walk_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let io = |source| Error::Io {
        path: dir.to_path_buf(),
        source,
    };
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.is_dir() {
            walk_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

fn has_extension(path: &Path, ext: &str) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

/// Pairs audio files with Ballroom-style annotations: one `<stem>.bpm` file
/// per track holding the tempo as its first token. Both directories are
/// searched recursively; tracks without an annotation are skipped. Entries
/// are sorted by audio path.
pub fn import_ballroom(audio_dir: &Path, annotation_dir: &Path) -> Result<Vec<GroundTruthEntry>> {
    let mut annotations = Vec::new();
    walk_files(annotation_dir, &mut annotations)?;
    let mut tempi = BTreeMap::new();
    for path in annotations.into_iter().filter(|p| has_extension(p, "bpm")) {
        let text = fs::read_to_string(&path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        let tempo = text
            .split_whitespace()
            .next()
            .and_then(|t| t.parse::<f64>().ok())
            .filter(|t| t.is_finite() && *t > 0.0)
            .ok_or_else(|| Error::Decode {
                path: path.clone(),
                message: "annotation does not start with a positive tempo".into(),
            })?;
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            tempi.insert(stem.to_owned(), tempo);
        }
    }

    let mut audio = Vec::new();
    walk_files(audio_dir, &mut audio)?;
    audio.retain(|p| has_extension(p, "wav"));
    audio.sort();
    Ok(audio
        .into_iter()
        .filter_map(|p| {
            let tempo = *tempi.get(p.file_stem()?.to_str()?)?;
            Some(GroundTruthEntry { audio_path: p, tempo })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemResult {
    pub path: String,
    pub truth: f64,
    pub estimate: Option<f64>,
    pub acc1_pass: bool,
    pub acc2_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub total: usize,
    pub estimated: usize,
    /// Percentages over `total`; `None` for an empty dataset.
    pub accuracy1: Option<f64>,
    pub accuracy2: Option<f64>,
    pub failures: Vec<Failure>,
    pub per_item: Vec<ItemResult>,
}

impl EvalReport {
    pub fn from_items(per_item: Vec<ItemResult>, failures: Vec<Failure>) -> Self {
        let total = per_item.len();
        let estimated = per_item.iter().filter(|i| i.estimate.is_some()).count();
        let pct = |count: usize| (total > 0).then(|| 100.0 * count as f64 / total as f64);
        Self {
            total,
            estimated,
            accuracy1: pct(per_item.iter().filter(|i| i.acc1_pass).count()),
            accuracy2: pct(per_item.iter().filter(|i| i.acc2_pass).count()),
            failures,
            per_item,
        }
    }

    pub fn write_items_csv<W: Write>(&self, out: W) -> Result<()> {
        let to_err = |e: csv::Error| Error::Output {
            path: "<items csv>".into(),
            message: e.to_string(),
        };
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["path", "truth", "estimate", "acc1", "acc2"])
            .map_err(to_err)?;
        for i in &self.per_item {
            w.write_record([
                i.path.clone(),
                i.truth.to_string(),
                i.estimate.map(|e| e.to_string()).unwrap_or_default(),
                i.acc1_pass.to_string(),
                i.acc2_pass.to_string(),
            ])
            .map_err(to_err)?;
        }
        w.flush().map_err(|e| to_err(e.into()))
    }
}

fn estimate_entry(entry: &GroundTruthEntry, cfg: &PipelineConfig) -> std::result::Result<f64, String> {
    let buf = load_mono(&entry.audio_path).map_err(|e| e.to_string())?;
    let analysis = analyze(&buf, cfg).map_err(|e| e.to_string())?;
    analysis.outcome.map(|t| t.bpm).map_err(|e| e.to_string())
}

/// Runs the pipeline on every entry. Entries are processed in parallel;
/// the report keeps input order.
pub fn evaluate(entries: &[GroundTruthEntry], cfg: &PipelineConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let outcomes: Vec<_> = entries.par_iter().map(|e| estimate_entry(e, cfg)).collect();

    let mut failures = Vec::new();
    let per_item = entries
        .iter()
        .zip(outcomes)
        .map(|(entry, outcome)| {
            let path = entry.audio_path.display().to_string();
            let estimate = match outcome {
                Ok(bpm) => Some(bpm),
                Err(reason) => {
                    failures.push(Failure {
                        path: path.clone(),
                        reason,
                    });
                    None
                }
            };
            ItemResult {
                acc1_pass: estimate.is_some_and(|e| accuracy1(e, entry.tempo)),
                acc2_pass: estimate.is_some_and(|e| accuracy2(e, entry.tempo)),
                path,
                truth: entry.tempo,
                estimate,
            }
        })
        .collect();
    Ok(EvalReport::from_items(per_item, failures))
}

/// Parameters of a synthetic click track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClickTrack {
    pub bpm: f64,
    pub duration_secs: f64,
    pub carrier_hz: f64,
    pub sample_rate: u32,
    pub noise_amp: f64,
    pub seed: u64,
}

impl Default for ClickTrack {
    fn default() -> Self {
        Self {
            bpm: 120.0,
            duration_secs: 20.0,
            carrier_hz: 60.0,
            sample_rate: 44100,
            noise_amp: 0.0,
            seed: 0,
        }
    }
}

pub const BURST_SECS: f64 = 0.05;
pub const BURST_AMPLITUDE: f64 = 0.8;

impl ClickTrack {
    pub fn validate(&self) -> Result<()> {
        if !(30.0..=300.0).contains(&self.bpm) {
            return Err(Error::config(format!("bpm must lie in [30, 300], got {}", self.bpm)));
        }
        if !(self.duration_secs.is_finite() && self.duration_secs > 0.0) {
            return Err(Error::config("duration must be positive"));
        }
        if !(32.0..=512.0).contains(&self.carrier_hz) {
            return Err(Error::config(format!(
                "carrier must lie in [32, 512] Hz, got {}",
                self.carrier_hz
            )));
        }
        if self.sample_rate == 0 || f64::from(self.sample_rate) <= 2.0 * self.carrier_hz {
            return Err(Error::config("sample rate must exceed twice the carrier frequency"));
        }
        if !(0.0..1.0 - BURST_AMPLITUDE).contains(&self.noise_amp) {
            return Err(Error::config(format!(
                "noise amplitude must lie in [0, {}), got {}",
                1.0 - BURST_AMPLITUDE,
                self.noise_amp
            )));
        }
        Ok(())
    }

    /// Onset times in seconds: every `60 / bpm` from 0 while inside the track.
    pub fn onsets(&self) -> Vec<f64> {
        let period = 60.0 / self.bpm;
        (0..)
            .map(|k| k as f64 * period)
            .take_while(|t| *t < self.duration_secs)
            .collect()
    }
}

/// Hann-windowed sine bursts of [`BURST_SECS`] at each onset, plus uniform
/// noise in `[-noise_amp, noise_amp]`.
pub fn synth_click_track(spec: &ClickTrack) -> Result<AudioBuffer> {
    spec.validate()?;
    let rate = f64::from(spec.sample_rate);
    let len = (spec.duration_secs * rate).round() as usize;
    let mut samples = vec![0.0; len.max(1)];

    let burst_len = (BURST_SECS * rate).round() as usize;
    let burst: Vec<f64> = (0..burst_len)
        .map(|i| {
            let t = i as f64 / rate;
            let window = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / burst_len as f64).cos();
            BURST_AMPLITUDE * window * (2.0 * std::f64::consts::PI * spec.carrier_hz * t).sin()
        })
        .collect();
    for onset in spec.onsets() {
        let start = (onset * rate).round() as usize;
        for (slot, b) in samples.iter_mut().skip(start).zip(&burst) {
            *slot += b;
        }
    }

    if spec.noise_amp > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for s in &mut samples {
            *s += rng.random_range(-spec.noise_amp..=spec.noise_amp);
        }
    }
    AudioBuffer::new(samples, rate)
}
