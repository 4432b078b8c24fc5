use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use stbeat::envelopes::write_envelopes_csv;
use stbeat::evalkit::{import_ballroom, read_manifest, write_manifest};
use stbeat::ingest::write_wav_i16;
use stbeat::isolation::score_bands;
use stbeat::pipeline::compute_envelopes;
use stbeat::{
    analyze, dft, downsample, evaluate, fit_to_grid, load_mono, stransform, synth_click_track, ClickTrack, Error,
    IsolationParams, PipelineConfig,
};

const EXIT_ERROR: u8 = 1;
const EXIT_ISOLATION: u8 = 2;

#[derive(Parser)]
#[command(name = "stbeat", version, about = "Tempo estimation from the discrete S-transform")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the tempo of one audio file; JSON on stdout.
    Analyze {
        path: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Write the per-band onset envelopes as CSV.
    Envelopes {
        path: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write per-band regularity diagnostics as JSON.
    Scores {
        path: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the full S-transform magnitude matrix as CSV (large).
    Matrix {
        path: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a `path,bpm` manifest and write a JSON report.
    Evaluate {
        manifest: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the per-item table as CSV.
        #[arg(long)]
        items_csv: Option<PathBuf>,
    },
    /// Generate a synthetic click track (16-bit mono WAV).
    Synth {
        #[arg(long, default_value_t = 120.0)]
        bpm: f64,
        /// Seconds.
        #[arg(long, default_value_t = 20.0)]
        duration: f64,
        /// Burst carrier in Hz.
        #[arg(long, default_value_t = 60.0)]
        carrier: f64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a manifest from Ballroom-style `.bpm` annotations.
    ImportBallroom {
        #[arg(long)]
        audio: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Downsampling factor D (even).
    #[arg(long = "d", default_value_t = 40)]
    downsample: usize,
    /// Rows per band K; derived from the input length when omitted.
    #[arg(long = "k")]
    band_rows: Option<usize>,
    /// Number of bands Q.
    #[arg(long = "q", default_value_t = 10)]
    bands: usize,
    /// Minimum peak distance n_p.
    #[arg(long = "np", default_value_t = 40)]
    min_peak_distance: usize,
    /// Threshold levels H.
    #[arg(long, default_value_t = 100)]
    thresholds: usize,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
}

impl ConfigArgs {
    fn to_config(&self) -> Result<PipelineConfig, Error> {
        let cfg = PipelineConfig {
            downsample: self.downsample,
            band_rows: self.band_rows,
            bands: self.bands,
            isolation: IsolationParams {
                min_peak_distance: self.min_peak_distance,
                thresholds: self.thresholds,
                epsilon: self.epsilon,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

enum Failure {
    Error(String),
    Isolation,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_ERROR);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Isolation) => ExitCode::from(EXIT_ISOLATION),
        Err(Failure::Error(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("STBEAT_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("STBEAT_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Analyze { path, config } => cmd_analyze(&path, &config.to_config()?),
        Command::Envelopes { path, config, out } => {
            let cfg = config.to_config()?;
            let buf = load_mono(&path)?;
            let set = compute_envelopes(&buf, &cfg)?;
            with_output(out.as_deref(), |w| {
                write_envelopes_csv(&set.envelopes, &set.band_edges, w)
            })?;
            eprintln!(
                "{} envelopes of {} samples (K={})",
                set.envelopes.len(),
                set.grid.decimated_len(),
                set.grid.band_rows
            );
            Ok(())
        }
        Command::Scores { path, config, out } => {
            let cfg = config.to_config()?;
            let buf = load_mono(&path)?;
            let set = compute_envelopes(&buf, &cfg)?;
            let scores = score_bands(&set.envelopes, &cfg.isolation);
            with_output(out.as_deref(), |w| write_json(w, &scores))?;
            Ok(())
        }
        Command::Matrix { path, config, out } => {
            let cfg = config.to_config()?;
            let buf = load_mono(&path)?;
            let grid = cfg.resolve_grid(buf.len())?;
            let y = downsample(&fit_to_grid(&buf, &grid)?, grid.downsample)?;
            let mean = y.samples().iter().sum::<f64>() / y.len() as f64;
            let st = stransform(&dft(y.samples())?, mean, y.sample_rate())?;
            with_output(out.as_deref(), |w| {
                st.write_csv(w).map_err(|e| Error::Output {
                    path: out.clone().unwrap_or_else(|| "<stdout>".into()),
                    message: e.to_string(),
                })
            })?;
            eprintln!("{} x {} magnitude matrix", st.rows(), st.cols());
            Ok(())
        }
        Command::Evaluate {
            manifest,
            config,
            out,
            items_csv,
        } => {
            let cfg = config.to_config()?;
            let entries = read_manifest(&manifest)?;
            let report = evaluate(&entries, &cfg)?;
            with_output(out.as_deref(), |w| write_json(w, &report))?;
            if let Some(p) = items_csv {
                with_output(Some(&p), |w| report.write_items_csv(w))?;
            }
            let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.1}%"));
            eprintln!(
                "accuracy1 {} accuracy2 {} ({} of {} estimated)",
                pct(report.accuracy1),
                pct(report.accuracy2),
                report.estimated,
                report.total
            );
            Ok(())
        }
        Command::Synth {
            bpm,
            duration,
            carrier,
            noise,
            seed,
            out,
        } => {
            let spec = ClickTrack {
                bpm,
                duration_secs: duration,
                carrier_hz: carrier,
                sample_rate: 44100,
                noise_amp: noise,
                seed,
            };
            let buf = synth_click_track(&spec)?;
            write_wav_i16(&out, buf.samples(), spec.sample_rate)?;
            eprintln!("wrote {} samples to {}", buf.len(), out.display());
            Ok(())
        }
        Command::ImportBallroom {
            audio,
            annotations,
            out,
        } => {
            let entries = import_ballroom(&audio, &annotations)?;
            with_output(out.as_deref(), |w| write_manifest(&entries, w))?;
            eprintln!("{} annotated tracks", entries.len());
            Ok(())
        }
    }
}

fn cmd_analyze(path: &Path, cfg: &PipelineConfig) -> Result<(), Failure> {
    let buf = load_mono(path)?;
    let analysis = analyze(&buf, cfg)?;
    let stdout = io::stdout();
    match &analysis.outcome {
        Ok(t) => {
            write_json(
                stdout.lock(),
                &json!({
                    "bpm": t.bpm,
                    "band_index": t.selected_band,
                    "score_b": t.score,
                    "isolation_set": t.isolation_set,
                    "effective_rate_hz": t.effective_rate,
                    "gaps": t.best_gaps,
                }),
            )?;
            eprintln!(
                "{}: {} BPM (band {}, b = {:.6})",
                path.display(),
                t.bpm,
                t.selected_band,
                t.score
            );
            Ok(())
        }
        Err(f) => {
            write_json(
                stdout.lock(),
                &json!({
                    "error": "isolation_failure",
                    "scores": f.scores,
                    "degenerate_bands": f.degenerate_bands,
                }),
            )?;
            eprintln!("{}: no band within epsilon of a periodic pattern", path.display());
            Err(Failure::Isolation)
        }
    }
}

fn write_json<W: Write, T: Serialize>(mut w: W, value: &T) -> Result<(), Error> {
    let to_err = |message: String| Error::Output {
        path: "<json>".into(),
        message,
    };
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| to_err(e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| to_err(e.to_string()))
}

/// Runs `f` against `path`, or stdout when no path is given.
fn with_output<F>(path: Option<&Path>, f: F) -> Result<(), Error>
where
    F: FnOnce(&mut dyn Write) -> Result<(), Error>,
{
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| Error::Output {
                path: p.to_path_buf(),
                message: e.to_string(),
            })?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush().map_err(|e| Error::Output {
                path: p.to_path_buf(),
                message: e.to_string(),
            })
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            f(&mut w)
        }
    }
}
