//! # stbeat
//!
//! Tempo estimation from the discrete S-transform.
//!
//! The excerpt is decimated, transformed into an `(M/2) x M` S-transform
//! magnitude matrix, cut into `Q` frequency bands of `K` rows, and reduced
//! to one onset envelope per band (the band's column mean). Each envelope is
//! then scored by how regularly its strongest pulses are spaced; the most
//! regular band, if regular enough, gives the tempo.
//!
//! ```no_run
//! use stbeat::{analyze, load_mono, PipelineConfig};
//!
//! let audio = load_mono("excerpt.wav")?;
//! let analysis = analyze(&audio, &PipelineConfig::default())?;
//! match analysis.outcome {
//!     Ok(tempo) => println!("{} BPM (band {})", tempo.bpm, tempo.selected_band),
//!     Err(failure) => println!("no periodic band: {:?}", failure.scores),
//! }
//! # Ok::<(), stbeat::Error>(())
//! ```

pub mod envelopes;
pub mod error;
pub mod evalkit;
pub mod ingest;
pub mod isolation;
pub mod pipeline;
pub mod tfr;

pub use envelopes::{band_mean, split_bands, subband_envelopes, OnsetEnvelope, SubbandSet};
pub use error::{Error, Result};
pub use evalkit::{accuracy1, accuracy2, evaluate, synth_click_track, ClickTrack, EvalReport, GroundTruthEntry};
pub use ingest::{downsample, fit_to_grid, load_mono, AudioBuffer, GridConfig};
pub use isolation::{
    bpm_estimate, isolate, BandScore, ClusterAnalysis, IsolationFailure, IsolationParams, TempoEstimate,
};
pub use pipeline::{analyze, compute_envelopes, Analysis, EnvelopeSet, PipelineConfig};
pub use tfr::{dft, stransform, STMagnitude, Spectrum, StransformRows};
