//! Covariate-aware gait recognition.
//!
//! The pipeline turns binary silhouette sequences into Average Energy
//! Silhouette Images, screens the four anatomical bands of each template
//! for covariates (coats, bags) with Zernike moment distances, extracts
//! oriented-gradient and row-mean features from the clean bands, and
//! identifies subjects with per-combination one-vs-rest linear SVMs.
//!
//! ```
//! use gaitlab::config::PipelineConfig;
//! use gaitlab::silhouette::NormalizationSpec;
//! use gaitlab::synth::{generate, Injection, SynthConfig};
//! use gaitlab::eval::leave_one_out;
//!
//! let mut config = PipelineConfig::default();
//! config.normalization = NormalizationSpec::new(100, 70).unwrap();
//! let synth = SynthConfig {
//!     subjects: 3,
//!     sequences_per_subject: 2,
//!     frames_per_sequence: 50,
//!     cycle_length: 20,
//!     injection: Injection::None,
//!     seed: 1,
//!     normalization: config.normalization,
//! };
//! let sequences = generate(&synth).unwrap();
//! let report = leave_one_out(&sequences, &config).unwrap();
//! assert_eq!(report.cmc[0].1, report.rank1_ccr);
//! ```

pub mod aesi;
pub mod classifier;
pub mod commands;
pub mod config;
pub mod covariate;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod gaitcycle;
pub mod grid;
pub mod pipeline;
pub mod silhouette;
pub mod synth;
pub mod zernike;

pub use error::{Error, Result};
