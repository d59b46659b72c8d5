//! Turn-taking mechanics for dyadic conversation transcripts.
//!
//! The pipeline runs token stream -> utterances -> 10ms communication-state
//! series -> classified gaps/pauses/overlaps, and in parallel token stream
//! -> turns under interchangeable segmentation models -> turn features ->
//! group-comparison statistics. A seeded synthetic generator provides
//! ground-truthed corpora for testing and calibration.

pub mod error;
pub mod features;
pub mod stats;
pub mod synth;
pub mod timing;
pub mod transcript;
pub mod turns;

pub use error::{Error, Result};
