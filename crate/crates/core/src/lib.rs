//! Conversational engagement estimation from two-party speech.
//!
//! The crate is organised as a multilevel pipeline:
//!
//! * [`audio`] reads PCM WAV files, frames signals and finds utterances with
//!   an energy VAD.
//! * [`features`] turns one utterance into the 46-value prosodic/spectral
//!   [`features::FeatureVector`].
//! * [`selection`] ranks features with ReliefF.
//! * [`svm`] trains polynomial-kernel C-SVMs (SMO) combined one-vs-rest to
//!   predict emotion types or discrete arousal/valence/engagement levels.
//! * [`chmm`] trains single-chain and two-chain coupled HMMs by counting and
//!   decodes engagement with Viterbi.
//! * [`pipeline`] glues it together: label ingestion, dyad timelines,
//!   synthetic corpora, evaluation and the end-to-end runner used by the CLI.

pub mod audio;
pub mod chmm;
pub mod features;
pub mod pipeline;
pub mod selection;
pub mod stats;
pub mod svm;
