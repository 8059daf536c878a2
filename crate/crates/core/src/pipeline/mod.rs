//! Corpus handling and the end-to-end engagement pipeline: labels and their
//! consensus, dyad timelines, evaluation, synthetic corpora and the
//! train/decode/score runner.

mod corpus;
mod eval;
mod labels;
mod report;
mod run;
mod synth;
mod timeline;

use std::path::Path;

use thiserror::Error;

pub use corpus::{
    assign_splits, load_corpus, parse_jsonl, read_jsonl, to_jsonl, CorpusManifest, ManifestEntry, Split, SplitPolicy,
    UtteranceRecord,
};
pub use eval::{evaluate, EvalReport};
pub use labels::{consensus_labels, level_merge, EmotionType, LabelVote, LevelMerge, UtteranceLabels};
pub use report::{fmt_accuracy, Table};
pub use run::{
    decode_records, labeled_rows, prune_rare_classes, rank_features, run_experiment, run_pipeline, score_decoded,
    train_chmm_from_timelines, train_hmm_from_timelines, train_models, training_timelines, DecodeOutput, DecodedDialogue,
    DecodedStep, ExperimentReport, MethodReports, PipelineConfig, Provenance, SelectionConfig, Source, SvmSet, Target,
    TrainedModels, SVM_SET_FORMAT,
};
pub use synth::{default_centers, default_truth, synth_corpus, GeneratorConfig, SynthCorpus};
pub use timeline::{build_timeline, fill_gold, speaking_chain, timeline_order, TimelineEvent};

use crate::audio::AudioError;
use crate::chmm::HmmError;
use crate::features::FeatureError;
use crate::selection::SelectionError;
use crate::svm::SvmError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Hmm(#[from] HmmError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("utterance has no label votes")]
    NoVotes,
    #[error("invalid label: {0}")]
    InvalidLabel(String),
    #[error("lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("dialogue '{dialogue}' has {count} speakers, expected 2")]
    NotTwoSpeakers { dialogue: String, count: usize },
    #[error("{what}: model expects {expected}, classifier provides {got}")]
    AlphabetMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid generator config: {0}")]
    InvalidGeneratorConfig(String),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("no classifier for speaker group '{0}'")]
    UnknownGroup(String),
    #[error("no data: {0}")]
    NoData(String),
}

impl PipelineError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    /// Failures caused by unreadable files rather than invalid input.
    pub fn is_io(&self) -> bool {
        matches!(self, PipelineError::Io { .. } | PipelineError::Audio(AudioError::Io(_)))
    }
}
