//! Engagement decoding: a single-chain HMM and a two-chain coupled HMM over
//! discrete emotional-state observations.
//!
//! States and symbols are 0-based indices. Both models are trained by
//! counting over gold-labelled sequences with additive smoothing and decoded
//! with max-product Viterbi in log space. Among equally scoring paths the
//! decoders return the lexicographically smallest one.

mod coupled;
mod hmm;

pub use coupled::{
    coupled_step_score, train_chmm_supervised, viterbi_coupled, ChainParams, ChmmModel, CoupledPath, DyadStep, DyadTimeline,
    CHMM_FORMAT,
};
pub use hmm::{train_hmm_supervised, viterbi_hmm, viterbi_hmm_partial, HmmModel, LabeledSequence, ViterbiPath, HMM_FORMAT};

use thiserror::Error;

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum HmmError {
    #[error("no training steps")]
    EmptyTraining,
    #[error("state {state} out of range for {n_states} states")]
    StateOutOfRange { state: usize, n_states: usize },
    #[error("symbol {symbol} out of range for {n_symbols} symbols")]
    SymbolOutOfRange { symbol: usize, n_symbols: usize },
    #[error("observation sequence is empty")]
    EmptyObservation,
    #[error("gold state missing for chain {chain} at step {step}")]
    MissingGold { step: usize, chain: usize },
    #[error("sequence lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid timeline: {0}")]
    InvalidTimeline(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// Smoothed row-normalised counts: `(c + alpha) / (sum + alpha * width)`.
/// A row with no mass at all becomes uniform.
pub(crate) fn normalize_rows(counts: &[Vec<f64>], alpha: f64) -> Vec<Vec<f64>> {
    counts.iter().map(|row| normalize(row, alpha)).collect()
}

pub(crate) fn normalize(row: &[f64], alpha: f64) -> Vec<f64> {
    let width = row.len() as f64;
    let total: f64 = row.iter().sum::<f64>() + alpha * width;
    if total > 0.0 {
        row.iter().map(|c| (c + alpha) / total).collect()
    } else {
        vec![1.0 / width; row.len()]
    }
}

pub(crate) fn log_matrix(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.iter().map(|p| p.ln()).collect()).collect()
}

/// First index of the maximum; `-inf` everywhere yields index 0.
pub(crate) fn first_argmax(values: impl IntoIterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if i == 0 || v > best.1 {
            best = (i, v);
        }
    }
    best
}

pub(crate) fn check_stochastic(name: &str, rows: &[Vec<f64>], width: usize) -> Result<(), HmmError> {
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(HmmError::InvalidModel(format!(
                "{name} row {i} has {} entries, expected {width}",
                row.len()
            )));
        }
        if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(HmmError::InvalidModel(format!(
                "{name} row {i} has a negative or non-finite entry"
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(HmmError::InvalidModel(format!("{name} row {i} sums to {sum}")));
        }
    }
    Ok(())
}

pub(crate) fn default_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}
