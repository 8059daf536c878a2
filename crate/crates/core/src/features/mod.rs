//! The 46-value acoustic feature vector of one utterance.
//!
//! | slots  | group                                                              |
//! |--------|--------------------------------------------------------------------|
//! | 0-6    | F0 over voiced frames: mean, max, min, std, range, p25, p75 (Hz)    |
//! | 7-13   | F0 first difference (Hz/frame): mean, max, min, std, range, mean and std of its absolute value |
//! | 14-20  | voicing: voiced time ratio, mean/std of voiced-run frames, run count, voiced frame ratio, longest run, mean of per-run max F0 |
//! | 21-30  | frame energy mean, std, max, median; band energies <200, 200-300, 300-500, 500-1k, 1k-2k, >=2k Hz |
//! | 31-35  | frame energy first difference: mean, std, max, median, min          |
//! | 36-39  | non-silent runs: mean/std frames, non-silent frame ratio, longest run |
//! | 40-45  | F1, F2, F3, B1, B2, B3 (Hz)                                         |
//!
//! When an utterance has no voiced frames every voicing-dependent value is 0,
//! and a statistic that needs two values is 0 when only one exists.

mod energy;
mod formant;
mod pitch;

pub use energy::{energy_features, EnergyConfig, BAND_EDGES_HZ};
pub use formant::{formant_features, lpc, resonances, FormantConfig, Resonance};
pub use pitch::{pitch_stats, track_pitch, PitchConfig, PitchTrack};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{AudioClip, UtteranceSpan};

pub const FEATURE_COUNT: usize = 46;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "pitch_mean",
    "pitch_max",
    "pitch_min",
    "pitch_std",
    "pitch_range",
    "pitch_p25",
    "pitch_p75",
    "dpitch_mean",
    "dpitch_max",
    "dpitch_min",
    "dpitch_std",
    "dpitch_range",
    "dpitch_abs_mean",
    "dpitch_abs_std",
    "voiced_time_ratio",
    "voiced_run_mean_frames",
    "voiced_run_std_frames",
    "voiced_run_count",
    "voiced_frame_ratio",
    "voiced_run_max_frames",
    "voiced_run_max_pitch_mean",
    "energy_mean",
    "energy_std",
    "energy_max",
    "energy_median",
    "band_0_200",
    "band_200_300",
    "band_300_500",
    "band_500_1000",
    "band_1000_2000",
    "band_2000_up",
    "denergy_mean",
    "denergy_std",
    "denergy_max",
    "denergy_median",
    "denergy_min",
    "nonsilent_run_mean_frames",
    "nonsilent_run_std_frames",
    "nonsilent_frame_ratio",
    "nonsilent_run_max_frames",
    "f1",
    "f2",
    "f3",
    "b1",
    "b2",
    "b3",
];

/// Index of a feature by name.
pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|&n| n == name)
}

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("span [{start}, {end}) is outside the clip of {len} samples")]
    SpanOutOfRange { start: usize, end: usize, len: usize },
    #[error("feature vector must have {FEATURE_COUNT} values, got {0}")]
    WrongLength(usize),
    #[error("feature vector holds a non-finite value at slot {0}")]
    NonFinite(usize),
}

pub(crate) fn span_slice<'a>(clip: &'a AudioClip, span: &UtteranceSpan) -> Result<&'a [f64], FeatureError> {
    clip.span_samples(span).ok_or(FeatureError::SpanOutOfRange {
        start: span.start_sample,
        end: span.end_sample,
        len: clip.len(),
    })
}

/// Fixed-order acoustic description of one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self, FeatureError> {
        if values.len() != FEATURE_COUNT {
            return Err(FeatureError::WrongLength(values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite(i));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.0[i])
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = FeatureError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(v: FeatureVector) -> Self {
        v.0
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub pitch: PitchConfig,
    pub energy: EnergyConfig,
    pub formant: FormantConfig,
}

pub fn extract_features(clip: &AudioClip, span: &UtteranceSpan, cfg: &FeatureConfig) -> Result<FeatureVector, FeatureError> {
    let x = span_slice(clip, span)?;
    let sr = clip.sample_rate_hz();
    let track = pitch::track_pitch_samples(x, sr, &cfg.pitch);
    let mut values = Vec::with_capacity(FEATURE_COUNT);
    values.extend_from_slice(&pitch_stats(&track));
    values.extend_from_slice(&energy::energy_features_samples(x, sr, &cfg.energy));
    values.extend_from_slice(&formant::formants_for_track(x, &track, &cfg.formant));
    FeatureVector::new(values)
}
