//! Audio input: WAV parsing, framing and utterance segmentation.

mod frame;
mod vad;
mod wav;

pub use frame::{frame_count, frame_signal, ms_to_samples, FrameSeries};
pub use vad::{segment_utterances, UtteranceSpan, VadConfig};
pub use wav::{load_audio, parse_wav, write_wav_pcm16};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed WAV: {0}")]
    MalformedWav(String),
    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),
    #[error("clip too short: {samples} samples, frame needs {frame_len}")]
    ClipTooShort { samples: usize, frame_len: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sample {index} out of [-1, 1]: {value}")]
    SampleOutOfRange { index: usize, value: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A mono PCM signal for one participant.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate_hz: u32,
    channel_id: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32, channel_id: impl Into<String>) -> Result<Self, AudioError> {
        if sample_rate_hz == 0 {
            return Err(AudioError::InvalidParameter("sample rate must be > 0".into()));
        }
        if let Some((index, &value)) = samples.iter().enumerate().find(|(_, v)| !(-1.0..=1.0).contains(*v)) {
            return Err(AudioError::SampleOutOfRange { index, value });
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            channel_id: channel_id.into(),
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn channel_id(&self) -> &str {
        &self.channel_id
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Samples covered by `span`, or `None` when the span leaves the clip.
    pub fn span_samples(&self, span: &UtteranceSpan) -> Option<&[f64]> {
        if span.start_sample < span.end_sample && span.end_sample <= self.samples.len() {
            Some(&self.samples[span.start_sample..span.end_sample])
        } else {
            None
        }
    }
}
