use super::{AudioClip, AudioError};

/// Fixed-length analysis windows taken every `hop` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSeries {
    pub frame_len: usize,
    pub hop: usize,
    pub frames: Vec<Vec<f64>>,
}

impl FrameSeries {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn start_of(&self, k: usize) -> usize {
        k * self.hop
    }
}

/// Converts a duration to a sample count, rounding to nearest.
pub fn ms_to_samples(ms: f64, sample_rate_hz: u32) -> usize {
    (ms * sample_rate_hz as f64 / 1000.0).round() as usize
}

/// Number of whole frames in `n` samples. Trailing partial frames are dropped.
pub fn frame_count(n: usize, frame_len: usize, hop: usize) -> usize {
    if frame_len == 0 || hop == 0 || n < frame_len {
        0
    } else {
        (n - frame_len) / hop + 1
    }
}

pub fn frame_signal(clip: &AudioClip, frame_ms: f64, hop_ms: f64) -> Result<FrameSeries, AudioError> {
    if !(hop_ms > 0.0 && frame_ms >= hop_ms) {
        return Err(AudioError::InvalidParameter(format!(
            "need frame_ms >= hop_ms > 0, got frame {frame_ms} ms, hop {hop_ms} ms"
        )));
    }
    let frame_len = ms_to_samples(frame_ms, clip.sample_rate_hz());
    let hop = ms_to_samples(hop_ms, clip.sample_rate_hz());
    if hop == 0 {
        return Err(AudioError::InvalidParameter(
            "hop rounds to zero samples at this sample rate".into(),
        ));
    }
    let n = clip.len();
    if n < frame_len {
        return Err(AudioError::ClipTooShort { samples: n, frame_len });
    }
    let samples = clip.samples();
    let frames = (0..frame_count(n, frame_len, hop))
        .map(|k| samples[k * hop..k * hop + frame_len].to_vec())
        .collect();
    Ok(FrameSeries { frame_len, hop, frames })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn clip(n: usize) -> AudioClip {
        AudioClip::new(vec![0.0; n], 8000, "t").unwrap()
    }

    #[test]
    fn frame_counts() {
        let fs = frame_signal(&clip(800), 25.0, 10.0).unwrap();
        assert_eq!((fs.frame_len, fs.hop, fs.len()), (200, 80, 8));
        assert_eq!(frame_signal(&clip(200), 25.0, 10.0).unwrap().len(), 1);
        assert!(matches!(
            frame_signal(&clip(199), 25.0, 10.0),
            Err(AudioError::ClipTooShort {
                samples: 199,
                frame_len: 200
            })
        ));
    }

    #[test]
    fn rejects_hop_longer_than_frame() {
        assert!(matches!(
            frame_signal(&clip(800), 10.0, 25.0),
            Err(AudioError::InvalidParameter(_))
        ));
        assert!(frame_signal(&clip(800), 10.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn frame_k_starts_at_k_hop(n in 200usize..3000, hop_ms in 1u32..25) {
            let samples: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
            let clip = AudioClip::new(samples, 8000, "t").unwrap();
            let fs = frame_signal(&clip, 25.0, hop_ms as f64).unwrap();
            prop_assert_eq!(fs.len(), (n - fs.frame_len) / fs.hop + 1);
            for (k, frame) in fs.frames.iter().enumerate() {
                prop_assert_eq!(frame.len(), fs.frame_len);
                let first = (frame[0] * n as f64).round() as usize;
                prop_assert_eq!(first, fs.start_of(k));
            }
        }
    }
}
