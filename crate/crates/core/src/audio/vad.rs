//! Energy-based voice activity detection with hysteresis.
//!
//! A region opens on a frame whose energy reaches the on-threshold and
//! extends over neighbouring frames that stay above the off-threshold. Both
//! thresholds are in dB below the loudest frame of the clip, so segmentation
//! does not depend on recording gain. Region edges are then trimmed to
//! hop-sized blocks that carry energy, short gaps are bridged, and short
//! regions are dropped.

use serde::{Deserialize, Serialize};

use super::frame::{frame_count, ms_to_samples};
use super::AudioClip;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VadConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    /// Frames this many dB below the peak frame (or louder) open a region.
    pub on_db: f64,
    /// Frames this many dB below the peak frame (or louder) keep a region open.
    pub off_db: f64,
    pub min_utterance_ms: f64,
    pub min_gap_ms: f64,
}

impl Default for VadConfig {
    fn default() -> Self {
        Self {
            frame_ms: 25.0,
            hop_ms: 10.0,
            on_db: 30.0,
            off_db: 40.0,
            min_utterance_ms: 250.0,
            min_gap_ms: 300.0,
        }
    }
}

/// Half-open sample range `[start_sample, end_sample)` of one utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceSpan {
    pub start_sample: usize,
    pub end_sample: usize,
    pub speaker: String,
    pub utterance_id: usize,
}

impl UtteranceSpan {
    pub fn new(start_sample: usize, end_sample: usize, speaker: impl Into<String>, utterance_id: usize) -> Self {
        Self {
            start_sample,
            end_sample,
            speaker: speaker.into(),
            utterance_id,
        }
    }

    pub fn len(&self) -> usize {
        self.end_sample.saturating_sub(self.start_sample)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The whole clip as a single span.
    pub fn whole(clip: &AudioClip) -> Self {
        Self::new(0, clip.len(), clip.channel_id(), 0)
    }
}

fn mean_square(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
    }
}

pub fn segment_utterances(clip: &AudioClip, cfg: &VadConfig) -> Vec<UtteranceSpan> {
    let sr = clip.sample_rate_hz();
    let x = clip.samples();
    let frame_len = ms_to_samples(cfg.frame_ms, sr).max(1);
    let hop = ms_to_samples(cfg.hop_ms, sr).max(1);
    let n_frames = frame_count(x.len(), frame_len, hop);
    if n_frames == 0 {
        return Vec::new();
    }

    let energy: Vec<f64> = (0..n_frames).map(|k| mean_square(&x[k * hop..k * hop + frame_len])).collect();
    let peak = energy.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Vec::new();
    }
    let on_level = peak * 10f64.powf(-cfg.on_db / 10.0);
    let off_level = on_level.min(peak * 10f64.powf(-cfg.off_db / 10.0));
    let active = |e: f64| e > 0.0 && e >= off_level;

    // runs above the off-threshold that contain at least one on-frame
    let mut regions: Vec<(usize, usize)> = Vec::new();
    let mut k = 0;
    while k < n_frames {
        if !active(energy[k]) {
            k += 1;
            continue;
        }
        let first = k;
        let mut triggered = false;
        while k < n_frames && active(energy[k]) {
            triggered |= energy[k] >= on_level;
            k += 1;
        }
        if triggered {
            let start = first * hop;
            let end = (k - 1) * hop + frame_len;
            if let Some(trimmed) = trim_to_blocks(x, start, end, hop, off_level) {
                regions.push(trimmed);
            }
        }
    }

    let min_gap = ms_to_samples(cfg.min_gap_ms, sr);
    let mut merged: Vec<(usize, usize)> = Vec::with_capacity(regions.len());
    for (s, e) in regions {
        match merged.last_mut() {
            Some(last) if s <= last.1 || s - last.1 < min_gap => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }

    let min_len = ms_to_samples(cfg.min_utterance_ms, sr);
    merged
        .into_iter()
        .filter(|(s, e)| e - s >= min_len.max(1))
        .enumerate()
        .map(|(id, (s, e))| UtteranceSpan::new(s, e, clip.channel_id(), id))
        .collect()
}

/// Shrinks `[start, end)` to the first and last hop-sized block whose energy
/// reaches `level`.
fn trim_to_blocks(x: &[f64], start: usize, end: usize, hop: usize, level: f64) -> Option<(usize, usize)> {
    let blocks: Vec<(usize, usize)> = (start..end).step_by(hop).map(|b| (b, (b + hop).min(end))).collect();
    let loud = |&(b, e): &(usize, usize)| {
        let en = mean_square(&x[b..e]);
        en > 0.0 && en >= level
    };
    let first = blocks.iter().position(loud)?;
    let last = blocks.iter().rposition(loud)?;
    Some((blocks[first].0, blocks[last].1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SR: u32 = 8000;

    fn tone_bursts(total_s: f64, bursts: &[(f64, f64)]) -> AudioClip {
        let n = (total_s * SR as f64) as usize;
        let mut x = vec![0.0; n];
        for &(from, to) in bursts {
            let (a, b) = ((from * SR as f64) as usize, (to * SR as f64) as usize);
            for (i, v) in x.iter_mut().enumerate().take(b).skip(a) {
                *v = 0.5 * (2.0 * std::f64::consts::PI * 300.0 * i as f64 / SR as f64).sin();
            }
        }
        AudioClip::new(x, SR, "spk").unwrap()
    }

    #[test]
    fn silence_gives_no_spans() {
        let clip = AudioClip::new(vec![0.0; 16000], SR, "s").unwrap();
        assert!(segment_utterances(&clip, &VadConfig::default()).is_empty());
        let tiny = AudioClip::new(vec![0.1; 10], SR, "s").unwrap();
        assert!(segment_utterances(&tiny, &VadConfig::default()).is_empty());
    }

    #[test]
    fn centred_tone_gives_one_span_within_a_hop() {
        let clip = tone_bursts(2.0, &[(0.75, 1.25)]);
        let spans = segment_utterances(&clip, &VadConfig::default());
        assert_eq!(spans.len(), 1);
        let hop = 80i64;
        assert!((spans[0].start_sample as i64 - 6000).abs() <= hop, "{:?}", spans[0]);
        assert!((spans[0].end_sample as i64 - 10000).abs() <= hop, "{:?}", spans[0]);
        assert_eq!(spans[0].speaker, "spk");
    }

    #[test]
    fn separated_bursts_stay_separate() {
        let clip = tone_bursts(3.0, &[(0.5, 1.0), (2.0, 2.5)]);
        let spans = segment_utterances(&clip, &VadConfig::default());
        assert_eq!(spans.len(), 2);
        assert_eq!(spans[0].utterance_id, 0);
        assert_eq!(spans[1].utterance_id, 1);
        assert!(spans[0].end_sample < spans[1].start_sample);
    }

    #[test]
    fn short_gap_is_bridged_and_short_blip_dropped() {
        let clip = tone_bursts(3.0, &[(0.5, 1.0), (1.1, 1.6), (2.5, 2.55)]);
        let spans = segment_utterances(&clip, &VadConfig::default());
        assert_eq!(spans.len(), 1);
        assert!(spans[0].start_sample <= 4000 + 80 && spans[0].end_sample >= 12800 - 80);
    }

    #[test]
    fn resegmenting_padded_spans_is_stable() {
        let clip = tone_bursts(4.0, &[(0.3, 0.9), (1.5, 2.0), (3.0, 3.6)]);
        let cfg = VadConfig::default();
        let spans = segment_utterances(&clip, &cfg);
        let pad = vec![0.0; SR as usize / 2];
        let mut rebuilt = pad.clone();
        for s in &spans {
            rebuilt.extend_from_slice(clip.span_samples(s).unwrap());
            rebuilt.extend_from_slice(&pad);
        }
        let again = segment_utterances(&AudioClip::new(rebuilt, SR, "spk").unwrap(), &cfg);
        assert_eq!(again.len(), spans.len());
    }

    fn voiced_total(spans: &[UtteranceSpan]) -> usize {
        spans.iter().map(|s| s.len()).sum()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn lowering_on_threshold_never_shrinks_coverage(
            amps in proptest::collection::vec(0.0f64..1.0, 20..60),
            on_a in 5.0f64..60.0,
            delta in 0.0f64..30.0,
        ) {
            // piecewise-constant noise-free envelope, 100 ms per segment
            let seg = 800;
            let x: Vec<f64> = amps
                .iter()
                .flat_map(|&a| {
                    let a = a * a * a;
                    (0..seg).map(move |i| a * if i % 2 == 0 { 1.0 } else { -1.0 })
                })
                .collect();
            let clip = AudioClip::new(x, SR, "p").unwrap();
            let strict = VadConfig { on_db: on_a, ..VadConfig::default() };
            let loose = VadConfig { on_db: on_a + delta, ..VadConfig::default() };
            let a = segment_utterances(&clip, &strict);
            let b = segment_utterances(&clip, &loose);
            prop_assert!(voiced_total(&b) >= voiced_total(&a));
            for w in b.windows(2) {
                prop_assert!(w[0].end_sample <= w[1].start_sample);
            }
        }
    }
}
