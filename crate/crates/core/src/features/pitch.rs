//! Autocorrelation pitch tracking and the pitch, pitch-derivative and
//! voiced-duration statistics.

use serde::{Deserialize, Serialize};

use super::{span_slice, FeatureError};
use crate::audio::{frame_count, ms_to_samples, AudioClip, UtteranceSpan};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PitchConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
    /// Minimum normalized autocorrelation peak for a frame to count as voiced.
    pub voicing_threshold: f64,
    /// Frames whose absolute peak is below this fraction of the span peak are
    /// treated as silent (and therefore unvoiced).
    pub silence_threshold: f64,
    /// Among candidate lag peaks, the shortest one reaching this fraction of
    /// the strongest peak wins. Guards against octave-down errors.
    pub octave_ratio: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        Self {
            frame_ms: 40.0,
            hop_ms: 10.0,
            f0_min_hz: 75.0,
            f0_max_hz: 500.0,
            voicing_threshold: 0.45,
            silence_threshold: 0.03,
            octave_ratio: 0.95,
        }
    }
}

/// Per-frame F0 estimates. Unvoiced frames carry `f0_hz == 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchTrack {
    pub f0_hz: Vec<f64>,
    pub voiced: Vec<bool>,
    pub frame_len: usize,
    pub hop: usize,
    pub sample_rate_hz: u32,
}

impl PitchTrack {
    pub fn len(&self) -> usize {
        self.f0_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0_hz.is_empty()
    }

    pub fn voiced_fraction(&self) -> f64 {
        if self.voiced.is_empty() {
            0.0
        } else {
            self.voiced.iter().filter(|&&v| v).count() as f64 / self.voiced.len() as f64
        }
    }

    /// F0 values of each maximal voiced run.
    pub fn voiced_regions(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        let mut start = None;
        for (k, &v) in self.voiced.iter().enumerate() {
            match (v, start) {
                (true, None) => start = Some(k),
                (false, Some(s)) => {
                    out.push(&self.f0_hz[s..k]);
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push(&self.f0_hz[s..]);
        }
        out
    }
}

pub fn track_pitch(clip: &AudioClip, span: &UtteranceSpan, cfg: &PitchConfig) -> Result<PitchTrack, FeatureError> {
    let x = span_slice(clip, span)?;
    Ok(track_pitch_samples(x, clip.sample_rate_hz(), cfg))
}

pub(crate) fn track_pitch_samples(x: &[f64], sample_rate_hz: u32, cfg: &PitchConfig) -> PitchTrack {
    let sr = sample_rate_hz as f64;
    let frame_len = ms_to_samples(cfg.frame_ms, sample_rate_hz).max(1);
    let hop = ms_to_samples(cfg.hop_ms, sample_rate_hz).max(1);
    let n_frames = frame_count(x.len(), frame_len, hop);

    let min_lag = ((sr / cfg.f0_max_hz).floor() as usize).max(2);
    let max_lag = ((sr / cfg.f0_min_hz).ceil() as usize).min(frame_len.saturating_sub(frame_len / 4 + 1));
    let span_peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut f0_hz = vec![0.0; n_frames];
    let mut voiced = vec![false; n_frames];
    if span_peak == 0.0 || max_lag <= min_lag {
        return PitchTrack {
            f0_hz,
            voiced,
            frame_len,
            hop,
            sample_rate_hz,
        };
    }

    let mut buf = vec![0.0; frame_len];
    let mut r = vec![0.0; max_lag + 2];
    for k in 0..n_frames {
        let frame = &x[k * hop..k * hop + frame_len];
        let frame_peak = frame.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if frame_peak < cfg.silence_threshold * span_peak {
            continue;
        }
        let m = stats::mean(frame);
        for (b, v) in buf.iter_mut().zip(frame) {
            *b = v - m;
        }
        for (lag, slot) in r.iter_mut().enumerate().take(max_lag + 2).skip(min_lag - 1) {
            *slot = normalized_autocorrelation(&buf, lag);
        }
        if let Some(lag) = pick_lag(&r, min_lag, max_lag, cfg) {
            let f0 = (sr / lag).clamp(cfg.f0_min_hz, cfg.f0_max_hz);
            f0_hz[k] = f0;
            voiced[k] = true;
        }
    }
    PitchTrack {
        f0_hz,
        voiced,
        frame_len,
        hop,
        sample_rate_hz,
    }
}

/// Correlation coefficient between the frame and itself shifted by `lag`.
fn normalized_autocorrelation(x: &[f64], lag: usize) -> f64 {
    if lag >= x.len() {
        return 0.0;
    }
    let (a, b) = (&x[..x.len() - lag], &x[lag..]);
    let mut cross = 0.0;
    let mut ea = 0.0;
    let mut eb = 0.0;
    for (u, v) in a.iter().zip(b) {
        cross += u * v;
        ea += u * u;
        eb += v * v;
    }
    let denom = (ea * eb).sqrt();
    if denom > 0.0 {
        cross / denom
    } else {
        0.0
    }
}

/// Chooses the period (in fractional samples) from the correlation curve.
fn pick_lag(r: &[f64], min_lag: usize, max_lag: usize, cfg: &PitchConfig) -> Option<f64> {
    let peaks: Vec<usize> = (min_lag..=max_lag).filter(|&l| r[l] > r[l - 1] && r[l] >= r[l + 1]).collect();
    let best = peaks.iter().map(|&l| r[l]).fold(f64::NEG_INFINITY, f64::max);
    if best.is_nan() || best < cfg.voicing_threshold {
        return None;
    }
    let lag = *peaks.iter().find(|&&l| r[l] >= cfg.octave_ratio * best)?;
    let (a, b, c) = (r[lag - 1], r[lag], r[lag + 1]);
    let curvature = a - 2.0 * b + c;
    let shift = if curvature < 0.0 {
        (0.5 * (a - c) / curvature).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    Some(lag as f64 + shift)
}

/// The 21 pitch features: 7 F0 statistics, 7 F0-derivative statistics and
/// 7 voiced-duration measures, in [`super::FEATURE_NAMES`] order.
///
/// Statistics are taken over voiced frames only. Derivatives are first
/// differences in Hz per frame inside each voiced run; they never cross an
/// unvoiced gap.
pub fn pitch_stats(track: &PitchTrack) -> [f64; 21] {
    let mut out = [0.0; 21];
    let voiced_f0: Vec<f64> = track
        .f0_hz
        .iter()
        .zip(&track.voiced)
        .filter(|(_, &v)| v)
        .map(|(&f, _)| f)
        .collect();
    if voiced_f0.is_empty() {
        return out;
    }

    let mut sorted = voiced_f0.clone();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    out[0] = stats::mean(&voiced_f0);
    out[1] = hi;
    out[2] = lo;
    out[3] = stats::std_dev(&voiced_f0);
    out[4] = hi - lo;
    out[5] = stats::percentile_sorted(&sorted, 25.0);
    out[6] = stats::percentile_sorted(&sorted, 75.0);

    let regions = track.voiced_regions();
    let deriv: Vec<f64> = regions.iter().flat_map(|r| stats::diff(r)).collect();
    if !deriv.is_empty() {
        let abs: Vec<f64> = deriv.iter().map(|d| d.abs()).collect();
        let (dmax, dmin) = (stats::max(&deriv), stats::min(&deriv));
        out[7] = stats::mean(&deriv);
        out[8] = dmax;
        out[9] = dmin;
        out[10] = stats::std_dev(&deriv);
        out[11] = dmax - dmin;
        out[12] = stats::mean(&abs);
        out[13] = stats::std_dev(&abs);
    }

    let run_frames: Vec<f64> = regions.iter().map(|r| r.len() as f64).collect();
    let n_frames = track.len();
    out[14] = voiced_time_ratio(track);
    out[15] = stats::mean(&run_frames);
    out[16] = stats::std_dev(&run_frames);
    out[17] = regions.len() as f64;
    out[18] = voiced_f0.len() as f64 / n_frames as f64;
    out[19] = stats::max(&run_frames);
    let region_max: Vec<f64> = regions.iter().map(|r| stats::max(r)).collect();
    out[20] = stats::mean(&region_max);
    out
}

/// Time covered by voiced frames (union of their windows) over the time
/// covered by all frames. Unlike the frame-count ratio this credits each
/// voiced run with its full window extent.
fn voiced_time_ratio(track: &PitchTrack) -> f64 {
    let n = track.len();
    if n == 0 {
        return 0.0;
    }
    let total = (n - 1) * track.hop + track.frame_len;
    let mut covered = 0;
    let mut reach = 0;
    for (k, _) in track.voiced.iter().enumerate().filter(|(_, &v)| v) {
        let (s, e) = (k * track.hop, k * track.hop + track.frame_len);
        covered += e - s.max(reach).min(e);
        reach = reach.max(e);
    }
    covered as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const SR: u32 = 8000;

    fn sine(freq: f64, seconds: f64) -> AudioClip {
        let n = (seconds * SR as f64) as usize;
        let x = (0..n).map(|i| 0.6 * (2.0 * PI * freq * i as f64 / SR as f64).sin()).collect();
        AudioClip::new(x, SR, "t").unwrap()
    }

    fn track_of(freqs: &[f64]) -> PitchTrack {
        PitchTrack {
            f0_hz: freqs.to_vec(),
            voiced: freqs.iter().map(|&f| f > 0.0).collect(),
            frame_len: 320,
            hop: 80,
            sample_rate_hz: SR,
        }
    }

    #[test]
    fn sine_200hz() {
        let clip = sine(200.0, 0.5);
        let track = track_pitch(&clip, &UtteranceSpan::whole(&clip), &PitchConfig::default()).unwrap();
        assert!(track.voiced.iter().all(|&v| v));
        let mean = stats::mean(&track.f0_hz);
        assert!((mean - 200.0).abs() < 2.0, "{mean}");
    }

    #[test]
    fn seeded_noise_is_mostly_unvoiced() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = (0..8000).map(|_| rng.random_range(-0.5..0.5)).collect();
        let clip = AudioClip::new(x, SR, "n").unwrap();
        let track = track_pitch(&clip, &UtteranceSpan::whole(&clip), &PitchConfig::default()).unwrap();
        assert!(track.voiced_fraction() < 0.1, "{}", track.voiced_fraction());
    }

    #[test]
    fn zeros_are_unvoiced() {
        let clip = AudioClip::new(vec![0.0; 4000], SR, "z").unwrap();
        let track = track_pitch(&clip, &UtteranceSpan::whole(&clip), &PitchConfig::default()).unwrap();
        assert!(!track.is_empty());
        assert!(track.voiced.iter().all(|&v| !v));
        assert!(track.f0_hz.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn span_outside_clip_is_an_error() {
        let clip = sine(200.0, 0.1);
        let span = UtteranceSpan::new(0, clip.len() + 1, "t", 0);
        assert!(matches!(
            track_pitch(&clip, &span, &PitchConfig::default()),
            Err(FeatureError::SpanOutOfRange { .. })
        ));
    }

    #[test]
    fn constant_track_stats() {
        let s = pitch_stats(&track_of(&[200.0; 10]));
        assert_eq!(&s[0..7], &[200.0, 200.0, 200.0, 0.0, 0.0, 200.0, 200.0]);
        assert!(s[7..14].iter().all(|&v| v == 0.0));
        assert_eq!(s[17], 1.0);
        assert_eq!(s[18], 1.0);
        assert_eq!(s[14], 1.0);
    }

    #[test]
    fn ramp_track_stats() {
        let s = pitch_stats(&track_of(&[100.0, 120.0, 140.0, 160.0]));
        assert_eq!(s[0], 130.0);
        assert_eq!(s[4], 60.0);
        assert_eq!(s[5], 115.0);
        assert_eq!(s[6], 145.0);
        assert_eq!(s[7], 20.0);
        assert_eq!(s[11], 0.0);
    }

    #[test]
    fn unvoiced_track_is_all_zero() {
        assert_eq!(pitch_stats(&track_of(&[0.0; 12])), [0.0; 21]);
        assert_eq!(pitch_stats(&track_of(&[])), [0.0; 21]);
    }

    #[test]
    fn duration_measures_two_regions() {
        // runs of 3 and 1 voiced frames, 8 frames total
        let s = pitch_stats(&track_of(&[100.0, 110.0, 120.0, 0.0, 0.0, 0.0, 150.0, 0.0]));
        assert_eq!(s[15], 2.0);
        assert_eq!(s[16], 1.0);
        assert_eq!(s[17], 2.0);
        assert_eq!(s[18], 0.5);
        assert_eq!(s[19], 3.0);
        assert_eq!(s[20], 135.0);
        // derivatives never cross the gap
        assert_eq!(s[7], 10.0);
        // windows: [0, 480) and [480, 800) out of [0, 880)
        assert!((s[14] - 800.0 / 880.0).abs() < 1e-12);
    }
}
