//! Frame energy, band energies, energy derivative and non-silent durations.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{span_slice, FeatureError};
use crate::audio::{frame_count, ms_to_samples, AudioClip, UtteranceSpan};
use crate::stats;

/// Band edges in Hz. Each band is half-open `[lo, hi)`; the last one is open
/// ended.
pub const BAND_EDGES_HZ: [f64; 7] = [0.0, 200.0, 300.0, 500.0, 1000.0, 2000.0, f64::INFINITY];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    /// Frames within this many dB of the loudest frame of the span are non-silent.
    pub silence_db: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            frame_ms: 25.0,
            hop_ms: 10.0,
            silence_db: 30.0,
        }
    }
}

/// The 19 energy features in [`super::FEATURE_NAMES`] order: 4 frame-energy
/// statistics, 6 band energies, 5 energy-derivative statistics and 4
/// non-silent-duration measures.
pub fn energy_features(clip: &AudioClip, span: &UtteranceSpan, cfg: &EnergyConfig) -> Result<[f64; 19], FeatureError> {
    let x = span_slice(clip, span)?;
    Ok(energy_features_samples(x, clip.sample_rate_hz(), cfg))
}

pub(crate) fn energy_features_samples(x: &[f64], sample_rate_hz: u32, cfg: &EnergyConfig) -> [f64; 19] {
    let mut out = [0.0; 19];
    let frame_len = ms_to_samples(cfg.frame_ms, sample_rate_hz).max(1);
    let hop = ms_to_samples(cfg.hop_ms, sample_rate_hz).max(1);
    let n_frames = frame_count(x.len(), frame_len, hop);
    if n_frames == 0 {
        return out;
    }
    let frames: Vec<&[f64]> = (0..n_frames).map(|k| &x[k * hop..k * hop + frame_len]).collect();
    let energy: Vec<f64> = frames
        .iter()
        .map(|f| f.iter().map(|v| v * v).sum::<f64>() / frame_len as f64)
        .collect();

    out[0] = stats::mean(&energy);
    out[1] = stats::std_dev(&energy);
    out[2] = stats::max(&energy);
    out[3] = stats::median(&energy);

    let bands = band_energies(&frames, sample_rate_hz);
    out[4..10].copy_from_slice(&bands);

    let d = stats::diff(&energy);
    if !d.is_empty() {
        out[10] = stats::mean(&d);
        out[11] = stats::std_dev(&d);
        out[12] = stats::max(&d);
        out[13] = stats::median(&d);
        out[14] = stats::min(&d);
    }

    let peak = out[2];
    if peak > 0.0 {
        let level = peak * 10f64.powf(-cfg.silence_db / 10.0);
        let loud: Vec<bool> = energy.iter().map(|&e| e > 0.0 && e >= level).collect();
        let runs: Vec<f64> = stats::run_lengths(&loud).into_iter().map(|r| r as f64).collect();
        out[15] = stats::mean(&runs);
        out[16] = stats::std_dev(&runs);
        out[17] = runs.iter().sum::<f64>() / n_frames as f64;
        out[18] = stats::max(&runs);
    }
    out
}

/// Mean over frames of the Hann-windowed one-sided power spectrum summed per
/// band. The spectrum is scaled so a frame's bands sum to roughly its mean
/// square.
fn band_energies(frames: &[&[f64]], sample_rate_hz: u32) -> [f64; 6] {
    let n = frames[0].len();
    let mut bands = [0.0; 6];
    if n < 2 {
        return bands;
    }
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect();
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(n);
    let bin_hz = sample_rate_hz as f64 / n as f64;
    let band_of: Vec<Option<usize>> = (0..=n / 2)
        .map(|k| {
            let f = k as f64 * bin_hz;
            BAND_EDGES_HZ.windows(2).position(|w| f >= w[0] && f < w[1])
        })
        .collect();

    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for frame in frames {
        for ((b, &v), &w) in buf.iter_mut().zip(frame.iter()).zip(&window) {
            *b = Complex::new(v * w, 0.0);
        }
        fft.process(&mut buf);
        for (k, band) in band_of.iter().enumerate() {
            let Some(band) = band else { continue };
            let one_sided = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
            bands[*band] += one_sided * buf[k].norm_sqr() / (n as f64 * window_power);
        }
    }
    for b in &mut bands {
        *b /= frames.len() as f64;
    }
    bands
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const SR: u32 = 8000;

    fn tone(freq: f64, amp: f64, n: usize) -> AudioClip {
        let x = (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / SR as f64).sin()).collect();
        AudioClip::new(x, SR, "t").unwrap()
    }

    fn run(clip: &AudioClip) -> [f64; 19] {
        energy_features(clip, &UtteranceSpan::whole(clip), &EnergyConfig::default()).unwrap()
    }

    #[test]
    fn zeros_give_zeros() {
        let clip = AudioClip::new(vec![0.0; 4000], SR, "z").unwrap();
        assert_eq!(run(&clip), [0.0; 19]);
    }

    #[test]
    fn tone_energy_lands_in_its_band() {
        let f = run(&tone(400.0, 0.5, 4000));
        let total: f64 = f[4..10].iter().sum();
        assert!(f[6] / total > 0.9, "{:?}", &f[4..10]);
        // scaled spectrum sums to about the mean square
        assert!((total - f[0]).abs() / f[0] < 0.05);
    }

    #[test]
    fn stationary_tone_has_flat_energy() {
        let f = run(&tone(400.0, 0.5, 4000));
        assert!(f[10].abs() < 1e-6);
        assert!((f[0] - 0.125).abs() < 1e-9);
        assert_eq!(f[17], 1.0);
        assert_eq!(f[15], f[18]);
    }

    #[test]
    fn band_edge_bin_belongs_to_upper_band() {
        // 200 Hz lands exactly on bin 5 of a 200-point frame at 8 kHz
        let f = run(&tone(200.0, 0.5, 4000));
        assert!(f[5] > f[4], "{:?}", &f[4..10]);
    }

    #[test]
    fn silent_tail_counts_as_silence() {
        let mut x: Vec<f64> = tone(300.0, 0.5, 2000).samples().to_vec();
        x.extend(std::iter::repeat_n(0.0, 2000));
        let clip = AudioClip::new(x, SR, "t").unwrap();
        let f = run(&clip);
        assert!(f[17] > 0.4 && f[17] < 0.6, "{}", f[17]);
        assert_eq!(f[16], 0.0);
        assert!(f[14] < 0.0);
    }
}
