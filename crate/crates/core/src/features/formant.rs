//! LPC formant estimation over voiced frames.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::pitch::{track_pitch_samples, PitchConfig, PitchTrack};
use super::{span_slice, FeatureError};
use crate::audio::{AudioClip, UtteranceSpan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FormantConfig {
    /// LPC order; `None` means sample rate in kHz + 2.
    pub lpc_order: Option<usize>,
    /// Pre-emphasis corner frequency.
    pub pre_emphasis_hz: f64,
    /// Roots narrower than this are preferred as formants.
    pub max_bandwidth_hz: f64,
    /// Roots closer than this to 0 Hz or Nyquist are ignored.
    pub edge_margin_hz: f64,
}

impl Default for FormantConfig {
    fn default() -> Self {
        Self {
            lpc_order: None,
            pre_emphasis_hz: 50.0,
            max_bandwidth_hz: 400.0,
            edge_margin_hz: 50.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    pub freq_hz: f64,
    pub bandwidth_hz: f64,
}

/// Mean F1, F2, F3 and their bandwidths over voiced frames. Voicing comes
/// from the pitch tracker run with `pitch`.
pub fn formant_features(
    clip: &AudioClip,
    span: &UtteranceSpan,
    cfg: &FormantConfig,
    pitch: &PitchConfig,
) -> Result<[f64; 6], FeatureError> {
    let x = span_slice(clip, span)?;
    let track = track_pitch_samples(x, clip.sample_rate_hz(), pitch);
    Ok(formants_for_track(x, &track, cfg))
}

pub(crate) fn formants_for_track(x: &[f64], track: &PitchTrack, cfg: &FormantConfig) -> [f64; 6] {
    let sr = track.sample_rate_hz;
    let order = cfg.lpc_order.unwrap_or((sr / 1000) as usize + 2);
    let coef = (-2.0 * std::f64::consts::PI * cfg.pre_emphasis_hz / sr as f64).exp();
    let window: Vec<f64> = (0..track.frame_len)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (track.frame_len - 1).max(1) as f64).cos())
        .collect();

    let mut sums = [0.0; 6];
    let mut used = 0usize;
    let mut buf = vec![0.0; track.frame_len];
    for (k, _) in track.voiced.iter().enumerate().filter(|(_, &v)| v) {
        let start = k * track.hop;
        let frame = &x[start..start + track.frame_len];
        for i in 0..frame.len() {
            let prev = if i > 0 {
                frame[i - 1]
            } else if start > 0 {
                x[start - 1]
            } else {
                0.0
            };
            buf[i] = (frame[i] - coef * prev) * window[i];
        }
        let Some(a) = lpc(&buf, order) else { continue };
        let roots = resonances(&a, sr);
        if let Some(three) = pick_formants(&roots, sr, cfg) {
            for (slot, r) in three.iter().enumerate() {
                sums[slot] += r.freq_hz;
                sums[slot + 3] += r.bandwidth_hz;
            }
            used += 1;
        }
    }
    if used == 0 {
        return [0.0; 6];
    }
    sums.map(|s| s / used as f64)
}

/// Autocorrelation-method LPC via Levinson-Durbin. Returns
/// `[1, a1, .., ap]` for the inverse filter `A(z) = 1 + sum a_k z^-k`, or
/// `None` for a silent or numerically singular frame.
pub fn lpc(x: &[f64], order: usize) -> Option<Vec<f64>> {
    if order == 0 || x.len() <= order {
        return None;
    }
    let r: Vec<f64> = (0..=order)
        .map(|lag| x[..x.len() - lag].iter().zip(&x[lag..]).map(|(a, b)| a * b).sum())
        .collect();
    if r[0] <= 0.0 {
        return None;
    }
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    let mut err = r[0];
    for i in 1..=order {
        let acc: f64 = (1..i).map(|j| a[j] * r[i - j]).sum::<f64>() + r[i];
        let k = -acc / err;
        let prev = a.clone();
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        if err <= r[0] * 1e-12 {
            return None;
        }
    }
    Some(a)
}

/// Roots of the LPC polynomial in the upper half plane, as frequency and
/// bandwidth, sorted by frequency.
pub fn resonances(a: &[f64], sample_rate_hz: u32) -> Vec<Resonance> {
    let p = a.len() - 1;
    if p == 0 {
        return Vec::new();
    }
    // companion matrix of z^p + a1 z^(p-1) + .. + ap
    let mut m = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        m[(0, j)] = -a[j + 1];
    }
    for i in 1..p {
        m[(i, i - 1)] = 1.0;
    }
    let sr = sample_rate_hz as f64;
    let mut out: Vec<Resonance> = m
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im > 0.0)
        .map(|z| Resonance {
            freq_hz: z.im.atan2(z.re) * sr / (2.0 * std::f64::consts::PI),
            bandwidth_hz: -z.norm().ln() * sr / std::f64::consts::PI,
        })
        .collect();
    out.sort_by(|a, b| a.freq_hz.total_cmp(&b.freq_hz));
    out
}

/// Lowest three narrow resonances. When fewer than three are narrow, the
/// list is topped up with broader roots above the highest narrow one.
fn pick_formants(roots: &[Resonance], sample_rate_hz: u32, cfg: &FormantConfig) -> Option<[Resonance; 3]> {
    let nyquist = sample_rate_hz as f64 / 2.0;
    let in_range: Vec<Resonance> = roots
        .iter()
        .copied()
        .filter(|r| r.freq_hz > cfg.edge_margin_hz && r.freq_hz < nyquist - cfg.edge_margin_hz)
        .collect();
    let mut picked: Vec<Resonance> = in_range
        .iter()
        .copied()
        .filter(|r| r.bandwidth_hz < cfg.max_bandwidth_hz)
        .take(3)
        .collect();
    if picked.len() < 3 {
        let floor = picked.last().map_or(0.0, |r| r.freq_hz);
        let extra = in_range
            .iter()
            .copied()
            .filter(|r| r.bandwidth_hz >= cfg.max_bandwidth_hz && r.freq_hz > floor);
        picked.extend(extra.take(3 - picked.len()));
    }
    picked.try_into().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SR: u32 = 8000;

    /// Impulse train through cascaded two-pole resonators.
    fn synthetic_vowel(f0: f64, formants: &[(f64, f64)], n: usize) -> Vec<f64> {
        let period = SR as f64 / f0;
        let mut x: Vec<f64> = (0..n).map(|i| if (i as f64 % period) < 1.0 { 1.0 } else { 0.0 }).collect();
        for &(freq, bw) in formants {
            let r = (-std::f64::consts::PI * bw / SR as f64).exp();
            let theta = 2.0 * std::f64::consts::PI * freq / SR as f64;
            let (a1, a2) = (-2.0 * r * theta.cos(), r * r);
            let (mut y1, mut y2) = (0.0, 0.0);
            for v in x.iter_mut() {
                let y = *v - a1 * y1 - a2 * y2;
                y2 = y1;
                y1 = y;
                *v = y;
            }
        }
        let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        x.iter().map(|v| 0.8 * v / peak).collect()
    }

    #[test]
    fn lpc_recovers_ar2_coefficients() {
        // long AR(2) realisation driven by a deterministic pseudo-noise
        let (a1, a2) = (-1.2, 0.72);
        let mut state = 12345u64;
        let mut x = vec![0.0f64; 20000];
        for i in 2..x.len() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let e = ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
            x[i] = e - a1 * x[i - 1] - a2 * x[i - 2];
        }
        let a = lpc(&x, 2).unwrap();
        assert!((a[1] - a1).abs() < 0.02, "{a:?}");
        assert!((a[2] - a2).abs() < 0.02, "{a:?}");
    }

    #[test]
    fn two_resonator_vowel() {
        let x = synthetic_vowel(120.0, &[(700.0, 80.0), (1200.0, 100.0)], 4000);
        let clip = AudioClip::new(x, SR, "v").unwrap();
        let f = formant_features(
            &clip,
            &UtteranceSpan::whole(&clip),
            &FormantConfig::default(),
            &PitchConfig::default(),
        )
        .unwrap();
        assert!((f[0] - 700.0).abs() < 50.0, "{f:?}");
        assert!((f[1] - 1200.0).abs() < 80.0, "{f:?}");
        assert!(f[0] <= f[1] && f[1] <= f[2]);
    }

    #[test]
    fn silence_gives_zeros() {
        let clip = AudioClip::new(vec![0.0; 4000], SR, "z").unwrap();
        let f = formant_features(
            &clip,
            &UtteranceSpan::whole(&clip),
            &FormantConfig::default(),
            &PitchConfig::default(),
        )
        .unwrap();
        assert_eq!(f, [0.0; 6]);
    }

    #[test]
    fn lpc_rejects_silence() {
        assert!(lpc(&[0.0; 64], 10).is_none());
        assert!(lpc(&[1.0; 5], 10).is_none());
    }
}
