//! In-browser demos built on `engage-core`. Every export takes plain numbers
//! and returns a JSON string for the page script to draw.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use engage::audio::{segment_utterances, AudioClip, UtteranceSpan, VadConfig};
use engage::chmm::{viterbi_coupled, viterbi_hmm_partial};
use engage::features::{track_pitch, PitchConfig};
use engage::pipeline::{synth_corpus, train_chmm_from_timelines, train_hmm_from_timelines, GeneratorConfig};

const SR: u32 = 16_000;

#[derive(Debug, Serialize)]
pub struct PitchDemo {
    pub hop_s: f64,
    pub true_hz: Vec<f64>,
    pub f0_hz: Vec<f64>,
    pub voiced: Vec<bool>,
    pub voiced_fraction: f64,
}

/// A 1.5 s harmonic glide from `start_hz` to `end_hz` with a silent middle
/// third, plus white noise at `noise` times the signal amplitude.
pub fn pitch_demo(start_hz: f64, end_hz: f64, noise: f64, seed: u64) -> Result<PitchDemo, String> {
    let n = (1.5 * SR as f64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phase = 0.0;
    let mut truth = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    for i in 0..n {
        let f = start_hz + (end_hz - start_hz) * i as f64 / n as f64;
        phase += 2.0 * PI * f / SR as f64;
        let gap = i > n / 3 && i < n / 2;
        let v = if gap {
            0.0
        } else {
            0.5 * phase.sin() + 0.25 * (2.0 * phase).sin() + 0.1 * (3.0 * phase).sin()
        };
        truth.push(if gap { 0.0 } else { f });
        x.push(v + noise * 0.5 * rng.random_range(-1.0..1.0));
    }
    let clip = AudioClip::new(x, SR, "demo").map_err(|e| e.to_string())?;
    let track = track_pitch(&clip, &UtteranceSpan::whole(&clip), &PitchConfig::default()).map_err(|e| e.to_string())?;
    let true_hz = (0..track.len())
        .map(|k| truth[(k * track.hop + track.frame_len / 2).min(n - 1)])
        .collect();
    Ok(PitchDemo {
        hop_s: track.hop as f64 / SR as f64,
        true_hz,
        voiced_fraction: track.voiced_fraction(),
        f0_hz: track.f0_hz,
        voiced: track.voiced,
    })
}

#[derive(Debug, Serialize)]
pub struct SegmentDemo {
    pub duration_s: f64,
    /// Peak absolute amplitude per 10 ms block.
    pub envelope: Vec<f64>,
    pub truth: Vec<[f64; 2]>,
    pub found: Vec<[f64; 2]>,
}

/// Random vowel-like bursts separated by noisy pauses, segmented with the
/// default VAD thresholds shifted by `on_db`.
pub fn segment_demo(n_bursts: usize, noise: f64, on_db: f64, seed: u64) -> Result<SegmentDemo, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut truth = Vec::new();
    let sec = |s: f64| (s * SR as f64) as usize;
    let pause = |x: &mut Vec<f64>, rng: &mut ChaCha8Rng| {
        let len = sec(rng.random_range(0.4..1.0));
        x.extend((0..len).map(|_| noise * rng.random_range(-1.0..1.0)));
    };
    for _ in 0..n_bursts.clamp(1, 12) {
        pause(&mut x, &mut rng);
        let len = sec(rng.random_range(0.4..1.2));
        let f0 = rng.random_range(100.0..250.0);
        let amp = rng.random_range(0.3..0.9);
        let start = x.len();
        x.extend((0..len).map(|i| {
            let t = i as f64 / SR as f64;
            let ramp = (PI * i as f64 / len as f64).sin();
            amp * ramp * (2.0 * PI * f0 * t).sin() + noise * rng.random_range(-1.0..1.0)
        }));
        truth.push([start as f64 / SR as f64, x.len() as f64 / SR as f64]);
    }
    pause(&mut x, &mut rng);
    let cfg = VadConfig {
        on_db,
        off_db: on_db + 10.0,
        ..VadConfig::default()
    };
    let clip = AudioClip::new(x, SR, "demo").map_err(|e| e.to_string())?;
    let found = segment_utterances(&clip, &cfg)
        .iter()
        .map(|s| [s.start_sample as f64 / SR as f64, s.end_sample as f64 / SR as f64])
        .collect();
    let envelope = clip
        .samples()
        .chunks(sec(0.01))
        .map(|c| c.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect();
    Ok(SegmentDemo {
        duration_s: clip.duration_s(),
        envelope,
        truth,
        found,
    })
}

#[derive(Debug, Serialize)]
pub struct DecodeDemo {
    /// Speaking participant at each step.
    pub speaker: Vec<usize>,
    /// Arousal symbol of the speaker, 1-based.
    pub arousal: Vec<usize>,
    /// 1-based engagement per participant, indexed `[chain][step]`.
    pub gold: [Vec<usize>; 2],
    pub hmm: [Vec<usize>; 2],
    pub chmm: [Vec<usize>; 2],
    pub hmm_accuracy: f64,
    pub chmm_accuracy: f64,
}

/// Trains an HMM and a coupled HMM on `train_dialogues` synthetic dyads and
/// decodes one held-out dyad from its true arousal symbols. Accuracy counts
/// the speaking participant at each step.
pub fn decode_demo(train_dialogues: usize, steps: usize, seed: u64) -> Result<DecodeDemo, String> {
    let cfg = GeneratorConfig {
        n_dialogues: train_dialogues.max(1) + 1,
        steps_per_dialogue: steps.max(2),
        ..GeneratorConfig::default()
    };
    let corpus = synth_corpus(&cfg, seed).map_err(|e| e.to_string())?;
    let (test, train) = corpus.timelines.split_last().ok_or("empty corpus")?;
    let n = 5;
    let hmm = train_hmm_from_timelines(train, n, n, 1.0).map_err(|e| e.to_string())?;
    let chmm = train_chmm_from_timelines(train, n, n, 1.0, true).map_err(|e| e.to_string())?;
    let speaker: Vec<usize> = test.steps.iter().map(|s| usize::from(s.obs[0].is_none())).collect();
    let hmm_path = |m: usize| {
        viterbi_hmm_partial(&hmm, &test.observations(m))
            .map(|p| p.states)
            .map_err(|e| e.to_string())
    };
    let hmm_paths = [hmm_path(0)?, hmm_path(1)?];
    let chmm_paths = viterbi_coupled(&chmm, test).map_err(|e| e.to_string())?.chains;
    let gold = [0, 1].map(|m| test.gold(m).into_iter().map(|g| g.unwrap_or(0)).collect::<Vec<_>>());
    let accuracy = |paths: &[Vec<usize>; 2]| {
        let hits = speaker
            .iter()
            .enumerate()
            .filter(|(t, &m)| paths[m][*t] == gold[m][*t])
            .count();
        hits as f64 / speaker.len() as f64
    };
    let one_based = |p: &[Vec<usize>; 2]| [0, 1].map(|m| p[m].iter().map(|s| s + 1).collect());
    Ok(DecodeDemo {
        arousal: test
            .steps
            .iter()
            .zip(&speaker)
            .map(|(s, &m)| s.obs[m].map_or(0, |o| o + 1))
            .collect(),
        hmm_accuracy: accuracy(&hmm_paths),
        chmm_accuracy: accuracy(&chmm_paths),
        hmm: one_based(&hmm_paths),
        chmm: one_based(&chmm_paths),
        gold: one_based(&gold),
        speaker,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = pitchDemo)]
pub fn pitch_demo_js(start_hz: f64, end_hz: f64, noise: f64, seed: u32) -> Result<String, JsValue> {
    to_js(pitch_demo(start_hz, end_hz, noise, seed.into()))
}

#[wasm_bindgen(js_name = segmentDemo)]
pub fn segment_demo_js(n_bursts: u32, noise: f64, on_db: f64, seed: u32) -> Result<String, JsValue> {
    to_js(segment_demo(n_bursts as usize, noise, on_db, seed.into()))
}

#[wasm_bindgen(js_name = decodeDemo)]
pub fn decode_demo_js(train_dialogues: u32, steps: u32, seed: u32) -> Result<String, JsValue> {
    to_js(decode_demo(train_dialogues as usize, steps as usize, seed.into()))
}
