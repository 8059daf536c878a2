//! Synthetic dyad corpora drawn from a known coupled model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::chmm::{ChainParams, ChmmModel, DyadStep, DyadTimeline};
use crate::features::{FeatureVector, FEATURE_COUNT};

use super::corpus::UtteranceRecord;
use super::labels::{EmotionType, UtteranceLabels};
use super::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_dialogues: usize,
    pub steps_per_dialogue: usize,
    /// Probability that the other participant speaks next.
    pub switch_prob: f64,
    /// Standard deviation of the per-feature Gaussian noise.
    pub noise: f64,
    /// Distance between neighbouring arousal cluster centres when
    /// `centers` is not given.
    pub separation: f64,
    pub step_s: f64,
    /// Ground-truth model; 5 engagement states and 5 arousal symbols when
    /// absent.
    pub truth: Option<ChmmModel>,
    /// One feature-space centre per arousal symbol.
    pub centers: Option<Vec<Vec<f64>>>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_dialogues: 8,
            steps_per_dialogue: 100,
            switch_prob: 0.5,
            noise: 1.0,
            separation: 3.0,
            step_s: 2.0,
            truth: None,
            centers: None,
        }
    }
}

/// Full-information timelines (gold for both chains at every step) and the
/// matching utterance records, which only carry the speaker's own labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub timelines: Vec<DyadTimeline>,
    pub records: Vec<UtteranceRecord>,
}

/// Rows with `stay` at each row's centre column and the rest spread with
/// geometric decay `r` over the distance from it. Row `i` centres on the
/// column at the same relative position.
fn banded_rows(n_rows: usize, n_cols: usize, stay: f64, r: f64) -> Vec<Vec<f64>> {
    (0..n_rows)
        .map(|i| {
            let c = if n_rows > 1 {
                (i * (n_cols - 1)) as f64 / (n_rows - 1) as f64
            } else {
                0.0
            };
            let c = c.round() as usize;
            let off: Vec<f64> = (0..n_cols)
                .map(|j| if j == c { 0.0 } else { r.powi(c.abs_diff(j) as i32) })
                .collect();
            let total: f64 = off.iter().sum();
            (0..n_cols)
                .map(|j| match (j == c, total > 0.0) {
                    (true, true) => stay,
                    (true, false) => 1.0,
                    (false, true) => (1.0 - stay) * off[j] / total,
                    (false, false) => 0.0,
                })
                .collect()
        })
        .collect()
}

/// Moderately persistent engagement pulled strongly towards the partner's
/// previous state, with arousal emitted around the engagement level.
pub fn default_truth(n_states: usize, n_symbols: usize) -> ChmmModel {
    let chain = ChainParams {
        initial: vec![1.0 / n_states as f64; n_states],
        trans: banded_rows(n_states, n_states, 0.6, 0.3),
        cross: banded_rows(n_states, n_states, 0.95, 0.3),
        emit: banded_rows(n_states, n_symbols, 0.7, 0.4),
    };
    ChmmModel::new([chain.clone(), chain]).expect("rows are normalised")
}

/// Centres spaced `separation` apart along a fixed unit direction.
pub fn default_centers(n_symbols: usize, separation: f64) -> Vec<Vec<f64>> {
    let dir: Vec<f64> = (0..FEATURE_COUNT).map(|f| (0.9 * f as f64 + 0.3).cos()).collect();
    let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
    let mid = (n_symbols as f64 - 1.0) / 2.0;
    (0..n_symbols)
        .map(|a| dir.iter().map(|d| separation * (a as f64 - mid) * d / norm).collect())
        .collect()
}

fn sample(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

impl GeneratorConfig {
    fn resolve(&self) -> Result<(ChmmModel, Vec<Vec<f64>>), PipelineError> {
        let bad = |m: &str| Err(PipelineError::InvalidGeneratorConfig(m.to_string()));
        if self.steps_per_dialogue == 0 {
            return bad("steps_per_dialogue must be positive");
        }
        if !(0.0..=1.0).contains(&self.switch_prob) {
            return bad("switch_prob must lie in [0, 1]");
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) || !self.separation.is_finite() {
            return bad("noise must be finite and non-negative and separation finite");
        }
        if !(self.step_s.is_finite() && self.step_s > 0.0) {
            return bad("step_s must be positive");
        }
        let truth = self.truth.clone().unwrap_or_else(|| default_truth(5, 5));
        truth
            .validate()
            .map_err(|e| PipelineError::InvalidGeneratorConfig(e.to_string()))?;
        if !(1..=5).contains(&truth.n_states) || !(1..=5).contains(&truth.n_symbols) {
            return bad("states and symbols must map onto the 1-5 label scale");
        }
        let centers = self
            .centers
            .clone()
            .unwrap_or_else(|| default_centers(truth.n_symbols, self.separation));
        if centers.len() != truth.n_symbols {
            return bad("need one centre per arousal symbol");
        }
        if centers
            .iter()
            .any(|c| c.len() != FEATURE_COUNT || c.iter().any(|v| !v.is_finite()))
        {
            return bad("centres must be finite and of feature dimension");
        }
        Ok((truth, centers))
    }
}

/// Draws a corpus. Joint states at each step are sampled from the coupled
/// potential normalised over the current state pair; only the speaking
/// participant emits an arousal symbol and a feature vector.
pub fn synth_corpus(cfg: &GeneratorConfig, seed: u64) -> Result<SynthCorpus, PipelineError> {
    let (truth, centers) = cfg.resolve()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut timelines = Vec::with_capacity(cfg.n_dialogues);
    let mut records = Vec::with_capacity(cfg.n_dialogues * cfg.steps_per_dialogue);
    for d in 0..cfg.n_dialogues {
        let dialogue = format!("syn-{d:03}");
        let speakers = [format!("{dialogue}-a"), format!("{dialogue}-b")];
        let mut state = [0usize; 2];
        let mut speaker = usize::from(rng.random::<bool>());
        let mut steps = Vec::with_capacity(cfg.steps_per_dialogue);
        for t in 0..cfg.steps_per_dialogue {
            if t == 0 {
                for (s, c) in state.iter_mut().zip(&truth.chains) {
                    *s = sample(&mut rng, &c.initial);
                }
            } else {
                let prev = state;
                for m in 0..2 {
                    let c = &truth.chains[m];
                    let w: Vec<f64> = (0..truth.n_states)
                        .map(|j| c.trans[prev[m]][j] * c.cross[prev[1 - m]][j])
                        .collect();
                    state[m] = sample(&mut rng, &w);
                }
                if rng.random::<f64>() < cfg.switch_prob {
                    speaker = 1 - speaker;
                }
            }
            let symbol = sample(&mut rng, &truth.chains[speaker].emit[state[speaker]]);
            let features: Vec<f64> = centers[symbol]
                .iter()
                .map(|c| c + cfg.noise * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let start_s = t as f64 * cfg.step_s;
            let mut obs = [None, None];
            obs[speaker] = Some(symbol);
            steps.push(DyadStep {
                obs,
                gold: [Some(state[0]), Some(state[1])],
                t: start_s,
            });
            records.push(UtteranceRecord {
                dialogue: dialogue.clone(),
                speaker: speakers[speaker].clone(),
                group: ["F", "M"][speaker].to_string(),
                utterance_id: t,
                start_s,
                end_s: start_s + 0.9 * cfg.step_s,
                features: Some(FeatureVector::new(features).expect("finite draws")),
                labels: Some(UtteranceLabels {
                    emotion: Some(EmotionType::Neutral),
                    arousal: symbol as u8 + 1,
                    valence: 3,
                    engagement: state[speaker] as u8 + 1,
                }),
                votes: Vec::new(),
                listener_engagement: Some(state[1 - speaker] as u8 + 1),
                split: None,
            });
        }
        timelines.push(DyadTimeline {
            dialogue,
            speakers,
            steps,
        });
    }
    Ok(SynthCorpus { timelines, records })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let cfg = GeneratorConfig {
            n_dialogues: 2,
            steps_per_dialogue: 20,
            ..Default::default()
        };
        assert_eq!(synth_corpus(&cfg, 7).unwrap(), synth_corpus(&cfg, 7).unwrap());
        assert_ne!(synth_corpus(&cfg, 7).unwrap().records, synth_corpus(&cfg, 8).unwrap().records);
    }

    #[test]
    fn records_mirror_timelines() {
        let cfg = GeneratorConfig {
            n_dialogues: 3,
            steps_per_dialogue: 15,
            ..Default::default()
        };
        let c = synth_corpus(&cfg, 1).unwrap();
        assert_eq!(c.records.len(), 45);
        for (k, r) in c.records.iter().enumerate() {
            let tl = &c.timelines[k / 15];
            let step = &tl.steps[k % 15];
            let m = tl.speakers.iter().position(|s| *s == r.speaker).unwrap();
            let l = r.labels.unwrap();
            assert_eq!(step.obs[m], Some(l.arousal as usize - 1));
            assert_eq!(step.gold[m], Some(l.engagement as usize - 1));
            assert!(step.obs[1 - m].is_none());
            assert_eq!(step.gold[1 - m], Some(r.listener_engagement.unwrap() as usize - 1));
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            GeneratorConfig {
                steps_per_dialogue: 0,
                ..Default::default()
            },
            GeneratorConfig {
                switch_prob: 1.5,
                ..Default::default()
            },
            GeneratorConfig {
                noise: -1.0,
                ..Default::default()
            },
            GeneratorConfig {
                centers: Some(vec![vec![0.0; 46]; 2]),
                ..Default::default()
            },
            GeneratorConfig {
                centers: Some(vec![vec![0.0; 3]; 5]),
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(matches!(synth_corpus(&cfg, 0), Err(PipelineError::InvalidGeneratorConfig(_))));
        }
    }

    #[test]
    fn zero_dialogues_is_empty() {
        let c = synth_corpus(
            &GeneratorConfig {
                n_dialogues: 0,
                ..Default::default()
            },
            3,
        )
        .unwrap();
        assert!(c.timelines.is_empty() && c.records.is_empty());
    }

    #[test]
    fn default_centres_are_evenly_spaced() {
        let c = default_centers(5, 3.0);
        for a in 0..4 {
            let d: f64 = c[a].iter().zip(&c[a + 1]).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            assert!((d - 3.0).abs() < 1e-12);
        }
    }
}
