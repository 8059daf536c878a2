//! Per-utterance labels and the consensus over several labellers.

use serde::{Deserialize, Serialize};

use super::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmotionType {
    HotAnger,
    Panic,
    Sadness,
    Happy,
    Interest,
    Boredom,
    Neutral,
}

impl EmotionType {
    pub const ALL: [EmotionType; 7] = [
        EmotionType::HotAnger,
        EmotionType::Panic,
        EmotionType::Sadness,
        EmotionType::Happy,
        EmotionType::Interest,
        EmotionType::Boredom,
        EmotionType::Neutral,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EmotionType::HotAnger => "hot_anger",
            EmotionType::Panic => "panic",
            EmotionType::Sadness => "sadness",
            EmotionType::Happy => "happy",
            EmotionType::Interest => "interest",
            EmotionType::Boredom => "boredom",
            EmotionType::Neutral => "neutral",
        }
    }
}

/// One labeller's judgement of one utterance. Numeric scales run 1-5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVote {
    pub emotion: EmotionType,
    pub arousal: u8,
    pub valence: u8,
    pub engagement: u8,
}

/// Final labels of one utterance. `emotion` is `None` when the labellers
/// split evenly on the discrete type; such utterances are excluded from
/// discrete-emotion tasks but keep their numeric labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceLabels {
    pub emotion: Option<EmotionType>,
    pub arousal: u8,
    pub valence: u8,
    pub engagement: u8,
}

impl UtteranceLabels {
    pub fn validate(&self) -> Result<(), PipelineError> {
        for (name, v) in [
            ("arousal", self.arousal),
            ("valence", self.valence),
            ("engagement", self.engagement),
        ] {
            check_scale(name, v)?;
        }
        Ok(())
    }

    pub fn is_excluded(&self) -> bool {
        self.emotion.is_none()
    }
}

fn check_scale(name: &str, v: u8) -> Result<(), PipelineError> {
    if (1..=5).contains(&v) {
        Ok(())
    } else {
        Err(PipelineError::InvalidLabel(format!("{name} = {v} is outside 1..=5")))
    }
}

/// Lower median of the numeric votes and the unique mode of the discrete
/// votes.
pub fn consensus_labels(votes: &[LabelVote]) -> Result<UtteranceLabels, PipelineError> {
    if votes.is_empty() {
        return Err(PipelineError::NoVotes);
    }
    for v in votes {
        check_scale("arousal", v.arousal)?;
        check_scale("valence", v.valence)?;
        check_scale("engagement", v.engagement)?;
    }
    let lower_median = |pick: fn(&LabelVote) -> u8| {
        let mut xs: Vec<u8> = votes.iter().map(pick).collect();
        xs.sort_unstable();
        xs[(xs.len() - 1) / 2]
    };

    let mut counts = [0usize; 7];
    for v in votes {
        counts[EmotionType::ALL.iter().position(|&e| e == v.emotion).expect("known type")] += 1;
    }
    let top = *counts.iter().max().expect("seven counts");
    let emotion = match counts.iter().filter(|&&c| c == top).count() {
        1 => Some(EmotionType::ALL[counts.iter().position(|&c| c == top).expect("max exists")]),
        _ => None,
    };

    Ok(UtteranceLabels {
        emotion,
        arousal: lower_median(|v| v.arousal),
        valence: lower_median(|v| v.valence),
        engagement: lower_median(|v| v.engagement),
    })
}

/// Total map from 5-point labels to a coarser scale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LevelMerge(pub [u8; 5]);

impl Default for LevelMerge {
    /// {1,2} -> 1, {3} -> 2, {4,5} -> 3
    fn default() -> Self {
        Self([1, 1, 2, 3, 3])
    }
}

impl LevelMerge {
    pub fn identity() -> Self {
        Self([1, 2, 3, 4, 5])
    }

    pub fn n_levels(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0) as usize
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let n = self.n_levels();
        let mut seen = vec![false; n];
        for &l in &self.0 {
            if l == 0 {
                return Err(PipelineError::InvalidConfig("level merge targets start at 1".into()));
            }
            seen[l as usize - 1] = true;
        }
        if seen.iter().all(|&s| s) {
            Ok(())
        } else {
            Err(PipelineError::InvalidConfig(format!(
                "level merge {:?} leaves a target level unused",
                self.0
            )))
        }
    }
}

pub fn level_merge(label: u8, scheme: &LevelMerge) -> u8 {
    scheme.0[(label.clamp(1, 5) - 1) as usize]
}

#[cfg(test)]
mod tests {
    use super::*;
    use EmotionType::*;

    fn vote(emotion: EmotionType, arousal: u8) -> LabelVote {
        LabelVote {
            emotion,
            arousal,
            valence: 3,
            engagement: arousal,
        }
    }

    #[test]
    fn median_and_mode() {
        let votes: Vec<LabelVote> = [2, 3, 3, 4, 5].iter().map(|&a| vote(Happy, a)).collect();
        assert_eq!(consensus_labels(&votes).unwrap().arousal, 3);
        let votes = [vote(Happy, 1), vote(Happy, 2), vote(Sadness, 5)];
        assert_eq!(consensus_labels(&votes).unwrap().emotion, Some(Happy));
    }

    #[test]
    fn even_split_is_excluded_and_median_takes_lower() {
        let labels = consensus_labels(&[vote(Happy, 2), vote(Sadness, 4)]).unwrap();
        assert!(labels.is_excluded());
        assert_eq!(labels.arousal, 2);
    }

    #[test]
    fn errors() {
        assert!(matches!(consensus_labels(&[]), Err(PipelineError::NoVotes)));
        assert!(matches!(
            consensus_labels(&[vote(Panic, 6)]),
            Err(PipelineError::InvalidLabel(_))
        ));
    }

    #[test]
    fn default_merge() {
        let m = LevelMerge::default();
        assert_eq!(level_merge(2, &m), 1);
        assert_eq!(level_merge(3, &m), 2);
        assert_eq!(level_merge(5, &m), 3);
        assert_eq!(m.n_levels(), 3);
        assert!(m.validate().is_ok());
        assert!(LevelMerge([1, 1, 3, 3, 3]).validate().is_err());
        assert_eq!(level_merge(4, &LevelMerge::identity()), 4);
    }

    #[test]
    fn emotion_names_match_serde() {
        for e in EmotionType::ALL {
            assert_eq!(serde_json::to_string(&e).unwrap(), format!("\"{}\"", e.as_str()));
        }
    }
}
