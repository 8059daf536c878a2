//! Utterance records, JSON-lines I/O, corpus manifests and train/test splits.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::audio::{load_audio, segment_utterances, UtteranceSpan, VadConfig};
use crate::features::{extract_features, FeatureConfig, FeatureVector};

use super::labels::{consensus_labels, LabelVote, UtteranceLabels};
use super::PipelineError;

/// One utterance of one speaker in one dialogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub dialogue: String,
    pub speaker: String,
    #[serde(default)]
    pub group: String,
    pub utterance_id: usize,
    pub start_s: f64,
    pub end_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<FeatureVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<UtteranceLabels>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub votes: Vec<LabelVote>,
    /// Engagement (1-5) of the other participant during this utterance,
    /// when annotated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub listener_engagement: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

impl UtteranceRecord {
    pub fn id(&self) -> String {
        format!("{}/{}/{}", self.dialogue, self.speaker, self.utterance_id)
    }

    /// Explicit labels, else the consensus of the votes, else `None`.
    pub fn resolved_labels(&self) -> Result<Option<UtteranceLabels>, PipelineError> {
        if let Some(l) = self.labels {
            l.validate()?;
            return Ok(Some(l));
        }
        if self.votes.is_empty() {
            return Ok(None);
        }
        consensus_labels(&self.votes).map(Some)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// How records are divided when they carry no explicit split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitPolicy {
    /// Alternate utterances of each speaker (speaker-dependent).
    ByUtterance,
    /// Alternate groups of speakers connected through shared dialogues
    /// (speaker-independent).
    BySpeaker,
    /// Alternate dialogues in id order.
    #[default]
    ByDialogue,
}

/// Train/test assignment for every record, in input order.
pub fn assign_splits(records: &[UtteranceRecord], policy: SplitPolicy) -> Vec<Split> {
    let alt = |i: usize| if i.is_multiple_of(2) { Split::Train } else { Split::Test };
    let mut out: Vec<Split> = match policy {
        SplitPolicy::ByUtterance => {
            let mut order: Vec<usize> = (0..records.len()).collect();
            order.sort_by(|&a, &b| {
                let (ra, rb) = (&records[a], &records[b]);
                (&ra.speaker, &ra.dialogue)
                    .cmp(&(&rb.speaker, &rb.dialogue))
                    .then(ra.start_s.total_cmp(&rb.start_s))
                    .then(ra.utterance_id.cmp(&rb.utterance_id))
            });
            let mut out = vec![Split::Train; records.len()];
            let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
            for i in order {
                let k = seen.entry(records[i].speaker.as_str()).or_insert(0);
                out[i] = alt(*k);
                *k += 1;
            }
            out
        }
        SplitPolicy::ByDialogue => {
            let ids: BTreeSet<&str> = records.iter().map(|r| r.dialogue.as_str()).collect();
            let rank: BTreeMap<&str, usize> = ids.into_iter().enumerate().map(|(i, d)| (d, i)).collect();
            records.iter().map(|r| alt(rank[r.dialogue.as_str()])).collect()
        }
        SplitPolicy::BySpeaker => {
            let comp = speaker_components(records);
            records.iter().map(|r| alt(comp[r.speaker.as_str()])).collect()
        }
    };
    for (s, r) in out.iter_mut().zip(records) {
        if let Some(explicit) = r.split {
            *s = explicit;
        }
    }
    out
}

/// Rank of each speaker's connected component, components ordered by their
/// smallest speaker id.
fn speaker_components(records: &[UtteranceRecord]) -> BTreeMap<&str, usize> {
    let speakers: Vec<&str> = records
        .iter()
        .map(|r| r.speaker.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&str, usize> = speakers.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let mut parent: Vec<usize> = (0..speakers.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut first_in_dialogue: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        let s = index[r.speaker.as_str()];
        let d = *first_in_dialogue.entry(r.dialogue.as_str()).or_insert(s);
        let (a, b) = (find(&mut parent, s), find(&mut parent, d));
        parent[a.max(b)] = a.min(b);
    }
    let mut rank: BTreeMap<usize, usize> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for (i, s) in speakers.iter().enumerate() {
        let root = find(&mut parent, i);
        let next = rank.len();
        out.insert(*s, *rank.entry(root).or_insert(next));
    }
    out
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    parse_jsonl(&text).map_err(|e| match e {
        PipelineError::Json(msg) => PipelineError::Json(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, PipelineError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| PipelineError::Json(format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("records serialise"));
        out.push('\n');
    }
    out
}

/// A list of per-speaker sources. Relative paths resolve against the
/// manifest's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
}

/// Either a feature file (JSON-lines of [`UtteranceRecord`]) or a mono WAV
/// file of one speaker's channel. For audio, utterance boundaries come from
/// `labels` (records without features), else `spans` (a JSON array of
/// sample ranges), else voice activity detection.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManifestEntry {
    pub dialogue: Option<String>,
    pub speaker: Option<String>,
    pub group: Option<String>,
    pub audio: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub spans: Option<PathBuf>,
    pub split: Option<Split>,
}

impl CorpusManifest {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::InvalidManifest(format!("{}: {e}", path.display())))
    }
}

/// Loads every entry of the manifest at `path` into utterance records.
pub fn load_corpus(path: &Path, features: &FeatureConfig, vad: &VadConfig) -> Result<Vec<UtteranceRecord>, PipelineError> {
    let manifest = CorpusManifest::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (i, entry) in manifest.entries.iter().enumerate() {
        let mut records = load_entry(entry, base, features, vad).map_err(|e| match e {
            PipelineError::InvalidManifest(msg) => PipelineError::InvalidManifest(format!("entry {i}: {msg}")),
            other => other,
        })?;
        for r in &mut records {
            if let Some(g) = &entry.group {
                if r.group.is_empty() {
                    r.group = g.clone();
                }
            }
            if entry.split.is_some() {
                r.split = entry.split;
            }
        }
        out.extend(records);
    }
    Ok(out)
}

fn load_entry(
    entry: &ManifestEntry,
    base: &Path,
    cfg: &FeatureConfig,
    vad: &VadConfig,
) -> Result<Vec<UtteranceRecord>, PipelineError> {
    match (&entry.features, &entry.audio) {
        (Some(f), None) => read_jsonl(&base.join(f)),
        (None, Some(a)) => {
            let (Some(dialogue), Some(speaker)) = (&entry.dialogue, &entry.speaker) else {
                return Err(PipelineError::InvalidManifest(
                    "audio entries need dialogue and speaker".into(),
                ));
            };
            let clip = load_audio(base.join(a))?;
            let sr = clip.sample_rate_hz() as f64;
            let mut records: Vec<UtteranceRecord> = if let Some(l) = &entry.labels {
                read_jsonl(&base.join(l))?
            } else {
                let spans: Vec<UtteranceSpan> = match &entry.spans {
                    Some(s) => {
                        let p = base.join(s);
                        let text = fs::read_to_string(&p).map_err(|e| PipelineError::io(&p, e))?;
                        serde_json::from_str(&text).map_err(|e| PipelineError::Json(format!("{}: {e}", p.display())))?
                    }
                    None => segment_utterances(&clip, vad),
                };
                spans
                    .iter()
                    .enumerate()
                    .map(|(k, s)| UtteranceRecord {
                        dialogue: dialogue.clone(),
                        speaker: speaker.clone(),
                        group: String::new(),
                        utterance_id: k,
                        start_s: s.start_sample as f64 / sr,
                        end_s: s.end_sample as f64 / sr,
                        features: None,
                        labels: None,
                        votes: Vec::new(),
                        listener_engagement: None,
                        split: None,
                    })
                    .collect()
            };
            for r in &mut records {
                r.dialogue = dialogue.clone();
                r.speaker = speaker.clone();
                let span = UtteranceSpan::new(
                    (r.start_s * sr).round().max(0.0) as usize,
                    (r.end_s * sr).round().max(0.0) as usize,
                    speaker.clone(),
                    r.utterance_id,
                );
                r.features = Some(extract_features(&clip, &span, cfg)?);
            }
            Ok(records)
        }
        _ => Err(PipelineError::InvalidManifest(
            "exactly one of 'audio' or 'features' is required".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn record(dialogue: &str, speaker: &str, k: usize) -> UtteranceRecord {
        UtteranceRecord {
            dialogue: dialogue.into(),
            speaker: speaker.into(),
            group: String::new(),
            utterance_id: k,
            start_s: k as f64,
            end_s: k as f64 + 0.5,
            features: None,
            labels: None,
            votes: Vec::new(),
            listener_engagement: None,
            split: None,
        }
    }

    #[test]
    fn by_dialogue_alternates_sorted_ids() {
        let rs = [
            record("d2", "a", 0),
            record("d1", "b", 0),
            record("d3", "c", 0),
            record("d1", "d", 1),
        ];
        assert_eq!(
            assign_splits(&rs, SplitPolicy::ByDialogue),
            vec![Split::Test, Split::Train, Split::Train, Split::Train]
        );
    }

    #[test]
    fn by_speaker_keeps_dialogues_and_speakers_whole() {
        let rs = [
            record("d1", "a", 0),
            record("d1", "b", 1),
            record("d2", "c", 0),
            record("d2", "d", 1),
            record("d3", "b", 0),
            record("d3", "e", 1),
        ];
        let s = assign_splits(&rs, SplitPolicy::BySpeaker);
        assert_eq!(
            s,
            vec![
                Split::Train,
                Split::Train,
                Split::Test,
                Split::Test,
                Split::Train,
                Split::Train
            ]
        );
    }

    #[test]
    fn by_utterance_alternates_within_speaker() {
        let rs = [
            record("d", "a", 2),
            record("d", "a", 0),
            record("d", "b", 0),
            record("d", "a", 1),
        ];
        assert_eq!(
            assign_splits(&rs, SplitPolicy::ByUtterance),
            vec![Split::Train, Split::Train, Split::Train, Split::Test]
        );
    }

    #[test]
    fn explicit_split_wins() {
        let mut r = record("d1", "a", 0);
        r.split = Some(Split::Test);
        assert_eq!(assign_splits(&[r], SplitPolicy::ByDialogue), vec![Split::Test]);
    }

    #[test]
    fn jsonl_round_trip() {
        let mut r = record("d", "a", 3);
        r.features = Some(FeatureVector::new((0..46).map(|i| i as f64 * 0.1).collect()).unwrap());
        let text = to_jsonl(&[r.clone(), record("d", "b", 4)]);
        let back: Vec<UtteranceRecord> = parse_jsonl(&text).unwrap();
        assert_eq!(back[0], r);
        assert!(matches!(parse_jsonl::<UtteranceRecord>("{}\n"), Err(PipelineError::Json(_))));
    }
}
