//! Training and decoding over a corpus, and the three-way engagement
//! comparison.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::audio::VadConfig;
use crate::chmm::{
    train_chmm_supervised, train_hmm_supervised, viterbi_coupled, viterbi_hmm_partial, ChmmModel, DyadTimeline, HmmError,
    HmmModel, LabeledSequence,
};
use crate::features::FeatureConfig;
use crate::selection::{partition_by_group, relieff_weights, select_top_k, LabeledDataset, LabeledRow};
use crate::svm::{train_multiclass, SvmConfig, SvmModel};

use super::corpus::{assign_splits, load_corpus, Split, SplitPolicy, UtteranceRecord};
use super::eval::{evaluate, EvalReport};
use super::labels::{level_merge, LevelMerge};
use super::report::{fmt_accuracy, Table};
use super::synth::{synth_corpus, GeneratorConfig};
use super::timeline::{build_timeline, fill_gold, speaking_chain, timeline_order, TimelineEvent};
use super::PipelineError;

pub const SVM_SET_FORMAT: &str = "engage-svm-set";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Source {
    Synth(GeneratorConfig),
    Manifest(PathBuf),
}

impl Default for Source {
    fn default() -> Self {
        Source::Synth(GeneratorConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    /// Keep this many ReliefF-ranked features; all features when absent.
    pub top_k: Option<usize>,
    pub k_neighbors: usize,
    /// Sampled rows; every row when absent.
    pub n_iters: Option<usize>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            top_k: None,
            k_neighbors: 10,
            n_iters: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub source: Source,
    pub split_policy: SplitPolicy,
    pub vad: VadConfig,
    pub features: FeatureConfig,
    pub svm: SvmConfig,
    pub selection: SelectionConfig,
    /// One classifier per speaker group instead of one shared classifier.
    pub per_group: bool,
    pub arousal_merge: LevelMerge,
    pub engagement_merge: LevelMerge,
    /// Additive smoothing of the HMM and CHMM counts.
    pub smoothing: f64,
    /// Train the CHMM on both chain orders so that both chains share
    /// parameters.
    pub symmetric: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            source: Source::default(),
            split_policy: SplitPolicy::default(),
            vad: VadConfig::default(),
            features: FeatureConfig::default(),
            svm: SvmConfig::default(),
            selection: SelectionConfig::default(),
            per_group: false,
            arousal_merge: LevelMerge::identity(),
            engagement_merge: LevelMerge::identity(),
            smoothing: 1.0,
            symmetric: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.arousal_merge.validate()?;
        self.engagement_merge.validate()?;
        if !(self.smoothing.is_finite() && self.smoothing >= 0.0) {
            return Err(PipelineError::InvalidConfig(
                "smoothing must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn load_records(&self, seed: u64) -> Result<Vec<UtteranceRecord>, PipelineError> {
        match &self.source {
            Source::Synth(g) => Ok(synth_corpus(g, seed)?.records),
            Source::Manifest(p) => load_corpus(p, &self.features, &self.vad),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Arousal,
    Engagement,
}

/// Training rows for `target` from records that carry both features and
/// labels; labels are merged levels written as integers.
pub fn labeled_rows<'a>(
    records: impl IntoIterator<Item = &'a UtteranceRecord>,
    target: Target,
    merge: &LevelMerge,
) -> Result<Vec<LabeledRow>, PipelineError> {
    let mut rows = Vec::new();
    for r in records {
        let (Some(f), Some(l)) = (&r.features, r.resolved_labels()?) else {
            continue;
        };
        let level = match target {
            Target::Arousal => l.arousal,
            Target::Engagement => l.engagement,
        };
        rows.push(LabeledRow {
            id: r.id(),
            features: f.as_slice().to_vec(),
            label: level_merge(level, merge).to_string(),
            speaker: r.speaker.clone(),
            group: r.group.clone(),
        });
    }
    Ok(rows)
}

/// Removes rows of classes with fewer than two examples and returns those
/// classes.
pub fn prune_rare_classes(data: &mut LabeledDataset) -> Vec<String> {
    let mut sizes: BTreeMap<String, usize> = BTreeMap::new();
    for r in &data.rows {
        *sizes.entry(r.label.clone()).or_default() += 1;
    }
    let rare: Vec<String> = sizes.into_iter().filter(|(_, n)| *n < 2).map(|(c, _)| c).collect();
    data.rows.retain(|r| !rare.contains(&r.label));
    rare
}

/// ReliefF weights with the neighbour count capped below the smallest
/// class size.
pub fn rank_features(data: &LabeledDataset, selection: &SelectionConfig, seed: u64) -> Result<Vec<f64>, PipelineError> {
    let mut sizes: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &data.rows {
        *sizes.entry(r.label.as_str()).or_default() += 1;
    }
    let smallest = sizes.values().copied().min().unwrap_or(2);
    let neighbors = selection.k_neighbors.min(smallest.saturating_sub(1)).max(1);
    let n_iters = selection.n_iters.unwrap_or(data.len());
    Ok(relieff_weights(data, neighbors, n_iters, seed)?)
}

/// Level classifiers keyed by speaker group; the single key `""` when
/// groups are not distinguished.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmSet {
    pub format: String,
    pub version: u32,
    pub per_group: bool,
    pub models: BTreeMap<String, SvmModel>,
    /// Classes left out of each model for having fewer than two examples.
    #[serde(default)]
    pub dropped_classes: BTreeMap<String, Vec<String>>,
}

impl SvmSet {
    pub fn train(
        rows: Vec<LabeledRow>,
        svm: &SvmConfig,
        selection: &SelectionConfig,
        per_group: bool,
        seed: u64,
    ) -> Result<Self, PipelineError> {
        let data = LabeledDataset::new(rows)?;
        if data.is_empty() {
            return Err(PipelineError::NoData("no labelled training utterances".into()));
        }
        let parts = if per_group {
            partition_by_group(&data)
        } else {
            BTreeMap::from([(String::new(), data)])
        };
        let mut models = BTreeMap::new();
        let mut dropped_classes = BTreeMap::new();
        for (group, mut part) in parts {
            let rare = prune_rare_classes(&mut part);
            if !rare.is_empty() {
                dropped_classes.insert(group.clone(), rare);
            }
            let subset = match selection.top_k {
                Some(k) => Some(select_top_k(&rank_features(&part, selection, seed)?, k)?),
                None => None,
            };
            models.insert(group, train_multiclass(&part, svm, subset)?);
        }
        Ok(Self {
            format: SVM_SET_FORMAT.into(),
            version: 1,
            per_group,
            models,
            dropped_classes,
        })
    }

    pub fn model_for(&self, group: &str) -> Result<&SvmModel, PipelineError> {
        let key = if self.per_group { group } else { "" };
        self.models
            .get(key)
            .ok_or_else(|| PipelineError::UnknownGroup(key.to_string()))
    }

    /// Predicted level of a record, or `None` when it has no features.
    pub fn predict(&self, r: &UtteranceRecord) -> Result<Option<u8>, PipelineError> {
        let Some(f) = &r.features else { return Ok(None) };
        let level = self.model_for(&r.group)?.predict_level(f.as_slice())?;
        Ok(Some(level as u8))
    }

    /// Largest level any model can emit.
    pub fn max_level(&self) -> Result<u32, PipelineError> {
        let mut top = 0;
        for m in self.models.values() {
            top = top.max(m.levels()?.into_iter().max().unwrap_or(0));
        }
        Ok(top)
    }

    pub fn selected_features(&self) -> BTreeMap<String, Vec<String>> {
        self.models
            .iter()
            .filter_map(|(g, m)| {
                m.feature_subset
                    .as_ref()
                    .map(|s| (g.clone(), s.names().iter().map(|n| n.to_string()).collect()))
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialise")
    }

    pub fn from_json(s: &str) -> Result<Self, PipelineError> {
        let set: Self = serde_json::from_str(s).map_err(|e| PipelineError::Json(e.to_string()))?;
        if set.format != SVM_SET_FORMAT || set.version != 1 || set.models.is_empty() {
            return Err(PipelineError::InvalidConfig(format!(
                "unsupported classifier document {} v{}",
                set.format, set.version
            )));
        }
        Ok(set)
    }
}

fn group_by_dialogue<'a>(records: impl IntoIterator<Item = &'a UtteranceRecord>) -> BTreeMap<&'a str, Vec<&'a UtteranceRecord>> {
    let mut out: BTreeMap<&str, Vec<&UtteranceRecord>> = BTreeMap::new();
    for r in records {
        out.entry(r.dialogue.as_str()).or_default().push(r);
    }
    out
}

/// Gold timelines with observed arousal and engagement for both chains at
/// every step. The silent chain takes the utterance's listener label when
/// present and otherwise carries its own last label. Dialogues without two
/// labelled speakers are returned in the second list.
pub fn training_timelines<'a>(
    records: impl IntoIterator<Item = &'a UtteranceRecord>,
    arousal_merge: &LevelMerge,
    engagement_merge: &LevelMerge,
) -> Result<(Vec<DyadTimeline>, Vec<String>), PipelineError> {
    let mut timelines = Vec::new();
    let mut skipped = Vec::new();
    for (dialogue, recs) in group_by_dialogue(records) {
        let mut events = Vec::with_capacity(recs.len());
        for r in &recs {
            let labels = r.resolved_labels()?;
            events.push(TimelineEvent {
                speaker: r.speaker.clone(),
                start_s: r.start_s,
                obs: labels.map(|l| level_merge(l.arousal, arousal_merge) as usize - 1),
                gold: labels.map(|l| level_merge(l.engagement, engagement_merge) as usize - 1),
            });
        }
        let mut tl = match build_timeline(dialogue, &events) {
            Ok(tl) => tl,
            Err(PipelineError::NotTwoSpeakers { .. }) => {
                skipped.push(dialogue.to_string());
                continue;
            }
            Err(e) => return Err(e),
        };
        for (k, i) in timeline_order(&events).into_iter().enumerate() {
            let m = usize::from(events[i].speaker != tl.speakers[0]);
            if let Some(l) = recs[i].listener_engagement {
                if !(1..=5).contains(&l) {
                    return Err(PipelineError::InvalidLabel(format!(
                        "listener engagement {l} is outside 1..=5"
                    )));
                }
                tl.steps[k].gold[1 - m] = Some(level_merge(l, engagement_merge) as usize - 1);
            }
        }
        let tl = fill_gold(&tl);
        if tl.steps.iter().any(|s| s.gold.iter().any(Option::is_none)) {
            skipped.push(dialogue.to_string());
            continue;
        }
        timelines.push(tl);
    }
    Ok((timelines, skipped))
}

pub fn train_hmm_from_timelines(
    timelines: &[DyadTimeline],
    n_states: usize,
    n_symbols: usize,
    alpha: f64,
) -> Result<HmmModel, PipelineError> {
    let mut seqs = Vec::with_capacity(2 * timelines.len());
    for tl in timelines {
        for m in 0..2 {
            let states = tl
                .gold(m)
                .into_iter()
                .enumerate()
                .map(|(step, g)| g.ok_or(HmmError::MissingGold { step, chain: m }))
                .collect::<Result<Vec<_>, _>>()?;
            seqs.push(LabeledSequence {
                states,
                obs: tl.observations(m),
            });
        }
    }
    Ok(train_hmm_supervised(&seqs, n_states, n_symbols, alpha)?)
}

pub fn train_chmm_from_timelines(
    timelines: &[DyadTimeline],
    n_states: usize,
    n_symbols: usize,
    alpha: f64,
    symmetric: bool,
) -> Result<ChmmModel, PipelineError> {
    let mut data = timelines.to_vec();
    if symmetric {
        data.extend(timelines.iter().map(DyadTimeline::swapped));
    }
    Ok(train_chmm_supervised(&data, n_states, n_symbols, alpha)?)
}

/// What a set of models was fitted on.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub split: Option<Split>,
    pub n_rows: usize,
    pub dialogues: Vec<String>,
    pub speakers: Vec<String>,
}

impl Provenance {
    pub fn of<'a>(split: Option<Split>, records: impl IntoIterator<Item = &'a UtteranceRecord>) -> Self {
        let mut dialogues = std::collections::BTreeSet::new();
        let mut speakers = std::collections::BTreeSet::new();
        let mut n_rows = 0;
        for r in records {
            dialogues.insert(r.dialogue.clone());
            speakers.insert(r.speaker.clone());
            n_rows += 1;
        }
        Self {
            split,
            n_rows,
            dialogues: dialogues.into_iter().collect(),
            speakers: speakers.into_iter().collect(),
        }
    }
}

/// Everything a decoding run needs. Missing decoders are skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModels {
    pub arousal: SvmSet,
    pub engagement_svm: Option<SvmSet>,
    pub hmm: Option<HmmModel>,
    pub chmm: ChmmModel,
    #[serde(default)]
    pub provenance: Provenance,
}

impl TrainedModels {
    fn check_alphabets(&self) -> Result<(), PipelineError> {
        let symbols = self.arousal.max_level()? as usize;
        if symbols > self.chmm.n_symbols {
            return Err(PipelineError::AlphabetMismatch {
                what: "arousal symbols",
                expected: self.chmm.n_symbols,
                got: symbols,
            });
        }
        if let Some(h) = &self.hmm {
            if h.n_symbols != self.chmm.n_symbols || h.n_states != self.chmm.n_states {
                return Err(PipelineError::AlphabetMismatch {
                    what: "hmm size",
                    expected: self.chmm.n_states,
                    got: h.n_states,
                });
            }
        }
        if let Some(e) = &self.engagement_svm {
            let top = e.max_level()? as usize;
            if top > self.chmm.n_states {
                return Err(PipelineError::AlphabetMismatch {
                    what: "engagement levels",
                    expected: self.chmm.n_states,
                    got: top,
                });
            }
        }
        Ok(())
    }
}

/// One timeline step after decoding. Levels are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedStep {
    pub t: f64,
    pub utterance_id: usize,
    /// Chain index of the speaker.
    pub chain: usize,
    pub arousal: Option<u8>,
    pub gold_arousal: Option<u8>,
    pub gold: Option<u8>,
    pub svm: Option<u8>,
    pub hmm: Option<[u8; 2]>,
    pub chmm: [u8; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedDialogue {
    pub dialogue: String,
    pub speakers: [String; 2],
    pub steps: Vec<DecodedStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeOutput {
    pub dialogues: Vec<DecodedDialogue>,
    pub skipped: Vec<String>,
}

/// Predicts arousal for every record, builds one timeline per dialogue and
/// decodes engagement with each available method.
pub fn decode_records<'a>(
    records: impl IntoIterator<Item = &'a UtteranceRecord>,
    models: &TrainedModels,
    arousal_merge: &LevelMerge,
    engagement_merge: &LevelMerge,
) -> Result<DecodeOutput, PipelineError> {
    models.check_alphabets()?;
    let mut dialogues = Vec::new();
    let mut skipped = Vec::new();
    for (dialogue, recs) in group_by_dialogue(records) {
        let mut events = Vec::with_capacity(recs.len());
        let mut meta = Vec::with_capacity(recs.len());
        for r in &recs {
            let arousal = models.arousal.predict(r)?;
            let labels = r.resolved_labels()?;
            let svm = match &models.engagement_svm {
                Some(s) => s.predict(r)?,
                None => None,
            };
            events.push(TimelineEvent {
                speaker: r.speaker.clone(),
                start_s: r.start_s,
                obs: arousal.map(|a| a as usize - 1),
                gold: None,
            });
            meta.push((
                r.utterance_id,
                arousal,
                labels.map(|l| level_merge(l.arousal, arousal_merge)),
                labels.map(|l| level_merge(l.engagement, engagement_merge)),
                svm,
            ));
        }
        let tl = match build_timeline(dialogue, &events) {
            Ok(tl) => tl,
            Err(PipelineError::NotTwoSpeakers { .. }) => {
                skipped.push(dialogue.to_string());
                continue;
            }
            Err(e) => return Err(e),
        };
        let chmm = viterbi_coupled(&models.chmm, &tl)?;
        let hmm = match &models.hmm {
            Some(h) => Some([
                viterbi_hmm_partial(h, &tl.observations(0))?,
                viterbi_hmm_partial(h, &tl.observations(1))?,
            ]),
            None => None,
        };
        let order = timeline_order(&events);
        let steps = order
            .iter()
            .enumerate()
            .map(|(k, &i)| {
                let (utterance_id, arousal, gold_arousal, gold, svm) = meta[i];
                let chain = usize::from(events[i].speaker != tl.speakers[0]);
                DecodedStep {
                    t: events[i].start_s,
                    utterance_id,
                    chain,
                    arousal,
                    gold_arousal,
                    gold,
                    svm,
                    hmm: hmm.as_ref().map(|p| [p[0].states[k] as u8 + 1, p[1].states[k] as u8 + 1]),
                    chmm: [chmm.chains[0][k] as u8 + 1, chmm.chains[1][k] as u8 + 1],
                }
            })
            .collect();
        debug_assert!(tl.steps.iter().all(|s| speaking_chain(s).is_some() || s.obs == [None, None]));
        dialogues.push(DecodedDialogue {
            dialogue: dialogue.to_string(),
            speakers: tl.speakers.clone(),
            steps,
        });
    }
    Ok(DecodeOutput { dialogues, skipped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReports {
    pub svm: Option<EvalReport>,
    pub hmm: Option<EvalReport>,
    pub chmm: EvalReport,
}

/// Scores each method at the speaker's own steps against the speaker's
/// label. Arousal accuracy is scored per utterance.
pub fn score_decoded(
    out: &DecodeOutput,
    n_arousal: usize,
    n_engagement: usize,
) -> Result<(EvalReport, MethodReports), PipelineError> {
    let steps: Vec<&DecodedStep> = out.dialogues.iter().flat_map(|d| &d.steps).collect();
    let gold: Vec<Option<usize>> = steps.iter().map(|s| s.gold.map(|g| g as usize - 1)).collect();
    let idx = |v: u8| v as usize - 1;

    let with_pred = |f: &dyn Fn(&DecodedStep) -> Option<u8>, gold_of: &dyn Fn(&DecodedStep) -> Option<u8>, n: usize| {
        let (pred, g): (Vec<usize>, Vec<Option<usize>>) = steps
            .iter()
            .filter_map(|s| f(s).map(|p| (idx(p), gold_of(s).map(idx))))
            .unzip();
        evaluate(&pred, &g, n)
    };
    let arousal = with_pred(&|s| s.arousal, &|s| s.gold_arousal, n_arousal)?;
    let chmm_pred: Vec<usize> = steps.iter().map(|s| idx(s.chmm[s.chain])).collect();
    let chmm = evaluate(&chmm_pred, &gold, n_engagement)?;
    let hmm = match steps.iter().all(|s| s.hmm.is_some()) && !steps.is_empty() {
        true => {
            let pred: Vec<usize> = steps.iter().map(|s| idx(s.hmm.expect("checked")[s.chain])).collect();
            Some(evaluate(&pred, &gold, n_engagement)?)
        }
        false => None,
    };
    let svm = match steps.iter().any(|s| s.svm.is_some()) {
        true => Some(with_pred(&|s| s.svm, &|s| s.gold, n_engagement)?),
        false => None,
    };
    Ok((arousal, MethodReports { svm, hmm, chmm }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub train_dialogues: usize,
    pub test_dialogues: usize,
    pub skipped_dialogues: Vec<String>,
    pub provenance: Provenance,
    pub selected_features: BTreeMap<String, Vec<String>>,
    pub arousal: EvalReport,
    pub engagement: MethodReports,
    pub decoded: Vec<DecodedDialogue>,
}

impl ExperimentReport {
    pub fn table(&self) -> String {
        let mut t = Table::new(&["task", "method", "n", "accuracy"]);
        t.push([
            "arousal",
            "svm",
            &self.arousal.n.to_string(),
            &fmt_accuracy(self.arousal.accuracy),
        ]);
        let e = &self.engagement;
        for (name, r) in [("svm", e.svm.as_ref()), ("hmm", e.hmm.as_ref()), ("chmm", Some(&e.chmm))] {
            if let Some(r) = r {
                t.push(["engagement", name, &r.n.to_string(), &fmt_accuracy(r.accuracy)]);
            }
        }
        t.render()
    }
}

/// Trains every model on the train split and returns them with the
/// dialogues that could not be used.
pub fn train_models(
    train: &[&UtteranceRecord],
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<(TrainedModels, Vec<String>), PipelineError> {
    let n_symbols = cfg.arousal_merge.n_levels();
    let n_states = cfg.engagement_merge.n_levels();
    let arousal = SvmSet::train(
        labeled_rows(train.iter().copied(), Target::Arousal, &cfg.arousal_merge)?,
        &cfg.svm,
        &cfg.selection,
        cfg.per_group,
        seed,
    )?;
    let engagement_svm = SvmSet::train(
        labeled_rows(train.iter().copied(), Target::Engagement, &cfg.engagement_merge)?,
        &cfg.svm,
        &cfg.selection,
        cfg.per_group,
        seed,
    )?;
    let (timelines, skipped) = training_timelines(train.iter().copied(), &cfg.arousal_merge, &cfg.engagement_merge)?;
    let hmm = train_hmm_from_timelines(&timelines, n_states, n_symbols, cfg.smoothing)?;
    let chmm = train_chmm_from_timelines(&timelines, n_states, n_symbols, cfg.smoothing, cfg.symmetric)?;
    let provenance = Provenance::of(Some(Split::Train), train.iter().copied());
    Ok((
        TrainedModels {
            arousal,
            engagement_svm: Some(engagement_svm),
            hmm: Some(hmm),
            chmm,
            provenance,
        },
        skipped,
    ))
}

/// Splits the records, trains on one part and decodes and scores the other.
pub fn run_experiment(records: &[UtteranceRecord], cfg: &PipelineConfig, seed: u64) -> Result<ExperimentReport, PipelineError> {
    cfg.validate()?;
    let splits = assign_splits(records, cfg.split_policy);
    let pick = |want: Split| -> Vec<&UtteranceRecord> {
        records
            .iter()
            .zip(&splits)
            .filter(|(_, s)| **s == want)
            .map(|(r, _)| r)
            .collect()
    };
    let (train, test) = (pick(Split::Train), pick(Split::Test));
    let (models, mut skipped) = train_models(&train, cfg, seed)?;
    let train_dialogues = group_by_dialogue(train.iter().copied()).len() - skipped.len();
    let out = decode_records(test.iter().copied(), &models, &cfg.arousal_merge, &cfg.engagement_merge)?;
    let (arousal, engagement) = score_decoded(&out, cfg.arousal_merge.n_levels(), cfg.engagement_merge.n_levels())?;
    skipped.extend(out.skipped.iter().cloned());
    Ok(ExperimentReport {
        seed,
        n_train: train.len(),
        n_test: test.len(),
        train_dialogues,
        test_dialogues: out.dialogues.len(),
        skipped_dialogues: skipped,
        provenance: models.provenance.clone(),
        selected_features: models.arousal.selected_features(),
        arousal,
        engagement,
        decoded: out.dialogues,
    })
}

/// Loads the configured corpus and runs the experiment.
pub fn run_pipeline(cfg: &PipelineConfig, seed: u64) -> Result<ExperimentReport, PipelineError> {
    cfg.validate()?;
    let records = cfg.load_records(seed)?;
    run_experiment(&records, cfg, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PipelineConfig {
        PipelineConfig {
            source: Source::Synth(GeneratorConfig {
                n_dialogues: 4,
                steps_per_dialogue: 60,
                separation: 5.0,
                ..Default::default()
            }),
            ..Default::default()
        }
    }

    #[test]
    fn synthetic_run_is_deterministic_and_scored_at_speaker_steps() {
        let a = run_pipeline(&small(), 3).unwrap();
        let b = run_pipeline(&small(), 3).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.n_train, 120);
        assert_eq!(a.n_test, 120);
        assert_eq!(a.engagement.chmm.n, 120);
        assert_eq!(a.engagement.hmm.as_ref().unwrap().n, 120);
        assert_eq!(a.engagement.svm.as_ref().unwrap().n, 120);
        assert!(a.arousal.accuracy > 0.5);
        assert!(a.table().contains("chmm"));
    }

    #[test]
    fn models_only_see_the_train_split() {
        for policy in [SplitPolicy::ByDialogue, SplitPolicy::BySpeaker] {
            let cfg = PipelineConfig {
                split_policy: policy,
                ..small()
            };
            let records = cfg.load_records(5).unwrap();
            let r = run_experiment(&records, &cfg, 5).unwrap();
            let test: Vec<&UtteranceRecord> = records
                .iter()
                .zip(assign_splits(&records, policy))
                .filter(|(_, s)| *s == Split::Test)
                .map(|(r, _)| r)
                .collect();
            assert_eq!(r.provenance.n_rows + test.len(), records.len());
            for t in test {
                assert!(!r.provenance.dialogues.contains(&t.dialogue));
                assert!(!r.provenance.speakers.contains(&t.speaker));
            }
        }
    }

    #[test]
    fn empty_test_split_gives_empty_report() {
        let cfg = small();
        let mut records = cfg.load_records(6).unwrap();
        for r in &mut records {
            r.split = Some(Split::Train);
        }
        let r = run_experiment(&records, &cfg, 6).unwrap();
        assert_eq!(r.engagement.chmm.n, 0);
        assert!(r.engagement.chmm.no_data);
        assert!(r.table().contains("no-data"));
    }

    #[test]
    fn alphabet_mismatch_is_reported() {
        let cfg = small();
        let records = cfg.load_records(1).unwrap();
        let refs: Vec<&UtteranceRecord> = records.iter().collect();
        let (mut models, _) = train_models(&refs, &cfg, 1).unwrap();
        models.chmm = crate::pipeline::synth::default_truth(5, 3);
        models.hmm = None;
        let err = decode_records(refs, &models, &cfg.arousal_merge, &cfg.engagement_merge).unwrap_err();
        assert!(matches!(err, PipelineError::AlphabetMismatch { expected: 3, got: 5, .. }));
    }

    #[test]
    fn merged_levels_shrink_the_alphabets() {
        let cfg = PipelineConfig {
            arousal_merge: LevelMerge::default(),
            engagement_merge: LevelMerge::default(),
            ..small()
        };
        let r = run_pipeline(&cfg, 2).unwrap();
        assert_eq!(r.arousal.confusion.len(), 3);
        assert_eq!(r.engagement.chmm.confusion.len(), 3);
    }

    #[test]
    fn selection_and_groups_are_reported() {
        let cfg = PipelineConfig {
            per_group: true,
            selection: SelectionConfig {
                top_k: Some(7),
                ..Default::default()
            },
            ..small()
        };
        let r = run_pipeline(&cfg, 4).unwrap();
        assert_eq!(r.selected_features.keys().collect::<Vec<_>>(), vec!["F", "M"]);
        assert!(r.selected_features.values().all(|v| v.len() == 7));
    }
}
