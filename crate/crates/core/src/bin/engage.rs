use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use engage::audio::{load_audio, segment_utterances};
use engage::chmm::{ChmmModel, HmmModel};
use engage::features::FEATURE_NAMES;
use engage::pipeline::{
    assign_splits, decode_records, fmt_accuracy, labeled_rows, load_corpus, prune_rare_classes, rank_features, read_jsonl,
    run_pipeline, score_decoded, synth_corpus, to_jsonl, train_chmm_from_timelines, train_hmm_from_timelines, training_timelines,
    DecodeOutput, EvalReport, PipelineConfig, PipelineError, Source, Split, SvmSet, Table, Target, TrainedModels,
    UtteranceRecord,
};
use engage::selection::{partition_by_group, select_top_k, LabeledDataset};

#[derive(Parser)]
#[command(name = "engage", version, about = "Engagement estimation from two-party speech")]
struct Cli {
    /// JSON pipeline configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long, global = true, default_value = "engage-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find utterances in mono WAV files
    Segment { wavs: Vec<PathBuf> },
    /// Extract feature vectors for every utterance of a manifest
    Features {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Rank features with ReliefF
    Select {
        #[command(flatten)]
        input: RecordsArg,
        #[arg(long, value_enum, default_value_t = TargetArg::Arousal)]
        target: TargetArg,
        /// Number of features to keep
        #[arg(long, default_value_t = 7)]
        k: usize,
    },
    /// Train level classifiers
    TrainSvm {
        #[command(flatten)]
        input: RecordsArg,
        #[arg(long, value_enum, default_value_t = TargetArg::Arousal)]
        target: TargetArg,
    },
    /// Train the single-chain engagement HMM
    TrainHmm {
        #[command(flatten)]
        input: RecordsArg,
    },
    /// Train the coupled engagement HMM
    TrainChmm {
        #[command(flatten)]
        input: RecordsArg,
    },
    /// Predict arousal and decode engagement per dialogue
    Decode {
        #[command(flatten)]
        input: RecordsArg,
        #[arg(long)]
        svm: PathBuf,
        #[arg(long)]
        chmm: PathBuf,
        #[arg(long)]
        hmm: Option<PathBuf>,
        /// Classifier that predicts engagement directly
        #[arg(long)]
        engagement_svm: Option<PathBuf>,
    },
    /// Score a decode output against its gold labels
    Evaluate { decoded: PathBuf },
    /// Draw a synthetic corpus
    Synth,
    /// Train, decode and score end to end
    Pipeline,
}

#[derive(Args)]
struct RecordsArg {
    /// Utterance records (JSON lines)
    #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
    records: Option<PathBuf>,
    /// Corpus manifest
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Which part of the split to use
    #[arg(long, value_enum, default_value_t = SplitArg::Train)]
    split: SplitArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Arousal,
    Engagement,
}

impl TargetArg {
    fn target(self) -> Target {
        match self {
            TargetArg::Arousal => Target::Arousal,
            TargetArg::Engagement => Target::Engagement,
        }
    }
}

struct Ctx {
    cfg: PipelineConfig,
    seed: u64,
    out: PathBuf,
}

impl Ctx {
    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, PipelineError> {
        fs::create_dir_all(&self.out).map_err(|e| PipelineError::io(&self.out, e))?;
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(|e| PipelineError::io(&path, e))?;
        Ok(path)
    }

    /// Writes `<name>.json` and `<name>.txt` and prints the table.
    fn report<T: Serialize>(&self, name: &str, value: &T, table: String) -> Result<(), PipelineError> {
        let json = serde_json::to_string_pretty(value).map_err(|e| PipelineError::Json(e.to_string()))?;
        self.write(&format!("{name}.json"), &(json + "\n"))?;
        self.write(&format!("{name}.txt"), &table)?;
        print!("{table}");
        Ok(())
    }

    fn records(&self, input: &RecordsArg) -> Result<Vec<UtteranceRecord>, PipelineError> {
        let all = match (&input.records, &input.manifest) {
            (Some(p), _) => read_jsonl(p)?,
            (None, Some(m)) => load_corpus(m, &self.cfg.features, &self.cfg.vad)?,
            (None, None) => unreachable!("clap requires one input"),
        };
        let want = match input.split {
            SplitArg::All => return Ok(all),
            SplitArg::Train => Split::Train,
            SplitArg::Test => Split::Test,
        };
        let splits = assign_splits(&all, self.cfg.split_policy);
        Ok(all
            .into_iter()
            .zip(splits)
            .filter(|(_, s)| *s == want)
            .map(|(r, _)| r)
            .collect())
    }
}

fn read_text(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, PipelineError> {
    let cfg: PipelineConfig = match path {
        Some(p) => {
            serde_json::from_str(&read_text(p)?).map_err(|e| PipelineError::InvalidConfig(format!("{}: {e}", p.display())))?
        }
        None => PipelineConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn group_label(g: &str) -> &str {
    if g.is_empty() {
        "*"
    } else {
        g
    }
}

fn eval_rows(t: &mut Table, task: &str, method: &str, r: &EvalReport) {
    t.push([task, method, &r.n.to_string(), &fmt_accuracy(r.accuracy)]);
}

fn segment(ctx: &Ctx, wavs: &[PathBuf]) -> Result<(), PipelineError> {
    let mut t = Table::new(&["file", "utterances", "speech_s", "duration_s"]);
    let mut files = Vec::new();
    for path in wavs {
        let clip = load_audio(path)?;
        let spans = segment_utterances(&clip, &ctx.cfg.vad);
        let sr = clip.sample_rate_hz() as f64;
        let speech: f64 = spans.iter().map(|s| s.len() as f64 / sr).sum();
        let name = format!("{}.spans.json", clip.channel_id());
        ctx.write(&name, &serde_json::to_string_pretty(&spans).expect("spans serialise"))?;
        t.push([
            path.display().to_string(),
            spans.len().to_string(),
            format!("{speech:.2}"),
            format!("{:.2}", clip.duration_s()),
        ]);
        files.push(json!({ "file": path, "spans": name, "utterances": spans.len(), "speech_s": speech }));
    }
    ctx.report("segment", &json!({ "files": files }), t.render())
}

fn features(ctx: &Ctx, manifest: &Path) -> Result<(), PipelineError> {
    let records = load_corpus(manifest, &ctx.cfg.features, &ctx.cfg.vad)?;
    ctx.write("features.jsonl", &to_jsonl(&records))?;
    let mut counts: std::collections::BTreeMap<(String, String), usize> = Default::default();
    for r in &records {
        *counts.entry((r.dialogue.clone(), r.speaker.clone())).or_default() += 1;
    }
    let mut t = Table::new(&["dialogue", "speaker", "utterances"]);
    for ((d, s), n) in &counts {
        t.push([d.as_str(), s.as_str(), &n.to_string()]);
    }
    ctx.report(
        "features",
        &json!({ "records": records.len(), "output": "features.jsonl" }),
        t.render(),
    )
}

fn select(ctx: &Ctx, input: &RecordsArg, target: TargetArg, k: usize) -> Result<(), PipelineError> {
    let records = ctx.records(input)?;
    let merge = match target {
        TargetArg::Arousal => &ctx.cfg.arousal_merge,
        TargetArg::Engagement => &ctx.cfg.engagement_merge,
    };
    let data = LabeledDataset::new(labeled_rows(&records, target.target(), merge)?)?;
    let parts = if ctx.cfg.per_group {
        partition_by_group(&data)
    } else {
        [(String::new(), data)].into()
    };
    let mut t = Table::new(&["group", "rank", "feature", "weight"]);
    let mut groups = serde_json::Map::new();
    for (group, mut part) in parts {
        let dropped = prune_rare_classes(&mut part);
        let w = rank_features(&part, &ctx.cfg.selection, ctx.seed)?;
        let top = select_top_k(&w, k)?;
        for (rank, (&i, &wi)) in top.indices.iter().zip(&top.weights).enumerate() {
            t.push([
                group_label(&group),
                &(rank + 1).to_string(),
                FEATURE_NAMES[i],
                &format!("{wi:.4}"),
            ]);
        }
        let weights: serde_json::Map<String, serde_json::Value> =
            FEATURE_NAMES.iter().zip(&w).map(|(n, v)| (n.to_string(), json!(v))).collect();
        let selected = top.names();
        groups.insert(
            group,
            json!({ "weights": weights, "subset": top, "selected": selected, "dropped_classes": dropped }),
        );
    }
    ctx.report("select", &groups, t.render())
}

fn train_svm(ctx: &Ctx, input: &RecordsArg, target: TargetArg) -> Result<(), PipelineError> {
    let records = ctx.records(input)?;
    let merge = match target {
        TargetArg::Arousal => &ctx.cfg.arousal_merge,
        TargetArg::Engagement => &ctx.cfg.engagement_merge,
    };
    let rows = labeled_rows(&records, target.target(), merge)?;
    let set = SvmSet::train(rows, &ctx.cfg.svm, &ctx.cfg.selection, ctx.cfg.per_group, ctx.seed)?;
    ctx.write("svm.json", &set.to_json())?;
    let mut t = Table::new(&["group", "classes", "support_vectors", "features"]);
    for (g, m) in &set.models {
        let sv: usize = m.machines.iter().map(|b| b.support_vectors.len()).sum();
        let dim = m.feature_subset.as_ref().map_or(m.input_dim, |s| s.len());
        t.push([group_label(g), &m.classes.join(","), &sv.to_string(), &dim.to_string()]);
    }
    ctx.report(
        "train-svm",
        &json!({ "model": "svm.json", "groups": set.models.keys().collect::<Vec<_>>(), "dropped_classes": set.dropped_classes }),
        t.render(),
    )
}

fn matrix_table(label: &str, rows: &[Vec<f64>]) -> Table {
    let cols: Vec<String> = (1..=rows.first().map_or(0, Vec::len)).map(|j| j.to_string()).collect();
    let mut header = vec![label];
    header.extend(cols.iter().map(String::as_str));
    let mut t = Table::new(&header);
    for (i, r) in rows.iter().enumerate() {
        let mut cells = vec![(i + 1).to_string()];
        cells.extend(r.iter().map(|p| format!("{p:.3}")));
        t.push(cells);
    }
    t
}

fn train_timelines(ctx: &Ctx, input: &RecordsArg) -> Result<(Vec<engage::chmm::DyadTimeline>, Vec<String>), PipelineError> {
    let records = ctx.records(input)?;
    let (timelines, skipped) = training_timelines(&records, &ctx.cfg.arousal_merge, &ctx.cfg.engagement_merge)?;
    if timelines.is_empty() {
        return Err(PipelineError::NoData("no dialogue with two labelled speakers".into()));
    }
    Ok((timelines, skipped))
}

fn train_hmm(ctx: &Ctx, input: &RecordsArg) -> Result<(), PipelineError> {
    let (timelines, skipped) = train_timelines(ctx, input)?;
    let (n, m) = (ctx.cfg.engagement_merge.n_levels(), ctx.cfg.arousal_merge.n_levels());
    let model = train_hmm_from_timelines(&timelines, n, m, ctx.cfg.smoothing)?;
    ctx.write("hmm.json", &model.to_json())?;
    let table = matrix_table("from\\to", &model.trans).render();
    ctx.report(
        "train-hmm",
        &json!({ "model": "hmm.json", "dialogues": timelines.len(), "skipped": skipped }),
        table,
    )
}

fn train_chmm(ctx: &Ctx, input: &RecordsArg) -> Result<(), PipelineError> {
    let (timelines, skipped) = train_timelines(ctx, input)?;
    let (n, m) = (ctx.cfg.engagement_merge.n_levels(), ctx.cfg.arousal_merge.n_levels());
    let model = train_chmm_from_timelines(&timelines, n, m, ctx.cfg.smoothing, ctx.cfg.symmetric)?;
    ctx.write("chmm.json", &model.to_json())?;
    let mut table = matrix_table("own\\to", &model.chains[0].trans).render();
    table.push('\n');
    table.push_str(&matrix_table("partner\\to", &model.chains[0].cross).render());
    ctx.report(
        "train-chmm",
        &json!({ "model": "chmm.json", "dialogues": timelines.len(), "skipped": skipped }),
        table,
    )
}

fn score_table(out: &DecodeOutput, ctx: &Ctx) -> Result<(serde_json::Value, String), PipelineError> {
    let (arousal, methods) = score_decoded(out, ctx.cfg.arousal_merge.n_levels(), ctx.cfg.engagement_merge.n_levels())?;
    let mut t = Table::new(&["task", "method", "n", "accuracy"]);
    eval_rows(&mut t, "arousal", "svm", &arousal);
    if let Some(r) = &methods.svm {
        eval_rows(&mut t, "engagement", "svm", r);
    }
    if let Some(r) = &methods.hmm {
        eval_rows(&mut t, "engagement", "hmm", r);
    }
    eval_rows(&mut t, "engagement", "chmm", &methods.chmm);
    Ok((
        json!({ "arousal": arousal, "engagement": methods, "skipped_dialogues": out.skipped }),
        t.render(),
    ))
}

fn decode(
    ctx: &Ctx,
    input: &RecordsArg,
    svm: &Path,
    chmm: &Path,
    hmm: Option<&Path>,
    engagement_svm: Option<&Path>,
) -> Result<(), PipelineError> {
    let records = ctx.records(input)?;
    let models = TrainedModels {
        arousal: SvmSet::from_json(&read_text(svm)?)?,
        engagement_svm: engagement_svm
            .map(|p| read_text(p).and_then(|s| SvmSet::from_json(&s)))
            .transpose()?,
        hmm: hmm
            .map(|p| read_text(p).and_then(|s| Ok(HmmModel::from_json(&s)?)))
            .transpose()?,
        chmm: ChmmModel::from_json(&read_text(chmm)?)?,
        provenance: Default::default(),
    };
    let out = decode_records(&records, &models, &ctx.cfg.arousal_merge, &ctx.cfg.engagement_merge)?;
    ctx.write(
        "decoded.json",
        &(serde_json::to_string_pretty(&out).expect("decode output serialises") + "\n"),
    )?;
    let (report, table) = score_table(&out, ctx)?;
    ctx.report("decode", &report, table)
}

fn evaluate_cmd(ctx: &Ctx, decoded: &Path) -> Result<(), PipelineError> {
    let out: DecodeOutput = serde_json::from_str(&read_text(decoded)?).map_err(|e| PipelineError::Json(e.to_string()))?;
    let (report, table) = score_table(&out, ctx)?;
    ctx.report("evaluate", &report, table)
}

fn synth(ctx: &Ctx) -> Result<(), PipelineError> {
    let Source::Synth(gen) = &ctx.cfg.source else {
        return Err(PipelineError::InvalidConfig(
            "synth needs a 'synth' source in the config".into(),
        ));
    };
    let corpus = synth_corpus(gen, ctx.seed)?;
    ctx.write("records.jsonl", &to_jsonl(&corpus.records))?;
    ctx.write("timelines.jsonl", &to_jsonl(&corpus.timelines))?;
    let mut t = Table::new(&["dialogue", "steps", "speaker_a", "speaker_b"]);
    for tl in &corpus.timelines {
        let a = tl.steps.iter().filter(|s| s.obs[0].is_some()).count();
        t.push([
            tl.dialogue.clone(),
            tl.steps.len().to_string(),
            a.to_string(),
            (tl.steps.len() - a).to_string(),
        ]);
    }
    ctx.report(
        "synth",
        &json!({ "seed": ctx.seed, "dialogues": corpus.timelines.len(), "records": corpus.records.len(), "outputs": ["records.jsonl", "timelines.jsonl"] }),
        t.render(),
    )
}

fn pipeline(ctx: &Ctx) -> Result<(), PipelineError> {
    let report = run_pipeline(&ctx.cfg, ctx.seed)?;
    ctx.report("pipeline", &report, report.table())
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let ctx = Ctx {
        cfg: load_config(cli.config.as_deref())?,
        seed: cli.seed,
        out: cli.out,
    };
    match &cli.command {
        Command::Segment { wavs } => segment(&ctx, wavs),
        Command::Features { manifest } => features(&ctx, manifest),
        Command::Select { input, target, k } => select(&ctx, input, *target, *k),
        Command::TrainSvm { input, target } => train_svm(&ctx, input, *target),
        Command::TrainHmm { input } => train_hmm(&ctx, input),
        Command::TrainChmm { input } => train_chmm(&ctx, input),
        Command::Decode {
            input,
            svm,
            chmm,
            hmm,
            engagement_svm,
        } => decode(&ctx, input, svm, chmm, hmm.as_deref(), engagement_svm.as_deref()),
        Command::Evaluate { decoded } => evaluate_cmd(&ctx, decoded),
        Command::Synth => synth(&ctx),
        Command::Pipeline => pipeline(&ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 1 } else { 2 })
        }
    }
}
