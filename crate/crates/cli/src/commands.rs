use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use autodiscern::baseline::BaselineModel;
use autodiscern::corpus::{ingest as ingest_dir, stratified_folds, Corpus, Topic};
use autodiscern::embeddings::{embed_document, load_archive, EmbeddingArchive, EmbeddingSource};
use autodiscern::evaluation::{
    coverage_analysis, coverage_table, cross_validate, f1_table, predictions_csv, read_predictions, CVReport,
    CoverageReport, PredictionRecord, Scored,
};
use autodiscern::hea::{forward, top_attended, Evidence, Prediction};
use autodiscern::training::{
    embed_examples, random_search, split_validation, train_and_predict, train_fold, Checkpoint, TrainConfig,
};
use autodiscern::synthetic::{planted_corpus, write_corpus_dir, PlantedConfig};
use autodiscern::{Criterion, Document, Variant};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::{Outputs, RunManifest};
use crate::{Common, EmbeddingsArg, ModelArgs, ModelKind};

fn setup(common: &Common) -> Result<RunConfig, CliError> {
    Ok(RunConfig::load(common.config.as_deref())?.with_seed(common.seed))
}

fn load_corpus(path: &Path) -> Result<Corpus, CliError> {
    Corpus::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn finish(outputs: Outputs, command: &str, common: &Common, config: &RunConfig, inputs: &[&Path]) -> Result<(), CliError> {
    let manifest = RunManifest::new(command, common.config.as_deref(), config.seed(), inputs);
    for path in outputs.commit(manifest)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn jsonl<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row)?);
        out.push('\n');
    }
    Ok(out)
}

enum Embeddings {
    Hash,
    Archive(EmbeddingArchive),
}

impl Embeddings {
    fn load(arg: &EmbeddingsArg) -> Result<Self, CliError> {
        Ok(match arg {
            EmbeddingsArg::Hash => Embeddings::Hash,
            EmbeddingsArg::Archive(dir) => {
                Embeddings::Archive(load_archive(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?)
            }
        })
    }

    /// Source for a model expecting `dim`-wide token vectors.
    fn source(&self, dim: usize, hash_seed: u64) -> Result<EmbeddingSource<'_>, CliError> {
        match self {
            Embeddings::Hash => Ok(EmbeddingSource::Hash { dim, seed: hash_seed }),
            Embeddings::Archive(a) if a.dim == dim => Ok(EmbeddingSource::Archive(a)),
            Embeddings::Archive(a) => Err(CliError::Data(format!("archive dim {} but the model expects {dim}", a.dim))),
        }
    }

    /// Token-vector width to train with.
    fn dim(&self, configured: usize) -> usize {
        match self {
            Embeddings::Hash => configured,
            Embeddings::Archive(a) => a.dim,
        }
    }
}

fn variant(kind: ModelKind, command: &str) -> Result<Variant, CliError> {
    match kind {
        ModelKind::Hea => Ok(Variant::Hea),
        ModelKind::He => Ok(Variant::He),
        ModelKind::Rf => Err(CliError::Usage(format!("`{command}` needs a neural model (hea or he)"))),
    }
}

fn model_name(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Hea => "HEA",
        ModelKind::He => "HE",
        ModelKind::Rf => "RF",
    }
}

fn neural_config(config: &RunConfig, variant: Variant, embeddings: &Embeddings) -> TrainConfig {
    let mut train = config.train.clone();
    train.model.variant = variant;
    train.model.embedding_dim = embeddings.dim(train.model.embedding_dim);
    train
}

pub fn synth(docs: usize, sentences: usize, common: &Common) -> Result<(), CliError> {
    let config = setup(common)?;
    let planted = planted_corpus(&PlantedConfig { n_docs: docs, sentences, seed: config.seed(), ..Default::default() })?;
    write_corpus_dir(&planted.articles, &common.out)?;
    println!("{} articles in {}", planted.articles.len(), common.out.display());
    finish(Outputs::new(&common.out), "synth", common, &config, &[])
}

pub fn ingest(dir: &Path, common: &Common) -> Result<(), CliError> {
    let config = setup(common)?;
    let corpus = ingest_dir(dir, &config.segmenter)?;
    let stats = corpus_stats(&corpus);
    print!("{stats}");
    let mut outputs = Outputs::new(&common.out);
    outputs.add_json("corpus.json", &corpus)?;
    outputs.add("corpus_stats.txt", stats);
    finish(outputs, "ingest", common, &config, &[dir])
}

fn corpus_stats(corpus: &Corpus) -> String {
    let mut by_topic: BTreeMap<Topic, Vec<&Document>> = BTreeMap::new();
    for d in &corpus.documents {
        by_topic.entry(d.topic).or_default().push(d);
    }
    let mut out = String::from("topic            docs  sentences/doc  tokens/doc");
    for c in Criterion::ALL {
        write!(out, "  {:>4}", format!("{c}+")).unwrap();
    }
    out.push('\n');
    let mut row = |name: &str, docs: &[&Document]| {
        let n = docs.len().max(1) as f64;
        let sentences = docs.iter().map(|d| d.sentences.len()).sum::<usize>() as f64 / n;
        let tokens = docs.iter().map(|d| d.token_count()).sum::<usize>() as f64 / n;
        write!(out, "{name:<16} {:>4}  {sentences:>13.1}  {tokens:>10.1}", docs.len()).unwrap();
        for c in Criterion::ALL {
            write!(out, "  {:>4}", docs.iter().filter(|d| d.label(c) == 1).count()).unwrap();
        }
        out.push('\n');
    };
    for (topic, docs) in &by_topic {
        row(topic.as_str(), docs);
    }
    let all: Vec<&Document> = corpus.documents.iter().collect();
    row("all", &all);
    out
}

pub fn tune(corpus_path: &Path, common: &Common, args: &ModelArgs) -> Result<(), CliError> {
    let config = setup(common)?;
    let variant = variant(args.model, "tune")?;
    let corpus = load_corpus(corpus_path)?;
    let embeddings = Embeddings::load(&args.embeddings)?;
    let mut space = config.search.clone();
    space.variant = variant;
    space.embedding_dim = embeddings.dim(space.embedding_dim);
    let source = embeddings.source(space.embedding_dim, config.hash_seed)?;

    let docs: Vec<&Document> = corpus.documents.iter().collect();
    let mut outputs = Outputs::new(&common.out);
    for &criterion in args.criteria() {
        let examples = embed_examples(&docs, criterion, source)?;
        let (train, val) = split_validation(&examples, config.seed());
        let result = random_search(&space, &train, &val, criterion)?;
        let best = result.best_trial();
        println!(
            "{criterion}: best trial {} val F1-macro {:.3} (epoch {})",
            best.trial,
            best.val_f1_macro.unwrap_or(0.0),
            best.best_epoch.unwrap_or(0)
        );
        let logs: Vec<_> = result.trials.iter().flat_map(|t| t.log.iter()).collect();
        outputs.add(format!("trials_{criterion}.jsonl"), jsonl(&logs)?);
        outputs.add_json(
            format!("tune_{criterion}.json"),
            &serde_json::json!({ "criterion": criterion, "best": result.best, "trials": result.trials }),
        )?;
        let tuned = RunConfig { train: best.config.clone(), ..config.clone() };
        outputs.add_json(format!("best_config_{criterion}.json"), &tuned)?;
    }
    finish(outputs, "tune", common, &config, &[corpus_path])
}

fn checkpoint_path(dir: &Path, criterion: Criterion) -> PathBuf {
    dir.join(format!("{criterion}.adck"))
}

fn forest_path(dir: &Path, criterion: Criterion) -> PathBuf {
    dir.join(format!("{criterion}.rf.json"))
}

pub fn train(corpus_path: &Path, common: &Common, args: &ModelArgs) -> Result<(), CliError> {
    let config = setup(common)?;
    let corpus = load_corpus(corpus_path)?;
    let docs: Vec<&Document> = corpus.documents.iter().collect();
    let mut outputs = Outputs::new(&common.out);
    if args.model == ModelKind::Rf {
        for &criterion in args.criteria() {
            let model = BaselineModel::fit(&docs, &corpus.sources, criterion, &config.baseline, config.seed())?;
            println!("{criterion}: forest of {} trees on {} features", model.forest.trees.len(), model.forest.n_features);
            outputs.add(format!("{criterion}.rf.json"), model.to_json()?);
        }
        return finish(outputs, "train", common, &config, &[corpus_path]);
    }
    let embeddings = Embeddings::load(&args.embeddings)?;
    let train_config = neural_config(&config, variant(args.model, "train")?, &embeddings);
    let source = embeddings.source(train_config.model.embedding_dim, config.hash_seed)?;
    for &criterion in args.criteria() {
        let examples = embed_examples(&docs, criterion, source)?;
        let (fit, val) = split_validation(&examples, config.seed());
        let outcome = train_fold(&fit, &val, &train_config, criterion)?;
        let header = &outcome.checkpoint.header;
        println!("{criterion}: best epoch {} val F1-macro {:.3}", header.best_epoch, header.val_f1_macro);
        outputs.add(format!("{criterion}.adck"), outcome.checkpoint.to_bytes()?);
        outputs.add(format!("{criterion}.log.jsonl"), jsonl(&outcome.log)?);
    }
    finish(outputs, "train", common, &config, &[corpus_path])
}

pub fn evaluate(corpus_path: &Path, common: &Common, args: &ModelArgs) -> Result<(), CliError> {
    let config = setup(common)?;
    let corpus = load_corpus(corpus_path)?;
    let embeddings = Embeddings::load(&args.embeddings)?;
    let name = model_name(args.model);
    let mut reports: Vec<CVReport> = Vec::new();
    for &criterion in args.criteria() {
        let plan = stratified_folds(&corpus.documents, criterion, config.folds, config.seed())?;
        let report = match args.model {
            ModelKind::Rf => cross_validate(name, &corpus.documents, &plan, |_, train, test| {
                let model = BaselineModel::fit(train, &corpus.sources, criterion, &config.baseline, config.seed())?;
                test.iter().map(|d| model.predict(d, corpus.source(&d.id))).collect()
            })?,
            kind => {
                let train_config = neural_config(&config, variant(kind, "evaluate")?, &embeddings);
                let source = embeddings.source(train_config.model.embedding_dim, config.hash_seed)?;
                cross_validate(name, &corpus.documents, &plan, |_, train, test| {
                    let (_, preds) = train_and_predict(train, test, &train_config, criterion, source)?;
                    Ok(preds.iter().map(|p| (p.label, p.confidence)).collect())
                })?
            }
        };
        reports.push(report);
    }
    let table = f1_table(&reports);
    print!("{table}");
    let records: Vec<PredictionRecord> = reports.iter().flat_map(|r| r.predictions.iter().cloned()).collect();
    let mut outputs = Outputs::new(&common.out);
    outputs.add_json("cv_report.json", &reports)?;
    outputs.add("predictions.csv", predictions_csv(&records)?);
    outputs.add("f1_table.txt", table);
    finish(outputs, "evaluate", common, &config, &[corpus_path])
}

#[derive(Debug, Serialize)]
struct PredictionOutput {
    doc_id: String,
    criterion: Criterion,
    probs: [f64; 2],
    label: u8,
    confidence: f64,
    attention: Option<Vec<f64>>,
}

fn load_checkpoint(dir: &Path, criterion: Criterion) -> Result<Checkpoint, CliError> {
    let path = checkpoint_path(dir, criterion);
    Checkpoint::load(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Neural predictions for every document under one criterion.
fn neural_predictions(
    corpus: &Corpus,
    checkpoint: &Checkpoint,
    embeddings: &Embeddings,
    hash_seed: u64,
) -> Result<Vec<Prediction>, CliError> {
    let source = embeddings.source(checkpoint.params.config.embedding_dim, hash_seed)?;
    corpus
        .documents
        .iter()
        .map(|d| Ok(forward(&checkpoint.params, &embed_document(d, source)?)?))
        .collect()
}

pub fn predict(corpus_path: &Path, models: &Path, common: &Common, args: &ModelArgs) -> Result<(), CliError> {
    let config = setup(common)?;
    let corpus = load_corpus(corpus_path)?;
    let embeddings = Embeddings::load(&args.embeddings)?;
    let mut rows: Vec<PredictionOutput> = Vec::new();
    for &criterion in args.criteria() {
        if args.model == ModelKind::Rf {
            let path = forest_path(models, criterion);
            let text = fs::read_to_string(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let model = BaselineModel::from_json(&text)?;
            for d in &corpus.documents {
                let scores = model.forest.class_scores(&model.features(d, corpus.source(&d.id)))?;
                let (label, confidence) = model.predict(d, corpus.source(&d.id))?;
                rows.push(PredictionOutput {
                    doc_id: d.id.clone(),
                    criterion,
                    probs: scores,
                    label,
                    confidence,
                    attention: None,
                });
            }
        } else {
            let checkpoint = load_checkpoint(models, criterion)?;
            let preds = neural_predictions(&corpus, &checkpoint, &embeddings, config.hash_seed)?;
            for (d, p) in corpus.documents.iter().zip(preds) {
                rows.push(PredictionOutput {
                    doc_id: d.id.clone(),
                    criterion,
                    probs: p.probs,
                    label: p.label,
                    confidence: p.confidence,
                    attention: p.attention,
                });
            }
        }
    }
    let labels: BTreeMap<&str, &Document> = corpus.documents.iter().map(|d| (d.id.as_str(), d)).collect();
    let records: Vec<PredictionRecord> = rows
        .iter()
        .map(|r| PredictionRecord {
            doc_id: r.doc_id.clone(),
            criterion: r.criterion,
            label_true: labels[r.doc_id.as_str()].label(r.criterion),
            label_pred: r.label,
            confidence: r.confidence,
        })
        .collect();
    println!("{} predictions", rows.len());
    let mut outputs = Outputs::new(&common.out);
    outputs.add_json("predictions.json", &rows)?;
    outputs.add("predictions.csv", predictions_csv(&records)?);
    finish(outputs, "predict", common, &config, &[corpus_path, models])
}

#[derive(Debug, Serialize)]
struct CoverageOutput {
    criterion: Criterion,
    report: CoverageReport,
}

pub fn coverage(path: &Path, common: &Common, levels: Option<Vec<f64>>) -> Result<(), CliError> {
    let config = setup(common)?;
    let levels = levels.unwrap_or_else(|| config.coverage.clone());
    let records = read_predictions(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut by_criterion: BTreeMap<Criterion, Vec<Scored>> = BTreeMap::new();
    for r in &records {
        by_criterion.entry(r.criterion).or_default().push(r.scored());
    }
    let mut reports = Vec::new();
    for (criterion, scored) in by_criterion {
        reports.push((criterion, coverage_analysis(&scored, &levels)?));
    }
    let table = coverage_table(&reports);
    print!("{table}");
    let rows: Vec<CoverageOutput> = reports.into_iter().map(|(criterion, report)| CoverageOutput { criterion, report }).collect();
    let mut outputs = Outputs::new(&common.out);
    outputs.add_json("coverage.json", &rows)?;
    outputs.add("coverage_table.txt", table);
    finish(outputs, "coverage", common, &config, &[path])
}

#[derive(Debug, Serialize)]
struct EvidenceDocument {
    doc_id: String,
    pass_probability: f64,
    label: u8,
    confidence: f64,
    evidence: Vec<Evidence>,
}

#[derive(Debug, Serialize)]
struct EvidenceTopic {
    topic: Topic,
    /// Ranked by pass probability, highest first.
    documents: Vec<EvidenceDocument>,
}

#[derive(Debug, Serialize)]
struct EvidenceQuestion {
    criterion: Criterion,
    title: String,
    topics: Vec<EvidenceTopic>,
}

#[derive(Debug, Serialize)]
struct EvidenceOutput {
    k: usize,
    questions: Vec<EvidenceQuestion>,
}

/// Per question, one column per topic holding the most attended sentence of
/// each of the `k` top-ranked documents.
fn evidence_table(out: &EvidenceOutput) -> String {
    let mut text = String::new();
    for q in &out.questions {
        writeln!(text, "{}", q.title).unwrap();
        let header: Vec<&str> = q.topics.iter().map(|t| t.topic.as_str()).collect();
        writeln!(text, "  {}", header.join(" | ")).unwrap();
        for rank in 0..out.k {
            let cells: Vec<String> = q
                .topics
                .iter()
                .map(|t| {
                    t.documents
                        .get(rank)
                        .and_then(|d| d.evidence.first())
                        .map_or("-".to_string(), |e| e.text.clone())
                })
                .collect();
            writeln!(text, "  {}", cells.join(" | ")).unwrap();
        }
        text.push('\n');
    }
    text
}

pub fn evidence(corpus_path: &Path, models: &Path, common: &Common, args: &ModelArgs, k: Option<usize>) -> Result<(), CliError> {
    let config = setup(common)?;
    variant(args.model, "evidence")?;
    let k = k.unwrap_or(config.k);
    if k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    let corpus = load_corpus(corpus_path)?;
    let embeddings = Embeddings::load(&args.embeddings)?;
    let mut questions = Vec::new();
    for &criterion in args.criteria() {
        let checkpoint = load_checkpoint(models, criterion)?;
        let preds = neural_predictions(&corpus, &checkpoint, &embeddings, config.hash_seed)?;
        let mut by_topic: BTreeMap<Topic, Vec<EvidenceDocument>> = BTreeMap::new();
        for (d, p) in corpus.documents.iter().zip(&preds) {
            by_topic.entry(d.topic).or_default().push(EvidenceDocument {
                doc_id: d.id.clone(),
                pass_probability: p.probs[1],
                label: p.label,
                confidence: p.confidence,
                evidence: top_attended(p, d, k)?,
            });
        }
        let topics = by_topic
            .into_iter()
            .map(|(topic, mut documents)| {
                documents.sort_by(|a, b| b.pass_probability.total_cmp(&a.pass_probability).then(a.doc_id.cmp(&b.doc_id)));
                EvidenceTopic { topic, documents }
            })
            .collect();
        questions.push(EvidenceQuestion { criterion, title: criterion.title().to_string(), topics });
    }
    let output = EvidenceOutput { k, questions };
    let table = evidence_table(&output);
    print!("{table}");
    let mut outputs = Outputs::new(&common.out);
    outputs.add_json("evidence.json", &output)?;
    outputs.add("evidence.txt", table);
    finish(outputs, "evidence", common, &config, &[corpus_path, models])
}
