//! Pipeline stages behind the CLI subcommands. Every stage writes its
//! outputs under `<out>/{corpus,features,models,reports}/`, naming them by
//! a content hash of the config section and inputs that produced them.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{content_hash, DatasetConfig, ModelChoice, Pipeline, RunConfig};
use crate::corpus::{self, Corpus, LabelScheme, SplitTag};
use crate::error::{Error, Result};
use crate::evaluation::{self, EvalReport, RunInfo};
use crate::learners::{LearnerModel, Probabilities};
use crate::sentiment::{self, Lexicon, SentimentBlock, SentimentResult, LEXICON_ENV};
use crate::stacking::{self, StackingModel};
use crate::vectorize::{self, EmbeddingTable, FeatureMatrix, TfidfVocabulary};

pub const MODEL_FORMAT: u32 = 1;
pub const DEFAULT_LEXICON: &str = "data/AFINN-111.txt";
const LABELS_FILE: &str = "labels.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "model", rename_all = "snake_case")]
pub enum TrainedModel {
    Single(LearnerModel),
    Stack(StackingModel),
}

impl TrainedModel {
    pub fn fit(choice: &ModelChoice, x: &FeatureMatrix, labels: &[usize], classes: usize, seed: u64) -> Result<Self> {
        Ok(match choice {
            ModelChoice::Single(spec) => TrainedModel::Single(spec.fit(x, labels, classes, seed)?),
            ModelChoice::Stack(cfg) => TrainedModel::Stack(stacking::fit_stacking(x, labels, classes, cfg)?),
        })
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Probabilities> {
        match self {
            TrainedModel::Single(m) => m.predict_proba(x),
            TrainedModel::Stack(m) => stacking::predict_stacking(m, x),
        }
    }
}

/// Versioned, self-describing model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: u32,
    pub classes: Vec<String>,
    pub model: TrainedModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub label: String,
    pub proba: Vec<f64>,
}

#[derive(Serialize)]
struct SentimentLine<'a> {
    id: &'a str,
    #[serde(flatten)]
    result: SentimentResult,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_lines<T: Serialize>(items: impl IntoIterator<Item = T>, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, &item)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Lexicon path precedence: explicit flag, config, environment, default.
pub fn resolve_lexicon(flag: Option<&Path>, config: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.features.lexicon.clone())
        .or_else(|| std::env::var_os(LEXICON_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_LEXICON))
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon> {
    if !path.is_file() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    sentiment::load_lexicon(path)
}

/// A prepared corpus directory: `train.jsonl`, `eval.jsonl`, `labels.txt`.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub name: String,
    pub dir: PathBuf,
    pub train: Corpus,
    pub eval: Corpus,
}

pub fn prepare_dataset(ds: &DatasetConfig, seed: u64, out: &Path) -> Result<Prepared> {
    let train_bytes = read_bytes(&ds.train)?;
    let load = |path: &Path, split: SplitTag| -> Result<Corpus> {
        let c = corpus::load_table(path, &ds.mapping, &ds.scheme, ds.delimiter)?.with_split(split);
        Ok(if ds.dedup { c.deduplicate() } else { c })
    };
    let mut parts: Vec<Vec<u8>> = vec![ds.canonical.clone().into_bytes(), train_bytes];
    let (train, eval) = match &ds.eval {
        Some(eval_path) => {
            parts.push(read_bytes(eval_path)?);
            (load(&ds.train, SplitTag::Train)?, load(eval_path, SplitTag::Dev)?)
        }
        None => {
            parts.push(seed.to_le_bytes().to_vec());
            let (a, b) = corpus::stratified_split(&load(&ds.train, SplitTag::Unsplit)?, ds.split, seed)?;
            (a.with_split(SplitTag::Train), b.with_split(SplitTag::Test))
        }
    };
    let refs: Vec<&[u8]> = parts.iter().map(Vec::as_slice).collect();
    let dir = out.join("corpus").join(format!("{}-{}", ds.name, content_hash(&refs)));
    create_dir(&dir)?;
    corpus::write_jsonl(&train, dir.join("train.jsonl"))?;
    corpus::write_jsonl(&eval, dir.join("eval.jsonl"))?;
    let labels = dir.join(LABELS_FILE);
    fs::write(&labels, ds.scheme.names().join("\n") + "\n").map_err(|e| Error::io(&labels, e))?;
    Ok(Prepared {
        name: ds.name.clone(),
        dir,
        train,
        eval,
    })
}

/// Read a corpus JSONL file whose label scheme sits next to it in
/// `labels.txt`.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    if !path.is_file() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let labels = path.with_file_name(LABELS_FILE);
    let names: Vec<String> = String::from_utf8_lossy(&read_bytes(&labels)?)
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    let scheme = LabelScheme::new(&names)?;
    let split = match path.file_stem().and_then(|s| s.to_str()) {
        Some("train") => SplitTag::Train,
        Some("eval") => SplitTag::Dev,
        _ => SplitTag::Unsplit,
    };
    corpus::read_jsonl(path, &scheme, split)
}

/// `(id, text)` pairs from any corpus JSONL file, labels ignored.
pub fn read_texts(path: &Path) -> Result<Vec<(String, String)>> {
    #[derive(Deserialize)]
    struct Line {
        id: String,
        text: String,
    }
    if !path.is_file() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let l: Line = serde_json::from_str(&line).map_err(|e| Error::Format {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((l.id, l.text));
    }
    Ok(out)
}

pub fn score_corpus(texts: &[(String, String)], lexicon: &Lexicon) -> Vec<SentimentResult> {
    texts
        .par_iter()
        .map(|(_, t)| sentiment::score_text(t, lexicon))
        .collect()
}

pub fn write_sentiment(input: &Path, lexicon_path: &Path, out: &Path) -> Result<PathBuf> {
    let lexicon = load_lexicon(lexicon_path)?;
    let texts = read_texts(input)?;
    let results = score_corpus(&texts, &lexicon);
    let hash = content_hash(&[&read_bytes(input)?, &read_bytes(lexicon_path)?]);
    let dir = out.join("features");
    create_dir(&dir)?;
    let path = dir.join(format!("sentiment-{hash}.jsonl"));
    write_lines(
        texts
            .iter()
            .zip(results)
            .map(|((id, _), result)| SentimentLine { id, result }),
        &path,
    )?;
    Ok(path)
}

fn sentiment_blocks(corpora: &[&Corpus], lexicon: &Lexicon) -> HashMap<String, SentimentBlock> {
    corpora
        .iter()
        .flat_map(|c| &c.documents)
        .map(|d| {
            let r = sentiment::score_text(&d.text, lexicon);
            (d.id.clone(), sentiment::encode_sentiment_features(&r))
        })
        .collect()
}

/// Features for one (pipeline, sentiment flag) combination.
pub struct FeatureSet {
    pub train: FeatureMatrix,
    pub eval: FeatureMatrix,
    pub vocabulary: Option<TfidfVocabulary>,
}

pub fn build_features(
    train: &Corpus,
    eval: &Corpus,
    pipeline: Pipeline,
    min_df: usize,
    embeddings: Option<&EmbeddingTable>,
    lexicon: Option<&Lexicon>,
) -> Result<FeatureSet> {
    let (base_train, base_eval, vocabulary) = match pipeline {
        Pipeline::Tfidf => {
            let vocab = vectorize::fit_tfidf(train, min_df)?;
            (
                vectorize::transform_tfidf(train, &vocab)?,
                vectorize::transform_tfidf(eval, &vocab)?,
                Some(vocab),
            )
        }
        Pipeline::Embeddings => {
            let table = embeddings.ok_or_else(|| Error::Config("embeddings pipeline needs a table".into()))?;
            (
                vectorize::embed_corpus(train, table)?,
                vectorize::embed_corpus(eval, table)?,
                None,
            )
        }
    };
    let (train, eval) = match lexicon {
        Some(lex) => {
            let blocks = sentiment_blocks(&[train, eval], lex);
            (
                vectorize::fuse_features(&base_train, &blocks, true)?,
                vectorize::fuse_features(&base_eval, &blocks, true)?,
            )
        }
        None => (base_train, base_eval),
    };
    Ok(FeatureSet {
        train,
        eval,
        vocabulary,
    })
}

pub fn features_label(pipeline: Pipeline, sentiment: bool) -> String {
    if sentiment {
        format!("{pipeline}+afinn")
    } else {
        pipeline.to_string()
    }
}

/// Featurize a prepared corpus directory; returns the output directory.
pub fn write_features(
    corpus_dir: &Path,
    pipeline: Pipeline,
    min_df: usize,
    embeddings: Option<&Path>,
    lexicon: Option<&Path>,
    canonical: &str,
    out: &Path,
) -> Result<PathBuf> {
    let train_path = corpus_dir.join("train.jsonl");
    let eval_path = corpus_dir.join("eval.jsonl");
    let train = load_corpus(&train_path)?;
    let eval = load_corpus(&eval_path)?;
    let mut parts = vec![
        canonical.as_bytes().to_vec(),
        pipeline.to_string().into_bytes(),
        read_bytes(&train_path)?,
        read_bytes(&eval_path)?,
    ];
    let table = match (pipeline, embeddings) {
        (Pipeline::Embeddings, Some(p)) => {
            parts.push(read_bytes(p)?);
            Some(vectorize::read_embedding_table(p)?)
        }
        (Pipeline::Embeddings, None) => {
            return Err(Error::Config("embeddings pipeline needs --embeddings or `embeddings =`".into()))
        }
        _ => None,
    };
    let lex = match lexicon {
        Some(p) => {
            let lex = load_lexicon(p)?;
            parts.push(read_bytes(p)?);
            Some(lex)
        }
        None => None,
    };
    let set = build_features(&train, &eval, pipeline, min_df, table.as_ref(), lex.as_ref())?;
    let refs: Vec<&[u8]> = parts.iter().map(Vec::as_slice).collect();
    let stem = corpus_dir.file_name().and_then(|s| s.to_str()).unwrap_or("corpus");
    let stem = stem.rsplit_once('-').map_or(stem, |(name, _)| name);
    let dir = out.join("features").join(format!(
        "{stem}-{}-{}",
        features_label(pipeline, lex.is_some()),
        content_hash(&refs)
    ));
    create_dir(&dir)?;
    vectorize::write_matrix(&set.train, dir.join("train.jsonl"))?;
    vectorize::write_matrix(&set.eval, dir.join("eval.jsonl"))?;
    if let Some(v) = &set.vocabulary {
        write_json(v, &dir.join("vocabulary.json"))?;
    }
    Ok(dir)
}

/// Gold labels for the matrix rows, joined by document id.
pub fn join_labels(x: &FeatureMatrix, corpus: &Corpus) -> Result<Vec<Option<usize>>> {
    let index = corpus::label_index(corpus);
    x.ids()
        .iter()
        .map(|id| index.get(id.as_str()).copied().ok_or_else(|| Error::Join(id.clone())))
        .collect()
}

fn require_labels(gold: Vec<Option<usize>>, x: &FeatureMatrix) -> Result<Vec<usize>> {
    gold.into_iter()
        .zip(x.ids())
        .map(|(g, id)| g.ok_or_else(|| Error::Contract(format!("training document `{id}` has no label"))))
        .collect()
}

pub struct TrainOutput {
    pub model_path: PathBuf,
    pub report_json: PathBuf,
    pub report_text: PathBuf,
}

/// Train on a feature file with labels from a corpus file; writes the model
/// and a training-set report.
pub fn train_command(
    config: &RunConfig,
    selector: &str,
    features: &Path,
    labels: &Path,
    out: &Path,
) -> Result<TrainOutput> {
    let choice = config.model.choice(selector, config.seed)?;
    let feature_bytes = read_bytes(features)?;
    let label_bytes = read_bytes(labels)?;
    let x = vectorize::read_matrix(features)?;
    let corpus = load_corpus(labels)?;
    let gold = join_labels(&x, &corpus)?;
    let y = require_labels(gold.clone(), &x)?;
    let classes = corpus.scheme.count();
    let model = TrainedModel::fit(&choice, &x, &y, classes, config.seed)?;
    let name = format!(
        "{}-{}",
        choice.name(),
        content_hash(&[
            config.model.canonical.as_bytes(),
            selector.as_bytes(),
            &config.seed.to_le_bytes(),
            &feature_bytes,
            &label_bytes,
        ])
    );
    let models = out.join("models");
    create_dir(&models)?;
    let model_path = models.join(format!("{name}.json"));
    let file = ModelFile {
        format: MODEL_FORMAT,
        classes: corpus.scheme.names().to_vec(),
        model,
    };
    write_json(&file, &model_path)?;

    let predicted = crate::learners::labels_from_proba(&file.model.predict_proba(&x)?);
    let run = RunInfo {
        dataset: "train".into(),
        features: parent_name(features),
        model: choice.name(),
        seed: config.seed,
    };
    let report = evaluation::report(run, corpus.scheme.names(), &gold, &predicted)?;
    let (report_json, report_text) = evaluation::write_reports(&[report], out.join("reports"), &format!("{name}-train"))?;
    Ok(TrainOutput {
        model_path,
        report_json,
        report_text,
    })
}

fn parent_name(path: &Path) -> String {
    path.parent()
        .and_then(|p| p.file_name())
        .and_then(|s| s.to_str())
        .unwrap_or("")
        .to_string()
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let bytes = read_bytes(path)?;
    let file: ModelFile = serde_json::from_slice(&bytes)?;
    if file.format != MODEL_FORMAT {
        return Err(Error::Format {
            line: 1,
            message: format!("unsupported model format {}", file.format),
        });
    }
    Ok(file)
}

pub fn predict(model: &ModelFile, x: &FeatureMatrix) -> Result<Vec<Prediction>> {
    let proba = model.model.predict_proba(x)?;
    Ok(x.ids()
        .iter()
        .zip(proba)
        .map(|(id, p)| Prediction {
            id: id.clone(),
            label: model.classes[crate::learners::argmax(&p)].clone(),
            proba: p,
        })
        .collect())
}

pub fn predict_command(model_path: &Path, features: &Path, out: &Path) -> Result<PathBuf> {
    let model = read_model(model_path)?;
    let x = vectorize::read_matrix(features)?;
    let predictions = predict(&model, &x)?;
    let hash = content_hash(&[&read_bytes(model_path)?, &read_bytes(features)?]);
    let dir = out.join("reports");
    create_dir(&dir)?;
    let path = dir.join(format!("predictions-{hash}.jsonl"));
    write_lines(&predictions, &path)?;
    Ok(path)
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let file = fs::File::open(path).map_err(|_| Error::MissingArtifact(path.to_path_buf()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(|e| Error::Format {
                line: i + 1,
                message: e.to_string(),
            })?);
        }
    }
    Ok(out)
}

pub fn evaluate_command(predictions: &Path, labels: &Path, run: RunInfo, out: &Path) -> Result<EvalReport> {
    let preds = read_predictions(predictions)?;
    let corpus = load_corpus(labels)?;
    let index = corpus::label_index(&corpus);
    let mut gold = Vec::with_capacity(preds.len());
    let mut predicted = Vec::with_capacity(preds.len());
    for p in &preds {
        gold.push(*index.get(p.id.as_str()).ok_or_else(|| Error::Join(p.id.clone()))?);
        predicted.push(
            corpus
                .scheme
                .index_of(&p.label)
                .ok_or_else(|| Error::Contract(format!("prediction label `{}` not in the scheme", p.label)))?,
        );
    }
    let report = evaluation::report(run.clone(), corpus.scheme.names(), &gold, &predicted)?;
    let hash = content_hash(&[
        &read_bytes(predictions)?,
        &read_bytes(labels)?,
        serde_json::to_string(&run)?.as_bytes(),
    ]);
    evaluation::write_reports(std::slice::from_ref(&report), out.join("reports"), &format!("eval-{hash}"))?;
    Ok(report)
}

pub struct ExperimentOutput {
    pub reports: Vec<EvalReport>,
    pub table: String,
    pub report_json: PathBuf,
}

/// Run the declared grid: datasets × pipelines × sentiment flags ×
/// learners, each trained on the train part and scored on the eval part.
pub fn experiment_command(config: &RunConfig, out: &Path) -> Result<ExperimentOutput> {
    let exp = config
        .experiment
        .as_ref()
        .ok_or_else(|| Error::Config("config has no [experiment] section".into()))?;
    let choices: Vec<(String, ModelChoice)> = exp
        .learners
        .iter()
        .map(|l| Ok((l.clone(), config.model.choice(l, config.seed)?)))
        .collect::<Result<_>>()?;
    let lexicon = if exp.sentiment.contains(&true) {
        Some(load_lexicon(&resolve_lexicon(None, config))?)
    } else {
        None
    };

    let mut reports = Vec::new();
    for name in &exp.datasets {
        let ds = config.dataset(name).expect("validated");
        let prepared = prepare_dataset(ds, config.seed, out)?;
        for &pipeline in &exp.pipelines {
            let table = match pipeline {
                Pipeline::Embeddings => Some(vectorize::read_embedding_table(config.embeddings_for(name)?)?),
                Pipeline::Tfidf => None,
            };
            for &use_sentiment in &exp.sentiment {
                let lex = if use_sentiment { lexicon.as_ref() } else { None };
                let set = build_features(
                    &prepared.train,
                    &prepared.eval,
                    pipeline,
                    config.features.min_df,
                    table.as_ref(),
                    lex,
                )?;
                let features = features_label(pipeline, use_sentiment);
                let y = require_labels(join_labels(&set.train, &prepared.train)?, &set.train)?;
                let gold = join_labels(&set.eval, &prepared.eval)?;
                let classes = prepared.train.scheme.count();
                let cells: Vec<Result<EvalReport>> = choices
                    .par_iter()
                    .map(|(selector, choice)| {
                        let model = TrainedModel::fit(choice, &set.train, &y, classes, config.seed)?;
                        let file = ModelFile {
                            format: MODEL_FORMAT,
                            classes: prepared.train.scheme.names().to_vec(),
                            model,
                        };
                        let hash = content_hash(&[
                            config.model.canonical.as_bytes(),
                            ds.canonical.as_bytes(),
                            features.as_bytes(),
                            config.features.canonical.as_bytes(),
                            selector.as_bytes(),
                            &config.seed.to_le_bytes(),
                        ]);
                        let dir = out.join("models");
                        create_dir(&dir)?;
                        write_json(&file, &dir.join(format!("{name}-{features}-{selector}-{hash}.json")))?;
                        let predicted = crate::learners::labels_from_proba(&file.model.predict_proba(&set.eval)?);
                        let run = RunInfo {
                            dataset: name.clone(),
                            features: features.clone(),
                            model: choice.name(),
                            seed: config.seed,
                        };
                        evaluation::report(run, prepared.eval.scheme.names(), &gold, &predicted)
                    })
                    .collect();
                for c in cells {
                    reports.push(c?);
                }
            }
        }
    }
    let mut canonical = String::new();
    for ds in &exp.datasets {
        canonical.push_str(&config.dataset(ds).expect("validated").canonical);
    }
    canonical.push_str(&config.features.canonical);
    canonical.push_str(&config.model.canonical);
    canonical.push_str(&format!("{exp:?}{}", config.seed));
    let stem = format!("experiment-{}", content_hash(&[canonical.as_bytes()]));
    let (report_json, _) = evaluation::write_reports(&reports, out.join("reports"), &stem)?;
    let table = evaluation::render_table(&reports);
    Ok(ExperimentOutput {
        reports,
        table,
        report_json,
    })
}
