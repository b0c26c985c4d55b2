//! Plain-text run configuration: `key = value` lines grouped under
//! `[section]` headers. `#` and `;` start comment lines. Keys before the
//! first header belong to the unnamed top-level section.
//!
//! ```text
//! seed = 7
//! out = runs
//!
//! [dataset.d2]
//! train = data/d2/posts.csv
//! id = id
//! text = text
//! label = label
//! scheme = d2
//! split = 0.7
//!
//! [features]
//! pipeline = tfidf
//! sentiment = true
//!
//! [model]
//! learner = stack
//! stack.bases = lr, gbm, adaboost, mlp
//! gbm.n_iters = 50
//!
//! [experiment]
//! datasets = d2
//! pipelines = tfidf
//! learners = lr, nb, svm, gbm
//! sentiment = false, true
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::corpus::{ColumnMapping, LabelScheme};
use crate::error::{Error, Result};
use crate::learners::{LearnerKind, LearnerSpec};
use crate::stacking::StackingConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub name: String,
    pub entries: Vec<(String, String)>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Canonical text of the section: header plus sorted `key=value` lines.
    pub fn canonical(&self) -> String {
        let mut lines: Vec<String> = self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        lines.sort();
        format!("[{}]\n{}", self.name, lines.concat())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    pub sections: Vec<Section>,
}

impl ConfigFile {
    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.section(section).and_then(|s| s.get(key))
    }
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let mut sections = vec![Section {
        name: String::new(),
        entries: Vec::new(),
    }];
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = i + 1;
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .map(str::trim)
                .filter(|n| !n.is_empty())
                .ok_or_else(|| Error::Config(format!("line {lineno}: malformed section header `{line}`")))?;
            if sections.iter().any(|s| s.name == name) {
                return Err(Error::Config(format!("line {lineno}: duplicate section [{name}]")));
            }
            sections.push(Section {
                name: name.to_string(),
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {lineno}: expected `key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(Error::Config(format!("line {lineno}: empty key")));
        }
        let section = sections.last_mut().unwrap();
        if section.get(key).is_some() {
            return Err(Error::Config(format!("line {lineno}: duplicate key `{key}`")));
        }
        section.entries.push((key.to_string(), value.to_string()));
    }
    Ok(ConfigFile { sections })
}

/// Short hex digest naming artifacts after the inputs that produced them.
pub fn content_hash(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())[..12].to_string()
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}` expects a boolean, got `{value}`"))),
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}` expects a number, got `{value}`")))
}

fn check_keys(section: &Section, allowed: &[&str]) -> Result<()> {
    for (k, _) in &section.entries {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::Config(format!("unknown key `{k}` in [{}]", section.name)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    Tfidf,
    Embeddings,
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tfidf" | "tf-idf" => Ok(Pipeline::Tfidf),
            "embeddings" | "embedding" => Ok(Pipeline::Embeddings),
            other => Err(Error::Config(format!("unknown feature pipeline `{other}`"))),
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pipeline::Tfidf => "tfidf",
            Pipeline::Embeddings => "embeddings",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub name: String,
    pub train: PathBuf,
    /// Separate evaluation file; without one the train file is split.
    pub eval: Option<PathBuf>,
    pub delimiter: u8,
    pub mapping: ColumnMapping,
    pub scheme: LabelScheme,
    pub split: f64,
    pub dedup: bool,
    pub embeddings: Option<PathBuf>,
    pub canonical: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub pipeline: Pipeline,
    pub min_df: usize,
    pub sentiment: bool,
    pub embeddings: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub canonical: String,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            pipeline: Pipeline::Tfidf,
            min_df: 1,
            sentiment: false,
            embeddings: None,
            lexicon: None,
            canonical: "[features]\n".into(),
        }
    }
}

/// A single learner or a stacked ensemble.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelChoice {
    Single(LearnerSpec),
    Stack(StackingConfig),
}

impl ModelChoice {
    pub fn name(&self) -> String {
        match self {
            ModelChoice::Single(s) => s.kind().to_string(),
            ModelChoice::Stack(_) => "stack".into(),
        }
    }
}

/// `[model]` section: the selected learner and per-learner overrides
/// written as `<learner>.<field> = value`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelConfig {
    pub learner: Option<String>,
    pub overrides: Vec<(String, String)>,
    pub canonical: String,
}

impl ModelConfig {
    pub fn spec(&self, kind: LearnerKind) -> Result<LearnerSpec> {
        let mut value = serde_json::to_value(LearnerSpec::default_for(kind))?;
        let fields = value.as_object_mut().expect("learner specs serialize as objects");
        let prefix = format!("{}.", kind.short_name());
        for (key, raw) in &self.overrides {
            let Some(field) = key.strip_prefix(&prefix) else {
                continue;
            };
            let slot = fields
                .get_mut(field)
                .filter(|_| field != "kind")
                .ok_or_else(|| Error::Config(format!("unknown hyperparameter `{key}`")))?;
            *slot = match slot {
                Value::Array(_) => Value::Array(
                    list(raw)
                        .iter()
                        .map(|v| serde_json::from_str(v))
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::Config(format!("`{key}` expects a list of numbers")))?,
                ),
                _ => serde_json::from_str(raw)
                    .map_err(|_| Error::Config(format!("`{key}` has an invalid value `{raw}`")))?,
            };
        }
        serde_json::from_value(value).map_err(|e| Error::Config(format!("{kind} hyperparameters: {e}")))
    }

    /// Resolve a selector (`lr`, `gbm`, …, or `stack`) to a trainable model.
    pub fn choice(&self, selector: &str, seed: u64) -> Result<ModelChoice> {
        if selector.trim().eq_ignore_ascii_case("stack") {
            let get = |k: &str| self.overrides.iter().find(|(key, _)| key == k).map(|(_, v)| v.as_str());
            let mut config = StackingConfig {
                seed,
                ..Default::default()
            };
            if let Some(bases) = get("stack.bases") {
                config.bases = list(bases)
                    .iter()
                    .map(|b| self.spec(b.parse()?))
                    .collect::<Result<_>>()?;
            } else {
                config.bases = config
                    .bases
                    .iter()
                    .map(|b| self.spec(b.kind()))
                    .collect::<Result<_>>()?;
            }
            config.meta = self.spec(get("stack.meta").unwrap_or("lr").parse()?)?;
            if let Some(k) = get("stack.folds") {
                config.folds = parse_num("stack.folds", k)?;
            }
            config.validate()?;
            Ok(ModelChoice::Stack(config))
        } else {
            Ok(ModelChoice::Single(self.spec(selector.parse()?)?))
        }
    }

    fn validate(&self) -> Result<()> {
        for (key, _) in &self.overrides {
            let (prefix, _) = key
                .split_once('.')
                .ok_or_else(|| Error::Config(format!("unknown key `{key}` in [model]")))?;
            if prefix == "stack" {
                if !["stack.bases", "stack.meta", "stack.folds"].contains(&key.as_str()) {
                    return Err(Error::Config(format!("unknown key `{key}` in [model]")));
                }
            } else {
                self.spec(prefix.parse()?)?;
            }
        }
        if let Some(l) = &self.learner {
            self.choice(l, 0)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub datasets: Vec<String>,
    pub pipelines: Vec<Pipeline>,
    pub learners: Vec<String>,
    pub sentiment: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub datasets: Vec<DatasetConfig>,
    pub features: FeatureConfig,
    pub model: ModelConfig,
    pub experiment: Option<ExperimentConfig>,
}

fn resolve(base: &Path, value: &str) -> PathBuf {
    let p = PathBuf::from(value);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

fn require_file(key: &str, path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("`{key}` points at missing file {}", path.display())))
    }
}

impl RunConfig {
    /// Read, parse and validate a config file. Relative paths are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::from_file(&parse_config(&text)?, base)
    }

    pub fn from_file(file: &ConfigFile, base: &Path) -> Result<RunConfig> {
        let mut config = RunConfig {
            seed: 0,
            out: None,
            datasets: Vec::new(),
            features: FeatureConfig::default(),
            model: ModelConfig {
                canonical: "[model]\n".into(),
                ..Default::default()
            },
            experiment: None,
        };
        for section in &file.sections {
            match section.name.as_str() {
                "" => {
                    check_keys(section, &["seed", "out"])?;
                    if let Some(s) = section.get("seed") {
                        config.seed = parse_num("seed", s)?;
                    }
                    config.out = section.get("out").map(|o| resolve(base, o));
                }
                "features" => config.features = parse_features(section, base)?,
                "model" => {
                    let model = ModelConfig {
                        learner: section.get("learner").map(str::to_string),
                        overrides: section
                            .entries
                            .iter()
                            .filter(|(k, _)| k != "learner")
                            .cloned()
                            .collect(),
                        canonical: section.canonical(),
                    };
                    model.validate()?;
                    config.model = model;
                }
                "experiment" => config.experiment = Some(parse_experiment(section)?),
                name => match name.strip_prefix("dataset.") {
                    Some(ds) if !ds.is_empty() => config.datasets.push(parse_dataset(ds, section, base)?),
                    _ => return Err(Error::Config(format!("unknown section [{name}]"))),
                },
            }
        }
        if let Some(exp) = &config.experiment {
            for d in &exp.datasets {
                if config.dataset(d).is_none() {
                    return Err(Error::Config(format!("experiment names undefined dataset `{d}`")));
                }
            }
            for l in &exp.learners {
                config.model.choice(l, config.seed)?;
            }
            // the sentiment block's magnitude is signed; NB needs nonnegative input
            let nb = |l: &String| l.parse::<LearnerKind>().ok() == Some(LearnerKind::NaiveBayes);
            if exp.sentiment.contains(&true) && exp.learners.iter().any(nb) {
                return Err(Error::Config(
                    "nb cannot use sentiment features (signed magnitude); drop one from the grid".into(),
                ));
            }
            if exp.pipelines.contains(&Pipeline::Embeddings) && exp.learners.iter().any(nb) {
                return Err(Error::Config(
                    "nb needs nonnegative features; use it with the tfidf pipeline only".into(),
                ));
            }
            if exp.pipelines.contains(&Pipeline::Embeddings) {
                for d in &exp.datasets {
                    config.embeddings_for(d)?;
                }
            }
        }
        Ok(config)
    }

    pub fn dataset(&self, name: &str) -> Option<&DatasetConfig> {
        self.datasets.iter().find(|d| d.name == name)
    }

    /// Embedding table for a dataset: its own, else the `[features]` one.
    pub fn embeddings_for(&self, dataset: &str) -> Result<PathBuf> {
        self.dataset(dataset)
            .and_then(|d| d.embeddings.clone())
            .or_else(|| self.features.embeddings.clone())
            .ok_or_else(|| Error::Config(format!("no embedding table configured for `{dataset}`")))
    }
}

fn parse_dataset(name: &str, section: &Section, base: &Path) -> Result<DatasetConfig> {
    check_keys(
        section,
        &[
            "train", "eval", "delimiter", "id", "text", "label", "scheme", "split", "dedup", "embeddings",
        ],
    )?;
    let key = |k: &str| format!("dataset.{name}.{k}");
    let train = resolve(
        base,
        section
            .get("train")
            .ok_or_else(|| Error::Config(format!("[dataset.{name}] needs `train`")))?,
    );
    require_file(&key("train"), &train)?;
    let eval = section.get("eval").map(|e| resolve(base, e));
    if let Some(e) = &eval {
        require_file(&key("eval"), e)?;
    }
    let embeddings = section.get("embeddings").map(|e| resolve(base, e));
    if let Some(e) = &embeddings {
        require_file(&key("embeddings"), e)?;
    }
    let delimiter = match section.get("delimiter").unwrap_or("comma") {
        "comma" | "," => b',',
        "tab" | "\\t" => b'\t',
        d if d.len() == 1 => d.as_bytes()[0],
        d => return Err(Error::Config(format!("`{}` must be one byte, comma or tab: `{d}`", key("delimiter")))),
    };
    let scheme = match section.get("scheme").unwrap_or(name) {
        "d1" => LabelScheme::d1(),
        "d2" => LabelScheme::d2(),
        names if names.contains(',') => LabelScheme::new(&list(names)).map_err(|e| Error::Config(e.to_string()))?,
        other => {
            return Err(Error::Config(format!(
                "`{}`: use d1, d2 or a comma-separated class list, got `{other}`",
                key("scheme")
            )))
        }
    };
    let split = match section.get("split") {
        Some(s) => parse_num(&key("split"), s)?,
        None => 0.7,
    };
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::Config(format!("`{}` must lie in (0, 1)", key("split"))));
    }
    Ok(DatasetConfig {
        name: name.to_string(),
        train,
        eval,
        delimiter,
        mapping: ColumnMapping::new(
            section.get("id").unwrap_or("id"),
            section.get("text").unwrap_or("text"),
            Some(section.get("label").unwrap_or("label")),
        ),
        scheme,
        split,
        dedup: section.get("dedup").map_or(Ok(true), |v| parse_bool(&key("dedup"), v))?,
        embeddings,
        canonical: section.canonical(),
    })
}

fn parse_features(section: &Section, base: &Path) -> Result<FeatureConfig> {
    check_keys(section, &["pipeline", "min_df", "sentiment", "embeddings", "lexicon"])?;
    let min_df = section.get("min_df").map_or(Ok(1), |v| parse_num("min_df", v))?;
    if min_df == 0 {
        return Err(Error::Config("`min_df` must be at least 1".into()));
    }
    let embeddings = section.get("embeddings").map(|e| resolve(base, e));
    if let Some(e) = &embeddings {
        require_file("embeddings", e)?;
    }
    let lexicon = section.get("lexicon").map(|e| resolve(base, e));
    if let Some(l) = &lexicon {
        require_file("lexicon", l)?;
    }
    Ok(FeatureConfig {
        pipeline: section.get("pipeline").unwrap_or("tfidf").parse()?,
        min_df,
        sentiment: section.get("sentiment").map_or(Ok(false), |v| parse_bool("sentiment", v))?,
        embeddings,
        lexicon,
        canonical: section.canonical(),
    })
}

fn parse_experiment(section: &Section) -> Result<ExperimentConfig> {
    check_keys(section, &["datasets", "pipelines", "learners", "sentiment"])?;
    let need = |k: &str| {
        let items = list(section.get(k).unwrap_or(""));
        if items.is_empty() {
            Err(Error::Config(format!("[experiment] needs a non-empty `{k}` list")))
        } else {
            Ok(items)
        }
    };
    Ok(ExperimentConfig {
        datasets: need("datasets")?,
        pipelines: match section.get("pipelines") {
            Some(p) => list(p).iter().map(|s| s.parse()).collect::<Result<_>>()?,
            None => vec![Pipeline::Tfidf],
        },
        learners: need("learners")?,
        sentiment: match section.get("sentiment") {
            Some(s) => list(s).iter().map(|v| parse_bool("sentiment", v)).collect::<Result<_>>()?,
            None => vec![false],
        },
    })
}
