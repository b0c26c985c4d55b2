//! Command-line front end. Each subcommand wraps one pipeline stage;
//! `experiment` runs a whole grid from a config file.

pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::evaluation::RunInfo;
use config::{ConfigFile, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "sentistack", version, about = "Lexicon-informed stacking classifiers for text severity labels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Run configuration (`key = value` lines under `[section]` headers)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice; overrides the config's `seed`
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output root holding corpus/, features/, models/ and reports/
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load, deduplicate and split the configured datasets
    Prepare {
        #[command(flatten)]
        common: Common,
        /// Only this `[dataset.NAME]` (default: all)
        #[arg(long)]
        dataset: Option<String>,
    },
    /// Score each document of a corpus file with the lexicon
    Sentiment {
        #[command(flatten)]
        common: Common,
        /// Corpus JSON Lines file
        #[arg(long)]
        input: PathBuf,
        /// Lexicon file (`term<TAB>score` lines)
        #[arg(long, env = "SENTISTACK_LEXICON")]
        lexicon: Option<PathBuf>,
    },
    /// Build train/eval feature matrices for a prepared corpus directory
    Featurize {
        #[command(flatten)]
        common: Common,
        /// Prepared corpus directory (train.jsonl, eval.jsonl, labels.txt)
        #[arg(long)]
        input: PathBuf,
        /// Embedding table (JSON Lines) for the embeddings pipeline
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Lexicon file; used when sentiment features are enabled
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Train one learner, or the stack, on a feature matrix
    Train {
        #[command(flatten)]
        common: Common,
        /// Feature matrix (JSON Lines)
        #[arg(long)]
        input: PathBuf,
        /// Corpus file supplying the gold labels, joined by id
        #[arg(long)]
        labels: PathBuf,
        /// lr, gbm, adaboost, mlp, nb, svm or stack (default: the config's `learner`, else lr)
        #[arg(long)]
        learner: Option<String>,
    },
    /// Write class probabilities and labels for a feature matrix
    Predict {
        #[command(flatten)]
        common: Common,
        /// Model file written by `train`
        #[arg(long)]
        model: PathBuf,
        /// Feature matrix (JSON Lines)
        #[arg(long)]
        input: PathBuf,
    },
    /// Score a predictions file against gold labels
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Predictions file written by `predict`
        #[arg(long)]
        input: PathBuf,
        /// Corpus file with the gold labels
        #[arg(long)]
        labels: PathBuf,
        /// Dataset name for the report (default: the corpus directory)
        #[arg(long)]
        dataset: Option<String>,
        /// Model name for the report (default: the predictions file name)
        #[arg(long)]
        name: Option<String>,
    },
    /// Run the `[experiment]` grid and print the combined table
    Experiment {
        #[command(flatten)]
        common: Common,
    },
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::from_file(&ConfigFile::default(), Path::new("."))?,
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok(config)
    }

    fn out(&self, config: &RunConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| config.out.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    fn require_config(&self) -> Result<()> {
        match &self.config {
            Some(_) => Ok(()),
            None => Err(Error::Config("this command needs --config".into())),
        }
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_string()
}

/// Execute a parsed command; returns the text to print on success.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Prepare { common, dataset } => {
            common.require_config()?;
            let config = common.load()?;
            let out = common.out(&config);
            let selected: Vec<_> = match &dataset {
                Some(name) => vec![config
                    .dataset(name)
                    .ok_or_else(|| Error::Config(format!("no [dataset.{name}] section")))?],
                None => config.datasets.iter().collect(),
            };
            if selected.is_empty() {
                return Err(Error::Config("no [dataset.NAME] sections".into()));
            }
            let mut lines = Vec::new();
            for ds in selected {
                let p = commands::prepare_dataset(ds, config.seed, &out)?;
                lines.push(format!(
                    "{}\t{}\ttrain={}\teval={}",
                    p.name,
                    p.dir.display(),
                    p.train.len(),
                    p.eval.len()
                ));
            }
            Ok(lines.join("\n"))
        }
        Command::Sentiment { common, input, lexicon } => {
            let config = common.load()?;
            let lexicon = commands::resolve_lexicon(lexicon.as_deref(), &config);
            let path = commands::write_sentiment(&input, &lexicon, &common.out(&config))?;
            Ok(path.display().to_string())
        }
        Command::Featurize {
            common,
            input,
            embeddings,
            lexicon,
        } => {
            let config = common.load()?;
            let f = &config.features;
            let embeddings = embeddings.or_else(|| f.embeddings.clone());
            let lexicon = if f.sentiment || lexicon.is_some() {
                Some(commands::resolve_lexicon(lexicon.as_deref(), &config))
            } else {
                None
            };
            let dir = commands::write_features(
                &input,
                f.pipeline,
                f.min_df,
                embeddings.as_deref(),
                lexicon.as_deref(),
                &f.canonical,
                &common.out(&config),
            )?;
            Ok(dir.display().to_string())
        }
        Command::Train {
            common,
            input,
            labels,
            learner,
        } => {
            let config = common.load()?;
            let selector = learner
                .or_else(|| config.model.learner.clone())
                .unwrap_or_else(|| "lr".into());
            let o = commands::train_command(&config, &selector, &input, &labels, &common.out(&config))?;
            Ok(format!(
                "{}\n{}\n{}",
                o.model_path.display(),
                o.report_json.display(),
                o.report_text.display()
            ))
        }
        Command::Predict { common, model, input } => {
            let config = common.load()?;
            let path = commands::predict_command(&model, &input, &common.out(&config))?;
            Ok(path.display().to_string())
        }
        Command::Evaluate {
            common,
            input,
            labels,
            dataset,
            name,
        } => {
            let config = common.load()?;
            let run = RunInfo {
                dataset: dataset.unwrap_or_else(|| {
                    labels
                        .parent()
                        .map(stem)
                        .unwrap_or_default()
                }),
                features: String::new(),
                model: name.unwrap_or_else(|| stem(&input)),
                seed: config.seed,
            };
            let report = commands::evaluate_command(&input, &labels, run, &common.out(&config))?;
            Ok(crate::evaluation::render_table(&[report]).trim_end().to_string())
        }
        Command::Experiment { common } => {
            common.require_config()?;
            let config = common.load()?;
            let o = commands::experiment_command(&config, &common.out(&config))?;
            Ok(format!("{}\n{}", o.table.trim_end(), o.report_json.display()))
        }
    }
}

/// Parse arguments, run, and print either the output or a single
/// `ERR <CODE> <detail>` line. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let detail = e.to_string();
            let first = detail
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("ERR E_USAGE {first}");
            return 2;
        }
    };
    match run(cli) {
        Ok(text) => {
            if !text.is_empty() {
                println!("{text}");
            }
            0
        }
        Err(e) => {
            eprintln!("{}", error_line(&e));
            1
        }
    }
}

/// `ERR <CODE> <detail>` on one line.
pub fn error_line(e: &Error) -> String {
    let detail = e.to_string().replace(['\n', '\r'], " ");
    format!("ERR {} {detail}", e.code())
}

