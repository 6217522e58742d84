//! `autodiscern` command-line interface.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use autodiscern::Criterion;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "autodiscern", version, about = "Quality criteria for online health articles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for every random stage.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Hea,
    He,
    Rf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmbeddingsArg {
    Hash,
    Archive(PathBuf),
}

fn parse_embeddings(s: &str) -> Result<EmbeddingsArg, String> {
    match s {
        "hash" => Ok(EmbeddingsArg::Hash),
        _ => match s.strip_prefix("archive:") {
            Some(path) if !path.is_empty() => Ok(EmbeddingsArg::Archive(PathBuf::from(path))),
            _ => Err("expected `hash` or `archive:<path>`".into()),
        },
    }
}

/// Criteria selected by `--criterion`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Criteria(pub Vec<Criterion>);

fn parse_criteria(s: &str) -> Result<Criteria, String> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(Criteria(Criterion::ALL.to_vec()));
    }
    s.split(',').map(|c| c.parse::<Criterion>().map_err(|e| e.to_string())).collect::<Result<_, _>>().map(Criteria)
}

fn parse_level(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|e| format!("{s:?}: {e}"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("coverage level {v} outside (0, 1]"))
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// q4, q5, q9, q10, q11, a comma list, or all.
    #[arg(long, default_value = "all", value_parser = parse_criteria)]
    pub criterion: Criteria,
    /// `hash` or `archive:<path>`.
    #[arg(long, default_value = "hash", value_parser = parse_embeddings)]
    pub embeddings: EmbeddingsArg,
    #[arg(long, value_enum, default_value = "hea")]
    pub model: ModelKind,
}

impl ModelArgs {
    pub fn criteria(&self) -> &[Criterion] {
        &self.criterion.0
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic corpus directory with one planted date sentence per passing q5 article.
    Synth {
        /// Number of articles.
        #[arg(long, default_value_t = 200)]
        docs: usize,
        /// Sentences per article.
        #[arg(long, default_value_t = 20)]
        sentences: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Extract, segment and label a corpus directory into corpus.json.
    Ingest {
        corpus_dir: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Random hyperparameter search on a validation split.
    Tune {
        corpus: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Train one model per criterion on the whole corpus.
    Train {
        corpus: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Stratified cross-validation with mean (std) F1-macro tables.
    Evaluate {
        corpus: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Predict every document with trained models.
    Predict {
        corpus: PathBuf,
        /// Directory written by `train`.
        models: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Selective-prediction metrics from a prediction dump.
    Coverage {
        predictions: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Comma-separated coverage levels in (0, 1].
        #[arg(long, value_delimiter = ',', value_parser = parse_level)]
        coverage: Option<Vec<f64>>,
    },
    /// Most attended sentences of the most confidently passing documents.
    Evidence {
        corpus: PathBuf,
        /// Directory written by `train`.
        models: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        /// Sentences per document.
        #[arg(long)]
        k: Option<usize>,
    },
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth { docs, sentences, common } => commands::synth(docs, sentences, &common),
        Command::Ingest { corpus_dir, common } => commands::ingest(&corpus_dir, &common),
        Command::Tune { corpus, common, model } => commands::tune(&corpus, &common, &model),
        Command::Train { corpus, common, model } => commands::train(&corpus, &common, &model),
        Command::Evaluate { corpus, common, model } => commands::evaluate(&corpus, &common, &model),
        Command::Predict { corpus, models, common, model } => commands::predict(&corpus, &models, &common, &model),
        Command::Coverage { predictions, common, coverage } => commands::coverage(&predictions, &common, coverage),
        Command::Evidence { corpus, models, common, model, k } => {
            commands::evidence(&corpus, &models, &common, &model, k)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criteria_lists() {
        assert_eq!(parse_criteria("all").unwrap().0.len(), 5);
        assert_eq!(parse_criteria("q5,Q10").unwrap().0, vec![Criterion::Q5, Criterion::Q10]);
        assert!(parse_criteria("q6").is_err());
    }

    #[test]
    fn embeddings_flag() {
        assert_eq!(parse_embeddings("hash").unwrap(), EmbeddingsArg::Hash);
        assert_eq!(parse_embeddings("archive:/a/b").unwrap(), EmbeddingsArg::Archive("/a/b".into()));
        assert!(parse_embeddings("archive:").is_err());
        assert!(parse_embeddings("bert").is_err());
    }

    #[test]
    fn coverage_levels() {
        assert_eq!(parse_level(" 0.8").unwrap(), 0.8);
        assert!(parse_level("0").is_err());
        assert!(parse_level("1.5").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
