mod age;
mod boost;
mod distinguish;
mod eval;
mod fit;
mod oracle_check;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use distboost::boost::{parse_reweighted, ReweightedModel};
use distboost::math::fmt_real;
use distboost::{parse_corpus, Corpus, NGramModel, Vocabulary};

use crate::config::{ConfigFile, Resolver};
use crate::error::{input, runtime, CliError, CliResult};
use crate::{Command, Common, CorpusArgs};

pub use age::{age_experiment, default_age_distribution, parse_age_file, AgeReport, AGES};
pub use oracle_check::oracle_check_csv;

pub const DEFAULT_PAD: &str = "<pad>";

pub fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Fit {
            common,
            corpus,
            order,
            lambda,
        } => fit::run(common, corpus, order, lambda),
        Command::Boost {
            common,
            corpus,
            init,
            order,
            lambda,
            oracle,
            epsilon,
            max_iters,
            no_memo,
            timings,
        } => boost::run(boost::BoostArgs {
            common,
            corpus,
            init,
            order,
            lambda,
            oracle,
            epsilon,
            max_iters,
            no_memo,
            timings,
        }),
        Command::Distinguish {
            common,
            corpus,
            model,
            distinguisher,
            estimator,
            samples,
            seed,
            budget,
        } => distinguish::run(distinguish::DistinguishArgs {
            common,
            corpus,
            model,
            distinguisher,
            estimator,
            samples,
            seed,
            budget,
        }),
        Command::Eval {
            common,
            corpus,
            model,
            table,
            budget,
        } => eval::run(common, corpus, model, table, budget),
        Command::AgeExperiment {
            common,
            ages,
            samples,
            seed,
        } => age::run(common, ages, samples, seed),
        Command::OracleCheck {
            common,
            seed,
            inject_fault,
        } => oracle_check::run(common, seed, inject_fault),
    }
}

pub(crate) fn resolver(common: &Common) -> CliResult<Resolver> {
    let file = match &common.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    Ok(Resolver::new(file))
}

pub(crate) struct CorpusSettings {
    path: Option<PathBuf>,
    len: Option<usize>,
    pad: String,
    vocab: Option<PathBuf>,
}

impl CorpusSettings {
    pub(crate) fn resolve(r: &mut Resolver, a: &CorpusArgs) -> CliResult<Self> {
        Ok(CorpusSettings {
            path: r.opt(a.corpus.clone(), "corpus")?,
            len: r.opt(a.len, "len")?,
            pad: r.or(a.pad.clone(), "pad", DEFAULT_PAD.to_owned())?,
            vocab: r.opt(a.vocab.clone(), "vocab")?,
        })
    }

    pub(crate) fn has_corpus(&self) -> bool {
        self.path.is_some()
    }

    pub(crate) fn load_vocab(&self) -> CliResult<Option<Vocabulary>> {
        self.vocab
            .as_ref()
            .map(|p| Vocabulary::load(p).map_err(input(&format!("vocabulary {}", p.display()))))
            .transpose()
    }

    /// Reads and validates the corpus. `N` defaults to the longest line.
    pub(crate) fn load(&self) -> CliResult<(Corpus, Vocabulary)> {
        let path = self
            .path
            .as_ref()
            .ok_or_else(|| CliError::Config("missing required setting --corpus".into()))?;
        let text =
            fs::read_to_string(path).map_err(input(&format!("corpus {}", path.display())))?;
        let len = match self.len {
            Some(l) => l,
            None => text
                .lines()
                .map(|l| l.split_whitespace().count())
                .max()
                .unwrap_or(0)
                .max(1),
        };
        let vocab = self.load_vocab()?;
        if let Some(v) = &vocab {
            if v.pad_token() != self.pad {
                return Err(CliError::Config(format!(
                    "vocabulary pad token {:?} differs from --pad {:?}",
                    v.pad_token(),
                    self.pad
                )));
            }
        }
        parse_corpus(&text, vocab, &self.pad, len)
            .map_err(input(&format!("corpus {}", path.display())))
    }
}

pub(crate) fn write_output(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(runtime(&format!("cannot create {}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(runtime(&format!("cannot write {}", path.display())))?;
    Ok(path)
}

/// A model file: an n-gram base plus any reweighting factors.
pub(crate) fn load_model(path: &Path) -> CliResult<(Arc<NGramModel<f64>>, ReweightedModel<f64>)> {
    let text = fs::read_to_string(path).map_err(input(&format!("model {}", path.display())))?;
    parse_reweighted::<f64>(&text).map_err(input(&format!("model {}", path.display())))
}

pub(crate) fn csv_real(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_owned()
    } else {
        fmt_real(x)
    }
}

/// Looks a token up by name, or by id when written as `#<id>`.
pub(crate) fn token_id(vocab: &Vocabulary, tok: &str) -> CliResult<usize> {
    if let Some(id) = tok.strip_prefix('#') {
        let id: usize = id
            .parse()
            .map_err(|_| CliError::Config(format!("bad token id {tok:?}")))?;
        if id < vocab.len() {
            return Ok(id);
        }
    }
    vocab
        .id(tok)
        .ok_or_else(|| CliError::Config(format!("token {tok:?} not in vocabulary")))
}
