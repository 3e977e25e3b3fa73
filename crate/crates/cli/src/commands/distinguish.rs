use std::fmt::Write as _;
use std::sync::Arc;

use distboost::distinguish::{
    ConstantDistinguisher, Flipped, NGramIndicator, SharedStep, TokenFrequency, TokenIndicator,
};
use distboost::models::BOS;
use distboost::{
    accuracy_from_advantage, generalized_advantage, training_advantage, Distinguisher, Estimator,
    NGramModel, SequentialModel, Vocabulary, DEFAULT_ENUMERATION_BUDGET,
};

use super::{csv_real, load_model, resolver, token_id, write_output, CorpusSettings};
use crate::error::{runtime, CliError, CliResult};
use crate::{Common, CorpusArgs};

pub(crate) struct DistinguishArgs {
    pub common: Common,
    pub corpus: CorpusArgs,
    pub model: Option<std::path::PathBuf>,
    pub distinguisher: Option<String>,
    pub estimator: Option<String>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub budget: Option<usize>,
}

pub(crate) enum Parsed {
    Step(SharedStep<f64>),
    Whole(Box<dyn Distinguisher<f64>>),
}

fn bad(spec: &str, why: &str) -> CliError {
    CliError::Config(format!("distinguisher {spec:?}: {why}"))
}

/// Context of an n-gram indicator as written on the command line:
/// comma-separated tokens, `^` for positions before the start, `-` for none.
fn parse_context(s: &str, vocab: &Vocabulary) -> CliResult<Vec<usize>> {
    if s == "-" {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| {
            if t == "^" {
                Ok(BOS)
            } else {
                token_id(vocab, t)
            }
        })
        .collect()
}

pub(crate) fn parse_distinguisher(spec: &str, vocab: &Vocabulary) -> CliResult<Parsed> {
    let words: Vec<&str> = spec.split_whitespace().collect();
    let flips = words.iter().take_while(|w| **w == "flip").count();
    let rest = &words[flips..];
    let flip = flips % 2 == 1;
    let step = |g: SharedStep<f64>| -> Parsed {
        if flip {
            Parsed::Step(Arc::new(Flipped(g)))
        } else {
            Parsed::Step(g)
        }
    };
    match rest {
        ["token-indicator", tok] => Ok(step(Arc::new(TokenIndicator { token: token_id(vocab, tok)? }))),
        ["ngram-indicator", k, ctx, tok] => {
            let order: usize = k.parse().map_err(|_| bad(spec, "order must be an integer"))?;
            if order == 0 {
                return Err(bad(spec, "order must be >= 1"));
            }
            let context = parse_context(ctx, vocab)?;
            let start_unigram = order == 1 && context == [BOS];
            if context.len() != order - 1 && !start_unigram {
                return Err(bad(spec, "context length must be order − 1 (or `^` alone for the start at order 1)"));
            }
            Ok(step(Arc::new(NGramIndicator { order, context, token: token_id(vocab, tok)? })))
        }
        ["constant", c] => {
            let c: f64 = c.parse().map_err(|_| bad(spec, "constant must be a number"))?;
            if !(0.0..=1.0).contains(&c) {
                return Err(bad(spec, "constant must lie in [0, 1]"));
            }
            Ok(step(Arc::new(ConstantDistinguisher::new(c))))
        }
        ["token-frequency", tok] => {
            let f = TokenFrequency { token: token_id(vocab, tok)? };
            Ok(Parsed::Whole(if flip { Box::new(Flipped(f)) } else { Box::new(f) }))
        }
        _ => Err(bad(
            spec,
            "expected [flip ...] token-indicator <tok> | ngram-indicator <k> <ctx> <tok> | constant <c> | token-frequency <tok>",
        )),
    }
}

pub(crate) fn run(a: DistinguishArgs) -> CliResult<()> {
    let mut r = resolver(&a.common)?;
    let out = r.out_dir(a.common.out_dir.clone())?;
    let cs = CorpusSettings::resolve(&mut r, &a.corpus)?;
    let model_path = r.opt(a.model, "model")?;
    let spec: String = r.required(a.distinguisher, "distinguisher")?;
    let estimator = r.or(a.estimator, "estimator", "exact".to_owned())?;
    let samples = r.opt(a.samples, "samples")?;
    let seed = r.opt(a.seed, "seed")?;
    let budget = r.or(a.budget, "budget", DEFAULT_ENUMERATION_BUDGET)?;
    r.finish()?;

    let (corpus, vocab) = cs.load()?;
    let model: Arc<dyn SequentialModel<f64>> = match &model_path {
        Some(p) => {
            let (_, m) = load_model(p)?;
            if m.vocab_size() != vocab.len() || m.seq_len() != corpus.seq_len() {
                return Err(CliError::Config(format!(
                    "model {} has n = {}, N = {}; corpus has n = {}, N = {}",
                    p.display(),
                    m.vocab_size(),
                    m.seq_len(),
                    vocab.len(),
                    corpus.seq_len()
                )));
            }
            Arc::new(m)
        }
        None => Arc::new(
            NGramModel::uniform(vocab.len(), corpus.seq_len(), 1)
                .map_err(runtime("uniform model"))?,
        ),
    };

    let mut csv = String::from("quantity,position,value\n");
    match parse_distinguisher(&spec, &vocab)? {
        Parsed::Step(g) => {
            if estimator != "exact" {
                return Err(CliError::Config(
                    "step-wise distinguishers are evaluated exactly; --estimator applies to token-frequency only".into(),
                ));
            }
            let est = generalized_advantage(g.as_ref(), &corpus, model.as_ref())
                .map_err(runtime("advantage"))?;
            println!("distinguisher: {}", g.label());
            println!("generalized advantage β̂ = {:.6}", est.value);
            for (j, v) in est.per_position.iter().enumerate() {
                println!("  position {}: {:.6}", j + 1, v);
                let _ = writeln!(csv, "beta,{},{}", j + 1, csv_real(*v));
            }
            let _ = writeln!(csv, "beta,all,{}", csv_real(est.value));
        }
        Parsed::Whole(f) => {
            let est = match estimator.as_str() {
                "exact" => Estimator::Exact { budget },
                "monte-carlo" | "mc" => {
                    let seed = seed.ok_or_else(|| {
                        CliError::Config("--seed is required for monte-carlo".into())
                    })?;
                    let samples = samples.ok_or_else(|| {
                        CliError::Config("--samples is required for monte-carlo".into())
                    })?;
                    Estimator::MonteCarlo { samples, seed }
                }
                other => return Err(CliError::Config(format!("unknown estimator {other:?}"))),
            };
            let est = training_advantage(f.as_ref(), &corpus, model.as_ref(), est)
                .map_err(runtime("advantage"))?;
            let acc = accuracy_from_advantage(est.value).map_err(runtime("accuracy"))?;
            println!("distinguisher: {}", f.label());
            println!("training advantage α̂ = {:.6} ({:?})", est.value, est.kind);
            println!("classifier accuracy 1/2 + α̂/2 = {acc:.6}");
            let _ = writeln!(csv, "alpha,all,{}", csv_real(est.value));
            let _ = writeln!(csv, "accuracy,all,{}", csv_real(acc));
        }
    }
    let path = write_output(&out, "distinguish.csv", &csv)?;
    println!("wrote {}", path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::from_tokens("<pad>", ["a", "b"]).unwrap()
    }

    fn step(spec: &str) -> SharedStep<f64> {
        match parse_distinguisher(spec, &vocab()).unwrap() {
            Parsed::Step(g) => g,
            Parsed::Whole(_) => panic!("{spec} parsed as whole-sequence"),
        }
    }

    #[test]
    fn parses_step_kinds_with_token_names() {
        assert_eq!(step("token-indicator b").label(), "token-indicator 2");
        assert_eq!(
            step("flip token-indicator #1").label(),
            "flip token-indicator 1"
        );
        assert_eq!(
            step("flip flip token-indicator a").label(),
            "token-indicator 1"
        );
        let g = step("ngram-indicator 2 ^ a");
        assert_eq!(g.evaluate(&[1]), 1.0);
        assert_eq!(g.evaluate(&[2, 1]), 0.0);
        assert_eq!(step("ngram-indicator 3 a,b b").evaluate(&[1, 2, 2]), 1.0);
        assert_eq!(step("ngram-indicator 1 ^ b").evaluate(&[2]), 1.0);
        assert_eq!(step("constant 0.25").evaluate(&[1]), 0.25);
    }

    #[test]
    fn parses_whole_sequence_frequency() {
        match parse_distinguisher("flip token-frequency a", &vocab()).unwrap() {
            Parsed::Whole(f) => assert_eq!(f.evaluate(&[1, 2]).unwrap(), 0.5),
            Parsed::Step(_) => panic!("expected whole-sequence distinguisher"),
        }
    }

    #[test]
    fn rejects_malformed_specs() {
        for spec in [
            "token-indicator z",
            "token-indicator",
            "ngram-indicator 0 - a",
            "ngram-indicator 3 a b",
            "constant 2",
            "oracle",
            "",
        ] {
            assert!(parse_distinguisher(spec, &vocab()).is_err(), "{spec:?}");
        }
    }
}
