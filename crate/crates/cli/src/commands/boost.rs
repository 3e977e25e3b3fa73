use std::path::Path;
use std::sync::Arc;

use distboost::boost::{
    write_reweighted, Factor, LogRatioOracle, NGramIndicatorOracle, Oracle, TokenIndicatorOracle,
};
use distboost::{
    ngram_mle_fit, run_boost, BoostConfig, Corpus, Error, NGramModel, SequentialModel, Termination,
};

use super::{load_model, resolver, write_output, CorpusSettings};
use crate::error::{runtime, CliError, CliResult};
use crate::{Common, CorpusArgs};

pub(crate) struct BoostArgs {
    pub common: Common,
    pub corpus: CorpusArgs,
    pub init: Option<String>,
    pub order: Option<usize>,
    pub lambda: Option<f64>,
    pub oracle: Option<String>,
    pub epsilon: Option<f64>,
    pub max_iters: Option<usize>,
    pub no_memo: bool,
    pub timings: bool,
}

pub const DEFAULT_EPSILON: f64 = 0.01;

/// Parses `token-indicator`, `ngram-indicator <k>` or `log-ratio(<path>)`.
fn build_oracle(spec: &str, corpus: &Corpus, vocab_size: usize) -> CliResult<Box<dyn Oracle<f64>>> {
    let spec = spec.trim();
    if spec == "token-indicator" {
        return Ok(Box::new(TokenIndicatorOracle::new()));
    }
    if let Some(k) = spec.strip_prefix("ngram-indicator") {
        let k: usize = k.trim().parse().map_err(|_| {
            CliError::Config(format!(
                "oracle {spec:?}: expected `ngram-indicator <order>`"
            ))
        })?;
        let o = NGramIndicatorOracle::new(k)
            .map_err(|e| CliError::Config(format!("oracle {spec:?}: {e}")))?;
        return Ok(Box::new(o));
    }
    if let Some(path) = spec
        .strip_prefix("log-ratio(")
        .and_then(|s| s.strip_suffix(')'))
    {
        let (_, reference) = load_model(Path::new(path.trim()))?;
        if reference.vocab_size() != vocab_size || reference.seq_len() != corpus.seq_len() {
            return Err(CliError::Config(format!(
                "log-ratio reference {path} has n = {}, N = {}; corpus needs n = {vocab_size}, N = {}",
                reference.vocab_size(),
                reference.seq_len(),
                corpus.seq_len()
            )));
        }
        return Ok(Box::new(LogRatioOracle::new(
            Arc::new(reference) as Arc<dyn SequentialModel<f64>>
        )));
    }
    Err(CliError::Config(format!(
        "unknown oracle {spec:?} (expected token-indicator, ngram-indicator <k>, or log-ratio(<path>))"
    )))
}

pub(crate) fn run(a: BoostArgs) -> CliResult<()> {
    let mut r = resolver(&a.common)?;
    let out = r.out_dir(a.common.out_dir.clone())?;
    let cs = CorpusSettings::resolve(&mut r, &a.corpus)?;
    let init = r.or(a.init, "init", "uniform".to_owned())?;
    let order = r.or(a.order, "order", 1)?;
    let lambda = r.or(a.lambda, "lambda", 0.0)?;
    let oracle_spec = r.or(a.oracle, "oracle", "token-indicator".to_owned())?;
    let epsilon = r.or(a.epsilon, "epsilon", DEFAULT_EPSILON)?;
    let max_iters = r.opt(a.max_iters, "max_iters")?;
    let no_memo = r.switch(a.no_memo, "no_memo")?;
    let timings = r.switch(a.timings, "timings")?;
    r.finish()?;

    if order == 0 {
        return Err(CliError::Config("--order must be >= 1".into()));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(CliError::Config(format!(
            "--epsilon must be finite and > 0 (got {epsilon})"
        )));
    }
    if max_iters == Some(0) {
        return Err(CliError::Config("--max-iters must be >= 1".into()));
    }
    let (corpus, vocab) = cs.load()?;
    let n = vocab.len();

    let (base, prior): (Arc<NGramModel<f64>>, Vec<Factor<f64>>) = match init.as_str() {
        "uniform" => (
            Arc::new(
                NGramModel::uniform(n, corpus.seq_len(), order)
                    .map_err(runtime("uniform model"))?,
            ),
            Vec::new(),
        ),
        "fit" => (
            Arc::new(ngram_mle_fit(&corpus, n, order, lambda).map_err(runtime("fit"))?),
            Vec::new(),
        ),
        path => {
            let (base, model) = load_model(Path::new(path))?;
            if base.vocab_size() != n || base.seq_len() != corpus.seq_len() {
                return Err(CliError::Config(format!(
                    "initial model {path} has n = {}, N = {}; corpus has n = {n}, N = {}",
                    base.vocab_size(),
                    base.seq_len(),
                    corpus.seq_len()
                )));
            }
            (base, model.factors().to_vec())
        }
    };
    let mut q0 = distboost::ReweightedModel::new(base.clone() as Arc<dyn SequentialModel<f64>>);
    for f in &prior {
        q0 = q0
            .reweighted(f.weight, f.distinguisher.clone())
            .map_err(runtime("initial model"))?;
    }
    let q0: Arc<dyn SequentialModel<f64>> = if prior.is_empty() {
        base.clone()
    } else {
        Arc::new(q0)
    };

    let mut oracle = build_oracle(&oracle_spec, &corpus, n)?;
    let config = BoostConfig {
        epsilon,
        max_iters,
        memoize: !no_memo,
        record_timings: timings,
    };

    let (model, trace) = match run_boost(q0, &corpus, oracle.as_mut(), &config) {
        Ok(v) => v,
        Err(Error::IterationCap { cap, trace }) => {
            let path = write_output(&out, "trace.csv", &trace.to_csv())?;
            println!("wrote partial trace {}", path.display());
            return Err(CliError::Runtime(format!(
                "iteration cap {cap} reached; last b_t = {:.6} ≥ ε = {epsilon}",
                trace.records.last().map_or(f64::NAN, |r| r.b_t)
            )));
        }
        Err(e) => return Err(CliError::Runtime(format!("boost: {e}"))),
    };

    let mut factors = prior;
    factors.extend(model.factors().iter().cloned());
    let trace_path = write_output(&out, "trace.csv", &trace.to_csv())?;
    let model_path = write_output(&out, "model.txt", &write_reweighted(&base, &factors))?;
    let vocab_path = write_output(&out, "vocab.txt", &vocab.to_text())?;

    let last = trace.records.last().expect("trace has at least one record");
    println!("oracle: {}", trace.oracle);
    println!(
        "initial log-loss {:.6} nats, ε = {epsilon}, N = {}, iteration bound {}",
        trace.initial_log_loss, trace.seq_len, trace.iteration_bound
    );
    println!(
        "{} reweighting step(s); final log-loss {:.6} nats",
        trace.reweightings(),
        trace.final_log_loss()
    );
    if trace.termination == Termination::BelowThreshold {
        println!(
            "stopped: best advantage {:.6} < ε ({})",
            last.b_t, last.distinguisher
        );
    }
    for p in [trace_path, model_path, vocab_path] {
        println!("wrote {}", p.display());
    }
    Ok(())
}
