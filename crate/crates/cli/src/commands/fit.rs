use distboost::models::write_ngram;
use distboost::{log_loss, ngram_mle_fit};

use super::{resolver, write_output, CorpusSettings};
use crate::error::{runtime, CliError, CliResult};
use crate::{Common, CorpusArgs};

pub(crate) fn run(
    common: Common,
    corpus: CorpusArgs,
    order: Option<usize>,
    lambda: Option<f64>,
) -> CliResult<()> {
    let mut r = resolver(&common)?;
    let out = r.out_dir(common.out_dir.clone())?;
    let cs = CorpusSettings::resolve(&mut r, &corpus)?;
    let order = r.or(order, "order", 1)?;
    let lambda = r.or(lambda, "lambda", 0.0)?;
    r.finish()?;
    if order == 0 {
        return Err(CliError::Config("--order must be >= 1".into()));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(CliError::Config("--lambda must be finite and >= 0".into()));
    }
    let (corpus, vocab) = cs.load()?;

    let model = ngram_mle_fit(&corpus, vocab.len(), order, lambda).map_err(runtime("fit"))?;
    let loss = log_loss(&model, &corpus).map_err(runtime("log-loss"))?;
    let model_path = write_output(&out, "model.txt", &write_ngram(&model))?;
    let vocab_path = write_output(&out, "vocab.txt", &vocab.to_text())?;

    println!(
        "fit order-{order} model (λ = {lambda}) on {} sequences of length {} over {} tokens",
        corpus.len(),
        corpus.seq_len(),
        vocab.len()
    );
    println!(
        "log-loss: {:.6} nats ({:.6} bits) per sequence",
        loss.log_loss,
        loss.bits()
    );
    println!("wrote {}", model_path.display());
    println!("wrote {}", vocab_path.display());
    Ok(())
}
