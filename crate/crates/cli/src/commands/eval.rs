use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use distboost::{
    cross_entropy, entropy, enumerate_joint, kl_divergence, log_loss, total_variation, Divergence,
    Domain, Error, JointTable, SequentialModel, DEFAULT_ENUMERATION_BUDGET,
};

use super::{csv_real, load_model, resolver, write_output, CorpusSettings};
use crate::error::{input, runtime, CliError, CliResult};
use crate::{Common, CorpusArgs};

fn div(d: Divergence<f64>) -> f64 {
    d.to_real()
}

pub(crate) fn run(
    common: Common,
    corpus: CorpusArgs,
    model: Option<PathBuf>,
    table: Option<PathBuf>,
    budget: Option<usize>,
) -> CliResult<()> {
    let mut r = resolver(&common)?;
    let out = r.out_dir(common.out_dir.clone())?;
    let cs = CorpusSettings::resolve(&mut r, &corpus)?;
    let model_path: PathBuf = r.required(model, "model")?;
    let table_path: Option<PathBuf> = r.opt(table, "table")?;
    let budget = r.or(budget, "budget", DEFAULT_ENUMERATION_BUDGET)?;
    r.finish()?;

    let (_, q) = load_model(&model_path)?;
    let (n, len) = (q.vocab_size(), q.seq_len());
    let corpus = if cs.has_corpus() {
        Some(cs.load()?)
    } else {
        None
    };
    let vocab = match (&corpus, cs.load_vocab()?) {
        (Some((_, v)), _) => Some(v.clone()),
        (None, v) => v,
    };
    if let Some(v) = &vocab {
        if v.len() != n {
            return Err(CliError::Config(format!(
                "vocabulary has {} tokens; model has n = {n}",
                v.len()
            )));
        }
    }

    let q_table = enumerate_joint(&q, budget).map_err(runtime("enumerate model"))?;
    let p_table = match (&table_path, &corpus) {
        (Some(path), _) => {
            let vocab = vocab.as_ref().ok_or_else(|| {
                CliError::Config("--table needs --vocab or --corpus to resolve tokens".into())
            })?;
            let text =
                fs::read_to_string(path).map_err(input(&format!("table {}", path.display())))?;
            JointTable::from_csv(&text, vocab, len, budget)
                .map_err(input(&format!("table {}", path.display())))?
        }
        (None, Some((c, _))) => {
            if c.seq_len() != len {
                return Err(CliError::Config(format!(
                    "corpus has N = {}; model has N = {len}",
                    c.seq_len()
                )));
            }
            let domain = Domain::new(n, len, budget).map_err(runtime("domain"))?;
            JointTable::empirical(domain, c).map_err(runtime("empirical distribution"))?
        }
        (None, None) => return Err(CliError::Config("eval needs --table or --corpus".into())),
    };

    let kl = div(kl_divergence(&p_table, &q_table).map_err(runtime("KL"))?);
    let ce = div(cross_entropy(&p_table, &q_table).map_err(runtime("cross-entropy"))?);
    let tvd = total_variation(&p_table, &q_table).map_err(runtime("total variation"))?;
    let h = entropy(&p_table);

    let mut csv = String::from("metric,value\n");
    if let Some((c, _)) = &corpus {
        let loss = match log_loss(&q, c) {
            Ok(l) => l.log_loss,
            Err(Error::ImpossibleSequence { .. }) => f64::INFINITY,
            Err(e) => return Err(CliError::Runtime(format!("log-loss: {e}"))),
        };
        println!("log-loss on corpus: {loss:.6} nats");
        let _ = writeln!(csv, "log_loss,{}", csv_real(loss));
    }
    println!("cross-entropy H(p, q): {ce:.6}");
    println!("KL(p || q): {kl:.6}");
    println!("entropy H(p): {h:.6}");
    println!("total variation: {tvd:.6}");
    for (k, v) in [
        ("cross_entropy", ce),
        ("kl", kl),
        ("entropy", h),
        ("tvd", tvd),
    ] {
        let _ = writeln!(csv, "{k},{}", csv_real(v));
    }
    let path = write_output(&out, "eval.csv", &csv)?;
    println!("wrote {}", path.display());
    Ok(())
}
