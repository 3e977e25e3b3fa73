//! A boosted n-gram model is stored as the base model file followed by one
//! `factor <b> <distinguisher label>` line per reweighting step, in order.

use std::sync::Arc;

use super::{Factor, ReweightedModel};
use crate::distinguish::parse_step_distinguisher;
use crate::math::fmt_real;
use crate::models::{parse_ngram, parse_real, write_ngram, NGramModel, SequentialModel};
use crate::scalar::Real;
use crate::{Error, Result};

pub fn write_reweighted<T: Real>(base: &NGramModel<T>, factors: &[Factor<T>]) -> String {
    let mut out = write_ngram(base);
    for f in factors {
        out.push_str(&format!(
            "factor {} {}\n",
            fmt_real(f.weight),
            f.distinguisher.label()
        ));
    }
    out
}

/// Inverse of [`write_reweighted`]. A plain model file (no factor lines)
/// yields a model with an empty factor list.
pub fn parse_reweighted<T: Real>(text: &str) -> Result<(Arc<NGramModel<T>>, ReweightedModel<T>)> {
    let mut base_text = String::new();
    let mut factors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        match line.trim_start().strip_prefix("factor ") {
            Some(rest) => {
                let rest = rest.trim();
                let (b, label) = rest.split_once(char::is_whitespace).ok_or_else(|| {
                    Error::Parse(format!("line {}: factor needs a weight and a label", i + 1))
                })?;
                factors.push((parse_real::<T>(b)?, parse_step_distinguisher::<T>(label)?));
            }
            None => {
                base_text.push_str(line);
                base_text.push('\n');
            }
        }
    }
    let base = Arc::new(parse_ngram::<T>(&base_text)?);
    let mut model = ReweightedModel::new(base.clone() as Arc<dyn SequentialModel<T>>);
    for (b, g) in factors {
        model = model.reweighted(b, g)?;
    }
    Ok((base, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distinguish::{Flipped, NGramIndicator, TokenIndicator};
    use crate::models::{ngram_mle_fit, sequence_log_prob};
    use crate::{Corpus, Domain};

    #[test]
    fn round_trip() {
        let corpus = Corpus::from_ids(vec![vec![1, 2, 2], vec![2, 1, 1]]).unwrap();
        let base = Arc::new(ngram_mle_fit::<f64>(&corpus, 3, 2, 0.5).unwrap());
        let model = ReweightedModel::new(base.clone() as Arc<dyn SequentialModel<f64>>)
            .reweighted(0.125, Arc::new(TokenIndicator { token: 2 }))
            .unwrap()
            .reweighted(
                0.3,
                Arc::new(Flipped(NGramIndicator {
                    order: 2,
                    context: vec![1],
                    token: 1,
                })),
            )
            .unwrap();
        let text = write_reweighted(&base, model.factors());
        assert!(text.contains("factor 1.2500000000000000e-1 token-indicator 2\n"));
        assert!(text.contains("flip ngram-indicator 2 1 1\n"));
        let (_, back) = parse_reweighted::<f64>(&text).unwrap();
        assert_eq!(back.factors().len(), 2);
        for x in Domain::with_default_budget(3, 3).unwrap().iter() {
            let a = sequence_log_prob(&model, &x).to_real();
            let b = sequence_log_prob(&back, &x).to_real();
            assert!(a == b || (a - b).abs() < 1e-12, "{x:?}: {a} vs {b}");
        }
    }

    #[test]
    fn rejects_unknown_factor() {
        let base =
            ngram_mle_fit::<f64>(&Corpus::from_ids(vec![vec![1]]).unwrap(), 2, 1, 1.0).unwrap();
        let text = format!("{}factor 0.5 mystery\n", write_ngram(&base));
        assert!(parse_reweighted::<f64>(&text).is_err());
        let text = format!("{}factor 0.5\n", write_ngram(&base));
        assert!(parse_reweighted::<f64>(&text).is_err());
    }
}
