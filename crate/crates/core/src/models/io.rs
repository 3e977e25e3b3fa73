//! Plain-text model files.
//!
//! ```text
//! distboost-model 1 ngram <order> <vocab size> <N>
//! lambda <λ>
//! ctx <context ids> <p_0> ... <p_{n-1}>
//! ```
//!
//! Context ids are comma-separated, `^` marks the start padding and `-` an
//! empty context. Reals use 17 significant digits.

use std::collections::BTreeMap;

use crate::math::fmt_real;
use crate::scalar::Real;
use crate::vocab::TokenId;
use crate::{Error, Result};

use super::ngram::{NGramModel, BOS};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "distboost-model";

pub fn write_ngram<T: Real>(model: &NGramModel<T>) -> String {
    use super::SequentialModel;
    let mut out = format!(
        "{MAGIC} {MODEL_FORMAT_VERSION} ngram {} {} {}\n",
        model.order(),
        model.vocab_size(),
        model.seq_len()
    );
    out.push_str(&format!("lambda {}\n", fmt_real(model.lambda())));
    for (ctx, lp) in model.contexts() {
        out.push_str("ctx ");
        out.push_str(&format_context(ctx));
        for &v in lp {
            out.push(' ');
            out.push_str(&fmt_real(v.exp()));
        }
        out.push('\n');
    }
    out
}

fn format_context(ctx: &[TokenId]) -> String {
    if ctx.is_empty() {
        return "-".into();
    }
    ctx.iter()
        .map(|&t| {
            if t == BOS {
                "^".to_owned()
            } else {
                t.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_context(s: &str) -> Result<Vec<TokenId>> {
    if s == "-" {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| {
            if t == "^" {
                Ok(BOS)
            } else {
                t.parse()
                    .map_err(|_| Error::Parse(format!("bad context id {t:?}")))
            }
        })
        .collect()
}

pub(crate) fn parse_real<T: Real>(s: &str) -> Result<T> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::Parse(format!("bad real {s:?}")))?;
    Ok(T::lit(v))
}

pub(crate) fn parse_usize(s: Option<&str>, what: &str) -> Result<usize> {
    s.ok_or_else(|| Error::Parse(format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what}")))
}

pub fn parse_ngram<T: Real>(text: &str) -> Result<NGramModel<T>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty model file".into()))?;
    let mut h = header.split_whitespace();
    if h.next() != Some(MAGIC) {
        return Err(Error::Parse("not a distboost model file".into()));
    }
    let version = parse_usize(h.next(), "format version")?;
    if version != MODEL_FORMAT_VERSION as usize {
        return Err(Error::Parse(format!(
            "unsupported model format version {version}"
        )));
    }
    if h.next() != Some("ngram") {
        return Err(Error::Parse("expected model kind ngram".into()));
    }
    let order = parse_usize(h.next(), "order")?;
    let n = parse_usize(h.next(), "vocab size")?;
    let seq_len = parse_usize(h.next(), "sequence length")?;

    let mut lambda = T::zero();
    let mut table = BTreeMap::new();
    for line in lines {
        let mut f = line.split_whitespace();
        match f.next() {
            Some("lambda") => {
                lambda = parse_real(f.next().ok_or_else(|| Error::Parse("missing λ".into()))?)?;
            }
            Some("ctx") => {
                let ctx = parse_context(
                    f.next()
                        .ok_or_else(|| Error::Parse("missing context".into()))?,
                )?;
                let lp = f
                    .map(|v| parse_real::<T>(v).map(T::ln))
                    .collect::<Result<Vec<_>>>()?;
                if lp.len() != n {
                    return Err(Error::Parse(format!(
                        "context record has {} probabilities, expected {n}",
                        lp.len()
                    )));
                }
                table.insert(ctx, lp);
            }
            Some(other) => return Err(Error::Parse(format!("unknown record {other:?}"))),
            None => {}
        }
    }
    NGramModel::from_table(order, n, seq_len, lambda, table)
}
