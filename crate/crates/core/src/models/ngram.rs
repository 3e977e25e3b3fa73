use std::collections::BTreeMap;

use crate::corpus::Corpus;
use crate::scalar::Real;
use crate::vocab::{TokenId, PAD_ID};
use crate::{Error, Result};

use super::SequentialModel;

/// Left-padding marker for contexts that reach before the first token.
/// Never a vocabulary id.
pub const BOS: TokenId = TokenId::MAX;

/// Context used to look up `q(· | prefix)` in an order-`k` model: the last
/// `k - 1` tokens, left-padded with [`BOS`]. The empty prefix always maps to
/// its own start context, including for `k = 1`, because pad cannot be the
/// first token of a sequence.
pub fn context_key(prefix: &[TokenId], order: usize) -> Vec<TokenId> {
    let width = order.saturating_sub(1);
    if prefix.is_empty() {
        return vec![BOS; width.max(1)];
    }
    let take = width.min(prefix.len());
    let mut key = vec![BOS; width - take];
    key.extend_from_slice(&prefix[prefix.len() - take..]);
    key
}

fn is_start(key: &[TokenId]) -> bool {
    !key.is_empty() && key.iter().all(|&t| t == BOS)
}

/// Smoothed relative-frequency n-gram model over a padded vocabulary.
///
/// `q(w | ctx) = (count(ctx, w) + λ) / (count(ctx) + λ·|support|)` where the
/// support excludes pad in the start context. Pad is absorbing: once a prefix
/// ends in pad, the next token is pad with probability one. Contexts never
/// seen in training fall back to the uniform distribution over their support.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel<T> {
    order: usize,
    vocab_size: usize,
    seq_len: usize,
    lambda: T,
    table: BTreeMap<Vec<TokenId>, Vec<T>>,
}

impl<T: Real> NGramModel<T> {
    /// An order-`k` model with no observed contexts: uniform everywhere,
    /// subject to the pad rules.
    pub fn uniform(vocab_size: usize, seq_len: usize, order: usize) -> Result<Self> {
        Self::from_table(order, vocab_size, seq_len, T::zero(), BTreeMap::new())
    }

    /// Assembles a model from per-context log-probabilities.
    pub fn from_table(
        order: usize,
        vocab_size: usize,
        seq_len: usize,
        lambda: T,
        table: BTreeMap<Vec<TokenId>, Vec<T>>,
    ) -> Result<Self> {
        if order < 1 {
            return Err(Error::InvalidParameter("n-gram order must be >= 1".into()));
        }
        if vocab_size < 2 {
            return Err(Error::InvalidParameter(
                "n-gram vocabulary needs pad plus at least one token".into(),
            ));
        }
        if seq_len == 0 {
            return Err(Error::InvalidParameter(
                "sequence length must be >= 1".into(),
            ));
        }
        if lambda < T::zero() || !lambda.is_finite() {
            return Err(Error::InvalidParameter(
                "smoothing must be finite and >= 0".into(),
            ));
        }
        let width = order - 1;
        for (ctx, lp) in &table {
            if ctx.len() != width.max(1) && !(width == 0 && ctx.is_empty()) {
                return Err(Error::InvalidParameter(format!(
                    "context {ctx:?} has wrong width"
                )));
            }
            if ctx.iter().any(|&t| t != BOS && t >= vocab_size) || lp.len() != vocab_size {
                return Err(Error::InvalidParameter(format!(
                    "bad record for context {ctx:?}"
                )));
            }
        }
        Ok(NGramModel {
            order,
            vocab_size,
            seq_len,
            lambda,
            table,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// Observed contexts with their log-probabilities, in key order.
    pub fn contexts(&self) -> impl Iterator<Item = (&[TokenId], &[T])> {
        self.table.iter().map(|(k, v)| (k.as_slice(), v.as_slice()))
    }

    fn fallback(&self, start: bool) -> Vec<T> {
        let support = if start {
            self.vocab_size - 1
        } else {
            self.vocab_size
        };
        let lu = -T::from_count(support).ln();
        let mut lp = vec![lu; self.vocab_size];
        if start {
            lp[PAD_ID] = T::neg_infinity();
        }
        lp
    }
}

impl<T: Real> SequentialModel<T> for NGramModel<T> {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn seq_len(&self) -> usize {
        self.seq_len
    }

    fn next_token_log_probs(&self, prefix: &[TokenId]) -> Vec<T> {
        if prefix.last() == Some(&PAD_ID) {
            let mut lp = vec![T::neg_infinity(); self.vocab_size];
            lp[PAD_ID] = T::zero();
            return lp;
        }
        let key = context_key(prefix, self.order);
        match self.table.get(&key) {
            Some(lp) => lp.clone(),
            None => self.fallback(prefix.is_empty()),
        }
    }
}

/// Fits an order-`k` model by counting, with additive smoothing `lambda`.
/// Positions following a pad are not counted.
pub fn ngram_mle_fit<T: Real>(
    corpus: &Corpus,
    vocab_size: usize,
    order: usize,
    lambda: T,
) -> Result<NGramModel<T>> {
    if order < 1 {
        return Err(Error::InvalidParameter("n-gram order must be >= 1".into()));
    }
    if corpus.max_token() >= vocab_size {
        return Err(Error::DomainMismatch(
            "corpus token outside vocabulary".into(),
        ));
    }
    if let Some(i) = corpus.sequences().iter().position(|s| s.ids()[0] == PAD_ID) {
        return Err(Error::InvalidSequence(format!(
            "sequence {i} starts with the pad token"
        )));
    }
    let mut counts: BTreeMap<Vec<TokenId>, Vec<u64>> = BTreeMap::new();
    for seq in corpus.sequences() {
        let x = seq.ids();
        for j in 0..x.len() {
            if j > 0 && x[j - 1] == PAD_ID {
                break;
            }
            let c = counts
                .entry(context_key(&x[..j], order))
                .or_insert_with(|| vec![0; vocab_size]);
            c[x[j]] += 1;
        }
    }
    let mut table = BTreeMap::new();
    for (ctx, c) in counts {
        let start = is_start(&ctx);
        let support = if start { vocab_size - 1 } else { vocab_size };
        let total: u64 = c.iter().sum();
        let denom = T::from_u64(total).unwrap() + lambda * T::from_count(support);
        let lp: Vec<T> = c
            .iter()
            .enumerate()
            .map(|(w, &cw)| {
                if start && w == PAD_ID {
                    T::neg_infinity()
                } else {
                    ((T::from_u64(cw).unwrap() + lambda) / denom).ln()
                }
            })
            .collect();
        table.insert(ctx, lp);
    }
    NGramModel::from_table(order, vocab_size, corpus.seq_len(), lambda, table)
}
