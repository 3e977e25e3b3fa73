//! Autoregressive sequence models with exact next-token conditionals.
//!
//! Every model exposes `log q(· | prefix)` for prefixes of length `0..N`;
//! sequence probabilities come from the chain rule. Probabilities are kept in
//! log space throughout since `N`-fold products underflow quickly.

mod io;
mod loglinear;
mod ngram;
mod tabular;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::math::ordered_sum;
use crate::scalar::Real;
use crate::vocab::TokenId;
use crate::{Error, Result};

pub use io::{parse_ngram, write_ngram, MODEL_FORMAT_VERSION};
pub(crate) use io::{parse_real, parse_usize};
pub use loglinear::{kl_gradient, LogLinearModel};
pub use ngram::{context_key, ngram_mle_fit, NGramModel, BOS};
pub use tabular::TabularModel;

/// Conditional next-token distribution `q(x_j | x_1..x_{j-1})`.
pub trait SequentialModel<T: Real>: Send + Sync {
    /// Vocabulary size `n`.
    fn vocab_size(&self) -> usize;

    /// Sequence length `N`.
    fn seq_len(&self) -> usize;

    /// `log q(w | prefix)` for every `w`, with `prefix.len() < N`.
    fn next_token_log_probs(&self, prefix: &[TokenId]) -> Vec<T>;

    fn next_token_dist(&self, prefix: &[TokenId]) -> Vec<T> {
        self.next_token_log_probs(prefix)
            .into_iter()
            .map(T::exp)
            .collect()
    }
}

impl<T: Real, M: SequentialModel<T> + ?Sized> SequentialModel<T> for std::sync::Arc<M> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn seq_len(&self) -> usize {
        (**self).seq_len()
    }
    fn next_token_log_probs(&self, prefix: &[TokenId]) -> Vec<T> {
        (**self).next_token_log_probs(prefix)
    }
    fn next_token_dist(&self, prefix: &[TokenId]) -> Vec<T> {
        (**self).next_token_dist(prefix)
    }
}

impl<T: Real, M: SequentialModel<T> + ?Sized> SequentialModel<T> for &M {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn seq_len(&self) -> usize {
        (**self).seq_len()
    }
    fn next_token_log_probs(&self, prefix: &[TokenId]) -> Vec<T> {
        (**self).next_token_log_probs(prefix)
    }
}

/// Log-probability of a whole sequence. Zero probability is `Impossible`
/// rather than `-inf` so callers must handle it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogProb<T> {
    Finite(T),
    Impossible,
}

impl<T: Real> LogProb<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            LogProb::Finite(v) => Some(v),
            LogProb::Impossible => None,
        }
    }

    pub fn is_impossible(self) -> bool {
        matches!(self, LogProb::Impossible)
    }

    pub fn prob(self) -> T {
        match self {
            LogProb::Finite(v) => v.exp(),
            LogProb::Impossible => T::zero(),
        }
    }

    /// `-inf` for `Impossible`.
    pub fn to_real(self) -> T {
        self.finite().unwrap_or_else(T::neg_infinity)
    }
}

/// `Σ_j log q(x_j | x_{1:j-1})`.
pub fn sequence_log_prob<T: Real, M: SequentialModel<T> + ?Sized>(
    model: &M,
    seq: &[TokenId],
) -> LogProb<T> {
    debug_assert_eq!(seq.len(), model.seq_len());
    let mut total = T::zero();
    for j in 0..seq.len() {
        let lp = model.next_token_log_probs(&seq[..j]);
        let v = lp.get(seq[j]).copied().unwrap_or_else(T::neg_infinity);
        if v == T::neg_infinity() || v.is_nan() {
            return LogProb::Impossible;
        }
        total += v;
    }
    LogProb::Finite(total)
}

/// Empirical log-loss of a model on a sample, in nats per sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport<T> {
    pub log_loss: T,
    pub per_sequence: Vec<T>,
}

impl<T: Real> LossReport<T> {
    pub fn bits(&self) -> T {
        self.log_loss / T::LN_2()
    }
}

/// `-(1/m) Σ_i log q(x_i)`; an impossible sequence is an error naming its index.
pub fn log_loss<T: Real, M: SequentialModel<T> + ?Sized>(
    model: &M,
    corpus: &Corpus,
) -> Result<LossReport<T>> {
    check_compatible(model, corpus)?;
    let mut per_sequence = Vec::with_capacity(corpus.len());
    for (index, s) in corpus.sequences().iter().enumerate() {
        match sequence_log_prob(model, s.ids()) {
            LogProb::Finite(v) => per_sequence.push(-v),
            LogProb::Impossible => return Err(Error::ImpossibleSequence { index }),
        }
    }
    let log_loss = ordered_sum(per_sequence.iter().copied()) / T::from_count(per_sequence.len());
    Ok(LossReport {
        log_loss,
        per_sequence,
    })
}

pub(crate) fn check_compatible<T: Real, M: SequentialModel<T> + ?Sized>(
    model: &M,
    corpus: &Corpus,
) -> Result<()> {
    if corpus.seq_len() != model.seq_len() {
        return Err(Error::DomainMismatch(format!(
            "corpus length {} vs model length {}",
            corpus.seq_len(),
            model.seq_len()
        )));
    }
    if corpus.max_token() >= model.vocab_size() {
        return Err(Error::DomainMismatch(format!(
            "corpus token id {} outside model vocabulary of size {}",
            corpus.max_token(),
            model.vocab_size()
        )));
    }
    Ok(())
}

/// Ancestral sampling with a seeded ChaCha8 stream.
pub fn sample_sequence<T: Real, M: SequentialModel<T> + ?Sized>(
    model: &M,
    rng_seed: u64,
) -> Vec<TokenId> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    sample_with(model, &mut rng)
}

/// Ancestral sampling from a caller-owned generator.
pub fn sample_with<T: Real, M: SequentialModel<T> + ?Sized, R: Rng + ?Sized>(
    model: &M,
    rng: &mut R,
) -> Vec<TokenId> {
    let mut seq = Vec::with_capacity(model.seq_len());
    for _ in 0..model.seq_len() {
        let probs = model.next_token_dist(&seq);
        seq.push(draw(&probs, rng));
    }
    seq
}

fn draw<T: Real, R: Rng + ?Sized>(probs: &[T], rng: &mut R) -> TokenId {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.iter().enumerate() {
        let p = p.as_f64();
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}
