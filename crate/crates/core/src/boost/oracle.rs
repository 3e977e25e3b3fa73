use std::collections::BTreeMap;
use std::sync::Arc;

use crate::corpus::Corpus;
use crate::distinguish::{
    Flipped, NGramIndicator, SharedStep, StepDistinguisher, TokenIndicator, MIN_RATIO_BOUND,
};
use crate::math::fmt_real;
use crate::models::{check_compatible, context_key, SequentialModel};
use crate::scalar::Real;
use crate::vocab::TokenId;
use crate::{Error, Result};

/// Source of step distinguishers for the boosting loop.
///
/// Nothing is assumed about optimality; the loop only needs the returned
/// distinguisher to map into `[0, 1]`.
pub trait Oracle<T: Real> {
    fn propose(
        &mut self,
        model: &Arc<dyn SequentialModel<T>>,
        corpus: &Corpus,
    ) -> Result<SharedStep<T>>;

    fn name(&self) -> String {
        "custom".into()
    }
}

impl<T, F> Oracle<T> for F
where
    T: Real,
    F: FnMut(&Arc<dyn SequentialModel<T>>, &Corpus) -> Result<SharedStep<T>>,
{
    fn propose(
        &mut self,
        model: &Arc<dyn SequentialModel<T>>,
        corpus: &Corpus,
    ) -> Result<SharedStep<T>> {
        self(model, corpus)
    }
}

fn oriented<T: Real, G: StepDistinguisher<T> + 'static>(g: G, beta: T) -> SharedStep<T> {
    if beta < T::zero() {
        Arc::new(Flipped(g))
    } else {
        Arc::new(g)
    }
}

/// Index of the largest `|v|`; the first one wins ties.
fn argmax_abs<T: Real>(values: impl IntoIterator<Item = T>) -> Option<(usize, T)> {
    let mut best: Option<(usize, T)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| v.abs() > b.abs()) {
            best = Some((i, v));
        }
    }
    best
}

/// Searches `{1{last token = w}} ∪ {1 − 1{last token = w}}` for the largest
/// generalized advantage. All `n` candidates are scored in one pass over the
/// corpus.
#[derive(Debug, Clone, Default)]
pub struct TokenIndicatorOracle {
    last_scores: Vec<f64>,
}

impl TokenIndicatorOracle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Signed advantages of the un-flipped candidates from the last call.
    pub fn last_scores(&self) -> &[f64] {
        &self.last_scores
    }

    pub fn scores<T: Real, M: SequentialModel<T> + ?Sized>(
        model: &M,
        corpus: &Corpus,
    ) -> Result<Vec<T>> {
        check_compatible(model, corpus)?;
        let n = model.vocab_size();
        let len = corpus.seq_len();
        let mut acc = vec![T::zero(); n];
        for s in corpus.sequences() {
            let x = s.ids();
            for j in 0..len {
                for (a, p) in acc.iter_mut().zip(model.next_token_dist(&x[..j])) {
                    *a += p;
                }
                acc[x[j]] -= T::one();
            }
        }
        let denom = T::from_count(corpus.len() * len);
        Ok(acc.into_iter().map(|a| a / denom).collect())
    }
}

impl<T: Real> Oracle<T> for TokenIndicatorOracle {
    fn propose(
        &mut self,
        model: &Arc<dyn SequentialModel<T>>,
        corpus: &Corpus,
    ) -> Result<SharedStep<T>> {
        let scores = Self::scores(model.as_ref(), corpus)?;
        self.last_scores = scores.iter().map(|s| s.as_f64()).collect();
        let (token, beta) =
            argmax_abs(scores).ok_or_else(|| Error::InvalidParameter("empty vocabulary".into()))?;
        Ok(oriented(TokenIndicator { token }, beta))
    }

    fn name(&self) -> String {
        "token-indicator".into()
    }
}

/// Same search over order-`k` context/token indicators, restricted to contexts
/// that occur in the corpus (all others have zero advantage).
#[derive(Debug, Clone)]
pub struct NGramIndicatorOracle {
    order: usize,
}

impl NGramIndicatorOracle {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidParameter("n-gram order must be >= 1".into()));
        }
        Ok(NGramIndicatorOracle { order })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn scores<T: Real, M: SequentialModel<T> + ?Sized>(
        &self,
        model: &M,
        corpus: &Corpus,
    ) -> Result<BTreeMap<Vec<TokenId>, Vec<T>>> {
        check_compatible(model, corpus)?;
        let n = model.vocab_size();
        let len = corpus.seq_len();
        let mut acc: BTreeMap<Vec<TokenId>, Vec<T>> = BTreeMap::new();
        for s in corpus.sequences() {
            let x = s.ids();
            for j in 0..len {
                let row = acc
                    .entry(context_key(&x[..j], self.order))
                    .or_insert_with(|| vec![T::zero(); n]);
                for (a, p) in row.iter_mut().zip(model.next_token_dist(&x[..j])) {
                    *a += p;
                }
                row[x[j]] -= T::one();
            }
        }
        let denom = T::from_count(corpus.len() * len);
        for row in acc.values_mut() {
            for a in row.iter_mut() {
                *a /= denom;
            }
        }
        Ok(acc)
    }
}

impl<T: Real> Oracle<T> for NGramIndicatorOracle {
    fn propose(
        &mut self,
        model: &Arc<dyn SequentialModel<T>>,
        corpus: &Corpus,
    ) -> Result<SharedStep<T>> {
        let scores = self.scores(model.as_ref(), corpus)?;
        let flat = scores
            .iter()
            .flat_map(|(ctx, row)| row.iter().enumerate().map(move |(w, &b)| (ctx, w, b)));
        let mut best: Option<(&Vec<TokenId>, TokenId, T)> = None;
        for (ctx, w, b) in flat {
            if best.is_none_or(|(_, _, cur)| b.abs() > cur.abs()) {
                best = Some((ctx, w, b));
            }
        }
        let (ctx, token, beta) =
            best.ok_or_else(|| Error::InvalidParameter("no contexts in corpus".into()))?;
        Ok(oriented(
            NGramIndicator {
                order: self.order,
                context: ctx.clone(),
                token,
            },
            beta,
        ))
    }

    fn name(&self) -> String {
        format!("ngram-indicator {}", self.order)
    }
}

/// Step-wise log-ratio distinguisher
/// `g(x, w) = clamp((log C + log q(w|x) − log r(w|x)) / (2 log C), 0, 1)`.
///
/// Where only `r` gives zero mass the value is 1, where only `q` does it is 0,
/// and where both do it is 1/2.
pub struct LogRatioStep<T: Real> {
    current: Arc<dyn SequentialModel<T>>,
    reference: Arc<dyn SequentialModel<T>>,
    log_c: T,
}

impl<T: Real> LogRatioStep<T> {
    pub fn new(
        current: Arc<dyn SequentialModel<T>>,
        reference: Arc<dyn SequentialModel<T>>,
        c: T,
    ) -> Result<Self> {
        if !(c > T::one()) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ratio bound C must be finite and > 1 (got {c})"
            )));
        }
        if current.vocab_size() != reference.vocab_size()
            || current.seq_len() != reference.seq_len()
        {
            return Err(Error::DomainMismatch(
                "log-ratio models have different shapes".into(),
            ));
        }
        Ok(LogRatioStep {
            current,
            reference,
            log_c: c.ln(),
        })
    }

    pub fn log_c(&self) -> T {
        self.log_c
    }
}

impl<T: Real> StepDistinguisher<T> for LogRatioStep<T> {
    fn evaluate(&self, prefix: &[TokenId]) -> T {
        let Some((&w, head)) = prefix.split_last() else {
            return T::lit(0.5);
        };
        let lq = self.current.next_token_log_probs(head)[w];
        let lr = self.reference.next_token_log_probs(head)[w];
        let ninf = T::neg_infinity();
        match (lq == ninf, lr == ninf) {
            (true, true) => T::lit(0.5),
            (true, false) => T::zero(),
            (false, true) => T::one(),
            _ => ((self.log_c + lq - lr) / (T::lit(2.0) * self.log_c))
                .max(T::zero())
                .min(T::one()),
        }
    }

    fn label(&self) -> String {
        format!("log-ratio C={}", fmt_real(self.log_c.exp()))
    }
}

/// Emits [`LogRatioStep`] against a fixed reference model, with `C` set to the
/// largest conditional ratio seen on corpus prefixes (capped at `max_ratio`).
pub struct LogRatioOracle<T: Real> {
    reference: Arc<dyn SequentialModel<T>>,
    max_ratio: T,
}

impl<T: Real> LogRatioOracle<T> {
    pub fn new(reference: Arc<dyn SequentialModel<T>>) -> Self {
        LogRatioOracle {
            reference,
            max_ratio: T::lit(1e6),
        }
    }

    pub fn with_max_ratio(mut self, max_ratio: T) -> Self {
        self.max_ratio = max_ratio;
        self
    }

    fn ratio_bound(&self, model: &dyn SequentialModel<T>, corpus: &Corpus) -> T {
        let mut worst = T::zero();
        for s in corpus.sequences() {
            let x = s.ids();
            for j in 0..x.len() {
                let a = model.next_token_log_probs(&x[..j]);
                let b = self.reference.next_token_log_probs(&x[..j]);
                for (&la, &lb) in a.iter().zip(&b) {
                    if la.is_finite() && lb.is_finite() {
                        worst = worst.max((la - lb).abs());
                    }
                }
            }
        }
        worst.exp().max(T::lit(MIN_RATIO_BOUND)).min(self.max_ratio)
    }
}

impl<T: Real> Oracle<T> for LogRatioOracle<T> {
    fn propose(
        &mut self,
        model: &Arc<dyn SequentialModel<T>>,
        corpus: &Corpus,
    ) -> Result<SharedStep<T>> {
        check_compatible(model.as_ref(), corpus)?;
        let c = self.ratio_bound(model.as_ref(), corpus);
        Ok(Arc::new(LogRatioStep::new(
            model.clone(),
            self.reference.clone(),
            c,
        )?))
    }

    fn name(&self) -> String {
        "log-ratio".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distinguish::generalized_advantage;
    use crate::models::{ngram_mle_fit, TabularModel};

    fn uniform(n: usize, len: usize) -> Arc<dyn SequentialModel<f64>> {
        Arc::new(TabularModel::<f64>::uniform(n, len).unwrap())
    }

    #[test]
    fn token_scores_match_generalized_advantage() {
        let corpus = Corpus::from_ids(vec![vec![0, 1], vec![0, 0], vec![2, 0]]).unwrap();
        let q = uniform(3, 2);
        let scores = TokenIndicatorOracle::scores(q.as_ref(), &corpus).unwrap();
        for (w, s) in scores.iter().enumerate() {
            let b = generalized_advantage(&TokenIndicator { token: w }, &corpus, q.as_ref())
                .unwrap()
                .value;
            assert!((s - b).abs() < 1e-15);
        }
        let mut oracle = TokenIndicatorOracle::new();
        let g = oracle.propose(&q, &corpus).unwrap();
        // token 0 is over-represented, so its indicator has negative advantage and is flipped.
        assert_eq!(g.label(), "flip token-indicator 0");
        let b = generalized_advantage(&g, &corpus, q.as_ref())
            .unwrap()
            .value;
        assert!((b - scores[0].abs()).abs() < 1e-15);
    }

    #[test]
    fn first_maximum_wins() {
        let corpus = Corpus::from_ids(vec![vec![0], vec![1]]).unwrap();
        let q = uniform(2, 1);
        let mut oracle = TokenIndicatorOracle::new();
        let g = oracle.propose(&q, &corpus).unwrap();
        assert_eq!(g.label(), "token-indicator 0");
        assert_eq!(oracle.last_scores(), &[0.0, 0.0]);
    }

    #[test]
    fn ngram_scores_sum_over_tokens_to_zero() {
        let corpus = Corpus::from_ids(vec![vec![0, 1, 1], vec![1, 1, 0]]).unwrap();
        let q = uniform(2, 3);
        let oracle = NGramIndicatorOracle::new(2).unwrap();
        let scores = oracle.scores(q.as_ref(), &corpus).unwrap();
        for row in scores.values() {
            assert!(row.iter().sum::<f64>().abs() < 1e-15);
        }
        for (ctx, row) in &scores {
            for (w, &s) in row.iter().enumerate() {
                let g = NGramIndicator {
                    order: 2,
                    context: ctx.clone(),
                    token: w,
                };
                let b = generalized_advantage(&g, &corpus, q.as_ref())
                    .unwrap()
                    .value;
                assert!((s - b).abs() < 1e-15);
            }
        }
        assert!(NGramIndicatorOracle::new(0).is_err());
    }

    #[test]
    fn log_ratio_oracle_has_positive_advantage() {
        let corpus =
            Corpus::from_ids(vec![vec![1, 1], vec![1, 2], vec![2, 1], vec![1, 1]]).unwrap();
        let reference: Arc<dyn SequentialModel<f64>> =
            Arc::new(ngram_mle_fit(&corpus, 3, 2, 0.5).unwrap());
        let q = uniform(3, 2);
        let mut oracle = LogRatioOracle::new(reference);
        let g = oracle.propose(&q, &corpus).unwrap();
        assert!(g.label().starts_with("log-ratio C="));
        let b = generalized_advantage(&g, &corpus, q.as_ref())
            .unwrap()
            .value;
        assert!(b > 0.0);
    }
}
