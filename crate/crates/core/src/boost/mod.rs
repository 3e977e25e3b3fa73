//! Multiplicative reweighting and the distinguisher-boosting loop.
//!
//! A whole-sequence update `q′(x) ∝ q(x) e^{−a f(x)}` needs a partition sum
//! over all of `X`. The step-wise update instead rescales each next-token
//! conditional, `q′(w | x) ∝ q(w | x) e^{−b g(x, w)}`, so normalization is a
//! sum over the `n` vocabulary tokens of one prefix. [`ReweightedModel`]
//! stores the base model plus the list of `(b_t, g_t)` factors.

mod io;
mod oracle;
mod run;

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use crate::corpus::Corpus;
use crate::distinguish::{Distinguisher, SharedStep, StepDistinguisher};
use crate::exact::JointTable;
use crate::math::normalize_log;
use crate::models::SequentialModel;
use crate::scalar::Real;
use crate::vocab::TokenId;
use crate::{Error, Result};

pub use io::{parse_reweighted, write_reweighted};
pub use oracle::{
    LogRatioOracle, LogRatioStep, NGramIndicatorOracle, Oracle, TokenIndicatorOracle,
};
pub use run::{run_boost, BoostConfig, BoostTrace, IterationRecord, Termination, TRACE_CSV_HEADER};

/// `q′(x) = q(x) e^{−a f(x)} / Σ_y q(y) e^{−a f(y)}`.
pub fn reweight_whole<T: Real, D: Distinguisher<T> + ?Sized>(
    q: &JointTable<T>,
    f: &D,
    a: T,
) -> Result<JointTable<T>> {
    if !(a >= T::zero()) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "reweighting strength must be finite and >= 0 (got {a})"
        )));
    }
    let domain = q.domain();
    let mut lw = Vec::with_capacity(domain.size());
    for (x, &p) in domain.iter().zip(q.probs()) {
        lw.push(p.ln() - a * f.evaluate(&x)?);
    }
    normalize_log(&mut lw);
    JointTable::new(domain, lw.into_iter().map(T::exp).collect())
}

/// Number of reweighting steps the loop can take before the log-loss would go
/// negative: `ceil(2 L_0 / (N ε²))`.
pub fn iteration_bound<T: Real>(initial_loss: T, seq_len: usize, epsilon: T) -> Result<usize> {
    if !(epsilon > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "ε must be > 0 (got {epsilon})"
        )));
    }
    if seq_len == 0 {
        return Err(Error::InvalidParameter("N must be >= 1".into()));
    }
    if !(initial_loss >= T::lit(-1e-12)) || !initial_loss.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "L_0 must be finite and >= 0 (got {initial_loss})"
        )));
    }
    let l0 = initial_loss.max(T::zero()).as_f64();
    let eps = epsilon.as_f64();
    Ok((2.0 * l0 / (seq_len as f64 * eps * eps)).ceil() as usize)
}

/// One `(b, g)` reweighting factor.
#[derive(Clone)]
pub struct Factor<T: Real> {
    pub weight: T,
    pub distinguisher: SharedStep<T>,
}

impl<T: Real> std::fmt::Debug for Factor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factor")
            .field("weight", &self.weight)
            .field("distinguisher", &self.distinguisher.label())
            .finish()
    }
}

#[derive(Debug)]
struct Memo<T> {
    prefixes: Arc<BTreeSet<Vec<TokenId>>>,
    table: HashMap<Vec<TokenId>, Vec<T>>,
}

/// `q′(w | x) = q(w | x) exp(−Σ_t b_t g_t(x, w)) / Z(x)`.
///
/// With memoization on, conditionals for every corpus prefix are computed
/// once when a factor is appended; other prefixes are computed on demand from
/// the base model and the full factor list.
#[derive(Clone)]
pub struct ReweightedModel<T: Real> {
    base: Arc<dyn SequentialModel<T>>,
    factors: Vec<Factor<T>>,
    memo: Option<Arc<Memo<T>>>,
    partition_scale: Option<T>,
}

impl<T: Real> std::fmt::Debug for ReweightedModel<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReweightedModel")
            .field("factors", &self.factors)
            .field(
                "memoized_prefixes",
                &self.memo.as_ref().map(|m| m.table.len()),
            )
            .finish()
    }
}

impl<T: Real> ReweightedModel<T> {
    pub fn new(base: Arc<dyn SequentialModel<T>>) -> Self {
        ReweightedModel {
            base,
            factors: Vec::new(),
            memo: None,
            partition_scale: None,
        }
    }

    /// Caches conditionals for every prefix `x_{<j}` of every corpus sequence.
    pub fn with_memo(mut self, corpus: &Corpus) -> Self {
        let prefixes: BTreeSet<Vec<TokenId>> = corpus
            .sequences()
            .iter()
            .flat_map(|s| (0..s.len()).map(move |j| s.ids()[..j].to_vec()))
            .collect();
        self.memo = None;
        let table = prefixes
            .iter()
            .map(|p| (p.clone(), self.compute(p)))
            .collect();
        self.memo = Some(Arc::new(Memo {
            prefixes: Arc::new(prefixes),
            table,
        }));
        self
    }

    /// Test hook: multiplies every per-prefix partition by `scale`, leaving
    /// conditionals that sum to `1/scale`.
    #[doc(hidden)]
    pub fn with_partition_fault(mut self, scale: T) -> Self {
        self.partition_scale = Some(scale);
        if let Some(m) = self.memo.take() {
            let table = m
                .prefixes
                .iter()
                .map(|p| (p.clone(), self.compute(p)))
                .collect();
            self.memo = Some(Arc::new(Memo {
                prefixes: m.prefixes.clone(),
                table,
            }));
        }
        self
    }

    pub fn base(&self) -> &Arc<dyn SequentialModel<T>> {
        &self.base
    }

    pub fn factors(&self) -> &[Factor<T>] {
        &self.factors
    }

    pub fn is_memoized(&self) -> bool {
        self.memo.is_some()
    }

    /// Appends `(b, g)`. Negative `b` is rejected; flip `g` instead.
    pub fn reweighted(&self, b: T, g: SharedStep<T>) -> Result<Self> {
        if !(b >= T::zero()) || !b.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "step weight b must be finite and >= 0 (got {b}); flip the distinguisher instead"
            )));
        }
        let factor = Factor {
            weight: b,
            distinguisher: g,
        };
        let memo = self.memo.as_ref().map(|m| {
            let table = m
                .prefixes
                .iter()
                .map(|p| {
                    let prev = &m.table[p];
                    (
                        p.clone(),
                        self.apply(prev.clone(), p, std::slice::from_ref(&factor)),
                    )
                })
                .collect();
            Arc::new(Memo {
                prefixes: m.prefixes.clone(),
                table,
            })
        });
        let mut factors = self.factors.clone();
        factors.push(factor);
        Ok(ReweightedModel {
            base: self.base.clone(),
            factors,
            memo,
            partition_scale: self.partition_scale,
        })
    }

    /// `log Z(prefix)` for the last factor, relative to the model before it.
    pub fn last_log_partition(&self, prefix: &[TokenId]) -> Option<T> {
        let last = self.factors.last()?;
        let before = ReweightedModel {
            base: self.base.clone(),
            factors: self.factors[..self.factors.len() - 1].to_vec(),
            memo: None,
            partition_scale: None,
        };
        let mut lp = before.compute(prefix);
        let mut ext = prefix.to_vec();
        ext.push(0);
        for (w, l) in lp.iter_mut().enumerate() {
            ext[prefix.len()] = w;
            *l -= last.weight * last.distinguisher.evaluate(&ext);
        }
        Some(crate::math::log_sum_exp(&lp))
    }

    fn compute(&self, prefix: &[TokenId]) -> Vec<T> {
        let lp = self.base.next_token_log_probs(prefix);
        self.apply(lp, prefix, &self.factors)
    }

    fn apply(&self, mut lp: Vec<T>, prefix: &[TokenId], factors: &[Factor<T>]) -> Vec<T> {
        if factors.is_empty() && self.partition_scale.is_none() {
            return lp;
        }
        let mut ext = Vec::with_capacity(prefix.len() + 1);
        ext.extend_from_slice(prefix);
        ext.push(0);
        for (w, l) in lp.iter_mut().enumerate() {
            if *l == T::neg_infinity() {
                continue;
            }
            ext[prefix.len()] = w;
            let mut shift = T::zero();
            for f in factors {
                shift += f.weight * f.distinguisher.evaluate(&ext);
            }
            *l -= shift;
        }
        normalize_log(&mut lp);
        if let Some(s) = self.partition_scale {
            let ls = s.ln();
            for l in lp.iter_mut() {
                *l -= ls;
            }
        }
        lp
    }
}

impl<T: Real> SequentialModel<T> for ReweightedModel<T> {
    fn vocab_size(&self) -> usize {
        self.base.vocab_size()
    }

    fn seq_len(&self) -> usize {
        self.base.seq_len()
    }

    fn next_token_log_probs(&self, prefix: &[TokenId]) -> Vec<T> {
        if let Some(m) = &self.memo {
            if let Some(lp) = m.table.get(prefix) {
                return lp.clone();
            }
        }
        self.compute(prefix)
    }
}

/// Wraps `q` with a single step-wise factor `(b, g)`.
pub fn reweight_stepwise<T: Real>(
    q: Arc<dyn SequentialModel<T>>,
    g: SharedStep<T>,
    b: T,
) -> Result<ReweightedModel<T>> {
    ReweightedModel::new(q).reweighted(b, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distinguish::{ConstantDistinguisher, FnDistinguisher, TokenIndicator};
    use crate::domain::Domain;
    use crate::exact::enumerate_joint;
    use crate::models::{log_loss, sequence_log_prob, TabularModel};

    fn uniform(n: usize, len: usize) -> Arc<dyn SequentialModel<f64>> {
        Arc::new(TabularModel::<f64>::uniform(n, len).unwrap())
    }

    #[test]
    fn whole_reweighting_examples() {
        let d = Domain::with_default_budget(2, 1).unwrap();
        let q = JointTable::<f64>::new(d, vec![0.5, 0.5]).unwrap();
        let f = FnDistinguisher::new("is-b", |x: &[TokenId]| if x[0] == 1 { 1.0 } else { 0.0 });
        assert_eq!(reweight_whole(&q, &f, 0.0).unwrap(), q);
        let c = ConstantDistinguisher::new(0.8);
        let same = reweight_whole(&q, &c, 3.0).unwrap();
        assert!((same.probs()[0] - 0.5).abs() < 1e-15);

        let q2 = reweight_whole(&q, &f, 0.25).unwrap();
        let eb = (-0.25f64).exp();
        assert!((q2.probs()[1] - eb / (1.0 + eb)).abs() < 1e-15);
        assert!((q2.probs()[0] - 0.562177).abs() < 1e-6);
        let corpus = Corpus::from_ids(vec![vec![0], vec![0], vec![0], vec![1]]).unwrap();
        let before = q.log_loss(&corpus).unwrap().log_loss;
        let after = q2.log_loss(&corpus).unwrap().log_loss;
        assert!((before - std::f64::consts::LN_2).abs() < 1e-12);
        let (qa, qb) = (1.0 / (1.0 + eb), eb / (1.0 + eb));
        assert!((after + (3.0 * qa.ln() + qb.ln()) / 4.0).abs() < 1e-12);
        // the quoted ≈0.638463 agrees to four decimals; the exact value is 0.6384394…
        assert!((after - 0.638463).abs() < 1e-4);
        assert!(before - after >= 0.25f64 * 0.25 / 2.0);
        assert!(reweight_whole(&q, &f, -0.1).is_err());
    }

    #[test]
    fn stepwise_zero_weight_is_identity() {
        let base = Arc::new(
            TabularModel::<f64>::from_conditionals(
                2,
                2,
                vec![vec![0.2, 0.8], vec![0.6, 0.4], vec![0.1, 0.9]],
            )
            .unwrap(),
        );
        let r =
            reweight_stepwise(base.clone(), Arc::new(TokenIndicator { token: 1 }), 0.0).unwrap();
        for p in [&[][..], &[0], &[1]] {
            let a = base.next_token_dist(p);
            let b = r.next_token_dist(p);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-15);
            }
        }
        assert!(reweight_stepwise(base, Arc::new(TokenIndicator { token: 1 }), -0.5).is_err());
    }

    #[test]
    fn stepwise_two_term_partition() {
        for b in [0.1, 0.5, 2.0] {
            let r =
                reweight_stepwise(uniform(2, 3), Arc::new(TokenIndicator { token: 1 }), b).unwrap();
            let expected = (-b).exp() / (1.0 + (-b).exp());
            for p in [&[][..], &[0], &[1, 1]] {
                let d = r.next_token_dist(p);
                assert!((d[1] - expected).abs() < 1e-15);
                assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            let lz = r.last_log_partition(&[0]).unwrap();
            assert!((lz - (0.5 + 0.5 * (-b).exp()).ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn memo_matches_on_demand() {
        let corpus = Corpus::from_ids(vec![vec![0, 1, 1], vec![1, 1, 0]]).unwrap();
        let plain = ReweightedModel::new(uniform(2, 3));
        let memo = ReweightedModel::new(uniform(2, 3)).with_memo(&corpus);
        let g: SharedStep<f64> = Arc::new(TokenIndicator { token: 1 });
        let plain = plain
            .reweighted(0.3, g.clone())
            .unwrap()
            .reweighted(0.2, g.clone())
            .unwrap();
        let memo = memo
            .reweighted(0.3, g.clone())
            .unwrap()
            .reweighted(0.2, g)
            .unwrap();
        assert!(memo.is_memoized());
        for x in Domain::with_default_budget(2, 3).unwrap().iter() {
            let a = sequence_log_prob(&plain, &x).to_real();
            let b = sequence_log_prob(&memo, &x).to_real();
            assert!((a - b).abs() < 1e-12);
        }
        let la = log_loss(&plain, &corpus).unwrap().log_loss;
        let lb = log_loss(&memo, &corpus).unwrap().log_loss;
        assert!((la - lb).abs() < 1e-12);
    }

    #[test]
    fn fault_hook_breaks_normalization() {
        let r = reweight_stepwise(uniform(2, 1), Arc::new(TokenIndicator { token: 1 }), 0.4)
            .unwrap()
            .with_partition_fault(1.01);
        let s: f64 = r.next_token_dist(&[]).iter().sum();
        assert!((s - 1.0 / 1.01).abs() < 1e-12);
        let t = enumerate_joint(&r, 100);
        assert!(t.is_err());
    }

    #[test]
    fn iteration_bound_examples() {
        assert_eq!(iteration_bound(2f64.ln(), 1, 0.1).unwrap(), 139);
        assert_eq!(iteration_bound(0.0f64, 3, 0.1).unwrap(), 0);
        assert_eq!(iteration_bound(2.0f64, 1, 0.1).unwrap(), 400);
        assert_eq!(iteration_bound(2.0f64, 2, 0.1).unwrap(), 200);
        assert!(iteration_bound(1.0f64, 1, 0.0).is_err());
        assert!(iteration_bound(1.0f64, 0, 0.1).is_err());
    }
}
