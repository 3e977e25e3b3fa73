use crate::domain::{PrefixIndex, DEFAULT_ENUMERATION_BUDGET};
use crate::exact::JointTable;
use crate::math::log_sum_exp;
use crate::scalar::Real;
use crate::vocab::TokenId;
use crate::{Error, Result};

use super::SequentialModel;

/// Explicit conditional table: one next-token distribution per prefix of
/// length `0..N`.
#[derive(Debug, Clone)]
pub struct TabularModel<T> {
    vocab_size: usize,
    seq_len: usize,
    index: PrefixIndex,
    log_probs: Vec<T>,
}

impl<T: Real> TabularModel<T> {
    /// Builds the table by calling `cond` on every prefix (lexicographic within
    /// each length). Each returned vector must be a distribution over `n` tokens.
    pub fn from_fn<F>(vocab_size: usize, seq_len: usize, mut cond: F) -> Result<Self>
    where
        F: FnMut(&[TokenId]) -> Vec<T>,
    {
        if vocab_size == 0 || seq_len == 0 {
            return Err(Error::InvalidParameter(
                "tabular model needs n >= 1 and N >= 1".into(),
            ));
        }
        let index = PrefixIndex::new(vocab_size, 0, seq_len - 1, DEFAULT_ENUMERATION_BUDGET)?;
        let mut log_probs = Vec::with_capacity(index.total() * vocab_size);
        for prefix in index.prefixes() {
            let p = cond(&prefix);
            check_distribution(&p, vocab_size)?;
            log_probs.extend(p.into_iter().map(T::ln));
        }
        Ok(TabularModel {
            vocab_size,
            seq_len,
            index,
            log_probs,
        })
    }

    /// Conditionals listed in prefix order: length 0, then all length-1
    /// prefixes lexicographically, and so on.
    pub fn from_conditionals(
        vocab_size: usize,
        seq_len: usize,
        tables: Vec<Vec<T>>,
    ) -> Result<Self> {
        let mut it = tables.into_iter();
        let m = Self::from_fn(vocab_size, seq_len, |_| it.next().unwrap_or_default())?;
        if it.next().is_some() {
            return Err(Error::InvalidParameter(
                "too many conditional tables".into(),
            ));
        }
        Ok(m)
    }

    pub fn uniform(vocab_size: usize, seq_len: usize) -> Result<Self> {
        let u = T::one() / T::from_count(vocab_size.max(1));
        Self::from_fn(vocab_size, seq_len, |_| vec![u; vocab_size])
    }

    /// Probability one on `seq` (off-path prefixes are uniform).
    pub fn point_mass(vocab_size: usize, seq: &[TokenId]) -> Result<Self> {
        if seq.iter().any(|&t| t >= vocab_size) {
            return Err(Error::InvalidParameter("token outside vocabulary".into()));
        }
        let u = T::one() / T::from_count(vocab_size);
        Self::from_fn(vocab_size, seq.len(), |prefix| {
            if prefix == &seq[..prefix.len()] {
                let mut p = vec![T::zero(); vocab_size];
                p[seq[prefix.len()]] = T::one();
                p
            } else {
                vec![u; vocab_size]
            }
        })
    }

    /// Conditionals of an explicit joint: `q(w | x) = P(x w ·) / P(x ·)`.
    /// Prefixes with zero marginal mass get the uniform conditional.
    pub fn from_joint(table: &JointTable<T>) -> Result<Self> {
        let d = table.domain();
        let n = d.vocab_size();
        let len = d.len();
        // marginals[l][idx] = log mass of the length-l prefix with index idx
        let mut marginals: Vec<Vec<T>> = vec![table.probs().iter().map(|p| p.ln()).collect()];
        for _ in 0..len {
            let next = marginals
                .last()
                .unwrap()
                .chunks(n)
                .map(log_sum_exp)
                .collect();
            marginals.push(next);
        }
        marginals.reverse();
        let u = T::one() / T::from_count(n);
        Self::from_fn(n, len, |prefix| {
            let l = prefix.len();
            let idx = prefix.iter().fold(0usize, |acc, &t| acc * n + t);
            let parent = marginals[l][idx];
            if parent == T::neg_infinity() {
                return vec![u; n];
            }
            let children = &marginals[l + 1][idx * n..idx * n + n];
            children.iter().map(|&c| (c - parent).exp()).collect()
        })
    }

    pub fn log_probs_at(&self, prefix: &[TokenId]) -> Option<&[T]> {
        let i = self.index.index(prefix)?;
        Some(&self.log_probs[i * self.vocab_size..(i + 1) * self.vocab_size])
    }
}

impl<T: Real> SequentialModel<T> for TabularModel<T> {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn seq_len(&self) -> usize {
        self.seq_len
    }

    fn next_token_log_probs(&self, prefix: &[TokenId]) -> Vec<T> {
        self.log_probs_at(prefix)
            .expect("prefix shorter than N with in-vocabulary ids")
            .to_vec()
    }
}

pub(crate) fn check_distribution<T: Real>(p: &[T], n: usize) -> Result<()> {
    if p.len() != n {
        return Err(Error::InvalidParameter(format!(
            "conditional has {} entries, expected {n}",
            p.len()
        )));
    }
    if p.iter().any(|&x| x < T::zero() || !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "negative or non-finite probability".into(),
        ));
    }
    let s: T = p.iter().copied().sum();
    if (s - T::one()).abs().as_f64() > T::NORMALIZATION_TOL {
        return Err(Error::NotNormalized(s.as_f64()));
    }
    Ok(())
}
