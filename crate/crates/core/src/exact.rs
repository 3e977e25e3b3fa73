//! Brute-force oracles over enumerable domains.
//!
//! Everything here works on explicit probability tables over all `n^N`
//! sequences and refuses domains larger than the enumeration budget.

use crate::corpus::Corpus;
use crate::distinguish::{advantage_exact, Distinguisher, TableDistinguisher};
use crate::domain::Domain;
use crate::math::{fmt_real, ordered_sum};
use crate::models::{LossReport, SequentialModel};
use crate::scalar::Real;
use crate::vocab::{TokenId, Vocabulary};
use crate::{Error, Result};

/// Explicit distribution over every sequence of a [`Domain`], in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable<T> {
    domain: Domain,
    probs: Vec<T>,
}

impl<T: Real> JointTable<T> {
    pub fn new(domain: Domain, probs: Vec<T>) -> Result<Self> {
        if probs.len() != domain.size() {
            return Err(Error::DomainMismatch(format!(
                "{} probabilities for a domain of {} sequences",
                probs.len(),
                domain.size()
            )));
        }
        if probs.iter().any(|&p| !(p >= T::zero()) || !p.is_finite()) {
            return Err(Error::InvalidParameter(
                "negative or non-finite probability".into(),
            ));
        }
        let s = ordered_sum(probs.iter().copied());
        if (s - T::one()).abs().as_f64() > T::NORMALIZATION_TOL {
            return Err(Error::NotNormalized(s.as_f64()));
        }
        Ok(JointTable { domain, probs })
    }

    /// Builds a table from unnormalized nonnegative weights.
    pub fn from_weights(domain: Domain, weights: Vec<T>) -> Result<Self> {
        let s = ordered_sum(weights.iter().copied());
        if !(s > T::zero()) || !s.is_finite() {
            return Err(Error::InvalidParameter(
                "weights must have a finite positive sum".into(),
            ));
        }
        Self::new(domain, weights.into_iter().map(|w| w / s).collect())
    }

    pub(crate) fn from_log_probs(domain: Domain, log_probs: &[T]) -> Self {
        JointTable {
            domain,
            probs: log_probs.iter().map(|l| l.exp()).collect(),
        }
    }

    pub fn uniform(domain: Domain) -> Self {
        let u = T::one() / T::from_count(domain.size());
        JointTable {
            domain,
            probs: vec![u; domain.size()],
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn prob(&self, x: &[TokenId]) -> Option<T> {
        self.domain.index_of(x).map(|i| self.probs[i])
    }

    /// `E_p[h]` by enumeration.
    pub fn expectation<H: FnMut(&[TokenId]) -> T>(&self, mut h: H) -> T {
        ordered_sum(self.domain.iter().zip(&self.probs).map(|(x, &p)| p * h(&x)))
    }

    /// Log-loss of this table used directly as the model.
    pub fn log_loss(&self, corpus: &Corpus) -> Result<LossReport<T>> {
        let mut per_sequence = Vec::with_capacity(corpus.len());
        for (index, s) in corpus.sequences().iter().enumerate() {
            let p = self.prob(s.ids()).ok_or_else(|| {
                Error::DomainMismatch(format!("corpus sequence {index} outside domain"))
            })?;
            if p <= T::zero() {
                return Err(Error::ImpossibleSequence { index });
            }
            per_sequence.push(-p.ln());
        }
        let log_loss =
            ordered_sum(per_sequence.iter().copied()) / T::from_count(per_sequence.len());
        Ok(LossReport {
            log_loss,
            per_sequence,
        })
    }

    /// Empirical distribution of a corpus.
    pub fn empirical(domain: Domain, corpus: &Corpus) -> Result<Self> {
        let mut w = vec![T::zero(); domain.size()];
        for s in corpus.sequences() {
            let i = domain
                .index_of(s.ids())
                .ok_or_else(|| Error::DomainMismatch("corpus sequence outside domain".into()))?;
            w[i] += T::one();
        }
        Self::from_weights(domain, w)
    }

    /// `sequence,prob` CSV in lexicographic order with 17 significant digits.
    pub fn to_csv(&self, vocab: Option<&Vocabulary>) -> String {
        let mut out = String::from("sequence,prob\n");
        for (x, &p) in self.domain.iter().zip(&self.probs) {
            let seq = match vocab {
                Some(v) => v.render(&x),
                None => x
                    .iter()
                    .map(|t| t.to_string())
                    .collect::<Vec<_>>()
                    .join(" "),
            };
            out.push_str(&seq);
            out.push(',');
            out.push_str(&fmt_real(p));
            out.push('\n');
        }
        out
    }

    /// Reads a `sequence,prob` CSV. Sequences absent from the file get probability zero.
    pub fn from_csv(text: &str, vocab: &Vocabulary, len: usize, budget: usize) -> Result<Self> {
        let domain = Domain::new(vocab.len(), len, budget)?;
        let mut probs = vec![T::zero(); domain.size()];
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "sequence,prob" => {}
            _ => {
                return Err(Error::Parse(
                    "table CSV must start with header sequence,prob".into(),
                ))
            }
        }
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (seq, p) = line
                .rsplit_once(',')
                .ok_or_else(|| Error::Parse(format!("table line {}: missing comma", i + 2)))?;
            let ids = seq
                .split_whitespace()
                .map(|t| {
                    vocab.id(t).ok_or_else(|| Error::UnknownToken {
                        token: t.to_owned(),
                        line: i + 2,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let idx = domain.index_of(&ids).ok_or_else(|| {
                Error::Parse(format!("table line {}: wrong sequence length", i + 2))
            })?;
            probs[idx] = crate::models::parse_real(p.trim())?;
        }
        Self::new(domain, probs)
    }
}

/// Joint distribution of a sequential model by enumerating its prefix tree.
pub fn enumerate_joint<T: Real, M: SequentialModel<T> + ?Sized>(
    model: &M,
    budget: usize,
) -> Result<JointTable<T>> {
    let domain = Domain::new(model.vocab_size(), model.seq_len(), budget)?;
    let mut log_probs = Vec::with_capacity(domain.size());
    let mut prefix = Vec::with_capacity(domain.len());
    walk(model, &mut prefix, T::zero(), &mut log_probs);
    let table = JointTable::from_log_probs(domain, &log_probs);
    let s = ordered_sum(table.probs.iter().copied());
    if (s - T::one()).abs().as_f64() > T::NORMALIZATION_TOL {
        return Err(Error::NotNormalized(s.as_f64()));
    }
    Ok(table)
}

fn walk<T: Real, M: SequentialModel<T> + ?Sized>(
    model: &M,
    prefix: &mut Vec<TokenId>,
    acc: T,
    out: &mut Vec<T>,
) {
    if prefix.len() == model.seq_len() {
        out.push(acc);
        return;
    }
    let lp = model.next_token_log_probs(prefix);
    for (w, &l) in lp.iter().enumerate() {
        prefix.push(w);
        walk(model, prefix, acc + l, out);
        prefix.pop();
    }
}

/// A divergence that may be infinite when supports are incompatible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Divergence<T> {
    Finite(T),
    Infinite,
}

impl<T: Real> Divergence<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            Divergence::Finite(v) => Some(v),
            Divergence::Infinite => None,
        }
    }

    pub fn to_real(self) -> T {
        self.finite().unwrap_or_else(T::infinity)
    }
}

fn same_domain<T: Real>(p: &JointTable<T>, q: &JointTable<T>) -> Result<()> {
    if p.domain != q.domain {
        return Err(Error::DomainMismatch(
            "tables are over different domains".into(),
        ));
    }
    Ok(())
}

/// `KL(p ‖ q) = Σ p log(p/q)` in nats; terms with `p = 0` contribute nothing.
pub fn kl_divergence<T: Real>(p: &JointTable<T>, q: &JointTable<T>) -> Result<Divergence<T>> {
    same_domain(p, q)?;
    let mut acc = T::zero();
    for (&a, &b) in p.probs.iter().zip(&q.probs) {
        if a > T::zero() {
            if b <= T::zero() {
                return Ok(Divergence::Infinite);
            }
            acc += a * (a.ln() - b.ln());
        }
    }
    Ok(Divergence::Finite(acc))
}

/// `H(p, q) = −Σ p log q`.
pub fn cross_entropy<T: Real>(p: &JointTable<T>, q: &JointTable<T>) -> Result<Divergence<T>> {
    same_domain(p, q)?;
    let mut acc = T::zero();
    for (&a, &b) in p.probs.iter().zip(&q.probs) {
        if a > T::zero() {
            if b <= T::zero() {
                return Ok(Divergence::Infinite);
            }
            acc -= a * b.ln();
        }
    }
    Ok(Divergence::Finite(acc))
}

pub fn entropy<T: Real>(p: &JointTable<T>) -> T {
    ordered_sum(
        p.probs
            .iter()
            .filter(|&&a| a > T::zero())
            .map(|&a| -a * a.ln()),
    )
}

/// `(1/2) Σ |p − q|`.
pub fn total_variation<T: Real>(p: &JointTable<T>, q: &JointTable<T>) -> Result<T> {
    same_domain(p, q)?;
    Ok(ordered_sum(p.probs.iter().zip(&q.probs).map(|(&a, &b)| (a - b).abs())) / T::lit(2.0))
}

/// `d(q) = max_{f ∈ family} Σ_x f(x)(q(x) − p(x))`, with the maximizing member.
/// Ties go to the earliest member.
pub fn distinguishability_exhaustive<'a, T: Real, D: Distinguisher<T>>(
    q: &JointTable<T>,
    p: &JointTable<T>,
    family: &'a [D],
) -> Result<(T, &'a D)> {
    let mut best: Option<(T, &D)> = None;
    for f in family {
        let a = advantage_exact(f, p, q)?;
        if best.is_none_or(|(b, _)| a > b) {
            best = Some((a, f));
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("empty distinguisher family".into()))
}

/// Largest domain for which [`indicator_family`] will enumerate all subsets.
pub const MAX_INDICATOR_DOMAIN: usize = 12;

/// Every `{0,1}`-valued distinguisher on the domain (`2^(n^N)` of them).
pub fn indicator_family<T: Real>(domain: Domain) -> Result<Vec<TableDistinguisher<T>>> {
    let size = domain.size();
    if size > MAX_INDICATOR_DOMAIN {
        return Err(Error::BudgetExceeded {
            vocab_size: domain.vocab_size(),
            len: domain.len(),
            budget: MAX_INDICATOR_DOMAIN,
        });
    }
    (0u32..(1u32 << size))
        .map(|mask| {
            let values = (0..size)
                .map(|i| {
                    if mask >> i & 1 == 1 {
                        T::one()
                    } else {
                        T::zero()
                    }
                })
                .collect();
            TableDistinguisher::new(domain, values, format!("indicator {mask:#x}"))
        })
        .collect()
}

/// Central differences `(F(θ + h e_i) − F(θ − h e_i)) / 2h`.
pub fn finite_diff_gradient<T: Real, F: FnMut(&[T]) -> T>(
    mut field: F,
    theta: &[T],
    h: T,
) -> Vec<T> {
    let mut probe = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            probe[i] = theta[i] + h;
            let up = field(&probe);
            probe[i] = theta[i] - h;
            let down = field(&probe);
            probe[i] = theta[i];
            (up - down) / (h + h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distinguish::ConstantDistinguisher;
    use crate::models::TabularModel;

    fn pair() -> (JointTable<f64>, JointTable<f64>) {
        let d = Domain::with_default_budget(2, 1).unwrap();
        (
            JointTable::new(d, vec![0.75, 0.25]).unwrap(),
            JointTable::new(d, vec![0.5, 0.5]).unwrap(),
        )
    }

    #[test]
    fn enumerate_uniform_and_product_rule() {
        let m = TabularModel::<f64>::uniform(2, 2).unwrap();
        let t = enumerate_joint(&m, 100).unwrap();
        assert!(t.probs().iter().all(|&p| (p - 0.25).abs() < 1e-15));
        let m = TabularModel::<f64>::from_conditionals(
            2,
            2,
            vec![vec![0.3, 0.7], vec![0.9, 0.1], vec![0.4, 0.6]],
        )
        .unwrap();
        let t = enumerate_joint(&m, 100).unwrap();
        assert!((t.prob(&[0, 1]).unwrap() - 0.3 * 0.1).abs() < 1e-15);
        assert!((t.prob(&[1, 0]).unwrap() - 0.7 * 0.4).abs() < 1e-15);
        assert!(enumerate_joint(&m, 3).is_err());
    }

    #[test]
    fn kl_examples() {
        let (p, q) = pair();
        assert_eq!(kl_divergence(&p, &p).unwrap(), Divergence::Finite(0.0));
        let kl = kl_divergence(&p, &q).unwrap().finite().unwrap();
        let expected = 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln();
        assert!((kl - expected).abs() < 1e-15);
        assert!((kl - 0.130812).abs() < 1e-6);
        let d = p.domain();
        let point = JointTable::new(d, vec![1.0, 0.0]).unwrap();
        assert!((kl_divergence(&point, &q).unwrap().finite().unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(kl_divergence(&q, &point).unwrap(), Divergence::Infinite);
    }

    #[test]
    fn cross_entropy_examples() {
        let (p, q) = pair();
        assert!((cross_entropy(&p, &q).unwrap().to_real() - 2f64.ln()).abs() < 1e-15);
        let d4 = Domain::with_default_budget(4, 1).unwrap();
        let u = JointTable::<f64>::uniform(d4);
        assert!((cross_entropy(&u, &u).unwrap().to_real() - 4f64.ln()).abs() < 1e-15);
        let gap =
            cross_entropy(&p, &q).unwrap().to_real() - cross_entropy(&p, &p).unwrap().to_real();
        assert!((gap - kl_divergence(&p, &q).unwrap().to_real()).abs() < 1e-12);
        assert!((cross_entropy(&p, &p).unwrap().to_real() - entropy(&p)).abs() < 1e-15);
    }

    #[test]
    fn tvd_examples() {
        let (p, q) = pair();
        assert_eq!(total_variation(&p, &p).unwrap(), 0.0);
        assert!((total_variation(&p, &q).unwrap() - 0.25).abs() < 1e-15);
        let d = p.domain();
        let a = JointTable::new(d, vec![1.0, 0.0]).unwrap();
        let b = JointTable::new(d, vec![0.0, 1.0]).unwrap();
        assert_eq!(total_variation(&a, &b).unwrap(), 1.0);
        let other = JointTable::<f64>::uniform(Domain::with_default_budget(3, 1).unwrap());
        assert!(total_variation(&p, &other).is_err());
    }

    #[test]
    fn exhaustive_over_indicators_is_tvd() {
        let (p, q) = pair();
        let fam = indicator_family::<f64>(p.domain()).unwrap();
        assert_eq!(fam.len(), 4);
        let (d, _) = distinguishability_exhaustive(&q, &p, &fam).unwrap();
        assert!((d - 0.25).abs() < 1e-15);
        let (d, _) = distinguishability_exhaustive(&p, &p, &fam).unwrap();
        assert_eq!(d, 0.0);
        let half = [ConstantDistinguisher::new(0.5)];
        let (d, _) = distinguishability_exhaustive(&q, &p, &half).unwrap();
        assert_eq!(d, 0.0);
        let empty: [ConstantDistinguisher<f64>; 0] = [];
        assert!(distinguishability_exhaustive(&q, &p, &empty).is_err());
        assert!(indicator_family::<f64>(Domain::with_default_budget(2, 4).unwrap()).is_err());
    }

    #[test]
    fn finite_differences() {
        let g = finite_diff_gradient(|t: &[f64]| t.iter().map(|x| x * x).sum(), &[0.0, 0.0], 1e-5);
        assert!(g.iter().all(|v| v.abs() < 1e-12));
        for h in [1e-1, 1e-3, 1e-5] {
            let g =
                finite_diff_gradient(|t: &[f64]| 3.0 * t[0] - 2.0 * t[1] + 1.0, &[0.7, -0.2], h);
            assert!((g[0] - 3.0).abs() < 1e-9 && (g[1] + 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn csv_round_trip() {
        let v = Vocabulary::from_tokens("⊥", ["a", "b"]).unwrap();
        let d = Domain::with_default_budget(3, 2).unwrap();
        let w: Vec<f64> = (0..9).map(|i| (i + 1) as f64).collect();
        let t = JointTable::from_weights(d, w).unwrap();
        let csv = t.to_csv(Some(&v));
        assert!(csv.starts_with("sequence,prob\n⊥ ⊥,"));
        let back = JointTable::<f64>::from_csv(&csv, &v, 2, 100).unwrap();
        for (a, b) in t.probs().iter().zip(back.probs()) {
            assert!((a - b).abs() < 1e-17);
        }
    }
}
