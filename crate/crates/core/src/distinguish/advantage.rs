use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::exact::{enumerate_joint, JointTable};
use crate::math::ordered_sum;
use crate::models::{check_compatible, sample_with, SequentialModel};
use crate::scalar::Real;
use crate::{Error, Result};

use super::{check_unit, Distinguisher, StepDistinguisher, TableDistinguisher};

/// Floor applied to ratio bounds so that `log C > 0`.
pub const MIN_RATIO_BOUND: f64 = 1.0 + 1e-12;

/// How `E_q[f]` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Enumerate all `n^N` sequences, refusing domains above `budget`.
    Exact { budget: usize },
    /// Average over `samples` ancestral draws from `q`.
    MonteCarlo { samples: usize, seed: u64 },
}

/// Which estimator produced an [`AdvantageEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    ExactEnumeration,
    MonteCarlo { samples: usize, seed: u64 },
}

impl From<Estimator> for EstimatorKind {
    fn from(e: Estimator) -> Self {
        match e {
            Estimator::Exact { .. } => EstimatorKind::ExactEnumeration,
            Estimator::MonteCarlo { samples, seed } => EstimatorKind::MonteCarlo { samples, seed },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageEstimate<T> {
    pub value: T,
    pub kind: EstimatorKind,
    /// Per-position terms for the step-wise advantage (empty for whole sequences).
    pub per_position: Vec<T>,
}

/// `α(f) = Σ_x f(x)(q(x) − p(x))`.
pub fn advantage_exact<T: Real, D: Distinguisher<T> + ?Sized>(
    f: &D,
    p: &JointTable<T>,
    q: &JointTable<T>,
) -> Result<T> {
    if p.domain() != q.domain() {
        return Err(Error::DomainMismatch(
            "p and q are over different domains".into(),
        ));
    }
    let mut terms = Vec::with_capacity(p.probs().len());
    for ((x, &pp), &qq) in p.domain().iter().zip(p.probs()).zip(q.probs()) {
        let v = check_unit(f.evaluate(&x)?, &f.label())?;
        terms.push(v * (qq - pp));
    }
    Ok(ordered_sum(terms))
}

/// Expected accuracy `1/2 + α/2` of the randomized classifier that says
/// "generated" with probability `f(x)`.
pub fn accuracy_from_advantage<T: Real>(alpha: T) -> Result<T> {
    if !(alpha >= -T::one() && alpha <= T::one()) {
        return Err(Error::OutOfRange {
            value: alpha.as_f64(),
            what: "advantage".into(),
        });
    }
    let half = T::lit(0.5);
    Ok(half + half * alpha)
}

/// Training advantage `α̂(f) = E_q[f] − Ê_S[f]`. Only the sample is used; no
/// access to the true distribution.
pub fn training_advantage<T, D, M>(
    f: &D,
    corpus: &Corpus,
    q: &M,
    estimator: Estimator,
) -> Result<AdvantageEstimate<T>>
where
    T: Real,
    D: Distinguisher<T> + ?Sized,
    M: SequentialModel<T> + ?Sized,
{
    check_compatible(q, corpus)?;
    let mut empirical = Vec::with_capacity(corpus.len());
    for s in corpus.sequences() {
        empirical.push(check_unit(f.evaluate(s.ids())?, &f.label())?);
    }
    let empirical = ordered_sum(empirical) / T::from_count(corpus.len());
    let model_mean = match estimator {
        Estimator::Exact { budget } => {
            let table = enumerate_joint(q, budget)?;
            let mut terms = Vec::with_capacity(table.probs().len());
            for (x, &p) in table.domain().iter().zip(table.probs()) {
                terms.push(p * check_unit(f.evaluate(&x)?, &f.label())?);
            }
            ordered_sum(terms)
        }
        Estimator::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidParameter(
                    "monte-carlo estimator needs samples >= 1".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut acc = T::zero();
            for _ in 0..samples {
                let x = sample_with(q, &mut rng);
                acc += check_unit(f.evaluate(&x)?, &f.label())?;
            }
            acc / T::from_count(samples)
        }
    };
    Ok(AdvantageEstimate {
        value: model_mean - empirical,
        kind: estimator.into(),
        per_position: Vec::new(),
    })
}

/// Generalized training advantage
/// `β̂(g) = (1/N) Σ_j Ê_S[ E_{w∼q(·|x_{<j})} g(x_{<j}, w) − g(x_{≤j}) ]`.
/// The inner expectation sums exactly over the vocabulary.
pub fn generalized_advantage<T, G, M>(g: &G, corpus: &Corpus, q: &M) -> Result<AdvantageEstimate<T>>
where
    T: Real,
    G: StepDistinguisher<T> + ?Sized,
    M: SequentialModel<T> + ?Sized,
{
    check_compatible(q, corpus)?;
    let n_len = corpus.seq_len();
    let n = q.vocab_size();
    let label = || g.label();
    let mut sums = vec![T::zero(); n_len];
    let mut buf = Vec::with_capacity(n_len);
    for s in corpus.sequences() {
        let x = s.ids();
        for j in 0..n_len {
            let probs = q.next_token_dist(&x[..j]);
            buf.clear();
            buf.extend_from_slice(&x[..j]);
            buf.push(0);
            let mut expected = T::zero();
            for (w, &p) in probs.iter().enumerate().take(n) {
                buf[j] = w;
                let v = check_unit(g.evaluate(&buf), &label())?;
                if p > T::zero() {
                    expected += p * v;
                }
            }
            let observed = check_unit(g.evaluate(&x[..=j]), &label())?;
            sums[j] += expected - observed;
        }
    }
    let m = T::from_count(corpus.len());
    let per_position: Vec<T> = sums.into_iter().map(|s| s / m).collect();
    let value = ordered_sum(per_position.iter().copied()) / T::from_count(n_len);
    Ok(AdvantageEstimate {
        value,
        kind: EstimatorKind::ExactEnumeration,
        per_position,
    })
}

/// `f(x) = 1{q(x) > p(x)}`; its advantage equals the total variation distance.
pub fn bayes_optimal_distinguisher<T: Real>(
    p: &JointTable<T>,
    q: &JointTable<T>,
) -> Result<TableDistinguisher<T>> {
    if p.domain() != q.domain() {
        return Err(Error::DomainMismatch(
            "p and q are over different domains".into(),
        ));
    }
    let values = p
        .probs()
        .iter()
        .zip(q.probs())
        .map(|(&a, &b)| if b > a { T::one() } else { T::zero() })
        .collect();
    TableDistinguisher::new(p.domain(), values, "bayes-optimal")
}

/// Smallest `C` with `q/C ≤ q′ ≤ C q` everywhere, floored at [`MIN_RATIO_BOUND`].
pub fn minimal_ratio_bound<T: Real>(q: &JointTable<T>, q_prime: &JointTable<T>) -> Result<T> {
    if q.domain() != q_prime.domain() {
        return Err(Error::DomainMismatch(
            "q and q′ are over different domains".into(),
        ));
    }
    let mut worst = T::zero();
    for (i, (&a, &b)) in q.probs().iter().zip(q_prime.probs()).enumerate() {
        match (a > T::zero(), b > T::zero()) {
            (true, true) => worst = worst.max((a.ln() - b.ln()).abs()),
            (false, false) => {}
            _ => {
                return Err(Error::SupportsDiffer(format!(
                    "sequence {:?}",
                    q.domain().sequence_at(i)
                )))
            }
        }
    }
    Ok(worst.exp().max(T::lit(MIN_RATIO_BOUND)))
}
