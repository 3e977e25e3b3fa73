//! Seeded generators for random models, tables, distinguishers and corpora.
//! Used by the property suites in [`crate::checks`] and by tests.

use rand::Rng;

use crate::corpus::Corpus;
use crate::distinguish::{StepTable, TableDistinguisher};
use crate::domain::Domain;
use crate::exact::JointTable;
use crate::models::{sample_with, SequentialModel, TabularModel};
use crate::scalar::Real;
use crate::vocab::TokenId;
use crate::Result;

/// Draws a point of the probability simplex with exponential weights
/// (a flat Dirichlet). Each coordinate is zeroed with probability
/// `zero_prob`, keeping at least one positive entry.
pub fn simplex<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize, zero_prob: f64) -> Vec<T> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            -(1.0 - u).ln()
        })
        .collect();
    if zero_prob > 0.0 && n > 1 {
        let keep = rng.gen_range(0..n);
        for (i, x) in w.iter_mut().enumerate() {
            if i != keep && rng.gen_bool(zero_prob) {
                *x = 0.0;
            }
        }
    }
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| T::lit(x / s)).collect()
}

/// Same as [`simplex`], but with a fixed support mask.
pub fn simplex_on<T: Real, R: Rng + ?Sized>(rng: &mut R, support: &[bool]) -> Vec<T> {
    let w: Vec<f64> = support
        .iter()
        .map(|&on| {
            if on {
                -(1.0 - rng.gen::<f64>()).ln()
            } else {
                0.0
            }
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| T::lit(x / s)).collect()
}

/// Autoregressive model with an independent random conditional per prefix.
pub fn tabular<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    len: usize,
    zero_prob: f64,
) -> Result<TabularModel<T>> {
    TabularModel::from_fn(n, len, |_| simplex(rng, n, zero_prob))
}

/// Random joint distribution over `domain`.
pub fn joint<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    domain: Domain,
    zero_prob: f64,
) -> Result<JointTable<T>> {
    JointTable::new(domain, simplex(rng, domain.size(), zero_prob))
}

/// Two random joints sharing the same support.
pub fn joint_pair_shared_support<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    domain: Domain,
    zero_prob: f64,
) -> Result<(JointTable<T>, JointTable<T>)> {
    let keep = rng.gen_range(0..domain.size());
    let support: Vec<bool> = (0..domain.size())
        .map(|i| i == keep || !rng.gen_bool(zero_prob))
        .collect();
    Ok((
        JointTable::new(domain, simplex_on(rng, &support))?,
        JointTable::new(domain, simplex_on(rng, &support))?,
    ))
}

/// Whole-sequence distinguisher with uniform random values in `[0, 1]`.
pub fn table_distinguisher<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    domain: Domain,
) -> Result<TableDistinguisher<T>> {
    let values = (0..domain.size())
        .map(|_| T::lit(rng.gen::<f64>()))
        .collect();
    TableDistinguisher::new(domain, values, "random")
}

/// Step distinguisher with uniform random values on every prefix.
pub fn step_table<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    len: usize,
) -> Result<StepTable<T>> {
    StepTable::from_fn(n, len, "random", |_| T::lit(rng.gen::<f64>()))
}

/// `m` independent draws from `model`.
pub fn sample_corpus<T: Real, M: SequentialModel<T> + ?Sized, R: Rng + ?Sized>(
    model: &M,
    m: usize,
    rng: &mut R,
) -> Result<Corpus> {
    Corpus::from_ids((0..m).map(|_| sample_with(model, rng)).collect::<Vec<_>>())
}

/// `m` sequences of uniformly random tokens.
pub fn uniform_corpus<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    len: usize,
    m: usize,
) -> Result<Corpus> {
    Corpus::from_ids(
        (0..m)
            .map(|_| {
                (0..len)
                    .map(|_| rng.gen_range(0..n))
                    .collect::<Vec<TokenId>>()
            })
            .collect::<Vec<_>>(),
    )
}
