//! Whole-sequence and step-wise distinguishers and their advantage estimators.
//!
//! A [`Distinguisher`] scores complete sequences; a [`StepDistinguisher`]
//! scores prefixes of any length `1..=N` and is what the boosting loop
//! consumes. Both must return values in `[0, 1]`; larger means "looks generated".

mod advantage;
mod log_ratio;

use std::sync::Arc;

use crate::domain::{Domain, PrefixIndex, DEFAULT_ENUMERATION_BUDGET};
use crate::models::{context_key, parse_real, parse_usize, BOS};
use crate::scalar::Real;
use crate::vocab::TokenId;
use crate::{Error, Result};

pub use advantage::{
    accuracy_from_advantage, advantage_exact, bayes_optimal_distinguisher, generalized_advantage,
    minimal_ratio_bound, training_advantage, AdvantageEstimate, Estimator, EstimatorKind,
    MIN_RATIO_BOUND,
};
pub use log_ratio::{log_ratio_distinguisher, LogRatioDistinguisher};

/// `f: X → [0, 1]` on complete sequences.
pub trait Distinguisher<T: Real>: Send + Sync {
    fn evaluate(&self, x: &[TokenId]) -> Result<T>;
    fn label(&self) -> String;
}

/// `g: ⋃_{j=1..N} V^j → [0, 1]` on prefixes.
pub trait StepDistinguisher<T: Real>: Send + Sync {
    fn evaluate(&self, prefix: &[TokenId]) -> T;
    fn label(&self) -> String;
}

macro_rules! forward_pointer_impls {
    ($($ptr:ty),*) => {$(
        impl<T: Real, D: Distinguisher<T> + ?Sized> Distinguisher<T> for $ptr {
            fn evaluate(&self, x: &[TokenId]) -> Result<T> {
                (**self).evaluate(x)
            }
            fn label(&self) -> String {
                (**self).label()
            }
        }
    )*};
}
forward_pointer_impls!(&D, Box<D>, Arc<D>);

macro_rules! forward_step_impls {
    ($($ptr:ty),*) => {$(
        impl<T: Real, G: StepDistinguisher<T> + ?Sized> StepDistinguisher<T> for $ptr {
            fn evaluate(&self, prefix: &[TokenId]) -> T {
                (**self).evaluate(prefix)
            }
            fn label(&self) -> String {
                (**self).label()
            }
        }
    )*};
}
forward_step_impls!(&G, Box<G>, Arc<G>);

pub type SharedStep<T> = Arc<dyn StepDistinguisher<T>>;

fn check_unit<T: Real>(v: T, what: &str) -> Result<T> {
    if v >= T::zero() && v <= T::one() {
        Ok(v)
    } else {
        Err(Error::OutOfRange {
            value: v.as_f64(),
            what: what.to_owned(),
        })
    }
}

/// `f ≡ c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDistinguisher<T>(T);

impl<T: Real> ConstantDistinguisher<T> {
    /// # Panics
    /// If `c` is outside `[0, 1]`.
    pub fn new(c: T) -> Self {
        assert!(
            c >= T::zero() && c <= T::one(),
            "constant distinguisher outside [0, 1]"
        );
        ConstantDistinguisher(c)
    }
}

impl<T: Real> Distinguisher<T> for ConstantDistinguisher<T> {
    fn evaluate(&self, _: &[TokenId]) -> Result<T> {
        Ok(self.0)
    }
    fn label(&self) -> String {
        format!("constant {}", self.0)
    }
}

impl<T: Real> StepDistinguisher<T> for ConstantDistinguisher<T> {
    fn evaluate(&self, _: &[TokenId]) -> T {
        self.0
    }
    fn label(&self) -> String {
        format!("constant {}", self.0)
    }
}

/// `1 − f`, which has exactly the opposite advantage.
#[derive(Debug, Clone)]
pub struct Flipped<D>(pub D);

impl<T: Real, D: Distinguisher<T>> Distinguisher<T> for Flipped<D> {
    fn evaluate(&self, x: &[TokenId]) -> Result<T> {
        Ok(T::one() - self.0.evaluate(x)?)
    }
    fn label(&self) -> String {
        format!("flip {}", self.0.label())
    }
}

impl<T: Real, G: StepDistinguisher<T>> StepDistinguisher<T> for Flipped<G> {
    fn evaluate(&self, prefix: &[TokenId]) -> T {
        T::one() - self.0.evaluate(prefix)
    }
    fn label(&self) -> String {
        format!("flip {}", self.0.label())
    }
}

/// Wraps a closure as a whole-sequence distinguisher. Range is checked on every call.
pub struct FnDistinguisher<F> {
    label: String,
    f: F,
}

impl<F> FnDistinguisher<F> {
    pub fn new(label: impl Into<String>, f: F) -> Self {
        FnDistinguisher {
            label: label.into(),
            f,
        }
    }
}

impl<T: Real, F: Fn(&[TokenId]) -> T + Send + Sync> Distinguisher<T> for FnDistinguisher<F> {
    fn evaluate(&self, x: &[TokenId]) -> Result<T> {
        check_unit((self.f)(x), &self.label)
    }
    fn label(&self) -> String {
        self.label.clone()
    }
}

/// Wraps a closure as a step-wise distinguisher.
pub struct FnStepDistinguisher<F> {
    label: String,
    f: F,
}

impl<F> FnStepDistinguisher<F> {
    pub fn new(label: impl Into<String>, f: F) -> Self {
        FnStepDistinguisher {
            label: label.into(),
            f,
        }
    }
}

impl<T: Real, F: Fn(&[TokenId]) -> T + Send + Sync> StepDistinguisher<T>
    for FnStepDistinguisher<F>
{
    fn evaluate(&self, prefix: &[TokenId]) -> T {
        (self.f)(prefix)
    }
    fn label(&self) -> String {
        self.label.clone()
    }
}

/// Explicit value per domain sequence.
#[derive(Debug, Clone)]
pub struct TableDistinguisher<T> {
    domain: Domain,
    values: Vec<T>,
    label: String,
}

impl<T: Real> TableDistinguisher<T> {
    pub fn new(domain: Domain, values: Vec<T>, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if values.len() != domain.size() {
            return Err(Error::DomainMismatch(format!(
                "{} values for a domain of {}",
                values.len(),
                domain.size()
            )));
        }
        for &v in &values {
            check_unit(v, &label)?;
        }
        Ok(TableDistinguisher {
            domain,
            values,
            label,
        })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

impl<T: Real> Distinguisher<T> for TableDistinguisher<T> {
    fn evaluate(&self, x: &[TokenId]) -> Result<T> {
        self.domain
            .index_of(x)
            .map(|i| self.values[i])
            .ok_or_else(|| {
                Error::DomainMismatch(format!("sequence {x:?} outside distinguisher domain"))
            })
    }
    fn label(&self) -> String {
        self.label.clone()
    }
}

/// `g(prefix) = 1{last token = w}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenIndicator {
    pub token: TokenId,
}

impl<T: Real> StepDistinguisher<T> for TokenIndicator {
    fn evaluate(&self, prefix: &[TokenId]) -> T {
        if prefix.last() == Some(&self.token) {
            T::one()
        } else {
            T::zero()
        }
    }
    fn label(&self) -> String {
        format!("token-indicator {}", self.token)
    }
}

/// `f(x) = count(w in x) / N`, the normalized unigram count feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenFrequency {
    pub token: TokenId,
}

impl<T: Real> Distinguisher<T> for TokenFrequency {
    fn evaluate(&self, x: &[TokenId]) -> Result<T> {
        let c = x.iter().filter(|&&t| t == self.token).count();
        Ok(T::from_count(c) / T::from_count(x.len().max(1)))
    }
    fn label(&self) -> String {
        format!("token-frequency {}", self.token)
    }
}

/// `g(prefix) = 1{prefix ends in w and the order-k context before w is ctx}`,
/// with contexts as produced by [`context_key`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramIndicator {
    pub order: usize,
    pub context: Vec<TokenId>,
    pub token: TokenId,
}

impl<T: Real> StepDistinguisher<T> for NGramIndicator {
    fn evaluate(&self, prefix: &[TokenId]) -> T {
        match prefix.split_last() {
            Some((&w, head))
                if w == self.token && context_key(head, self.order) == self.context =>
            {
                T::one()
            }
            _ => T::zero(),
        }
    }
    fn label(&self) -> String {
        format!(
            "ngram-indicator {} {} {}",
            self.order,
            format_ids(&self.context),
            self.token
        )
    }
}

fn format_ids(ids: &[TokenId]) -> String {
    if ids.is_empty() {
        return "-".into();
    }
    ids.iter()
        .map(|&t| if t == BOS { "^".into() } else { t.to_string() })
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_ids(s: &str) -> Result<Vec<TokenId>> {
    if s == "-" {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| match t {
            "^" => Ok(BOS),
            _ => t.parse().map_err(|_| Error::Parse(format!("bad id {t:?}"))),
        })
        .collect()
}

/// Explicit value for every prefix of length `1..=N`.
#[derive(Debug, Clone)]
pub struct StepTable<T> {
    index: PrefixIndex,
    values: Vec<T>,
    label: String,
}

impl<T: Real> StepTable<T> {
    pub fn from_fn<F>(
        vocab_size: usize,
        seq_len: usize,
        label: impl Into<String>,
        mut g: F,
    ) -> Result<Self>
    where
        F: FnMut(&[TokenId]) -> T,
    {
        let label = label.into();
        if vocab_size == 0 || seq_len == 0 {
            return Err(Error::InvalidParameter(
                "step table needs n >= 1 and N >= 1".into(),
            ));
        }
        let index = PrefixIndex::new(vocab_size, 1, seq_len, DEFAULT_ENUMERATION_BUDGET)?;
        let values = index
            .prefixes()
            .map(|p| check_unit(g(&p), &label))
            .collect::<Result<Vec<_>>>()?;
        Ok(StepTable {
            index,
            values,
            label,
        })
    }
}

impl<T: Real> StepDistinguisher<T> for StepTable<T> {
    fn evaluate(&self, prefix: &[TokenId]) -> T {
        self.values[self.index.index(prefix).expect("prefix within step table")]
    }
    fn label(&self) -> String {
        format!("table {}", self.label)
    }
}

/// Rebuilds a step distinguisher from its label. Only the closed-form kinds
/// (`constant`, `token-indicator`, `ngram-indicator`, and `flip` of those)
/// can be reconstructed.
pub fn parse_step_distinguisher<T: Real>(spec: &str) -> Result<SharedStep<T>> {
    let spec = spec.trim();
    if let Some(inner) = spec.strip_prefix("flip ") {
        let g = parse_step_distinguisher::<T>(inner)?;
        return Ok(Arc::new(Flipped(g)));
    }
    let mut f = spec.split_whitespace();
    match f.next() {
        Some("constant") => {
            let c: T = parse_real(
                f.next()
                    .ok_or_else(|| Error::Parse("constant needs a value".into()))?,
            )?;
            check_unit(c, "constant")?;
            Ok(Arc::new(ConstantDistinguisher::new(c)))
        }
        Some("token-indicator") => {
            let token = parse_usize(f.next(), "token id")?;
            Ok(Arc::new(TokenIndicator { token }))
        }
        Some("ngram-indicator") => {
            let order = parse_usize(f.next(), "order")?;
            let context = parse_ids(
                f.next()
                    .ok_or_else(|| Error::Parse("missing context".into()))?,
            )?;
            let token = parse_usize(f.next(), "token id")?;
            Ok(Arc::new(NGramIndicator {
                order,
                context,
                token,
            }))
        }
        _ => Err(Error::Parse(format!(
            "cannot rebuild distinguisher from {spec:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_labels_round_trip() {
        let gs: Vec<SharedStep<f64>> = vec![
            Arc::new(TokenIndicator { token: 3 }),
            Arc::new(Flipped(TokenIndicator { token: 1 })),
            Arc::new(NGramIndicator {
                order: 3,
                context: vec![BOS, 2],
                token: 1,
            }),
            Arc::new(NGramIndicator {
                order: 1,
                context: vec![],
                token: 1,
            }),
            Arc::new(ConstantDistinguisher::new(0.5)),
        ];
        let probes: &[&[TokenId]] = &[&[1], &[3], &[2, 1], &[0, 2, 1], &[1, 1]];
        for g in gs {
            let back = parse_step_distinguisher::<f64>(&g.label()).unwrap();
            assert_eq!(back.label(), g.label());
            for p in probes {
                assert_eq!(back.evaluate(p), g.evaluate(p));
            }
        }
        assert!(parse_step_distinguisher::<f64>("table x").is_err());
        assert!(parse_step_distinguisher::<f64>("constant 1.5").is_err());
    }

    #[test]
    fn ngram_indicator_uses_start_context() {
        let g = NGramIndicator {
            order: 2,
            context: vec![BOS],
            token: 4,
        };
        assert_eq!(StepDistinguisher::<f64>::evaluate(&g, &[4]), 1.0);
        assert_eq!(StepDistinguisher::<f64>::evaluate(&g, &[1, 4]), 0.0);
        let g = NGramIndicator {
            order: 2,
            context: vec![1],
            token: 4,
        };
        assert_eq!(StepDistinguisher::<f64>::evaluate(&g, &[0, 1, 4]), 1.0);
    }

    #[test]
    fn table_and_fn_range_checks() {
        let d = Domain::with_default_budget(2, 1).unwrap();
        assert!(TableDistinguisher::new(d, vec![0.0f64, 1.2], "bad").is_err());
        let f = FnDistinguisher::new("neg", |_: &[TokenId]| -0.1f64);
        assert!(matches!(f.evaluate(&[0]), Err(Error::OutOfRange { .. })));
        assert!(StepTable::from_fn(2, 2, "bad", |_| 2.0f64).is_err());
    }

    #[test]
    fn token_frequency_is_normalized_count() {
        let f = TokenFrequency { token: 2 };
        assert_eq!(
            Distinguisher::<f64>::evaluate(&f, &[2, 1, 2, 0]).unwrap(),
            0.5
        );
    }
}
