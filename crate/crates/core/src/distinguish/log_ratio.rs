use std::marker::PhantomData;

use crate::models::{sequence_log_prob, LogProb, SequentialModel};
use crate::scalar::Real;
use crate::vocab::TokenId;
use crate::{Error, Result};

use super::Distinguisher;

/// Slack on `|log q − log q′| ≤ log C` before a ratio violation is reported.
const RATIO_SLACK: f64 = 1e-9;

/// `f(x) = log(C q(x) / q′(x)) / (2 log C)`, built from chain-rule
/// log-probabilities of two sequential models.
pub struct LogRatioDistinguisher<T, Q, Q2> {
    q: Q,
    q_prime: Q2,
    log_c: T,
    _t: PhantomData<fn() -> T>,
}

/// Requires `C > 1` and `q/C ≤ q′ ≤ C q`; the ratio is checked on every
/// evaluation. Sequences impossible under both models score `1/2`.
pub fn log_ratio_distinguisher<T, Q, Q2>(
    q: Q,
    q_prime: Q2,
    c: T,
) -> Result<LogRatioDistinguisher<T, Q, Q2>>
where
    T: Real,
    Q: SequentialModel<T>,
    Q2: SequentialModel<T>,
{
    if !(c > T::one()) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "ratio bound C must be finite and > 1 (got {c})"
        )));
    }
    if q.vocab_size() != q_prime.vocab_size() || q.seq_len() != q_prime.seq_len() {
        return Err(Error::DomainMismatch(
            "q and q′ differ in vocabulary or length".into(),
        ));
    }
    Ok(LogRatioDistinguisher {
        q,
        q_prime,
        log_c: c.ln(),
        _t: PhantomData,
    })
}

impl<T: Real, Q, Q2> LogRatioDistinguisher<T, Q, Q2> {
    pub fn log_c(&self) -> T {
        self.log_c
    }
}

impl<T, Q, Q2> Distinguisher<T> for LogRatioDistinguisher<T, Q, Q2>
where
    T: Real,
    Q: SequentialModel<T>,
    Q2: SequentialModel<T>,
{
    fn evaluate(&self, x: &[TokenId]) -> Result<T> {
        let r = match (
            sequence_log_prob(&self.q, x),
            sequence_log_prob(&self.q_prime, x),
        ) {
            (LogProb::Finite(a), LogProb::Finite(b)) => a - b,
            (LogProb::Impossible, LogProb::Impossible) => return Ok(T::lit(0.5)),
            _ => return Err(Error::SupportsDiffer(format!("sequence {x:?}"))),
        };
        if r.abs() > self.log_c + T::lit(RATIO_SLACK) {
            return Err(Error::RatioViolation {
                sequence: format!("{x:?}"),
            });
        }
        let f = (self.log_c + r) / (self.log_c + self.log_c);
        Ok(f.max(T::zero()).min(T::one()))
    }

    fn label(&self) -> String {
        format!("log-ratio C={}", self.log_c.exp())
    }
}
