use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use super::{iteration_bound, Oracle, ReweightedModel};
use crate::corpus::Corpus;
use crate::distinguish::generalized_advantage;
use crate::math::fmt_real;
use crate::models::{check_compatible, log_loss, SequentialModel};
use crate::scalar::Real;
use crate::{Error, Result};

pub const TRACE_CSV_HEADER: &str = "iter,b_t,log_loss,oracle_ms,eval_ms";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostConfig<T> {
    /// Stop once the oracle's best generalized advantage drops below this.
    pub epsilon: T,
    /// Cap on reweighting steps; `None` means ten times the iteration bound.
    pub max_iters: Option<usize>,
    /// Cache conditionals of corpus prefixes.
    pub memoize: bool,
    /// Fill the timing columns with wall-clock measurements. Off by default so
    /// that traces are reproducible byte for byte.
    pub record_timings: bool,
}

impl<T: Real> BoostConfig<T> {
    pub fn new(epsilon: T) -> Self {
        BoostConfig {
            epsilon,
            max_iters: None,
            memoize: true,
            record_timings: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > T::zero()) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ε must be finite and > 0 (got {})",
                self.epsilon
            )));
        }
        if self.max_iters == Some(0) {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The oracle's distinguisher had advantage below ε.
    BelowThreshold,
    /// The reweighting cap was reached first.
    IterationCap,
}

/// One oracle call. `log_loss` is the corpus loss of the model the oracle was
/// shown; if `b_t ≥ ε` the next record's model is this one reweighted by
/// `(b_t, g_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub b_t: f64,
    pub log_loss: f64,
    pub oracle_ms: f64,
    pub eval_ms: f64,
    pub distinguisher: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostTrace {
    pub records: Vec<IterationRecord>,
    pub initial_log_loss: f64,
    pub epsilon: f64,
    pub seq_len: usize,
    pub iteration_bound: usize,
    pub cap: usize,
    pub oracle: String,
    pub termination: Termination,
}

impl BoostTrace {
    /// Number of reweighting steps applied.
    pub fn reweightings(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.b_t >= self.epsilon)
            .count()
    }

    pub fn final_log_loss(&self) -> f64 {
        self.records
            .last()
            .map_or(self.initial_log_loss, |r| r.log_loss)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.iter,
                fmt_real(r.b_t),
                fmt_real(r.log_loss),
                fmt_real(r.oracle_ms),
                fmt_real(r.eval_ms)
            );
        }
        out
    }
}

fn millis(start: Instant, on: bool) -> f64 {
    if on {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    }
}

/// Repeatedly asks `oracle` for a step distinguisher `g_t`, measures
/// `b_t = β̂(g_t)` on the current model, and stops when `b_t < ε`; otherwise
/// the model is reweighted by `(b_t, g_t)`.
///
/// Each reweighting lowers the corpus log-loss by at least `N b_t² / 2`, so
/// at most [`iteration_bound`] of them can happen before the loss would go
/// negative.
pub fn run_boost<T: Real>(
    q0: Arc<dyn SequentialModel<T>>,
    corpus: &Corpus,
    oracle: &mut dyn Oracle<T>,
    config: &BoostConfig<T>,
) -> Result<(ReweightedModel<T>, BoostTrace)> {
    config.validate()?;
    check_compatible(q0.as_ref(), corpus)?;
    let initial = match log_loss(q0.as_ref(), corpus) {
        Ok(r) => r.log_loss,
        Err(Error::ImpossibleSequence { index }) => {
            return Err(Error::InfiniteInitialLoss { index })
        }
        Err(e) => return Err(e),
    };
    let bound = iteration_bound(initial, corpus.seq_len(), config.epsilon)?;
    let cap = config.max_iters.unwrap_or(bound.saturating_mul(10).max(1));

    let mut model = ReweightedModel::new(q0);
    if config.memoize {
        model = model.with_memo(corpus);
    }
    let mut trace = BoostTrace {
        records: Vec::new(),
        initial_log_loss: initial.as_f64(),
        epsilon: config.epsilon.as_f64(),
        seq_len: corpus.seq_len(),
        iteration_bound: bound,
        cap,
        oracle: oracle.name(),
        termination: Termination::BelowThreshold,
    };
    let mut loss = initial;
    for t in 0..=cap {
        let shown: Arc<dyn SequentialModel<T>> = Arc::new(model.clone());
        let start = Instant::now();
        let g = oracle.propose(&shown, corpus)?;
        let oracle_ms = millis(start, config.record_timings);

        let start = Instant::now();
        let b = generalized_advantage(&g, corpus, &model)?.value;
        if b.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "advantage of {} is NaN",
                g.label()
            )));
        }
        let mut record = IterationRecord {
            iter: t,
            b_t: b.as_f64(),
            log_loss: loss.as_f64(),
            oracle_ms,
            eval_ms: 0.0,
            distinguisher: g.label(),
        };
        if b < config.epsilon {
            record.eval_ms = millis(start, config.record_timings);
            trace.records.push(record);
            return Ok((model, trace));
        }
        if t == cap {
            record.eval_ms = millis(start, config.record_timings);
            trace.records.push(record);
            trace.termination = Termination::IterationCap;
            return Err(Error::IterationCap {
                cap,
                trace: Box::new(trace),
            });
        }
        model = model.reweighted(b, g)?;
        loss = log_loss(&model, corpus)?.log_loss;
        record.eval_ms = millis(start, config.record_timings);
        trace.records.push(record);
    }
    unreachable!("loop returns on its last iteration")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boost::TokenIndicatorOracle;
    use crate::distinguish::{ConstantDistinguisher, SharedStep};
    use crate::exact::{enumerate_joint, total_variation, JointTable};
    use crate::models::TabularModel;
    use crate::Domain;

    fn unigram_corpus() -> Corpus {
        Corpus::from_ids(vec![vec![0], vec![0], vec![0], vec![1]]).unwrap()
    }

    #[test]
    fn constant_oracle_stops_immediately() {
        let q0: Arc<dyn SequentialModel<f64>> = Arc::new(TabularModel::uniform(2, 1).unwrap());
        let mut calls = 0;
        let mut oracle =
            |_: &Arc<dyn SequentialModel<f64>>, _: &Corpus| -> Result<SharedStep<f64>> {
                calls += 1;
                Ok(Arc::new(ConstantDistinguisher::new(0.5)))
            };
        let (model, trace) =
            run_boost(q0, &unigram_corpus(), &mut oracle, &BoostConfig::new(0.01)).unwrap();
        assert_eq!(calls, 1);
        assert!(model.factors().is_empty());
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.reweightings(), 0);
        assert_eq!(trace.termination, Termination::BelowThreshold);
    }

    #[test]
    fn unigram_convergence() {
        let q0: Arc<dyn SequentialModel<f64>> = Arc::new(TabularModel::uniform(2, 1).unwrap());
        let corpus = unigram_corpus();
        let mut oracle = TokenIndicatorOracle::new();
        let (model, trace) = run_boost(q0, &corpus, &mut oracle, &BoostConfig::new(0.01)).unwrap();
        let joint = enumerate_joint(&model, 10).unwrap();
        let mle =
            JointTable::new(Domain::with_default_budget(2, 1).unwrap(), vec![0.75, 0.25]).unwrap();
        assert!(total_variation(&joint, &mle).unwrap() <= 0.02);
        assert!(trace.reweightings() <= iteration_bound(2f64.ln(), 1, 0.01).unwrap());
        for w in trace.records.windows(2) {
            assert!(w[1].log_loss < w[0].log_loss);
            assert!(w[1].log_loss <= w[0].log_loss - w[0].b_t * w[0].b_t / 2.0 + 1e-9);
            assert!(w[0].b_t >= 0.01);
        }
        assert!(trace.records.last().unwrap().b_t < 0.01);
        assert!(trace
            .to_csv()
            .starts_with("iter,b_t,log_loss,oracle_ms,eval_ms\n0,"));
    }

    #[test]
    fn cap_and_config_errors() {
        let q0: Arc<dyn SequentialModel<f64>> = Arc::new(TabularModel::uniform(2, 1).unwrap());
        let corpus = unigram_corpus();
        let mut cfg = BoostConfig::new(1e-6);
        cfg.max_iters = Some(2);
        match run_boost(q0.clone(), &corpus, &mut TokenIndicatorOracle::new(), &cfg) {
            Err(Error::IterationCap { cap, trace }) => {
                assert_eq!(cap, 2);
                assert_eq!(trace.records.len(), 3);
                assert_eq!(trace.termination, Termination::IterationCap);
            }
            other => panic!("expected cap error, got {other:?}"),
        }
        cfg.max_iters = Some(0);
        assert!(run_boost(q0.clone(), &corpus, &mut TokenIndicatorOracle::new(), &cfg).is_err());
        assert!(run_boost(
            q0,
            &corpus,
            &mut TokenIndicatorOracle::new(),
            &BoostConfig::new(0.0)
        )
        .is_err());

        let point: Arc<dyn SequentialModel<f64>> =
            Arc::new(TabularModel::point_mass(2, &[0]).unwrap());
        let err = run_boost(
            point,
            &corpus,
            &mut TokenIndicatorOracle::new(),
            &BoostConfig::new(0.1),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InfiniteInitialLoss { index: 3 }));
    }
}
