//! Randomized suites for the inequalities the crate relies on. Each suite
//! draws instances from a seeded generator, computes the slack of one
//! inequality per instance by brute force, and reports the smallest slack.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boost::{
    iteration_bound, reweight_stepwise, reweight_whole, run_boost, BoostConfig,
    TokenIndicatorOracle,
};
use crate::distinguish::{
    advantage_exact, bayes_optimal_distinguisher, generalized_advantage, log_ratio_distinguisher,
    minimal_ratio_bound, training_advantage, Distinguisher, Estimator, Flipped, SharedStep,
};
use crate::domain::{Domain, DEFAULT_ENUMERATION_BUDGET};
use crate::exact::{
    distinguishability_exhaustive, enumerate_joint, finite_diff_gradient, indicator_family,
    kl_divergence, total_variation, MAX_INDICATOR_DOMAIN,
};
use crate::models::{kl_gradient, log_loss, LogLinearModel, SequentialModel, TabularModel};
use crate::random;
use crate::Result;

pub const DEFAULT_SEED: u64 = 20_240_601;

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub name: String,
    pub instances: usize,
    pub violations: usize,
    /// Smallest `rhs − lhs` seen; negative beyond `tolerance` is a violation.
    pub min_slack: f64,
    pub tolerance: f64,
    pub first_violation: Option<String>,
}

impl PropertyReport {
    fn new(name: &str, tolerance: f64) -> Self {
        PropertyReport {
            name: name.into(),
            instances: 0,
            violations: 0,
            min_slack: f64::INFINITY,
            tolerance,
            first_violation: None,
        }
    }

    fn record(&mut self, slack: f64, describe: impl FnOnce() -> String) {
        self.instances += 1;
        if slack.is_nan() || slack < self.min_slack {
            self.min_slack = slack;
        }
        if !(slack >= -self.tolerance) {
            self.violations += 1;
            if self.first_violation.is_none() {
                self.first_violation = Some(describe());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && self.instances > 0
    }
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {}/{} violations, min slack {:.6e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.violations,
            self.instances,
            self.min_slack
        )?;
        if let Some(v) = &self.first_violation {
            write!(f, " (first: {v})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub seed: u64,
    /// Scale every per-prefix partition of the step-wise update by this factor.
    pub partition_fault: Option<f64>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            seed: DEFAULT_SEED,
            partition_fault: None,
        }
    }
}

fn suite_rng(seed: u64, suite: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(suite);
    rng
}

fn random_shape<R: Rng>(rng: &mut R, max_n: usize, max_len: usize, max_size: usize) -> Domain {
    loop {
        let n = rng.gen_range(2..=max_n);
        let len = rng.gen_range(1..=max_len);
        if let Ok(d) = Domain::new(n, len, max_size) {
            return d;
        }
    }
}

/// Whole-sequence reweighting by `a = α̂(f) ≥ 0` lowers log-loss by `a²/2`.
pub fn whole_reweighting_suite(seed: u64, instances: usize) -> Result<PropertyReport> {
    let mut rng = suite_rng(seed, 1);
    let mut rep = PropertyReport::new("whole_reweighting_bound", 1e-9);
    for i in 0..instances {
        let n = rng.gen_range(2..=8);
        let q = random::tabular::<f64, _>(&mut rng, n, 1, 0.0)?;
        let p = random::tabular::<f64, _>(&mut rng, n, 1, 0.3)?;
        let m = rng.gen_range(1..=30);
        let corpus = random::sample_corpus(&p, m, &mut rng)?;
        let domain = Domain::with_default_budget(n, 1)?;
        let f = random::table_distinguisher::<f64, _>(&mut rng, domain)?;
        let est = Estimator::Exact {
            budget: DEFAULT_ENUMERATION_BUDGET,
        };
        let a = training_advantage(&f, &corpus, &q, est)?.value;
        let (f, a): (Box<dyn Distinguisher<f64>>, f64) = if a < 0.0 {
            let flipped = Flipped(f);
            let a = training_advantage(&flipped, &corpus, &q, est)?.value;
            (Box::new(flipped), a)
        } else {
            (Box::new(f), a)
        };
        let a = a.max(0.0);
        let qj = enumerate_joint(&q, DEFAULT_ENUMERATION_BUDGET)?;
        let q2 = reweight_whole(&qj, &f, a)?;
        let before = qj.log_loss(&corpus)?.log_loss;
        let after = q2.log_loss(&corpus)?.log_loss;
        let slack = before - a * a / 2.0 - after;
        rep.record(slack, || {
            format!("instance {i}: n={n} a={a:.6e} L={before:.9} L'={after:.9}")
        });
    }
    Ok(rep)
}

/// Step-wise reweighting by `b = β̂(g) ≥ 0` lowers log-loss by `N b²/2`.
pub fn stepwise_reweighting_suite(
    seed: u64,
    instances: usize,
    partition_fault: Option<f64>,
) -> Result<PropertyReport> {
    let mut rng = suite_rng(seed, 3);
    let mut rep = PropertyReport::new("stepwise_reweighting_bound", 1e-9);
    for i in 0..instances {
        let n = rng.gen_range(2..=5);
        let len = rng.gen_range(1..=3);
        let q: Arc<dyn SequentialModel<f64>> =
            Arc::new(random::tabular::<f64, _>(&mut rng, n, len, 0.0)?);
        let p = random::tabular::<f64, _>(&mut rng, n, len, 0.3)?;
        let m = rng.gen_range(1..=20);
        let corpus = random::sample_corpus(&p, m, &mut rng)?;
        let table = random::step_table::<f64, _>(&mut rng, n, len)?;
        let mut g: SharedStep<f64> = Arc::new(table);
        let mut b = generalized_advantage(&g, &corpus, &q)?.value;
        if b < 0.0 {
            g = Arc::new(Flipped(g));
            b = generalized_advantage(&g, &corpus, &q)?.value;
        }
        let b = b.max(0.0);
        let mut q2 = reweight_stepwise(q.clone(), g, b)?;
        if let Some(s) = partition_fault {
            q2 = q2.with_partition_fault(s);
        }
        let before = log_loss(&q, &corpus)?.log_loss;
        let after = log_loss(&q2, &corpus)?.log_loss;
        let slack = before - len as f64 * b * b / 2.0 - after;
        rep.record(slack, || {
            format!("instance {i}: n={n} N={len} b={b:.6e} L={before:.9} L'={after:.9}")
        });
    }
    Ok(rep)
}

/// The log-ratio distinguisher maps into `[0, 1]` and has training advantage
/// at least `(L̂(q) − L̂(q′)) / (2 log C)`.
pub fn log_ratio_suite(seed: u64, instances: usize) -> Result<PropertyReport> {
    let mut rng = suite_rng(seed, 2);
    let mut rep = PropertyReport::new("log_ratio_advantage_bound", 1e-9);
    for i in 0..instances {
        let domain = random_shape(&mut rng, 4, 3, 64);
        let (qj, q2j) = random::joint_pair_shared_support::<f64, _>(&mut rng, domain, 0.2)?;
        let q = TabularModel::from_joint(&qj)?;
        let q2 = TabularModel::from_joint(&q2j)?;
        let m = rng.gen_range(1..=30);
        let corpus = random::sample_corpus(&q2, m, &mut rng)?;
        let c = minimal_ratio_bound(&qj, &q2j)?;
        let f = log_ratio_distinguisher(&q, &q2, c)?;
        let mut range_slack = f64::INFINITY;
        for x in domain.iter() {
            let v = f.evaluate(&x)?;
            range_slack = range_slack.min(v).min(1.0 - v);
        }
        let alpha = training_advantage(
            &f,
            &corpus,
            &q,
            Estimator::Exact {
                budget: DEFAULT_ENUMERATION_BUDGET,
            },
        )?
        .value;
        let lq = log_loss(&q, &corpus)?.log_loss;
        let lq2 = log_loss(&q2, &corpus)?.log_loss;
        let bound = (lq - lq2) / (2.0 * c.ln());
        let slack = (alpha - bound).min(range_slack);
        rep.record(slack, || {
            format!("instance {i}: C={c:.6e} α̂={alpha:.9} bound={bound:.9}")
        });
    }
    Ok(rep)
}

/// For log-linear models the KL gradient equals `E_q[f] − E_p[f]`; compared
/// against central differences with `h = 1e-5`. Slack is `1e-5` minus the
/// worst relative error.
pub fn kl_gradient_suite(seed: u64, instances: usize) -> Result<PropertyReport> {
    const H: f64 = 1e-5;
    const REL_TOL: f64 = 1e-5;
    let mut rng = suite_rng(seed, 4);
    let mut rep = PropertyReport::new("kl_gradient_equals_advantage", 0.0);
    for i in 0..instances {
        let domain = random_shape(&mut rng, 6, 4, 256);
        let dim = rng.gen_range(1..=4);
        let feats: Vec<Vec<f64>> = (0..domain.size())
            .map(|_| (0..dim).map(|_| rng.gen()).collect())
            .collect();
        let theta: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let p = random::joint::<f64, _>(&mut rng, domain, 0.2)?;
        let feature = |x: &[usize]| feats[domain.index_of(x).expect("in domain")].clone();
        let model = LogLinearModel::new(domain, dim, feature, theta.clone())?;
        let analytic = kl_gradient(&p, &model)?;
        let numeric = finite_diff_gradient(
            |t: &[f64]| {
                let q = model.with_theta(t.to_vec()).expect("finite θ").to_joint();
                kl_divergence(&p, &q).expect("same domain").to_real()
            },
            &theta,
            H,
        );
        let worst = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1e-300))
            .fold(0.0, f64::max);
        rep.record(REL_TOL - worst, || {
            format!("instance {i}: d={dim} analytic={analytic:?} numeric={numeric:?}")
        });
    }
    Ok(rep)
}

const BAYES_SHAPES: [(usize, usize); 8] = [
    (2, 1),
    (3, 1),
    (4, 1),
    (2, 2),
    (3, 2),
    (2, 3),
    (4, 2),
    (3, 3),
];

/// `α(1{q > p}) = TV(p, q)` exactly, and for domains of at most
/// [`MAX_INDICATOR_DOMAIN`] sequences no indicator does better.
pub fn bayes_suites(seed: u64, instances: usize) -> Result<(PropertyReport, PropertyReport)> {
    let mut rng = suite_rng(seed, 5);
    let mut bayes = PropertyReport::new("bayes_optimal_equals_tvd", 1e-12);
    let mut exhaustive = PropertyReport::new("indicator_family_equals_tvd", 1e-12);
    for i in 0..instances {
        let (n, len) = BAYES_SHAPES[rng.gen_range(0..BAYES_SHAPES.len())];
        let domain = Domain::with_default_budget(n, len)?;
        let p = random::joint::<f64, _>(&mut rng, domain, 0.2)?;
        let q = random::joint::<f64, _>(&mut rng, domain, 0.2)?;
        let tv = total_variation(&p, &q)?;
        let f = bayes_optimal_distinguisher(&p, &q)?;
        let a = advantage_exact(&f, &p, &q)?;
        bayes.record(-(a - tv).abs(), || {
            format!("instance {i}: α={a:.17e} TV={tv:.17e}")
        });
        if domain.size() <= MAX_INDICATOR_DOMAIN {
            let family = indicator_family::<f64>(domain)?;
            let (d, _) = distinguishability_exhaustive(&q, &p, &family)?;
            exhaustive.record(-(d - tv).abs(), || {
                format!("instance {i}: d={d:.17e} TV={tv:.17e}")
            });
        }
    }
    Ok((bayes, exhaustive))
}

/// `TV ≤ sqrt(KL/2)`.
pub fn pinsker_suite(seed: u64, instances: usize) -> Result<PropertyReport> {
    let mut rng = suite_rng(seed, 6);
    let mut rep = PropertyReport::new("pinsker", 1e-12);
    for i in 0..instances {
        let domain = random_shape(&mut rng, 5, 3, 125);
        let p = random::joint::<f64, _>(&mut rng, domain, 0.3)?;
        let q = random::joint::<f64, _>(&mut rng, domain, 0.0)?;
        let kl = kl_divergence(&p, &q)?.to_real();
        let tv = total_variation(&p, &q)?;
        rep.record((kl / 2.0).sqrt() - tv, || {
            format!("instance {i}: KL={kl:.9} TV={tv:.9}")
        });
    }
    Ok(rep)
}

/// `|α(f)| ≤ TV(p, q)` for any `f` into `[0, 1]`.
pub fn advantage_tvd_suite(seed: u64, instances: usize) -> Result<PropertyReport> {
    let mut rng = suite_rng(seed, 7);
    let mut rep = PropertyReport::new("advantage_below_tvd", 1e-12);
    for i in 0..instances {
        let domain = random_shape(&mut rng, 5, 3, 125);
        let p = random::joint::<f64, _>(&mut rng, domain, 0.3)?;
        let q = random::joint::<f64, _>(&mut rng, domain, 0.3)?;
        let f = random::table_distinguisher::<f64, _>(&mut rng, domain)?;
        let a = advantage_exact(&f, &p, &q)?;
        let tv = total_variation(&p, &q)?;
        rep.record(tv - a.abs(), || {
            format!("instance {i}: α={a:.9} TV={tv:.9}")
        });
    }
    Ok(rep)
}

/// Boosting a uniform model with the token-indicator oracle stops within the
/// iteration bound, with strictly decreasing loss, and the oracle's best
/// advantage on the result is below ε. Slack is `ε − best β̂`.
pub fn termination_suite(seed: u64, instances: usize, epsilon: f64) -> Result<PropertyReport> {
    let mut rng = suite_rng(seed, 8);
    let mut rep = PropertyReport::new("boost_termination", 0.0);
    for i in 0..instances {
        let n = rng.gen_range(2..=5);
        let len = rng.gen_range(1..=3);
        let p = random::tabular::<f64, _>(&mut rng, n, len, 0.3)?;
        let m = rng.gen_range(5..=40);
        let corpus = random::sample_corpus(&p, m, &mut rng)?;
        let q0: Arc<dyn SequentialModel<f64>> = Arc::new(TabularModel::<f64>::uniform(n, len)?);
        let l0 = log_loss(&q0, &corpus)?.log_loss;
        let bound = iteration_bound(l0, len, epsilon)?;
        let (model, trace) = run_boost(
            q0,
            &corpus,
            &mut TokenIndicatorOracle::new(),
            &BoostConfig::new(epsilon),
        )?;
        let best = TokenIndicatorOracle::scores(&model, &corpus)?
            .into_iter()
            .fold(0.0f64, |acc, b| acc.max(b.abs()));
        let monotone = trace
            .records
            .windows(2)
            .all(|w| w[1].log_loss < w[0].log_loss);
        let within = trace.reweightings() <= bound;
        let slack = if monotone && within {
            epsilon - best
        } else {
            -1.0
        };
        rep.record(slack, || {
            format!(
                "instance {i}: n={n} N={len} steps={} bound={bound} best β̂={best:.6e} monotone={monotone}",
                trace.reweightings()
            )
        });
    }
    Ok(rep)
}

/// Instance counts used by [`run_all`].
pub const WHOLE_REWEIGHTING_INSTANCES: usize = 200;
pub const LOG_RATIO_INSTANCES: usize = 200;
pub const STEPWISE_REWEIGHTING_INSTANCES: usize = 200;
pub const KL_GRADIENT_INSTANCES: usize = 50;
pub const BAYES_INSTANCES: usize = 100;
pub const PINSKER_INSTANCES: usize = 500;
pub const ADVANTAGE_TVD_INSTANCES: usize = 500;
pub const TERMINATION_INSTANCES: usize = 20;
pub const TERMINATION_EPSILON: f64 = 0.05;

/// Every suite at its default size.
pub fn run_all(opts: &CheckOptions) -> Result<Vec<PropertyReport>> {
    let s = opts.seed;
    let (bayes, exhaustive) = bayes_suites(s, BAYES_INSTANCES)?;
    Ok(vec![
        whole_reweighting_suite(s, WHOLE_REWEIGHTING_INSTANCES)?,
        log_ratio_suite(s, LOG_RATIO_INSTANCES)?,
        stepwise_reweighting_suite(s, STEPWISE_REWEIGHTING_INSTANCES, opts.partition_fault)?,
        kl_gradient_suite(s, KL_GRADIENT_INSTANCES)?,
        bayes,
        exhaustive,
        pinsker_suite(s, PINSKER_INSTANCES)?,
        advantage_tvd_suite(s, ADVANTAGE_TVD_INSTANCES)?,
        termination_suite(s, TERMINATION_INSTANCES, TERMINATION_EPSILON)?,
    ])
}
