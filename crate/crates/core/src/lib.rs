//! Likelihood boosting with distinguishers for discrete sequence models.
//!
//! The crate connects two ways of fitting an autoregressive model `q` to a
//! sample: lowering its log-loss, and making it hard to tell apart from the
//! sample. A distinguisher with positive advantage can be folded back into
//! `q` as a multiplicative reweighting that provably lowers log-loss; the
//! [`boost`] module iterates this with next-token distinguishers, where each
//! step only needs an `O(n)` normalization per prefix.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`); the aliases below fix it to `f64`.
//!
//! Modules:
//! - [`corpus`], [`vocab`]: token ids, padded sequences, samples.
//! - [`models`]: tabular, n-gram and log-linear models, log-loss, sampling.
//! - [`distinguish`]: distinguishers and advantage estimators.
//! - [`boost`]: reweighting updates, oracles and the boosting loop.
//! - [`exact`]: brute-force tables, KL, total variation, finite differences.
//! - [`checks`]: randomized property suites for the inequalities above.

// NaN must fail range checks, so `!(x >= lo)` is intended throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boost;
pub mod checks;
pub mod corpus;
pub mod distinguish;
pub mod domain;
pub mod exact;
pub mod math;
pub mod models;
pub mod random;
pub mod scalar;
pub mod vocab;

use thiserror::Error;

pub use boost::{
    iteration_bound, reweight_stepwise, reweight_whole, run_boost, BoostConfig, BoostTrace,
    IterationRecord, Oracle, ReweightedModel, Termination,
};
pub use corpus::{load_corpus, parse_corpus, Corpus, Sequence};
pub use distinguish::{
    accuracy_from_advantage, advantage_exact, bayes_optimal_distinguisher, generalized_advantage,
    log_ratio_distinguisher, minimal_ratio_bound, training_advantage, AdvantageEstimate,
    Distinguisher, Estimator, StepDistinguisher,
};
pub use domain::{Domain, DEFAULT_ENUMERATION_BUDGET};
pub use exact::{
    cross_entropy, distinguishability_exhaustive, entropy, enumerate_joint, finite_diff_gradient,
    kl_divergence, total_variation, Divergence, JointTable,
};
pub use models::{
    kl_gradient, log_loss, ngram_mle_fit, sample_sequence, sequence_log_prob, LogLinearModel,
    LogProb, LossReport, NGramModel, SequentialModel, TabularModel,
};
pub use scalar::Real;
pub use vocab::{TokenId, Vocabulary};

pub type JointTableF64 = exact::JointTable<f64>;
pub type JointTableF32 = exact::JointTable<f32>;
pub type TabularModelF64 = models::TabularModel<f64>;
pub type TabularModelF32 = models::TabularModel<f32>;
pub type NGramModelF64 = models::NGramModel<f64>;
pub type NGramModelF32 = models::NGramModel<f32>;
pub type LogLinearModelF64 = models::LogLinearModel<f64>;
pub type ReweightedModelF64 = boost::ReweightedModel<f64>;
pub type ReweightedModelF32 = boost::ReweightedModel<f32>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("line {line}: {found} tokens exceed sequence length {max}")]
    LineTooLong {
        line: usize,
        found: usize,
        max: usize,
    },
    #[error("line {line}: token {token:?} not in vocabulary")]
    UnknownToken { token: String, line: usize },
    #[error("line {line}: pad token {token:?} may not appear in a corpus line")]
    PadInCorpus { token: String, line: usize },
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error("enumeration budget exceeded: {vocab_size}^{len} sequences > budget {budget}")]
    BudgetExceeded {
        vocab_size: usize,
        len: usize,
        budget: usize,
    },
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("supports differ: {0}")]
    SupportsDiffer(String),
    #[error("ratio bound violated at sequence {sequence}")]
    RatioViolation { sequence: String },
    #[error("sequence {index} has zero probability (infinite log-loss)")]
    ImpossibleSequence { index: usize },
    #[error("{what}: value {value} outside [0, 1]")]
    OutOfRange { value: f64, what: String },
    #[error("distribution not normalized (sum = {0})")]
    NotNormalized(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("initial model gives infinite log-loss on the corpus (sequence {index})")]
    InfiniteInitialLoss { index: usize },
    #[error("boosting hit the iteration cap of {cap} without reaching the threshold")]
    IterationCap { cap: usize, trace: Box<BoostTrace> },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
