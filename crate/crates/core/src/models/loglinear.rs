use std::sync::Arc;

use crate::domain::Domain;
use crate::exact::JointTable;
use crate::math::{log_sum_exp, ordered_sum};
use crate::scalar::Real;
use crate::vocab::TokenId;
use crate::{Error, Result};

/// `q_θ(x) = exp⟨θ, f(x)⟩ / Z_θ` over an enumerable domain, with every
/// feature in `[0, 1]`. The feature matrix is evaluated once at construction
/// and shared between parameter updates.
#[derive(Debug, Clone)]
pub struct LogLinearModel<T> {
    domain: Domain,
    dim: usize,
    features: Arc<[T]>,
    theta: Vec<T>,
    log_z: T,
    log_probs: Vec<T>,
}

impl<T: Real> LogLinearModel<T> {
    pub fn new<F>(domain: Domain, dim: usize, mut feature_fn: F, theta: Vec<T>) -> Result<Self>
    where
        F: FnMut(&[TokenId]) -> Vec<T>,
    {
        let mut features = Vec::with_capacity(domain.size() * dim);
        for x in domain.iter() {
            let f = feature_fn(&x);
            if f.len() != dim {
                return Err(Error::InvalidParameter(format!(
                    "feature map returned {} values, expected {dim}",
                    f.len()
                )));
            }
            if let Some(v) = f.iter().find(|&&v| !(v >= T::zero() && v <= T::one())) {
                return Err(Error::OutOfRange {
                    value: v.as_f64(),
                    what: "feature".into(),
                });
            }
            features.extend(f);
        }
        Self::assemble(domain, dim, features.into(), theta)
    }

    fn assemble(domain: Domain, dim: usize, features: Arc<[T]>, theta: Vec<T>) -> Result<Self> {
        if theta.len() != dim {
            return Err(Error::InvalidParameter(format!(
                "θ has {} entries, expected {dim}",
                theta.len()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("θ must be finite".into()));
        }
        let scores: Vec<T> = if dim == 0 {
            vec![T::zero(); domain.size()]
        } else {
            features.chunks(dim).map(|f| dot(f, &theta)).collect()
        };
        let log_z = log_sum_exp(&scores);
        let log_probs = scores.into_iter().map(|s| s - log_z).collect();
        Ok(LogLinearModel {
            domain,
            dim,
            features,
            theta,
            log_z,
            log_probs,
        })
    }

    /// Same features, new parameters.
    pub fn with_theta(&self, theta: Vec<T>) -> Result<Self> {
        Self::assemble(self.domain, self.dim, self.features.clone(), theta)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn theta(&self) -> &[T] {
        &self.theta
    }

    pub fn features_at(&self, index: usize) -> &[T] {
        &self.features[index * self.dim..(index + 1) * self.dim]
    }

    /// `log Z_θ`, via log-sum-exp.
    pub fn log_partition(&self) -> T {
        self.log_z
    }

    /// `Z_θ = Σ_x exp⟨θ, f(x)⟩`.
    pub fn partition(&self) -> T {
        self.log_z.exp()
    }

    pub fn prob(&self, x: &[TokenId]) -> Result<T> {
        let i = self
            .domain
            .index_of(x)
            .ok_or_else(|| Error::DomainMismatch(format!("sequence {x:?} outside domain")))?;
        Ok(self.log_probs[i].exp())
    }

    pub fn log_prob_at(&self, index: usize) -> T {
        self.log_probs[index]
    }

    pub fn to_joint(&self) -> JointTable<T> {
        JointTable::from_log_probs(self.domain, &self.log_probs)
    }

    /// `E_{q_θ}[f_i]` for each feature.
    pub fn feature_expectations(&self) -> Vec<T> {
        (0..self.dim)
            .map(|i| {
                ordered_sum(
                    self.log_probs
                        .iter()
                        .enumerate()
                        .map(|(x, lp)| lp.exp() * self.features_at(x)[i]),
                )
            })
            .collect()
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    ordered_sum(a.iter().zip(b).map(|(&x, &y)| x * y))
}

/// Gradient of `KL(p ‖ q_θ)` with respect to `θ`: component `i` is
/// `Σ_x f_i(x)(q_θ(x) − p(x))`, the advantage of feature `i` as a distinguisher.
pub fn kl_gradient<T: Real>(p: &JointTable<T>, model: &LogLinearModel<T>) -> Result<Vec<T>> {
    if p.domain() != model.domain() {
        return Err(Error::DomainMismatch(
            "target table and log-linear model domains differ".into(),
        ));
    }
    Ok((0..model.dim())
        .map(|i| {
            ordered_sum(
                p.probs()
                    .iter()
                    .enumerate()
                    .map(|(x, &px)| model.features_at(x)[i] * (model.log_prob_at(x).exp() - px)),
            )
        })
        .collect())
}
