use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use distboost::random::sample_corpus;
use distboost::{
    cross_entropy, enumerate_joint, finite_diff_gradient, kl_divergence, kl_gradient,
    total_variation, Divergence, Domain, JointTable, LogLinearModel, TabularModel,
};

use super::{csv_real, resolver, write_output};
use crate::error::{input, runtime, CliError, CliResult};
use crate::Common;

/// Ages `0..=119`, one token each, sequences of length one.
pub const AGES: usize = 120;
/// Threshold for the tail-mass report.
pub const TAIL_AGE: usize = 100;
const MAX_AGE: f64 = (AGES - 1) as f64;

/// Flat up to age 70, then an exponential decline with scale 8 years.
pub fn default_age_distribution() -> Vec<f64> {
    let w: Vec<f64> = (0..AGES)
        .map(|x| {
            if x <= 70 {
                1.0
            } else {
                (-((x - 70) as f64) / 8.0).exp()
            }
        })
        .collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

/// One probability per line for ages 0..=119; `#` starts a comment.
pub fn parse_age_file(text: &str) -> Result<Vec<f64>, String> {
    let mut p = Vec::with_capacity(AGES);
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| format!("line {}: not a number: {line:?}", i + 1))?;
        if !(v >= 0.0) || !v.is_finite() {
            return Err(format!(
                "line {}: probability must be finite and >= 0",
                i + 1
            ));
        }
        p.push(v);
    }
    if p.len() != AGES {
        return Err(format!(
            "expected {AGES} probabilities (ages 0..=119), found {}",
            p.len()
        ));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(format!("probabilities sum to {sum}, not 1"));
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformRow {
    pub m: usize,
    /// `H(observed, q_m)`, infinite when an observed age exceeds `m`.
    pub cross_entropy: Divergence<f64>,
    pub kl: Divergence<f64>,
    /// Distance from the population distribution.
    pub tvd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgeReport {
    pub rows: Vec<UniformRow>,
    pub max_observed_age: usize,
    pub mle_m: usize,
    /// Mass of `q_{mle_m}` on ages strictly above 100.
    pub mle_tail_strict: f64,
    /// Mass of `q_{mle_m}` on ages 100 and above.
    pub mle_tail_inclusive: f64,
    /// Mass of the population distribution strictly above 100.
    pub population_tail: f64,
    pub tvd_min_m: usize,
    pub tvd_min: f64,
    pub observed_mean: f64,
    /// Decay rate `θ` of the fitted `q_θ(x) ∝ exp(−θx)`.
    pub geometric_theta: f64,
    pub geometric_mean: f64,
    /// `∂KL/∂φ` for the scaled parameter `φ = −119 θ`, from the advantage formula.
    pub gradient: f64,
    /// The same derivative by central differences.
    pub gradient_fd: f64,
    pub geometric_kl: f64,
}

fn uniform_upto(m: usize) -> distboost::Result<JointTable<f64>> {
    let mut cond = vec![0.0; AGES];
    cond[..=m].fill(1.0 / (m + 1) as f64);
    let model = TabularModel::from_conditionals(AGES, 1, vec![cond])?;
    enumerate_joint(&model, AGES)
}

fn mean_age(t: &JointTable<f64>) -> f64 {
    t.expectation(|x| x[0] as f64)
}

fn tail(t: &JointTable<f64>, from: usize) -> f64 {
    t.probs()[from..].iter().sum()
}

/// Fits the uniform family `q_m` (uniform on `0..=m`) and the geometric family
/// to `observed`; distances to the truth are measured against `population`.
pub fn age_experiment(
    population: &JointTable<f64>,
    observed: &JointTable<f64>,
) -> distboost::Result<AgeReport> {
    let domain = Domain::new(AGES, 1, AGES)?;
    if population.domain() != domain || observed.domain() != domain {
        return Err(distboost::Error::DomainMismatch(
            "age tables must cover 0..=119 with N = 1".into(),
        ));
    }
    let max_observed_age = observed.probs().iter().rposition(|&v| v > 0.0).unwrap_or(0);

    let mut rows = Vec::with_capacity(AGES);
    let mut tables = Vec::with_capacity(AGES);
    for m in 0..AGES {
        let q = uniform_upto(m)?;
        rows.push(UniformRow {
            m,
            cross_entropy: cross_entropy(observed, &q)?,
            kl: kl_divergence(observed, &q)?,
            tvd: total_variation(population, &q)?,
        });
        tables.push(q);
    }
    let mle_m = rows
        .iter()
        .filter_map(|r| r.cross_entropy.finite().map(|h| (r.m, h)))
        .fold(None, |best: Option<(usize, f64)>, (m, h)| match best {
            Some((_, bh)) if bh <= h => best,
            _ => Some((m, h)),
        })
        .map(|(m, _)| m)
        .expect("q_119 covers every age");
    let (tvd_min_m, tvd_min) = rows.iter().fold((0, f64::INFINITY), |(bm, bt), r| {
        if r.tvd < bt {
            (r.m, r.tvd)
        } else {
            (bm, bt)
        }
    });

    let observed_mean = mean_age(observed);
    if !(observed_mean > 0.0 && observed_mean < MAX_AGE) {
        return Err(distboost::Error::InvalidParameter(format!(
            "geometric fit needs a mean age strictly inside (0, 119), got {observed_mean}"
        )));
    }
    let base = LogLinearModel::new(domain, 1, |x| vec![x[0] as f64 / MAX_AGE], vec![0.0])?;
    let model_mean = |phi: f64| -> distboost::Result<f64> {
        Ok(mean_age(&base.with_theta(vec![phi])?.to_joint()))
    };
    let (mut lo, mut hi) = (-1.0e4, 1.0e4);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if model_mean(mid)? < observed_mean {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let phi = 0.5 * (lo + hi);
    let fitted = base.with_theta(vec![phi])?;
    let geometric_mean = mean_age(&fitted.to_joint());
    let gradient = kl_gradient(observed, &fitted)?[0];
    let kl_at = |t: &[f64]| -> f64 {
        base.with_theta(t.to_vec())
            .and_then(|m| kl_divergence(observed, &m.to_joint()))
            .map(|d| d.to_real())
            .unwrap_or(f64::NAN)
    };
    let gradient_fd = finite_diff_gradient(kl_at, &[phi], 1e-5)[0];
    let geometric_kl = kl_at(&[phi]);

    let q_mle = &tables[mle_m];
    Ok(AgeReport {
        max_observed_age,
        mle_m,
        mle_tail_strict: tail(q_mle, TAIL_AGE + 1),
        mle_tail_inclusive: tail(q_mle, TAIL_AGE),
        population_tail: tail(population, TAIL_AGE + 1),
        tvd_min_m,
        tvd_min,
        observed_mean,
        geometric_theta: -phi / MAX_AGE,
        geometric_mean,
        gradient,
        gradient_fd,
        geometric_kl,
        rows,
    })
}

impl AgeReport {
    pub fn uniform_csv(&self) -> String {
        let mut s = String::from("m,cross_entropy,kl,tvd\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                r.m,
                csv_real(r.cross_entropy.to_real()),
                csv_real(r.kl.to_real()),
                csv_real(r.tvd)
            );
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("quantity,value\n");
        let ints = [
            ("max_observed_age", self.max_observed_age),
            ("mle_m", self.mle_m),
            ("tvd_min_m", self.tvd_min_m),
        ];
        for (k, v) in ints {
            let _ = writeln!(s, "{k},{v}");
        }
        let reals = [
            ("mle_tail_above_100_strict", self.mle_tail_strict),
            ("mle_tail_above_100_inclusive", self.mle_tail_inclusive),
            ("population_tail_above_100", self.population_tail),
            ("tvd_min", self.tvd_min),
            ("observed_mean_age", self.observed_mean),
            ("geometric_theta", self.geometric_theta),
            ("geometric_mean_age", self.geometric_mean),
            ("geometric_kl", self.geometric_kl),
            ("kl_gradient", self.gradient),
            ("kl_gradient_finite_difference", self.gradient_fd),
        ];
        for (k, v) in reals {
            let _ = writeln!(s, "{k},{}", csv_real(v));
        }
        s
    }
}

pub(crate) fn run(
    common: Common,
    ages: Option<PathBuf>,
    samples: Option<usize>,
    seed: Option<u64>,
) -> CliResult<()> {
    let mut r = resolver(&common)?;
    let out = r.out_dir(common.out_dir.clone())?;
    let ages: Option<PathBuf> = r.opt(ages, "ages")?;
    let samples: Option<usize> = r.opt(samples, "samples")?;
    let seed: Option<u64> = r.opt(seed, "seed")?;
    r.finish()?;

    let p = match &ages {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(input(&format!("ages {}", path.display())))?;
            parse_age_file(&text)
                .map_err(|e| CliError::Config(format!("ages {}: {e}", path.display())))?
        }
        None => default_age_distribution(),
    };
    let domain = Domain::new(AGES, 1, AGES).map_err(runtime("domain"))?;
    let population =
        JointTable::new(domain, p.clone()).map_err(|e| CliError::Config(format!("ages: {e}")))?;
    let observed = match samples {
        None => population.clone(),
        Some(0) => return Err(CliError::Config("--samples must be >= 1".into())),
        Some(m) => {
            let seed =
                seed.ok_or_else(|| CliError::Config("--seed is required with --samples".into()))?;
            let model =
                TabularModel::from_conditionals(AGES, 1, vec![p]).map_err(runtime("age model"))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let corpus = sample_corpus(&model, m, &mut rng).map_err(runtime("sampling"))?;
            JointTable::empirical(domain, &corpus).map_err(runtime("empirical distribution"))?
        }
    };

    let rep = age_experiment(&population, &observed).map_err(runtime("age experiment"))?;
    println!("oldest observed age: {}", rep.max_observed_age);
    println!("uniform family: maximum-likelihood m = {}", rep.mle_m);
    println!(
        "  mass of q_{} above age {TAIL_AGE}: {:.4} (ages > {TAIL_AGE}), {:.4} (ages >= {TAIL_AGE}); population: {:.4}",
        rep.mle_m, rep.mle_tail_strict, rep.mle_tail_inclusive, rep.population_tail
    );
    println!(
        "  closest in total variation: m = {} (TVD {:.4})",
        rep.tvd_min_m, rep.tvd_min
    );
    println!(
        "geometric family: θ = {:.6}, model mean {:.6} vs observed mean {:.6}",
        rep.geometric_theta, rep.geometric_mean, rep.observed_mean
    );
    println!(
        "  KL gradient at the fit: {:.3e} (finite differences {:.3e})",
        rep.gradient, rep.gradient_fd
    );
    let a = write_output(&out, "age_uniform.csv", &rep.uniform_csv())?;
    let b = write_output(&out, "age_summary.csv", &rep.summary_csv())?;
    println!("wrote {}", a.display());
    println!("wrote {}", b.display());
    if (rep.geometric_mean - rep.observed_mean).abs() > 1e-6 {
        return Err(CliError::Runtime(format!(
            "geometric fit did not match the mean: {} vs {}",
            rep.geometric_mean, rep.observed_mean
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_distribution_is_normalized_with_full_support() {
        let p = default_age_distribution();
        assert_eq!(p.len(), AGES);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v > 0.0));
        assert!(p[TAIL_AGE + 1..].iter().sum::<f64>() < 0.01);
    }

    #[test]
    fn age_file_parsing() {
        let mut text = String::from("# ages\n");
        for x in 0..AGES {
            text.push_str(if x < 2 { "0.5\n" } else { "0\n" });
        }
        let p = parse_age_file(&text).unwrap();
        assert_eq!(p[0], 0.5);
        assert!(parse_age_file("0.5\n0.5\n").is_err());
        assert!(parse_age_file(&text.replacen("0.5", "-0.5", 1)).is_err());
        assert!(parse_age_file(&text.replacen("0.5", "0.4", 1)).is_err());
    }

    #[test]
    fn two_point_distribution() {
        // Ages 0 and 3 with equal mass: the uniform MLE is m = 3 with cross-entropy ln 4.
        let domain = Domain::new(AGES, 1, AGES).unwrap();
        let mut p = vec![0.0; AGES];
        p[0] = 0.5;
        p[3] = 0.5;
        let t = JointTable::new(domain, p).unwrap();
        let rep = age_experiment(&t, &t).unwrap();
        assert_eq!(rep.mle_m, 3);
        assert_eq!(rep.max_observed_age, 3);
        assert_eq!(rep.rows[2].cross_entropy, Divergence::Infinite);
        assert!((rep.rows[3].cross_entropy.to_real() - 4f64.ln()).abs() < 1e-12);
        assert_eq!(rep.mle_tail_strict, 0.0);
        assert!((rep.geometric_mean - 1.5).abs() < 1e-6);
        assert!(rep.geometric_theta > 0.0);
        assert!(rep.gradient.abs() < 1e-8 && (rep.gradient - rep.gradient_fd).abs() < 1e-6);
    }

    #[test]
    fn degenerate_mean_has_no_geometric_fit() {
        let domain = Domain::new(AGES, 1, AGES).unwrap();
        let mut p = vec![0.0; AGES];
        p[0] = 1.0;
        let t = JointTable::new(domain, p).unwrap();
        assert!(age_experiment(&t, &t).is_err());
    }

    #[test]
    fn csv_layout() {
        let p = JointTable::new(
            Domain::new(AGES, 1, AGES).unwrap(),
            default_age_distribution(),
        )
        .unwrap();
        let rep = age_experiment(&p, &p).unwrap();
        let u = rep.uniform_csv();
        assert_eq!(u.lines().count(), AGES + 1);
        assert!(u.lines().nth(1).unwrap().starts_with("0,inf,inf,"));
        assert!(rep.summary_csv().contains("\nmle_m,119\n"));
    }
}
