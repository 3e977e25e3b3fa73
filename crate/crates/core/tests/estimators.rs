use std::collections::BTreeMap;

use distboost::models::{context_key, SequentialModel};
use distboost::random;
use distboost::{
    enumerate_joint, kl_divergence, log_loss, ngram_mle_fit, training_advantage, Corpus, Domain,
    Estimator, LogLinearModel, NGramModel, TabularModel, DEFAULT_ENUMERATION_BUDGET,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn monte_carlo_advantage_tracks_exact() {
    let mut r = ChaCha8Rng::seed_from_u64(404);
    for round in 0..3u64 {
        let n = 3;
        let len = 2 + round as usize % 2;
        let q = random::tabular::<f64, _>(&mut r, n, len, 0.0).unwrap();
        let p = random::tabular::<f64, _>(&mut r, n, len, 0.0).unwrap();
        let corpus = random::sample_corpus(&p, 30, &mut r).unwrap();
        let d = Domain::with_default_budget(n, len).unwrap();
        let f = random::table_distinguisher::<f64, _>(&mut r, d).unwrap();
        let exact = training_advantage(
            &f,
            &corpus,
            &q,
            Estimator::Exact {
                budget: DEFAULT_ENUMERATION_BUDGET,
            },
        )
        .unwrap()
        .value;
        let mc = training_advantage(
            &f,
            &corpus,
            &q,
            Estimator::MonteCarlo {
                samples: 100_000,
                seed: 77 + round,
            },
        )
        .unwrap();
        assert!(
            (mc.value - exact).abs() <= 0.01,
            "round {round}: mc {} exact {exact}",
            mc.value
        );
    }
}

#[test]
fn loss_difference_converges_to_kl_difference() {
    let mut r = ChaCha8Rng::seed_from_u64(5150);
    let (n, len) = (3, 2);
    // Conditionals are kept at least 0.1 so the per-sequence log-ratio has
    // bounded variance; flat Dirichlet draws can put 1e-3 mass on a token.
    let model = |r: &mut ChaCha8Rng| {
        TabularModel::from_fn(n, len, |_| {
            random::simplex::<f64, _>(r, n, 0.0)
                .into_iter()
                .map(|v| 0.1 + 0.7 * v)
                .collect()
        })
        .unwrap()
    };
    let p = model(&mut r);
    let q = model(&mut r);
    let q2 = model(&mut r);
    let sample = random::sample_corpus(&p, 50_000, &mut r).unwrap();
    let pj = enumerate_joint(&p, DEFAULT_ENUMERATION_BUDGET).unwrap();
    let kl = |m: &TabularModel<f64>| {
        kl_divergence(
            &pj,
            &enumerate_joint(m, DEFAULT_ENUMERATION_BUDGET).unwrap(),
        )
        .unwrap()
        .to_real()
    };
    let empirical =
        log_loss(&q, &sample).unwrap().log_loss - log_loss(&q2, &sample).unwrap().log_loss;
    let exact = kl(&q) - kl(&q2);
    assert!((empirical - exact).abs() <= 0.02, "{empirical} vs {exact}");
}

fn non_pad_corpus<R: Rng>(r: &mut R, tokens: usize, len: usize, m: usize) -> Corpus {
    Corpus::from_ids(
        (0..m)
            .map(|_| {
                (0..len)
                    .map(|_| r.gen_range(1..=tokens))
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>(),
    )
    .unwrap()
}

#[test]
fn unsmoothed_ngram_fit_beats_perturbations() {
    let mut r = ChaCha8Rng::seed_from_u64(99);
    for order in 1..=3 {
        let corpus = non_pad_corpus(&mut r, 3, 3, 12);
        let vocab = 4;
        let mle = ngram_mle_fit::<f64>(&corpus, vocab, order, 0.0).unwrap();
        let best = log_loss(&mle, &corpus).unwrap().log_loss;
        let contexts: Vec<Vec<usize>> = mle.contexts().map(|(c, _)| c.to_vec()).collect();
        for _ in 0..40 {
            let mut table: BTreeMap<Vec<usize>, Vec<f64>> = mle
                .contexts()
                .map(|(c, lp)| (c.to_vec(), lp.to_vec()))
                .collect();
            let ctx = &contexts[r.gen_range(0..contexts.len())];
            let row = table.get_mut(ctx).unwrap();
            let start = ctx.iter().all(|&t| t == distboost::models::BOS);
            let support: Vec<bool> = (0..vocab).map(|w| !(start && w == 0)).collect();
            let noise: Vec<f64> = random::simplex_on(&mut r, &support);
            let t = r.gen_range(0.01..0.5);
            for (lp, z) in row.iter_mut().zip(&noise) {
                *lp = ((1.0 - t) * lp.exp() + t * z).ln();
            }
            let perturbed = NGramModel::from_table(order, vocab, 3, 0.0, table).unwrap();
            let loss = log_loss(&perturbed, &corpus).unwrap().log_loss;
            assert!(loss >= best - 1e-12, "order {order}: {loss} < {best}");
        }
        // every counted context is one the fit saw
        for s in corpus.sequences() {
            for j in 0..3 {
                assert!(contexts.contains(&context_key(&s.ids()[..j], order)));
            }
        }
    }
}

/// With one indicator per (start / later position, token) feature and
/// θ = log relative frequency (scaled by the number of later positions), the
/// log-linear joint equals the order-1 count model's joint.
#[test]
fn loglinear_with_count_features_matches_order1_fit() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    for len in 1..=3usize {
        let tokens = 3;
        let corpus = non_pad_corpus(&mut r, tokens, len, 40);
        let fit = ngram_mle_fit::<f64>(&corpus, tokens + 1, 1, 0.0).unwrap();
        // log-linear domain uses ids 0..tokens for n-gram ids 1..=tokens
        let domain = Domain::with_default_budget(tokens, len).unwrap();
        let start = fit.next_token_dist(&[]);
        let later = if len > 1 {
            fit.next_token_dist(&[1])
        } else {
            vec![0.0; tokens + 1]
        };
        let mut theta = Vec::new();
        let mut dim = tokens;
        for w in 0..tokens {
            theta.push(start[w + 1].ln());
        }
        if len > 1 {
            dim += tokens;
            for w in 0..tokens {
                theta.push((len - 1) as f64 * later[w + 1].ln());
            }
        }
        if theta.iter().any(|t| !t.is_finite()) {
            continue;
        }
        let features = |x: &[usize]| {
            let mut f = vec![0.0; dim];
            f[x[0]] = 1.0;
            for &t in &x[1..] {
                f[tokens + t] += 1.0 / (len - 1) as f64;
            }
            f
        };
        let ll = LogLinearModel::new(domain, dim, features, theta).unwrap();
        for (i, x) in domain.iter().enumerate() {
            let shifted: Vec<usize> = x.iter().map(|t| t + 1).collect();
            let a = distboost::sequence_log_prob(&fit, &shifted).to_real().exp();
            let b = ll.log_prob_at(i).exp();
            assert!((a - b).abs() <= 1e-9, "len {len} {x:?}: {a} vs {b}");
        }
        checked += 1;
    }
    assert_eq!(checked, 3);
}
