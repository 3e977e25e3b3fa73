use std::sync::Arc;

use distboost::boost::TokenIndicatorOracle;
use distboost::models::SequentialModel;
use distboost::{
    enumerate_joint, kl_divergence, log_loss, ngram_mle_fit, parse_corpus, run_boost,
    total_variation, BoostConfig, Corpus, JointTableF32, NGramModelF32, TabularModelF32,
};

#[test]
fn f32_pipeline() {
    let (corpus, vocab) = parse_corpus("a\na\na\nb\n", None, "<pad>", 1).unwrap();
    let fit: NGramModelF32 = ngram_mle_fit(&corpus, vocab.len(), 1, 0.0f32).unwrap();
    let loss = log_loss(&fit, &corpus).unwrap().log_loss;
    assert!((loss - 0.562335).abs() < 1e-5);

    let ids = Corpus::from_ids(vec![vec![0], vec![0], vec![0], vec![1]]).unwrap();
    let q0: Arc<dyn SequentialModel<f32>> = Arc::new(TabularModelF32::uniform(2, 1).unwrap());
    let (model, trace) = run_boost(
        q0,
        &ids,
        &mut TokenIndicatorOracle::new(),
        &BoostConfig::new(0.01f32),
    )
    .unwrap();
    let joint: JointTableF32 = enumerate_joint(&model, 4).unwrap();
    let mle = JointTableF32::new(joint.domain(), vec![0.75, 0.25]).unwrap();
    assert!(total_variation(&joint, &mle).unwrap() <= 0.02);
    assert!(kl_divergence(&mle, &joint).unwrap().to_real() < 1e-3);
    assert!(trace
        .records
        .windows(2)
        .all(|w| w[1].log_loss < w[0].log_loss));
}
