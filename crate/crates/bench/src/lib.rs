//! Fixtures shared by the criterion benches.

use palettizer::recommender::{train, TrainConfig, VaeacModel};
use palettizer::synth::generate_corpus;
use palettizer::{featurize, FeatureVector};

pub fn corpus_features(n: usize, seed: u64) -> Vec<FeatureVector> {
    generate_corpus(n, seed).iter().map(|i| featurize(&i.doc).expect("generated docs featurize")).collect()
}

/// Small model: benches measure inference cost, not training quality.
pub fn small_model(seed: u64) -> VaeacModel {
    let config = TrainConfig {
        epochs: 3,
        seed,
        ..Default::default()
    };
    train(&corpus_features(200, seed), &config).expect("training succeeds").0
}

/// `v` with every other present color slot hidden.
pub fn half_hidden(v: &FeatureVector) -> FeatureVector {
    let mut out = v.clone();
    for s in v.colorable_slots().into_iter().step_by(2) {
        out.set_color_hidden(s, true);
    }
    out
}
