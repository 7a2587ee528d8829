//! Train on multi-layer per-token vectors with learned layer weights.
//! The layers here are synthetic: only the last one carries the label.
//!
//!     cargo run --release --example contextual_features

use hare::corpus::{generate_synthetic_corpus, SyntheticSpec};
use hare::features::{ContextualFeatureSet, FeatureSource};
use hare::tagger::{train, TaggerConfig};
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> hare::Result<()> {
    let spec = SyntheticSpec {
        doc_count: 20,
        tokens_per_doc: 200,
        ..Default::default()
    };
    let (corpus, _) = generate_synthetic_corpus(&spec)?;
    let (layers, dim) = (3, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut set = ContextualFeatureSet::new(layers, dim)?;
    for doc in corpus.documents() {
        let gold = doc.gold().unwrap();
        let arr = Array3::from_shape_fn((gold.len(), layers, dim), |(t, k, _)| {
            let noise: f64 = rng.random_range(-1.0..1.0);
            if k == layers - 1 {
                noise * 0.5 + if gold[t] { 1.0 } else { -1.0 }
            } else {
                noise
            }
        });
        set.insert(doc.id(), arr)?;
    }
    let features = FeatureSource::contextual(set);
    println!(
        "initial layer weights {:?}",
        features.initial_layer_weights().unwrap().as_slice()
    );

    let config = TaggerConfig {
        hidden_layers: vec![32],
        max_epochs: 15,
        ..Default::default()
    };
    let (model, report) = train(&corpus, &features, &config)?;
    let learned = model.layer_weights.as_ref().unwrap();
    println!("learned layer weights {:?}", learned.as_slice());
    println!("best dev F2 {:.3}", report.best_dev_f_beta);
    Ok(())
}
