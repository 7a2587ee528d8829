//! Token relevance tagger: network, training recipe, scoring and model
//! files.

mod config;
mod network;
mod train;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::features::FeatureSource;
use crate::postprocess::ScoreSet;

pub use config::TaggerConfig;
pub use network::{dropout_mask, Dense, Gradients, TaggerModel, TrainingMetadata};
pub use train::{
    draw_epoch_sample, epoch_sample_sizes, train, EpochReport, StopReason, TrainReport,
};

const MODEL_FORMAT: &str = "hare-tagger";
const MODEL_VERSION: u32 = 1;

/// Scores every token of `corpus`. Documents are scored in parallel; each
/// document's scores depend only on the model and its own features.
pub fn tag_corpus(
    model: &TaggerModel,
    corpus: &Corpus,
    features: &FeatureSource,
    model_id: &str,
) -> Result<ScoreSet> {
    if features.dimension() != model.input_dimension {
        return Err(Error::DimensionMismatch {
            expected: model.input_dimension,
            found: features.dimension(),
        });
    }
    let scored: Vec<Vec<f64>> = corpus
        .documents()
        .par_iter()
        .map(|doc| {
            if doc.token_count() == 0 {
                return Ok(Vec::new());
            }
            let inputs = features.document_inputs(doc)?;
            model.predict(inputs.view())
        })
        .collect::<Result<_>>()?;
    let mut set = ScoreSet::new(model_id);
    for (doc, scores) in corpus.documents().iter().zip(scored) {
        set.insert(doc.id(), scores)?;
    }
    Ok(set)
}

#[derive(Serialize, Deserialize)]
struct ModelFile<M> {
    format: String,
    version: u32,
    model: M,
}

impl TaggerModel {
    pub fn write_to(&self, w: impl Write) -> Result<()> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_owned(),
            version: MODEL_VERSION,
            model: self,
        };
        serde_json::to_writer(w, &file).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text)
            .map_err(|e| Error::ModelFormat(e.to_string()))?;
        let header: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::ModelFormat(format!("corrupt file: {e}")))?;
        if header.get("format").and_then(|f| f.as_str()) != Some(MODEL_FORMAT) {
            return Err(Error::ModelFormat("not a tagger model file".into()));
        }
        let version = header.get("version").and_then(|v| v.as_u64());
        if version != Some(u64::from(MODEL_VERSION)) {
            return Err(Error::ModelFormat(format!(
                "unsupported version {version:?}, expected {MODEL_VERSION}"
            )));
        }
        let file: ModelFile<TaggerModel> = serde_json::from_value(header)
            .map_err(|e| Error::ModelFormat(format!("corrupt file: {e}")))?;
        file.model.check_shapes()?;
        Ok(file.model)
    }
}

pub fn save_model(model: &TaggerModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    model.write_to(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TaggerModel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    TaggerModel::read_from(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic_corpus, SyntheticSpec};
    use crate::features::{ContextualFeatureSet, EmbeddingTable};
    use ndarray::Array3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_model(seed: u64) -> TaggerModel {
        let config = TaggerConfig {
            hidden_layers: vec![7, 5],
            ..Default::default()
        };
        TaggerModel::new(4, None, &config, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn round_trip_scores_identically() {
        let model = small_model(3);
        let mut buf = Vec::new();
        model.write_to(&mut buf).unwrap();
        let back = TaggerModel::read_from(&buf[..]).unwrap();
        assert_eq!(back, model);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            assert_eq!(model.forward(&x).unwrap(), back.forward(&x).unwrap());
        }
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let mut buf = Vec::new();
        small_model(1).write_to(&mut buf).unwrap();
        buf.truncate(buf.len() / 2);
        match TaggerModel::read_from(&buf[..]) {
            Err(Error::ModelFormat(m)) => assert!(m.contains("corrupt"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn version_mismatch_rejected() {
        let mut buf = Vec::new();
        small_model(1).write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf)
            .unwrap()
            .replacen("\"version\":1", "\"version\":7", 1);
        match TaggerModel::read_from(text.as_bytes()) {
            Err(Error::ModelFormat(m)) => assert!(m.contains("version"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_feature_dimension_at_tag_time() {
        let model = small_model(1);
        let mut table = EmbeddingTable::new(6).unwrap();
        table.insert("a", vec![0.0; 6]).unwrap();
        let corpus = Corpus::new(
            "c",
            vec![crate::corpus::Document::from_lines("d", &[vec!["a"]])],
        )
        .unwrap();
        let features = FeatureSource::static_window(table, 2);
        assert!(matches!(
            tag_corpus(&model, &corpus, &features, "m"),
            Err(Error::DimensionMismatch {
                expected: 4,
                found: 6
            })
        ));
    }

    #[test]
    fn empty_corpus_gives_empty_scores() {
        let model = small_model(1);
        let corpus = Corpus::new("c", vec![]).unwrap();
        let mut table = EmbeddingTable::new(4).unwrap();
        table.insert("a", vec![0.0; 4]).unwrap();
        let set = tag_corpus(
            &model,
            &corpus,
            &FeatureSource::static_window(table, 1),
            "m",
        )
        .unwrap();
        assert!(set.is_empty());
    }

    fn tiny_setup() -> (Corpus, FeatureSource, TaggerConfig) {
        let spec = SyntheticSpec {
            doc_count: 12,
            tokens_per_doc: 120,
            relevant_fraction: 0.3,
            segments_per_doc: 3.0,
            dimension: 8,
            noise: 0.3,
            seed: 5,
            ..Default::default()
        };
        let (corpus, table) = generate_synthetic_corpus(&spec).unwrap();
        let config = TaggerConfig {
            hidden_layers: vec![16],
            max_epochs: 8,
            ..Default::default()
        };
        (corpus, FeatureSource::static_window(table, 0), config)
    }

    #[test]
    fn training_is_deterministic() {
        let (corpus, features, config) = tiny_setup();
        let (a, ra) = train(&corpus, &features, &config).unwrap();
        let (b, rb) = train(&corpus, &features, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn zero_patience_stops_at_first_stall() {
        let (corpus, features, mut config) = tiny_setup();
        config.patience = 0;
        config.max_epochs = 30;
        let (_, report) = train(&corpus, &features, &config).unwrap();
        let f: Vec<f64> = report.epochs.iter().map(|e| e.dev.f_beta).collect();
        let mut best = f64::NEG_INFINITY;
        for (i, &x) in f.iter().enumerate() {
            if x > best + config.early_stop_delta {
                best = x;
            } else {
                assert_eq!(i + 1, f.len(), "kept training after a stall: {f:?}");
            }
        }
        if report.stop_reason == StopReason::EarlyStopping {
            assert!(f.len() >= 2);
        }
    }

    #[test]
    fn returns_best_epoch_and_reproduces_dev_score() {
        let (corpus, features, config) = tiny_setup();
        let (model, report) = train(&corpus, &features, &config).unwrap();
        let max = report
            .epochs
            .iter()
            .map(|e| e.dev.f_beta)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(report.best_dev_f_beta, max);
        assert_eq!(report.epochs[report.best_epoch - 1].dev.f_beta, max);
        let dev = corpus.subset("dev", |id| report.dev_documents.iter().any(|d| d == id));
        let scores = tag_corpus(&model, &dev, &features, "m").unwrap();
        let again =
            crate::analysis::evaluate_scores(&scores, &dev, config.eval_threshold, config.beta)
                .unwrap();
        assert_eq!(again.f_beta, report.best_dev_f_beta);
    }

    #[test]
    fn per_epoch_sample_sizes_recorded() {
        let (corpus, features, mut config) = tiny_setup();
        config.positive_fraction = 0.5;
        let (_, report) = train(&corpus, &features, &config).unwrap();
        let dev: Vec<&str> = report.dev_documents.iter().map(String::as_str).collect();
        let total_pos: usize = corpus
            .documents()
            .iter()
            .filter(|d| !dev.contains(&d.id()))
            .map(|d| d.gold().unwrap().iter().filter(|&&g| g).count())
            .sum();
        let (p, n) = epoch_sample_sizes(total_pos, &config);
        for e in &report.epochs {
            assert_eq!((e.positives_drawn, e.negatives_drawn), (p, n));
        }
    }

    #[test]
    fn rejects_corpus_without_positives() {
        let doc = |id: &str| {
            crate::corpus::Document::from_lines(id, &[vec!["a", "b"]])
                .with_gold(vec![false, false])
                .unwrap()
        };
        let corpus = Corpus::new("c", vec![doc("x"), doc("y"), doc("z")]).unwrap();
        let mut table = EmbeddingTable::new(2).unwrap();
        table.insert("a", vec![1.0, 0.0]).unwrap();
        let err = train(
            &corpus,
            &FeatureSource::static_window(table, 0),
            &TaggerConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::TrainingData(_)));
    }

    #[test]
    fn contextual_training_updates_layer_weights() {
        let (corpus, _, config) = tiny_setup();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut set = ContextualFeatureSet::new(3, 4).unwrap();
        for doc in corpus.documents() {
            let gold = doc.gold().unwrap();
            let n = gold.len();
            // layer 2 carries the label, layers 0 and 1 are noise
            let arr = Array3::from_shape_fn((n, 3, 4), |(t, k, _)| {
                let noise = rng.random_range(-1.0..1.0);
                if k == 2 {
                    if gold[t] {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    noise
                }
            });
            set.insert(doc.id(), arr).unwrap();
        }
        let features = FeatureSource::contextual(set);
        let (model, report) = train(&corpus, &features, &config).unwrap();
        let w = model.layer_weights.as_ref().unwrap();
        assert_ne!(w.as_slice(), &[1.0 / 3.0; 3]);
        assert!(report.best_dev_f_beta > 0.9, "{}", report.best_dev_f_beta);
        let scores = tag_corpus(&model, &corpus, &features, "ctx").unwrap();
        assert_eq!(scores.len(), corpus.len());
    }
}
