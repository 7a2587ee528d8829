use ndarray::{s, Array3};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{dropout_mask, TaggerModel};
use super::TaggerConfig;
use crate::analysis::{evaluate, EvalResult};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::features::FeatureSource;
use crate::postprocess::binarize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub positives_drawn: usize,
    pub negatives_drawn: usize,
    pub train_loss: f64,
    pub dev: EvalResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStopping,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochReport>,
    pub stopping_epoch: usize,
    pub stop_reason: StopReason,
    pub best_epoch: usize,
    pub best_dev_f_beta: f64,
    pub dev_documents: Vec<String>,
    pub config: TaggerConfig,
}

/// Per-epoch sample sizes: `round(fraction × positives)` relevant tokens
/// and `round(ratio × drawn positives)` irrelevant ones.
pub fn epoch_sample_sizes(total_positives: usize, config: &TaggerConfig) -> (usize, usize) {
    let pos = (config.positive_fraction * total_positives as f64).round() as usize;
    let neg = (config.negative_ratio * pos as f64).round() as usize;
    (pos, neg)
}

/// Draws `count` items from `pool`: without replacement when the pool is
/// large enough, with replacement otherwise.
fn draw<T: Copy>(pool: &[T], count: usize, rng: &mut impl Rng) -> Vec<T> {
    if count <= pool.len() {
        index::sample(rng, pool.len(), count)
            .into_iter()
            .map(|i| pool[i])
            .collect()
    } else {
        (0..count)
            .map(|_| pool[rng.random_range(0..pool.len())])
            .collect()
    }
}

/// One epoch's shuffled training sample: `(document, token, relevant)`.
pub fn draw_epoch_sample(
    positives: &[(usize, usize)],
    negatives: &[(usize, usize)],
    config: &TaggerConfig,
    rng: &mut impl Rng,
) -> Vec<(usize, usize, bool)> {
    let (n_pos, n_neg) = epoch_sample_sizes(positives.len(), config);
    let mut sample: Vec<(usize, usize, bool)> = draw(positives, n_pos, rng)
        .into_iter()
        .map(|(d, t)| (d, t, true))
        .collect();
    if !negatives.is_empty() {
        sample.extend(
            draw(negatives, n_neg, rng)
                .into_iter()
                .map(|(d, t)| (d, t, false)),
        );
    }
    sample.shuffle(rng);
    sample
}

struct Split {
    train: Vec<usize>,
    dev: Vec<usize>,
}

fn split_dev(doc_count: usize, dev_fraction: f64, rng: &mut impl Rng) -> Split {
    let mut order: Vec<usize> = (0..doc_count).collect();
    order.shuffle(rng);
    let n_dev = ((dev_fraction * doc_count as f64).round() as usize).clamp(1, doc_count - 1);
    let mut dev = order[..n_dev].to_vec();
    let mut train = order[n_dev..].to_vec();
    dev.sort_unstable();
    train.sort_unstable();
    Split { train, dev }
}

/// Trains a tagger with per-epoch resampling, class weighting and
/// early stopping on held-out F-beta. Returns the best model seen.
pub fn train(
    corpus: &Corpus,
    features: &FeatureSource,
    config: &TaggerConfig,
) -> Result<(TaggerModel, TrainReport)> {
    config.validate()?;
    if corpus.len() < 2 {
        return Err(Error::TrainingData(
            "need at least two documents to hold out a dev split".into(),
        ));
    }
    for doc in corpus.documents() {
        if doc.gold().is_none() {
            return Err(Error::MissingGold(doc.id().to_owned()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let split = split_dev(corpus.len(), config.dev_fraction, &mut rng);

    let inputs: Vec<Array3<f64>> = corpus
        .documents()
        .iter()
        .map(|d| features.document_inputs(d))
        .collect::<Result<_>>()?;

    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for &d in &split.train {
        let gold = corpus.documents()[d].gold().expect("checked");
        for (t, &g) in gold.iter().enumerate() {
            if g {
                positives.push((d, t));
            } else {
                negatives.push((d, t));
            }
        }
    }
    if positives.is_empty() {
        return Err(Error::TrainingData(
            "no relevant tokens in the training split".into(),
        ));
    }
    if negatives.is_empty() {
        return Err(Error::TrainingData(
            "no irrelevant tokens in the training split".into(),
        ));
    }

    let dev_gold: Vec<bool> = split
        .dev
        .iter()
        .flat_map(|&d| {
            corpus.documents()[d]
                .gold()
                .expect("checked")
                .iter()
                .copied()
        })
        .collect();

    let (layers, dim) = (features.layer_count(), features.dimension());
    let mut model = TaggerModel::new(
        dim,
        features.initial_layer_weights().cloned(),
        config,
        &mut rng,
    );
    let mut best = model.clone();
    let mut best_score = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut waited = 0;
    let mut epochs = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=config.max_epochs {
        let sample = draw_epoch_sample(&positives, &negatives, config, &mut rng);
        let positives_drawn = sample.iter().filter(|s| s.2).count();
        let mut loss_sum = 0.0;
        for batch in sample.chunks(config.batch_size) {
            let mut x = Array3::zeros((batch.len(), layers, dim));
            for (row, &(d, t, _)) in batch.iter().enumerate() {
                x.slice_mut(s![row, .., ..])
                    .assign(&inputs[d].slice(s![t, .., ..]));
            }
            let labels: Vec<bool> = batch.iter().map(|s| s.2).collect();
            let mask = (config.dropout_rate > 0.0)
                .then(|| dropout_mask(batch.len(), dim, config.dropout_rate, &mut rng));
            let (loss, grads) = model.loss_and_gradients(
                x.view(),
                &labels,
                config.relevant_class_weight,
                mask.as_ref(),
            )?;
            loss_sum += loss * batch.len() as f64;
            model.apply_gradients(&grads, config.learning_rate);
        }

        let mut dev_scores = Vec::with_capacity(dev_gold.len());
        for &d in &split.dev {
            dev_scores.extend(model.predict(inputs[d].view())?);
        }
        let dev = evaluate(
            &binarize(&dev_scores, config.eval_threshold),
            &dev_gold,
            config.beta,
        );
        log::debug!(
            "epoch {epoch}: loss {:.5} dev P {:.4} R {:.4} F {:.4}",
            loss_sum / sample.len() as f64,
            dev.precision,
            dev.recall,
            dev.f_beta
        );
        epochs.push(EpochReport {
            epoch,
            positives_drawn,
            negatives_drawn: sample.len() - positives_drawn,
            train_loss: loss_sum / sample.len() as f64,
            dev,
        });

        if dev.f_beta > best_score + config.early_stop_delta {
            best_score = dev.f_beta;
            best_epoch = epoch;
            best = model.clone();
            waited = 0;
        } else {
            waited += 1;
            if waited >= config.patience {
                stop_reason = StopReason::EarlyStopping;
                break;
            }
        }
    }

    let stopping_epoch = epochs.len();
    best.metadata.epochs_run = stopping_epoch;
    best.metadata.best_epoch = best_epoch;
    best.metadata.best_dev_f_beta = best_score;
    let report = TrainReport {
        epochs,
        stopping_epoch,
        stop_reason,
        best_epoch,
        best_dev_f_beta: best_score,
        dev_documents: split
            .dev
            .iter()
            .map(|&d| corpus.documents()[d].id().to_owned())
            .collect(),
        config: config.clone(),
    };
    Ok((best, report))
}
