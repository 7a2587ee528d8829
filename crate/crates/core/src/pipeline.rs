//! K-fold cross-validation: every document is scored by a model that never
//! saw it, and smoothed with transitions estimated on that model's
//! training folds.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{evaluate_scores, macro_average, EvalResult};
use crate::corpus::{split_folds, Corpus};
use crate::error::Result;
use crate::features::FeatureSource;
use crate::postprocess::{estimate_transitions, smooth_scores, ScoreSet, TransitionModel};
use crate::tagger::{tag_corpus, train, TaggerConfig, TrainReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub test_documents: Vec<String>,
    pub train_report: TrainReport,
    pub transitions: TransitionModel,
    pub raw: EvalResult,
    pub smoothed: EvalResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    /// Out-of-fold tagger scores, in corpus order.
    pub raw: ScoreSet,
    /// The same scores after per-fold smoothing.
    pub smoothed: ScoreSet,
    pub folds: Vec<FoldOutcome>,
    pub macro_raw: EvalResult,
    pub macro_smoothed: EvalResult,
    pub threshold: f64,
}

/// Trains one model per fold and scores its held-out documents. Folds run
/// in parallel; results are identical to a serial run.
pub fn cross_validate(
    corpus: &Corpus,
    features: &FeatureSource,
    config: &TaggerConfig,
    fold_count: usize,
    seed: u64,
    threshold: f64,
    model_id: &str,
) -> Result<CrossValidation> {
    config.validate()?;
    let split = split_folds(corpus, fold_count, seed)?;
    let per_fold: Vec<(FoldOutcome, ScoreSet, ScoreSet)> = (0..fold_count)
        .into_par_iter()
        .map(|fold| {
            let (train_part, test_part) = split.split(corpus, fold);
            let (model, report) = train(&train_part, features, config)?;
            let transitions = estimate_transitions(&train_part)?;
            let raw = tag_corpus(&model, &test_part, features, model_id)?;
            let smoothed = smooth_scores(&raw, &test_part, &transitions)?;
            let outcome = FoldOutcome {
                fold,
                test_documents: test_part
                    .documents()
                    .iter()
                    .map(|d| d.id().to_owned())
                    .collect(),
                train_report: report,
                transitions,
                raw: evaluate_scores(&raw, &test_part, threshold, config.beta)?,
                smoothed: evaluate_scores(&smoothed, &test_part, threshold, config.beta)?,
            };
            log::info!(
                "fold {fold}: F {:.4} raw, {:.4} smoothed",
                outcome.raw.f_beta,
                outcome.smoothed.f_beta
            );
            Ok((outcome, raw, smoothed))
        })
        .collect::<Result<_>>()?;

    let mut raw_by_id: HashMap<&str, &[f64]> = HashMap::new();
    let mut smooth_by_id: HashMap<&str, &[f64]> = HashMap::new();
    for (_, raw, smoothed) in &per_fold {
        raw_by_id.extend(raw.iter());
        smooth_by_id.extend(smoothed.iter());
    }
    let mut raw = ScoreSet::new(model_id);
    let mut smoothed = ScoreSet::new(model_id);
    smoothed.smoothed = true;
    for doc in corpus.documents() {
        raw.insert(doc.id(), raw_by_id[doc.id()].to_vec())?;
        smoothed.insert(doc.id(), smooth_by_id[doc.id()].to_vec())?;
    }

    let folds: Vec<FoldOutcome> = per_fold.into_iter().map(|(o, _, _)| o).collect();
    let macro_raw = macro_average(&folds.iter().map(|f| f.raw).collect::<Vec<_>>())?;
    let macro_smoothed = macro_average(&folds.iter().map(|f| f.smoothed).collect::<Vec<_>>())?;
    Ok(CrossValidation {
        raw,
        smoothed,
        folds,
        macro_raw,
        macro_smoothed,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic_corpus, SyntheticSpec};

    #[test]
    fn every_document_scored_once_out_of_fold() {
        let spec = SyntheticSpec {
            doc_count: 9,
            tokens_per_doc: 80,
            relevant_fraction: 0.3,
            segments_per_doc: 2.0,
            dimension: 6,
            noise: 0.5,
            ..Default::default()
        };
        let (corpus, table) = generate_synthetic_corpus(&spec).unwrap();
        let features = FeatureSource::static_window(table, 2);
        let config = TaggerConfig {
            hidden_layers: vec![8],
            max_epochs: 3,
            ..Default::default()
        };
        let cv = cross_validate(&corpus, &features, &config, 3, 1, 0.5, "m").unwrap();
        assert_eq!(cv.raw.len(), 9);
        cv.raw.check_alignment(&corpus).unwrap();
        cv.smoothed.check_alignment(&corpus).unwrap();
        let mut seen: Vec<&String> = cv.folds.iter().flat_map(|f| &f.test_documents).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 9);
        for f in &cv.folds {
            for id in &f.test_documents {
                assert!(!f.train_report.dev_documents.contains(id));
            }
        }
        let again = cross_validate(&corpus, &features, &config, 3, 1, 0.5, "m").unwrap();
        assert_eq!(again, cv);
    }
}
