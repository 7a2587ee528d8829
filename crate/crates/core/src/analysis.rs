//! Evaluation metrics and qualitative analysis of annotation sets.
//!
//! Zero denominators evaluate to 0: precision with no predicted positives,
//! recall with no gold positives, and F-beta when both are 0.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::postprocess::{binarize, ScoreSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
    pub beta: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// `(1 + β²)·P·R / (β²·P + R)`, 0 when `P = R = 0`.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

impl EvalResult {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, beta: f64) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        EvalResult {
            precision,
            recall,
            f_beta: f_beta(precision, recall, beta),
            beta,
            tp,
            fp,
            fn_,
        }
    }

    /// Adds the counts of `other`; the metrics are recomputed (micro).
    pub fn merge(&self, other: &EvalResult) -> EvalResult {
        EvalResult::from_counts(
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn_ + other.fn_,
            self.beta,
        )
    }
}

/// Token-level precision, recall and F-beta of `predictions` against `gold`.
pub fn evaluate(predictions: &[bool], gold: &[bool], beta: f64) -> EvalResult {
    debug_assert_eq!(predictions.len(), gold.len());
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&p, &g) in predictions.iter().zip(gold) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    EvalResult::from_counts(tp, fp, fn_, beta)
}

/// Evaluates binarized scores against corpus gold over the documents in
/// `scores` (micro-averaged over tokens).
pub fn evaluate_scores(
    scores: &ScoreSet,
    corpus: &Corpus,
    threshold: f64,
    beta: f64,
) -> Result<EvalResult> {
    let mut total = EvalResult::from_counts(0, 0, 0, beta);
    for (id, s) in scores.iter() {
        let doc = corpus
            .document(id)
            .ok_or_else(|| Error::UnknownDocument(id.to_owned()))?;
        let gold = doc
            .gold()
            .ok_or_else(|| Error::MissingGold(id.to_owned()))?;
        if gold.len() != s.len() {
            return Err(Error::ScoreAlignment {
                document: id.to_owned(),
                expected: gold.len(),
                found: s.len(),
            });
        }
        total = total.merge(&evaluate(&binarize(s, threshold), gold, beta));
    }
    Ok(total)
}

/// Unweighted mean of each metric across folds. Counts are summed.
pub fn macro_average(results: &[EvalResult]) -> Result<EvalResult> {
    let Some(first) = results.first() else {
        return Err(Error::InvalidArgument("macro average of zero folds".into()));
    };
    let n = results.len() as f64;
    let mean = |f: fn(&EvalResult) -> f64| results.iter().map(f).sum::<f64>() / n;
    Ok(EvalResult {
        precision: mean(|r| r.precision),
        recall: mean(|r| r.recall),
        f_beta: mean(|r| r.f_beta),
        beta: first.beta,
        tp: results.iter().map(|r| r.tp).sum(),
        fp: results.iter().map(|r| r.fp).sum(),
        fn_: results.iter().map(|r| r.fn_).sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    #[serde(flatten)]
    pub result: EvalResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSweep {
    pub points: Vec<SweepPoint>,
    /// Threshold with the highest F-beta; the lowest one on ties.
    pub best_threshold: f64,
    pub best: EvalResult,
}

/// Evaluates at `grid_size + 1` evenly spaced thresholds from 0 to 1.
pub fn threshold_sweep(
    scores: &ScoreSet,
    corpus: &Corpus,
    beta: f64,
    grid_size: usize,
) -> Result<ThresholdSweep> {
    if grid_size == 0 {
        return Err(Error::InvalidArgument("grid_size must be > 0".into()));
    }
    let mut pairs = Vec::new();
    for (id, s) in scores.iter() {
        let doc = corpus
            .document(id)
            .ok_or_else(|| Error::UnknownDocument(id.to_owned()))?;
        let gold = doc
            .gold()
            .ok_or_else(|| Error::MissingGold(id.to_owned()))?;
        if gold.len() != s.len() {
            return Err(Error::ScoreAlignment {
                document: id.to_owned(),
                expected: gold.len(),
                found: s.len(),
            });
        }
        pairs.extend(s.iter().copied().zip(gold.iter().copied()));
    }
    let points: Vec<SweepPoint> = (0..=grid_size)
        .map(|i| {
            let threshold = i as f64 / grid_size as f64;
            let (mut tp, mut fp, mut fn_) = (0, 0, 0);
            for &(s, g) in &pairs {
                match (s >= threshold, g) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    _ => {}
                }
            }
            SweepPoint {
                threshold,
                result: EvalResult::from_counts(tp, fp, fn_, beta),
            }
        })
        .collect();
    let best = points
        .iter()
        .fold(&points[0], |best, p| {
            if p.result.f_beta > best.result.f_beta {
                p
            } else {
                best
            }
        })
        .clone();
    Ok(ThresholdSweep {
        best_threshold: best.threshold,
        best: best.result,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexicalEntry {
    pub token: String,
    pub mean_score: f64,
    pub frequency: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexicalizationReport {
    /// Sorted by mean score, highest first; ties by token text.
    pub entries: Vec<LexicalEntry>,
    pub min_frequency: usize,
    pub case_folded: bool,
}

impl LexicalizationReport {
    pub fn get(&self, token: &str) -> Option<&LexicalEntry> {
        self.entries.iter().find(|e| e.token == token)
    }
}

/// Mean score of every distinct token text over its occurrences in the
/// scored documents. Tokens seen fewer than `min_frequency` times are
/// dropped.
pub fn lexicalization(
    scores: &ScoreSet,
    corpus: &Corpus,
    min_frequency: usize,
    case_fold: bool,
) -> Result<LexicalizationReport> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (id, s) in scores.iter() {
        let doc = corpus
            .document(id)
            .ok_or_else(|| Error::UnknownDocument(id.to_owned()))?;
        if doc.token_count() != s.len() {
            return Err(Error::ScoreAlignment {
                document: id.to_owned(),
                expected: doc.token_count(),
                found: s.len(),
            });
        }
        for (tok, &score) in doc.tokens().zip(s) {
            let key = if case_fold {
                tok.text.to_lowercase()
            } else {
                tok.text.clone()
            };
            let e = acc.entry(key).or_insert((0.0, 0));
            e.0 += score;
            e.1 += 1;
        }
    }
    let mut entries: Vec<LexicalEntry> = acc
        .into_iter()
        .filter(|(_, (_, n))| *n >= min_frequency)
        .map(|(token, (sum, n))| LexicalEntry {
            token,
            mean_score: sum / n as f64,
            frequency: n,
        })
        .collect();
    entries.sort_by(|a, b| {
        b.mean_score
            .total_cmp(&a.mean_score)
            .then_with(|| a.token.cmp(&b.token))
    });
    Ok(LexicalizationReport {
        entries,
        min_frequency,
        case_folded: case_fold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreHistogram {
    /// `bins + 1` edges over `[0, 1]`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl ScoreHistogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Share of scores falling in `[lo, hi]`, counted per score rather than
    /// per bin.
    pub fn share_within(scores: impl IntoIterator<Item = f64>, ranges: &[(f64, f64)]) -> f64 {
        let (mut inside, mut total) = (0usize, 0usize);
        for s in scores {
            total += 1;
            if ranges.iter().any(|&(lo, hi)| s >= lo && s <= hi) {
                inside += 1;
            }
        }
        if total == 0 {
            0.0
        } else {
            inside as f64 / total as f64
        }
    }
}

/// Equal-width bins over `[0, 1]`; bins are half-open except the last.
pub fn score_histogram(
    scores: impl IntoIterator<Item = f64>,
    bins: usize,
) -> Result<ScoreHistogram> {
    if bins == 0 {
        return Err(Error::InvalidArgument(
            "histogram needs at least one bin".into(),
        ));
    }
    let mut counts = vec![0usize; bins];
    for s in scores {
        let idx = ((s * bins as f64).floor() as isize).clamp(0, bins as isize - 1) as usize;
        counts[idx] += 1;
    }
    let edges = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    Ok(ScoreHistogram { edges, counts })
}
