//! Document ranking from post-processed annotations, and rank correlation.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::postprocess::{PostProcessSettings, PostProcessed, Segment};

/// Weight of one segment in [`RankingMethod::SegmentsTokens`]. Larger than
/// any realistic document length, so token count only breaks ties between
/// documents with the same number of segments.
pub const SEGMENT_WEIGHT: f64 = 1e6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingMethod {
    /// `C · segments + relevant tokens`.
    #[default]
    SegmentsTokens,
    /// Sum of all token scores.
    SumScores,
    /// Share of tokens labelled relevant.
    Density,
}

impl RankingMethod {
    pub const ALL: [RankingMethod; 3] = [
        RankingMethod::SegmentsTokens,
        RankingMethod::SumScores,
        RankingMethod::Density,
    ];

    /// Short name used on the command line and in URLs.
    pub fn as_str(self) -> &'static str {
        match self {
            RankingMethod::SegmentsTokens => "segtok",
            RankingMethod::SumScores => "sum",
            RankingMethod::Density => "density",
        }
    }
}

impl fmt::Display for RankingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RankingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "segtok" | "segments_tokens" | "segmentstokens" => Ok(RankingMethod::SegmentsTokens),
            "sum" | "sum_scores" | "sumscores" => Ok(RankingMethod::SumScores),
            "density" => Ok(RankingMethod::Density),
            other => Err(Error::InvalidArgument(format!(
                "unknown ranking method {other:?}; expected segtok, sum or density"
            ))),
        }
    }
}

/// Ranking score of one document.
pub fn score_document(
    method: RankingMethod,
    segments: &[Segment],
    labels: &[bool],
    scores: &[f64],
    token_count: usize,
) -> Result<f64> {
    let relevant = labels.iter().filter(|&&l| l).count() as f64;
    match method {
        RankingMethod::SegmentsTokens => {
            if token_count as f64 >= SEGMENT_WEIGHT {
                log::warn!(
                    "document has {token_count} tokens; segment weight {SEGMENT_WEIGHT} no longer dominates"
                );
            }
            Ok(SEGMENT_WEIGHT * segments.len() as f64 + relevant)
        }
        RankingMethod::SumScores => Ok(scores.iter().sum()),
        RankingMethod::Density => {
            if token_count == 0 {
                return Err(Error::EmptyDocument(
                    "density is undefined for a document without tokens".into(),
                ));
            }
            Ok(relevant / token_count as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDocument {
    pub id: String,
    pub score: f64,
    /// 1 is the highest score.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingResult {
    /// In rank order.
    pub entries: Vec<RankedDocument>,
    pub method: RankingMethod,
    pub settings: PostProcessSettings,
}

impl RankingResult {
    pub fn get(&self, id: &str) -> Option<&RankedDocument> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Sorts `(id, score)` pairs by descending score, ties by ascending id.
pub fn rank_scores(
    scored: Vec<(String, f64)>,
    method: RankingMethod,
    settings: PostProcessSettings,
) -> RankingResult {
    let mut scored = scored;
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    let entries = scored
        .into_iter()
        .enumerate()
        .map(|(i, (id, score))| RankedDocument {
            id,
            score,
            rank: i + 1,
        })
        .collect();
    RankingResult {
        entries,
        method,
        settings,
    }
}

/// Ranks every document of `corpus` from its annotations.
pub fn rank_documents(
    corpus: &Corpus,
    annotations: &PostProcessed,
    method: RankingMethod,
) -> Result<RankingResult> {
    let mut scored = Vec::with_capacity(corpus.len());
    for doc in corpus.documents() {
        let id = doc.id();
        let missing = || Error::UnknownDocument(id.to_owned());
        let score = score_document(
            method,
            annotations.segments(id).ok_or_else(missing)?,
            annotations.labels(id).ok_or_else(missing)?,
            annotations.scores.get(id).ok_or_else(missing)?,
            doc.token_count(),
        )?;
        scored.push((id.to_owned(), score));
    }
    Ok(rank_scores(scored, method, annotations.settings))
}

/// Average (fractional) ranks, 1-based, highest value first.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j share the mean of ranks i+1..=j+1
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "a ranking has zero variance".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman correlation of two paired score vectors, with average ranks
/// for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "paired vectors differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least 2 documents, got {}",
            x.len()
        )));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Spearman correlation between two rankings of the same documents.
/// Uses the document scores, so tied scores share an average rank.
pub fn spearman_rho(a: &RankingResult, b: &RankingResult) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "rankings cover {} and {} documents",
            a.len(),
            b.len()
        )));
    }
    let mut xa = Vec::with_capacity(a.len());
    let mut xb = Vec::with_capacity(a.len());
    let mut by_id: Vec<&RankedDocument> = b.entries.iter().collect();
    by_id.sort_by(|p, q| p.id.cmp(&q.id));
    for entry in &a.entries {
        let other = by_id
            .binary_search_by(|p| p.id.as_str().cmp(&entry.id))
            .map(|i| by_id[i])
            .map_err(|_| Error::UnknownDocument(entry.id.clone()))?;
        xa.push(entry.score);
        xb.push(other.score);
    }
    spearman(&xa, &xb)
}

/// ρ for every (gold method, model method) pair: `matrix[g][m]`, indexed
/// in [`RankingMethod::ALL`] order.
pub fn ranking_method_matrix(
    corpus: &Corpus,
    gold: &PostProcessed,
    model: &PostProcessed,
) -> Result<[[f64; 3]; 3]> {
    let gold_rankings: Vec<RankingResult> = RankingMethod::ALL
        .iter()
        .map(|&m| rank_documents(corpus, gold, m))
        .collect::<Result<_>>()?;
    let model_rankings: Vec<RankingResult> = RankingMethod::ALL
        .iter()
        .map(|&m| rank_documents(corpus, model, m))
        .collect::<Result<_>>()?;
    let mut out = [[0.0; 3]; 3];
    for (g, gr) in gold_rankings.iter().enumerate() {
        for (m, mr) in model_rankings.iter().enumerate() {
            out[g][m] = spearman_rho(gr, mr)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::postprocess::{gold_annotations, segment_scores, ScoreSet};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn seg(start: usize, end: usize) -> Segment {
        Segment { start, end }
    }

    fn ranked(scores: &[(&str, f64)]) -> RankingResult {
        rank_scores(
            scores.iter().map(|&(i, s)| (i.to_owned(), s)).collect(),
            RankingMethod::SumScores,
            PostProcessSettings::default(),
        )
    }

    #[test]
    fn document_scores() {
        let labels = [true; 7];
        let s = score_document(
            RankingMethod::SegmentsTokens,
            &[seg(0, 3), seg(5, 7)],
            &labels,
            &[],
            10,
        )
        .unwrap();
        assert_eq!(s, 2_000_007.0);
        let s = score_document(RankingMethod::SumScores, &[], &[], &[0.2, 0.8, 0.5], 3).unwrap();
        assert_abs_diff_eq!(s, 1.5, epsilon = 1e-12);
        let mut labels = vec![false; 20];
        labels[..5].fill(true);
        let s = score_document(RankingMethod::Density, &[], &labels, &[], 20).unwrap();
        assert_eq!(s, 0.25);
        assert!(score_document(RankingMethod::Density, &[], &[], &[], 0).is_err());
    }

    #[test]
    fn ranks_descending_with_id_ties() {
        let r = ranked(&[("a", 3.0), ("b", 1.0), ("c", 2.0)]);
        let ids: Vec<_> = r.entries.iter().map(|e| (e.id.as_str(), e.rank)).collect();
        assert_eq!(ids, vec![("a", 1), ("c", 2), ("b", 3)]);
        let r = ranked(&[("z", 1.0), ("m", 1.0), ("a", 1.0)]);
        let ids: Vec<_> = r.entries.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, vec!["a", "m", "z"]);
    }

    #[test]
    fn segment_count_dominates_tokens() {
        let two = score_document(
            RankingMethod::SegmentsTokens,
            &[seg(0, 0), seg(2, 2)],
            &[true, false, true],
            &[],
            3,
        )
        .unwrap();
        let one = score_document(
            RankingMethod::SegmentsTokens,
            &[seg(0, 499)],
            &[true; 500],
            &[],
            500,
        )
        .unwrap();
        assert!(two > one);
    }

    #[test]
    fn rho_extremes() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        assert_abs_diff_eq!(spearman(&x, &x).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(spearman(&x, &rev).unwrap(), -1.0, epsilon = 1e-12);
        assert!(matches!(
            spearman(&[1.0], &[1.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
    }

    #[test]
    fn average_ranks_for_ties() {
        assert_eq!(
            average_ranks(&[5.0, 1.0, 5.0, 3.0]),
            vec![1.5, 4.0, 1.5, 3.0]
        );
    }

    #[test]
    fn rho_pairs_by_document_id() {
        let a = ranked(&[("a", 3.0), ("b", 2.0), ("c", 1.0)]);
        let b = ranked(&[("c", 10.0), ("b", 20.0), ("a", 30.0)]);
        assert_abs_diff_eq!(spearman_rho(&a, &b).unwrap(), 1.0, epsilon = 1e-12);
        let c = ranked(&[("a", 1.0), ("b", 2.0), ("x", 3.0)]);
        assert!(spearman_rho(&a, &c).is_err());
    }

    #[test]
    fn parses_method_names() {
        for m in RankingMethod::ALL {
            assert_eq!(m.as_str().parse::<RankingMethod>().unwrap(), m);
        }
        assert!("best".parse::<RankingMethod>().is_err());
    }

    #[test]
    fn gold_matrix_diagonal_is_one() {
        let docs: Vec<Document> = (0..6)
            .map(|i| {
                let words: Vec<String> = (0..12).map(|t| format!("w{t}")).collect();
                let gold: Vec<bool> = (0..12).map(|t| t % (i + 2) == 0 || t < i).collect();
                Document::from_lines(format!("d{i}"), &[words])
                    .with_gold(gold)
                    .unwrap()
            })
            .collect();
        let corpus = Corpus::new("c", docs).unwrap();
        let gold = gold_annotations(&corpus).unwrap();
        let model = segment_scores(gold.scores.clone(), PostProcessSettings::default()).unwrap();
        let m = ranking_method_matrix(&corpus, &gold, &model).unwrap();
        for (i, row) in m.iter().enumerate() {
            assert_abs_diff_eq!(row[i], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rank_documents_requires_all_documents() {
        let corpus = Corpus::new(
            "c",
            vec![
                Document::from_lines("a", &[vec!["x"]]),
                Document::from_lines("b", &[vec!["y"]]),
            ],
        )
        .unwrap();
        let mut set = ScoreSet::new("m");
        set.insert("a", vec![0.9]).unwrap();
        let ann = segment_scores(set, PostProcessSettings::default()).unwrap();
        assert!(matches!(
            rank_documents(&corpus, &ann, RankingMethod::SumScores),
            Err(Error::UnknownDocument(_))
        ));
    }

    proptest! {
        #[test]
        fn monotone_transform_keeps_ranking(scores in prop::collection::vec(0.0f64..1.0, 2..30)) {
            let a = rank_scores(
                scores.iter().enumerate().map(|(i, &s)| (format!("d{i:02}"), s)).collect(),
                RankingMethod::SumScores,
                PostProcessSettings::default(),
            );
            let b = rank_scores(
                scores.iter().enumerate().map(|(i, &s)| (format!("d{i:02}"), (3.0 * s).exp() - 7.0)).collect(),
                RankingMethod::SumScores,
                PostProcessSettings::default(),
            );
            let ia: Vec<_> = a.entries.iter().map(|e| &e.id).collect();
            let ib: Vec<_> = b.entries.iter().map(|e| &e.id).collect();
            prop_assert_eq!(ia, ib);
        }

        #[test]
        fn rho_symmetric(x in prop::collection::vec(0u8..6, 3..25), seed in 0u64..1000) {
            let x: Vec<f64> = x.into_iter().map(f64::from).collect();
            let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| ((i as u64 * 7919 + seed) % 13) as f64 + v).collect();
            if let (Ok(a), Ok(b)) = (spearman(&x, &y), spearman(&y, &x)) {
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!((-1.0..=1.0).contains(&a));
            }
        }

        #[test]
        fn rank_permutation(scores in prop::collection::vec(0u8..4, 1..20)) {
            let r = rank_scores(
                scores.iter().enumerate().map(|(i, &s)| (format!("d{i:02}"), f64::from(s))).collect(),
                RankingMethod::SumScores,
                PostProcessSettings::default(),
            );
            let mut ranks: Vec<usize> = r.entries.iter().map(|e| e.rank).collect();
            ranks.sort_unstable();
            prop_assert_eq!(ranks, (1..=scores.len()).collect::<Vec<_>>());
        }
    }
}
