//! Post-processing of raw token scores: decision thresholding, segment
//! extraction and collapsing, and Viterbi smoothing.
//!
//! Order of operations is fixed: smoothing (optional) → binarize → extract
//! segments → collapse.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Scores are clamped to `[SCORE_CLAMP, 1 - SCORE_CLAMP]` before smoothing
/// so no path probability is zero.
pub const SCORE_CLAMP: f64 = 1e-6;

/// Relevance scores in `[0, 1]`, one per token, keyed by document id in
/// corpus order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    pub model_id: String,
    pub smoothed: bool,
    scores: IndexMap<String, Vec<f64>>,
}

impl ScoreSet {
    pub fn new(model_id: impl Into<String>) -> Self {
        ScoreSet {
            model_id: model_id.into(),
            smoothed: false,
            scores: IndexMap::new(),
        }
    }

    pub fn insert(&mut self, document_id: impl Into<String>, scores: Vec<f64>) -> Result<()> {
        let document_id = document_id.into();
        if let Some(bad) = scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::InvalidArgument(format!(
                "document {document_id}, token {bad}: score {} outside [0, 1]",
                scores[bad]
            )));
        }
        self.scores.insert(document_id, scores);
        Ok(())
    }

    pub fn get(&self, document_id: &str) -> Option<&[f64]> {
        self.scores.get(document_id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.scores.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// All token scores in document order.
    pub fn all_scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.scores.values().flatten().copied()
    }

    /// Checks there is exactly one score per token of every corpus document.
    pub fn check_alignment(&self, corpus: &Corpus) -> Result<()> {
        for doc in corpus.documents() {
            let found = self.get(doc.id()).map(<[f64]>::len);
            if found != Some(doc.token_count()) {
                return Err(Error::ScoreAlignment {
                    document: doc.id().to_owned(),
                    expected: doc.token_count(),
                    found: found.unwrap_or(0),
                });
            }
        }
        if let Some(extra) = self.scores.keys().find(|id| corpus.document(id).is_none()) {
            return Err(Error::UnknownDocument(extra.clone()));
        }
        Ok(())
    }

    /// Reads line-delimited score records. Each record is either
    /// `{"id": DOC, "scores": [...]}` or `{DOC: [...]}`; an optional
    /// `{"meta": {...}}` record carries provenance.
    pub fn read_jsonl(reader: impl BufRead, default_model_id: &str) -> Result<Self> {
        let mut set = ScoreSet::new(default_model_id);
        for (i, line) in reader.lines().enumerate() {
            let record = i + 1;
            let malformed = |message: String| Error::MalformedRecord { record, message };
            let line = line.map_err(|e| malformed(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let value: Value = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
            let Value::Object(mut obj) = value else {
                return Err(malformed("expected a JSON object".into()));
            };
            if let Some(meta) = obj.remove("meta") {
                if let Some(id) = meta.get("model_id").and_then(Value::as_str) {
                    set.model_id = id.to_owned();
                }
                if let Some(s) = meta.get("smoothed").and_then(Value::as_bool) {
                    set.smoothed = s;
                }
                continue;
            }
            let (id, scores) = match (obj.remove("id"), obj.remove("scores")) {
                (Some(Value::String(id)), Some(scores)) => (id, scores),
                (None, None) if obj.len() == 1 => obj.into_iter().next().expect("one entry"),
                _ => {
                    return Err(malformed(
                        "expected {\"id\", \"scores\"} or {id: scores}".into(),
                    ))
                }
            };
            let scores: Vec<f64> = serde_json::from_value(scores)
                .map_err(|e| malformed(format!("document {id}: {e}")))?;
            if set.scores.contains_key(&id) {
                return Err(malformed(format!("duplicate document {id}")));
            }
            set.insert(id, scores)
                .map_err(|e| malformed(e.to_string()))?;
        }
        Ok(set)
    }

    /// Writes a meta record (provenance plus `extra` fields) followed by one
    /// record per document.
    pub fn write_jsonl(&self, mut w: impl Write, extra: Option<&Value>) -> std::io::Result<()> {
        let mut meta = serde_json::Map::new();
        meta.insert("model_id".into(), Value::from(self.model_id.clone()));
        meta.insert("smoothed".into(), Value::from(self.smoothed));
        if let Some(Value::Object(extra)) = extra {
            for (k, v) in extra {
                meta.insert(k.clone(), v.clone());
            }
        }
        serde_json::to_writer(&mut w, &serde_json::json!({ "meta": meta }))?;
        w.write_all(b"\n")?;
        for (id, scores) in &self.scores {
            serde_json::to_writer(&mut w, &serde_json::json!({ "id": id, "scores": scores }))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>, extra: Option<&Value>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_jsonl(&mut w, extra)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<ScoreSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let default_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    ScoreSet::read_jsonl(BufReader::new(file), &default_id)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PostProcessSettings {
    pub threshold: f64,
    pub collapse_gap: usize,
    pub smoothing: bool,
}

impl Default for PostProcessSettings {
    fn default() -> Self {
        PostProcessSettings {
            threshold: 0.5,
            collapse_gap: 0,
            smoothing: false,
        }
    }
}

impl PostProcessSettings {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidArgument(format!(
                "threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Inclusive token-index span of relevant tokens within one document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// `score >= threshold` is relevant.
pub fn binarize(scores: &[f64], threshold: f64) -> Vec<bool> {
    scores.iter().map(|&s| s >= threshold).collect()
}

/// Maximal runs of relevant labels.
pub fn extract_segments(labels: &[bool]) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &l) in labels.iter().enumerate() {
        match (l, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(Segment {
                    start: s,
                    end: i - 1,
                });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Segment {
            start: s,
            end: labels.len() - 1,
        });
    }
    out
}

/// Merges consecutive segments separated by `gap` or fewer tokens.
/// Segments must be sorted and disjoint.
pub fn collapse_segments(segments: &[Segment], gap: usize) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::with_capacity(segments.len());
    for &seg in segments {
        match out.last_mut() {
            Some(prev) if seg.start - prev.end - 1 <= gap => prev.end = seg.end,
            _ => out.push(seg),
        }
    }
    out
}

/// Two-state (irrelevant = 0, relevant = 1) transition matrix and initial
/// distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    pub transition: [[f64; 2]; 2],
    pub initial: [f64; 2],
}

impl TransitionModel {
    pub fn new(transition: [[f64; 2]; 2], initial: [f64; 2]) -> Result<Self> {
        let rows = [transition[0], transition[1], initial];
        for row in rows {
            if row.iter().any(|&p| !(p > 0.0 && p <= 1.0)) || ((row[0] + row[1]) - 1.0).abs() > 1e-9
            {
                return Err(Error::InvalidArgument(format!(
                    "transition probabilities must be positive and sum to 1: {row:?}"
                )));
            }
        }
        Ok(TransitionModel {
            transition,
            initial,
        })
    }

    pub fn uniform() -> Self {
        TransitionModel {
            transition: [[0.5; 2]; 2],
            initial: [0.5; 2],
        }
    }
}

/// Counts gold label transitions within lines, add-one smoothed.
pub fn estimate_transitions(corpus: &Corpus) -> Result<TransitionModel> {
    let mut counts = [[0u64; 2]; 2];
    let mut starts = [0u64; 2];
    for doc in corpus.documents() {
        let gold = doc
            .gold()
            .ok_or_else(|| Error::MissingGold(doc.id().to_owned()))?;
        for line in doc.line_ranges() {
            let labels = &gold[line];
            if let Some(&first) = labels.first() {
                starts[usize::from(first)] += 1;
            }
            for pair in labels.windows(2) {
                counts[usize::from(pair[0])][usize::from(pair[1])] += 1;
            }
        }
    }
    if corpus.is_empty() {
        return Err(Error::MissingGold(corpus.name().to_owned()));
    }
    let row = |c: [u64; 2]| {
        let total = (c[0] + c[1] + 2) as f64;
        [(c[0] + 1) as f64 / total, (c[1] + 1) as f64 / total]
    };
    Ok(TransitionModel {
        transition: [row(counts[0]), row(counts[1])],
        initial: row(starts),
    })
}

/// Viterbi lattice for one line, with the smoothed per-token scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ViterbiLattice {
    /// `log W[i][j]`: best path log-probability ending in state `j` at `i`.
    pub log_path: Vec<[f64; 2]>,
    /// Backtraced most likely state sequence.
    pub states: Vec<usize>,
    /// Smoothed relevance score per token.
    pub smoothed: Vec<f64>,
}

impl ViterbiLattice {
    /// `W` in probability space.
    pub fn path_probabilities(&self) -> Vec<[f64; 2]> {
        self.log_path
            .iter()
            .map(|w| [w[0].exp(), w[1].exp()])
            .collect()
    }
}

fn clamp_score(s: f64) -> f64 {
    s.clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP)
}

/// Runs the lattice in log space. Tagger outputs serve as per-step state
/// probabilities. Ties go to the irrelevant state.
pub fn viterbi_lattice(
    line_scores: &[f64],
    transitions: &TransitionModel,
) -> Result<ViterbiLattice> {
    if line_scores.is_empty() {
        return Err(Error::EmptyLine);
    }
    let log_a = transitions.transition.map(|row| row.map(f64::ln));
    let log_emit = |s: f64| {
        let s = clamp_score(s);
        [(1.0 - s).ln(), s.ln()]
    };
    let n = line_scores.len();
    let mut log_w = Vec::with_capacity(n);
    let mut back = Vec::with_capacity(n);

    let e0 = log_emit(line_scores[0]);
    log_w.push([
        transitions.initial[0].ln() + e0[0],
        transitions.initial[1].ln() + e0[1],
    ]);
    back.push([0usize; 2]);
    for &s in &line_scores[1..] {
        let prev: [f64; 2] = *log_w.last().expect("non-empty");
        let e = log_emit(s);
        let mut w = [0.0; 2];
        let mut b = [0usize; 2];
        for j in 0..2 {
            let from0 = prev[0] + log_a[0][j];
            let from1 = prev[1] + log_a[1][j];
            let (best, arg) = if from1 > from0 {
                (from1, 1)
            } else {
                (from0, 0)
            };
            w[j] = best + e[j];
            b[j] = arg;
        }
        log_w.push(w);
        back.push(b);
    }

    let mut states = vec![0usize; n];
    let last = log_w[n - 1];
    states[n - 1] = usize::from(last[1] > last[0]);
    for i in (1..n).rev() {
        states[i - 1] = back[i][states[i]];
    }

    let mut smoothed = Vec::with_capacity(n);
    // first token: normalise W over states directly
    smoothed.push(normalised_relevant(log_w[0][0], log_w[0][1]));
    for i in 1..n {
        // Q[j,i] = W[j,i] / W[R_{i-1}, i-1]; s_i = Q[1,i] / (Q[0,i] + Q[1,i])
        let denom = log_w[i - 1][states[i - 1]];
        let log_q = [log_w[i][0] - denom, log_w[i][1] - denom];
        smoothed.push(normalised_relevant(log_q[0], log_q[1]));
    }
    Ok(ViterbiLattice {
        log_path: log_w,
        states,
        smoothed,
    })
}

/// `b / (a + b)` for log-domain `a`, `b`.
fn normalised_relevant(log_a: f64, log_b: f64) -> f64 {
    let m = log_a.max(log_b);
    let (a, b) = ((log_a - m).exp(), (log_b - m).exp());
    b / (a + b)
}

/// Smoothed scores for one line.
pub fn viterbi_smooth(line_scores: &[f64], transitions: &TransitionModel) -> Result<Vec<f64>> {
    Ok(viterbi_lattice(line_scores, transitions)?.smoothed)
}

/// Smooths every line of every document independently.
pub fn smooth_scores(
    scores: &ScoreSet,
    corpus: &Corpus,
    transitions: &TransitionModel,
) -> Result<ScoreSet> {
    scores.check_alignment(corpus)?;
    let mut out = ScoreSet::new(scores.model_id.clone());
    out.smoothed = true;
    for doc in corpus.documents() {
        let raw = scores.get(doc.id()).expect("aligned");
        let mut smoothed = Vec::with_capacity(raw.len());
        for line in doc.line_ranges() {
            if !line.is_empty() {
                smoothed.extend(viterbi_smooth(&raw[line], transitions)?);
            }
        }
        out.insert(doc.id(), smoothed)?;
    }
    Ok(out)
}

/// Result of the post-processing pipeline over a score set.
#[derive(Debug, Clone, PartialEq)]
pub struct PostProcessed {
    /// Scores after optional smoothing.
    pub scores: ScoreSet,
    pub labels: IndexMap<String, Vec<bool>>,
    pub segments: IndexMap<String, Vec<Segment>>,
    pub settings: PostProcessSettings,
}

impl PostProcessed {
    pub fn labels(&self, document_id: &str) -> Option<&[bool]> {
        self.labels.get(document_id).map(Vec::as_slice)
    }

    pub fn segments(&self, document_id: &str) -> Option<&[Segment]> {
        self.segments.get(document_id).map(Vec::as_slice)
    }
}

/// Binarizes and segments already-smoothed (or raw) scores.
pub fn segment_scores(scores: ScoreSet, settings: PostProcessSettings) -> Result<PostProcessed> {
    settings.validate()?;
    let mut labels = IndexMap::with_capacity(scores.len());
    let mut segments = IndexMap::with_capacity(scores.len());
    for (id, s) in scores.iter() {
        let l = binarize(s, settings.threshold);
        let segs = collapse_segments(&extract_segments(&l), settings.collapse_gap);
        labels.insert(id.to_owned(), l);
        segments.insert(id.to_owned(), segs);
    }
    Ok(PostProcessed {
        scores,
        labels,
        segments,
        settings,
    })
}

/// Full pipeline: smoothing if enabled, then binarize, extract, collapse.
pub fn apply_postprocessing(
    scores: &ScoreSet,
    corpus: &Corpus,
    settings: PostProcessSettings,
    transitions: Option<&TransitionModel>,
) -> Result<PostProcessed> {
    settings.validate()?;
    scores.check_alignment(corpus)?;
    let effective = if settings.smoothing {
        let tm = transitions.ok_or(Error::MissingTransitions)?;
        smooth_scores(scores, corpus, tm)?
    } else {
        scores.clone()
    };
    segment_scores(effective, settings)
}

/// Gold labels of a corpus as a post-processed annotation set: labels double
/// as scores, segments are taken as-is.
pub fn gold_annotations(corpus: &Corpus) -> Result<PostProcessed> {
    let mut scores = ScoreSet::new("gold");
    let mut labels = IndexMap::new();
    let mut segments = IndexMap::new();
    for doc in corpus.documents() {
        let gold = doc
            .gold()
            .ok_or_else(|| Error::MissingGold(doc.id().to_owned()))?;
        scores.insert(
            doc.id(),
            gold.iter().map(|&g| f64::from(u8::from(g))).collect(),
        )?;
        labels.insert(doc.id().to_owned(), gold.to_vec());
        segments.insert(doc.id().to_owned(), extract_segments(gold));
    }
    Ok(PostProcessed {
        scores,
        labels,
        segments,
        settings: PostProcessSettings::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn seg(start: usize, end: usize) -> Segment {
        Segment { start, end }
    }

    #[test]
    fn binarize_boundaries() {
        assert_eq!(binarize(&[0.4, 0.5, 0.6], 0.5), vec![false, true, true]);
        assert_eq!(binarize(&[0.0, 0.3, 1.0], 0.0), vec![true; 3]);
        assert_eq!(binarize(&[1.0, 0.999], 1.0), vec![true, false]);
    }

    #[test]
    fn extract_examples() {
        assert_eq!(
            extract_segments(&[true, true, false, true]),
            vec![seg(0, 1), seg(3, 3)]
        );
        assert!(extract_segments(&[false; 4]).is_empty());
        assert_eq!(extract_segments(&[true; 5]), vec![seg(0, 4)]);
        assert!(extract_segments(&[]).is_empty());
    }

    #[test]
    fn collapse_examples() {
        let s = [seg(0, 1), seg(3, 3)];
        assert_eq!(collapse_segments(&s, 1), vec![seg(0, 3)]);
        assert_eq!(collapse_segments(&s, 0), s.to_vec());
        let t = [seg(0, 0), seg(2, 2), seg(4, 4)];
        assert_eq!(collapse_segments(&t, 1), vec![seg(0, 4)]);
    }

    /// Pairwise merging repeated until nothing changes.
    fn collapse_fixpoint(segments: &[Segment], gap: usize) -> Vec<Segment> {
        let mut cur = segments.to_vec();
        loop {
            let mut changed = false;
            let mut i = 0;
            while i + 1 < cur.len() {
                if cur[i + 1].start - cur[i].end - 1 <= gap {
                    cur[i].end = cur[i + 1].end;
                    cur.remove(i + 1);
                    changed = true;
                } else {
                    i += 1;
                }
            }
            if !changed {
                return cur;
            }
        }
    }

    fn covered(segments: &[Segment]) -> std::collections::BTreeSet<usize> {
        segments.iter().flat_map(|s| s.start..=s.end).collect()
    }

    proptest! {
        #[test]
        fn collapse_properties(labels in proptest::collection::vec(any::<bool>(), 0..60), k in 0usize..6) {
            let segs = extract_segments(&labels);
            prop_assert_eq!(covered(&segs).len(), labels.iter().filter(|&&l| l).count());
            let once = collapse_segments(&segs, k);
            prop_assert_eq!(&once, &collapse_fixpoint(&segs, k));
            prop_assert!(once.len() <= segs.len());
            prop_assert!(covered(&segs).is_subset(&covered(&once)));
            prop_assert_eq!(&collapse_segments(&once, k), &once);
            prop_assert!(collapse_segments(&segs, k + 1).len() <= once.len());
        }

        #[test]
        fn binarize_is_monotone(scores in proptest::collection::vec(0.0f64..=1.0, 0..50), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let l = binarize(&scores, lo);
            let h = binarize(&scores, hi);
            for (x, y) in l.iter().zip(&h) {
                prop_assert!(!(*y && !*x));
            }
        }
    }

    fn doc_with_gold(id: &str, lines: &[&[u8]]) -> Document {
        let words: Vec<Vec<String>> = lines
            .iter()
            .map(|l| (0..l.len()).map(|i| format!("t{i}")).collect())
            .collect();
        let gold = lines
            .iter()
            .flat_map(|l| l.iter().map(|&g| g == 1))
            .collect();
        Document::from_lines(id, &words).with_gold(gold).unwrap()
    }

    #[test]
    fn transition_counts_hand_example() {
        let corpus = Corpus::new("c", vec![doc_with_gold("a", &[&[1, 1, 0]])]).unwrap();
        let tm = estimate_transitions(&corpus).unwrap();
        // from 1: 1->1 once, 1->0 once
        assert_abs_diff_eq!(tm.transition[1][1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(tm.transition[1][0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(tm.transition[0][0], 0.5, epsilon = 1e-15);
        // one line starting in state 1
        assert_abs_diff_eq!(tm.initial[1], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(tm.initial[0] + tm.initial[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn transitions_ignore_line_and_document_boundaries() {
        // lines [1] [0] would add a 1->0 transition if boundaries were crossed
        let corpus = Corpus::new(
            "c",
            vec![
                doc_with_gold("a", &[&[1], &[0]]),
                doc_with_gold("b", &[&[1, 1]]),
            ],
        )
        .unwrap();
        let tm = estimate_transitions(&corpus).unwrap();
        assert_abs_diff_eq!(tm.transition[1][0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(tm.transition[1][1], 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn all_relevant_gold_favours_staying_relevant() {
        let corpus = Corpus::new("c", vec![doc_with_gold("a", &[&[1, 1, 1, 1]])]).unwrap();
        let tm = estimate_transitions(&corpus).unwrap();
        assert!(tm.transition[1][1] > tm.transition[1][0]);
        assert!(tm.transition[1][1] >= tm.transition[0][0]);
    }

    #[test]
    fn transitions_need_gold() {
        let corpus = Corpus::new("c", vec![Document::from_lines("a", &[vec!["x"]])]).unwrap();
        assert!(matches!(
            estimate_transitions(&corpus),
            Err(Error::MissingGold(_))
        ));
    }

    #[test]
    fn single_token_uniform_is_identity() {
        for s in [0.1, 0.37, 0.5, 0.93] {
            let out = viterbi_smooth(&[s], &TransitionModel::uniform()).unwrap();
            assert_abs_diff_eq!(out[0], s, epsilon = 1e-12);
        }
    }

    #[test]
    fn isolated_dip_is_lifted() {
        let tm = TransitionModel::new([[0.9, 0.1], [0.1, 0.9]], [0.5, 0.5]).unwrap();
        let out = viterbi_smooth(&[0.9, 0.45, 0.9], &tm).unwrap();
        assert!(out[1] > 0.45, "{out:?}");
        // hand-computed: W1,1 = 0.45*0.9*0.45, W0,1 = 0.05*0.9*0.55
        let expected = 0.18225 / (0.18225 + 0.02475);
        assert_abs_diff_eq!(out[1], expected, epsilon = 1e-9);
    }

    #[test]
    fn empty_line_errors() {
        assert!(matches!(
            viterbi_smooth(&[], &TransitionModel::uniform()),
            Err(Error::EmptyLine)
        ));
    }

    #[test]
    fn rejects_non_stochastic_transitions() {
        assert!(TransitionModel::new([[0.5, 0.6], [0.5, 0.5]], [0.5, 0.5]).is_err());
        assert!(TransitionModel::new([[1.0, 0.0], [0.5, 0.5]], [0.5, 0.5]).is_err());
    }

    fn scored_corpus() -> (Corpus, ScoreSet) {
        let doc = doc_with_gold("a", &[&[1, 1, 1], &[0, 1]]);
        let corpus = Corpus::new("c", vec![doc]).unwrap();
        let mut set = ScoreSet::new("m");
        set.insert("a", vec![0.9, 0.45, 0.9, 0.2, 0.7]).unwrap();
        (corpus, set)
    }

    #[test]
    fn default_pipeline_is_plain_segmentation() {
        let (corpus, set) = scored_corpus();
        let out =
            apply_postprocessing(&set, &corpus, PostProcessSettings::default(), None).unwrap();
        let raw = set.get("a").unwrap();
        assert_eq!(
            out.segments("a").unwrap(),
            extract_segments(&binarize(raw, 0.5))
        );
        assert_eq!(out.scores, set);
    }

    #[test]
    fn smoothing_merges_dip_into_one_segment() {
        let (corpus, set) = scored_corpus();
        let tm = TransitionModel::new([[0.9, 0.1], [0.1, 0.9]], [0.5, 0.5]).unwrap();
        let plain =
            apply_postprocessing(&set, &corpus, PostProcessSettings::default(), None).unwrap();
        let first_line = |p: &PostProcessed| {
            p.segments("a")
                .unwrap()
                .iter()
                .filter(|s| s.end < 3)
                .count()
        };
        assert_eq!(first_line(&plain), 2);
        let settings = PostProcessSettings {
            smoothing: true,
            ..Default::default()
        };
        let smoothed = apply_postprocessing(&set, &corpus, settings, Some(&tm)).unwrap();
        assert_eq!(first_line(&smoothed), 1);
        assert!(smoothed.scores.smoothed);
    }

    #[test]
    fn smoothing_without_transitions_errors() {
        let (corpus, set) = scored_corpus();
        let settings = PostProcessSettings {
            smoothing: true,
            ..Default::default()
        };
        assert!(matches!(
            apply_postprocessing(&set, &corpus, settings, None),
            Err(Error::MissingTransitions)
        ));
    }

    #[test]
    fn large_collapse_gives_one_segment() {
        let (corpus, set) = scored_corpus();
        let settings = PostProcessSettings {
            collapse_gap: 100,
            ..Default::default()
        };
        let out = apply_postprocessing(&set, &corpus, settings, None).unwrap();
        assert_eq!(out.segments("a").unwrap(), &[seg(0, 4)]);
    }

    #[test]
    fn score_file_round_trip_and_map_form() {
        let (corpus, set) = scored_corpus();
        let mut buf = Vec::new();
        set.write_jsonl(&mut buf, Some(&serde_json::json!({"tool": "hare"})))
            .unwrap();
        let back = ScoreSet::read_jsonl(&buf[..], "other").unwrap();
        assert_eq!(back, set);
        back.check_alignment(&corpus).unwrap();

        let map_form = r#"{"a": [0.1, 0.2, 0.3, 0.4, 0.5]}"#;
        let s = ScoreSet::read_jsonl(map_form.as_bytes(), "up").unwrap();
        assert_eq!(s.model_id, "up");
        s.check_alignment(&corpus).unwrap();
    }

    #[test]
    fn score_count_mismatch_names_document() {
        let (corpus, _) = scored_corpus();
        let s = ScoreSet::read_jsonl(r#"{"a": [0.1]}"#.as_bytes(), "m").unwrap();
        match s.check_alignment(&corpus) {
            Err(Error::ScoreAlignment { document, .. }) => assert_eq!(document, "a"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_score_rejected() {
        assert!(ScoreSet::read_jsonl(r#"{"a": [1.5]}"#.as_bytes(), "m").is_err());
    }
}
