//! Synthetic labelled corpora with a matching embedding table.
//!
//! Relevant and irrelevant tokens come from disjoint vocabularies whose
//! embeddings sit around two opposite centres, diluted by a neutral shared
//! vocabulary that appears in both. Relevant tokens are laid out in
//! contiguous segments; documents differ in how much relevant material
//! they contain so that rankings are informative.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Corpus, Document};
use crate::error::{Error, Result};
use crate::features::EmbeddingTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub doc_count: usize,
    /// Mean document length; each document varies by ±20%.
    pub tokens_per_doc: usize,
    /// Target share of relevant tokens over the whole corpus.
    pub relevant_fraction: f64,
    pub relevant_vocab: usize,
    pub irrelevant_vocab: usize,
    /// Neutral words (embeddings centred on the origin) used in both
    /// relevant and irrelevant text.
    pub shared_vocab: usize,
    /// Probability that any token is drawn from the shared vocabulary.
    pub shared_fraction: f64,
    /// Mean number of relevant segments per document.
    pub segments_per_doc: f64,
    pub min_segment_len: usize,
    pub min_line_len: usize,
    pub max_line_len: usize,
    pub dimension: usize,
    /// Norm of the per-word Gaussian offset from its class centre; the
    /// centres are at distance 2 from each other.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            doc_count: 50,
            tokens_per_doc: 500,
            relevant_fraction: 0.18,
            relevant_vocab: 150,
            irrelevant_vocab: 1500,
            shared_vocab: 100,
            shared_fraction: 0.4,
            segments_per_doc: 3.0,
            min_segment_len: 2,
            min_line_len: 10,
            max_line_len: 40,
            dimension: 32,
            noise: 1.0,
            seed: 13,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("synthetic spec: {m}")));
        if !(self.relevant_fraction > 0.0 && self.relevant_fraction < 1.0) {
            return bad("relevant_fraction must be in (0, 1)");
        }
        if self.relevant_vocab == 0 || self.irrelevant_vocab == 0 {
            return bad("vocabularies must be non-empty");
        }
        if !(0.0..1.0).contains(&self.shared_fraction)
            || (self.shared_fraction > 0.0 && self.shared_vocab == 0)
        {
            return bad("shared_fraction must be in [0, 1) with a non-empty shared vocabulary");
        }
        if self.dimension == 0 {
            return bad("dimension must be > 0");
        }
        if self.tokens_per_doc == 0
            || self.min_line_len == 0
            || self.min_line_len > self.max_line_len
        {
            return bad("lengths must be positive and min_line_len <= max_line_len");
        }
        if self.noise < 0.0 || self.segments_per_doc <= 0.0 {
            return bad("noise must be >= 0 and segments_per_doc > 0");
        }
        Ok(())
    }
}

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "z", "br", "st",
    "tr", "pl",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];

/// Deterministic pronounceable word for index `i`, unique per index.
fn pseudo_word(mut i: usize) -> String {
    let mut word = String::new();
    loop {
        word.push_str(ONSETS[i % ONSETS.len()]);
        i /= ONSETS.len();
        word.push_str(VOWELS[i % VOWELS.len()]);
        i /= VOWELS.len();
        if i == 0 {
            return word;
        }
        i -= 1;
    }
}

/// Splits `total` into `parts` pieces of at least `min` each, uniformly at
/// random over such compositions.
fn composition(rng: &mut impl Rng, total: usize, parts: usize, min: usize) -> Vec<usize> {
    if parts == 0 {
        return Vec::new();
    }
    let free = total - parts * min;
    // stars and bars over `free` extra units
    let mut cuts: Vec<usize> =
        rand::seq::index::sample(rng, free + parts - 1, parts - 1).into_vec();
    cuts.sort_unstable();
    // bars at positions `cuts`, stars elsewhere
    let mut out = Vec::with_capacity(parts);
    let mut last = 0usize;
    for &c in &cuts {
        out.push(c - last + min);
        last = c + 1;
    }
    out.push(free + parts - 1 - last + min);
    out
}

/// Generates a labelled corpus and an embedding table covering its
/// vocabulary. Deterministic per `spec.seed`.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec) -> Result<(Corpus, EmbeddingTable)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let relevant_words: Vec<String> = (0..spec.relevant_vocab).map(pseudo_word).collect();
    let irrelevant_words: Vec<String> = (spec.relevant_vocab
        ..spec.relevant_vocab + spec.irrelevant_vocab)
        .map(pseudo_word)
        .collect();
    let first_shared = spec.relevant_vocab + spec.irrelevant_vocab;
    let shared_words: Vec<String> = (first_shared..first_shared + spec.shared_vocab)
        .map(pseudo_word)
        .collect();

    let mut table = EmbeddingTable::new(spec.dimension)?;
    let centre = 1.0 / (spec.dimension as f64).sqrt();
    let spread = spec.noise / (spec.dimension as f64).sqrt();
    for (words, sign) in [
        (&relevant_words, 1.0),
        (&irrelevant_words, -1.0),
        (&shared_words, 0.0),
    ] {
        for w in words {
            let v = (0..spec.dimension)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    sign * centre + spread * z
                })
                .collect();
            table.insert(w.clone(), v)?;
        }
    }

    let lengths: Vec<usize> = (0..spec.doc_count)
        .map(|_| {
            let jitter = rng.random_range(0.8..=1.2);
            ((spec.tokens_per_doc as f64 * jitter).round() as usize).max(1)
        })
        .collect();
    // relative relevance of each document, renormalised so the corpus hits
    // the requested share
    let weights: Vec<f64> = (0..spec.doc_count)
        .map(|_| rng.random_range(0.25..1.75))
        .collect();
    let total_tokens: f64 = lengths.iter().map(|&n| n as f64).sum();
    let weighted: f64 = lengths
        .iter()
        .zip(&weights)
        .map(|(&n, w)| n as f64 * w)
        .sum();
    let scale = if weighted > 0.0 {
        total_tokens / weighted
    } else {
        0.0
    };
    let mean_segment_len =
        (spec.relevant_fraction * spec.tokens_per_doc as f64 / spec.segments_per_doc).max(1.0);

    let mut documents = Vec::with_capacity(spec.doc_count);
    for (d, (&n, &w)) in lengths.iter().zip(&weights).enumerate() {
        let min_seg = spec.min_segment_len.max(1);
        let target = (spec.relevant_fraction * n as f64 * w * scale).round() as usize;
        // leave room for at least one irrelevant token between segments
        let relevant = target.min(n / 2);
        let max_segments = relevant / min_seg;
        let segments = if max_segments == 0 {
            0
        } else {
            let expected = relevant as f64 / mean_segment_len * rng.random_range(0.7..1.3);
            (expected.round() as usize).clamp(1, max_segments)
        };
        let relevant = if segments == 0 { 0 } else { relevant };
        let irrelevant = n - relevant;

        let seg_lens = composition(&mut rng, relevant, segments, min_seg);
        // gaps: two edge gaps may be empty, interior gaps need at least one
        let mut gaps = composition(&mut rng, irrelevant + 2, segments + 1, 1);
        if let Some(first) = gaps.first_mut() {
            *first -= 1;
        }
        if let Some(last) = gaps.last_mut() {
            *last -= 1;
        }

        let mut labels = Vec::with_capacity(n);
        for (i, gap) in gaps.iter().enumerate() {
            labels.extend(std::iter::repeat_n(false, *gap));
            if let Some(&len) = seg_lens.get(i) {
                labels.extend(std::iter::repeat_n(true, len));
            }
        }
        debug_assert_eq!(labels.len(), n);

        let words: Vec<&str> = labels
            .iter()
            .map(|&rel| {
                let vocab =
                    if spec.shared_fraction > 0.0 && rng.random::<f64>() < spec.shared_fraction {
                        &shared_words
                    } else if rel {
                        &relevant_words
                    } else {
                        &irrelevant_words
                    };
                vocab[rng.random_range(0..vocab.len())].as_str()
            })
            .collect();
        let mut lines = Vec::new();
        let mut start = 0;
        while start < n {
            let len = rng.random_range(spec.min_line_len..=spec.max_line_len);
            let end = (start + len).min(n);
            lines.push(words[start..end].to_vec());
            start = end;
        }
        documents.push(Document::from_lines(format!("doc-{d:04}"), &lines).with_gold(labels)?);
    }
    let corpus = Corpus::new(format!("synthetic-{}", spec.seed), documents)?;
    Ok((corpus, table))
}
