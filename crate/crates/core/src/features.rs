//! Per-token input vectors.
//!
//! Two sources are supported: a static embedding table averaged over a
//! context window that stops at line breaks, and precomputed contextual
//! layer vectors that the tagger combines with learned layer weights.
//!
//! Every source yields, per document, an array of shape
//! `(tokens, layers, dimension)`; static sources have a single layer.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use indexmap::IndexMap;
use ndarray::{Array2, Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};

/// Default context window on each side of the target token.
pub const DEFAULT_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    entries: IndexMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument(
                "embedding dimension must be > 0".into(),
            ));
        }
        Ok(EmbeddingTable {
            dimension,
            entries: IndexMap::new(),
        })
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let word = word.into();
        if vector.len() != self.dimension {
            return Err(Error::EmbeddingDimension {
                word,
                expected: self.dimension,
                found: vector.len(),
            });
        }
        self.entries.insert(word, vector);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Parses `word v1 ... vd` lines. A leading `count dim` header line, as
    /// written by word2vec, is skipped.
    pub fn read_text(reader: impl BufRead) -> Result<Self> {
        let mut table: Option<EmbeddingTable> = None;
        for (i, line) in reader.lines().enumerate() {
            let record = i + 1;
            let line = line.map_err(|e| Error::MalformedRecord {
                record,
                message: e.to_string(),
            })?;
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let values = fields
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::MalformedRecord {
                    record,
                    message: format!("entry {word}: {e}"),
                })?;
            if record == 1 && values.len() == 1 && word.parse::<usize>().is_ok() {
                continue;
            }
            let table = match &mut table {
                Some(t) => t,
                None => table.insert(EmbeddingTable::new(values.len()).map_err(|_| {
                    Error::MalformedRecord {
                        record,
                        message: format!("entry {word} has no vector"),
                    }
                })?),
            };
            table.insert(word, values)?;
        }
        table.ok_or_else(|| Error::InvalidArgument("embedding table is empty".into()))
    }

    pub fn write_text(&self, mut w: impl Write) -> std::io::Result<()> {
        for (word, vector) in &self.entries {
            write!(w, "{word}")?;
            for v in vector {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_text(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

pub fn load_embedding_table(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    EmbeddingTable::read_text(BufReader::new(file))
}

/// Mean embedding of the token and up to `window` tokens on each side
/// within the same line. Tokens missing from the table are left out of the
/// mean; an all-missing window gives the zero vector.
pub fn static_window_vector(
    document: &Document,
    token_index: usize,
    table: &EmbeddingTable,
    window: usize,
) -> Vec<f64> {
    let mut sum = vec![0.0; table.dimension()];
    let Some(line) = document.line_range_of(token_index) else {
        return sum;
    };
    let lo = token_index.saturating_sub(window).max(line.start);
    let hi = (token_index + window + 1).min(line.end);
    let mut found = 0usize;
    for token in document.tokens().skip(lo).take(hi - lo) {
        if let Some(v) = table.get(&token.text) {
            found += 1;
            sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
        }
    }
    if found > 0 {
        let n = found as f64;
        sum.iter_mut().for_each(|s| *s /= n);
    }
    sum
}

/// Window means for every token of a document, shape `(tokens, dimension)`.
pub fn static_document_features(
    document: &Document,
    table: &EmbeddingTable,
    window: usize,
) -> Array2<f64> {
    let dim = table.dimension();
    let lookups: Vec<Option<&[f64]>> = document.tokens().map(|t| table.get(&t.text)).collect();
    let mut out = Array2::zeros((lookups.len(), dim));
    for line in document.line_ranges() {
        for i in line.clone() {
            let lo = i.saturating_sub(window).max(line.start);
            let hi = (i + window + 1).min(line.end);
            let mut row = out.row_mut(i);
            let mut found = 0usize;
            for v in lookups[lo..hi].iter().flatten() {
                found += 1;
                row.iter_mut().zip(v.iter()).for_each(|(s, x)| *s += x);
            }
            if found > 0 {
                let n = found as f64;
                row.mapv_inplace(|s| s / n);
            }
        }
    }
    out
}

/// Weights combining the `k` contextual layers of each token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerWeights(pub Vec<f64>);

impl LayerWeights {
    /// `1/k` for each layer.
    pub fn uniform(layer_count: usize) -> Self {
        LayerWeights(vec![1.0 / layer_count as f64; layer_count])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Weighted sum of `layers` (shape `(k, dimension)`).
    pub fn combine(&self, layers: ArrayView2<f64>) -> Result<Vec<f64>> {
        if layers.nrows() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: layers.nrows(),
            });
        }
        let mut out = vec![0.0; layers.ncols()];
        for (w, layer) in self.0.iter().zip(layers.outer_iter()) {
            out.iter_mut()
                .zip(layer.iter())
                .for_each(|(o, x)| *o += w * x);
        }
        Ok(out)
    }
}

/// Precomputed per-token hidden states from `k` encoder layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextualFeatureSet {
    layer_count: usize,
    dimension: usize,
    documents: IndexMap<String, Array3<f64>>,
}

impl ContextualFeatureSet {
    pub fn new(layer_count: usize, dimension: usize) -> Result<Self> {
        if layer_count == 0 || dimension == 0 {
            return Err(Error::InvalidArgument(
                "contextual features need at least one layer and dimension > 0".into(),
            ));
        }
        Ok(ContextualFeatureSet {
            layer_count,
            dimension,
            documents: IndexMap::new(),
        })
    }

    /// Adds one document's vectors, shape `(tokens, layers, dimension)`.
    pub fn insert(&mut self, document_id: impl Into<String>, vectors: Array3<f64>) -> Result<()> {
        let (_, k, d) = vectors.dim();
        if k != self.layer_count {
            return Err(Error::DimensionMismatch {
                expected: self.layer_count,
                found: k,
            });
        }
        if d != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: d,
            });
        }
        self.documents.insert(document_id.into(), vectors);
        Ok(())
    }

    pub fn layer_count(&self) -> usize {
        self.layer_count
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn document(&self, document_id: &str) -> Option<&Array3<f64>> {
        self.documents.get(document_id)
    }

    /// Checks that every token of `corpus` has vectors.
    pub fn check_coverage(&self, corpus: &Corpus) -> Result<()> {
        for doc in corpus.documents() {
            let have = self.documents.get(doc.id()).map_or(0, |a| a.dim().0);
            if have < doc.token_count() {
                return Err(Error::MissingFeatures {
                    document: doc.id().to_owned(),
                    token_index: have,
                });
            }
        }
        Ok(())
    }

    pub fn read_jsonl(reader: impl BufRead) -> Result<Self> {
        let mut set: Option<ContextualFeatureSet> = None;
        for (i, line) in reader.lines().enumerate() {
            let record = i + 1;
            let malformed = |message: String| Error::MalformedRecord { record, message };
            let line = line.map_err(|e| malformed(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ContextualRecord =
                serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
            let n = rec.vectors.len();
            let k = rec.vectors.first().map_or(0, Vec::len);
            let d = rec
                .vectors
                .first()
                .and_then(|t| t.first())
                .map_or(0, Vec::len);
            let set = match &mut set {
                Some(s) => s,
                None if n == 0 => continue,
                None => set.insert(ContextualFeatureSet::new(k, d)?),
            };
            let mut flat = Vec::with_capacity(n * set.layer_count * set.dimension);
            for (t, layers) in rec.vectors.iter().enumerate() {
                if layers.len() != set.layer_count {
                    return Err(malformed(format!(
                        "document {}, token {t}: {} layers, expected {}",
                        rec.id,
                        layers.len(),
                        set.layer_count
                    )));
                }
                for v in layers {
                    if v.len() != set.dimension {
                        return Err(malformed(format!(
                            "document {}, token {t}: dimension {}, expected {}",
                            rec.id,
                            v.len(),
                            set.dimension
                        )));
                    }
                    flat.extend_from_slice(v);
                }
            }
            let array = Array3::from_shape_vec((n, set.layer_count, set.dimension), flat)
                .map_err(|e| malformed(e.to_string()))?;
            set.insert(rec.id, array)?;
        }
        set.ok_or_else(|| Error::InvalidArgument("contextual feature file is empty".into()))
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        for (id, array) in &self.documents {
            let vectors = array
                .outer_iter()
                .map(|tok| tok.outer_iter().map(|v| v.to_vec()).collect())
                .collect();
            let rec = ContextualRecord {
                id: id.clone(),
                vectors,
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ContextualRecord {
    id: String,
    /// tokens × layers × dimension
    vectors: Vec<Vec<Vec<f64>>>,
}

/// Loads contextual vectors and verifies they cover every token of `corpus`.
pub fn load_contextual_features(
    path: impl AsRef<Path>,
    corpus: &Corpus,
) -> Result<ContextualFeatureSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let set = ContextualFeatureSet::read_jsonl(BufReader::new(file))?;
    set.check_coverage(corpus)?;
    Ok(set)
}

/// `Σ_j weights[j] · layer_j` for one token.
pub fn contextual_vector(
    features: &ContextualFeatureSet,
    layer_weights: &LayerWeights,
    document_id: &str,
    token_index: usize,
) -> Result<Vec<f64>> {
    let missing = || Error::MissingFeatures {
        document: document_id.to_owned(),
        token_index,
    };
    let doc = features.document(document_id).ok_or_else(missing)?;
    if token_index >= doc.dim().0 {
        return Err(missing());
    }
    layer_weights.combine(doc.index_axis(Axis(0), token_index))
}

#[derive(Debug, Clone)]
pub enum FeatureSource {
    Static {
        table: EmbeddingTable,
        window: usize,
    },
    Contextual {
        features: ContextualFeatureSet,
        layer_weights: LayerWeights,
    },
}

impl FeatureSource {
    pub fn static_window(table: EmbeddingTable, window: usize) -> Self {
        FeatureSource::Static { table, window }
    }

    /// Contextual source with uniform initial layer weights.
    pub fn contextual(features: ContextualFeatureSet) -> Self {
        let layer_weights = LayerWeights::uniform(features.layer_count());
        FeatureSource::Contextual {
            features,
            layer_weights,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            FeatureSource::Static { table, .. } => table.dimension(),
            FeatureSource::Contextual { features, .. } => features.dimension(),
        }
    }

    pub fn layer_count(&self) -> usize {
        match self {
            FeatureSource::Static { .. } => 1,
            FeatureSource::Contextual { features, .. } => features.layer_count(),
        }
    }

    /// Initial combination weights, for contextual sources only.
    pub fn initial_layer_weights(&self) -> Option<&LayerWeights> {
        match self {
            FeatureSource::Static { .. } => None,
            FeatureSource::Contextual { layer_weights, .. } => Some(layer_weights),
        }
    }

    /// Per-token layer stack for a document, shape `(tokens, layers, dim)`.
    pub fn document_inputs(&self, document: &Document) -> Result<Array3<f64>> {
        match self {
            FeatureSource::Static { table, window } => {
                let flat = static_document_features(document, table, *window);
                let (n, d) = flat.dim();
                Ok(flat
                    .into_shape_with_order((n, 1, d))
                    .expect("same element count"))
            }
            FeatureSource::Contextual { features, .. } => {
                let n = document.token_count();
                let missing = |have: usize| Error::MissingFeatures {
                    document: document.id().to_owned(),
                    token_index: have,
                };
                let array = features.document(document.id()).ok_or_else(|| missing(0))?;
                if array.dim().0 < n {
                    return Err(missing(array.dim().0));
                }
                Ok(array.slice(ndarray::s![..n, .., ..]).to_owned())
            }
        }
    }
}
