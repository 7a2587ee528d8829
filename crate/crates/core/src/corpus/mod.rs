//! Documents, corpora, gold labels and fold splitting.
//!
//! A [`Document`] is a list of lines, each an ordered list of [`Token`]s.
//! Lines are the only sequence boundary: no sentence segmentation is done,
//! so context windows and smoothing both stop at line breaks.

mod synthetic;
mod tokenize;

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use synthetic::{generate_synthetic_corpus, SyntheticSpec};
pub use tokenize::{tokenize, RuleTokenizer, Tokenizer};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    /// 0-based line within the document.
    pub line_index: usize,
    /// 0-based position within the line.
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    id: String,
    lines: Vec<Vec<Token>>,
    gold: Option<Vec<bool>>,
}

impl Document {
    /// Builds a document from pre-tokenized lines. Empty token strings are
    /// dropped.
    pub fn from_lines<S: AsRef<str>>(id: impl Into<String>, lines: &[Vec<S>]) -> Self {
        let lines = lines
            .iter()
            .enumerate()
            .map(|(line_index, line)| {
                line.iter()
                    .map(AsRef::as_ref)
                    .filter(|t| !t.is_empty())
                    .enumerate()
                    .map(|(position, text)| Token {
                        text: text.to_owned(),
                        line_index,
                        position,
                    })
                    .collect()
            })
            .collect();
        Document {
            id: id.into(),
            lines,
            gold: None,
        }
    }

    /// Attaches gold labels, one per token in reading order.
    pub fn with_gold(mut self, gold: Vec<bool>) -> Result<Self> {
        let tokens = self.token_count();
        if gold.len() != tokens {
            return Err(Error::GoldAlignment {
                document: self.id,
                gold: gold.len(),
                tokens,
            });
        }
        self.gold = Some(gold);
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn lines(&self) -> &[Vec<Token>] {
        &self.lines
    }

    pub fn gold(&self) -> Option<&[bool]> {
        self.gold.as_deref()
    }

    pub fn token_count(&self) -> usize {
        self.lines.iter().map(Vec::len).sum()
    }

    /// Tokens in reading order; the flat index is the token index used by
    /// score sets and segments.
    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.lines.iter().flatten()
    }

    pub fn token(&self, line_index: usize, position: usize) -> Option<&Token> {
        self.lines.get(line_index)?.get(position)
    }

    /// Flat token-index range covered by each line.
    pub fn line_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.lines
            .iter()
            .map(|line| {
                let range = start..start + line.len();
                start = range.end;
                range
            })
            .collect()
    }

    /// Line range containing the token at `token_index`.
    pub fn line_range_of(&self, token_index: usize) -> Option<Range<usize>> {
        self.line_ranges()
            .into_iter()
            .find(|r| r.contains(&token_index))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    name: String,
    documents: Vec<Document>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, documents: Vec<Document>) -> Result<Self> {
        let mut seen = HashSet::new();
        for doc in &documents {
            if !seen.insert(doc.id()) {
                return Err(Error::DuplicateDocument(doc.id().to_owned()));
            }
        }
        Ok(Corpus {
            name: name.into(),
            documents,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id() == id)
    }

    pub fn token_count(&self) -> usize {
        self.documents.iter().map(Document::token_count).sum()
    }

    pub fn has_gold(&self) -> bool {
        !self.documents.is_empty() && self.documents.iter().all(|d| d.gold().is_some())
    }

    /// Sub-corpus holding the documents whose ids satisfy `keep`, in order.
    pub fn subset(&self, name: impl Into<String>, keep: impl Fn(&str) -> bool) -> Corpus {
        Corpus {
            name: name.into(),
            documents: self
                .documents
                .iter()
                .filter(|d| keep(d.id()))
                .cloned()
                .collect(),
        }
    }

    pub fn read_jsonl(reader: impl BufRead, name: impl Into<String>) -> Result<Self> {
        let mut documents = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let record = i + 1;
            let line = line.map_err(|e| Error::MalformedRecord {
                record,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: CorpusRecord =
                serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                    record,
                    message: e.to_string(),
                })?;
            documents.push(rec.into_document(record)?);
        }
        Corpus::new(name, documents)
    }

    pub fn write_jsonl(&self, mut writer: impl Write) -> std::io::Result<()> {
        for doc in &self.documents {
            let rec = CorpusRecord::from(doc);
            serde_json::to_writer(&mut writer, &rec)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_jsonl(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Loads a corpus from a line-delimited JSON file; the corpus is named
/// after the file stem.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Corpus::read_jsonl(BufReader::new(file), name)
}

/// On-disk record: one document per line.
#[derive(Debug, Serialize, Deserialize)]
struct CorpusRecord {
    id: String,
    lines: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold: Option<Vec<u8>>,
}

impl CorpusRecord {
    fn into_document(self, record: usize) -> Result<Document> {
        if let Some((line, _)) = self
            .lines
            .iter()
            .enumerate()
            .find(|(_, l)| l.iter().any(String::is_empty))
        {
            return Err(Error::MalformedRecord {
                record,
                message: format!("document {}: empty token on line {line}", self.id),
            });
        }
        let doc = Document::from_lines(self.id, &self.lines);
        match self.gold {
            None => Ok(doc),
            Some(gold) => {
                let labels = gold
                    .iter()
                    .map(|&g| match g {
                        0 => Ok(false),
                        1 => Ok(true),
                        other => Err(Error::MalformedRecord {
                            record,
                            message: format!("gold label {other} is not 0 or 1"),
                        }),
                    })
                    .collect::<Result<Vec<_>>>()?;
                doc.with_gold(labels)
            }
        }
    }
}

impl From<&Document> for CorpusRecord {
    fn from(doc: &Document) -> Self {
        CorpusRecord {
            id: doc.id().to_owned(),
            lines: doc
                .lines()
                .iter()
                .map(|l| l.iter().map(|t| t.text.clone()).collect())
                .collect(),
            gold: doc.gold().map(|g| g.iter().map(|&b| u8::from(b)).collect()),
        }
    }
}

/// Document-level assignment of a corpus to cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    fold_count: usize,
    assignments: BTreeMap<String, usize>,
}

impl FoldSplit {
    pub fn fold_count(&self) -> usize {
        self.fold_count
    }

    pub fn assignments(&self) -> &BTreeMap<String, usize> {
        &self.assignments
    }

    pub fn fold_of(&self, document_id: &str) -> Option<usize> {
        self.assignments.get(document_id).copied()
    }

    /// Splits the corpus into (training documents, held-out fold).
    pub fn split(&self, corpus: &Corpus, fold: usize) -> (Corpus, Corpus) {
        let train = corpus.subset(format!("{}-train-{fold}", corpus.name()), |id| {
            self.fold_of(id) != Some(fold)
        });
        let test = corpus.subset(format!("{}-test-{fold}", corpus.name()), |id| {
            self.fold_of(id) == Some(fold)
        });
        (train, test)
    }
}

/// Seeded shuffle, then round-robin assignment, so fold sizes differ by at
/// most one.
pub fn split_folds(corpus: &Corpus, fold_count: usize, seed: u64) -> Result<FoldSplit> {
    if fold_count < 2 || fold_count > corpus.len() {
        return Err(Error::FoldCount {
            folds: fold_count,
            documents: corpus.len(),
        });
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let assignments = order
        .into_iter()
        .enumerate()
        .map(|(slot, doc)| (corpus.documents[doc].id().to_owned(), slot % fold_count))
        .collect();
    Ok(FoldSplit {
        fold_count,
        assignments,
    })
}
