//! Term extraction and the TF-IDF inverted index.
//!
//! Each annotation contributes two term-frequency vectors: the *exact*
//! field (identifiers, numbers, operators, evaluation-order pairs,
//! description words, category and source) and the *structural* field
//! (operators and pairs only).

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::Annotation;
use crate::expr::{self, eval_order, op_tokens, Expr};
use crate::mathml::MathmlError;

pub const FORMAT_VERSION: u32 = 1;

pub type TermFreq = BTreeMap<String, u32>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Exact,
    Structural,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TermKind {
    /// Identifier, number literal or free word.
    Word,
    /// Binary operator symbol or function name.
    Operator,
    /// `pair:OP:K`
    Pair,
}

/// Classifies an index term by its surface form.
pub fn term_kind(term: &str) -> TermKind {
    if let Some(rest) = term.strip_prefix("pair:") {
        if let Some((op, k)) = rest.rsplit_once(':') {
            if expr::is_operator_symbol(op) && k.parse::<usize>().is_ok_and(|k| k >= 1) {
                return TermKind::Pair;
            }
        }
    }
    if expr::is_operator_symbol(term) {
        TermKind::Operator
    } else {
        TermKind::Word
    }
}

/// Lowercased `[a-z0-9]+` runs of free text.
pub fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_ascii_lowercase)
}

/// Math terms of an expression: leaves, operator symbols and (unless
/// `with_pairs` is false) evaluation-order pairs.
pub fn math_terms(e: &Expr, with_pairs: bool) -> Vec<String> {
    let mut terms: Vec<String> = e.leaves().into_iter().map(str::to_string).collect();
    terms.extend(op_tokens(e).into_iter().map(str::to_string));
    if with_pairs {
        terms.extend(eval_order(e).iter().map(|o| o.pair_token()));
    }
    terms
}

fn count(terms: impl IntoIterator<Item = String>) -> TermFreq {
    let mut tf = TermFreq::new();
    for t in terms {
        *tf.entry(t).or_default() += 1;
    }
    tf
}

pub fn tokenize(a: &Annotation) -> Result<(TermFreq, TermFreq), MathmlError> {
    let e = a.expr()?;
    let math = math_terms(&e, true);
    let structural = count(
        math.iter()
            .filter(|t| term_kind(t) != TermKind::Word)
            .cloned(),
    );
    let exact = count(
        math.into_iter()
            .chain(words(&a.description))
            .chain(words(&a.category))
            .chain(words(&a.source)),
    );
    Ok((exact, structural))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexedDoc {
    pub doc_id: usize,
    pub annotation: Annotation,
    pub exact_tf: TermFreq,
    pub structural_tf: TermFreq,
}

impl IndexedDoc {
    pub fn tf(&self, field: FieldKind) -> &TermFreq {
        match field {
            FieldKind::Exact => &self.exact_tf,
            FieldKind::Structural => &self.structural_tf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InvertedIndex {
    docs: Vec<IndexedDoc>,
    df_exact: TermFreq,
    df_structural: TermFreq,
}

/// An annotation left out of the index because its value did not parse.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedDoc {
    pub doc_uri: String,
    pub error: MathmlError,
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl InvertedIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Indexes annotations in order; unparseable values are reported and skipped.
    pub fn build(annotations: &[Annotation]) -> (InvertedIndex, Vec<SkippedDoc>) {
        let mut idx = InvertedIndex::new();
        let mut skipped = Vec::new();
        for a in annotations {
            if let Err(error) = idx.add(a.clone()) {
                skipped.push(SkippedDoc {
                    doc_uri: a.doc_uri.clone(),
                    error,
                });
            }
        }
        (idx, skipped)
    }

    /// Appends one document and returns its id.
    pub fn add(&mut self, annotation: Annotation) -> Result<usize, MathmlError> {
        let (exact_tf, structural_tf) = tokenize(&annotation)?;
        let doc_id = self.docs.len();
        self.push(IndexedDoc {
            doc_id,
            annotation,
            exact_tf,
            structural_tf,
        });
        Ok(doc_id)
    }

    fn push(&mut self, doc: IndexedDoc) {
        for term in doc.exact_tf.keys() {
            *self.df_exact.entry(term.clone()).or_default() += 1;
        }
        for term in doc.structural_tf.keys() {
            *self.df_structural.entry(term.clone()).or_default() += 1;
        }
        self.docs.push(doc);
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn docs(&self) -> &[IndexedDoc] {
        &self.docs
    }

    pub fn doc(&self, doc_id: usize) -> Option<&IndexedDoc> {
        self.docs.get(doc_id)
    }

    pub fn df_map(&self, field: FieldKind) -> &TermFreq {
        match field {
            FieldKind::Exact => &self.df_exact,
            FieldKind::Structural => &self.df_structural,
        }
    }

    pub fn df(&self, field: FieldKind, term: &str) -> u32 {
        self.df_map(field).get(term).copied().unwrap_or(0)
    }

    /// `ln(1 + N/df)`; zero for terms that occur in no document.
    pub fn idf(&self, field: FieldKind, term: &str) -> f64 {
        match self.df(field, term) {
            0 => 0.0,
            df => (1.0 + self.len() as f64 / df as f64).ln(),
        }
    }

    /// `tf(t, d) * ln(1 + N/df(t))`, or 0 when `d` lacks `t`.
    pub fn weight(&self, field: FieldKind, term: &str, doc: &IndexedDoc) -> f64 {
        match doc.tf(field).get(term) {
            Some(&tf) => tf as f64 * self.idf(field, term),
            None => 0.0,
        }
    }

    /// Recomputes both document-frequency maps from the documents.
    pub fn recount_df(&self) -> (TermFreq, TermFreq) {
        let mut rebuilt = InvertedIndex::new();
        for doc in &self.docs {
            rebuilt.push(doc.clone());
        }
        (rebuilt.df_exact, rebuilt.df_structural)
    }

    pub fn to_json(&self) -> String {
        let file = IndexFile {
            version: FORMAT_VERSION,
            n: self.docs.len(),
            docs: self.docs.iter().map(DocRecord::from).collect(),
        };
        serde_json::to_string_pretty(&file).expect("index serializes")
    }

    pub fn from_json(text: &str) -> Result<InvertedIndex, String> {
        // version is checked before the full schema so old/new files get a clear message
        let header: VersionProbe = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if header.version != FORMAT_VERSION {
            return Err(format!("unsupported version {}", header.version));
        }
        let file: IndexFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if file.n != file.docs.len() {
            return Err(format!(
                "N is {} but {} docs are present",
                file.n,
                file.docs.len()
            ));
        }
        let mut idx = InvertedIndex::new();
        for (position, record) in file.docs.into_iter().enumerate() {
            let doc = record.into_doc()?;
            if doc.doc_id != position {
                return Err(format!("doc_id {} at position {position}", doc.doc_id));
            }
            idx.push(doc);
        }
        Ok(idx)
    }

    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        fs::write(path, self.to_json()).map_err(|source| IndexError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<InvertedIndex, IndexError> {
        let text = fs::read_to_string(path).map_err(|source| IndexError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        InvertedIndex::from_json(&text).map_err(|message| IndexError::Format {
            path: path.to_path_buf(),
            message,
        })
    }
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    version: u32,
    #[serde(rename = "N")]
    n: usize,
    docs: Vec<DocRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocRecord {
    doc_id: usize,
    doc_uri: String,
    anchor_link: String,
    value: String,
    source: String,
    category: String,
    description: String,
    exact_tf: TermFreq,
    structural_tf: TermFreq,
}

impl From<&IndexedDoc> for DocRecord {
    fn from(d: &IndexedDoc) -> Self {
        let a = &d.annotation;
        DocRecord {
            doc_id: d.doc_id,
            doc_uri: a.doc_uri.clone(),
            anchor_link: a.anchor_link.clone(),
            value: a.value.clone(),
            source: a.source.clone(),
            category: a.category.clone(),
            description: a.description.clone(),
            exact_tf: d.exact_tf.clone(),
            structural_tf: d.structural_tf.clone(),
        }
    }
}

impl DocRecord {
    fn into_doc(self) -> Result<IndexedDoc, String> {
        let id = self.doc_id;
        for (field, tf) in [
            ("exact_tf", &self.exact_tf),
            ("structural_tf", &self.structural_tf),
        ] {
            if let Some((term, _)) = tf.iter().find(|(_, c)| **c == 0) {
                return Err(format!("doc {id}: {field}[{term:?}] is 0"));
            }
        }
        if let Some(term) = self
            .structural_tf
            .keys()
            .find(|t| term_kind(t) == TermKind::Word)
        {
            return Err(format!(
                "doc {id}: structural_tf holds non-operator term {term:?}"
            ));
        }
        Ok(IndexedDoc {
            doc_id: id,
            annotation: Annotation {
                doc_uri: self.doc_uri,
                anchor_link: self.anchor_link,
                value: self.value,
                source: self.source,
                category: self.category,
                description: self.description,
            },
            exact_tf: self.exact_tf,
            structural_tf: self.structural_tf,
        })
    }
}
