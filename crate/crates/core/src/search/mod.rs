//! Ranked retrieval over an [`InvertedIndex`] and triple-pattern queries
//! over extracted annotations.
//!
//! Retrieval runs in two phases. The first filters candidates (source,
//! category, required identifiers) and scores them by cosine similarity of
//! TF-IDF vectors over the exact or structural field. The second resolves
//! each surviving doc id to its full annotation, which carries the anchor
//! link returned to the user.

mod query;
pub mod sparql;

use std::collections::BTreeMap;

pub use query::{parse_query, Query, QueryError, QueryFlags, QueryMode};

use crate::index::{FieldKind, IndexedDoc, InvertedIndex};

#[derive(Debug, Clone, PartialEq)]
pub struct RankedHit {
    pub doc_id: usize,
    pub score: f64,
    pub anchor_link: String,
    pub doc_uri: String,
    pub source: String,
    pub category: String,
    pub description: String,
}

/// Sparse weight vector keyed by term.
pub type WeightVector = BTreeMap<String, f64>;

/// `dot(q, d) / (|q| |d|)`, or 0 when either vector has zero norm.
pub fn cosine(q: &WeightVector, d: &WeightVector) -> f64 {
    let norm = |v: &WeightVector| v.values().map(|w| w * w).sum::<f64>().sqrt();
    let (nq, nd) = (norm(q), norm(d));
    if nq == 0.0 || nd == 0.0 {
        return 0.0;
    }
    let (small, large) = if q.len() <= d.len() { (q, d) } else { (d, q) };
    let dot: f64 = small
        .iter()
        .filter_map(|(t, w)| large.get(t).map(|v| w * v))
        .sum();
    (dot / (nq * nd)).clamp(0.0, 1.0)
}

fn field_of(q: &Query) -> FieldKind {
    if q.structural {
        FieldKind::Structural
    } else {
        FieldKind::Exact
    }
}

/// Query vector: raw query term counts times corpus idf.
pub fn query_vector(idx: &InvertedIndex, q: &Query) -> WeightVector {
    let field = field_of(q);
    let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
    for t in q.vector_terms() {
        *counts.entry(t).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(t, tf)| (t.to_string(), tf as f64 * idx.idf(field, t)))
        .filter(|(_, w)| *w > 0.0)
        .collect()
}

pub fn doc_vector(idx: &InvertedIndex, field: FieldKind, doc: &IndexedDoc) -> WeightVector {
    doc.tf(field)
        .keys()
        .map(|t| (t.clone(), idx.weight(field, t, doc)))
        .collect()
}

fn passes_filters(doc: &IndexedDoc, q: &Query) -> bool {
    let a = &doc.annotation;
    let source_ok = q
        .source_filter
        .as_ref()
        .is_none_or(|s| a.source.eq_ignore_ascii_case(s));
    let category_ok = q
        .category_filter
        .as_ref()
        .is_none_or(|c| a.category.eq_ignore_ascii_case(c));
    let required_ok =
        !q.require_all_identifiers || q.required_terms().all(|t| doc.exact_tf.contains_key(t));
    source_ok && category_ok && required_ok
}

pub fn search(idx: &InvertedIndex, q: &Query) -> Vec<RankedHit> {
    if idx.is_empty() {
        return Vec::new();
    }
    let field = field_of(q);
    let qv = query_vector(idx, q);

    // phase 1: filter and score
    let mut scored: Vec<(usize, f64)> = idx
        .docs()
        .iter()
        .filter(|d| passes_filters(d, q))
        .map(|d| (d.doc_id, cosine(&qv, &doc_vector(idx, field, d))))
        .filter(|(_, s)| *s > 0.0)
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(q.top_k);

    // phase 2: resolve annotations
    scored
        .into_iter()
        .filter_map(|(doc_id, score)| {
            let a = &idx.doc(doc_id)?.annotation;
            Some(RankedHit {
                doc_id,
                score,
                anchor_link: a.anchor_link.clone(),
                doc_uri: a.doc_uri.clone(),
                source: a.source.clone(),
                category: a.category.clone(),
                description: a.description.clone(),
            })
        })
        .collect()
}
