//! Math-aware semantic search over XHTML course pages.
//!
//! Pages are annotated with RDFa metadata for every math element (anchor
//! link, content-MathML value, source activity, category, description).
//! Annotations are indexed by identifiers, operators and operator
//! evaluation order, then queried with keyword, `Math:` structural or
//! triple-pattern queries.

pub mod annotate;
pub mod cli;
pub mod expr;
pub mod index;
pub mod mathml;
pub mod ontology;
pub mod search;

pub use annotate::{annotate_document, extract_annotations, to_triples, Annotation, Triple};
pub use expr::{eval_order, op_tokens, parse_text, print_text, skeletonize, Expr};
pub use index::InvertedIndex;
pub use search::{parse_query, search, Query, QueryFlags, RankedHit};
