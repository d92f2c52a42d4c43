//! RDFa annotation of math elements in XHTML pages and extraction of the
//! annotations (and their triples) back out of annotated pages.
//!
//! Every annotated equation becomes
//!
//! ```text
//! <div xmlns:m="http://example.com/math/vocab#" id="equationN" about="{page_path}#equationN">
//!   <span property="m:hasLink" content="..."/>   (and hasValue, hasSource,
//!   ...                                            hasCategory, hasDescription)
//!   <math>annotated content MathML</math>
//! </div>
//! ```
//!
//! emitted on a single line, replacing the original `math` element in place.

use std::collections::BTreeMap;
use std::fmt;

use roxmltree::{Document, Node};
use thiserror::Error;

use crate::expr::Expr;
use crate::mathml::{self, MathmlError};
use crate::ontology::{classify, source_from_url};

pub const VOCAB_NAMESPACE: &str = "http://example.com/math/vocab#";
pub const VOCAB_PREFIX: &str = "m";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    Link,
    Value,
    Source,
    Category,
    Description,
}

impl Field {
    pub const ALL: [Field; 5] = [
        Field::Link,
        Field::Value,
        Field::Source,
        Field::Category,
        Field::Description,
    ];

    /// Predicate name as used in triples and queries, e.g. `hasLink`.
    pub fn predicate(self) -> &'static str {
        match self {
            Field::Link => "hasLink",
            Field::Value => "hasValue",
            Field::Source => "hasSource",
            Field::Category => "hasCategory",
            Field::Description => "hasDescription",
        }
    }

    pub fn from_predicate(s: &str) -> Option<Field> {
        Field::ALL.into_iter().find(|f| f.predicate() == s)
    }

    /// CURIE used in the `property` attribute, e.g. `m:hasLink`.
    pub fn property(self) -> String {
        format!("{VOCAB_PREFIX}:{}", self.predicate())
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.predicate())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Annotation {
    /// `{page_path}#equationN`
    pub doc_uri: String,
    /// `{page_url}#equationN`
    pub anchor_link: String,
    /// Content MathML without annotation attributes.
    pub value: String,
    pub source: String,
    pub category: String,
    pub description: String,
}

impl Annotation {
    pub fn field(&self, field: Field) -> &str {
        match field {
            Field::Link => &self.anchor_link,
            Field::Value => &self.value,
            Field::Source => &self.source,
            Field::Category => &self.category,
            Field::Description => &self.description,
        }
    }

    pub fn expr(&self) -> Result<Expr, MathmlError> {
        mathml::parse_content(&self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl Triple {
    pub fn new(subject: &str, predicate: &str, object: &str) -> Self {
        Triple {
            subject: subject.to_string(),
            predicate: predicate.to_string(),
            object: object.to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("malformed XHTML: {0}")]
    Parse(String),
    #[error("missing {predicate} for {doc_uri}")]
    MissingField { predicate: Field, doc_uri: String },
    #[error("line {line}: expected `subject<TAB>predicate<TAB>object`")]
    TripleFormat { line: usize },
}

/// A math element that could not be converted and was left as-is.
#[derive(Debug, Clone, PartialEq)]
pub struct Warning {
    /// 1-based position of the element among the page's math elements.
    pub element: usize,
    pub byte_offset: usize,
    pub error: MathmlError,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "math element {} (byte {}) skipped: {}",
            self.element, self.byte_offset, self.error
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotated {
    pub xhtml: String,
    pub annotations: Vec<Annotation>,
    pub warnings: Vec<Warning>,
}

/// Page URL without query or fragment.
fn page_base(page_url: &str) -> &str {
    page_url.split(['#', '?']).next().unwrap_or("")
}

/// Path component of a page URL: scheme and host are dropped, and so is a
/// leading dotted host on scheme-less URLs (`www.example.com/lesson/a.htm`).
pub fn page_path(page_url: &str) -> &str {
    let base = page_base(page_url);
    if let Some((_, rest)) = base.split_once("://") {
        return rest.find('/').map_or("/", |i| &rest[i..]);
    }
    if !base.starts_with('/') {
        if let Some(i) = base.find('/') {
            if base[..i].contains('.') {
                return &base[i..];
            }
        }
    }
    base
}

pub(crate) fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            // character references survive attribute-value normalization
            '\t' => out.push_str("&#9;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    out
}

fn render_div(annotation: &Annotation, n: usize, expr: &Expr) -> String {
    let mut out = format!(
        "<div xmlns:{VOCAB_PREFIX}=\"{VOCAB_NAMESPACE}\" id=\"equation{n}\" about=\"{}\">",
        escape_xml(&annotation.doc_uri)
    );
    for field in Field::ALL {
        out.push_str(&format!(
            "<span property=\"{}\" content=\"{}\"/>",
            field.property(),
            escape_xml(annotation.field(field))
        ));
    }
    out.push_str(&mathml::to_annotated_content(expr));
    out.push_str("</div>");
    out
}

fn convert_math(node: Node<'_, '_>) -> Result<Expr, MathmlError> {
    if mathml::looks_like_content(node) {
        mathml::content_from_node(node)
    } else {
        mathml::presentation_from_node(node)
    }
}

/// Math elements in document order, skipping ones nested in another math.
fn math_elements<'a, 'i>(doc: &'a Document<'i>) -> Vec<Node<'a, 'i>> {
    doc.descendants()
        .filter(|n| n.is_element() && n.tag_name().name() == "math")
        .filter(|n| {
            !n.ancestors()
                .skip(1)
                .any(|a| a.is_element() && a.tag_name().name() == "math")
        })
        .collect()
}

/// Annotates every convertible math element of a page. `descriptions` maps
/// 1-based equation ordinals to creator-supplied text.
pub fn annotate_document(
    xhtml: &str,
    page_url: &str,
    descriptions: &BTreeMap<usize, String>,
) -> Result<Annotated, AnnotateError> {
    let doc = Document::parse(xhtml).map_err(|e| AnnotateError::Parse(e.to_string()))?;
    let base = page_base(page_url);
    let path = page_path(page_url);
    let source = source_from_url(page_url).name;

    let mut out = String::with_capacity(xhtml.len() * 2);
    let mut cursor = 0;
    let mut annotations = Vec::new();
    let mut warnings = Vec::new();

    for (i, node) in math_elements(&doc).into_iter().enumerate() {
        let range = node.range();
        let expr = match convert_math(node) {
            Ok(e) => e,
            Err(error) => {
                warnings.push(Warning {
                    element: i + 1,
                    byte_offset: range.start,
                    error,
                });
                continue;
            }
        };
        let n = annotations.len() + 1;
        let annotation = Annotation {
            doc_uri: format!("{path}#equation{n}"),
            anchor_link: format!("{base}#equation{n}"),
            value: mathml::to_content(&expr),
            source: source.clone(),
            category: classify(&expr).category.name().to_string(),
            description: descriptions.get(&n).cloned().unwrap_or_default(),
        };
        out.push_str(&xhtml[cursor..range.start]);
        out.push_str(&render_div(&annotation, n, &expr));
        cursor = range.end;
        annotations.push(annotation);
    }
    out.push_str(&xhtml[cursor..]);

    Ok(Annotated {
        xhtml: out,
        annotations,
        warnings,
    })
}

fn property_fields<'a, 'i>(div: Node<'a, 'i>) -> BTreeMap<Field, &'a str> {
    let mut fields = BTreeMap::new();
    for node in div.descendants().skip(1) {
        // spans belong to the closest enclosing annotation block
        let owner = node.ancestors().find(|a| a.attribute("about").is_some());
        if owner != Some(div) {
            continue;
        }
        let (Some(property), Some(content)) =
            (node.attribute("property"), node.attribute("content"))
        else {
            continue;
        };
        let field = property
            .strip_prefix(VOCAB_PREFIX)
            .and_then(|p| p.strip_prefix(':'))
            .and_then(Field::from_predicate);
        if let Some(field) = field {
            fields.entry(field).or_insert(content);
        }
    }
    fields
}

/// Reads every `about`-carrying block of an annotated page, in document order.
pub fn extract_annotations(xhtml: &str) -> Result<Vec<Annotation>, AnnotateError> {
    let doc = Document::parse(xhtml).map_err(|e| AnnotateError::Parse(e.to_string()))?;
    let mut out = Vec::new();
    for div in doc.descendants().filter(|n| n.is_element()) {
        let Some(about) = div.attribute("about") else {
            continue;
        };
        let fields = property_fields(div);
        let get = |field: Field| {
            fields
                .get(&field)
                .map(|s| s.to_string())
                .ok_or_else(|| AnnotateError::MissingField {
                    predicate: field,
                    doc_uri: about.to_string(),
                })
        };
        out.push(Annotation {
            doc_uri: about.to_string(),
            anchor_link: get(Field::Link)?,
            value: get(Field::Value)?,
            source: get(Field::Source)?,
            category: get(Field::Category)?,
            description: get(Field::Description)?,
        });
    }
    Ok(out)
}

pub fn to_triples(annotations: &[Annotation]) -> Vec<Triple> {
    annotations
        .iter()
        .flat_map(|a| {
            Field::ALL
                .into_iter()
                .map(move |f| Triple::new(&a.doc_uri, f.predicate(), a.field(f)))
        })
        .collect()
}

fn escape_tsv(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape_tsv(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

/// Tab-separated field with backslash escapes for tabs, newlines and backslashes.
pub fn tsv_field(s: &str) -> String {
    escape_tsv(s)
}

/// One `subject<TAB>predicate<TAB>object` line per triple.
pub fn write_triples(triples: &[Triple]) -> String {
    triples
        .iter()
        .map(|t| {
            format!(
                "{}\t{}\t{}\n",
                escape_tsv(&t.subject),
                escape_tsv(&t.predicate),
                escape_tsv(&t.object)
            )
        })
        .collect()
}

pub fn read_triples(text: &str) -> Result<Vec<Triple>, AnnotateError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                [s, p, o] => Ok(Triple {
                    subject: unescape_tsv(s),
                    predicate: unescape_tsv(p),
                    object: unescape_tsv(o),
                }),
                _ => Err(AnnotateError::TripleFormat { line: i + 1 }),
            }
        })
        .collect()
}
