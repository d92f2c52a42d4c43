use thiserror::Error;

use crate::expr::{self, parse_text};
use crate::index::{math_terms, term_kind, words, TermKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueryMode {
    /// Free words matched against descriptions, values, categories and sources.
    Keyword,
    /// `Math:` followed by loose identifiers, numbers and operators.
    MathBag,
    /// `Math:` followed only by `(op,k)` evaluation-order pairs.
    MathPaired,
    /// `Math:` followed by a parseable expression.
    MathExpr,
}

/// Search options that come from checkboxes/flags rather than the query text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryFlags {
    pub exact: bool,
    pub structural: bool,
    pub no_order: bool,
    pub source: Option<String>,
    pub category: Option<String>,
    pub top_k: usize,
}

impl Default for QueryFlags {
    fn default() -> Self {
        QueryFlags {
            exact: false,
            structural: false,
            no_order: false,
            source: None,
            category: None,
            top_k: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub mode: QueryMode,
    /// Term multiset in query order.
    pub terms: Vec<String>,
    pub require_all_identifiers: bool,
    pub structural: bool,
    pub drop_pairs: bool,
    pub source_filter: Option<String>,
    pub category_filter: Option<String>,
    pub top_k: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("empty query")]
    EmptyQuery,
    #[error("bad pair `{0}`: expected `(op,k)` with a known operator and k >= 1")]
    BadPairSyntax(String),
    #[error("bad math token `{0}`: expected an identifier, number, operator or function name")]
    BadToken(String),
    #[error("top_k must be at least 1")]
    ZeroTopK,
}

impl Query {
    /// Terms that make up the query vector: everything except identifiers and
    /// numbers in structural mode.
    pub fn vector_terms(&self) -> impl Iterator<Item = &str> {
        self.terms
            .iter()
            .map(String::as_str)
            .filter(move |t| !self.structural || term_kind(t) != TermKind::Word)
    }

    /// Identifier and number terms a document must contain under `--exact`.
    pub fn required_terms(&self) -> impl Iterator<Item = &str> {
        self.terms
            .iter()
            .map(String::as_str)
            .filter(|t| term_kind(t) == TermKind::Word)
    }
}

/// Splits `(op,k) (op,k) ...`; `None` when the text is not made of
/// parenthesized comma groups at all.
fn pair_groups(text: &str) -> Option<Vec<&str>> {
    let mut groups = Vec::new();
    let mut rest = text.trim_start();
    while !rest.is_empty() {
        let inner = rest.strip_prefix('(')?;
        let close = inner.find(')')?;
        let group = &inner[..close];
        if group.contains('(') || !group.contains(',') {
            return None;
        }
        groups.push(&rest[..close + 2]);
        rest = inner[close + 1..].trim_start();
    }
    (!groups.is_empty()).then_some(groups)
}

fn parse_pair(group: &str) -> Result<String, QueryError> {
    let bad = || QueryError::BadPairSyntax(group.to_string());
    let inner = &group[1..group.len() - 1];
    let (op, k) = inner.split_once(',').ok_or_else(bad)?;
    let (op, k) = (op.trim(), k.trim());
    if !expr::is_operator_symbol(op) {
        return Err(bad());
    }
    match k.parse::<usize>() {
        Ok(k) if k >= 1 => Ok(expr::pair_token(op, k)),
        _ => Err(bad()),
    }
}

fn bag_term(token: &str) -> Result<String, QueryError> {
    if expr::is_identifier(token)
        || expr::is_number_literal(token)
        || expr::is_operator_symbol(token)
    {
        Ok(token.to_string())
    } else {
        Err(QueryError::BadToken(token.to_string()))
    }
}

pub fn parse_query(input: &str, flags: &QueryFlags) -> Result<Query, QueryError> {
    if flags.top_k == 0 {
        return Err(QueryError::ZeroTopK);
    }
    let input = input.trim();
    if input.is_empty() {
        return Err(QueryError::EmptyQuery);
    }
    let math_body = input
        .get(..5)
        .filter(|p| p.eq_ignore_ascii_case("math:"))
        .map(|_| input[5..].trim());

    let (mode, mut terms) = match math_body {
        None => (QueryMode::Keyword, words(input).collect::<Vec<_>>()),
        Some("") => return Err(QueryError::EmptyQuery),
        Some(body) => {
            if let Some(groups) = pair_groups(body) {
                let terms = groups
                    .into_iter()
                    .map(parse_pair)
                    .collect::<Result<Vec<_>, _>>()?;
                (QueryMode::MathPaired, terms)
            } else if let Ok(e) = parse_text(body) {
                (QueryMode::MathExpr, math_terms(&e, true))
            } else {
                let terms = body
                    .split_whitespace()
                    .map(bag_term)
                    .collect::<Result<Vec<_>, _>>()?;
                (QueryMode::MathBag, terms)
            }
        }
    };
    if flags.no_order {
        terms.retain(|t| term_kind(t) != TermKind::Pair);
    }
    if terms.is_empty() && mode == QueryMode::Keyword {
        return Err(QueryError::EmptyQuery);
    }
    Ok(Query {
        mode,
        terms,
        require_all_identifiers: flags.exact,
        structural: flags.structural,
        drop_pairs: flags.no_order,
        source_filter: flags.source.clone(),
        category_filter: flags.category.clone(),
        top_k: flags.top_k,
    })
}
