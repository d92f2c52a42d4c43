//! Conjunctive triple-pattern queries of the form
//!
//! ```text
//! SELECT (* | ?v ...) [FROM <ref>] WHERE { s p o . s p o . ... }
//! ```
//!
//! Subjects and objects are `?variables`, bare tokens, `"quoted strings"`
//! or `<iri>`s; predicates are the five annotation field names.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::annotate::{Field, Triple};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PatternTerm {
    Var(String),
    Literal(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriplePattern {
    pub subject: PatternTerm,
    pub predicate: Field,
    pub object: PatternTerm,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparqlQuery {
    /// `None` for `SELECT *`.
    pub select: Option<Vec<String>>,
    pub from: Option<String>,
    pub patterns: Vec<TriplePattern>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SparqlError {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("selected variable ?{0} does not occur in any pattern")]
    UnboundSelectVar(String),
}

/// One solution: values for the selected variables, in selection order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Binding(pub Vec<(String, String)>);

impl Binding {
    pub fn get(&self, var: &str) -> Option<&str> {
        self.0
            .iter()
            .find(|(v, _)| v == var)
            .map(|(_, value)| value.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Var(String),
    Quoted(String),
    Iri(String),
    Star,
    Dot,
    LBrace,
    RBrace,
}

fn parse_err(offset: usize, message: impl Into<String>) -> SparqlError {
    SparqlError::Parse {
        offset,
        message: message.into(),
    }
}

fn is_word_char(c: char) -> bool {
    !c.is_whitespace() && !matches!(c, '{' | '}' | '<' | '>' | '"' | '?')
}

fn lex(input: &str) -> Result<Vec<(Tok, usize)>, SparqlError> {
    let mut out = Vec::new();
    let mut chars = input.char_indices().peekable();
    while let Some(&(start, c)) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '{' | '}' | '*' => {
                chars.next();
                out.push((
                    match c {
                        '{' => Tok::LBrace,
                        '}' => Tok::RBrace,
                        _ => Tok::Star,
                    },
                    start,
                ));
            }
            '<' => {
                chars.next();
                let mut iri = String::new();
                loop {
                    match chars.next() {
                        Some((_, '>')) => break,
                        Some((_, ch)) => iri.push(ch),
                        None => return Err(parse_err(start, "unterminated `<`")),
                    }
                }
                out.push((Tok::Iri(iri), start));
            }
            '"' => {
                chars.next();
                let mut text = String::new();
                loop {
                    match chars.next() {
                        Some((_, '"')) => break,
                        Some((_, '\\')) => match chars.next() {
                            Some((_, 'n')) => text.push('\n'),
                            Some((_, 't')) => text.push('\t'),
                            Some((_, ch)) => text.push(ch),
                            None => return Err(parse_err(start, "unterminated string")),
                        },
                        Some((_, ch)) => text.push(ch),
                        None => return Err(parse_err(start, "unterminated string")),
                    }
                }
                out.push((Tok::Quoted(text), start));
            }
            '?' => {
                chars.next();
                let mut name = String::new();
                while let Some(&(_, ch)) = chars.peek() {
                    if ch.is_alphanumeric() || ch == '_' {
                        name.push(ch);
                        chars.next();
                    } else {
                        break;
                    }
                }
                if name.is_empty() {
                    return Err(parse_err(start, "empty variable name"));
                }
                out.push((Tok::Var(name), start));
            }
            _ => {
                let mut word = String::new();
                while let Some(&(_, ch)) = chars.peek() {
                    if is_word_char(ch) {
                        word.push(ch);
                        chars.next();
                    } else {
                        break;
                    }
                }
                // a trailing `.` terminates the pattern rather than the token
                if word.len() > 1 && word.ends_with('.') {
                    word.pop();
                    let dot_at = start + word.len();
                    out.push((Tok::Word(word), start));
                    out.push((Tok::Dot, dot_at));
                } else if word == "." {
                    out.push((Tok::Dot, start));
                } else {
                    out.push((Tok::Word(word), start));
                }
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, o)| *o)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn keyword(&mut self, kw: &str) -> bool {
        match self.peek() {
            Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw) => {
                self.pos += 1;
                true
            }
            _ => false,
        }
    }

    fn term(&mut self) -> Result<PatternTerm, SparqlError> {
        let at = self.offset();
        match self.next() {
            Some(Tok::Var(v)) => Ok(PatternTerm::Var(v)),
            Some(Tok::Word(w)) | Some(Tok::Quoted(w)) | Some(Tok::Iri(w)) => {
                Ok(PatternTerm::Literal(w))
            }
            _ => Err(parse_err(at, "expected a variable or literal")),
        }
    }

    fn predicate(&mut self) -> Result<Field, SparqlError> {
        let at = self.offset();
        match self.next() {
            Some(Tok::Word(w)) => Field::from_predicate(&w)
                .ok_or_else(|| parse_err(at, format!("unknown predicate `{w}`"))),
            _ => Err(parse_err(at, "expected a predicate")),
        }
    }
}

pub fn parse_sparql(input: &str) -> Result<SparqlQuery, SparqlError> {
    let mut p = Parser {
        toks: lex(input)?,
        pos: 0,
        end: input.len(),
    };
    if !p.keyword("SELECT") {
        return Err(parse_err(p.offset(), "expected SELECT"));
    }
    let select = if p.peek() == Some(&Tok::Star) {
        p.pos += 1;
        None
    } else {
        let mut vars = Vec::new();
        while let Some(Tok::Var(v)) = p.peek() {
            vars.push(v.clone());
            p.pos += 1;
        }
        if vars.is_empty() {
            return Err(parse_err(
                p.offset(),
                "expected `*` or variables after SELECT",
            ));
        }
        Some(vars)
    };
    let from = if p.keyword("FROM") {
        match p.next() {
            Some(Tok::Iri(r)) => Some(r),
            _ => return Err(parse_err(p.offset(), "expected <ref> after FROM")),
        }
    } else {
        None
    };
    if !p.keyword("WHERE") {
        return Err(parse_err(p.offset(), "expected WHERE"));
    }
    if p.next() != Some(Tok::LBrace) {
        return Err(parse_err(p.offset(), "expected `{`"));
    }
    let mut patterns = Vec::new();
    loop {
        match p.peek() {
            Some(Tok::RBrace) => {
                p.pos += 1;
                break;
            }
            None => return Err(parse_err(p.end, "expected `}`")),
            _ => {}
        }
        let subject = p.term()?;
        let predicate = p.predicate()?;
        let object = p.term()?;
        patterns.push(TriplePattern {
            subject,
            predicate,
            object,
        });
        match p.peek() {
            Some(Tok::Dot) => p.pos += 1,
            Some(Tok::RBrace) => {}
            _ => return Err(parse_err(p.offset(), "expected `.` or `}`")),
        }
    }
    if p.peek().is_some() {
        return Err(parse_err(p.offset(), "unexpected input after `}`"));
    }
    if patterns.is_empty() {
        return Err(parse_err(p.end, "empty WHERE clause"));
    }
    let query = SparqlQuery {
        select,
        from,
        patterns,
    };
    if let Some(vars) = &query.select {
        let known = query.variables();
        if let Some(missing) = vars.iter().find(|v| !known.contains(v)) {
            return Err(SparqlError::UnboundSelectVar(missing.clone()));
        }
    }
    Ok(query)
}

impl SparqlQuery {
    /// Variables in order of first appearance.
    pub fn variables(&self) -> Vec<String> {
        let mut vars: Vec<String> = Vec::new();
        for p in &self.patterns {
            for term in [&p.subject, &p.object] {
                if let PatternTerm::Var(v) = term {
                    if !vars.contains(v) {
                        vars.push(v.clone());
                    }
                }
            }
        }
        vars
    }

    pub fn projected(&self) -> Vec<String> {
        self.select.clone().unwrap_or_else(|| self.variables())
    }
}

type Partial = BTreeMap<String, String>;

fn unify(term: &PatternTerm, value: &str, b: &mut Partial) -> bool {
    match term {
        PatternTerm::Literal(l) => l == value,
        PatternTerm::Var(v) => match b.get(v) {
            Some(bound) => bound == value,
            None => {
                b.insert(v.clone(), value.to_string());
                true
            }
        },
    }
}

fn resolve<'a>(term: &'a PatternTerm, b: &'a Partial) -> &'a str {
    match term {
        PatternTerm::Literal(l) => l,
        PatternTerm::Var(v) => b.get(v).map(String::as_str).unwrap_or(""),
    }
}

/// Every assignment of the query's variables under which all patterns are
/// present in `triples`. Solutions are ordered by the subjects they bind
/// (pattern order), then by the remaining variables.
pub fn sparql_select(triples: &[Triple], q: &SparqlQuery) -> Result<Vec<Binding>, SparqlError> {
    if let Some(vars) = &q.select {
        let known = q.variables();
        if let Some(missing) = vars.iter().find(|v| !known.contains(v)) {
            return Err(SparqlError::UnboundSelectVar(missing.clone()));
        }
    }
    let mut graph: Vec<&Triple> = triples.iter().collect();
    graph.sort();
    graph.dedup();
    let mut by_predicate: BTreeMap<&str, Vec<&Triple>> = BTreeMap::new();
    for t in graph {
        by_predicate
            .entry(t.predicate.as_str())
            .or_default()
            .push(t);
    }

    let mut partials: Vec<Partial> = vec![Partial::new()];
    for pattern in &q.patterns {
        let candidates = by_predicate
            .get(pattern.predicate.predicate())
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        let mut next = Vec::new();
        for b in &partials {
            for t in candidates {
                let mut extended = b.clone();
                if unify(&pattern.subject, &t.subject, &mut extended)
                    && unify(&pattern.object, &t.object, &mut extended)
                {
                    next.push(extended);
                }
            }
        }
        partials = next;
        if partials.is_empty() {
            break;
        }
    }

    let all_vars = q.variables();
    let sort_key = |b: &Partial| -> (Vec<String>, Vec<String>) {
        (
            q.patterns
                .iter()
                .map(|p| resolve(&p.subject, b).to_string())
                .collect(),
            all_vars.iter().map(|v| b[v].clone()).collect(),
        )
    };
    let mut keyed: Vec<_> = partials.into_iter().map(|b| (sort_key(&b), b)).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));

    let projected = q.projected();
    Ok(keyed
        .into_iter()
        .map(|(_, b)| {
            Binding(
                projected
                    .iter()
                    .map(|v| (v.clone(), b[v].clone()))
                    .collect(),
            )
        })
        .collect())
}
