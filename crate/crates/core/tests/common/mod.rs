#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use mathsem::annotate::Annotation;
use mathsem::expr::{BinOp, Expr, Func};
use mathsem::mathml::{parse_content, to_content};
use mathsem::ontology::{classify, source_from_url};
use mathsem::search::{Query, QueryFlags};
use proptest::prelude::*;

// ---------------------------------------------------------------------------
// Random expressions

fn arb_leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        "[a-zA-Z][a-zA-Z0-9_]{0,3}"
            .prop_filter("not a function name", |s| Func::from_name(s).is_none())
            .prop_map(Expr::Identifier),
        "[0-9]{1,3}(\\.[0-9]{1,2})?".prop_map(Expr::Number),
    ]
}

/// Expressions of depth at most 6 over the whole grammar.
pub fn arb_expr() -> impl Strategy<Value = Expr> {
    arb_leaf().prop_recursive(5, 64, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Expr::negate),
            (
                prop::sample::select(BinOp::ALL.to_vec()),
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, l, r)| Expr::binary(op, l, r)),
            (
                prop::sample::select(vec![
                    Func::Sin,
                    Func::Cos,
                    Func::Tan,
                    Func::Log,
                    Func::Exp,
                    Func::Sqrt
                ]),
                inner.clone()
            )
                .prop_map(|(f, a)| Expr::call(f, vec![a])),
            (
                prop::sample::select(vec![Func::Int, Func::Diff]),
                inner.clone(),
                inner
            )
                .prop_map(|(f, a, b)| Expr::call(f, vec![a, b])),
        ]
    })
}

pub fn depth(e: &Expr) -> usize {
    1 + e.children().into_iter().map(depth).max().unwrap_or(0)
}

// ---------------------------------------------------------------------------
// Presentation MathML writer (test-side, independent of the reader)

fn fenced(inner: &str) -> String {
    format!("<mrow><mo>(</mo>{inner}<mo>)</mo></mrow>")
}

fn pres_operand(e: &Expr) -> String {
    match e {
        Expr::Number(_) | Expr::Identifier(_) => pres_node(e),
        _ => fenced(&pres_node(e)),
    }
}

fn pres_node(e: &Expr) -> String {
    match e {
        Expr::Number(n) => format!("<mn>{n}</mn>"),
        Expr::Identifier(n) => format!("<mi>{n}</mi>"),
        Expr::Neg(x) => format!("<mrow><mo>-</mo>{}</mrow>", pres_operand(x)),
        Expr::Binary {
            op: BinOp::Pow,
            lhs,
            rhs,
        } => {
            format!("<msup>{}{}</msup>", pres_operand(lhs), pres_operand(rhs))
        }
        Expr::Binary {
            op: BinOp::Div,
            lhs,
            rhs,
        } => {
            format!("<mfrac>{}{}</mfrac>", pres_operand(lhs), pres_operand(rhs))
        }
        Expr::Binary { op, lhs, rhs } => format!(
            "<mrow>{}<mo>{}</mo>{}</mrow>",
            pres_operand(lhs),
            op.symbol(),
            pres_operand(rhs)
        ),
        Expr::Call {
            func: Func::Sqrt,
            args,
        } => format!("<msqrt>{}</msqrt>", pres_operand(&args[0])),
        Expr::Call { func, args } => {
            let inner: Vec<String> = args.iter().map(pres_operand).collect();
            format!(
                "<mrow><mi>{}</mi>{}</mrow>",
                func.name(),
                fenced(&inner.join("<mo>,</mo>"))
            )
        }
    }
}

pub fn to_presentation(e: &Expr) -> String {
    format!("<math>{}</math>", pres_node(e))
}

// ---------------------------------------------------------------------------
// Annotation fixtures

pub fn annotation(value: &str, page_url: &str, n: usize, description: &str) -> Annotation {
    let e = mathsem::parse_text(value).unwrap_or_else(|err| panic!("{value}: {err}"));
    let path = mathsem::annotate::page_path(page_url).to_string();
    Annotation {
        doc_uri: format!("{path}#equation{n}"),
        anchor_link: format!("{page_url}#equation{n}"),
        value: to_content(&e),
        source: source_from_url(page_url).name,
        category: classify(&e).category.name().to_string(),
        description: description.to_string(),
    }
}

/// The 10-document corpus used for ranking and persistence checks.
pub fn ten_doc_corpus() -> Vec<Annotation> {
    vec![
        annotation(
            "x + y * z",
            "http://lms.example.com/math101/lesson1/notes.htm",
            1,
            "sum of a product",
        ),
        annotation(
            "A = B + C - D",
            "http://lms.example.com/math101/lesson1/notes.htm",
            2,
            "balance equation",
        ),
        annotation(
            "F = m * a",
            "http://lms.example.com/physics/lesson2/newton.htm",
            1,
            "NewtonEquation",
        ),
        annotation(
            "int(x^2, x)",
            "http://lms.example.com/math101/lesson3/integrals.htm",
            1,
            "integral of a square",
        ),
        annotation(
            "int(sin(t), t)",
            "http://lms.example.com/math101/quizzes/q1.htm",
            1,
            "integral quiz question",
        ),
        annotation(
            "(x+3)^2",
            "http://lms.example.com/math101/lesson1/notes.htm",
            3,
            "square of a binomial",
        ),
        annotation(
            "cos(x)^2 + sin(x)^2 = 1",
            "http://lms.example.com/math101/wiki/trig.htm",
            1,
            "Pythagorean identity",
        ),
        annotation(
            "x * y + z",
            "http://lms.example.com/math101/forum/t7.htm",
            1,
            "product plus z",
        ),
        annotation(
            "log(x * y) = log(x) + log(y)",
            "http://lms.example.com/math101/glossary/log.htm",
            1,
            "log of a product",
        ),
        annotation(
            "1 + 2 * 3",
            "http://lms.example.com/math101/assignments/a1.htm",
            1,
            "arithmetic warm up",
        ),
    ]
}

/// Smaller corpora (≤ 10 docs) exercising ties, empties and single docs.
pub fn fixture_corpora() -> Vec<Vec<Annotation>> {
    let ten = ten_doc_corpus();
    vec![
        ten.clone(),
        vec![annotation("x + y * z", "/math101/lesson1/a.htm", 1, "")],
        ten[..4].to_vec(),
        vec![
            annotation("a + b", "/quiz/q.htm", 1, "twin"),
            annotation("a + b", "/quiz/q.htm", 2, "twin"),
            annotation("a - b", "/lesson/l.htm", 1, "difference"),
            annotation("-a", "/lesson/l.htm", 2, "negation"),
        ],
        ten.iter().rev().cloned().collect(),
    ]
}

/// Query texts spanning keyword, bag, paired and expression modes.
pub const QUERY_TEXTS: &[&str] = &[
    "integral",
    "integral of a square",
    "NewtonEquation",
    "lesson polynomial",
    "trigonometric identity",
    "Math: x y z + *",
    "Math: x + y * z",
    "Math: (+,1) (*,2)",
    "Math: (*,1) (+,2)",
    "Math: (+,2)",
    "Math: X = Y + Z - W",
    "Math: F = m * a",
    "Math: int(x^2, x)",
    "Math: sin(x)",
    "Math: x ^ 2",
    "Math: a + b",
    "Math: polynomial",
    "Math: log",
    "Math: = + -",
    "Math: 1 2 3",
];

/// Every combination of the boolean flags, plus filters and a small top_k.
pub fn flag_battery() -> Vec<QueryFlags> {
    let mut out = Vec::new();
    for bits in 0..8u8 {
        out.push(QueryFlags {
            exact: bits & 1 != 0,
            structural: bits & 2 != 0,
            no_order: bits & 4 != 0,
            ..QueryFlags::default()
        });
    }
    out.push(QueryFlags {
        source: Some("Lesson".into()),
        ..QueryFlags::default()
    });
    out.push(QueryFlags {
        category: Some("calculus".into()),
        ..QueryFlags::default()
    });
    out.push(QueryFlags {
        source: Some("quiz".into()),
        exact: true,
        ..QueryFlags::default()
    });
    out.push(QueryFlags {
        top_k: 2,
        ..QueryFlags::default()
    });
    out
}

// ---------------------------------------------------------------------------
// Brute-force ranking oracle
//
// Recomputes every term, document frequency, weight and cosine from the raw
// annotations with dense vectors; shares nothing with the index/search code
// beyond decoding the content-MathML value.

fn oracle_is_op(t: &str) -> bool {
    ["+", "-", "*", "/", "^", "="].contains(&t)
        || ["sin", "cos", "tan", "log", "exp", "sqrt", "int", "diff"].contains(&t)
}

fn oracle_is_pair(t: &str) -> bool {
    let Some(rest) = t.strip_prefix("pair:") else {
        return false;
    };
    match rest.rsplit_once(':') {
        Some((op, k)) => oracle_is_op(op) && k.parse::<u32>().is_ok_and(|k| k > 0),
        None => false,
    }
}

fn oracle_is_word(t: &str) -> bool {
    !oracle_is_op(t) && !oracle_is_pair(t)
}

fn oracle_symbol(e: &Expr) -> Option<String> {
    match e {
        Expr::Number(_) | Expr::Identifier(_) => None,
        Expr::Neg(_) => Some("-".into()),
        Expr::Binary { op, .. } => Some(op.symbol().into()),
        Expr::Call { func, .. } => Some(func.name().into()),
    }
}

fn oracle_walk(e: &Expr, leaves: &mut Vec<String>, ops: &mut Vec<String>) {
    match e {
        Expr::Number(s) | Expr::Identifier(s) => leaves.push(s.clone()),
        Expr::Neg(x) => oracle_walk(x, leaves, ops),
        Expr::Binary { lhs, rhs, .. } => {
            oracle_walk(lhs, leaves, ops);
            oracle_walk(rhs, leaves, ops);
        }
        Expr::Call { args, .. } => args.iter().for_each(|a| oracle_walk(a, leaves, ops)),
    }
    if let Some(sym) = oracle_symbol(e) {
        ops.push(sym);
    }
}

fn oracle_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_ascii_alphanumeric() {
            cur.push(c.to_ascii_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// (exact, structural) term lists for one annotation.
pub fn oracle_terms(a: &Annotation) -> (Vec<String>, Vec<String>) {
    let e = parse_content(&a.value).expect("fixture values parse");
    let (mut leaves, mut ops) = (Vec::new(), Vec::new());
    oracle_walk(&e, &mut leaves, &mut ops);
    let pairs: Vec<String> = ops
        .iter()
        .enumerate()
        .map(|(i, op)| format!("pair:{op}:{}", i + 1))
        .collect();
    let structural: Vec<String> = ops.iter().chain(pairs.iter()).cloned().collect();
    let mut exact = leaves;
    exact.extend(structural.iter().cloned());
    exact.extend(oracle_words(&a.description));
    exact.extend(oracle_words(&a.category));
    exact.extend(oracle_words(&a.source));
    (exact, structural)
}

/// Ranked (corpus position, score) pairs by exhaustive cosine computation.
pub fn oracle_rank(corpus: &[Annotation], q: &Query) -> Vec<(usize, f64)> {
    if corpus.is_empty() {
        return Vec::new();
    }
    let docs: Vec<Vec<String>> = corpus
        .iter()
        .map(|a| {
            let (exact, structural) = oracle_terms(a);
            if q.structural {
                structural
            } else {
                exact
            }
        })
        .collect();
    let exact_sets: Vec<BTreeSet<String>> = corpus
        .iter()
        .map(|a| oracle_terms(a).0.into_iter().collect())
        .collect();
    let query_terms: Vec<String> = q
        .terms
        .iter()
        .filter(|t| !q.structural || !oracle_is_word(t))
        .cloned()
        .collect();

    let vocab: Vec<String> = docs
        .iter()
        .flatten()
        .chain(query_terms.iter())
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = corpus.len() as f64;
    let tf = |terms: &[String], t: &str| terms.iter().filter(|x| *x == t).count() as f64;
    let idf: Vec<f64> = vocab
        .iter()
        .map(|t| {
            let df = docs.iter().filter(|d| d.iter().any(|x| x == t)).count() as f64;
            if df == 0.0 {
                0.0
            } else {
                (1.0 + n / df).ln()
            }
        })
        .collect();
    let qv: Vec<f64> = vocab
        .iter()
        .zip(&idf)
        .map(|(t, w)| tf(&query_terms, t) * w)
        .collect();
    let qn = qv.iter().map(|x| x * x).sum::<f64>().sqrt();

    let mut ranked = Vec::new();
    for (i, (a, d)) in corpus.iter().zip(&docs).enumerate() {
        if let Some(s) = &q.source_filter {
            if !a.source.eq_ignore_ascii_case(s) {
                continue;
            }
        }
        if let Some(c) = &q.category_filter {
            if !a.category.eq_ignore_ascii_case(c) {
                continue;
            }
        }
        if q.require_all_identifiers
            && !q
                .terms
                .iter()
                .filter(|t| oracle_is_word(t))
                .all(|t| exact_sets[i].contains(t))
        {
            continue;
        }
        let dv: Vec<f64> = vocab.iter().zip(&idf).map(|(t, w)| tf(d, t) * w).collect();
        let dn = dv.iter().map(|x| x * x).sum::<f64>().sqrt();
        if qn == 0.0 || dn == 0.0 {
            continue;
        }
        let dot: f64 = qv.iter().zip(&dv).map(|(a, b)| a * b).sum();
        let score = dot / (qn * dn);
        if score > 0.0 {
            ranked.push((i, score));
        }
    }
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    ranked.truncate(q.top_k);
    ranked
}

/// Compares implementation output with the oracle: same length, scores
/// within `tol` position by position, and any id mismatch only inside a
/// group of tied scores.
pub fn matches_oracle(
    actual: &[(usize, f64)],
    expected: &[(usize, f64)],
    tol: f64,
) -> Result<(), String> {
    if actual.len() != expected.len() {
        return Err(format!(
            "length {} vs oracle {}: {actual:?} vs {expected:?}",
            actual.len(),
            expected.len()
        ));
    }
    for (pos, (a, e)) in actual.iter().zip(expected).enumerate() {
        if (a.1 - e.1).abs() > tol {
            return Err(format!("position {pos}: score {} vs oracle {}", a.1, e.1));
        }
        if a.0 != e.0 {
            let tied = expected
                .iter()
                .any(|(id, s)| *id == a.0 && (s - e.1).abs() <= tol);
            if !tied {
                return Err(format!("position {pos}: doc {} vs oracle doc {}", a.0, e.0));
            }
        }
    }
    Ok(())
}

/// Page generator for annotate/extract checks: `(xhtml, page_url, descriptions, exprs)`.
pub fn synthetic_page(seed: u64, exprs: &[Expr]) -> (String, String, BTreeMap<usize, String>) {
    let sections = [
        "lesson",
        "quizzes",
        "wiki",
        "forum",
        "glossary",
        "assignments",
        "misc",
    ];
    let section = sections[(seed as usize) % sections.len()];
    let url = format!(
        "http://lms.example.com/course{}/{section}{}/page{seed}.htm",
        seed % 3,
        seed % 5
    );
    let mut body = String::from(
        "<html xmlns=\"http://www.w3.org/1999/xhtml\"><head><title>p</title></head><body>",
    );
    let mut descriptions = BTreeMap::new();
    for (i, e) in exprs.iter().enumerate() {
        body.push_str(&format!("<p>Equation {} &amp; text</p>", i + 1));
        body.push_str(&to_presentation(e));
        if (seed + i as u64).is_multiple_of(2) {
            descriptions.insert(i + 1, format!("use {i} of page {seed}: \"quoted\" <b>"));
        }
    }
    body.push_str("</body></html>");
    (body, url, descriptions)
}
