mod common;

use std::collections::BTreeMap;

use common::{arb_expr, depth, to_presentation};
use mathsem::annotate::{to_triples, Triple};
use mathsem::expr::{eval_order, op_tokens, parse_text, print_text, skeletonize};
use mathsem::index::{FieldKind, InvertedIndex};
use mathsem::mathml::{parse_content, parse_presentation, to_content};
use mathsem::ontology::{classify, Category, TagStore};
use mathsem::search::sparql::{parse_sparql, sparql_select, Binding, PatternTerm, SparqlQuery};
use mathsem::search::{cosine, parse_query, search, QueryFlags, WeightVector};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn text_round_trip(e in arb_expr()) {
        prop_assert!(depth(&e) <= 6);
        let printed = print_text(&e);
        prop_assert_eq!(parse_text(&printed).unwrap(), e.clone(), "{}", printed);
    }

    #[test]
    fn content_round_trip(e in arb_expr()) {
        prop_assert_eq!(parse_content(&to_content(&e)).unwrap(), e);
    }

    #[test]
    fn presentation_reads_back(e in arb_expr()) {
        prop_assert_eq!(parse_presentation(&to_presentation(&e)).unwrap(), e);
    }

    #[test]
    fn eval_orders_are_dense(e in arb_expr()) {
        let orders: Vec<usize> = eval_order(&e).iter().map(|o| o.order).collect();
        let k = op_tokens(&e).len();
        prop_assert_eq!(orders, (1..=k).collect::<Vec<_>>());
    }

    #[test]
    fn skeletons(e in arb_expr()) {
        let s = skeletonize(&e);
        prop_assert_eq!(skeletonize(&s), s.clone());
        prop_assert_eq!(eval_order(&s), eval_order(&e));
        prop_assert!(s.leaves().iter().all(|l| *l == "term"));
    }

    #[test]
    fn classify_is_total(e in arb_expr()) {
        let c = classify(&e);
        prop_assert!(Category::ALL.contains(&c.category));
    }

    #[test]
    fn cosine_symmetric_and_bounded(
        a in prop::collection::btree_map("[a-e]", 0.0f64..10.0, 0..5),
        b in prop::collection::btree_map("[a-e]", 0.0f64..10.0, 0..5),
    ) {
        let (a, b): (WeightVector, WeightVector) = (a, b);
        let ab = cosine(&a, &b);
        prop_assert_eq!(ab, cosine(&b, &a));
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn tag_counts_monotone(ops in prop::collection::vec((0usize..3, 0usize..3), 1..30)) {
        let tags = ["math", "formula", "trig"];
        let resources = ["/a", "/b", "/c"];
        let mut store = TagStore::new();
        let mut last: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for (r, t) in ops {
            let count = store.add_tag(resources[r], "Lesson", tags[t]).unwrap();
            let prev = last.insert((r, t), count).unwrap_or(0);
            prop_assert_eq!(count, prev + 1);
        }
    }

    #[test]
    fn promotion_stays_acyclic(
        ops in prop::collection::vec((0usize..4, 0usize..4, 0usize..5), 1..40),
        threshold in 1u64..4,
    ) {
        let concepts = ["Lesson", "Quiz", "Wiki", "forum"];
        let tags = ["trig", "algebra", "lesson", "Polynomial", "area"];
        let mut store = TagStore::new();
        for (r, c, t) in ops {
            store.add_tag(&format!("/r{r}"), concepts[c], tags[t]).unwrap();
        }
        let created = store.promote_tags(threshold);
        for c in &created {
            prop_assert!(!["lesson", "polynomial"].contains(&c.name.as_str()));
        }
        prop_assert!(store.promote_tags(threshold).is_empty());
        // every subclass chain terminates
        let edges: BTreeMap<String, String> = store.subclass_edges().into_iter().collect();
        for start in edges.keys() {
            let mut cur = start.clone();
            for _ in 0..=edges.len() {
                match edges.get(&cur) {
                    Some(parent) => cur = parent.clone(),
                    None => break,
                }
            }
            prop_assert!(!edges.contains_key(&cur), "cycle through {}", start);
        }
    }
}

#[test]
fn presentation_fixture_pairs() {
    let pairs = [
        ("<math><mi>x</mi></math>", "x"),
        ("<math><mn>3.5</mn></math>", "3.5"),
        ("<math><mi>x</mi><mo>+</mo><mi>y</mi><mo>*</mo><mi>z</mi></math>", "x + y * z"),
        ("<math><mrow><mi>x</mi><mo>-</mo><mi>y</mi><mo>-</mo><mi>z</mi></mrow></math>", "x - y - z"),
        ("<math><msup><mrow><mi>x</mi><mo>+</mo><mn>3</mn></mrow><mn>2</mn></msup></math>", "(x+3)^2"),
        ("<math><msup><mi>x</mi><mn>2</mn></msup><mo>+</mo><mn>1</mn></math>", "x^2 + 1"),
        ("<math><mfrac><mi>a</mi><mi>b</mi></mfrac></math>", "a / b"),
        ("<math><mfrac><mrow><mi>a</mi><mo>+</mo><mi>b</mi></mrow><mn>2</mn></mfrac></math>", "(a + b) / 2"),
        ("<math><msqrt><msup><mi>x</mi><mn>2</mn></msup><mo>+</mo><msup><mi>y</mi><mn>2</mn></msup></msqrt></math>", "sqrt(x^2 + y^2)"),
        ("<math><mi>F</mi><mo>=</mo><mi>m</mi><mo>*</mo><mi>a</mi></math>", "F = m * a"),
        ("<math><mi>X</mi><mo>=</mo><mi>Y</mi><mo>+</mo><mi>Z</mi><mo>-</mo><mi>W</mi></math>", "X = Y + Z - W"),
        ("<math><mi>cos</mi><mo>(</mo><mi>x</mi><mo>)</mo></math>", "cos(x)"),
        ("<math><mi>sin</mi><mrow><mo>(</mo><mi>x</mi><mo>)</mo></mrow></math>", "sin(x)"),
        ("<math><msup><mrow><mi>sin</mi><mo>(</mo><mi>x</mi><mo>)</mo></mrow><mn>2</mn></msup></math>", "sin(x)^2"),
        ("<math><mi>int</mi><mo>(</mo><msup><mi>x</mi><mn>2</mn></msup><mo>,</mo><mi>x</mi><mo>)</mo></math>", "int(x^2, x)"),
        ("<math><mi>diff</mi><mrow><mo>(</mo><mi>log</mi><mo>(</mo><mi>x</mi><mo>)</mo><mo>,</mo><mi>x</mi><mo>)</mo></mrow></math>", "diff(log(x), x)"),
        ("<math><mo>-</mo><mi>x</mi><mo>\u{00d7}</mo><mi>y</mi></math>", "-x * y"),
        ("<math><mi>c</mi><mo>*</mo><mrow><mo>(</mo><mi>a</mi><mo>)</mo><mo>+</mo><mo>(</mo><mi>b</mi><mo>)</mo></mrow></math>", "c * (a + b)"),
        ("<math><msup><mi>e</mi><mrow><mo>-</mo><mi>t</mi></mrow></msup></math>", "e ^ -t"),
        ("<math><mi>exp</mi><mo>(</mo><mi>x</mi><mo>)</mo><mo>=</mo><mn>1</mn><mo>+</mo><mi>x</mi></math>", "exp(x) = 1 + x"),
    ];
    assert_eq!(pairs.len(), 20);
    for (xml, text) in pairs {
        assert_eq!(
            parse_presentation(xml).unwrap_or_else(|e| panic!("{xml}: {e}")),
            parse_text(text).unwrap(),
            "{xml}"
        );
    }
}

#[test]
fn index_df_matches_recount() {
    let corpus = common::ten_doc_corpus();
    let (idx, skipped) = InvertedIndex::build(&corpus);
    assert!(skipped.is_empty());
    let (exact, structural) = idx.recount_df();
    assert_eq!(&exact, idx.df_map(FieldKind::Exact));
    assert_eq!(&structural, idx.df_map(FieldKind::Structural));

    // independent recount from the oracle's own tokenization
    let mut oracle_df: BTreeMap<String, u32> = BTreeMap::new();
    for a in &corpus {
        let (terms, _) = common::oracle_terms(a);
        let unique: std::collections::BTreeSet<_> = terms.into_iter().collect();
        for t in unique {
            *oracle_df.entry(t).or_default() += 1;
        }
    }
    assert_eq!(&oracle_df, idx.df_map(FieldKind::Exact));

    for doc in idx.docs() {
        for field in [FieldKind::Exact, FieldKind::Structural] {
            for (term, tf) in doc.tf(field) {
                let df = idx.df(field, term) as f64;
                let expected = *tf as f64 * (1.0 + idx.len() as f64 / df).ln();
                assert!((idx.weight(field, term, doc) - expected).abs() < 1e-9);
                assert!(idx.weight(field, term, doc) > 0.0);
            }
        }
    }
}

#[test]
fn adding_documents_never_lowers_df() {
    let corpus = common::ten_doc_corpus();
    let mut idx = InvertedIndex::new();
    for a in corpus {
        let before = idx.clone();
        idx.add(a).unwrap();
        for (t, df) in before.df_map(FieldKind::Exact) {
            assert!(idx.df(FieldKind::Exact, t) >= *df);
        }
        for (old, new) in before.docs().iter().zip(idx.docs()) {
            assert_eq!(old, new);
        }
    }
}

#[test]
fn search_flag_invariants() {
    for corpus in common::fixture_corpora() {
        let (idx, _) = InvertedIndex::build(&corpus);
        for text in common::QUERY_TEXTS {
            let base = QueryFlags::default();
            let loose = search(&idx, &parse_query(text, &base).unwrap());
            let exact = search(
                &idx,
                &parse_query(
                    text,
                    &QueryFlags {
                        exact: true,
                        ..base.clone()
                    },
                )
                .unwrap(),
            );
            assert!(
                exact
                    .iter()
                    .all(|h| loose.iter().any(|l| l.doc_id == h.doc_id)),
                "{text}"
            );

            for source in ["Lesson", "Quiz", "Wiki"] {
                let filtered = search(
                    &idx,
                    &parse_query(
                        text,
                        &QueryFlags {
                            source: Some(source.into()),
                            ..base.clone()
                        },
                    )
                    .unwrap(),
                );
                assert!(filtered
                    .iter()
                    .all(|h| loose.iter().any(|l| l.doc_id == h.doc_id)));
                assert!(filtered.iter().all(|h| h.source == source));
            }
        }
    }
}

#[test]
fn no_order_makes_bag_and_expression_equal() {
    for corpus in common::fixture_corpora() {
        let (idx, _) = InvertedIndex::build(&corpus);
        let flags = QueryFlags {
            no_order: true,
            ..QueryFlags::default()
        };
        let bag = search(&idx, &parse_query("Math: x y z + *", &flags).unwrap());
        let expr = search(&idx, &parse_query("Math: x + y * z", &flags).unwrap());
        assert_eq!(bag, expr);
    }
}

// ---------------------------------------------------------------------------
// SPARQL-lite against a naive per-pattern join

fn naive_select(triples: &[Triple], q: &SparqlQuery) -> Vec<Binding> {
    let vars = q.variables();
    let mut graph = triples.to_vec();
    graph.sort();
    graph.dedup();
    // all values each variable could take, then test every full assignment
    let values: Vec<String> = graph
        .iter()
        .flat_map(|t| [t.subject.clone(), t.object.clone()])
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut out = Vec::new();
    let total = values.len().pow(vars.len() as u32);
    for mut code in 0..total {
        let mut assign = BTreeMap::new();
        for v in &vars {
            assign.insert(v.clone(), values[code % values.len()].clone());
            code /= values.len();
        }
        let value = |t: &PatternTerm| match t {
            PatternTerm::Var(v) => assign[v].clone(),
            PatternTerm::Literal(l) => l.clone(),
        };
        let ok = q.patterns.iter().all(|p| {
            graph.iter().any(|t| {
                t.subject == value(&p.subject)
                    && t.predicate == p.predicate.predicate()
                    && t.object == value(&p.object)
            })
        });
        if ok {
            out.push(Binding(
                q.projected()
                    .iter()
                    .map(|v| (v.clone(), assign[v].clone()))
                    .collect(),
            ));
        }
    }
    out
}

#[test]
fn sparql_matches_naive_join() {
    let corpus: Vec<_> = common::ten_doc_corpus().into_iter().take(5).collect();
    let mut triples = to_triples(&corpus);
    triples.push(Triple::new("/extra#equation1", "hasSource", "Lesson"));
    let queries = [
        "SELECT * WHERE { ?s hasSource Lesson }",
        "SELECT ?s ?c WHERE { ?s hasSource Lesson . ?s hasCategory ?c }",
        "SELECT * WHERE { ?s hasSource ?src . ?t hasSource ?src . ?t hasCategory calculus }",
        "SELECT ?l WHERE { ?r hasDescription NewtonEquation . ?r hasLink ?l }",
        "SELECT * WHERE { ?s hasCategory nothing }",
    ];
    for text in queries {
        let q = parse_sparql(text).unwrap();
        let mut fast = sparql_select(&triples, &q).unwrap();
        let mut slow = naive_select(&triples, &q);
        let key = |b: &Binding| b.0.clone();
        fast.sort_by_key(key);
        slow.sort_by_key(key);
        assert_eq!(fast, slow, "{text}");
    }
}
