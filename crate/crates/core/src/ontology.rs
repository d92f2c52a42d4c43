//! Course ontology: the static upper layer, the equation category table,
//! source inference from page URLs and the tag store whose most agreed-upon
//! tags are promoted into bottom-layer concepts.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::expr::{BinOp, Expr, Func};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Layer {
    Upper,
    Bottom,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConceptId {
    pub name: String,
    pub layer: Layer,
}

impl ConceptId {
    pub fn upper(name: &str) -> Self {
        ConceptId {
            name: name.to_string(),
            layer: Layer::Upper,
        }
    }

    pub fn bottom(name: &str) -> Self {
        ConceptId {
            name: name.to_string(),
            layer: Layer::Bottom,
        }
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Predicate {
    SubClassOf,
    ConsistOf,
    IsSolvedBy,
    HasTag,
    PartOf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub subject: ConceptId,
    pub predicate: Predicate,
    pub object: String,
}

/// Course-structure concepts of the upper ontology.
pub const COURSE_CONCEPTS: [&str; 11] = [
    "Activity",
    "Lesson",
    "Glossary",
    "Assignment",
    "Wiki",
    "Forum",
    "Resource",
    "Quiz",
    "Question",
    "Post",
    "Student",
];

const ACTIVITY_KINDS: [&str; 7] = [
    "Lesson",
    "Glossary",
    "Assignment",
    "Wiki",
    "Forum",
    "Resource",
    "Quiz",
];

/// Static relations of the upper ontology.
pub fn upper_relations() -> Vec<Relation> {
    let rel = |s: &str, p, o: &str| Relation {
        subject: ConceptId::upper(s),
        predicate: p,
        object: o.to_string(),
    };
    let mut out: Vec<Relation> = ACTIVITY_KINDS
        .iter()
        .map(|kind| rel(kind, Predicate::SubClassOf, "Activity"))
        .collect();
    out.extend([
        rel("Quiz", Predicate::ConsistOf, "Question"),
        rel("Forum", Predicate::ConsistOf, "Post"),
        rel("Question", Predicate::PartOf, "Quiz"),
        rel("Post", Predicate::PartOf, "Forum"),
        rel("Assignment", Predicate::IsSolvedBy, "Student"),
    ]);
    out
}

pub fn upper_concepts() -> Vec<ConceptId> {
    COURSE_CONCEPTS
        .iter()
        .copied()
        .chain(Category::ALL.iter().map(|c| c.name()))
        .map(ConceptId::upper)
        .collect()
}

// ---------------------------------------------------------------------------
// Categories

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Calculus,
    Trigonometric,
    LogExp,
    Polynomial,
    Arithmetic,
    Other,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Calculus,
        Category::Trigonometric,
        Category::LogExp,
        Category::Polynomial,
        Category::Arithmetic,
        Category::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Calculus => "calculus",
            Category::Trigonometric => "trigonometric",
            Category::LogExp => "logexp",
            Category::Polynomial => "polynomial",
            Category::Arithmetic => "arithmetic",
            Category::Other => "other",
        }
    }

    pub fn from_name(s: &str) -> Option<Category> {
        Category::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub category: Category,
    /// The expression contains an `=` node.
    pub equation: bool,
}

fn has_call(e: &Expr, funcs: &[Func]) -> bool {
    e.contains(|n| matches!(n, Expr::Call { func, .. } if funcs.contains(func)))
}

/// `=` is transparent; every other node must satisfy `allowed`.
fn only_nodes(e: &Expr, allowed: &impl Fn(&Expr) -> bool) -> bool {
    let this_ok = matches!(e, Expr::Binary { op: BinOp::Eq, .. }) || allowed(e);
    this_ok && e.children().into_iter().all(|c| only_nodes(c, allowed))
}

fn is_polynomial(e: &Expr) -> bool {
    let allowed = |n: &Expr| match n {
        Expr::Number(_) | Expr::Identifier(_) | Expr::Neg(_) => true,
        Expr::Binary {
            op: BinOp::Add | BinOp::Sub | BinOp::Mul,
            ..
        } => true,
        // the base is checked recursively; the exponent must be an integer literal
        Expr::Binary {
            op: BinOp::Pow,
            rhs,
            ..
        } => matches!(**rhs, Expr::Number(ref n) if !n.contains('.')),
        _ => false,
    };
    only_nodes(e, &allowed) && e.contains(|n| matches!(n, Expr::Identifier(_)))
}

fn is_arithmetic(e: &Expr) -> bool {
    let allowed = |n: &Expr| {
        matches!(
            n,
            Expr::Number(_)
                | Expr::Neg(_)
                | Expr::Binary {
                    op: BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div,
                    ..
                }
        )
    };
    only_nodes(e, &allowed)
}

/// First matching rule wins: calculus, trigonometric, logexp, polynomial,
/// arithmetic, other.
pub fn classify(e: &Expr) -> Classification {
    let category = if has_call(e, &[Func::Int, Func::Diff]) {
        Category::Calculus
    } else if has_call(e, &[Func::Sin, Func::Cos, Func::Tan]) {
        Category::Trigonometric
    } else if has_call(e, &[Func::Log, Func::Exp]) {
        Category::LogExp
    } else if is_polynomial(e) {
        Category::Polynomial
    } else if is_arithmetic(e) {
        Category::Arithmetic
    } else {
        Category::Other
    };
    Classification {
        category,
        equation: e.contains(|n| matches!(n, Expr::Binary { op: BinOp::Eq, .. })),
    }
}

// ---------------------------------------------------------------------------
// Source inference

const SOURCE_SEGMENTS: [(&str, &[&str]); 7] = [
    ("Lesson", &["lesson", "lessons"]),
    ("Quiz", &["quiz", "quizs", "quizzes"]),
    ("Assignment", &["assignment", "assignments"]),
    ("Wiki", &["wiki", "wikis"]),
    ("Forum", &["forum", "forums"]),
    ("Glossary", &["glossary", "glossarys", "glossaries"]),
    ("Resource", &["resource", "resources"]),
];

/// Maps the first URL path segment naming an activity (case-insensitive,
/// optional plural, optional numeric suffix such as `lesson1`) to its
/// upper concept; `Resource` otherwise.
pub fn source_from_url(url: &str) -> ConceptId {
    let without_fragment = url.split(['#', '?']).next().unwrap_or("");
    for segment in without_fragment.split('/') {
        let lowered = segment.to_ascii_lowercase();
        let stem = lowered.trim_end_matches(|c: char| c.is_ascii_digit());
        for (concept, spellings) in SOURCE_SEGMENTS {
            if spellings.contains(&stem) {
                return ConceptId::upper(concept);
            }
        }
    }
    ConceptId::upper("Resource")
}

// ---------------------------------------------------------------------------
// Tag store

#[derive(Debug, Error)]
pub enum TagError {
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("invalid tag `{0}`: tags are single non-empty tokens")]
    InvalidTag(String),
    #[error("invalid resource uri `{0}`")]
    InvalidResource(String),
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagRecord {
    pub resource_uri: String,
    pub concept: ConceptId,
    pub tag: String,
    pub count: u64,
}

/// A promoted bottom-layer concept and its parent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BottomConcept {
    pub concept: ConceptId,
    pub parent: String,
}

/// Tag counts keyed by (resource, concept name, tag) plus the bottom
/// concepts promoted so far.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TagStore {
    counts: BTreeMap<(String, String, String), u64>,
    bottom: Vec<BottomConcept>,
}

impl TagStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Resolves a concept name (case-insensitive) against both layers.
    pub fn concept(&self, name: &str) -> Option<ConceptId> {
        upper_concepts()
            .into_iter()
            .chain(self.bottom.iter().map(|b| b.concept.clone()))
            .find(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn bottom_concepts(&self) -> &[BottomConcept] {
        &self.bottom
    }

    /// `subClassOf` edges of both layers.
    pub fn subclass_edges(&self) -> Vec<(String, String)> {
        upper_relations()
            .into_iter()
            .filter(|r| r.predicate == Predicate::SubClassOf)
            .map(|r| (r.subject.name, r.object))
            .chain(
                self.bottom
                    .iter()
                    .map(|b| (b.concept.name.clone(), b.parent.clone())),
            )
            .collect()
    }

    pub fn add_tag(
        &mut self,
        resource_uri: &str,
        concept: &str,
        tag: &str,
    ) -> Result<u64, TagError> {
        if resource_uri.is_empty() || resource_uri.contains(['\t', '\n', '\r']) {
            return Err(TagError::InvalidResource(resource_uri.to_string()));
        }
        if tag.is_empty() || tag.chars().any(char::is_whitespace) {
            return Err(TagError::InvalidTag(tag.to_string()));
        }
        let concept = self
            .concept(concept)
            .ok_or_else(|| TagError::UnknownConcept(concept.to_string()))?;
        let count = self
            .counts
            .entry((resource_uri.to_string(), concept.name, tag.to_lowercase()))
            .or_insert(0);
        *count += 1;
        Ok(*count)
    }

    pub fn records(&self) -> Vec<TagRecord> {
        self.counts
            .iter()
            .map(|((uri, concept, tag), count)| TagRecord {
                resource_uri: uri.clone(),
                concept: self
                    .concept(concept)
                    .unwrap_or_else(|| ConceptId::bottom(concept)),
                tag: tag.clone(),
                count: *count,
            })
            .collect()
    }

    /// Tags of one resource by count descending, then tag ascending.
    pub fn tag_cloud(&self, resource_uri: &str) -> Vec<(String, u64)> {
        let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
        for ((uri, _, tag), count) in &self.counts {
            if uri == resource_uri {
                *totals.entry(tag).or_default() += count;
            }
        }
        let mut cloud: Vec<(String, u64)> = totals
            .into_iter()
            .map(|(t, c)| (t.to_string(), c))
            .collect();
        cloud.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        cloud
    }

    /// Turns every tag whose corpus-wide count reaches `threshold` into a
    /// bottom concept under the concept it was most often filed with
    /// (alphabetical on ties). Tags already naming a concept are skipped.
    pub fn promote_tags(&mut self, threshold: u64) -> Vec<ConceptId> {
        let threshold = threshold.max(1);
        let mut per_tag: BTreeMap<&str, BTreeMap<&str, u64>> = BTreeMap::new();
        for ((_, concept, tag), count) in &self.counts {
            *per_tag.entry(tag).or_default().entry(concept).or_default() += count;
        }

        let mut promoted = Vec::new();
        for (tag, parents) in per_tag {
            let total: u64 = parents.values().sum();
            if total < threshold || self.concept(tag).is_some() {
                continue;
            }
            // BTreeMap iterates alphabetically, so the first max wins ties
            let (parent, _) = parents
                .iter()
                .fold(None::<(&str, u64)>, |best, (name, c)| match best {
                    Some((_, bc)) if bc >= *c => best,
                    _ => Some((name, *c)),
                })
                .expect("tag has at least one concept");
            promoted.push(BottomConcept {
                concept: ConceptId::bottom(tag),
                parent: parent.to_string(),
            });
        }
        let created = promoted.iter().map(|b| b.concept.clone()).collect();
        self.bottom.extend(promoted);
        created
    }

    fn concepts_path(path: &Path) -> PathBuf {
        let mut name = path.as_os_str().to_owned();
        name.push(".concepts");
        PathBuf::from(name)
    }

    /// Writes `resource_uri<TAB>concept<TAB>tag<TAB>count` lines to `path`
    /// and promoted concepts as `name<TAB>parent` lines to `<path>.concepts`.
    pub fn save(&self, path: &Path) -> Result<(), TagError> {
        let io_err = |p: &Path| {
            let p = p.to_path_buf();
            move |source| TagError::Io { path: p, source }
        };
        let mut tags = String::new();
        for ((uri, concept, tag), count) in &self.counts {
            tags.push_str(&format!("{uri}\t{concept}\t{tag}\t{count}\n"));
        }
        fs::write(path, tags).map_err(io_err(path))?;

        let concepts_path = Self::concepts_path(path);
        let mut concepts = String::new();
        for b in &self.bottom {
            concepts.push_str(&format!("{}\t{}\n", b.concept.name, b.parent));
        }
        fs::write(&concepts_path, concepts).map_err(io_err(&concepts_path))
    }

    /// Loads a store; a missing file is an empty store.
    pub fn load(path: &Path) -> Result<TagStore, TagError> {
        let mut store = TagStore::new();
        let concepts_path = Self::concepts_path(path);
        for (i, line) in read_lines(&concepts_path)?.iter().enumerate() {
            let fields: Vec<&str> = line.split('\t').collect();
            let [name, parent] = fields.as_slice() else {
                return Err(format_error(
                    &concepts_path,
                    i,
                    "expected `name<TAB>parent`",
                ));
            };
            store.bottom.push(BottomConcept {
                concept: ConceptId::bottom(name),
                parent: parent.to_string(),
            });
        }
        for (i, line) in read_lines(path)?.iter().enumerate() {
            let fields: Vec<&str> = line.split('\t').collect();
            let [uri, concept, tag, count] = fields.as_slice() else {
                return Err(format_error(
                    path,
                    i,
                    "expected `resource_uri<TAB>concept<TAB>tag<TAB>count`",
                ));
            };
            let count: u64 = count
                .parse()
                .ok()
                .filter(|c| *c > 0)
                .ok_or_else(|| format_error(path, i, "count must be a positive integer"))?;
            let concept = store
                .concept(concept)
                .ok_or_else(|| format_error(path, i, &format!("unknown concept `{concept}`")))?;
            store
                .counts
                .insert((uri.to_string(), concept.name, tag.to_lowercase()), count);
        }
        Ok(store)
    }
}

fn format_error(path: &Path, index: usize, message: &str) -> TagError {
    TagError::Format {
        path: path.to_path_buf(),
        line: index + 1,
        message: message.to_string(),
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>, TagError> {
    match fs::read_to_string(path) {
        Ok(text) => Ok(text
            .lines()
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect()),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(source) => Err(TagError::Io {
            path: path.to_path_buf(),
            source,
        }),
    }
}
