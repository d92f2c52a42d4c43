//! Command-line front end. Exit codes: 0 success, 1 user error (bad
//! arguments, query or concept), 2 I/O or file-format error.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use walkdir::WalkDir;

use crate::annotate::{self, annotate_document, extract_annotations, to_triples, tsv_field};
use crate::index::InvertedIndex;
use crate::ontology::{TagError, TagStore};
use crate::search::sparql::{parse_sparql, sparql_select};
use crate::search::{parse_query, search, QueryFlags, RankedHit};

#[derive(Debug, Parser)]
#[command(
    name = "mathsem",
    about = "Math-aware semantic search over annotated XHTML"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Annotate the math elements of an XHTML page with RDFa metadata
    Annotate {
        file: PathBuf,
        /// URL the page is served at; drives anchors and source inference
        #[arg(long)]
        url: String,
        /// Description for equation N, as N=TEXT (repeatable)
        #[arg(long = "desc", value_name = "N=TEXT")]
        desc: Vec<String>,
        /// Sidecar file with one N=TEXT line per description
        #[arg(long, value_name = "FILE")]
        desc_file: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build an index from every annotated page under a directory
    Index {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank indexed equations against a keyword or `Math:` query
    Search {
        #[arg(long)]
        index: PathBuf,
        query: String,
        /// Restrict to one source activity (e.g. Lesson)
        #[arg(long)]
        source: Option<String>,
        /// Restrict to one category (e.g. polynomial)
        #[arg(long)]
        category: Option<String>,
        /// Require every identifier of the query to be present
        #[arg(long)]
        exact: bool,
        /// Match on operator structure only, ignoring names
        #[arg(long)]
        structural: bool,
        /// Ignore operator evaluation order
        #[arg(long)]
        no_order: bool,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Print the RDFa triples of an annotated page
    Extract {
        file: PathBuf,
        #[arg(long, value_name = "FILE")]
        triples_out: Option<PathBuf>,
    },
    /// Evaluate a SELECT ... WHERE { ... } query over a triples file
    Sparql {
        #[arg(long)]
        triples: PathBuf,
        query: String,
    },
    /// Manage resource tags and promote frequent tags to concepts
    Tag {
        #[command(subcommand)]
        action: TagAction,
    },
}

#[derive(Debug, Subcommand)]
enum TagAction {
    /// Tag a resource under a concept; prints the updated count
    Add {
        #[arg(long)]
        store: PathBuf,
        resource: String,
        concept: String,
        tag: String,
    },
    /// Print a resource's tags by frequency
    Cloud {
        #[arg(long)]
        store: PathBuf,
        resource: String,
    },
    /// Promote tags used at least THRESHOLD times; prints new concepts
    Promote {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        threshold: u64,
    },
}

/// Error carrying the exit code it maps to.
#[derive(Debug)]
enum Failure {
    User(String),
    Io(String),
}

type CmdResult = Result<(), Failure>;

fn user(msg: impl std::fmt::Display) -> Failure {
    Failure::User(msg.to_string())
}

fn io(msg: impl std::fmt::Display) -> Failure {
    Failure::Io(msg.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| io(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, text: &str) -> CmdResult {
    out.write_all(text.as_bytes())
        .map_err(|e| io(format!("stdout: {e}")))
}

/// Runs one invocation; `argv[0]` is the program name.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(rendered.as_bytes())
            } else {
                err.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(Failure::User(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
        Err(Failure::Io(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    match command {
        Command::Annotate {
            file,
            url,
            desc,
            desc_file,
            out: out_path,
        } => cmd_annotate(
            &file,
            &url,
            &desc,
            desc_file.as_deref(),
            out_path.as_deref(),
            out,
            err,
        ),
        Command::Index { dir, out: out_path } => cmd_index(&dir, &out_path, err),
        Command::Search {
            index,
            query,
            source,
            category,
            exact,
            structural,
            no_order,
            top,
        } => {
            let flags = QueryFlags {
                exact,
                structural,
                no_order,
                source,
                category,
                top_k: top,
            };
            cmd_search(&index, &query, &flags, out)
        }
        Command::Extract { file, triples_out } => cmd_extract(&file, triples_out.as_deref(), out),
        Command::Sparql { triples, query } => cmd_sparql(&triples, &query, out),
        Command::Tag { action } => cmd_tag(action, out),
    }
}

fn parse_desc(entry: &str, origin: &str) -> Result<(usize, String), Failure> {
    let (n, text) = entry
        .split_once('=')
        .ok_or_else(|| user(format!("{origin}: expected N=TEXT, got `{entry}`")))?;
    let n: usize = n.trim().parse().ok().filter(|n| *n >= 1).ok_or_else(|| {
        user(format!(
            "{origin}: equation ordinal must be >= 1 in `{entry}`"
        ))
    })?;
    Ok((n, text.to_string()))
}

fn cmd_annotate(
    file: &Path,
    url: &str,
    desc: &[String],
    desc_file: Option<&Path>,
    out_path: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    let mut descriptions = BTreeMap::new();
    if let Some(path) = desc_file {
        for line in read(path)?.lines().filter(|l| !l.trim().is_empty()) {
            let (n, text) = parse_desc(line, &path.display().to_string())?;
            descriptions.insert(n, text);
        }
    }
    for entry in desc {
        let (n, text) = parse_desc(entry, "--desc")?;
        descriptions.insert(n, text);
    }
    let xhtml = read(file)?;
    let annotated = annotate_document(&xhtml, url, &descriptions)
        .map_err(|e| io(format!("{}: {e}", file.display())))?;
    for w in &annotated.warnings {
        let _ = writeln!(err, "warning: {}: {w}", file.display());
    }
    match out_path {
        Some(path) => write_file(path, &annotated.xhtml),
        None => emit(out, &annotated.xhtml),
    }
}

fn is_page(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("html" | "xhtml" | "htm")
    )
}

/// Annotations of every page under `dir`, by sorted path then document order.
pub fn collect_annotations(dir: &Path) -> Result<Vec<annotate::Annotation>, String> {
    let mut pages: Vec<PathBuf> = Vec::new();
    for entry in WalkDir::new(dir) {
        let entry = entry.map_err(|e| format!("{}: {e}", dir.display()))?;
        if entry.file_type().is_file() && is_page(entry.path()) {
            pages.push(entry.into_path());
        }
    }
    pages.sort();
    let mut annotations = Vec::new();
    for page in pages {
        let text = fs::read_to_string(&page).map_err(|e| format!("{}: {e}", page.display()))?;
        let found = extract_annotations(&text).map_err(|e| format!("{}: {e}", page.display()))?;
        annotations.extend(found);
    }
    Ok(annotations)
}

fn cmd_index(dir: &Path, out_path: &Path, err: &mut dyn Write) -> CmdResult {
    if !dir.is_dir() {
        return Err(io(format!("{}: not a directory", dir.display())));
    }
    let annotations = collect_annotations(dir).map_err(io)?;
    let (idx, skipped) = InvertedIndex::build(&annotations);
    for s in &skipped {
        let _ = writeln!(err, "warning: {}: skipped: {}", s.doc_uri, s.error);
    }
    idx.save(out_path).map_err(io)
}

/// `score<TAB>anchor_link<TAB>source<TAB>category<TAB>description` lines.
pub fn render_hits(hits: &[RankedHit]) -> String {
    hits.iter()
        .map(|h| {
            format!(
                "{:.6}\t{}\t{}\t{}\t{}\n",
                h.score,
                tsv_field(&h.anchor_link),
                tsv_field(&h.source),
                tsv_field(&h.category),
                tsv_field(&h.description)
            )
        })
        .collect()
}

fn cmd_search(index: &Path, query: &str, flags: &QueryFlags, out: &mut dyn Write) -> CmdResult {
    let q = parse_query(query, flags).map_err(|e| user(format!("query `{query}`: {e}")))?;
    let idx = InvertedIndex::load(index).map_err(io)?;
    emit(out, &render_hits(&search(&idx, &q)))
}

fn cmd_extract(file: &Path, triples_out: Option<&Path>, out: &mut dyn Write) -> CmdResult {
    let text = read(file)?;
    let annotations =
        extract_annotations(&text).map_err(|e| io(format!("{}: {e}", file.display())))?;
    let rendered = annotate::write_triples(&to_triples(&annotations));
    match triples_out {
        Some(path) => write_file(path, &rendered),
        None => emit(out, &rendered),
    }
}

fn cmd_sparql(triples_path: &Path, query: &str, out: &mut dyn Write) -> CmdResult {
    let q = parse_sparql(query).map_err(|e| user(format!("query: {e}")))?;
    let triples = annotate::read_triples(&read(triples_path)?)
        .map_err(|e| io(format!("{}: {e}", triples_path.display())))?;
    let rows = sparql_select(&triples, &q).map_err(|e| user(format!("query: {e}")))?;
    let mut text = q
        .projected()
        .iter()
        .map(|v| format!("?{v}"))
        .collect::<Vec<_>>()
        .join("\t");
    text.push('\n');
    for row in rows {
        let values: Vec<String> = row.0.iter().map(|(_, v)| tsv_field(v)).collect();
        text.push_str(&values.join("\t"));
        text.push('\n');
    }
    emit(out, &text)
}

fn tag_failure(e: TagError) -> Failure {
    match e {
        TagError::Io { .. } | TagError::Format { .. } => io(e),
        _ => user(e),
    }
}

fn cmd_tag(action: TagAction, out: &mut dyn Write) -> CmdResult {
    match action {
        TagAction::Add {
            store,
            resource,
            concept,
            tag,
        } => {
            let mut s = TagStore::load(&store).map_err(tag_failure)?;
            let count = s.add_tag(&resource, &concept, &tag).map_err(tag_failure)?;
            s.save(&store).map_err(tag_failure)?;
            emit(out, &format!("{count}\n"))
        }
        TagAction::Cloud { store, resource } => {
            let s = TagStore::load(&store).map_err(tag_failure)?;
            let text: String = s
                .tag_cloud(&resource)
                .into_iter()
                .map(|(tag, count)| format!("{tag}\t{count}\n"))
                .collect();
            emit(out, &text)
        }
        TagAction::Promote { store, threshold } => {
            let mut s = TagStore::load(&store).map_err(tag_failure)?;
            let created = s.promote_tags(threshold);
            s.save(&store).map_err(tag_failure)?;
            let text: String = s
                .bottom_concepts()
                .iter()
                .filter(|b| created.contains(&b.concept))
                .map(|b| format!("{}\t{}\n", b.concept.name, b.parent))
                .collect();
            emit(out, &text)
        }
    }
}
