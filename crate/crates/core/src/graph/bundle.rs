//! Bundle directory format: `edges.tsv`, `features.tsv` and the optional
//! `labels.tsv`, `split.tsv` and `meta.tsv`.

use super::{Graph, GraphError, Split};
use ndarray::Array2;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

const EDGES: &str = "edges.tsv";
const FEATURES: &str = "features.tsv";
const LABELS: &str = "labels.tsv";
const SPLIT: &str = "split.tsv";
const META: &str = "meta.tsv";

fn read_required(dir: &Path, name: &str) -> Result<String, GraphError> {
    let path = dir.join(name);
    if !path.exists() {
        return Err(GraphError::MissingFile(path));
    }
    fs::read_to_string(&path).map_err(|source| GraphError::Io { path, source })
}

fn read_optional(dir: &Path, name: &str) -> Result<Option<String>, GraphError> {
    let path = dir.join(name);
    if !path.exists() {
        return Ok(None);
    }
    fs::read_to_string(&path)
        .map(Some)
        .map_err(|source| GraphError::Io { path, source })
}

fn parse_err(file: &str, line: usize, msg: impl Into<String>) -> GraphError {
    GraphError::Parse {
        file: file.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Non-empty lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn parse_id(file: &str, line: usize, tok: &str) -> Result<usize, GraphError> {
    tok.trim()
        .parse::<usize>()
        .map_err(|_| parse_err(file, line, format!("expected a non-negative integer id, got {tok:?}")))
}

fn parse_directed(meta: Option<String>) -> Result<bool, GraphError> {
    let Some(meta) = meta else {
        return Ok(false);
    };
    let mut directed = false;
    for (ln, line) in lines(&meta) {
        let mut parts = line.split(['\t', ' ']).filter(|p| !p.is_empty());
        let key = parts.next().unwrap_or_default();
        let value = parts.next();
        if key == "directed" {
            directed = match value {
                Some("true") => true,
                Some("false") => false,
                other => {
                    return Err(parse_err(
                        META,
                        ln,
                        format!("directed must be true or false, got {other:?}"),
                    ))
                }
            };
        }
    }
    Ok(directed)
}

pub fn load_graph_bundle(dir: impl AsRef<Path>) -> Result<Graph, GraphError> {
    let dir = dir.as_ref();
    let edges_text = read_required(dir, EDGES)?;
    let features_text = read_required(dir, FEATURES)?;
    let directed = parse_directed(read_optional(dir, META)?)?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in lines(&features_text) {
        let row = line
            .split('\t')
            .enumerate()
            .map(|(col, tok)| {
                let x: f64 = tok
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(FEATURES, ln, format!("column {col}: not a number: {tok:?}")))?;
                if !x.is_finite() {
                    return Err(GraphError::NonFiniteFeature { row: rows.len(), col });
                }
                Ok(x)
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(GraphError::RaggedFeatures {
                    row: rows.len(),
                    got: row.len(),
                    expected: first.len(),
                });
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(GraphError::Empty);
    }
    let f = rows[0].len();
    let features = Array2::from_shape_vec((n, f), rows.into_iter().flatten().collect())
        .expect("row lengths were checked");

    let mut edges = Vec::new();
    for (ln, line) in lines(&edges_text) {
        let mut parts = line.split('\t');
        let (Some(u), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(EDGES, ln, "expected \"u<TAB>v\""));
        };
        edges.push((parse_id(EDGES, ln, u)?, parse_id(EDGES, ln, v)?));
    }

    let mut graph = Graph::from_edges(features, &edges, directed)?;

    if let Some(text) = read_optional(dir, LABELS)? {
        let labels = lines(&text)
            .map(|(ln, l)| parse_id(LABELS, ln, l))
            .collect::<Result<Vec<_>, _>>()?;
        graph = graph.with_labels(labels)?;
    }
    if let Some(text) = read_optional(dir, SPLIT)? {
        let split = lines(&text)
            .map(|(ln, l)| l.trim().parse::<Split>().map_err(|m| parse_err(SPLIT, ln, m)))
            .collect::<Result<Vec<_>, _>>()?;
        graph = graph.with_split(split)?;
    }
    Ok(graph)
}

/// Writes `g` in canonical form: edges sorted by `(u, v)`, reals in their
/// shortest round-trip decimal representation.
pub fn save_graph_bundle(g: &Graph, dir: impl AsRef<Path>) -> Result<(), GraphError> {
    let dir = dir.as_ref();
    let write = |name: &str, body: String| {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|source| GraphError::Io { path, source })
    };
    fs::create_dir_all(dir).map_err(|source| GraphError::Io {
        path: dir.to_path_buf(),
        source,
    })?;

    let mut edges = String::new();
    for (u, v) in g.canonical_edges() {
        writeln!(edges, "{u}\t{v}").unwrap();
    }
    write(EDGES, edges)?;

    let mut features = String::new();
    for row in g.features().rows() {
        let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        features.push_str(&line.join("\t"));
        features.push('\n');
    }
    write(FEATURES, features)?;

    write(META, format!("directed\t{}\n", g.is_directed()))?;

    if let Some(labels) = g.labels() {
        write(LABELS, labels.iter().map(|l| format!("{l}\n")).collect())?;
    }
    if let Some(split) = g.split() {
        write(SPLIT, split.iter().map(|s| format!("{s}\n")).collect())?;
    }
    Ok(())
}
