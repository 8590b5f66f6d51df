//! Plain-text graph directories: `edges.tsv`, `features.csv`, optional `labels.csv`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::Graph;
use crate::error::{Error, Result};

pub const EDGES_FILE: &str = "edges.tsv";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";

/// What the loader silently repaired.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub self_loops_dropped: usize,
    pub edge_lines: usize,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_edges(path: &Path, text: &str) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let mut next = || -> Result<usize> {
            let tok = parts
                .next()
                .ok_or_else(|| parse_err(path, lineno + 1, "expected two node indices"))?;
            tok.parse::<usize>()
                .map_err(|_| parse_err(path, lineno + 1, format!("'{tok}' is not a node index")))
        };
        let a = next()?;
        let b = next()?;
        if parts.next().is_some() {
            return Err(parse_err(path, lineno + 1, "more than two fields"));
        }
        edges.push((a, b));
    }
    Ok(edges)
}

fn parse_features(path: &Path, text: &str) -> Result<Array2<f64>> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                tok.parse::<f64>()
                    .map_err(|_| parse_err(path, lineno + 1, format!("'{tok}' is not a number")))
            })
            .collect::<Result<_>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(parse_err(
                    path,
                    lineno + 1,
                    format!("expected {c} columns, found {}", row.len()),
                ))
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Validation(format!("{} has no rows", path.display())))?;
    Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::Shape(e.to_string()))
}

fn parse_labels(path: &Path, text: &str) -> Result<Vec<u8>> {
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match line {
            "0" => labels.push(0),
            "1" => labels.push(1),
            other => {
                return Err(parse_err(
                    path,
                    lineno + 1,
                    format!("label '{other}' is not 0 or 1"),
                ))
            }
        }
    }
    Ok(labels)
}

/// Reads a labels file (one `0` or `1` per line).
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    parse_labels(path, &read(path)?)
}

/// Loads and validates a graph directory. The graph is named after the directory.
pub fn load_graph(dir: impl AsRef<Path>) -> Result<(Graph, LoadReport)> {
    let dir = dir.as_ref();
    let edges_path = dir.join(EDGES_FILE);
    let features_path = dir.join(FEATURES_FILE);
    let labels_path = dir.join(LABELS_FILE);

    let edges = parse_edges(&edges_path, &read(&edges_path)?)?;
    let features = parse_features(&features_path, &read(&features_path)?)?;
    let labels = if labels_path.exists() {
        let labels = parse_labels(&labels_path, &read(&labels_path)?)?;
        if labels.len() != features.nrows() {
            return Err(Error::Validation(format!(
                "{} has {} rows but {} has {}",
                labels_path.display(),
                labels.len(),
                features_path.display(),
                features.nrows()
            )));
        }
        Some(labels)
    } else {
        None
    };

    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "graph".to_string());
    let (graph, self_loops) = Graph::from_edges(name, features, &edges, labels).map_err(|e| match e {
        Error::Validation(msg) => Error::Validation(format!("{}: {msg}", edges_path.display())),
        other => other,
    })?;
    if self_loops > 0 {
        log::warn!("{}: dropped {self_loops} self-loop line(s)", edges_path.display());
    }
    Ok((
        graph,
        LoadReport {
            self_loops_dropped: self_loops,
            edge_lines: edges.len(),
        },
    ))
}

/// Writes `g` in the directory format, creating `dir` if needed.
pub fn save_graph(g: &Graph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut edges = String::new();
    for (i, j) in g.edges() {
        let _ = writeln!(edges, "{i}\t{j}");
    }
    write_file(dir.join(EDGES_FILE), &edges)?;

    let mut features = String::new();
    for row in g.features().rows() {
        let mut first = true;
        for v in row {
            if !first {
                features.push(',');
            }
            first = false;
            let _ = write!(features, "{v}");
        }
        features.push('\n');
    }
    write_file(dir.join(FEATURES_FILE), &features)?;

    if let Some(labels) = g.labels() {
        let mut text = String::with_capacity(labels.len() * 2);
        for l in labels {
            let _ = writeln!(text, "{l}");
        }
        write_file(dir.join(LABELS_FILE), &text)?;
    }
    Ok(())
}

fn write_file(path: PathBuf, contents: &str) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(path, e))
}
