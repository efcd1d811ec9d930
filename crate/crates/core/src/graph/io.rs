//! Text dataset directories.
//!
//! ```text
//! meta          key=value lines: n_nodes, n_features, n_classes, directed
//! edges.tsv     u <TAB> v [<TAB> w]        (w defaults to 1.0)
//! features.tsv  row <TAB> col <TAB> value  (sparse triplets)
//!   or
//! features.csv  one comma-separated dense row per node
//! labels.tsv    node <TAB> class           (optional)
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Any run of
//! whitespace separates fields in the `.tsv` files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;

use super::{Dataset, FeatureMatrix, Graph, LabelVector, SYMMETRIZATION_RULE};
use crate::linalg::CsrMatrix;
use crate::{Error, Result};

fn read(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn field<T: FromStr>(path: &Path, line: usize, raw: &str, what: &str) -> Result<T> {
    raw.parse::<T>()
        .map_err(|_| Error::parse(path, line, format!("cannot parse {what} from {raw:?}")))
}

fn finite(path: &Path, line: usize, raw: &str) -> Result<f64> {
    let v: f64 = field(path, line, raw, "value")?;
    if !v.is_finite() {
        return Err(Error::parse(path, line, format!("non-finite value {raw:?}")));
    }
    Ok(v)
}

struct Meta {
    n_nodes: usize,
    n_features: usize,
    n_classes: Option<usize>,
    directed: bool,
    name: Option<String>,
}

fn parse_meta(path: &Path) -> Result<Meta> {
    let text = read(path)?;
    let mut kv = BTreeMap::new();
    let mut lines = BTreeMap::new();
    for (ln, l) in data_lines(&text) {
        let (k, v) = l
            .split_once('=')
            .ok_or_else(|| Error::parse(path, ln, "expected key=value"))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
        lines.insert(k.trim().to_string(), ln);
    }
    let get = |k: &str| -> Result<(&String, usize)> {
        kv.get(k)
            .map(|v| (v, lines[k]))
            .ok_or_else(|| Error::parse(path, 0, format!("missing key {k}")))
    };
    let (v, ln) = get("n_nodes")?;
    let n_nodes = field(path, ln, v, "n_nodes")?;
    let (v, ln) = get("n_features")?;
    let n_features = field(path, ln, v, "n_features")?;
    let n_classes = match kv.get("n_classes") {
        Some(v) => Some(field(path, lines["n_classes"], v, "n_classes")?),
        None => None,
    };
    let directed = match kv.get("directed").map(|s| s.to_ascii_lowercase()) {
        None => false,
        Some(s) if s == "true" || s == "1" => true,
        Some(s) if s == "false" || s == "0" => false,
        Some(s) => {
            return Err(Error::parse(
                path,
                lines["directed"],
                format!("directed must be true or false, got {s:?}"),
            ))
        }
    };
    Ok(Meta {
        n_nodes,
        n_features,
        n_classes,
        directed,
        name: kv.get("name").cloned(),
    })
}

fn parse_edges(path: &Path, n: usize) -> Result<Vec<(usize, usize, f64)>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (ln, l) in data_lines(&text) {
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != 2 && parts.len() != 3 {
            return Err(Error::parse(path, ln, "expected `u v [w]`"));
        }
        let u: usize = field(path, ln, parts[0], "node id")?;
        let v: usize = field(path, ln, parts[1], "node id")?;
        if u >= n || v >= n {
            return Err(Error::parse(path, ln, format!("node id out of range for n_nodes={n}")));
        }
        let w = match parts.get(2) {
            Some(raw) => finite(path, ln, raw)?,
            None => 1.0,
        };
        out.push((u, v, w));
    }
    Ok(out)
}

fn parse_sparse_features(path: &Path, n: usize, f: usize) -> Result<CsrMatrix> {
    let text = read(path)?;
    let mut trip = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (ln, l) in data_lines(&text) {
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::parse(path, ln, "expected `row col value`"));
        }
        let r: usize = field(path, ln, parts[0], "row")?;
        let c: usize = field(path, ln, parts[1], "column")?;
        if r >= n || c >= f {
            return Err(Error::parse(path, ln, format!("entry ({r}, {c}) outside {n}x{f}")));
        }
        if !seen.insert((r, c)) {
            return Err(Error::parse(path, ln, format!("duplicate entry ({r}, {c})")));
        }
        trip.push((r, c, finite(path, ln, parts[2])?));
    }
    Ok(CsrMatrix::from_triplets(n, f, &trip))
}

fn parse_dense_features(path: &Path, n: usize, f: usize) -> Result<DMatrix<f64>> {
    let text = read(path)?;
    let mut m = DMatrix::zeros(n, f);
    let mut row = 0usize;
    for (ln, l) in data_lines(&text) {
        if row >= n {
            return Err(Error::parse(path, ln, format!("more than n_nodes={n} rows")));
        }
        let vals: Vec<&str> = l.split(',').map(str::trim).collect();
        if vals.len() != f {
            return Err(Error::parse(
                path,
                ln,
                format!("expected {f} columns, found {}", vals.len()),
            ));
        }
        for (j, raw) in vals.iter().enumerate() {
            m[(row, j)] = finite(path, ln, raw)?;
        }
        row += 1;
    }
    if row != n {
        return Err(Error::Dimension(format!(
            "{}: {row} rows but n_nodes={n}",
            path.display()
        )));
    }
    Ok(m)
}

fn parse_labels(path: &Path, n: usize, k: usize) -> Result<LabelVector> {
    let text = read(path)?;
    let mut labels: Vec<Option<usize>> = vec![None; n];
    for (ln, l) in data_lines(&text) {
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(Error::parse(path, ln, "expected `node class`"));
        }
        let i: usize = field(path, ln, parts[0], "node id")?;
        let c: usize = field(path, ln, parts[1], "class")?;
        if i >= n {
            return Err(Error::parse(path, ln, format!("node {i} out of range")));
        }
        if c >= k {
            return Err(Error::parse(path, ln, format!("class {c} >= n_classes={k}")));
        }
        labels[i] = Some(c);
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| Error::Dimension(format!("{}: node {i} has no label", path.display()))))
        .collect::<Result<Vec<_>>>()?;
    LabelVector::new(labels, k)
}

/// Load a dataset directory.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let meta = parse_meta(&dir.join("meta"))?;
    let edges = parse_edges(&dir.join("edges.tsv"), meta.n_nodes)?;
    let graph = Graph::new(meta.n_nodes, edges, meta.directed)?;

    let tsv = dir.join("features.tsv");
    let csv = dir.join("features.csv");
    let features = if tsv.exists() {
        FeatureMatrix::Sparse(parse_sparse_features(&tsv, meta.n_nodes, meta.n_features)?)
    } else if csv.exists() {
        FeatureMatrix::Dense(parse_dense_features(&csv, meta.n_nodes, meta.n_features)?)
    } else {
        return Err(Error::MissingFile(tsv));
    };

    let labels_path = dir.join("labels.tsv");
    let labels = if labels_path.exists() {
        let k = meta
            .n_classes
            .ok_or_else(|| Error::parse(dir.join("meta"), 0, "labels.tsv present but n_classes missing"))?;
        Some(parse_labels(&labels_path, meta.n_nodes, k)?)
    } else {
        None
    };

    let name = meta.name.unwrap_or_else(|| {
        dir.file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    Dataset::new(name, graph, features, labels)
}

/// 17 significant digits, enough for an exact f64 round trip.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write(path: PathBuf, text: String) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

/// Write a dataset directory, creating it if needed.
pub fn save_dataset(d: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut meta = String::new();
    writeln!(meta, "name={}", d.name).unwrap();
    writeln!(meta, "n_nodes={}", d.graph.n_nodes()).unwrap();
    writeln!(meta, "n_features={}", d.features.ncols()).unwrap();
    if let Some(l) = &d.labels {
        writeln!(meta, "n_classes={}", l.n_classes()).unwrap();
    }
    writeln!(meta, "directed={}", d.graph.is_directed()).unwrap();
    writeln!(meta, "symmetrization={SYMMETRIZATION_RULE}").unwrap();
    write(dir.join("meta"), meta)?;

    let mut edges = String::new();
    for e in d.graph.edges() {
        writeln!(edges, "{}\t{}\t{}", e.u, e.v, fmt_f64(e.weight)).unwrap();
    }
    write(dir.join("edges.tsv"), edges)?;

    // Only one feature file may exist, or load would pick the wrong one.
    let (keep, drop) = match &d.features {
        FeatureMatrix::Sparse(_) => ("features.tsv", "features.csv"),
        FeatureMatrix::Dense(_) => ("features.csv", "features.tsv"),
    };
    let stale = dir.join(drop);
    if stale.exists() {
        fs::remove_file(&stale).map_err(|e| Error::io(stale, e))?;
    }
    let mut feats = String::new();
    match &d.features {
        FeatureMatrix::Sparse(m) => {
            for (i, j, v) in m.triplets() {
                writeln!(feats, "{i}\t{j}\t{}", fmt_f64(v)).unwrap();
            }
        }
        FeatureMatrix::Dense(m) => {
            for i in 0..m.nrows() {
                let row: Vec<String> = m.row(i).iter().map(|&v| fmt_f64(v)).collect();
                writeln!(feats, "{}", row.join(",")).unwrap();
            }
        }
    }
    write(dir.join(keep), feats)?;

    let labels_path = dir.join("labels.tsv");
    if let Some(l) = &d.labels {
        let mut text = String::new();
        for (i, c) in l.labels().iter().enumerate() {
            writeln!(text, "{i}\t{c}").unwrap();
        }
        write(labels_path, text)?;
    } else if labels_path.exists() {
        fs::remove_file(&labels_path).map_err(|e| Error::io(labels_path, e))?;
    }
    Ok(())
}
