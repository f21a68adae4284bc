//! Text and binary file formats for graphs, ground truth, dense matrices,
//! labellings and weight vectors.
//!
//! * Graph: header `SBM n=<n> k=<k>`, then one `u v` edge per line (0-indexed).
//! * Ground truth: one community id per line, then `#corrupted` followed by
//!   corrupted node ids, one per line.
//! * Dense matrix: a text header line `{n:<n>, lambda:<λ>}` and `n·n`
//!   little-endian f64 values in row-major order.
//! * Labelling: optional header `k=<k>`, then one community id per line.
//! * Vector: one float per line.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::instance::GroundTruth;
use crate::rounding::Labelling;

fn parse_err(source: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source.to_string(),
        line,
        msg: msg.into(),
    }
}

fn source_name(path: &Path) -> String {
    path.display().to_string()
}

/// Content lines with their 1-based line numbers; blank lines are skipped.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_kv(token: &str, key: &str, source: &str, line: usize) -> Result<usize> {
    token
        .strip_prefix(key)
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| parse_err(source, line, format!("expected `{key}=<value>`, got `{token}`")))?
        .parse()
        .map_err(|e| parse_err(source, line, format!("bad value for {key}: {e}")))
}

pub fn write_graph(g: &Graph, k: usize, w: &mut impl Write) -> Result<()> {
    writeln!(w, "SBM n={} k={}", g.n(), k)?;
    for (u, v) in g.edges() {
        writeln!(w, "{u} {v}")?;
    }
    Ok(())
}

/// Parses a graph file, returning the graph and the declared k.
pub fn parse_graph(text: &str, source: &str) -> Result<(Graph, usize)> {
    let mut lines = content_lines(text);
    let (hl, header) = lines
        .next()
        .ok_or_else(|| parse_err(source, 1, "empty graph file"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 3 || toks[0] != "SBM" {
        return Err(parse_err(source, hl, "expected header `SBM n=<n> k=<k>`"));
    }
    let n = parse_kv(toks[1], "n", source, hl)?;
    let k = parse_kv(toks[2], "k", source, hl)?;
    let mut g = Graph::empty(n);
    for (ln, line) in lines {
        let mut it = line.split_whitespace();
        let mut node = |what: &str| -> Result<usize> {
            let t = it
                .next()
                .ok_or_else(|| parse_err(source, ln, format!("missing {what} endpoint")))?;
            let v: usize = t
                .parse()
                .map_err(|_| parse_err(source, ln, format!("bad node id `{t}`")))?;
            if v >= n {
                return Err(parse_err(source, ln, format!("node {v} out of range for n={n}")));
            }
            Ok(v)
        };
        let u = node("first")?;
        let v = node("second")?;
        if it.next().is_some() {
            return Err(parse_err(source, ln, "trailing tokens after edge"));
        }
        if u == v {
            return Err(parse_err(source, ln, "self-loop"));
        }
        g.set_edge(u, v, true);
    }
    Ok((g, k))
}

pub fn write_truth(t: &GroundTruth, w: &mut impl Write) -> Result<()> {
    for c in &t.partition {
        writeln!(w, "{c}")?;
    }
    writeln!(w, "#corrupted")?;
    for c in &t.corrupted_set {
        writeln!(w, "{c}")?;
    }
    Ok(())
}

/// Parses a ground-truth sidecar; `k` is inferred as max id + 1 unless given.
pub fn parse_truth(text: &str, source: &str, k: Option<usize>) -> Result<GroundTruth> {
    let mut partition = Vec::new();
    let mut corrupted = Vec::new();
    let mut in_corrupted = false;
    for (ln, line) in content_lines(text) {
        if line == "#corrupted" {
            in_corrupted = true;
            continue;
        }
        let v: usize = line
            .parse()
            .map_err(|_| parse_err(source, ln, format!("expected a node or community id, got `{line}`")))?;
        if in_corrupted {
            corrupted.push((ln, v));
        } else {
            partition.push(v);
        }
    }
    let n = partition.len();
    let k = k.unwrap_or_else(|| partition.iter().max().map_or(1, |m| m + 1).max(2));
    let mut set = Vec::with_capacity(corrupted.len());
    for (ln, v) in corrupted {
        if v >= n {
            return Err(parse_err(source, ln, format!("corrupted node {v} out of range")));
        }
        set.push(v);
    }
    if let Some(pos) = partition.iter().position(|&c| c >= k) {
        return Err(Error::LabelRange {
            node: pos,
            label: partition[pos],
            k,
        });
    }
    let mut t = GroundTruth::from_partition(partition, k);
    t.corrupted_set = set;
    Ok(t)
}

pub fn write_matrix(m: &DMatrix<f64>, lambda: f64, w: &mut impl Write) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    writeln!(w, "{{n:{}, lambda:{}}}", m.nrows(), lambda)?;
    let mut buf = Vec::with_capacity(m.len() * 8);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            buf.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Parses the dense matrix format, returning the matrix and its lambda field.
pub fn parse_matrix(bytes: &[u8], source: &str) -> Result<(DMatrix<f64>, f64)> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| parse_err(source, 1, "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| parse_err(source, 1, "header is not UTF-8"))?
        .trim();
    let inner = header
        .strip_prefix('{')
        .and_then(|h| h.strip_suffix('}'))
        .ok_or_else(|| parse_err(source, 1, "expected header `{n:<n>, lambda:<λ>}`"))?;
    let mut n = None;
    let mut lambda = None;
    for field in inner.split(',') {
        let (key, val) = field
            .split_once(':')
            .ok_or_else(|| parse_err(source, 1, format!("bad header field `{field}`")))?;
        match key.trim() {
            "n" => {
                n = Some(val.trim().parse::<usize>().map_err(|e| parse_err(source, 1, format!("bad n: {e}")))?)
            }
            "lambda" => {
                lambda = Some(val.trim().parse::<f64>().map_err(|e| parse_err(source, 1, format!("bad lambda: {e}")))?)
            }
            other => return Err(parse_err(source, 1, format!("unknown header field `{other}`"))),
        }
    }
    let n = n.ok_or_else(|| parse_err(source, 1, "header lacks n"))?;
    let lambda = lambda.ok_or_else(|| parse_err(source, 1, "header lacks lambda"))?;
    let body = &bytes[nl + 1..];
    let want = n * n * 8;
    if body.len() != want {
        return Err(Error::ParseBinary {
            source_name: source.to_string(),
            offset: nl + 1 + body.len().min(want),
            msg: format!("expected {want} payload bytes, found {}", body.len()),
        });
    }
    let mut m = DMatrix::zeros(n, n);
    for (idx, chunk) in body.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("chunk of 8"));
        if !v.is_finite() {
            return Err(Error::ParseBinary {
                source_name: source.to_string(),
                offset: nl + 1 + idx * 8,
                msg: "non-finite entry".into(),
            });
        }
        m[(idx / n, idx % n)] = v;
    }
    Ok((m, lambda))
}

pub fn write_labelling(l: &Labelling, w: &mut impl Write) -> Result<()> {
    writeln!(w, "k={}", l.k)?;
    for c in &l.assignment {
        writeln!(w, "{c}")?;
    }
    Ok(())
}

pub fn parse_labelling(text: &str, source: &str) -> Result<Labelling> {
    let mut k = None;
    let mut ids = Vec::new();
    for (ln, line) in content_lines(text) {
        if ids.is_empty() && k.is_none() && line.starts_with("k=") {
            k = Some(parse_kv(line, "k", source, ln)?);
            continue;
        }
        let v: usize = line
            .parse()
            .map_err(|_| parse_err(source, ln, format!("expected a community id, got `{line}`")))?;
        ids.push(v);
    }
    let k = k.unwrap_or_else(|| ids.iter().max().map_or(1, |m| m + 1).max(2));
    Labelling::new(ids, k)
}

pub fn write_vector(v: &[f64], w: &mut impl Write) -> Result<()> {
    for x in v {
        writeln!(w, "{x}")?;
    }
    Ok(())
}

pub fn parse_vector(text: &str, source: &str) -> Result<Vec<f64>> {
    content_lines(text)
        .map(|(ln, line)| {
            line.parse::<f64>()
                .map_err(|_| parse_err(source, ln, format!("expected a number, got `{line}`")))
        })
        .collect()
}

/// Prefixes an I/O error with the path it concerns.
fn with_path(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(with_path(path))
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path).map_err(with_path(path))?))
}

pub fn save_graph(path: &Path, g: &Graph, k: usize) -> Result<()> {
    let mut w = create(path)?;
    write_graph(g, k, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_graph(path: &Path) -> Result<(Graph, usize)> {
    parse_graph(&read_text(path)?, &source_name(path))
}

pub fn save_truth(path: &Path, t: &GroundTruth) -> Result<()> {
    let mut w = create(path)?;
    write_truth(t, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_truth(path: &Path, k: Option<usize>) -> Result<GroundTruth> {
    parse_truth(&read_text(path)?, &source_name(path), k)
}

pub fn save_matrix(path: &Path, m: &DMatrix<f64>, lambda: f64) -> Result<()> {
    let mut w = create(path)?;
    write_matrix(m, lambda, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_matrix(path: &Path) -> Result<(DMatrix<f64>, f64)> {
    let bytes = std::fs::read(path).map_err(with_path(path))?;
    parse_matrix(&bytes, &source_name(path))
}

pub fn save_labelling(path: &Path, l: &Labelling) -> Result<()> {
    let mut w = create(path)?;
    write_labelling(l, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_labelling(path: &Path) -> Result<Labelling> {
    parse_labelling(&read_text(path)?, &source_name(path))
}

pub fn save_vector(path: &Path, v: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    write_vector(v, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_vector(path: &Path) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    parse_vector(&text, &source_name(path))
}
