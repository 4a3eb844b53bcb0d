//! Graph data model, file ingestion, and the normalized propagation
//! operator shared by every GCN layer.
//!
//! A [`Graph`] is immutable after construction: CSR adjacency over both
//! directions of each undirected edge, a dense row-major `f32` feature
//! matrix, and one class id per node. [`NormAdj`] holds the symmetric
//! normalization `D̂^{-1/2}(A+I)D̂^{-1/2}` used for propagation; self-loops
//! are stripped at load time and re-added exactly once there.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Mat;

const FEATURE_MAGIC: &[u8; 4] = b"GFM1";

/// Immutable node-classification instance.
#[derive(Clone, Debug)]
pub struct Graph {
    /// Node count.
    pub n: usize,
    /// Feature dimension.
    pub f: usize,
    /// Class count; labels lie in `[0, k)` and every class occurs.
    pub k: usize,
    /// CSR row pointers into `adj_cols`, length `n + 1`.
    pub adj_row_ptr: Vec<usize>,
    /// Neighbor ids, sorted ascending within each row; both directions stored.
    pub adj_cols: Vec<u32>,
    /// Row-major `n × f` feature matrix.
    pub features: Vec<f32>,
    /// Ground-truth class per node.
    pub labels: Vec<usize>,
}

impl Graph {
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adj_cols[self.adj_row_ptr[v]..self.adj_row_ptr[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj_row_ptr[v + 1] - self.adj_row_ptr[v]
    }

    /// Number of stored directed entries (2× the undirected edge count).
    pub fn directed_edge_count(&self) -> usize {
        self.adj_cols.len()
    }

    pub fn feature_row(&self, v: usize) -> &[f32] {
        &self.features[v * self.f..(v + 1) * self.f]
    }

    /// Per-class node counts over the whole graph.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.k];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Build from an edge list (any direction, duplicates allowed), dense
    /// features, and labels. Symmetrizes, deduplicates, and drops self-loops.
    pub fn from_parts(
        n: usize,
        f: usize,
        edges: &[(usize, usize)],
        features: Vec<f32>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if features.len() != n * f {
            return Err(Error::Shape(format!(
                "feature buffer holds {} values, expected {}x{}",
                features.len(),
                n,
                f
            )));
        }
        if labels.len() != n {
            return Err(Error::Schema(format!(
                "{} labels for {} nodes",
                labels.len(),
                n
            )));
        }
        let k = match labels.iter().max() {
            Some(&m) => m + 1,
            None => return Err(Error::Schema("empty graph".into())),
        };
        let mut seen = vec![false; k];
        for &l in &labels {
            seen[l] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Schema(format!(
                "class {missing} absent from labels (classes must cover [0, {k}))"
            )));
        }

        let mut directed: Vec<(u32, u32)> = Vec::with_capacity(edges.len() * 2);
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Bounds { id: u.max(v), n });
            }
            if u == v {
                log::warn!("dropping self-loop ({u},{u}); normalization re-adds it");
                continue;
            }
            directed.push((u as u32, v as u32));
            directed.push((v as u32, u as u32));
        }
        directed.sort_unstable();
        directed.dedup();

        let mut adj_row_ptr = vec![0usize; n + 1];
        for &(u, _) in &directed {
            adj_row_ptr[u as usize + 1] += 1;
        }
        for i in 0..n {
            adj_row_ptr[i + 1] += adj_row_ptr[i];
        }
        let adj_cols = directed.iter().map(|&(_, v)| v).collect();

        Ok(Graph {
            n,
            f,
            k,
            adj_row_ptr,
            adj_cols,
            features,
            labels,
        })
    }

    /// Undirected edge list with `u < v`, sorted.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.adj_cols.len() / 2);
        for u in 0..self.n {
            for &v in self.neighbors(u) {
                let v = v as usize;
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }
}

/// Symmetric normalized adjacency `Ã = D̂^{-1/2}(A+I)D̂^{-1/2}` in CSR.
#[derive(Clone, Debug)]
pub struct NormAdj {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    /// Column ids including the diagonal, ascending within each row.
    pub cols: Vec<u32>,
    /// Entry `(v,u) = 1/sqrt(d̂_u · d̂_v)` stored as `f32`.
    pub values: Vec<f32>,
    /// `d̂_v = 1 + deg(v)`.
    pub degrees: Vec<f64>,
}

/// Build the normalized operator. Isolated nodes get `d̂ = 1` and a unit
/// diagonal entry.
pub fn normalize_adjacency(g: &Graph) -> NormAdj {
    let n = g.n;
    let degrees: Vec<f64> = (0..n).map(|v| 1.0 + g.degree(v) as f64).collect();
    let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(g.adj_cols.len() + n);
    let mut values = Vec::with_capacity(g.adj_cols.len() + n);
    row_ptr.push(0);
    for v in 0..n {
        let mut inserted_diag = false;
        for &u in g.neighbors(v) {
            if !inserted_diag && (u as usize) > v {
                cols.push(v as u32);
                values.push((inv_sqrt[v] * inv_sqrt[v]) as f32);
                inserted_diag = true;
            }
            cols.push(u);
            values.push((inv_sqrt[v] * inv_sqrt[u as usize]) as f32);
        }
        if !inserted_diag {
            cols.push(v as u32);
            values.push((inv_sqrt[v] * inv_sqrt[v]) as f32);
        }
        row_ptr.push(cols.len());
    }

    NormAdj {
        n,
        row_ptr,
        cols,
        values,
        degrees,
    }
}

/// Sparse-dense product `Ã · X`. Rows evaluate in parallel; each row
/// accumulates in `f64` over ascending column index, so the result is
/// independent of thread count.
pub fn spmm(a: &NormAdj, x: &Mat) -> Result<Mat> {
    if x.rows != a.n {
        return Err(Error::Shape(format!(
            "spmm: operator is {0}x{0} but dense input has {1} rows",
            a.n, x.rows
        )));
    }
    let d = x.cols;
    let mut out = Mat::zeros(a.n, d);
    out.data
        .par_chunks_mut(d)
        .enumerate()
        .for_each(|(v, orow)| {
            let start = a.row_ptr[v];
            let end = a.row_ptr[v + 1];
            for idx in start..end {
                let u = a.cols[idx] as usize;
                let w = a.values[idx] as f64;
                let xrow = x.row(u);
                for (o, &xv) in orow.iter_mut().zip(xrow) {
                    *o += w * xv;
                }
            }
        });
    Ok(out)
}

/// CSR view of the nonzero feature entries, used for the first-layer
/// products when features are sparse (bag-of-words corpora mostly are).
#[derive(Clone, Debug)]
pub struct FeatureCsr {
    pub n: usize,
    pub f: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub values: Vec<f32>,
}

impl FeatureCsr {
    pub fn from_graph(g: &Graph) -> Self {
        let mut row_ptr = Vec::with_capacity(g.n + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for v in 0..g.n {
            for (j, &x) in g.feature_row(v).iter().enumerate() {
                if x != 0.0 {
                    cols.push(j as u32);
                    values.push(x);
                }
            }
            row_ptr.push(cols.len());
        }
        FeatureCsr {
            n: g.n,
            f: g.f,
            row_ptr,
            cols,
            values,
        }
    }

    pub fn density(&self) -> f64 {
        if self.n * self.f == 0 {
            return 0.0;
        }
        self.cols.len() as f64 / (self.n * self.f) as f64
    }

    /// `X · W` for dense `W` (f × h).
    pub fn matmul(&self, w: &Mat) -> Mat {
        assert_eq!(w.rows, self.f, "feature matmul shape mismatch");
        let h = w.cols;
        let mut out = Mat::zeros(self.n, h);
        out.data
            .par_chunks_mut(h)
            .enumerate()
            .for_each(|(v, orow)| {
                for idx in self.row_ptr[v]..self.row_ptr[v + 1] {
                    let j = self.cols[idx] as usize;
                    let x = self.values[idx] as f64;
                    let wrow = w.row(j);
                    for (o, &wv) in orow.iter_mut().zip(wrow) {
                        *o += x * wv;
                    }
                }
            });
        out
    }

    /// `Xᵀ · G` for dense `G` (n × h); the first-layer weight gradient.
    pub fn transpose_matmul(&self, grad: &Mat) -> Mat {
        assert_eq!(grad.rows, self.n, "feature transpose_matmul shape mismatch");
        let h = grad.cols;
        let mut out = Mat::zeros(self.f, h);
        for v in 0..self.n {
            let grow = grad.row(v);
            for idx in self.row_ptr[v]..self.row_ptr[v + 1] {
                let j = self.cols[idx] as usize;
                let x = self.values[idx] as f64;
                let orow = &mut out.data[j * h..(j + 1) * h];
                for (o, &g) in orow.iter_mut().zip(grow) {
                    *o += x * g;
                }
            }
        }
        out
    }
}

// --- file ingestion -------------------------------------------------------

/// Load a graph from the three on-disk artifacts.
///
/// * edge file: `src<TAB>dst` per line, 0-based ids, `#` comments ignored
/// * feature file: `GFM1` binary (u64 n, u64 f, n·f little-endian f32) or
///   a `.csv` of comma-separated reals, one node per line
/// * label file: one integer class id per line, line i = node i
pub fn load_graph(edge_path: &Path, feature_path: &Path, label_path: &Path) -> Result<Graph> {
    let (n, f, features) = read_features(feature_path)?;
    let labels = read_labels(label_path)?;
    if labels.len() != n {
        return Err(Error::Schema(format!(
            "feature file declares {n} nodes but label file {} has {} lines",
            label_path.display(),
            labels.len()
        )));
    }
    let edges = read_edges(edge_path, n)?;
    Graph::from_parts(n, f, &edges, features, labels)
}

fn read_edges(path: &Path, n: usize) -> Result<Vec<(usize, usize)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut edges = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut it = trimmed.split('\t');
        let src = it.next().unwrap_or("");
        let dst = it
            .next()
            .ok_or_else(|| Error::parse(path, lineno + 1, "expected `src<TAB>dst`"))?;
        let src: usize = src
            .parse()
            .map_err(|_| Error::parse(path, lineno + 1, format!("bad node id `{src}`")))?;
        let dst: usize = dst
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, lineno + 1, format!("bad node id `{dst}`")))?;
        if src >= n || dst >= n {
            return Err(Error::Bounds {
                id: src.max(dst),
                n,
            });
        }
        edges.push((src, dst));
    }
    Ok(edges)
}

fn read_features(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    if path.extension().is_some_and(|e| e == "csv") {
        return read_features_csv(path);
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if &magic != FEATURE_MAGIC {
        return Err(Error::Schema(format!(
            "{}: bad magic {:?}, expected GFM1",
            path.display(),
            magic
        )));
    }
    let mut u64buf = [0u8; 8];
    reader.read_exact(&mut u64buf).map_err(|e| Error::io(path, e))?;
    let n = u64::from_le_bytes(u64buf) as usize;
    reader.read_exact(&mut u64buf).map_err(|e| Error::io(path, e))?;
    let f = u64::from_le_bytes(u64buf) as usize;
    let mut raw = vec![0u8; n * f * 4];
    reader.read_exact(&mut raw).map_err(|e| Error::io(path, e))?;
    let features = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok((n, f, features))
}

fn read_features_csv(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut features = Vec::new();
    let mut f = None;
    let mut n = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f32> = line
            .split(',')
            .map(|v| v.trim().parse::<f32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(path, lineno + 1, format!("bad real: {e}")))?;
        match f {
            None => f = Some(row.len()),
            Some(fw) if fw != row.len() => {
                return Err(Error::parse(
                    path,
                    lineno + 1,
                    format!("row has {} values, expected {fw}", row.len()),
                ))
            }
            _ => {}
        }
        features.extend(row);
        n += 1;
    }
    let f = f.ok_or_else(|| Error::Schema(format!("{}: empty feature csv", path.display())))?;
    Ok((n, f, features))
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut labels = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let l: usize = trimmed
            .parse()
            .map_err(|_| Error::parse(path, lineno + 1, format!("bad class id `{trimmed}`")))?;
        labels.push(l);
    }
    Ok(labels)
}

/// Write the three dataset artifacts; `load_graph` round-trips features
/// bit-exactly and edges structurally.
pub fn save_graph(g: &Graph, edge_path: &Path, feature_path: &Path, label_path: &Path) -> Result<()> {
    let mut ef = BufWriter::new(File::create(edge_path).map_err(|e| Error::io(edge_path, e))?);
    for (u, v) in g.undirected_edges() {
        writeln!(ef, "{u}\t{v}").map_err(|e| Error::io(edge_path, e))?;
    }
    ef.flush().map_err(|e| Error::io(edge_path, e))?;

    let mut ff =
        BufWriter::new(File::create(feature_path).map_err(|e| Error::io(feature_path, e))?);
    ff.write_all(FEATURE_MAGIC).map_err(|e| Error::io(feature_path, e))?;
    ff.write_all(&(g.n as u64).to_le_bytes())
        .map_err(|e| Error::io(feature_path, e))?;
    ff.write_all(&(g.f as u64).to_le_bytes())
        .map_err(|e| Error::io(feature_path, e))?;
    for v in &g.features {
        ff.write_all(&v.to_le_bytes()).map_err(|e| Error::io(feature_path, e))?;
    }
    ff.flush().map_err(|e| Error::io(feature_path, e))?;

    let mut lf = BufWriter::new(File::create(label_path).map_err(|e| Error::io(label_path, e))?);
    for l in &g.labels {
        writeln!(lf, "{l}").map_err(|e| Error::io(label_path, e))?;
    }
    lf.flush().map_err(|e| Error::io(label_path, e))?;
    Ok(())
}

/// Row-normalize features to unit L1 norm in place (zero rows untouched).
/// Common preprocessing for bag-of-words citation corpora.
pub fn row_normalize_features(g: &mut Graph) {
    for v in 0..g.n {
        let row = &mut g.features[v * g.f..(v + 1) * g.f];
        let sum: f32 = row.iter().map(|x| x.abs()).sum();
        if sum > 0.0 {
            for x in row.iter_mut() {
                *x /= sum;
            }
        }
    }
}

/// Dense features as an `f64` matrix.
pub fn features_mat(g: &Graph) -> Mat {
    Mat {
        rows: g.n,
        cols: g.f,
        data: g.features.iter().map(|&x| x as f64).collect(),
    }
}
