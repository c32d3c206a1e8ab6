//! Directed multigraph storage and edge-list I/O.

use std::fs;
use std::io::Write;
use std::path::Path;

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};

/// Directed multigraph with compressed in/out adjacency.
///
/// Multi-edges are kept (each occurrence appears in the adjacency lists) and
/// a self-loop `v -> v` counts once towards both the in- and out-degree of `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_vertices: usize,
    edges: Vec<(usize, usize)>,
    out_offsets: Vec<usize>,
    out_targets: Vec<usize>,
    in_offsets: Vec<usize>,
    in_sources: Vec<usize>,
    truth: Option<Vec<usize>>,
    ids: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Degree {
    pub in_degree: usize,
    pub out_degree: usize,
    pub total: usize,
}

fn csr(n: usize, pairs: impl Iterator<Item = (usize, usize)> + Clone) -> (Vec<usize>, Vec<usize>) {
    let mut offsets = vec![0usize; n + 1];
    for (from, _) in pairs.clone() {
        offsets[from + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut targets = vec![0usize; offsets[n]];
    for (from, to) in pairs {
        targets[cursor[from]] = to;
        cursor[from] += 1;
    }
    (offsets, targets)
}

impl Graph {
    pub fn from_edges(num_vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(u, v)) = edges
            .iter()
            .find(|&&(u, v)| u >= num_vertices || v >= num_vertices)
        {
            return Err(Error::VertexOutOfRange {
                vertex: u.max(v),
                num_vertices,
            });
        }
        let (out_offsets, out_targets) = csr(num_vertices, edges.iter().copied());
        let (in_offsets, in_sources) = csr(num_vertices, edges.iter().map(|&(u, v)| (v, u)));
        Ok(Graph {
            num_vertices,
            edges,
            out_offsets,
            out_targets,
            in_offsets,
            in_sources,
            truth: None,
            ids: None,
        })
    }

    /// Attaches ground-truth community labels (one per vertex).
    pub fn with_truth(mut self, truth: Vec<usize>) -> Result<Self> {
        if truth.len() != self.num_vertices {
            return Err(Error::invalid(format!(
                "truth has {} labels for {} vertices",
                truth.len(),
                self.num_vertices
            )));
        }
        self.truth = Some(truth);
        Ok(self)
    }

    /// Attaches external vertex ids, used when reading and writing label files.
    pub fn with_ids(mut self, ids: Vec<u64>) -> Result<Self> {
        if ids.len() != self.num_vertices {
            return Err(Error::invalid(format!(
                "{} ids for {} vertices",
                ids.len(),
                self.num_vertices
            )));
        }
        self.ids = Some(ids);
        Ok(self)
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn out_neighbors(&self, v: usize) -> &[usize] {
        &self.out_targets[self.out_offsets[v]..self.out_offsets[v + 1]]
    }

    pub fn in_neighbors(&self, v: usize) -> &[usize] {
        &self.in_sources[self.in_offsets[v]..self.in_offsets[v + 1]]
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.out_offsets[v + 1] - self.out_offsets[v]
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.in_offsets[v + 1] - self.in_offsets[v]
    }

    pub fn total_degree(&self, v: usize) -> usize {
        self.out_degree(v) + self.in_degree(v)
    }

    pub fn total_degrees(&self) -> Vec<usize> {
        (0..self.num_vertices)
            .map(|v| self.total_degree(v))
            .collect()
    }

    pub fn degree(&self, v: usize) -> Result<Degree> {
        if v >= self.num_vertices {
            return Err(Error::VertexOutOfRange {
                vertex: v,
                num_vertices: self.num_vertices,
            });
        }
        let (in_degree, out_degree) = (self.in_degree(v), self.out_degree(v));
        Ok(Degree {
            in_degree,
            out_degree,
            total: in_degree + out_degree,
        })
    }

    pub fn truth(&self) -> Option<&[usize]> {
        self.truth.as_deref()
    }

    /// External id of `v`; the internal index when the graph has no id table.
    pub fn external_id(&self, v: usize) -> u64 {
        match &self.ids {
            Some(ids) => ids[v],
            None => v as u64,
        }
    }

    /// Reverse lookup from external id to internal index.
    pub fn id_index(&self) -> FxHashMap<u64, usize> {
        (0..self.num_vertices)
            .map(|v| (self.external_id(v), v))
            .collect()
    }
}

/// Reads a whitespace-separated edge list.
///
/// Vertex ids are compacted to `0..n` in order of first appearance; the
/// original ids are kept as external ids. Lines starting with `%` or `#` are
/// comments, a third token (weight) is ignored. Undirected input is stored as
/// two directed edges per line.
pub fn load_edge_list(path: impl AsRef<Path>, directed: bool) -> Result<Graph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text, directed).map_err(|(line, message)| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    })
}

fn parse_edge_list(text: &str, directed: bool) -> std::result::Result<Graph, (usize, String)> {
    let mut index: FxHashMap<u64, usize> = FxHashMap::default();
    let mut ids = Vec::new();
    let mut edges = Vec::new();
    let mut intern = |id: u64, ids: &mut Vec<u64>| {
        *index.entry(id).or_insert_with(|| {
            ids.push(id);
            ids.len() - 1
        })
    };
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let mut next = || -> std::result::Result<u64, (usize, String)> {
            let tok = tokens
                .next()
                .ok_or_else(|| (lineno + 1, "expected at least two vertex ids".to_string()))?;
            tok.parse::<u64>()
                .map_err(|_| (lineno + 1, format!("invalid vertex id {tok:?}")))
        };
        let (src, dst) = (next()?, next()?);
        let u = intern(src, &mut ids);
        let v = intern(dst, &mut ids);
        edges.push((u, v));
        if !directed {
            edges.push((v, u));
        }
    }
    if edges.is_empty() {
        return Err((0, "edge list contains no edges".to_string()));
    }
    let n = ids.len();
    let g = Graph::from_edges(n, edges).map_err(|e| (0, e.to_string()))?;
    g.with_ids(ids).map_err(|e| (0, e.to_string()))
}

/// Writes the edge list sorted by `(source, target)` using external ids.
pub fn write_edge_list(g: &Graph, mut out: impl Write) -> std::io::Result<()> {
    let mut edges: Vec<(u64, u64)> = g
        .edges()
        .iter()
        .map(|&(u, v)| (g.external_id(u), g.external_id(v)))
        .collect();
    edges.sort_unstable();
    for (u, v) in edges {
        writeln!(out, "{u} {v}")?;
    }
    Ok(())
}

pub fn save_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_edge_list(g, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Induced subgraph plus the id maps between it and its parent.
#[derive(Debug, Clone)]
pub struct Subgraph {
    pub graph: Graph,
    /// `to_parent[new] = old`.
    pub to_parent: Vec<usize>,
    from_parent: Vec<Option<usize>>,
}

impl Subgraph {
    pub fn local(&self, parent_vertex: usize) -> Option<usize> {
        self.from_parent.get(parent_vertex).copied().flatten()
    }
}

/// Keeps exactly the edges with both endpoints in `vertices`; `vertices[i]`
/// becomes vertex `i` of the subgraph.
pub fn induced_subgraph(g: &Graph, vertices: &[usize]) -> Result<Subgraph> {
    if vertices.is_empty() {
        return Err(Error::EmptyGraph(
            "induced subgraph of an empty vertex set".into(),
        ));
    }
    let mut from_parent = vec![None; g.num_vertices()];
    for (i, &v) in vertices.iter().enumerate() {
        if v >= g.num_vertices() {
            return Err(Error::VertexOutOfRange {
                vertex: v,
                num_vertices: g.num_vertices(),
            });
        }
        if from_parent[v].replace(i).is_some() {
            return Err(Error::invalid(format!("vertex {v} selected twice")));
        }
    }
    let mut edges = Vec::new();
    for (i, &v) in vertices.iter().enumerate() {
        for &w in g.out_neighbors(v) {
            if let Some(j) = from_parent[w] {
                edges.push((i, j));
            }
        }
    }
    let mut sub = Graph::from_edges(vertices.len(), edges)?;
    if let Some(truth) = g.truth() {
        sub = sub.with_truth(vertices.iter().map(|&v| truth[v]).collect())?;
    }
    if g.ids.is_some() {
        sub = sub.with_ids(vertices.iter().map(|&v| g.external_id(v)).collect())?;
    }
    Ok(Subgraph {
        graph: sub,
        to_parent: vertices.to_vec(),
        from_parent,
    })
}

/// Drops zero-degree vertices and recompacts ids, preserving order.
/// Truth labels are recompacted too so that they stay dense.
pub fn remove_islands(g: &Graph) -> Result<(Graph, usize)> {
    let keep: Vec<usize> = (0..g.num_vertices())
        .filter(|&v| g.total_degree(v) > 0)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyGraph("every vertex is an island".into()));
    }
    let removed = g.num_vertices() - keep.len();
    if removed == 0 {
        return Ok((g.clone(), 0));
    }
    let mut sub = induced_subgraph(g, &keep)?.graph;
    if let Some(truth) = sub.truth.take() {
        sub.truth = Some(compact_labels(&truth).0);
    }
    Ok((sub, removed))
}

/// Relabels arbitrary labels to `0..k` in order of first appearance.
pub fn compact_labels(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map: FxHashMap<usize, usize> = FxHashMap::default();
    let out = labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect();
    (out, map.len())
}
