//! Graph and dataset representation plus parsing of the TU Dortmund
//! benchmark text format.
//!
//! A dataset directory `DS/` holds the usual file family:
//!
//! * `DS_A.txt`: comma separated edge list with 1-indexed global vertex ids
//! * `DS_graph_indicator.txt`: graph id (1-indexed) per vertex line
//! * `DS_graph_labels.txt`: class label per graph
//! * `DS_node_labels.txt`: optional vertex label per vertex line
//! * `DS_edge_labels.txt`: ignored if present
//!
//! Node label values are remapped to a dense 0-based dictionary on load so
//! they never collide with colour ids handed out later by refinement.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Errors raised while building graphs or reading dataset files.
#[derive(Debug, Error)]
pub enum GraphError {
    #[error("missing required file {0}")]
    MissingFile(PathBuf),
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("i/o error on {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: io::Error,
    },
}

/// A simple undirected graph with one categorical label per vertex.
///
/// Edges are stored once with normalized endpoints `(u, v)`, `u < v`.
/// Self-loops are rejected; duplicate edges collapse to one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    vertex_count: usize,
    edges: Vec<(u32, u32)>,
    labels: Vec<u32>,
    adjacency: Vec<Vec<u32>>,
}

impl Graph {
    /// Builds a graph from an edge list and per-vertex labels.
    ///
    /// `labels.len()` must equal `vertex_count`; endpoints must be valid
    /// vertex indices and distinct. Edges listed in both directions (or
    /// repeated) are stored once.
    pub fn new(
        vertex_count: usize,
        edges: impl IntoIterator<Item = (u32, u32)>,
        labels: Vec<u32>,
    ) -> Result<Self, GraphError> {
        if labels.len() != vertex_count {
            return Err(GraphError::InvalidGraph(format!(
                "expected {} vertex labels, got {}",
                vertex_count,
                labels.len()
            )));
        }
        let mut normalized: Vec<(u32, u32)> = Vec::new();
        let mut seen = HashSet::new();
        for (a, b) in edges {
            if a as usize >= vertex_count || b as usize >= vertex_count {
                return Err(GraphError::InvalidGraph(format!(
                    "edge ({a}, {b}) out of range for {vertex_count} vertices"
                )));
            }
            if a == b {
                return Err(GraphError::InvalidGraph(format!("self-loop at vertex {a}")));
            }
            let e = (a.min(b), a.max(b));
            if seen.insert(e) {
                normalized.push(e);
            }
        }
        normalized.sort_unstable();
        let mut adjacency = vec![Vec::new(); vertex_count];
        for &(u, v) in &normalized {
            adjacency[u as usize].push(v);
            adjacency[v as usize].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Graph {
            vertex_count,
            edges: normalized,
            labels,
            adjacency,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges with normalized endpoints, sorted lexicographically.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn label(&self, v: u32) -> u32 {
        self.labels[v as usize]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Sorted neighbour list of `v`.
    pub fn neighbours(&self, v: u32) -> &[u32] {
        &self.adjacency[v as usize]
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.adjacency[u as usize].binary_search(&v).is_ok()
    }
}

/// An ordered collection of graphs with one class label per graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    graphs: Vec<Graph>,
    class_labels: Vec<i64>,
    label_alphabet: usize,
}

impl Dataset {
    /// Bundles graphs and class labels; vertex labels are assumed to be
    /// dense 0-based ids already.
    pub fn new(
        name: impl Into<String>,
        graphs: Vec<Graph>,
        class_labels: Vec<i64>,
    ) -> Result<Self, GraphError> {
        if graphs.len() != class_labels.len() {
            return Err(GraphError::InvalidGraph(format!(
                "{} graphs but {} class labels",
                graphs.len(),
                class_labels.len()
            )));
        }
        let label_alphabet = graphs
            .iter()
            .flat_map(|g| g.labels().iter())
            .map(|&l| l as usize + 1)
            .max()
            .unwrap_or(0);
        Ok(Dataset {
            name: name.into(),
            graphs,
            class_labels,
            label_alphabet,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn graph(&self, i: usize) -> &Graph {
        &self.graphs[i]
    }

    pub fn class_labels(&self) -> &[i64] {
        &self.class_labels
    }

    /// Number of distinct vertex labels (size of the dense dictionary).
    pub fn label_alphabet(&self) -> usize {
        self.label_alphabet
    }

    pub fn total_vertices(&self) -> usize {
        self.graphs.iter().map(|g| g.vertex_count()).sum()
    }
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, GraphError> {
    let text = fs::read_to_string(path).map_err(|source| {
        if source.kind() == io::ErrorKind::NotFound {
            GraphError::MissingFile(path.to_path_buf())
        } else {
            GraphError::Io {
                file: path.display().to_string(),
                source,
            }
        }
    })?;
    // Blank lines are skipped but line numbers refer to the file.
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty())
        .collect())
}

fn parse_int<T: std::str::FromStr>(token: &str, file: &Path, line: usize) -> Result<T, GraphError> {
    token.trim().parse::<T>().map_err(|_| GraphError::Parse {
        file: file.display().to_string(),
        line,
        message: format!("expected an integer, got {token:?}"),
    })
}

/// Reads a dataset in the TU benchmark format from `directory`.
///
/// Expects `<name>_A.txt`, `<name>_graph_indicator.txt` and
/// `<name>_graph_labels.txt`; `<name>_node_labels.txt` is optional (all
/// vertices get label 0 when absent) and `<name>_edge_labels.txt` is
/// ignored. Whitespace around commas is tolerated and blank lines are
/// skipped. Edges listed in both directions collapse to one undirected
/// edge; self-loops are rejected.
pub fn parse_dataset(directory: &Path, name: &str) -> Result<Dataset, GraphError> {
    let file_a = directory.join(format!("{name}_A.txt"));
    let file_indicator = directory.join(format!("{name}_graph_indicator.txt"));
    let file_graph_labels = directory.join(format!("{name}_graph_labels.txt"));
    let file_node_labels = directory.join(format!("{name}_node_labels.txt"));

    let parse_err = |file: &Path, line: usize, message: String| GraphError::Parse {
        file: file.display().to_string(),
        line,
        message,
    };

    // Graph membership per global vertex (1-indexed file, 0-indexed here).
    let indicator_lines = read_lines(&file_indicator)?;
    let mut graph_of: Vec<usize> = Vec::with_capacity(indicator_lines.len());
    let mut graph_count = 0usize;
    for (line, text) in &indicator_lines {
        let id: usize = parse_int(text, &file_indicator, *line)?;
        if id == 0 {
            return Err(parse_err(
                &file_indicator,
                *line,
                "graph ids are 1-indexed, got 0".into(),
            ));
        }
        graph_of.push(id - 1);
        graph_count = graph_count.max(id);
    }
    let total_vertices = graph_of.len();

    // Local vertex index within each graph, in file order.
    let mut vertex_counts = vec![0usize; graph_count];
    let mut local_index: Vec<u32> = Vec::with_capacity(total_vertices);
    for &g in &graph_of {
        local_index.push(vertex_counts[g] as u32);
        vertex_counts[g] += 1;
    }

    // Optional node labels, remapped to a dense dictionary in order of
    // first appearance.
    let mut labels = vec![0u32; total_vertices];
    match read_lines(&file_node_labels) {
        Ok(lines) => {
            if lines.len() != total_vertices {
                return Err(parse_err(
                    &file_node_labels,
                    lines.len(),
                    format!(
                        "{} node label lines for {} vertices",
                        lines.len(),
                        total_vertices
                    ),
                ));
            }
            let mut dictionary: Vec<i64> = Vec::new();
            for (v, (line, text)) in lines.iter().enumerate() {
                let raw: i64 = parse_int(text, &file_node_labels, *line)?;
                let dense = match dictionary.iter().position(|&x| x == raw) {
                    Some(i) => i,
                    None => {
                        dictionary.push(raw);
                        dictionary.len() - 1
                    }
                };
                labels[v] = dense as u32;
            }
        }
        Err(GraphError::MissingFile(_)) => {}
        Err(e) => return Err(e),
    }

    // Edge list; global endpoints must belong to the same graph.
    let mut per_graph_edges: Vec<Vec<(u32, u32)>> = vec![Vec::new(); graph_count];
    for (line, text) in read_lines(&file_a)? {
        let mut parts = text.split(',');
        let (a, b) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(parse_err(
                    &file_a,
                    line,
                    format!("expected \"u, v\", got {text:?}"),
                ))
            }
        };
        let u: usize = parse_int(a, &file_a, line)?;
        let v: usize = parse_int(b, &file_a, line)?;
        if u == 0 || v == 0 || u > total_vertices || v > total_vertices {
            return Err(parse_err(
                &file_a,
                line,
                format!("vertex id out of range in edge ({u}, {v})"),
            ));
        }
        let (u, v) = (u - 1, v - 1);
        if graph_of[u] != graph_of[v] {
            return Err(parse_err(
                &file_a,
                line,
                format!(
                    "edge ({}, {}) connects graph {} to graph {}",
                    u + 1,
                    v + 1,
                    graph_of[u] + 1,
                    graph_of[v] + 1
                ),
            ));
        }
        if u == v {
            return Err(parse_err(
                &file_a,
                line,
                format!("self-loop at vertex {}", u + 1),
            ));
        }
        per_graph_edges[graph_of[u]].push((local_index[u], local_index[v]));
    }

    // Class labels, one line per graph, passed through unchanged.
    let label_lines = read_lines(&file_graph_labels)?;
    if label_lines.len() != graph_count {
        return Err(parse_err(
            &file_graph_labels,
            label_lines.len(),
            format!(
                "{} class labels for {} graphs",
                label_lines.len(),
                graph_count
            ),
        ));
    }
    let mut class_labels = Vec::with_capacity(graph_count);
    for (line, text) in &label_lines {
        class_labels.push(parse_int::<i64>(text, &file_graph_labels, *line)?);
    }

    let mut per_graph_labels: Vec<Vec<u32>> = vec![Vec::new(); graph_count];
    for (v, &g) in graph_of.iter().enumerate() {
        per_graph_labels[g].push(labels[v]);
    }

    let mut graphs = Vec::with_capacity(graph_count);
    for g in 0..graph_count {
        let graph = Graph::new(
            vertex_counts[g],
            per_graph_edges[g].drain(..),
            std::mem::take(&mut per_graph_labels[g]),
        )
        .map_err(|e| GraphError::InvalidGraph(format!("graph {}: {e}", g + 1)))?;
        graphs.push(graph);
    }

    Dataset::new(name, graphs, class_labels)
}

/// Writes `dataset` in the TU benchmark format under `directory`.
///
/// Each undirected edge is written once with ascending global ids, so
/// `parse_dataset` on the result reproduces the dataset.
pub fn write_dataset(directory: &Path, dataset: &Dataset) -> Result<(), GraphError> {
    let io_err = |file: &Path, source: io::Error| GraphError::Io {
        file: file.display().to_string(),
        source,
    };
    fs::create_dir_all(directory).map_err(|e| io_err(directory, e))?;
    let name = dataset.name();

    let mut indicator = String::new();
    let mut node_labels = String::new();
    let mut edges = String::new();
    let mut offset = 0usize;
    for (g, graph) in dataset.graphs().iter().enumerate() {
        for v in 0..graph.vertex_count() {
            let _ = writeln!(indicator, "{}", g + 1);
            let _ = writeln!(node_labels, "{}", graph.label(v as u32));
        }
        for &(u, v) in graph.edges() {
            let _ = writeln!(
                edges,
                "{}, {}",
                offset + u as usize + 1,
                offset + v as usize + 1
            );
        }
        offset += graph.vertex_count();
    }
    let mut graph_labels = String::new();
    for &c in dataset.class_labels() {
        let _ = writeln!(graph_labels, "{c}");
    }

    for (suffix, body) in [
        ("A", edges),
        ("graph_indicator", indicator),
        ("graph_labels", graph_labels),
        ("node_labels", node_labels),
    ] {
        let path = directory.join(format!("{name}_{suffix}.txt"));
        fs::write(&path, body).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

/// Generates a deterministic Erdős–Rényi style graph: every pair becomes
/// an edge with probability `p`, labels drawn uniformly from
/// `0..alphabet`.
pub fn synthetic_graph(seed: u64, n: usize, p: f64, alphabet: u32) -> Graph {
    assert!((0.0..=1.0).contains(&p), "edge probability out of range");
    assert!(alphabet >= 1, "alphabet must contain at least one label");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<u32> = (0..n).map(|_| rng.random_range(0..alphabet)).collect();
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in (u + 1)..n as u32 {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, edges, labels).expect("generated graph is valid")
}

/// Generates a deterministic dataset of `count` synthetic graphs with
/// `1..=max_vertices` vertices each and `classes` class labels.
pub fn synthetic_dataset(
    seed: u64,
    count: usize,
    max_vertices: usize,
    p: f64,
    alphabet: u32,
    classes: u32,
) -> Dataset {
    assert!(max_vertices >= 1 && classes >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut graphs = Vec::with_capacity(count);
    let mut class_labels = Vec::with_capacity(count);
    for _ in 0..count {
        let n = rng.random_range(1..=max_vertices);
        graphs.push(synthetic_graph(rng.random::<u64>(), n, p, alphabet));
        class_labels.push(rng.random_range(0..classes) as i64);
    }
    Dataset::new("synthetic", graphs, class_labels).expect("lengths match")
}
