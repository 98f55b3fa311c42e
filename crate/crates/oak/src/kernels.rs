//! The eight graph kernels and Gram-matrix assembly.
//!
//! Histogram kernels take dot products of count vectors (V and E on
//! label and endpoint-label-pair counts, WL on colour counts, GL on
//! connected 3-vertex subgraph classes, SP on label-pair/distance
//! triples). Their optimal-assignment counterparts V-OA, E-OA and
//! WL-OA replace the dot product with a histogram intersection, which
//! equals the maximum-weight bijection under the respective Dirac or
//! colour-count base kernel.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::assignment::{histogram, intersect, Histogram};
use crate::graph::{Dataset, Graph};
use crate::hierarchy::Hierarchy;
use crate::wl::{refine, wl_feature_vector, wl_hierarchy, ColourSequence, WlError};

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("unknown kernel '{0}'")]
    UnknownKernel(String),
    #[error(transparent)]
    Wl(#[from] WlError),
}

/// The eight supported kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelName {
    V,
    E,
    VOa,
    EOa,
    Wl,
    WlOa,
    Gl,
    Sp,
}

impl KernelName {
    pub const ALL: [KernelName; 8] = [
        KernelName::V,
        KernelName::E,
        KernelName::VOa,
        KernelName::EOa,
        KernelName::Wl,
        KernelName::WlOa,
        KernelName::Gl,
        KernelName::Sp,
    ];

    /// True for the WL variants parameterized by the iteration count.
    pub fn takes_h(&self) -> bool {
        matches!(self, KernelName::Wl | KernelName::WlOa)
    }
}

impl fmt::Display for KernelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            KernelName::V => "V",
            KernelName::E => "E",
            KernelName::VOa => "V-OA",
            KernelName::EOa => "E-OA",
            KernelName::Wl => "WL",
            KernelName::WlOa => "WL-OA",
            KernelName::Gl => "GL",
            KernelName::Sp => "SP",
        };
        f.write_str(name)
    }
}

impl FromStr for KernelName {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "V" => Ok(KernelName::V),
            "E" => Ok(KernelName::E),
            "V-OA" => Ok(KernelName::VOa),
            "E-OA" => Ok(KernelName::EOa),
            "WL" => Ok(KernelName::Wl),
            "WL-OA" => Ok(KernelName::WlOa),
            "GL" => Ok(KernelName::Gl),
            "SP" => Ok(KernelName::Sp),
            _ => Err(KernelError::UnknownKernel(s.to_string())),
        }
    }
}

/// Sorted sparse count vector; exact merge-join dot products and
/// min-sums keep every kernel value an integer.
type Counts<K> = Vec<(K, u64)>;

fn sorted_counts<K: Ord>(items: impl Iterator<Item = K>) -> Counts<K> {
    let mut map: BTreeMap<K, u64> = BTreeMap::new();
    for k in items {
        *map.entry(k).or_insert(0) += 1;
    }
    map.into_iter().collect()
}

fn dot<K: Ord>(a: &Counts<K>, b: &Counts<K>) -> f64 {
    let mut sum: u128 = 0;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                sum += a[i].1 as u128 * b[j].1 as u128;
                i += 1;
                j += 1;
            }
        }
    }
    sum as f64
}

fn min_sum<K: Ord>(a: &Counts<K>, b: &Counts<K>) -> f64 {
    let mut sum: u64 = 0;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                sum += a[i].1.min(b[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    sum as f64
}

fn label_counts(g: &Graph) -> Counts<u32> {
    sorted_counts(g.labels().iter().copied())
}

/// Unordered endpoint labels of every edge.
fn edge_pair_counts(g: &Graph) -> Counts<(u32, u32)> {
    sorted_counts(g.edges().iter().map(|&(u, v)| {
        let (a, b) = (g.labels()[u as usize], g.labels()[v as usize]);
        (a.min(b), a.max(b))
    }))
}

/// Isomorphism class of a connected induced 3-vertex subgraph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum GraphletClass {
    /// Sorted labels of the three vertices.
    Triangle([u32; 3]),
    /// Centre label plus sorted labels of the two ends.
    Path(u32, [u32; 2]),
}

/// Enumerates per centre vertex: any two neighbours span either a path
/// (no third edge) or a triangle (counted once, at its smallest
/// vertex).
fn graphlet_counts(g: &Graph) -> Counts<GraphletClass> {
    let labels = g.labels();
    let mut classes = Vec::new();
    for centre in 0..g.vertex_count() as u32 {
        let neigh = g.neighbours(centre);
        for (a, &u) in neigh.iter().enumerate() {
            for &v in &neigh[a + 1..] {
                if g.has_edge(u, v) {
                    if centre < u && centre < v {
                        let mut tri = [
                            labels[centre as usize],
                            labels[u as usize],
                            labels[v as usize],
                        ];
                        tri.sort_unstable();
                        classes.push(GraphletClass::Triangle(tri));
                    }
                } else {
                    let mut ends = [labels[u as usize], labels[v as usize]];
                    ends.sort_unstable();
                    classes.push(GraphletClass::Path(labels[centre as usize], ends));
                }
            }
        }
    }
    sorted_counts(classes.into_iter())
}

/// Breadth-first distances from one source; `u32::MAX` marks
/// unreachable vertices.
fn bfs_distances(g: &Graph, source: u32) -> Vec<u32> {
    let mut dist = vec![u32::MAX; g.vertex_count()];
    dist[source as usize] = 0;
    let mut queue = std::collections::VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        for &u in g.neighbours(v) {
            if dist[u as usize] == u32::MAX {
                dist[u as usize] = dist[v as usize] + 1;
                queue.push_back(u);
            }
        }
    }
    dist
}

/// (sorted endpoint labels, distance) for every unordered vertex pair
/// at finite positive distance.
fn shortest_path_counts(g: &Graph) -> Counts<(u32, u32, u32)> {
    let labels = g.labels();
    let mut triples = Vec::new();
    for u in 0..g.vertex_count() as u32 {
        let dist = bfs_distances(g, u);
        for v in u + 1..g.vertex_count() as u32 {
            let d = dist[v as usize];
            if d != u32::MAX && d > 0 {
                let (a, b) = (labels[u as usize], labels[v as usize]);
                triples.push((a.min(b), a.max(b), d));
            }
        }
    }
    sorted_counts(triples.into_iter())
}

/// Dot product of vertex label counts.
pub fn vertex_kernel(g: &Graph, h: &Graph) -> f64 {
    dot(&label_counts(g), &label_counts(h))
}

/// Dot product of endpoint-label-pair counts.
pub fn edge_kernel(g: &Graph, h: &Graph) -> f64 {
    dot(&edge_pair_counts(g), &edge_pair_counts(h))
}

/// Optimal assignment of vertices under the Dirac label kernel:
/// the histogram intersection of the label counts.
pub fn vertex_oa_kernel(g: &Graph, h: &Graph) -> f64 {
    min_sum(&label_counts(g), &label_counts(h))
}

/// Optimal assignment of edges; two edges have base similarity 1 when
/// some endpoint mapping preserves labels, i.e. when their unordered
/// label pairs coincide.
pub fn edge_oa_kernel(g: &Graph, h: &Graph) -> f64 {
    min_sum(&edge_pair_counts(g), &edge_pair_counts(h))
}

/// Dot product of colour count vectors over all refinement iterations.
pub fn wl_kernel(c: &ColourSequence, i: usize, j: usize) -> Result<f64, KernelError> {
    let a = wl_feature_vector(c, i)?;
    let b = wl_feature_vector(c, j)?;
    Ok(dot(&a, &b))
}

/// Dot product of graphlet class counts.
pub fn graphlet_kernel(g: &Graph, h: &Graph) -> f64 {
    dot(&graphlet_counts(g), &graphlet_counts(h))
}

/// Dot product of shortest-path triple counts.
pub fn shortest_path_kernel(g: &Graph, h: &Graph) -> f64 {
    dot(&shortest_path_counts(g), &shortest_path_counts(h))
}

/// Shared state for WL-OA: the colour hierarchy over all vertices of
/// the collection and one histogram per graph.
pub struct WlOa {
    h: usize,
    hierarchy: Hierarchy,
    histograms: Vec<Histogram>,
}

impl WlOa {
    pub fn new(c: &ColourSequence) -> WlOa {
        let hierarchy = wl_hierarchy(c);
        let histograms = (0..c.num_graphs())
            .map(|g| {
                let offset = c.vertex_offset(g);
                let objects: Vec<usize> = (0..c.vertex_count(g)).map(|v| offset + v).collect();
                histogram(&hierarchy, &objects).expect("vertices are hierarchy objects")
            })
            .collect();
        WlOa {
            h: c.h(),
            hierarchy,
            histograms,
        }
    }

    /// The optimal assignment kernel between the vertex sets of graphs
    /// `i` and `j` under the matching-colour base kernel; the smaller
    /// set is implicitly padded.
    pub fn kernel(&self, i: usize, j: usize) -> Result<f64, KernelError> {
        let a = self.histograms.get(i).ok_or(WlError::UnknownGraph(i))?;
        let b = self.histograms.get(j).ok_or(WlError::UnknownGraph(j))?;
        Ok(intersect(a, b).expect("histograms share the hierarchy"))
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    pub fn histogram(&self, i: usize) -> Option<&Histogram> {
        self.histograms.get(i)
    }
}

/// A symmetric kernel matrix over all graphs of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    n: usize,
    values: Vec<f64>,
    kernel_name: String,
    params: BTreeMap<String, String>,
    normalized: bool,
}

impl GramMatrix {
    fn from_upper_triangle(
        n: usize,
        cells: Vec<(usize, usize, f64)>,
        kernel_name: String,
        params: BTreeMap<String, String>,
    ) -> GramMatrix {
        let mut values = vec![0.0; n * n];
        for (i, j, v) in cells {
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
        GramMatrix {
            n,
            values,
            kernel_name,
            params,
            normalized: false,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| self.values[i * self.n..(i + 1) * self.n].to_vec())
            .collect()
    }

    pub fn kernel_name(&self) -> &str {
        &self.kernel_name
    }

    pub fn params(&self) -> &BTreeMap<String, String> {
        &self.params
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }
}

/// Cosine normalization `k(i,j) / sqrt(k(i,i) k(j,j))`. Rows and
/// columns of graphs with zero self-similarity map to zero, diagonal
/// included.
pub fn normalize(m: &GramMatrix) -> GramMatrix {
    let n = m.n;
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let d = m.get(i, i) * m.get(j, j);
            if d > 0.0 {
                values[i * n + j] = m.get(i, j) / d.sqrt();
            }
        }
    }
    GramMatrix {
        n,
        values,
        kernel_name: m.kernel_name.clone(),
        params: m.params.clone(),
        normalized: true,
    }
}

fn upper_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
}

fn gram_from_counts<K: Ord + Sync + Send>(
    counts: Vec<Counts<K>>,
    pair_op: fn(&Counts<K>, &Counts<K>) -> f64,
) -> Vec<(usize, usize, f64)> {
    upper_pairs(counts.len())
        .into_par_iter()
        .map(|(i, j)| (i, j, pair_op(&counts[i], &counts[j])))
        .collect()
}

/// Assembles the full Gram matrix for one kernel. Preprocessing
/// (counting, WL refinement, hierarchy histograms) happens once; the
/// pairwise evaluations run in parallel. `h` is the refinement depth
/// for the WL variants and ignored otherwise.
pub fn gram(d: &Dataset, kernel: KernelName, h: usize) -> GramMatrix {
    let graphs = d.graphs();
    let n = graphs.len();
    let mut params = BTreeMap::new();
    if kernel.takes_h() {
        params.insert("h".to_string(), h.to_string());
    }

    let cells = match kernel {
        KernelName::V => gram_from_counts(graphs.par_iter().map(label_counts).collect(), dot),
        KernelName::VOa => gram_from_counts(graphs.par_iter().map(label_counts).collect(), min_sum),
        KernelName::E => gram_from_counts(graphs.par_iter().map(edge_pair_counts).collect(), dot),
        KernelName::EOa => {
            gram_from_counts(graphs.par_iter().map(edge_pair_counts).collect(), min_sum)
        }
        KernelName::Gl => gram_from_counts(graphs.par_iter().map(graphlet_counts).collect(), dot),
        KernelName::Sp => {
            gram_from_counts(graphs.par_iter().map(shortest_path_counts).collect(), dot)
        }
        KernelName::Wl => {
            let c = refine(graphs, h);
            let fvs: Vec<_> = (0..n).map(|g| wl_feature_vector(&c, g).unwrap()).collect();
            upper_pairs(n)
                .into_par_iter()
                .map(|(i, j)| (i, j, dot(&fvs[i], &fvs[j])))
                .collect()
        }
        KernelName::WlOa => {
            let c = refine(graphs, h);
            let oa = WlOa::new(&c);
            upper_pairs(n)
                .into_par_iter()
                .map(|(i, j)| (i, j, oa.kernel(i, j).unwrap()))
                .collect()
        }
    };
    GramMatrix::from_upper_triangle(n, cells, kernel.to_string(), params)
}
