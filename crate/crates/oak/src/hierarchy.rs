//! Strong kernels and the hierarchies that induce them.
//!
//! A kernel `k` on a finite set is *strong* if
//! `k(x,y) >= min(k(x,z), k(z,y))` for every triple: no third object is
//! more similar to both `x` and `y` than they are to each other. A
//! *hierarchy* is a rooted tree whose leaves carry the objects, with a
//! weight function that never decreases from the root towards the
//! leaves; it induces the kernel `k(x,y) = w(lca(x,y))`.
//!
//! The two notions coincide: every induced kernel is strong, and
//! [`build_hierarchy`] reconstructs a hierarchy for any strong kernel
//! matrix by successive insertion. The per-node weight increments
//! `omega(v) = w(v) - w(parent(v))` give an explicit feature map
//! ([`Hierarchy::feature_map`]) with `phi(x) . phi(y) = k(x,y)`, which
//! is what makes these kernels usable as optimal-assignment base
//! kernels downstream.

use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

static NEXT_HIERARCHY_ID: AtomicU64 = AtomicU64::new(1);

/// Errors for kernel matrices and hierarchy operations.
#[derive(Debug, Error)]
pub enum HierarchyError {
    #[error("invalid kernel matrix: {0}")]
    InvalidKernelMatrix(String),
    #[error("kernel is not strong; witness triple ({0}, {1}, {2})")]
    NotStrong(usize, usize, usize),
    #[error("unknown object id {0}")]
    UnknownObject(usize),
    #[error("unknown node id {0}")]
    UnknownNode(u32),
    #[error("invalid hierarchy: {0}")]
    InvalidHierarchy(String),
    #[error("hierarchy text, line {line}: {message}")]
    Text { line: usize, message: String },
}

/// A symmetric, nonnegative kernel matrix over objects `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    n: usize,
    values: Vec<f64>,
}

impl KernelMatrix {
    /// Validates symmetry, nonnegativity and finiteness.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, HierarchyError> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(HierarchyError::InvalidKernelMatrix(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
        }
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let v = rows[i][j];
                if !v.is_finite() || v < 0.0 {
                    return Err(HierarchyError::InvalidKernelMatrix(format!(
                        "entry ({i}, {j}) = {v} is not a nonnegative finite value"
                    )));
                }
                if rows[j][i] != v {
                    return Err(HierarchyError::InvalidKernelMatrix(format!(
                        "asymmetry at ({i}, {j}): {v} vs {}",
                        rows[j][i]
                    )));
                }
                values[i * n + j] = v;
            }
        }
        Ok(KernelMatrix { n, values })
    }

    pub(crate) fn from_symmetric_unchecked(n: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), n * n);
        KernelMatrix { n, values }
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

    /// True when every entry is an integer value.
    pub fn is_integral(&self) -> bool {
        self.values.iter().all(|v| v.fract() == 0.0)
    }

    /// Number of distinct values the kernel takes.
    pub fn image_size(&self) -> usize {
        let mut vals = self.values.clone();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        vals.len()
    }
}

/// Outcome of the strong-kernel test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strongness {
    Strong,
    /// `k(x,y) < min(k(x,z), k(z,y))` for this triple.
    Violation {
        x: usize,
        y: usize,
        z: usize,
    },
}

impl Strongness {
    pub fn is_strong(&self) -> bool {
        matches!(self, Strongness::Strong)
    }

    pub fn witness(&self) -> Option<(usize, usize, usize)> {
        match *self {
            Strongness::Strong => None,
            Strongness::Violation { x, y, z } => Some((x, y, z)),
        }
    }
}

fn auto_tolerance(k: &KernelMatrix) -> f64 {
    // Integer-valued matrices are compared exactly; floating inputs get
    // a little slack for accumulated rounding.
    if k.is_integral() {
        0.0
    } else {
        1e-12
    }
}

/// Tests the strong-kernel inequality over all triples.
///
/// Exact comparison for integer-valued matrices, relative tolerance
/// `1e-12` otherwise. Note that the triple `(x, x, y)` encodes the
/// self-similarity requirement `k(x,x) >= k(x,y)`.
pub fn check_strong(k: &KernelMatrix) -> Strongness {
    check_strong_with_tolerance(k, auto_tolerance(k))
}

/// Same as [`check_strong`] with an explicit relative tolerance: a
/// triple counts as violated only if the deficit exceeds
/// `rel_tol * max(1, |values involved|)`.
pub fn check_strong_with_tolerance(k: &KernelMatrix, rel_tol: f64) -> Strongness {
    let n = k.n();
    for x in 0..n {
        for y in x..n {
            let kxy = k.get(x, y);
            for z in 0..n {
                let kxz = k.get(x, z);
                let kzy = k.get(z, y);
                let bound = kxz.min(kzy);
                let slack = rel_tol * 1.0_f64.max(kxy.abs()).max(bound.abs());
                if kxy < bound - slack {
                    return Strongness::Violation { x, y, z };
                }
            }
        }
    }
    Strongness::Strong
}

/// A rooted weighted tree over leaf objects.
///
/// Weights are nondecreasing from root to leaves; `parent(root) ==
/// root`. Object ids are dense `0..num_objects`; several objects may
/// share a leaf (merged leaves with multiplicity).
#[derive(Debug, Clone)]
pub struct Hierarchy {
    id: u64,
    root: u32,
    parent: Vec<u32>,
    weight: Vec<f64>,
    depth: Vec<u32>,
    children: Vec<Vec<u32>>,
    leaf_of: Vec<u32>,
    multiplicity: Vec<u32>,
}

impl Hierarchy {
    fn from_parts(
        parent: Vec<u32>,
        weight: Vec<f64>,
        objects: &[(usize, u32)],
    ) -> Result<Self, HierarchyError> {
        let n = parent.len();
        if n == 0 || weight.len() != n {
            return Err(HierarchyError::InvalidHierarchy(
                "need matching, nonempty parent and weight arrays".into(),
            ));
        }
        let mut root = None;
        for (v, &p) in parent.iter().enumerate() {
            if p as usize >= n {
                return Err(HierarchyError::InvalidHierarchy(format!(
                    "node {v} has out-of-range parent {p}"
                )));
            }
            if p as usize == v && root.replace(v as u32).is_some() {
                return Err(HierarchyError::InvalidHierarchy(
                    "more than one root".into(),
                ));
            }
        }
        let root = root.ok_or_else(|| HierarchyError::InvalidHierarchy("no root".into()))?;

        let mut children = vec![Vec::new(); n];
        for (v, &p) in parent.iter().enumerate() {
            if v as u32 != root {
                children[p as usize].push(v as u32);
            }
        }

        // Depth by traversal; a node left unvisited means a cycle or a
        // second component.
        let mut depth = vec![u32::MAX; n];
        depth[root as usize] = 0;
        let mut stack = vec![root];
        let mut visited = 1usize;
        while let Some(v) = stack.pop() {
            for &c in &children[v as usize] {
                depth[c as usize] = depth[v as usize] + 1;
                visited += 1;
                stack.push(c);
            }
        }
        if visited != n {
            return Err(HierarchyError::InvalidHierarchy(
                "parent links contain a cycle or a disconnected node".into(),
            ));
        }

        for v in 0..n {
            let w = weight[v];
            if !w.is_finite() || w < 0.0 {
                return Err(HierarchyError::InvalidHierarchy(format!(
                    "weight of node {v} is {w}, expected nonnegative finite"
                )));
            }
            let p = parent[v] as usize;
            if w < weight[p] {
                return Err(HierarchyError::InvalidHierarchy(format!(
                    "weight decreases towards leaf: w({v}) = {w} < w(parent) = {}",
                    weight[p]
                )));
            }
        }

        let m = objects.len();
        let mut leaf_of = vec![u32::MAX; m];
        let mut multiplicity = vec![0u32; n];
        for &(obj, node) in objects {
            if obj >= m {
                return Err(HierarchyError::InvalidHierarchy(format!(
                    "object ids must be dense 0..{m}, got {obj}"
                )));
            }
            if node as usize >= n {
                return Err(HierarchyError::InvalidHierarchy(format!(
                    "object {obj} placed on unknown node {node}"
                )));
            }
            if !children[node as usize].is_empty() {
                return Err(HierarchyError::InvalidHierarchy(format!(
                    "object {obj} placed on inner node {node}"
                )));
            }
            if leaf_of[obj] != u32::MAX {
                return Err(HierarchyError::InvalidHierarchy(format!(
                    "object {obj} assigned to two leaves"
                )));
            }
            leaf_of[obj] = node;
            multiplicity[node as usize] += 1;
        }
        for (obj, &node) in leaf_of.iter().enumerate() {
            if node == u32::MAX {
                return Err(HierarchyError::InvalidHierarchy(format!(
                    "object {obj} was never placed"
                )));
            }
        }
        for v in 0..n {
            if children[v].is_empty() && multiplicity[v] == 0 && !(n == 1 && m == 0) {
                return Err(HierarchyError::InvalidHierarchy(format!(
                    "node {v} is childless but carries no object"
                )));
            }
        }

        Ok(Hierarchy {
            id: NEXT_HIERARCHY_ID.fetch_add(1, Ordering::Relaxed),
            root,
            parent,
            weight,
            depth,
            children,
            leaf_of,
            multiplicity,
        })
    }

    /// Identity used to detect mixing of histograms or feature vectors
    /// from different hierarchies.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    pub fn num_objects(&self) -> usize {
        self.leaf_of.len()
    }

    pub fn root(&self) -> u32 {
        self.root
    }

    pub fn parent(&self, v: u32) -> u32 {
        self.parent[v as usize]
    }

    pub fn weight(&self, v: u32) -> f64 {
        self.weight[v as usize]
    }

    pub fn depth(&self, v: u32) -> u32 {
        self.depth[v as usize]
    }

    pub fn children(&self, v: u32) -> &[u32] {
        &self.children[v as usize]
    }

    pub fn is_leaf(&self, v: u32) -> bool {
        self.children[v as usize].is_empty()
    }

    /// Number of objects merged into leaf `v` (0 for inner nodes).
    pub fn multiplicity(&self, v: u32) -> u32 {
        self.multiplicity[v as usize]
    }

    /// The weight increment `omega(v) = w(v) - w(parent(v))`;
    /// `omega(root) = w(root)`.
    pub fn additive_weight(&self, v: u32) -> f64 {
        let v = v as usize;
        if v as u32 == self.root {
            self.weight[v]
        } else {
            self.weight[v] - self.weight[self.parent[v] as usize]
        }
    }

    pub fn leaf_of(&self, object: usize) -> Result<u32, HierarchyError> {
        self.leaf_of
            .get(object)
            .copied()
            .ok_or(HierarchyError::UnknownObject(object))
    }

    /// Deepest common ancestor of two nodes.
    pub fn lca(&self, u: u32, v: u32) -> Result<u32, HierarchyError> {
        let n = self.node_count() as u32;
        if u >= n {
            return Err(HierarchyError::UnknownNode(u));
        }
        if v >= n {
            return Err(HierarchyError::UnknownNode(v));
        }
        let (mut a, mut b) = (u, v);
        while self.depth[a as usize] > self.depth[b as usize] {
            a = self.parent[a as usize];
        }
        while self.depth[b as usize] > self.depth[a as usize] {
            b = self.parent[b as usize];
        }
        while a != b {
            a = self.parent[a as usize];
            b = self.parent[b as usize];
        }
        Ok(a)
    }

    /// The induced kernel value `w(lca(leaf(x), leaf(y)))`.
    pub fn induced(&self, x: usize, y: usize) -> Result<f64, HierarchyError> {
        let lx = self.leaf_of(x)?;
        let ly = self.leaf_of(y)?;
        Ok(self.weight[self.lca(lx, ly)? as usize])
    }

    /// The full induced kernel matrix over all objects.
    pub fn induced_matrix(&self) -> KernelMatrix {
        let m = self.num_objects();
        let mut values = vec![0.0; m * m];
        for x in 0..m {
            for y in x..m {
                let v = self.induced(x, y).expect("objects are dense");
                values[x * m + y] = v;
                values[y * m + x] = v;
            }
        }
        KernelMatrix::from_symmetric_unchecked(m, values)
    }

    /// The explicit feature vector of object `x`: component
    /// `sqrt(omega(v))` on every node of the root path of `leaf(x)`,
    /// zero elsewhere.
    pub fn feature_map(&self, x: usize) -> Result<FeatureVector, HierarchyError> {
        let leaf = self.leaf_of(x)?;
        let mut entries = Vec::with_capacity(self.depth[leaf as usize] as usize + 1);
        let mut v = leaf;
        loop {
            entries.push((v, self.additive_weight(v)));
            if v == self.root {
                break;
            }
            v = self.parent[v as usize];
        }
        entries.sort_unstable_by_key(|&(v, _)| v);
        Ok(FeatureVector {
            hierarchy_id: self.id,
            node_count: self.node_count(),
            entries,
        })
    }

    /// Checks that the induced kernel takes at most `2n - 1` distinct
    /// values for `n` objects (multiplicities included).
    pub fn respects_image_bound(&self) -> bool {
        let n = self.num_objects();
        if n == 0 {
            return true;
        }
        let leaves: Vec<u32> = (0..self.node_count() as u32)
            .filter(|&v| self.multiplicity[v as usize] > 0)
            .collect();
        let mut values = Vec::new();
        for (i, &a) in leaves.iter().enumerate() {
            for &b in &leaves[i..] {
                let lca = self.lca(a, b).expect("valid nodes");
                values.push(self.weight[lca as usize]);
            }
        }
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        values.len() < 2 * n
    }

    /// Applies the two kernel-preserving rewrites until a fixpoint: a
    /// non-root inner node with a single child is removed, and an inner
    /// node sharing its parent's weight is merged into the parent.
    /// Leaves always survive (their weight is a self-similarity), and
    /// so does the root.
    pub fn canonicalized(&self) -> Hierarchy {
        let n = self.node_count();
        let mut parent = self.parent.clone();
        let weight = self.weight.clone();
        let mut children = self.children.clone();
        let mut alive = vec![true; n];
        let root = self.root as usize;

        loop {
            let mut changed = false;
            for v in 0..n {
                if !alive[v] || v == root || children[v].is_empty() {
                    continue;
                }
                let p = parent[v] as usize;
                if children[v].len() == 1 {
                    let c = children[v][0];
                    children[p].retain(|&x| x != v as u32);
                    children[p].push(c);
                    parent[c as usize] = p as u32;
                    children[v].clear();
                    alive[v] = false;
                    changed = true;
                } else if weight[v] == weight[p] {
                    let moved = std::mem::take(&mut children[v]);
                    for &c in &moved {
                        parent[c as usize] = p as u32;
                    }
                    children[p].retain(|&x| x != v as u32);
                    children[p].extend(moved);
                    alive[v] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        // Compact ids in a deterministic traversal order.
        let mut order = Vec::with_capacity(n);
        let mut stack = vec![root as u32];
        while let Some(v) = stack.pop() {
            order.push(v);
            let mut kids = children[v as usize].clone();
            kids.sort_unstable_by(|a, b| b.cmp(a));
            stack.extend(kids);
        }
        let mut new_id = vec![u32::MAX; n];
        for (i, &v) in order.iter().enumerate() {
            new_id[v as usize] = i as u32;
        }
        let new_parent: Vec<u32> = order
            .iter()
            .map(|&v| new_id[parent[v as usize] as usize])
            .collect();
        let new_weight: Vec<f64> = order.iter().map(|&v| weight[v as usize]).collect();
        let objects: Vec<(usize, u32)> = self
            .leaf_of
            .iter()
            .enumerate()
            .map(|(obj, &leaf)| (obj, new_id[leaf as usize]))
            .collect();
        Hierarchy::from_parts(new_parent, new_weight, &objects)
            .expect("rewrites preserve hierarchy invariants")
    }

    /// Serializes one node per line: `id parentId weight` for inner
    /// nodes, `id parentId weight objectId multiplicity` for leaves
    /// (`objectId` is the smallest object on the leaf).
    pub fn to_text(&self) -> String {
        let mut representative = vec![usize::MAX; self.node_count()];
        for (obj, &leaf) in self.leaf_of.iter().enumerate() {
            let r = &mut representative[leaf as usize];
            if *r == usize::MAX {
                *r = obj;
            }
        }
        let mut out = String::new();
        for (v, &mult) in self.multiplicity.iter().enumerate() {
            use std::fmt::Write;
            if mult > 0 {
                let _ = writeln!(
                    out,
                    "{v} {} {} {} {}",
                    self.parent[v], self.weight[v], representative[v], mult
                );
            } else {
                let _ = writeln!(out, "{v} {} {}", self.parent[v], self.weight[v]);
            }
        }
        out
    }

    /// Parses the [`Hierarchy::to_text`] format. Leaves with
    /// multiplicity above one get synthetic object ids for the merged
    /// objects (the listed id is kept); round trips are exact whenever
    /// every leaf carries a single object.
    pub fn from_text(text: &str) -> Result<Hierarchy, HierarchyError> {
        // (id, parent, weight, leaf payload).
        type NodeRow = (u32, u32, f64, Option<(usize, u32)>);
        let mut rows: Vec<NodeRow> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let err = |message: String| HierarchyError::Text {
                line: i + 1,
                message,
            };
            if toks.len() != 3 && toks.len() != 5 {
                return Err(err(format!("expected 3 or 5 fields, got {}", toks.len())));
            }
            let id: u32 = toks[0].parse().map_err(|_| err("bad node id".into()))?;
            let parent: u32 = toks[1].parse().map_err(|_| err("bad parent id".into()))?;
            let weight: f64 = toks[2].parse().map_err(|_| err("bad weight".into()))?;
            let leaf = if toks.len() == 5 {
                let obj: usize = toks[3].parse().map_err(|_| err("bad object id".into()))?;
                let mult: u32 = toks[4]
                    .parse()
                    .map_err(|_| err("bad multiplicity".into()))?;
                if mult == 0 {
                    return Err(err("multiplicity must be positive".into()));
                }
                Some((obj, mult))
            } else {
                None
            };
            rows.push((id, parent, weight, leaf));
        }
        let n = rows.len();
        let mut parent = vec![u32::MAX; n];
        let mut weight = vec![0.0; n];
        let mut leaf_info = vec![None; n];
        for &(id, p, w, leaf) in &rows {
            if id as usize >= n || parent[id as usize] != u32::MAX {
                return Err(HierarchyError::Text {
                    line: 0,
                    message: format!("node ids must be dense and unique, got {id}"),
                });
            }
            parent[id as usize] = p;
            weight[id as usize] = w;
            leaf_info[id as usize] = leaf;
        }

        let total: usize = leaf_info
            .iter()
            .flatten()
            .map(|&(_, mult)| mult as usize)
            .sum();
        let mut taken = vec![false; total];
        let mut objects: Vec<(usize, u32)> = Vec::with_capacity(total);
        for (v, info) in leaf_info.iter().enumerate() {
            if let Some((obj, _)) = info {
                if *obj >= total || taken[*obj] {
                    return Err(HierarchyError::Text {
                        line: 0,
                        message: format!("object id {obj} out of range or repeated"),
                    });
                }
                taken[*obj] = true;
                objects.push((*obj, v as u32));
            }
        }
        // Hand the unused dense ids to merged leaves in node order.
        let mut free = (0..total).filter(|&o| !taken[o]);
        for (v, info) in leaf_info.iter().enumerate() {
            if let Some((_, mult)) = info {
                for _ in 1..*mult {
                    let o = free.next().expect("counted above");
                    objects.push((o, v as u32));
                }
            }
        }
        Hierarchy::from_parts(parent, weight, &objects)
    }
}

/// Incremental construction of a [`Hierarchy`].
#[derive(Debug, Default)]
pub struct HierarchyBuilder {
    parent: Vec<u32>,
    weight: Vec<f64>,
    objects: Vec<(usize, u32)>,
    has_root: bool,
}

impl HierarchyBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the root; must be the first node.
    pub fn add_root(&mut self, weight: f64) -> u32 {
        assert!(!self.has_root, "root already added");
        self.has_root = true;
        self.parent.push(0);
        self.weight.push(weight);
        0
    }

    pub fn add_child(&mut self, parent: u32, weight: f64) -> u32 {
        assert!(
            (parent as usize) < self.parent.len(),
            "unknown parent node {parent}"
        );
        let id = self.parent.len() as u32;
        self.parent.push(parent);
        self.weight.push(weight);
        id
    }

    /// Assigns an object to a node, which must stay childless.
    pub fn place_object(&mut self, node: u32, object: usize) {
        assert!((node as usize) < self.parent.len(), "unknown node {node}");
        self.objects.push((object, node));
    }

    pub fn build(self) -> Result<Hierarchy, HierarchyError> {
        Hierarchy::from_parts(self.parent, self.weight, &self.objects)
    }
}

/// A sparse feature vector of a strong kernel: component
/// `sqrt(omega(v))` on the root path of one leaf.
///
/// Components are stored squared (`omega` itself) so that dot products
/// of matching entries come out exact for integer weights.
#[derive(Debug, Clone)]
pub struct FeatureVector {
    hierarchy_id: u64,
    node_count: usize,
    entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    /// Component value `sqrt(omega(v))`, zero off the path.
    pub fn component(&self, v: u32) -> f64 {
        match self.entries.binary_search_by_key(&v, |&(n, _)| n) {
            Ok(i) => self.entries[i].1.sqrt(),
            Err(_) => 0.0,
        }
    }

    /// Nodes on the path (support of the vector), with component values.
    pub fn support(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.entries.iter().map(|&(v, w)| (v, w.sqrt()))
    }

    /// Number of path nodes carrying an entry (zero components from
    /// `omega(v) = 0` included).
    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    /// Inner product; both vectors must come from the same hierarchy.
    pub fn dot(&self, other: &FeatureVector) -> f64 {
        assert_eq!(
            self.hierarchy_id, other.hierarchy_id,
            "feature vectors from different hierarchies"
        );
        let mut sum = 0.0;
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() && j < other.entries.len() {
            let (a, wa) = self.entries[i];
            let (b, wb) = other.entries[j];
            match a.cmp(&b) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += (wa * wb).sqrt();
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }

    /// Dense copy, mostly for inspection.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.node_count];
        for &(v, w) in &self.entries {
            out[v as usize] = w.sqrt();
        }
        out
    }
}

/// Reconstructs a hierarchy inducing the strong kernel `k` by inserting
/// objects in input order.
///
/// For each new object `z` the already-inserted objects most similar to
/// `z` form the leaf set of a unique node `b`; a fresh parent with
/// weight `max_y k(y,z)` is spliced between `b` and its parent and `z`
/// is attached below it with weight `k(z,z)`. Fails with a witness
/// triple when `k` is not strong.
pub fn build_hierarchy(k: &KernelMatrix) -> Result<Hierarchy, HierarchyError> {
    build_hierarchy_with_tolerance(k, auto_tolerance(k))
}

/// [`build_hierarchy`] with an explicit relative tolerance used both
/// for the strongness pre-check and for grouping maximal kernel values.
pub fn build_hierarchy_with_tolerance(
    k: &KernelMatrix,
    rel_tol: f64,
) -> Result<Hierarchy, HierarchyError> {
    let n = k.n();
    if n == 0 {
        return Err(HierarchyError::InvalidKernelMatrix(
            "cannot build a hierarchy over zero objects".into(),
        ));
    }
    if let Strongness::Violation { x, y, z } = check_strong_with_tolerance(k, rel_tol) {
        return Err(HierarchyError::NotStrong(x, y, z));
    }

    // Growing arrays; node 0 is the leaf of object 0.
    let mut parent: Vec<u32> = vec![0];
    let mut weight: Vec<f64> = vec![k.get(0, 0)];
    let mut children: Vec<Vec<u32>> = vec![Vec::new()];
    let mut leaf_node: Vec<u32> = vec![0];
    let mut root: u32 = 0;

    let depth_of = |parent: &[u32], mut v: u32| -> u32 {
        let mut d = 0;
        while parent[v as usize] != v {
            v = parent[v as usize];
            d += 1;
        }
        d
    };

    for z in 1..n {
        // Most similar already-inserted objects.
        let mut k_max = f64::NEG_INFINITY;
        for y in 0..z {
            k_max = k_max.max(k.get(y, z));
        }
        let slack = rel_tol * 1.0_f64.max(k_max.abs());
        let group: Vec<usize> = (0..z).filter(|&y| k.get(y, z) >= k_max - slack).collect();

        // The unique node whose leaves are exactly the group.
        let mut b = leaf_node[group[0]];
        for &y in &group[1..] {
            let mut a = b;
            let mut c = leaf_node[y];
            let (mut da, mut dc) = (depth_of(&parent, a), depth_of(&parent, c));
            while da > dc {
                a = parent[a as usize];
                da -= 1;
            }
            while dc > da {
                c = parent[c as usize];
                dc -= 1;
            }
            while a != c {
                a = parent[a as usize];
                c = parent[c as usize];
            }
            b = a;
        }
        // Count objects under b; anything beyond the group means the
        // unique splice point does not exist.
        let mut under = 0usize;
        let mut stack = vec![b];
        while let Some(v) = stack.pop() {
            if children[v as usize].is_empty() {
                under += 1;
            }
            stack.extend(children[v as usize].iter().copied());
        }
        if under != group.len() {
            let witness = match check_strong(k) {
                Strongness::Violation { x, y, z } => (x, y, z),
                Strongness::Strong => (group[0], z, z),
            };
            return Err(HierarchyError::NotStrong(witness.0, witness.1, witness.2));
        }

        let p = parent.len() as u32;
        parent.push(parent[b as usize]);
        weight.push(k_max);
        children.push(vec![b]);
        if b == root {
            parent[p as usize] = p;
            root = p;
        } else {
            let old = parent[b as usize] as usize;
            let slot = children[old]
                .iter()
                .position(|&c| c == b)
                .expect("child link");
            children[old][slot] = p;
        }
        parent[b as usize] = p;

        let leaf = parent.len() as u32;
        parent.push(p);
        weight.push(k.get(z, z));
        children.push(Vec::new());
        children[p as usize].push(leaf);
        leaf_node.push(leaf);
    }

    let objects: Vec<(usize, u32)> = leaf_node.iter().enumerate().map(|(o, &l)| (o, l)).collect();
    Hierarchy::from_parts(parent, weight, &objects).map_err(|_| match check_strong(k) {
        Strongness::Violation { x, y, z } => HierarchyError::NotStrong(x, y, z),
        Strongness::Strong => {
            HierarchyError::InvalidHierarchy("construction produced an inconsistent tree".into())
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dirac(n: usize) -> KernelMatrix {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        KernelMatrix::from_rows(&rows).unwrap()
    }

    /// Root weight 1 with two leaves of weights 2 and 3.
    fn two_leaf_hierarchy() -> Hierarchy {
        let mut b = HierarchyBuilder::new();
        let root = b.add_root(1.0);
        let x = b.add_child(root, 2.0);
        let y = b.add_child(root, 3.0);
        b.place_object(x, 0);
        b.place_object(y, 1);
        b.build().unwrap()
    }

    #[test]
    fn dirac_and_constant_matrices_are_strong() {
        assert!(check_strong(&dirac(3)).is_strong());
        let ones = KernelMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(check_strong(&ones).is_strong());
    }

    #[test]
    fn violation_reports_a_witness_triple() {
        let k = KernelMatrix::from_rows(&[
            vec![1.0, 0.2, 0.9],
            vec![0.2, 1.0, 0.8],
            vec![0.9, 0.8, 1.0],
        ])
        .unwrap();
        match check_strong(&k) {
            Strongness::Violation { x, y, z } => {
                assert_eq!((x, y, z), (0, 1, 2));
                assert!(k.get(x, y) < k.get(x, z).min(k.get(z, y)));
            }
            Strongness::Strong => panic!("matrix is not strong"),
        }
    }

    #[test]
    fn self_similarity_violations_are_caught() {
        // k(0,1) > k(0,0): the triple (0,0,1) witnesses it.
        let k = KernelMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 3.0]]).unwrap();
        assert_eq!(check_strong(&k), Strongness::Violation { x: 0, y: 0, z: 1 });
    }

    #[test]
    fn kernel_matrix_rejects_bad_input() {
        assert!(KernelMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 1.0]]).is_err());
        assert!(KernelMatrix::from_rows(&[vec![-1.0]]).is_err());
        assert!(KernelMatrix::from_rows(&[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn star_hierarchy_induces_dirac() {
        let mut b = HierarchyBuilder::new();
        let root = b.add_root(0.0);
        for obj in 0..2 {
            let leaf = b.add_child(root, 1.0);
            b.place_object(leaf, obj);
        }
        let h = b.build().unwrap();
        let m = h.induced_matrix();
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(1, 1), 1.0);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn induced_self_value_is_leaf_weight() {
        let h = two_leaf_hierarchy();
        assert_eq!(h.induced(0, 0).unwrap(), 2.0);
        assert_eq!(h.induced(1, 1).unwrap(), 3.0);
        assert_eq!(h.induced(0, 1).unwrap(), 1.0);
        assert!(matches!(
            h.induced(0, 7),
            Err(HierarchyError::UnknownObject(7))
        ));
    }

    #[test]
    fn lca_basics() {
        let mut b = HierarchyBuilder::new();
        let root = b.add_root(0.0);
        let a = b.add_child(root, 1.0);
        let leaf = b.add_child(a, 2.0);
        let sib = b.add_child(root, 1.0);
        b.place_object(leaf, 0);
        b.place_object(sib, 1);
        let h = b.build().unwrap();
        assert_eq!(h.lca(leaf, leaf).unwrap(), leaf);
        assert_eq!(h.lca(leaf, sib).unwrap(), root);
        assert_eq!(h.lca(a, leaf).unwrap(), a);
        assert_eq!(h.lca(a, root).unwrap(), root);
        assert!(matches!(h.lca(99, 0), Err(HierarchyError::UnknownNode(99))));
    }

    #[test]
    fn build_single_object() {
        let k = KernelMatrix::from_rows(&[vec![3.0]]).unwrap();
        let h = build_hierarchy(&k).unwrap();
        assert_eq!(h.node_count(), 1);
        assert_eq!(h.weight(h.root()), 3.0);
        assert_eq!(h.induced(0, 0).unwrap(), 3.0);
    }

    #[test]
    fn build_two_objects() {
        let k = KernelMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let h = build_hierarchy(&k).unwrap();
        assert_eq!(h.weight(h.root()), 1.0);
        assert_eq!(h.induced_matrix(), k);
    }

    #[test]
    fn build_rejects_non_strong_with_witness() {
        let k = KernelMatrix::from_rows(&[
            vec![1.0, 0.2, 0.9],
            vec![0.2, 1.0, 0.8],
            vec![0.9, 0.8, 1.0],
        ])
        .unwrap();
        match build_hierarchy(&k) {
            Err(HierarchyError::NotStrong(x, y, z)) => {
                assert!(k.get(x, y) < k.get(x, z).min(k.get(z, y)));
            }
            other => panic!("expected NotStrong, got {other:?}"),
        }
    }

    #[test]
    fn canonicalize_removes_single_child_chain() {
        let mut b = HierarchyBuilder::new();
        let root = b.add_root(1.0);
        let a = b.add_child(root, 1.0);
        let leaf = b.add_child(a, 2.0);
        b.place_object(leaf, 0);
        let h = b.build().unwrap();
        let c = h.canonicalized();
        assert_eq!(c.node_count(), 2);
        assert_eq!(c.weight(c.root()), 1.0);
        assert_eq!(c.induced(0, 0).unwrap(), 2.0);
    }

    #[test]
    fn canonicalize_merges_equal_weight_inner_nodes() {
        let mut b = HierarchyBuilder::new();
        let root = b.add_root(1.0);
        let mid = b.add_child(root, 1.0);
        let l0 = b.add_child(mid, 2.0);
        let l1 = b.add_child(mid, 2.0);
        let l2 = b.add_child(root, 3.0);
        b.place_object(l0, 0);
        b.place_object(l1, 1);
        b.place_object(l2, 2);
        let h = b.build().unwrap();
        let c = h.canonicalized();
        assert_eq!(c.node_count(), 4);
        assert_eq!(c.induced_matrix(), h.induced_matrix());
    }

    #[test]
    fn canonicalize_is_idempotent_and_preserves_kernel() {
        let h = two_leaf_hierarchy();
        let c1 = h.canonicalized();
        let c2 = c1.canonicalized();
        assert_eq!(c1.node_count(), c2.node_count());
        assert_eq!(c1.induced_matrix(), h.induced_matrix());
        assert_eq!(c2.induced_matrix(), h.induced_matrix());
    }

    #[test]
    fn feature_map_worked_example() {
        let h = two_leaf_hierarchy();
        let fx = h.feature_map(0).unwrap();
        let fy = h.feature_map(1).unwrap();
        // omega: root 1, leaf x 1, leaf y 2.
        assert_eq!(fx.to_dense(), vec![1.0, 1.0, 0.0]);
        assert_eq!(fy.to_dense()[0], 1.0);
        assert_eq!(fy.to_dense()[1], 0.0);
        assert!((fy.to_dense()[2] - 2.0_f64.sqrt()).abs() < 1e-15);
        assert_eq!(fx.dot(&fy), 1.0);
        assert_eq!(fx.dot(&fx), 2.0);
        assert_eq!(fy.dot(&fy), 3.0);
    }

    #[test]
    fn feature_map_support_is_the_root_path() {
        let mut b = HierarchyBuilder::new();
        let root = b.add_root(1.0);
        let a = b.add_child(root, 1.0); // omega = 0, still on the path
        let leaf = b.add_child(a, 2.0);
        b.place_object(leaf, 0);
        let h = b.build().unwrap();
        let f = h.feature_map(0).unwrap();
        assert_eq!(f.support_len(), h.depth(leaf) as usize + 1);
        assert_eq!(f.component(a), 0.0);
    }

    #[test]
    fn image_bound_examples() {
        let mut b = HierarchyBuilder::new();
        let root = b.add_root(0.0);
        for obj in 0..4 {
            let leaf = b.add_child(root, 1.0);
            b.place_object(leaf, obj);
        }
        let h = b.build().unwrap();
        assert!(h.respects_image_bound());
        assert_eq!(h.induced_matrix().image_size(), 2);

        let mut b = HierarchyBuilder::new();
        let r = b.add_root(5.0);
        b.place_object(r, 0);
        let single = b.build().unwrap();
        assert!(single.respects_image_bound());
        assert_eq!(single.induced_matrix().image_size(), 1);
    }

    #[test]
    fn builder_rejects_broken_invariants() {
        // Decreasing weight towards the leaf.
        let mut b = HierarchyBuilder::new();
        let root = b.add_root(2.0);
        let leaf = b.add_child(root, 1.0);
        b.place_object(leaf, 0);
        assert!(b.build().is_err());

        // Object on an inner node.
        let mut b = HierarchyBuilder::new();
        let root = b.add_root(0.0);
        let inner = b.add_child(root, 1.0);
        let leaf = b.add_child(inner, 2.0);
        b.place_object(inner, 0);
        b.place_object(leaf, 1);
        assert!(b.build().is_err());

        // Sparse object ids.
        let mut b = HierarchyBuilder::new();
        let root = b.add_root(0.0);
        let leaf = b.add_child(root, 1.0);
        b.place_object(leaf, 3);
        assert!(b.build().is_err());
    }

    #[test]
    fn text_round_trip_single_objects() {
        let h = two_leaf_hierarchy();
        let text = h.to_text();
        let back = Hierarchy::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.induced_matrix(), h.induced_matrix());
    }

    #[test]
    fn text_round_trip_with_multiplicity() {
        let text = "0 0 0\n1 0 1 0 2\n2 0 3 2 1\n";
        let h = Hierarchy::from_text(text).unwrap();
        assert_eq!(h.num_objects(), 3);
        assert_eq!(h.multiplicity(1), 2);
        assert_eq!(h.to_text(), text);
        // Objects 0 and 1 share the merged leaf.
        assert_eq!(h.induced(0, 1).unwrap(), 1.0);
        assert_eq!(h.induced(2, 2).unwrap(), 3.0);
    }
}
