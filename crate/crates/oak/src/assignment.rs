//! Optimal assignment kernels and their evaluation.
//!
//! The optimal assignment kernel of two equal-size sets is the maximum
//! total base-kernel weight over all bijections between them; unequal
//! sets are padded with null objects of zero similarity. For a strong
//! base kernel the value equals the histogram intersection of the two
//! sets' hierarchy histograms, computable in linear time, and an
//! optimal bijection can be read off a bottom-up traversal of the
//! hierarchy. A cubic-time Hungarian solver is provided as the
//! independent oracle for both claims.

use std::collections::{BinaryHeap, HashMap, HashSet};

use thiserror::Error;

use crate::hierarchy::{Hierarchy, HierarchyError, KernelMatrix};

#[derive(Debug, Error)]
pub enum AssignmentError {
    #[error("invalid assignment instance: {0}")]
    InstanceError(String),
    #[error("histograms indexed by different hierarchies")]
    HierarchyMismatch,
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
}

/// A bijection as position pairs into the two input slices; `None`
/// marks a padding null.
pub type Pairing = Vec<(Option<usize>, Option<usize>)>;

/// Extends the smaller multiset with null objects (`None`) so both
/// sides have equal size. Null objects have similarity zero to
/// everything.
pub fn pad(x: &[usize], y: &[usize]) -> (Vec<Option<usize>>, Vec<Option<usize>>) {
    let n = x.len().max(y.len());
    let fill = |s: &[usize]| -> Vec<Option<usize>> {
        s.iter()
            .map(|&o| Some(o))
            .chain(std::iter::repeat(None))
            .take(n)
            .collect()
    };
    (fill(x), fill(y))
}

/// A padded, square assignment instance with all cross similarities
/// materialized.
#[derive(Debug, Clone)]
pub struct AssignmentInstance {
    n: usize,
    x: Vec<Option<usize>>,
    y: Vec<Option<usize>>,
    cross: Vec<f64>,
}

impl AssignmentInstance {
    /// Instance with the hierarchy-induced base kernel.
    pub fn from_hierarchy(
        h: &Hierarchy,
        x: &[usize],
        y: &[usize],
    ) -> Result<Self, AssignmentError> {
        let (px, py) = pad(x, y);
        let n = px.len();
        let mut cross = vec![0.0; n * n];
        for (i, &xo) in px.iter().enumerate() {
            for (j, &yo) in py.iter().enumerate() {
                if let (Some(a), Some(b)) = (xo, yo) {
                    cross[i * n + j] = h.induced(a, b)?;
                }
            }
        }
        Ok(AssignmentInstance {
            n,
            x: px,
            y: py,
            cross,
        })
    }

    /// Instance whose base values come from an explicit kernel matrix
    /// indexed by object id.
    pub fn from_matrix(
        k: &KernelMatrix,
        x: &[usize],
        y: &[usize],
    ) -> Result<Self, AssignmentError> {
        for &o in x.iter().chain(y) {
            if o >= k.n() {
                return Err(AssignmentError::InstanceError(format!(
                    "object id {o} outside kernel matrix of size {}",
                    k.n()
                )));
            }
        }
        let (px, py) = pad(x, y);
        let n = px.len();
        let mut cross = vec![0.0; n * n];
        for (i, &xo) in px.iter().enumerate() {
            for (j, &yo) in py.iter().enumerate() {
                if let (Some(a), Some(b)) = (xo, yo) {
                    cross[i * n + j] = k.get(a, b);
                }
            }
        }
        Ok(AssignmentInstance {
            n,
            x: px,
            y: py,
            cross,
        })
    }

    /// Instance from a raw square cross-similarity matrix.
    pub fn from_cross(rows: &[Vec<f64>]) -> Result<Self, AssignmentError> {
        let n = rows.len();
        let mut cross = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(AssignmentError::InstanceError(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(AssignmentError::InstanceError(format!(
                        "non-finite similarity in row {i}"
                    )));
                }
                cross.push(v);
            }
        }
        let x = (0..n).map(Some).collect();
        let y = (0..n).map(Some).collect();
        Ok(AssignmentInstance { n, x, y, cross })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Similarity of padded elements `i` and `j` (zero if either is a
    /// null object).
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.cross[i * self.n + j]
    }

    /// Padded left multiset; `None` entries are null objects.
    pub fn x(&self) -> &[Option<usize>] {
        &self.x
    }

    pub fn y(&self) -> &[Option<usize>] {
        &self.y
    }

    fn is_integral(&self) -> bool {
        const EXACT: f64 = (1u64 << 52) as f64;
        self.cross
            .iter()
            .all(|v| v.fract() == 0.0 && v.abs() < EXACT)
    }
}

trait HungarianScalar:
    Copy + PartialOrd + std::ops::Add<Output = Self> + std::ops::Sub<Output = Self>
{
    const ZERO: Self;
    const INF: Self;
}

impl HungarianScalar for i64 {
    const ZERO: i64 = 0;
    const INF: i64 = i64::MAX / 4;
}

impl HungarianScalar for f64 {
    const ZERO: f64 = 0.0;
    const INF: f64 = f64::INFINITY;
}

/// Potential-based shortest augmenting paths on the minimization form;
/// `cost` is already negated by the caller. Returns, for each column,
/// the matched row (`n` sentinel arrays are 1-indexed internally).
fn hungarian_min<T, F>(n: usize, cost: F) -> Vec<usize>
where
    T: HungarianScalar,
    F: Fn(usize, usize) -> T,
{
    let mut u = vec![T::ZERO; n + 1];
    let mut v = vec![T::ZERO; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![T::INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = T::INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] = u[p[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    p
}

/// Maximum-weight bijection of a padded instance.
///
/// Maximization by cost negation; instances whose similarities are all
/// integers are solved in exact integer arithmetic. Returns the optimal
/// value and the bijection as `(i, j)` index pairs into the padded
/// multisets, sorted by `i`.
pub fn solve_hungarian(inst: &AssignmentInstance) -> (f64, Vec<(usize, usize)>) {
    let n = inst.n;
    if n == 0 {
        return (0.0, Vec::new());
    }
    let p = if inst.is_integral() {
        hungarian_min(n, |i, j| -(inst.value(i, j) as i64))
    } else {
        hungarian_min(n, |i, j| -inst.value(i, j))
    };
    let mut pairs: Vec<(usize, usize)> = (1..=n).map(|j| (p[j] - 1, j - 1)).collect();
    pairs.sort_unstable();
    let value = pairs.iter().map(|&(i, j)| inst.value(i, j)).sum();
    (value, pairs)
}

const DENSE_THRESHOLD: usize = 64;

#[derive(Debug, Clone)]
enum HistogramRepr {
    /// Node-indexed values, used for hierarchies below 64 nodes.
    Dense(Vec<f64>),
    /// Nonzero entries sorted by node id.
    Sparse(Vec<(u32, f64)>),
}

/// The hierarchy histogram of a multiset `X`: entry `omega(v) * |X_v|`
/// where `X_v` counts the elements whose leaf lies in the subtree of
/// `v`. Equals the elementwise-squared feature maps of the elements,
/// summed.
#[derive(Debug, Clone)]
pub struct Histogram {
    hierarchy_id: u64,
    repr: HistogramRepr,
}

impl Histogram {
    pub fn value(&self, v: u32) -> f64 {
        match &self.repr {
            HistogramRepr::Dense(vals) => vals.get(v as usize).copied().unwrap_or(0.0),
            HistogramRepr::Sparse(entries) => match entries.binary_search_by_key(&v, |&(n, _)| n) {
                Ok(i) => entries[i].1,
                Err(_) => 0.0,
            },
        }
    }

    /// Total mass; equals the self-intersection and, for histograms of
    /// a multiset `X`, the sum of self-similarities of its elements.
    pub fn mass(&self) -> f64 {
        match &self.repr {
            HistogramRepr::Dense(vals) => vals.iter().sum(),
            HistogramRepr::Sparse(entries) => entries.iter().map(|&(_, v)| v).sum(),
        }
    }

    /// Nonzero entries in ascending node order.
    pub fn support(&self) -> Vec<(u32, f64)> {
        match &self.repr {
            HistogramRepr::Dense(vals) => vals
                .iter()
                .enumerate()
                .filter(|&(_, &v)| v != 0.0)
                .map(|(i, &v)| (i as u32, v))
                .collect(),
            HistogramRepr::Sparse(entries) => entries.clone(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.support().is_empty()
    }

    pub fn hierarchy_id(&self) -> u64 {
        self.hierarchy_id
    }
}

/// Builds the histogram of a multiset in one bottom-up pass over the
/// touched paths.
pub fn histogram(h: &Hierarchy, xs: &[usize]) -> Result<Histogram, AssignmentError> {
    let mut counts: HashMap<u32, u64> = HashMap::new();
    for &x in xs {
        *counts.entry(h.leaf_of(x)?).or_insert(0) += 1;
    }

    // Children sit strictly deeper than their parent, so draining by
    // decreasing depth accumulates every subtree count exactly once.
    let mut heap: BinaryHeap<(u32, u32)> = counts.keys().map(|&v| (h.depth(v), v)).collect();
    let mut queued: HashSet<u32> = counts.keys().copied().collect();
    while let Some((_, v)) = heap.pop() {
        if v == h.root() {
            continue;
        }
        let c = counts[&v];
        let p = h.parent(v);
        *counts.entry(p).or_insert(0) += c;
        if queued.insert(p) {
            heap.push((h.depth(p), p));
        }
    }

    let mut entries: Vec<(u32, f64)> = counts
        .into_iter()
        .filter_map(|(v, c)| {
            let w = h.additive_weight(v) * c as f64;
            (w > 0.0).then_some((v, w))
        })
        .collect();
    entries.sort_unstable_by_key(|&(v, _)| v);

    let repr = if h.node_count() < DENSE_THRESHOLD {
        let mut vals = vec![0.0; h.node_count()];
        for &(v, w) in &entries {
            vals[v as usize] = w;
        }
        HistogramRepr::Dense(vals)
    } else {
        HistogramRepr::Sparse(entries)
    };
    Ok(Histogram {
        hierarchy_id: h.id(),
        repr,
    })
}

/// Histogram intersection `sum_v min(g(v), h(v))` of two histograms
/// over the same hierarchy.
pub fn intersect(g: &Histogram, h: &Histogram) -> Result<f64, AssignmentError> {
    if g.hierarchy_id != h.hierarchy_id {
        return Err(AssignmentError::HierarchyMismatch);
    }
    let sum = match (&g.repr, &h.repr) {
        (HistogramRepr::Dense(a), HistogramRepr::Dense(b)) => {
            a.iter().zip(b).map(|(&x, &y)| x.min(y)).sum()
        }
        (HistogramRepr::Sparse(a), HistogramRepr::Sparse(b)) => {
            let mut sum = 0.0;
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
            sum
        }
        // Entries absent on either side contribute min(x, 0) = 0, so
        // walking one support suffices.
        (HistogramRepr::Sparse(a), _) => a.iter().map(|&(v, x)| x.min(h.value(v))).sum(),
        (_, HistogramRepr::Sparse(b)) => b.iter().map(|&(v, y)| y.min(g.value(v))).sum(),
    };
    Ok(sum)
}

/// Elementwise-min sum of two raw nonnegative component vectors; a
/// shorter vector behaves as if padded with zeros.
pub fn histogram_intersection(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x.min(y)).sum()
}

/// The optimal assignment kernel of two multisets under the
/// hierarchy-induced base kernel, evaluated as a histogram
/// intersection in `O(|X| + |Y|)` histogram operations. Padding is
/// implicit: null objects have empty histograms.
pub fn assignment_kernel(h: &Hierarchy, x: &[usize], y: &[usize]) -> Result<f64, AssignmentError> {
    intersect(&histogram(h, x)?, &histogram(h, y)?)
}

/// An optimal bijection constructed bottom-up on the hierarchy.
///
/// Pairs are reported as positions into the original slices (`None`
/// for padding nulls). At every node the number of pairs matched
/// within its subtree is `min(|X_v|, |Y_v|)`; unmatched elements
/// propagate upward and pair in ascending position order, making the
/// output deterministic. The total weight always equals
/// [`assignment_kernel`].
pub fn greedy_assignment(
    h: &Hierarchy,
    x: &[usize],
    y: &[usize],
) -> Result<(f64, Pairing), AssignmentError> {
    let n_nodes = h.node_count();
    let mut pending_x: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    let mut pending_y: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for (pos, &o) in x.iter().enumerate() {
        pending_x[h.leaf_of(o)? as usize].push(pos);
    }
    for (pos, &o) in y.iter().enumerate() {
        pending_y[h.leaf_of(o)? as usize].push(pos);
    }

    let mut order: Vec<u32> = (0..n_nodes as u32).collect();
    order.sort_unstable_by_key(|&v| (std::cmp::Reverse(h.depth(v)), v));

    let mut value = 0.0;
    let mut pairs: Pairing = Vec::new();
    for &v in &order {
        let vi = v as usize;
        let mut xs = std::mem::take(&mut pending_x[vi]);
        let mut ys = std::mem::take(&mut pending_y[vi]);
        xs.sort_unstable();
        ys.sort_unstable();
        let matched = xs.len().min(ys.len());
        for i in 0..matched {
            value += h.weight(v);
            pairs.push((Some(xs[i]), Some(ys[i])));
        }
        if v == h.root() {
            // Surplus on one side meets the padding nulls at weight 0.
            for &p in &xs[matched..] {
                pairs.push((Some(p), None));
            }
            for &p in &ys[matched..] {
                pairs.push((None, Some(p)));
            }
        } else {
            let p = h.parent(v) as usize;
            pending_x[p].extend_from_slice(&xs[matched..]);
            pending_y[p].extend_from_slice(&ys[matched..]);
        }
    }
    Ok((value, pairs))
}
