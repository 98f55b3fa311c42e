//! Weisfeiler-Lehman colour refinement and its hierarchy.
//!
//! Starting from the vertex labels, each iteration recolours a vertex
//! by an injective id of (own colour, sorted neighbour colours). The
//! dictionary is shared across the whole graph collection so colours
//! stay comparable between graphs, and each iteration draws its ids
//! from a fresh block so colours of different iterations never
//! collide.
//!
//! The nested colour classes of iterations `0..=h` form a hierarchy
//! with unit weight steps; the kernel it induces on vertices counts
//! matching colours, `k(u,v) = sum_i delta(l_i(u), l_i(v))`. The
//! artificial root gets weight zero so that vertices sharing no colour
//! have base similarity zero.

use std::collections::HashMap;

use thiserror::Error;

use crate::graph::Graph;
use crate::hierarchy::{Hierarchy, HierarchyBuilder};

#[derive(Debug, Error)]
pub enum WlError {
    #[error("unknown graph index {0}")]
    UnknownGraph(usize),
}

/// Colours of every vertex of every graph for iterations `0..=h`.
#[derive(Debug, Clone)]
pub struct ColourSequence {
    h: usize,
    /// colours[i][g][v]: colour of vertex v of graph g at iteration i.
    colours: Vec<Vec<Vec<u32>>>,
    /// Half-open id block `blocks[i]..blocks[i+1]` per iteration.
    blocks: Vec<u32>,
    /// Global vertex id of the first vertex of each graph, plus the
    /// total count as a final sentinel.
    vertex_offsets: Vec<usize>,
}

impl ColourSequence {
    pub fn h(&self) -> usize {
        self.h
    }

    pub fn num_graphs(&self) -> usize {
        self.vertex_offsets.len() - 1
    }

    pub fn total_vertices(&self) -> usize {
        *self.vertex_offsets.last().unwrap()
    }

    /// Global object id of vertex 0 of this graph in the WL hierarchy.
    pub fn vertex_offset(&self, graph: usize) -> usize {
        self.vertex_offsets[graph]
    }

    pub fn vertex_count(&self, graph: usize) -> usize {
        self.vertex_offsets[graph + 1] - self.vertex_offsets[graph]
    }

    pub fn colour(&self, graph: usize, iteration: usize, vertex: usize) -> u32 {
        self.colours[iteration][graph][vertex]
    }

    pub fn colours_at(&self, graph: usize, iteration: usize) -> &[u32] {
        &self.colours[iteration][graph]
    }

    /// Id block reserved for the given iteration.
    pub fn iteration_block(&self, iteration: usize) -> std::ops::Range<u32> {
        self.blocks[iteration]..self.blocks[iteration + 1]
    }

    /// Total size of the colour id space across all iterations.
    pub fn total_colours(&self) -> u32 {
        *self.blocks.last().unwrap()
    }

    /// Matching-colour count `sum_i delta(l_i(u), l_i(v))`, evaluated
    /// directly from the stored colours.
    pub fn matching_colours(&self, a: (usize, usize), b: (usize, usize)) -> u32 {
        (0..=self.h)
            .filter(|&i| self.colour(a.0, i, a.1) == self.colour(b.0, i, b.1))
            .count() as u32
    }
}

/// Runs `h` refinement iterations over the whole collection at once.
///
/// Iteration 0 is the vertex labels as given. New colours are handed
/// out in first-appearance order over a scan of graphs and vertices,
/// so the output is deterministic.
pub fn refine(graphs: &[Graph], h: usize) -> ColourSequence {
    let mut vertex_offsets = Vec::with_capacity(graphs.len() + 1);
    let mut total = 0usize;
    for g in graphs {
        vertex_offsets.push(total);
        total += g.vertex_count();
    }
    vertex_offsets.push(total);

    let base: Vec<Vec<u32>> = graphs.iter().map(|g| g.labels().to_vec()).collect();
    let base_block = graphs
        .iter()
        .flat_map(|g| g.labels())
        .max()
        .map_or(0, |&m| m + 1);
    let mut blocks = vec![0u32, base_block];
    let mut colours = vec![base];

    for i in 1..=h {
        let prev = &colours[i - 1];
        let offset = *blocks.last().unwrap();
        let mut dictionary: HashMap<(u32, Vec<u32>), u32> = HashMap::new();
        let mut next: Vec<Vec<u32>> = Vec::with_capacity(graphs.len());
        for (gi, g) in graphs.iter().enumerate() {
            let mut row = Vec::with_capacity(g.vertex_count());
            for v in 0..g.vertex_count() {
                let mut neigh: Vec<u32> = g
                    .neighbours(v as u32)
                    .iter()
                    .map(|&u| prev[gi][u as usize])
                    .collect();
                neigh.sort_unstable();
                let signature = (prev[gi][v], neigh);
                let fresh = offset + dictionary.len() as u32;
                row.push(*dictionary.entry(signature).or_insert(fresh));
            }
            next.push(row);
        }
        blocks.push(offset + dictionary.len() as u32);
        colours.push(next);
    }

    ColourSequence {
        h,
        colours,
        blocks,
        vertex_offsets,
    }
}

/// Sparse colour counts of one graph over all iterations, sorted by
/// colour id. Total mass is `(h+1) * vertex_count`.
pub fn wl_feature_vector(c: &ColourSequence, graph: usize) -> Result<Vec<(u32, u64)>, WlError> {
    if graph >= c.num_graphs() {
        return Err(WlError::UnknownGraph(graph));
    }
    let mut counts: HashMap<u32, u64> = HashMap::new();
    for i in 0..=c.h {
        for &col in c.colours_at(graph, i) {
            *counts.entry(col).or_insert(0) += 1;
        }
    }
    let mut out: Vec<(u32, u64)> = counts.into_iter().collect();
    out.sort_unstable_by_key(|&(col, _)| col);
    Ok(out)
}

/// Builds the hierarchy of nested colour classes over all vertices of
/// all graphs.
///
/// One node per (iteration, colour class), weight `iteration + 1`,
/// under a weight-0 root; the iteration-`h` classes are the leaves and
/// carry the vertices (several per leaf when their colour sequences
/// coincide). Objects are global vertex ids in graph-major order, see
/// [`ColourSequence::vertex_offset`].
pub fn wl_hierarchy(c: &ColourSequence) -> Hierarchy {
    let mut b = HierarchyBuilder::new();
    let root = b.add_root(0.0);
    let mut node_of: HashMap<u32, u32> = HashMap::new();
    for i in 0..=c.h {
        for g in 0..c.num_graphs() {
            for v in 0..c.colours_at(g, i).len() {
                let col = c.colour(g, i, v);
                if node_of.contains_key(&col) {
                    continue;
                }
                let parent = if i == 0 {
                    root
                } else {
                    node_of[&c.colour(g, i - 1, v)]
                };
                node_of.insert(col, b.add_child(parent, (i + 1) as f64));
            }
        }
    }
    for g in 0..c.num_graphs() {
        let offset = c.vertex_offset(g);
        for v in 0..c.colours_at(g, c.h).len() {
            b.place_object(node_of[&c.colour(g, c.h, v)], offset + v);
        }
    }
    b.build().expect("colour classes nest by construction")
}
