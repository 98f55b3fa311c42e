//! Oracles, generators and numeric checks used to validate the kernel
//! machinery: an eigenvalue-based positive-semidefiniteness report, a
//! seeded hierarchy generator for property tests, a factorial
//! assignment oracle for small instances, and a wall-clock harness
//! that contrasts linear-time histogram evaluation with the cubic
//! Hungarian baseline.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::assignment::{assignment_kernel, solve_hungarian, AssignmentInstance};
use crate::hierarchy::{Hierarchy, HierarchyBuilder};

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("instance too large for brute force: n = {0} > {MAX_BRUTE_FORCE}")]
    TooLarge(usize),
}

pub const DEFAULT_PSD_TOLERANCE: f64 = 1e-8;
pub const MAX_BRUTE_FORCE: usize = 7;

/// Eigenvalue summary of a symmetric matrix.
#[derive(Debug, Clone, Copy)]
pub struct PsdReport {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Checks positive semidefiniteness via the symmetric eigenvalue
/// spectrum: passed iff `min_eig >= -tolerance * max(1, max_eig)`.
/// The tolerance is relative because kernel magnitudes vary widely
/// with parameters and graph sizes.
pub fn check_psd(rows: &[Vec<f64>], tolerance: f64) -> Result<PsdReport, ValidationError> {
    let n = rows.len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(ValidationError::InvalidMatrix(format!(
                "row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
    }
    for (i, row) in rows.iter().enumerate() {
        for (j, other) in rows.iter().enumerate().skip(i + 1) {
            let (a, b) = (row[j], other[i]);
            if (a - b).abs() > 1e-12 * 1.0_f64.max(a.abs()).max(b.abs()) {
                return Err(ValidationError::InvalidMatrix(format!(
                    "asymmetry at ({i}, {j}): {a} vs {b}"
                )));
            }
        }
    }
    if n == 0 {
        return Ok(PsdReport {
            min_eigenvalue: 0.0,
            max_eigenvalue: 0.0,
            tolerance,
            passed: true,
        });
    }

    // Symmetrize to wipe sub-tolerance asymmetry before the solver.
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = 0.5 * (rows[i][j] + rows[j][i]);
        }
    }
    let eigen = m.symmetric_eigenvalues();
    let min_eigenvalue = eigen.iter().copied().fold(f64::INFINITY, f64::min);
    let max_eigenvalue = eigen.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(PsdReport {
        min_eigenvalue,
        max_eigenvalue,
        tolerance,
        passed: min_eigenvalue >= -tolerance * 1.0_f64.max(max_eigenvalue),
    })
}

/// Seeded random hierarchy with integer weights in `[0, max_weight]`,
/// nondecreasing from the root, one object per leaf and no single-child
/// nodes. Deterministic per seed.
pub fn random_hierarchy(seed: u64, max_leaves: usize, max_weight: u64) -> Hierarchy {
    assert!(max_leaves >= 1, "need at least one leaf");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let leaves = rng.random_range(1..=max_leaves);
    let mut builder = HierarchyBuilder::new();
    let mut next_object = 0usize;

    // Recursive split: a node covering one leaf becomes the leaf.
    fn grow(
        builder: &mut HierarchyBuilder,
        rng: &mut ChaCha8Rng,
        parent: Option<(u32, u64)>,
        leaves: usize,
        max_weight: u64,
        next_object: &mut usize,
    ) {
        let min_w = parent.map_or(0, |(_, w)| w);
        let w = rng.random_range(min_w..=max_weight);
        let node = match parent {
            None => builder.add_root(w as f64),
            Some((p, _)) => builder.add_child(p, w as f64),
        };
        if leaves == 1 {
            builder.place_object(node, *next_object);
            *next_object += 1;
            return;
        }
        let parts = rng.random_range(2..=leaves.min(4));
        let mut remaining = leaves;
        for i in 0..parts {
            let left = parts - i - 1;
            let take = if left == 0 {
                remaining
            } else {
                rng.random_range(1..=remaining - left)
            };
            remaining -= take;
            grow(builder, rng, Some((node, w)), take, max_weight, next_object);
        }
    }

    grow(
        &mut builder,
        &mut rng,
        None,
        leaves,
        max_weight,
        &mut next_object,
    );
    builder
        .build()
        .expect("construction respects the invariants")
}

/// Exact optimum over all `n!` bijections; the reference everything
/// else is checked against. Only for `n <= 7`.
pub fn brute_force_assignment(rows: &[Vec<f64>]) -> Result<f64, ValidationError> {
    let n = rows.len();
    if n > MAX_BRUTE_FORCE {
        return Err(ValidationError::TooLarge(n));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(ValidationError::InvalidMatrix(format!(
                "row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
    }
    fn go(rows: &[Vec<f64>], i: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if i == rows.len() {
            *best = best.max(acc);
            return;
        }
        for j in 0..rows.len() {
            if !used[j] {
                used[j] = true;
                go(rows, i + 1, used, acc + rows[i][j], best);
                used[j] = false;
            }
        }
    }
    if n == 0 {
        return Ok(0.0);
    }
    let mut best = f64::NEG_INFINITY;
    go(rows, 0, &mut vec![false; n], 0.0, &mut best);
    Ok(best)
}

/// One measured size of [`benchmark_linear_time`]; `hungarian_ns` is
/// `None` above the cap.
#[derive(Debug, Clone, Copy)]
pub struct BenchmarkRow {
    pub size: usize,
    pub histogram_ns: u128,
    pub hungarian_ns: Option<u128>,
}

#[derive(Debug, Clone, Default)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkTable {
    /// CSV with header `size,histogram_ns,hungarian_ns`; capped
    /// Hungarian cells are left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("size,histogram_ns,hungarian_ns\n");
        for row in &self.rows {
            let hung = row
                .hungarian_ns
                .map(|ns| ns.to_string())
                .unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", row.size, row.histogram_ns, hung));
        }
        out
    }

    /// `(size, t(2s)/t(s))` for consecutive size-doubling rows of the
    /// histogram column.
    pub fn histogram_doubling_ratios(&self) -> Vec<(usize, f64)> {
        self.doubling_ratios(|r| Some(r.histogram_ns))
    }

    pub fn hungarian_doubling_ratios(&self) -> Vec<(usize, f64)> {
        self.doubling_ratios(|r| r.hungarian_ns)
    }

    fn doubling_ratios(&self, col: impl Fn(&BenchmarkRow) -> Option<u128>) -> Vec<(usize, f64)> {
        self.rows
            .windows(2)
            .filter(|w| w[1].size == 2 * w[0].size)
            .filter_map(|w| {
                let (a, b) = (col(&w[0])?, col(&w[1])?);
                (a > 0).then(|| (w[1].size, b as f64 / a as f64))
            })
            .collect()
    }
}

/// Times one optimal-assignment evaluation per size: the linear-time
/// histogram-intersection path against the cubic Hungarian baseline
/// (solved only up to `hungarian_cap` elements). Multisets are sampled
/// with replacement from the hierarchy's objects with a fixed seed;
/// each figure is the minimum of three runs, measured single-threaded.
pub fn benchmark_linear_time(
    h: &Hierarchy,
    sizes: &[usize],
    hungarian_cap: usize,
) -> BenchmarkTable {
    debug_assert!(sizes.windows(2).all(|w| w[0] <= w[1]), "sizes must ascend");
    let mut rng = ChaCha8Rng::seed_from_u64(0x0a_15);
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let sample = |rng: &mut ChaCha8Rng| -> Vec<usize> {
            (0..size)
                .map(|_| rng.random_range(0..h.num_objects()))
                .collect()
        };
        let x = sample(&mut rng);
        let y = sample(&mut rng);

        let mut histogram_ns = u128::MAX;
        for _ in 0..3 {
            let start = Instant::now();
            let value = assignment_kernel(h, &x, &y).expect("objects sampled from h");
            let elapsed = start.elapsed().as_nanos();
            std::hint::black_box(value);
            histogram_ns = histogram_ns.min(elapsed.max(1));
        }

        let hungarian_ns = (size <= hungarian_cap).then(|| {
            let inst = AssignmentInstance::from_hierarchy(h, &x, &y).expect("valid objects");
            let mut best = u128::MAX;
            for _ in 0..3 {
                let start = Instant::now();
                let (value, _) = solve_hungarian(&inst);
                let elapsed = start.elapsed().as_nanos();
                std::hint::black_box(value);
                best = best.min(elapsed.max(1));
            }
            best
        });

        rows.push(BenchmarkRow {
            size,
            histogram_ns,
            hungarian_ns,
        });
    }
    BenchmarkTable { rows }
}
