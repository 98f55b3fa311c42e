//! Optimal assignment kernels for graphs.
//!
//! The optimal assignment kernel compares two sets by the best
//! possible pairing of their elements under a base similarity. For
//! *strong* base kernels (every `k(x,y) >= min(k(x,z), k(z,y))`) this
//! maximization has closed form: strong kernels are exactly the
//! kernels induced by a weighted tree over the objects, and the
//! assignment value equals a histogram intersection over that tree,
//! computable in linear rather than cubic time and positive
//! semidefinite as a bonus.
//!
//! The crate implements the full pipeline:
//!
//! * [`graph`]: labelled graphs, benchmark-format datasets, synthetic
//!   generators.
//! * [`hierarchy`]: strong kernel matrices, the trees that induce
//!   them, construction in both directions, feature maps.
//! * [`assignment`]: histograms, histogram intersection, the greedy
//!   optimal bijection, and a Hungarian solver used as the oracle.
//! * [`wl`]: Weisfeiler-Lehman colour refinement and its hierarchy.
//! * [`kernels`]: the eight graph kernels (V, E, V-OA, E-OA, WL,
//!   WL-OA, GL, SP) and Gram-matrix assembly with normalization.
//! * [`validation`]: p.s.d. checks, seeded generators, a brute-force
//!   assignment oracle and a timing harness.
//!
//! # Quick start
//!
//! ```
//! use oak::{gram, normalize, check_psd, KernelName, DEFAULT_PSD_TOLERANCE};
//! use oak::graph::synthetic_dataset;
//!
//! let dataset = synthetic_dataset(7, 12, 10, 0.35, 3, 2);
//! let matrix = gram(&dataset, KernelName::WlOa, 3);
//! let report = check_psd(&matrix.rows(), DEFAULT_PSD_TOLERANCE).unwrap();
//! assert!(report.passed);
//!
//! let unit = normalize(&matrix);
//! assert_eq!(unit.get(0, 0), 1.0);
//! ```
//!
//! # Kernels
//!
//! | Name    | Compares | Combination          |
//! |---------|----------|----------------------|
//! | `V`     | vertex labels | dot product     |
//! | `E`     | endpoint label pairs | dot product |
//! | `V-OA`  | vertex labels | optimal assignment |
//! | `E-OA`  | endpoint label pairs | optimal assignment |
//! | `WL`    | refinement colours | dot product |
//! | `WL-OA` | refinement colours | optimal assignment |
//! | `GL`    | connected 3-vertex subgraphs | dot product |
//! | `SP`    | shortest-path label/length triples | dot product |
//!
//! The `-OA` kernels evaluate the optimal assignment via histogram
//! intersection on a hierarchy; [`solve_hungarian`] and
//! [`brute_force_assignment`] provide independent cross-checks.

pub mod assignment;
pub mod graph;
pub mod hierarchy;
pub mod kernels;
pub mod validation;
pub mod wl;

pub use assignment::{
    assignment_kernel, greedy_assignment, histogram, histogram_intersection, intersect, pad,
    solve_hungarian, AssignmentError, AssignmentInstance, Histogram,
};
pub use graph::{
    parse_dataset, synthetic_dataset, synthetic_graph, write_dataset, Dataset, Graph, GraphError,
};
pub use hierarchy::{
    build_hierarchy, build_hierarchy_with_tolerance, check_strong, check_strong_with_tolerance,
    FeatureVector, Hierarchy, HierarchyBuilder, HierarchyError, KernelMatrix, Strongness,
};
pub use kernels::{gram, normalize, GramMatrix, KernelError, KernelName, WlOa};
pub use validation::{
    benchmark_linear_time, brute_force_assignment, check_psd, random_hierarchy, BenchmarkTable,
    PsdReport, ValidationError, DEFAULT_PSD_TOLERANCE,
};
pub use wl::{refine, wl_feature_vector, wl_hierarchy, ColourSequence, WlError};
