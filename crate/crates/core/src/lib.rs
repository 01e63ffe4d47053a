//! otds: synthesize labeled datasets as optimal-transport interpolations of
//! existing ones, and project a target dataset onto the geodesic hull of a
//! collection.
//!
//! The pipeline, bottom to top:
//!
//! - [`ot`]: discrete OT solvers over cost matrices (entropic Sinkhorn and an
//!   exact small-instance solver).
//! - [`labels`]: squared W2 between class-conditional measures, exactly or in
//!   Gaussian closed form, assembled into label-to-label matrices.
//! - [`otdd`]: the transport distance between labeled datasets, whose ground
//!   cost adds feature and label geometry.
//! - [`map`]: realized dataset maps via barycentric projection (full or
//!   batched) plus kNN pseudo-labeling.
//! - [`geodesic`]: convex combinations of mapped datasets, two-dataset McCann
//!   interpolation, and displacement interpolation.
//! - [`projection`]: the quadratic surrogate over mixture weights and its
//!   simplex-constrained minimization.
//! - [`datagen`]: seeded synthetic dataset generators.
//!
//! All numerics are generic over the scalar type through [`Scalar`]
//! (`f32` or `f64`); the aliases below pin the common `f64` instantiation.

pub mod data;
pub mod datagen;
pub mod error;
pub mod geodesic;
pub mod labels;
pub mod linalg;
pub mod map;
pub mod ot;
pub mod otdd;
pub mod projection;
pub mod scalar;

pub use data::{pad_label, split_by_class, ClassConditional, LabeledDataset, PaddedLabelSpace, SimplexWeights};
pub use error::{Error, Result};
pub use geodesic::{combine, displacement_interpolate, mccann_dataset};
pub use labels::{
    bures_w2_squared, label_distance_matrix, soft_label_cost, LabelDistanceConfig,
    LabelDistanceMatrix, LabelMethod,
};
pub use map::{
    barycentric_map, barycentric_map_with_label_matrix, batched_barycentric_map, identity_map,
    knn_pseudolabel, DatasetMap, MapKind,
};
pub use ot::{
    auto_epsilon, exact_ot, monotone_map_1d, sinkhorn, uniform_weights, w2_squared_empirical,
    CostMatrix, Coupling, OtSolver, SinkhornConfig, SinkhornParams,
};
pub use otdd::{otdd, otdd_cost_matrix, otdd_with_label_matrix, OtddConfig, OtddResult};
pub use projection::{
    build_projection_problem, dataset_distance_2q, direct_blend_distance,
    euclidean_generalized_geodesic_distance, simplex_grid, solve_projection_weights, surrogate,
    GeodesicDistanceEval, ProjectionProblem, ProjectionSolution,
};
pub use scalar::Scalar;

/// `f64` instantiations of the main carriers.
pub type LabeledDatasetF64 = data::LabeledDataset<f64>;
pub type CouplingF64 = ot::Coupling<f64>;
pub type CostMatrixF64 = ot::CostMatrix<f64>;
pub type DatasetMapF64 = map::DatasetMap<f64>;
pub type OtddConfigF64 = otdd::OtddConfig<f64>;
pub type OtddResultF64 = otdd::OtddResult<f64>;
pub type SimplexWeightsF64 = data::SimplexWeights<f64>;
pub type ProjectionProblemF64 = projection::ProjectionProblem<f64>;

/// `f32` instantiations for memory-bound workloads.
pub type LabeledDatasetF32 = data::LabeledDataset<f32>;
pub type CouplingF32 = ot::Coupling<f32>;
pub type DatasetMapF32 = map::DatasetMap<f32>;
