//! Representation-geometry toolkit.
//!
//! Everything here operates on a [`PointSet`] of embedding vectors and the
//! exact [`NeighborGraph`] built from it. All routines are deterministic and
//! single-threaded.

mod adp;
mod density;
mod intrinsic;
mod knn;
mod metrics;
mod pointset;

pub use adp::{adp_cluster, AdpParams, ClusterAssignment, MergeEvent};
pub use density::{estimate_knn_density, log_unit_ball_volume, DensityEstimate};
pub use intrinsic::{estimate_intrinsic_dimension, IdMethod};
pub use knn::{build_knn_graph, Neighbor, NeighborGraph};
pub use metrics::{
    cosine_gap, homogeneity, neighborhood_overlap, CosineGap, GroundTruthRef, Overlap,
};
pub use pointset::{read_labels, write_labels, PointSet};
