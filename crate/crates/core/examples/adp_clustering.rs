//! Density-peaks clustering of Gaussian blobs, and how the confidence `z`
//! controls merging.
//!
//!     cargo run --release --example adp_clustering

use gatescope::geometry::{
    adp_cluster, build_knn_graph, estimate_intrinsic_dimension, estimate_knn_density, homogeneity, AdpParams, IdMethod,
    PointSet,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> gatescope::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (per, d) = (300, 5);
    let mut data = Array2::from_shape_fn((3 * per, d), |_| rng.sample::<f64, _>(StandardNormal));
    let mut truth = Vec::new();
    for b in 0..3 {
        for i in 0..per {
            data[[b * per + i, 0]] += 4.0 * b as f64;
            truth.push(b);
        }
    }
    let points = PointSet::new(data)?;
    let graph = build_knn_graph(&points, 32)?;
    let id = estimate_intrinsic_dimension(&graph, IdMethod::Gride { k: 16 })?;
    let density = estimate_knn_density(&graph, 16, id)?;
    println!("estimated intrinsic dimension {id:.2}");

    for z in [0.5, 1.65, 3.0, 6.0] {
        let a = adp_cluster(&graph, &density, AdpParams { z, min_size: 20 })?;
        println!(
            "z = {z:<4}  clusters {}  sizes {:?}  homogeneity {:.3}  merges {}",
            a.n_clusters(),
            a.cluster_sizes(),
            homogeneity(&a.labels, &truth)?,
            a.merge_log.len()
        );
    }
    Ok(())
}
