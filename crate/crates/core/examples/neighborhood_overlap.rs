//! Neighborhood overlap against class labels and against another embedding.
//!
//!     cargo run --release --example neighborhood_overlap

use gatescope::geometry::{neighborhood_overlap, GroundTruthRef, PointSet};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> gatescope::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (n, c, k) = (600, 6, 30);
    let mut labels: Vec<String> = (0..n).map(|i| format!("class{}", i % c)).collect();

    // Class means separated by `sep` standard deviations.
    for sep in [0.0, 1.0, 2.0, 4.0] {
        let mut data = Array2::from_shape_fn((n, 8), |_| rng.sample::<f64, _>(StandardNormal));
        for i in 0..n {
            data[[i, i % c % 8]] += sep;
        }
        let ps = PointSet::new(data)?;
        let chi = neighborhood_overlap(&ps, &GroundTruthRef::Labels(labels.clone()), k)?.chi;
        println!("separation {sep:.1}: chi = {chi:.3}");
    }

    let ps = PointSet::new(Array2::from_shape_fn((n, 8), |_| rng.sample::<f64, _>(StandardNormal)))?;
    labels.shuffle(&mut rng);
    let chance = (n as f64 / c as f64 - 1.0) / (n as f64 - 1.0);
    let chi = neighborhood_overlap(&ps, &GroundTruthRef::Labels(labels), k)?.chi;
    println!("random labels: chi = {chi:.4} (chance {chance:.4})");

    let noisy = PointSet::new(ps.data() + &Array2::from_shape_fn((n, 8), |_| 0.3 * rng.sample::<f64, _>(StandardNormal)))?;
    println!("self: {}", neighborhood_overlap(&ps, &GroundTruthRef::Points(ps.clone()), k)?.chi);
    println!("jittered copy: {:.3}", neighborhood_overlap(&ps, &GroundTruthRef::Points(noisy), k)?.chi);
    Ok(())
}
