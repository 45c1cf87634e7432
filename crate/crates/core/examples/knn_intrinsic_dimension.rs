//! Exact kNN graphs and the two ratio-based intrinsic-dimension estimators.
//!
//!     cargo run --release --example knn_intrinsic_dimension

use gatescope::geometry::{build_knn_graph, estimate_intrinsic_dimension, IdMethod, PointSet};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> gatescope::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    let line = PointSet::from_rows(&[vec![0.0], vec![1.0], vec![3.0]])?;
    let g = build_knn_graph(&line, 1)?;
    for i in 0..line.len() {
        let nb = g.neighbors(i)[0];
        println!("{i} -> {} at {}", nb.index, nb.distance);
    }

    // A 2-D square embedded in 10 dimensions, then solid cubes.
    let mut plane = Array2::zeros((2000, 10));
    for mut row in plane.outer_iter_mut() {
        row[0] = rng.gen::<f64>();
        row[1] = rng.gen::<f64>();
    }
    let mut sets = vec![("square in 10-D", PointSet::new(plane)?)];
    for d in [3, 5] {
        let cube = Array2::from_shape_fn((2000, d), |_| rng.gen::<f64>());
        sets.push((if d == 3 { "3-cube" } else { "5-cube" }, PointSet::new(cube)?));
    }

    println!("\n{:<16} {:>8} {:>10}", "data", "TwoNN", "Gride(16)");
    for (name, ps) in &sets {
        let g = build_knn_graph(ps, 32)?;
        let two = estimate_intrinsic_dimension(&g, IdMethod::TwoNn)?;
        let gride = estimate_intrinsic_dimension(&g, IdMethod::Gride { k: 16 })?;
        println!("{name:<16} {two:>8.2} {gride:>10.2}");
    }
    Ok(())
}
