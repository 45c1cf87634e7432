use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::geometry::NeighborGraph;

/// Per-point kNN log-density with its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    /// Natural-log density; `+inf` marks points whose k-th neighbor is at distance 0.
    pub log_rho: Vec<f64>,
    pub err_log_rho: Vec<f64>,
    pub id_used: f64,
    pub k_used: usize,
}

impl DensityEstimate {
    pub fn len(&self) -> usize {
        self.log_rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_rho.is_empty()
    }

    /// Points flagged with the `+inf` sentinel.
    pub fn degenerate(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| !self.log_rho[i].is_finite())
            .collect()
    }
}

/// `ln` of the volume of the unit ball in `d` (possibly fractional) dimensions.
pub fn log_unit_ball_volume(d: f64) -> f64 {
    0.5 * d * std::f64::consts::PI.ln() - ln_gamma(0.5 * d + 1.0)
}

/// `rho_i = k / (N V_k(i))` with the ball volume measured in dimension `id`.
pub fn estimate_knn_density(graph: &NeighborGraph, k: usize, id: f64) -> Result<DensityEstimate> {
    if k == 0 || k > graph.k_max() {
        return Err(Error::InvalidInput(format!(
            "density rank k = {k} must lie in 1..={}",
            graph.k_max()
        )));
    }
    if !(id > 0.0 && id.is_finite()) {
        return Err(Error::InvalidInput(format!("intrinsic dimension {id} must be > 0")));
    }
    let n = graph.len() as f64;
    let base = (k as f64).ln() - n.ln() - log_unit_ball_volume(id);
    let mut zero = 0usize;
    let log_rho = (0..graph.len())
        .map(|i| {
            let r = graph.kth_distance(i, k);
            if r > 0.0 {
                base - id * r.ln()
            } else {
                zero += 1;
                f64::INFINITY
            }
        })
        .collect();
    if zero > 0 {
        log::warn!("{zero} points have a zero k-th neighbor distance; density set to +inf");
    }
    Ok(DensityEstimate {
        log_rho,
        err_log_rho: vec![1.0 / (k as f64).sqrt(); graph.len()],
        id_used: id,
        k_used: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_knn_graph, PointSet};

    #[test]
    fn unit_ball_volumes() {
        assert!((log_unit_ball_volume(1.0).exp() - 2.0).abs() < 1e-12);
        assert!((log_unit_ball_volume(2.0).exp() - std::f64::consts::PI).abs() < 1e-12);
        let v3 = 4.0 / 3.0 * std::f64::consts::PI;
        assert!((log_unit_ball_volume(3.0).exp() - v3).abs() < 1e-12);
    }

    #[test]
    fn direct_substitution() {
        // Lattice with spacing 1/2: an interior point's 4th neighbor sits at distance 1.
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 * 0.5, 0.0]).collect();
        let g = build_knn_graph(&PointSet::from_rows(&rows).unwrap(), 4).unwrap();
        let est = estimate_knn_density(&g, 4, 2.0).unwrap();
        assert_eq!(g.kth_distance(50, 4), 1.0);
        let expected = 4.0 / (100.0 * std::f64::consts::PI);
        assert!((est.log_rho[50].exp() - expected).abs() < 1e-15);
        assert!((expected - 0.012732).abs() < 1e-6);
        assert!(est.err_log_rho.iter().all(|&e| e == 0.5));
    }

    #[test]
    fn zero_distance_flagged() {
        let ps = PointSet::from_rows(&[vec![0.0], vec![0.0], vec![0.0], vec![5.0]]).unwrap();
        let g = build_knn_graph(&ps, 2).unwrap();
        let est = estimate_knn_density(&g, 2, 1.0).unwrap();
        assert_eq!(est.degenerate(), vec![0, 1, 2]);
        assert!(est.log_rho[3].is_finite());
    }
}
