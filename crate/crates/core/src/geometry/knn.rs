use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::geometry::PointSet;

/// One entry of a neighbor list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// Exact Euclidean k-nearest-neighbor graph.
///
/// Each list holds `k_max` neighbors sorted by ascending distance, ties
/// broken by ascending index. A point never appears in its own list. The
/// graph keeps a copy of the coordinates so that downstream consumers
/// (density peaks, overlap) can fall back to global searches.
#[derive(Debug, Clone)]
pub struct NeighborGraph {
    k_max: usize,
    neighbors: Vec<Vec<Neighbor>>,
    points: PointSet,
}

impl NeighborGraph {
    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.neighbors[i]
    }

    /// The first `k` neighbors of point `i`.
    pub fn knn(&self, i: usize, k: usize) -> &[Neighbor] {
        &self.neighbors[i][..k.min(self.k_max)]
    }

    /// Distance from `i` to its `rank`-th neighbor (1-based).
    pub fn kth_distance(&self, i: usize, rank: usize) -> f64 {
        self.neighbors[i][rank - 1].distance
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }
}

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Builds the exact kNN graph by brute force over all pairs.
pub fn build_knn_graph(points: &PointSet, k_max: usize) -> Result<NeighborGraph> {
    let n = points.len();
    if k_max == 0 || k_max + 1 > n {
        return Err(Error::InvalidInput(format!(
            "k_max = {k_max} must lie in 1..={}",
            n.saturating_sub(1)
        )));
    }
    let mut neighbors = Vec::with_capacity(n);
    let mut row: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        row.clear();
        row.extend((0..n).filter(|&j| j != i).map(|j| (points.sq_dist(i, j), j)));
        if k_max < row.len() {
            row.select_nth_unstable_by(k_max - 1, by_distance_then_index);
            row.truncate(k_max);
        }
        row.sort_unstable_by(by_distance_then_index);
        neighbors.push(
            row.iter()
                .map(|&(sq, index)| Neighbor {
                    index,
                    distance: sq.sqrt(),
                })
                .collect(),
        );
    }
    Ok(NeighborGraph {
        k_max,
        neighbors,
        points: points.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> PointSet {
        PointSet::from_rows(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    fn indices(g: &NeighborGraph, i: usize) -> Vec<usize> {
        g.neighbors(i).iter().map(|n| n.index).collect()
    }

    #[test]
    fn hand_enumerated_line() {
        let g = build_knn_graph(&line(&[0.0, 1.0, 3.0]), 1).unwrap();
        assert_eq!(indices(&g, 0), vec![1]);
        assert_eq!(indices(&g, 1), vec![0]);
        assert_eq!(indices(&g, 2), vec![1]);
        assert_eq!(g.kth_distance(2, 1), 2.0);
    }

    #[test]
    fn full_neighborhood_is_permutation() {
        let ps = line(&[0.3, -2.0, 5.0, 1.1, 0.0]);
        let g = build_knn_graph(&ps, 4).unwrap();
        for i in 0..5 {
            let mut idx = indices(&g, i);
            idx.sort_unstable();
            let expected: Vec<usize> = (0..5).filter(|&j| j != i).collect();
            assert_eq!(idx, expected);
        }
    }

    #[test]
    fn duplicate_points_tie_break_by_index() {
        let ps = line(&[2.0, 7.0, 2.0, 2.0]);
        let g = build_knn_graph(&ps, 2).unwrap();
        assert_eq!(indices(&g, 0), vec![2, 3]);
        assert_eq!(indices(&g, 2), vec![0, 3]);
        assert_eq!(indices(&g, 3), vec![0, 2]);
        assert_eq!(g.kth_distance(0, 1), 0.0);
    }

    #[test]
    fn rejects_bad_k() {
        let ps = line(&[0.0, 1.0, 2.0]);
        assert!(build_knn_graph(&ps, 0).is_err());
        assert!(build_knn_graph(&ps, 3).is_err());
    }
}
