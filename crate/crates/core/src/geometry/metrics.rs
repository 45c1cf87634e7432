use std::collections::HashMap;
use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{build_knn_graph, PointSet};

/// Homogeneity of a clustering with respect to ground-truth classes.
///
/// `h = 1 - H(truth | pred) / H(truth)` with natural-log entropies, and
/// `h = 1` when the truth has a single class.
pub fn homogeneity<T: Eq + Hash>(pred: &[usize], truth: &[T]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} truth labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidInput("homogeneity of an empty labeling".into()));
    }
    let n = pred.len() as f64;
    let mut class_counts: HashMap<&T, usize> = HashMap::new();
    let mut cluster_counts: HashMap<usize, usize> = HashMap::new();
    let mut joint: HashMap<(usize, &T), usize> = HashMap::new();
    for (&k, c) in pred.iter().zip(truth) {
        *class_counts.entry(c).or_default() += 1;
        *cluster_counts.entry(k).or_default() += 1;
        *joint.entry((k, c)).or_default() += 1;
    }
    let h_class: f64 = class_counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    if h_class <= 0.0 {
        return Ok(1.0);
    }
    let h_cond: f64 = joint
        .iter()
        .map(|(&(k, _), &c)| {
            let nk = cluster_counts[&k] as f64;
            -(c as f64 / n) * (c as f64 / nk).ln()
        })
        .sum();
    Ok((1.0 - h_cond / h_class).clamp(0.0, 1.0))
}

/// Reference structure for the neighborhood overlap.
#[derive(Debug, Clone)]
pub enum GroundTruthRef {
    /// All points sharing a label are each other's neighbors.
    Labels(Vec<String>),
    /// Neighbors are the exact kNN in a second representation of the same items.
    Points(PointSet),
}

impl GroundTruthRef {
    pub fn len(&self) -> usize {
        match self {
            GroundTruthRef::Labels(l) => l.len(),
            GroundTruthRef::Points(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlap {
    pub chi: f64,
    /// Points whose label class has no other member; they contribute zero.
    pub singleton_points: usize,
}

/// Average fraction of shared k-nearest neighbors between `points` and `reference`.
pub fn neighborhood_overlap(points: &PointSet, reference: &GroundTruthRef, k: usize) -> Result<Overlap> {
    let n = points.len();
    if reference.len() != n {
        return Err(Error::Shape(format!(
            "reference has {} items, point set has {n}",
            reference.len()
        )));
    }
    let graph = build_knn_graph(points, k)?;
    let mut shared = 0usize;
    let mut singleton_points = 0usize;
    match reference {
        GroundTruthRef::Points(gt) => {
            let gt_graph = build_knn_graph(gt, k)?;
            for i in 0..n {
                let mut theirs: Vec<usize> = gt_graph.knn(i, k).iter().map(|nb| nb.index).collect();
                theirs.sort_unstable();
                shared += graph
                    .knn(i, k)
                    .iter()
                    .filter(|nb| theirs.binary_search(&nb.index).is_ok())
                    .count();
            }
        }
        GroundTruthRef::Labels(labels) => {
            let mut class_size: HashMap<&str, usize> = HashMap::new();
            for l in labels {
                *class_size.entry(l.as_str()).or_default() += 1;
            }
            for i in 0..n {
                if class_size[labels[i].as_str()] == 1 {
                    singleton_points += 1;
                    continue;
                }
                let same = graph
                    .knn(i, k)
                    .iter()
                    .filter(|nb| labels[nb.index] == labels[i])
                    .count();
                shared += same.min(k);
            }
            if singleton_points > 0 {
                log::warn!("{singleton_points} points belong to single-member classes");
            }
        }
    }
    Ok(Overlap {
        chi: shared as f64 / (n * k) as f64,
        singleton_points,
    })
}

/// Median and quartiles of sampled cross-set cosine similarities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineGap {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Samples `n_pairs` index pairs `(a, b)` uniformly with replacement and summarizes `cos(a, b)`.
///
/// Pairs touching a zero-norm vector are redrawn.
pub fn cosine_gap(set_a: &PointSet, set_b: &PointSet, n_pairs: usize, seed: u64) -> Result<CosineGap> {
    if set_a.dim() != set_b.dim() {
        return Err(Error::Shape(format!(
            "dimension mismatch {} vs {}",
            set_a.dim(),
            set_b.dim()
        )));
    }
    if n_pairs == 0 {
        return Err(Error::InvalidInput("n_pairs must be >= 1".into()));
    }
    let norms = |ps: &PointSet| -> Vec<f64> {
        (0..ps.len()).map(|i| ps.row(i).dot(&ps.row(i)).sqrt()).collect()
    };
    let (na, nb) = (norms(set_a), norms(set_b));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sims = Vec::with_capacity(n_pairs);
    let mut failures = 0usize;
    while sims.len() < n_pairs {
        let i = rng.gen_range(0..set_a.len());
        let j = rng.gen_range(0..set_b.len());
        if na[i] == 0.0 || nb[j] == 0.0 {
            failures += 1;
            if failures >= 100 * n_pairs {
                return Err(Error::Degenerate(
                    "too many zero-norm vectors in cosine sampling".into(),
                ));
            }
            continue;
        }
        let c = set_a.row(i).dot(&set_b.row(j)) / (na[i] * nb[j]);
        sims.push(c.clamp(-1.0, 1.0));
    }
    sims.sort_by(f64::total_cmp);
    Ok(CosineGap {
        median: quantile(&sims, 0.5),
        q25: quantile(&sims, 0.25),
        q75: quantile(&sims, 0.75),
    })
}
