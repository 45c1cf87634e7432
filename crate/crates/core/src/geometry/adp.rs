//! Advanced density-peaks clustering.
//!
//! Steps: find local density maxima, assign every other point uphill to the
//! label of its nearest higher-density neighbor, estimate the saddle density
//! between touching clusters from their border points, then merge pairs whose
//! peaks are not significantly denser than their saddle. Clusters below a
//! minimum size are dissolved into the cluster with the nearest peak and the
//! merge test is re-run until the partition is stable.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::{DensityEstimate, NeighborGraph};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdpParams {
    /// Confidence threshold of the peak-versus-saddle test.
    pub z: f64,
    /// Clusters with fewer members are dissolved.
    pub min_size: usize,
}

impl Default for AdpParams {
    fn default() -> Self {
        Self {
            z: 1.65,
            min_size: 20,
        }
    }
}

/// A single merge performed by the statistical test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeEvent {
    /// Peak point index of the surviving cluster.
    pub kept_peak: usize,
    /// Peak point index of the absorbed cluster.
    pub absorbed_peak: usize,
    /// The smaller of the two peak-versus-saddle statistics.
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// Cluster label per point, contiguous `0..n_clusters`, ordered by decreasing peak density.
    pub labels: Vec<usize>,
    /// Peak point index per cluster.
    pub peaks: Vec<usize>,
    /// Symmetric saddle log-density matrix; `None` where the clusters share no border.
    pub saddle_log_rho: Vec<Vec<Option<f64>>>,
    pub merge_log: Vec<MergeEvent>,
    /// Points whose density lies below the highest saddle of their cluster.
    pub halo: Vec<bool>,
    /// Set when several peaks were found but no cluster pair shares a border.
    pub no_borders: bool,
}

impl ClusterAssignment {
    pub fn n_clusters(&self) -> usize {
        self.peaks.len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_clusters()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, Copy)]
struct Saddle {
    log_rho: f64,
    err: f64,
}

struct Ctx<'a> {
    graph: &'a NeighborGraph,
    rho: &'a [f64],
    err: &'a [f64],
    valid: Vec<bool>,
    k: usize,
}

impl Ctx<'_> {
    /// Strict total order on density: ties go to the lower index.
    fn higher(&self, a: usize, b: usize) -> bool {
        match self.rho[a].total_cmp(&self.rho[b]) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => a < b,
        }
    }

    fn in_knn(&self, of: usize, who: usize) -> bool {
        self.graph.knn(of, self.k).iter().any(|n| n.index == who)
    }

    fn saddles(&self, labels: &[usize]) -> BTreeMap<(usize, usize), Saddle> {
        let mut out: BTreeMap<(usize, usize), Saddle> = BTreeMap::new();
        for i in (0..labels.len()).filter(|&i| self.valid[i]) {
            let own = labels[i];
            let Some(other) = self
                .graph
                .knn(i, self.k)
                .iter()
                .find(|n| self.valid[n.index] && labels[n.index] != own)
            else {
                continue;
            };
            if !self.in_knn(other.index, i) {
                continue;
            }
            let theirs = labels[other.index];
            let key = (own.min(theirs), own.max(theirs));
            let candidate = Saddle {
                log_rho: self.rho[i],
                err: self.err[i],
            };
            out.entry(key)
                .and_modify(|s| {
                    if candidate.log_rho > s.log_rho {
                        *s = candidate;
                    }
                })
                .or_insert(candidate);
        }
        out
    }

    fn statistic(&self, peak: usize, saddle: &Saddle) -> f64 {
        (self.rho[peak] - saddle.log_rho) / (self.err[peak].powi(2) + saddle.err.powi(2)).sqrt()
    }

    /// Highest-density valid point among `members`.
    fn top(&self, members: impl Iterator<Item = usize>) -> Option<usize> {
        members.fold(None, |best, i| match best {
            Some(b) if !self.higher(i, b) => Some(b),
            _ => Some(i),
        })
    }
}

/// Relabels so cluster ids are contiguous and ordered by decreasing peak density.
fn compact(ctx: &Ctx, labels: &mut [usize]) -> Vec<usize> {
    let n_old = (0..labels.len())
        .filter(|&i| ctx.valid[i])
        .map(|i| labels[i] + 1)
        .max()
        .unwrap_or(0);
    let mut peaks: Vec<(usize, usize)> = (0..n_old)
        .filter_map(|c| {
            ctx.top((0..labels.len()).filter(|&i| ctx.valid[i] && labels[i] == c))
                .map(|p| (c, p))
        })
        .collect();
    peaks.sort_by(|a, b| {
        if ctx.higher(a.1, b.1) {
            Ordering::Less
        } else if ctx.higher(b.1, a.1) {
            Ordering::Greater
        } else {
            Ordering::Equal
        }
    });
    let mut remap = vec![usize::MAX; n_old];
    for (new, &(old, _)) in peaks.iter().enumerate() {
        remap[old] = new;
    }
    for (i, l) in labels.iter_mut().enumerate() {
        if ctx.valid[i] {
            *l = remap[*l];
        }
    }
    peaks.into_iter().map(|(_, p)| p).collect()
}

fn merge_until_robust(
    ctx: &Ctx,
    z: f64,
    labels: &mut [usize],
    peaks: &mut Vec<usize>,
    log: &mut Vec<MergeEvent>,
) {
    loop {
        let saddles = ctx.saddles(labels);
        let mut worst: Option<((usize, usize), f64)> = None;
        for (&(a, b), s) in &saddles {
            let stat = ctx.statistic(peaks[a], s).min(ctx.statistic(peaks[b], s));
            if stat > z {
                continue;
            }
            if worst.is_none_or(|(_, w)| stat < w) {
                worst = Some(((a, b), stat));
            }
        }
        let Some(((a, b), statistic)) = worst else {
            return;
        };
        // Ids are ordered by peak density, so `a` keeps its peak.
        log.push(MergeEvent {
            kept_peak: peaks[a],
            absorbed_peak: peaks[b],
            statistic,
        });
        for (i, l) in labels.iter_mut().enumerate() {
            if ctx.valid[i] && *l == b {
                *l = a;
            }
        }
        *peaks = compact(ctx, labels);
    }
}

/// Dissolves undersized clusters; returns whether anything changed.
fn dissolve_small(ctx: &Ctx, min_size: usize, labels: &mut [usize], peaks: &mut Vec<usize>) -> bool {
    let m = peaks.len();
    if m <= 1 {
        return false;
    }
    let mut sizes = vec![0usize; m];
    for (i, &l) in labels.iter().enumerate() {
        if ctx.valid[i] {
            sizes[l] += 1;
        }
    }
    let mut survivors: Vec<usize> = (0..m).filter(|&c| sizes[c] >= min_size).collect();
    if survivors.len() == m {
        return false;
    }
    if survivors.is_empty() {
        // Keep the largest; ids are density-ordered so max_by_key picks the densest on ties.
        let largest = (0..m).rev().max_by_key(|&c| sizes[c]).unwrap_or(0);
        survivors.push(largest);
    }
    let points = ctx.graph.points();
    let mut target = (0..m).collect::<Vec<_>>();
    for c in (0..m).filter(|c| !survivors.contains(c)) {
        target[c] = *survivors
            .iter()
            .min_by(|&&x, &&y| {
                points
                    .sq_dist(peaks[c], peaks[x])
                    .total_cmp(&points.sq_dist(peaks[c], peaks[y]))
                    .then(x.cmp(&y))
            })
            .expect("at least one survivor");
    }
    for (i, l) in labels.iter_mut().enumerate() {
        if ctx.valid[i] {
            *l = target[*l];
        }
    }
    *peaks = compact(ctx, labels);
    true
}

pub fn adp_cluster(
    graph: &NeighborGraph,
    density: &DensityEstimate,
    params: AdpParams,
) -> Result<ClusterAssignment> {
    let n = graph.len();
    if density.len() != n {
        return Err(Error::Shape(format!(
            "density has {} entries, graph has {n} points",
            density.len()
        )));
    }
    if density.k_used > graph.k_max() {
        return Err(Error::InvalidInput(format!(
            "density rank {} exceeds graph k_max {}",
            density.k_used,
            graph.k_max()
        )));
    }
    if !(params.z > 0.0) {
        return Err(Error::InvalidInput(format!("Z = {} must be > 0", params.z)));
    }
    let ctx = Ctx {
        graph,
        rho: &density.log_rho,
        err: &density.err_log_rho,
        valid: density.log_rho.iter().map(|r| r.is_finite()).collect(),
        k: density.k_used,
    };
    let mut order: Vec<usize> = (0..n).filter(|&i| ctx.valid[i]).collect();
    if order.is_empty() {
        return Err(Error::Degenerate(
            "no point has a finite density".into(),
        ));
    }
    order.sort_by(|&a, &b| if ctx.higher(a, b) { Ordering::Less } else { Ordering::Greater });

    let mut is_peak = vec![false; n];
    for &i in &order {
        is_peak[i] = !graph
            .knn(i, ctx.k)
            .iter()
            .any(|nb| ctx.valid[nb.index] && ctx.higher(nb.index, i));
    }
    for &j in &order {
        for nb in graph.knn(j, ctx.k) {
            if ctx.higher(j, nb.index) {
                is_peak[nb.index] = false;
            }
        }
    }

    let mut labels = vec![usize::MAX; n];
    let mut next = 0;
    for &i in &order {
        if is_peak[i] {
            labels[i] = next;
            next += 1;
            continue;
        }
        let uphill = graph
            .neighbors(i)
            .iter()
            .find(|nb| ctx.valid[nb.index] && ctx.higher(nb.index, i))
            .map(|nb| nb.index)
            .unwrap_or_else(|| {
                let points = graph.points();
                order
                    .iter()
                    .copied()
                    .take_while(|&j| j != i)
                    .min_by(|&a, &b| points.sq_dist(i, a).total_cmp(&points.sq_dist(i, b)).then(a.cmp(&b)))
                    .expect("a non-peak point has a denser point")
            });
        labels[i] = labels[uphill];
    }
    let mut peaks = compact(&ctx, &mut labels);
    let no_borders = peaks.len() > 1 && ctx.saddles(&labels).is_empty();
    if no_borders {
        log::warn!(
            "{} density peaks but no cluster borders at k = {}; returning unmerged peaks",
            peaks.len(),
            ctx.k
        );
    }

    let mut merge_log = Vec::new();
    loop {
        merge_until_robust(&ctx, params.z, &mut labels, &mut peaks, &mut merge_log);
        if !dissolve_small(&ctx, params.min_size, &mut labels, &mut peaks) {
            break;
        }
    }

    // Zero-distance points join their nearest finite-density point.
    let points = graph.points();
    for i in (0..n).filter(|&i| !ctx.valid[i]) {
        let host = graph
            .neighbors(i)
            .iter()
            .find(|nb| ctx.valid[nb.index])
            .map(|nb| nb.index)
            .unwrap_or_else(|| {
                order
                    .iter()
                    .copied()
                    .min_by(|&a, &b| points.sq_dist(i, a).total_cmp(&points.sq_dist(i, b)).then(a.cmp(&b)))
                    .expect("non-empty")
            });
        labels[i] = labels[host];
    }

    let m = peaks.len();
    let saddles = ctx.saddles(&labels);
    let mut saddle_log_rho = vec![vec![None; m]; m];
    let mut max_saddle = vec![f64::NEG_INFINITY; m];
    for (&(a, b), s) in &saddles {
        saddle_log_rho[a][b] = Some(s.log_rho);
        saddle_log_rho[b][a] = Some(s.log_rho);
        max_saddle[a] = max_saddle[a].max(s.log_rho);
        max_saddle[b] = max_saddle[b].max(s.log_rho);
    }
    let halo = (0..n)
        .map(|i| ctx.valid[i] && density.log_rho[i] < max_saddle[labels[i]])
        .collect();
    Ok(ClusterAssignment {
        labels,
        peaks,
        saddle_log_rho,
        merge_log,
        halo,
        no_borders,
    })
}
