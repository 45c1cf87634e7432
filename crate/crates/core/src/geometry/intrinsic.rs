//! Nearest-neighbor-ratio intrinsic dimension estimators.
//!
//! Both estimators use ratios of neighbor distances `mu_i = r_{i,n2} / r_{i,n1}`.
//! Under local uniformity the ratio has density
//!
//! ```text
//! f(mu) = d (mu^d - 1)^(n2 - n1 - 1) / (B(n2 - n1, n1) mu^(d (n2 - 1) + 1)),   mu > 1
//! ```
//!
//! TwoNN is the `n1 = 1, n2 = 2` case with the closed-form maximum
//! likelihood `d = N / sum ln mu_i`. Gride uses `n1 = k, n2 = 2k` and finds
//! the maximum numerically; the log-likelihood is concave in `d`, so the
//! root of its derivative is bracketed by bisection on `(0, 200]`.

use crate::error::{Error, Result};
use crate::geometry::NeighborGraph;

const D_MAX: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdMethod {
    TwoNn,
    /// Generalized ratio with neighbor ranks `k` and `2k`.
    Gride { k: usize },
}

impl Default for IdMethod {
    fn default() -> Self {
        IdMethod::Gride { k: 16 }
    }
}

impl IdMethod {
    /// Smallest `k_max` the neighbor graph needs for this method.
    pub fn required_k_max(&self) -> usize {
        match *self {
            IdMethod::TwoNn => 2,
            IdMethod::Gride { k } => 2 * k,
        }
    }
}

pub fn estimate_intrinsic_dimension(graph: &NeighborGraph, method: IdMethod) -> Result<f64> {
    let (n1, n2) = match method {
        IdMethod::TwoNn => (1, 2),
        IdMethod::Gride { k } => {
            if k == 0 {
                return Err(Error::InvalidInput("gride rank must be >= 1".into()));
            }
            (k, 2 * k)
        }
    };
    if graph.k_max() < n2 {
        return Err(Error::InvalidInput(format!(
            "{method:?} needs k_max >= {n2}, graph has {}",
            graph.k_max()
        )));
    }
    // Points whose inner distance is zero carry no scale information.
    let log_mu: Vec<f64> = (0..graph.len())
        .filter_map(|i| {
            let inner = graph.kth_distance(i, n1);
            let outer = graph.kth_distance(i, n2);
            (inner > 0.0).then(|| (outer / inner).ln())
        })
        .collect();
    let sum: f64 = log_mu.iter().sum();
    if log_mu.is_empty() || sum <= 0.0 {
        return Err(Error::Degenerate(
            "all neighbor distance ratios equal 1".into(),
        ));
    }
    let count = log_mu.len() as f64;
    if n2 - n1 == 1 {
        // Closed form: derivative N/d - (n2 - 1) sum ln mu = 0.
        return Ok((count / ((n2 - 1) as f64 * sum)).min(D_MAX));
    }
    // Ratios equal to one make the likelihood zero for every d; drop them.
    let log_mu: Vec<f64> = log_mu.into_iter().filter(|&l| l > 0.0).collect();
    let count = log_mu.len() as f64;
    let sum: f64 = log_mu.iter().sum();
    let a = (n2 - n1 - 1) as f64;
    let b = (n2 - 1) as f64;
    let score = |d: f64| -> f64 {
        // d/dd of ln L; ln(mu^d - 1) has derivative ln mu / (1 - mu^-d).
        let inner: f64 = log_mu
            .iter()
            .map(|&l| l / -(-d * l).exp_m1())
            .sum();
        count / d + a * inner - b * sum
    };
    let (mut lo, mut hi) = (1e-6, D_MAX);
    if score(hi) >= 0.0 {
        return Ok(D_MAX);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if score(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
