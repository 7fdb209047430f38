//! Exact one-dimensional k-means.
//!
//! In one dimension every optimal k-means partition consists of contiguous
//! runs of the sorted values, so the global optimum can be found by dynamic
//! programming over split points. Equal values are collapsed into weighted
//! points first; this keeps duplicates in one cluster and makes the number of
//! distinct values `D` the natural cap on the cluster count.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Clustering1D {
    /// Cluster index per input element, in input order.
    pub labels: Vec<usize>,
    /// Cluster means, strictly ascending.
    pub centroids: Vec<f64>,
    /// Sum of squared deviations from the own centroid.
    pub within_sse: f64,
    /// Number of clusters actually formed, `min(k, D)`.
    pub effective_k: usize,
    pub requested_k: usize,
}

impl Clustering1D {
    /// True when fewer distinct values than requested clusters were present.
    pub fn collapsed(&self) -> bool {
        self.effective_k < self.requested_k
    }

    pub fn cluster_size(&self, cluster: usize) -> usize {
        self.labels.iter().filter(|&&l| l == cluster).count()
    }

    /// Index of the cluster with the largest centroid.
    pub fn top_cluster(&self) -> usize {
        self.effective_k - 1
    }
}

pub fn kmeans_1d(values: &[f64], k: usize) -> Result<Clustering1D> {
    if values.is_empty() {
        return Err(Error::Empty("values"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: None, index });
    }

    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);

    // Distinct values with multiplicities (0.0 and -0.0 are one value).
    let mut points: Vec<f64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for &v in &sorted {
        match points.last() {
            Some(&last) if last == v => *weights.last_mut().unwrap() += 1.0,
            _ => {
                points.push(v);
                weights.push(1.0);
            }
        }
    }
    let distinct = points.len();
    let effective_k = k.min(distinct);

    // Prefix sums over values centred on the global mean.
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    let mut pw = vec![0.0; distinct + 1];
    let mut px = vec![0.0; distinct + 1];
    let mut pxx = vec![0.0; distinct + 1];
    for i in 0..distinct {
        let x = points[i] - mean;
        let w = weights[i];
        pw[i + 1] = pw[i] + w;
        px[i + 1] = px[i] + w * x;
        pxx[i + 1] = pxx[i] + w * x * x;
    }
    // SSE of distinct points i..=j as one cluster.
    let cost = |i: usize, j: usize| {
        let w = pw[j + 1] - pw[i];
        let s = px[j + 1] - px[i];
        let ss = pxx[j + 1] - pxx[i];
        (ss - s * s / w).max(0.0)
    };

    // best[c][j]: optimal cost of points 0..=j split into c+1 clusters.
    // start[c][j]: first point of the last cluster in that optimum.
    let mut best = vec![vec![f64::INFINITY; distinct]; effective_k];
    let mut start = vec![vec![0usize; distinct]; effective_k];
    for j in 0..distinct {
        best[0][j] = cost(0, j);
    }
    for c in 1..effective_k {
        for j in c..distinct {
            let mut best_cost = f64::INFINITY;
            let mut best_start = c;
            for i in c..=j {
                let candidate = best[c - 1][i - 1] + cost(i, j);
                if candidate < best_cost {
                    best_cost = candidate;
                    best_start = i;
                }
            }
            best[c][j] = best_cost;
            start[c][j] = best_start;
        }
    }

    // Cluster index for each distinct point.
    let mut point_cluster = vec![0usize; distinct];
    let mut end = distinct - 1;
    for c in (0..effective_k).rev() {
        let first = if c == 0 { 0 } else { start[c][end] };
        for slot in &mut point_cluster[first..=end] {
            *slot = c;
        }
        if c > 0 {
            end = first - 1;
        }
    }

    let mut sums = vec![0.0; effective_k];
    let mut counts = vec![0usize; effective_k];
    let mut cluster_of_sorted = Vec::with_capacity(sorted.len());
    let mut p = 0;
    for &v in &sorted {
        while points[p] != v {
            p += 1;
        }
        let c = point_cluster[p];
        sums[c] += v;
        counts[c] += 1;
        cluster_of_sorted.push(c);
    }
    let centroids: Vec<f64> = sums.iter().zip(&counts).map(|(s, &n)| s / n as f64).collect();
    let within_sse = sorted
        .iter()
        .zip(&cluster_of_sorted)
        .map(|(&v, &c)| (v - centroids[c]) * (v - centroids[c]))
        .sum();

    let labels = values
        .iter()
        .map(|v| {
            let p = points.partition_point(|x| x < v);
            point_cluster[p]
        })
        .collect();

    Ok(Clustering1D { labels, centroids, within_sse, effective_k, requested_k: k })
}
