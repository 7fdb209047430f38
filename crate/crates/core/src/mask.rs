//! Masking strategies over the element-wise product feature.

use alloc::vec::Vec;

use crate::error::{check_dims, Error, Result};
use crate::kmeans::{kmeans_1d, Clustering1D};
use crate::rng::SeededRng;
use crate::vector::{FeatureVector, MaskVector};

/// Default cluster count for the clustering strategies.
pub const DEFAULT_K: usize = 2;

/// Largest dimension accepted by [`verify_selection_dominance`].
pub const MAX_EXHAUSTIVE_DIM: usize = 20;

pub fn elementwise_product(e1: &FeatureVector, e2: &FeatureVector) -> Result<FeatureVector> {
    e1.zip_with(e2, |a, b| a * b)
}

pub fn abs_difference(e1: &FeatureVector, e2: &FeatureVector) -> Result<FeatureVector> {
    e1.zip_with(e2, |a, b| (a - b).abs())
}

/// Zero the entries where the mask is 0. Masked slots become `+0.0`.
pub fn apply_mask(e1: &FeatureVector, m: &MaskVector) -> Result<FeatureVector> {
    check_dims(e1.dim(), m.dim())?;
    FeatureVector::new(
        e1.iter().zip(m.bits()).map(|(&v, &keep)| if keep { v } else { 0.0 }).collect(),
    )
}

/// A cluster-derived mask together with the clustering that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterMask {
    pub mask: MaskVector,
    pub clustering: Clustering1D,
}

/// Cluster `scores` and mask the single highest-centroid cluster. With only
/// one effective cluster nothing is masked.
pub fn cluster_mask(scores: &FeatureVector, k: usize) -> Result<ClusterMask> {
    let clustering = kmeans_1d(scores, k)?;
    let bits = if clustering.effective_k < 2 {
        alloc::vec![true; scores.dim()]
    } else {
        let top = clustering.top_cluster();
        clustering.labels.iter().map(|&l| l != top).collect()
    };
    Ok(ClusterMask { mask: MaskVector::new(bits)?, clustering })
}

pub fn build_cluster_mask(ep: &FeatureVector, k: usize) -> Result<MaskVector> {
    cluster_mask(ep, k).map(|c| c.mask)
}

pub fn build_absdiff_mask(e1: &FeatureVector, e2: &FeatureVector, k: usize) -> Result<MaskVector> {
    build_cluster_mask(&abs_difference(e1, e2)?, k)
}

/// `round_half_up(fraction * dim)`.
pub fn masked_count(fraction: f64, dim: usize) -> Result<usize> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid(alloc::format!("fraction {fraction} outside [0, 1]")));
    }
    // The epsilon makes decimal halves such as 0.35 * 10 round up.
    let count = libm::floor(fraction * dim as f64 + 0.5 + 1e-9) as usize;
    Ok(count.min(dim))
}

/// Mask the `count` largest scores; ties go to the lower index.
pub fn top_count_mask(scores: &[f64], count: usize) -> Result<MaskVector> {
    let mut bits = alloc::vec![true; scores.len()];
    for i in top_indices(scores, count) {
        bits[i] = false;
    }
    MaskVector::new(bits)
}

pub(crate) fn top_indices(scores: &[f64], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(count.min(scores.len()));
    order
}

pub fn build_top_fraction_mask(ep: &FeatureVector, fraction: f64) -> Result<MaskVector> {
    top_count_mask(ep, masked_count(fraction, ep.dim())?)
}

/// Which elements of the image feature to drop.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case"))]
pub enum MaskStrategy {
    /// Cluster `e1 * e2`, mask the highest-means cluster.
    ProductCluster { k: usize },
    /// Cluster `|e1 - e2|`, mask the highest-means cluster.
    AbsDiffCluster { k: usize },
    /// Mask a fixed proportion of the largest products.
    TopFraction { fraction: f64 },
    /// Mask a fixed proportion of uniformly chosen elements.
    Random { fraction: f64, seed: u64 },
}

impl MaskStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MaskStrategy::ProductCluster { k } | MaskStrategy::AbsDiffCluster { k } if k == 0 => {
                Err(Error::invalid("k must be at least 1"))
            }
            MaskStrategy::TopFraction { fraction } | MaskStrategy::Random { fraction, .. } => {
                masked_count(fraction, 1).map(|_| ())
            }
            _ => Ok(()),
        }
    }

    /// Build the mask for one (image feature, content text feature) pair.
    /// `row` perturbs the random strategy's seed so rows differ.
    pub fn build(&self, e1: &FeatureVector, e2: &FeatureVector, row: u64) -> Result<MaskOutcome> {
        check_dims(e1.dim(), e2.dim())?;
        self.validate()?;
        let outcome = match *self {
            MaskStrategy::ProductCluster { k } => {
                let c = cluster_mask(&elementwise_product(e1, e2)?, k)?;
                MaskOutcome { mask: c.mask, collapsed: c.clustering.collapsed() }
            }
            MaskStrategy::AbsDiffCluster { k } => {
                let c = cluster_mask(&abs_difference(e1, e2)?, k)?;
                MaskOutcome { mask: c.mask, collapsed: c.clustering.collapsed() }
            }
            MaskStrategy::TopFraction { fraction } => MaskOutcome {
                mask: build_top_fraction_mask(&elementwise_product(e1, e2)?, fraction)?,
                collapsed: false,
            },
            MaskStrategy::Random { fraction, seed } => {
                let count = masked_count(fraction, e1.dim())?;
                let mut rng = SeededRng::new(seed ^ row.wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let mut bits = alloc::vec![true; e1.dim()];
                for i in rng.choose_indices(e1.dim(), count) {
                    bits[i] = false;
                }
                MaskOutcome { mask: MaskVector::new(bits)?, collapsed: false }
            }
        };
        Ok(outcome)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskOutcome {
    pub mask: MaskVector,
    /// The clustering had fewer distinct values than requested clusters.
    pub collapsed: bool,
}

/// Outcome of the exhaustive subset check behind [`verify_selection_dominance`].
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DominanceReport {
    pub holds: bool,
    pub best_subset_sum: f64,
    pub selected_sum: f64,
    pub tie_count: u64,
}

/// Check that dropping the `m_count` largest products removes the largest
/// possible share of `<e1, e2>`: no `m_count`-subset `S` has a larger
/// `sum_{i in S} e1[i] * e2[i]` than the top-by-product subset.
///
/// Every subset is enumerated, so `dim` is capped at [`MAX_EXHAUSTIVE_DIM`].
pub fn verify_selection_dominance(
    e1: &FeatureVector,
    e2: &FeatureVector,
    m_count: usize,
) -> Result<DominanceReport> {
    let products = elementwise_product(e1, e2)?;
    let d = products.dim();
    if d > MAX_EXHAUSTIVE_DIM {
        return Err(Error::Capacity(alloc::format!(
            "exhaustive dominance check supports dim <= {MAX_EXHAUSTIVE_DIM}, got {d}; use a sampled check"
        )));
    }
    if m_count > d {
        return Err(Error::invalid(alloc::format!("m_count {m_count} exceeds dim {d}")));
    }

    // Sums always run over ascending indices so the selected subset's sum is
    // computed exactly as it is during enumeration.
    let subset_sum = |bits: u32| -> f64 {
        (0..d).filter(|i| bits & (1 << i) != 0).map(|i| products[i]).sum()
    };
    let selected: u32 = top_indices(&products, m_count).iter().fold(0, |acc, &i| acc | (1 << i));
    let selected_sum = subset_sum(selected);
    let scale = products.iter().map(|p| p.abs()).sum::<f64>().max(1.0);
    let tol = 1e-12 * scale;

    let mut sums = Vec::new();
    for_each_subset(d, m_count, |bits| sums.push(subset_sum(bits)));
    let best_subset_sum = sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tie_count = sums.iter().filter(|&&s| (s - best_subset_sum).abs() <= tol).count() as u64;

    Ok(DominanceReport {
        holds: best_subset_sum <= selected_sum + tol,
        best_subset_sum,
        selected_sum,
        tie_count,
    })
}

/// Visit every `m`-subset of `0..n` as a bitmask (Gosper's hack), `n <= 31`.
pub(crate) fn for_each_subset(n: usize, m: usize, mut visit: impl FnMut(u32)) {
    if m == 0 {
        visit(0);
        return;
    }
    let limit = 1u64 << n;
    let mut bits: u64 = (1u64 << m) - 1;
    while bits < limit {
        visit(bits as u32);
        let lowest = bits & bits.wrapping_neg();
        let ripple = bits + lowest;
        bits = (((ripple ^ bits) >> 2) / lowest) | ripple;
    }
}
