//! Order statistics and order-independent reductions.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Inclusive linear-interpolation percentiles: rank `p / 100 * (n - 1)` on
/// the sorted sample.
pub fn percentiles(values: &[f64], ps: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Empty("values"));
    }
    if let Some(&p) = ps.iter().find(|p| !(0.0..=100.0).contains(*p)) {
        return Err(Error::invalid(alloc::format!("percentile {p} outside [0, 100]")));
    }
    if let Some(index) = values.iter().position(|v| v.is_nan()) {
        return Err(Error::NonFinite { row: None, index });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let last = sorted.len() - 1;
    Ok(ps
        .iter()
        .map(|&p| {
            let rank = p / 100.0 * last as f64;
            let lo = libm::floor(rank) as usize;
            let hi = (lo + 1).min(last);
            let frac = rank - lo as f64;
            if frac == 0.0 {
                sorted[lo]
            } else {
                sorted[lo] + (sorted[hi] - sorted[lo]) * frac
            }
        })
        .collect())
}

/// Mean that depends only on the multiset of inputs: values are sorted
/// before a fixed-shape pairwise summation.
pub fn canonical_mean(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    pairwise_sum(&sorted) / values.len() as f64
}

fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}
