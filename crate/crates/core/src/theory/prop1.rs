//! Per-pair check that top-by-product selection removes the most shared
//! signal, both as a subset sum and as residual energy.

use alloc::vec::Vec;

use super::{TheoremKind, TheoremReport};
use crate::energy::residual_content_energy;
use crate::error::{Error, Result};
use crate::mask::{abs_difference, apply_mask, elementwise_product, top_count_mask, verify_selection_dominance, MAX_EXHAUSTIVE_DIM};
use crate::rng::SeededRng;
use crate::vector::FeatureVector;

/// Random-pair dimensions are drawn from `min_dim..=max_dim`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Prop1Sizes {
    pub min_dim: usize,
    pub max_dim: usize,
}

impl Default for Prop1Sizes {
    fn default() -> Self {
        Self { min_dim: 1, max_dim: 12 }
    }
}

/// Check every `m` in `0..=dim` for one pair.
///
/// `d_lhs` is the worst shortfall of the selected subset: the larger of
/// `best_subset_sum - selected_sum` and the energy deficit of the product
/// mask against the |difference| mask. `d_rhs` is zero.
pub fn verify_proposition1(e1: &FeatureVector, e2: &FeatureVector, temperature: f64) -> Result<TheoremReport> {
    let d = e1.dim();
    let products = elementwise_product(e1, e2)?;
    let diffs = abs_difference(e1, e2)?;
    let mut worst = 0.0f64;
    let mut all_hold = true;
    for m in 0..=d {
        let dominance = verify_selection_dominance(e1, e2, m)?;
        all_hold &= dominance.holds;
        worst = worst.max(dominance.best_subset_sum - dominance.selected_sum);

        let by_product = apply_mask(e1, &top_count_mask(&products, m)?)?;
        let by_diff = apply_mask(e1, &top_count_mask(&diffs, m)?)?;
        let product_energy = residual_content_energy(&by_product, e2, temperature)?;
        let diff_energy = residual_content_energy(&by_diff, e2, temperature)?;
        let deficit = diff_energy - product_energy;
        all_hold &= deficit <= 1e-12 * (1.0 + diff_energy.abs());
        worst = worst.max(deficit);
    }
    let mut report = TheoremReport::new(TheoremKind::SelectionDominance, alloc::vec![d], worst, 0.0);
    report.holds = all_hold && report.holds;
    Ok(report)
}

/// One seeded random pair with entries uniform in `[-1, 1]`.
pub fn prop1_trial(seed: u64, sizes: Prop1Sizes) -> Result<TheoremReport> {
    if sizes.min_dim == 0 || sizes.min_dim > sizes.max_dim || sizes.max_dim > MAX_EXHAUSTIVE_DIM {
        return Err(Error::invalid(alloc::format!(
            "dimension range {}..={} must lie within 1..={MAX_EXHAUSTIVE_DIM}",
            sizes.min_dim,
            sizes.max_dim
        )));
    }
    let mut rng = SeededRng::new(seed);
    let d = sizes.min_dim + rng.below(sizes.max_dim - sizes.min_dim + 1);
    let mut draw = || -> Vec<f64> { (0..d).map(|_| rng.range(-1.0, 1.0)).collect() };
    let e1 = FeatureVector::new(draw())?;
    let e2 = FeatureVector::new(draw())?;
    Ok(verify_proposition1(&e1, &e2, 1.0)?.with_seed(Some(seed)))
}
