//! Masking image-feature components: a model that conditions on a subset of
//! independent components, built by averaging the full model over the
//! masked ones, loses nothing when the masked components carry no
//! information about `x`.
//!
//! Conditions are component tuples `(v_0, .., v_{d-1})` of the image feature
//! followed by one context value `w` standing for the text conditions, in
//! mixed radix with the context fastest.

use alloc::vec;
use alloc::vec::Vec;

use super::{expected_divergence, JointTable, Statistic, TheoremKind, TheoremReport, NORMALIZATION_TOLERANCE};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Clone, Debug, PartialEq)]
pub struct FactoredJoint {
    component_sizes: Vec<usize>,
    context_size: usize,
    x_size: usize,
    /// `probs[condition * |x| + x]`
    probs: Vec<f64>,
}

impl FactoredJoint {
    pub fn new(component_sizes: Vec<usize>, context_size: usize, x_size: usize, probs: Vec<f64>) -> Result<Self> {
        if component_sizes.contains(&0) || context_size == 0 || x_size == 0 {
            return Err(Error::invalid("alphabet sizes must be positive"));
        }
        let n_conditions: usize = component_sizes.iter().product::<usize>() * context_size;
        let expected = n_conditions * x_size;
        if probs.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: probs.len() });
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid("joint probabilities must be finite and non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::invalid(alloc::format!("joint sums to {total}, expected 1")));
        }
        Ok(Self { component_sizes, context_size, x_size, probs })
    }

    /// `q(v, w, x) = prod_j q_j(v_j) * q(w) * q(x | v, w)`.
    pub fn from_factors(
        component_marginals: &[Vec<f64>],
        context_marginal: &[f64],
        conditionals: &[Vec<f64>],
    ) -> Result<Self> {
        let component_sizes: Vec<usize> = component_marginals.iter().map(Vec::len).collect();
        let x_size = conditionals.first().map_or(0, Vec::len);
        let layout = Self { component_sizes, context_size: context_marginal.len(), x_size, probs: Vec::new() };
        if conditionals.len() != layout.n_conditions() {
            return Err(Error::DimensionMismatch { expected: layout.n_conditions(), found: conditionals.len() });
        }
        let mut probs = Vec::with_capacity(layout.n_conditions() * x_size);
        for (cond, given) in conditionals.iter().enumerate() {
            if given.len() != x_size {
                return Err(Error::DimensionMismatch { expected: x_size, found: given.len() });
            }
            let (values, w) = layout.decode(cond);
            let weight = values
                .iter()
                .zip(component_marginals)
                .fold(context_marginal[w], |acc, (&v, m)| acc * m[v]);
            probs.extend(given.iter().map(|p| weight * p));
        }
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        Self::new(layout.component_sizes, layout.context_size, x_size, probs)
    }

    pub fn component_sizes(&self) -> &[usize] {
        &self.component_sizes
    }

    pub fn context_size(&self) -> usize {
        self.context_size
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Component values and context of a condition index.
    pub fn decode(&self, condition: usize) -> (Vec<usize>, usize) {
        let w = condition % self.context_size;
        let mut rest = condition / self.context_size;
        let mut values = vec![0; self.component_sizes.len()];
        for (slot, &n) in values.iter_mut().zip(&self.component_sizes).rev() {
            *slot = rest % n;
            rest /= n;
        }
        (values, w)
    }

    pub fn encode(&self, values: &[usize], w: usize) -> usize {
        values.iter().zip(&self.component_sizes).fold(0, |acc, (&v, &n)| acc * n + v) * self.context_size + w
    }

    /// Marginal of component `j`.
    pub fn component_marginal(&self, j: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.component_sizes[j]];
        for c in 0..self.n_conditions() {
            m[self.decode(c).0[j]] += self.condition_prob(c);
        }
        m
    }

    pub fn context_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.context_size];
        for c in 0..self.n_conditions() {
            m[c % self.context_size] += self.condition_prob(c);
        }
        m
    }

    /// Components and context mutually independent under `q`.
    pub fn check_independent(&self, tol: f64) -> Result<()> {
        let marginals: Vec<Vec<f64>> = (0..self.component_sizes.len()).map(|j| self.component_marginal(j)).collect();
        let context = self.context_marginal();
        for c in 0..self.n_conditions() {
            let (values, w) = self.decode(c);
            let product = values.iter().zip(&marginals).fold(context[w], |acc, (&v, m)| acc * m[v]);
            if (self.condition_prob(c) - product).abs() > tol {
                return Err(Error::invalid(alloc::format!(
                    "image-feature components and context are not independent at condition {c}"
                )));
            }
        }
        Ok(())
    }

    /// Keep the first `kept` components and optionally the context, summing
    /// out the rest.
    pub fn marginalize(&self, kept: usize, keep_context: bool) -> Result<FactoredJoint> {
        if kept > self.component_sizes.len() {
            return Err(Error::invalid("cannot keep more components than exist"));
        }
        let sizes = self.component_sizes[..kept].to_vec();
        let context_size = if keep_context { self.context_size } else { 1 };
        let layout = Self { component_sizes: sizes, context_size, x_size: self.x_size, probs: Vec::new() };
        let mut probs = vec![0.0; layout.n_conditions() * self.x_size];
        for c in 0..self.n_conditions() {
            let (values, w) = self.decode(c);
            let target = layout.encode(&values[..kept], if keep_context { w } else { 0 });
            for x in 0..self.x_size {
                probs[target * self.x_size + x] += self.prob(c, x);
            }
        }
        Ok(Self { probs, ..layout })
    }

    /// Statistic `(v_0, .., v_{kept-1}, w)` indexed in this joint's radix.
    pub fn subset_statistic(&self, kept: usize) -> Result<Statistic> {
        let sub = Self {
            component_sizes: self.component_sizes[..kept.min(self.component_sizes.len())].to_vec(),
            context_size: self.context_size,
            x_size: self.x_size,
            probs: Vec::new(),
        };
        Statistic::from_fn(self.n_conditions(), sub.n_conditions(), |c| {
            let (values, w) = self.decode(c);
            sub.encode(&values[..kept.min(values.len())], w)
        })
    }
}

impl JointTable for FactoredJoint {
    fn x_size(&self) -> usize {
        self.x_size
    }

    fn n_conditions(&self) -> usize {
        self.component_sizes.iter().product::<usize>() * self.context_size
    }

    fn prob(&self, condition: usize, x: usize) -> f64 {
        self.probs[condition * self.x_size + x]
    }
}

/// Average a full-conditioning model over the masked components:
/// `p(x | sub, w) = sum_masked q(masked) p(x | sub, masked, w)`.
pub fn marginalized_model(joint: &FactoredJoint, kept: usize, full_model: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = joint.component_sizes.len();
    if kept > d {
        return Err(Error::invalid("cannot keep more components than exist"));
    }
    if full_model.len() != joint.n_conditions() {
        return Err(Error::DimensionMismatch { expected: joint.n_conditions(), found: full_model.len() });
    }
    let marginals: Vec<Vec<f64>> = (kept..d).map(|j| joint.component_marginal(j)).collect();
    let stat = joint.subset_statistic(kept)?;
    let mut rows = vec![vec![0.0; joint.x_size]; stat.n_values()];
    for (c, model_row) in full_model.iter().enumerate() {
        let (values, _) = joint.decode(c);
        let weight = values[kept..].iter().zip(&marginals).fold(1.0, |acc, (&v, m)| acc * m[v]);
        for (slot, p) in rows[stat.value(c)].iter_mut().zip(model_row) {
            *slot += weight * p;
        }
    }
    Ok(rows)
}

/// `d_rhs` is the divergence D1 of the full model, `d_lhs` the divergence D2
/// of the subset model on the first `kept` components plus context.
///
/// The assumption compares, on the image feature alone, the divergence of
/// `q(x | e1)` against the context-averaged subset model with that of
/// `q(x | e1_sub)`; it holds when the first does not exceed the second.
pub fn verify_theorem1(
    joint: &FactoredJoint,
    kept: usize,
    full_model: &[Vec<f64>],
    subset_model: &[Vec<f64>],
) -> Result<TheoremReport> {
    joint.check_independent(1e-12)?;
    if kept > joint.component_sizes.len() {
        return Err(Error::invalid("cannot keep more components than exist"));
    }
    for row in full_model.iter().chain(subset_model) {
        super::check_distribution(row)?;
    }
    let d1 = expected_divergence(joint, full_model, &Statistic::identity(joint.n_conditions()))?;
    let stat = joint.subset_statistic(kept)?;
    let d2 = expected_divergence(joint, subset_model, &stat)?;

    // Image-only view: sum out the context.
    let context = joint.context_marginal();
    let w_size = joint.context_size;
    if subset_model.len() != stat.n_values() {
        return Err(Error::DimensionMismatch { expected: stat.n_values(), found: subset_model.len() });
    }
    let image_model: Vec<Vec<f64>> = subset_model
        .chunks(w_size)
        .map(|per_w| {
            (0..joint.x_size)
                .map(|x| per_w.iter().zip(&context).map(|(row, qw)| qw * row[x]).sum())
                .collect()
        })
        .collect();
    let image = joint.marginalize(joint.component_sizes.len(), false)?;
    let image_sub = joint.marginalize(kept, false)?;
    let image_stat = image.subset_statistic(kept)?;
    let lhs = expected_divergence(&image, &image_model, &image_stat)?;
    let rhs = expected_divergence(&image_sub, &image_model, &Statistic::identity(image_sub.n_conditions()))?;

    let mut sizes = joint.component_sizes.clone();
    sizes.extend([joint.context_size, joint.x_size, kept]);
    let mut report = TheoremReport::new(TheoremKind::MaskingDivergence, sizes, d2, d1);
    report.assumption_holds = Some(lhs <= rhs + super::THEOREM_TOLERANCE);
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Theorem1Sizes {
    pub components: usize,
    pub component_size: usize,
    pub kept: usize,
    pub context: usize,
    pub x: usize,
}

impl Default for Theorem1Sizes {
    fn default() -> Self {
        Self { components: 3, component_size: 2, kept: 2, context: 2, x: 3 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Theorem1Trial {
    pub joint: FactoredJoint,
    pub kept: usize,
    pub full_model: Vec<Vec<f64>>,
    pub subset_model: Vec<Vec<f64>>,
    /// `q(x | e1, w)` was drawn ignoring the masked components.
    pub masked_uninformative: bool,
    pub seed: u64,
}

impl Theorem1Trial {
    pub fn verify(&self) -> Result<TheoremReport> {
        Ok(verify_theorem1(&self.joint, self.kept, &self.full_model, &self.subset_model)?.with_seed(Some(self.seed)))
    }
}

/// Seeded trial: independent components and context, a random full model,
/// and the subset model obtained by averaging it over the masked
/// components. Half the trials draw `q(x | e1, w)` that ignores the masked
/// components.
pub fn random_theorem1_trial(seed: u64, sizes: Theorem1Sizes) -> Result<Theorem1Trial> {
    if sizes.components == 0 || sizes.component_size == 0 || sizes.context == 0 || sizes.x == 0 {
        return Err(Error::invalid("alphabet sizes must be positive"));
    }
    if sizes.kept > sizes.components {
        return Err(Error::invalid("cannot keep more components than exist"));
    }
    let n_conditions = libm::pow(sizes.component_size as f64, sizes.components as f64) as usize * sizes.context;
    if n_conditions * sizes.x > 1 << 20 {
        return Err(Error::Capacity(alloc::format!("{n_conditions} conditions is too many to tabulate")));
    }
    let mut rng = SeededRng::new(seed);
    let marginals: Vec<Vec<f64>> = (0..sizes.components).map(|_| rng.simplex(sizes.component_size, 1.0)).collect();
    let context = rng.simplex(sizes.context, 1.0);
    let masked_uninformative = rng.uniform() < 0.5;

    let layout = FactoredJoint::new(
        vec![sizes.component_size; sizes.components],
        sizes.context,
        1,
        vec![1.0 / n_conditions as f64; n_conditions],
    )?;
    let stat = layout.subset_statistic(sizes.kept)?;
    let conditionals: Vec<Vec<f64>> = if masked_uninformative {
        let per_subset: Vec<Vec<f64>> = (0..stat.n_values()).map(|_| rng.simplex(sizes.x, 1.5)).collect();
        (0..n_conditions).map(|c| per_subset[stat.value(c)].clone()).collect()
    } else {
        (0..n_conditions).map(|_| rng.simplex(sizes.x, 1.5)).collect()
    };
    let joint = FactoredJoint::from_factors(&marginals, &context, &conditionals)?;
    let full_model: Vec<Vec<f64>> = (0..n_conditions).map(|_| rng.simplex(sizes.x, 1.0)).collect();
    let subset_model = marginalized_model(&joint, sizes.kept, &full_model)?;
    Ok(Theorem1Trial { joint, kept: sizes.kept, full_model, subset_model, masked_uninformative, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::optimal_restricted_model;

    #[test]
    fn radix_round_trip() {
        let j = FactoredJoint::new(vec![2, 3], 2, 1, vec![1.0 / 12.0; 12]).unwrap();
        for c in 0..12 {
            let (v, w) = j.decode(c);
            assert_eq!(j.encode(&v, w), c);
        }
        assert_eq!(j.decode(7), (vec![1, 0], 1));
    }

    #[test]
    fn nothing_masked_gives_equal_sides() {
        for seed in 0..20 {
            let sizes = Theorem1Sizes { kept: 3, ..Theorem1Sizes::default() };
            let report = random_theorem1_trial(seed, sizes).unwrap().verify().unwrap();
            assert_eq!(report.d_lhs, report.d_rhs);
            assert_eq!(report.assumption_holds, Some(true));
            assert!(report.holds);
        }
    }

    #[test]
    fn exact_conditionals_make_assumption_bite() {
        let trial = random_theorem1_trial(5, Theorem1Sizes::default()).unwrap();
        let joint = &trial.joint;
        let full = optimal_restricted_model(joint, &Statistic::identity(joint.n_conditions())).unwrap();
        let subset = optimal_restricted_model(joint, &joint.subset_statistic(2).unwrap()).unwrap();
        let report = verify_theorem1(joint, 2, &full.rows, &subset.rows).unwrap();
        assert!(report.d_rhs.abs() < 1e-12);
        if !trial.masked_uninformative {
            assert_eq!(report.assumption_holds, Some(false));
        }
    }

    #[test]
    fn uninformative_masked_components_never_hurt() {
        let mut checked = 0;
        for seed in 0..200 {
            let trial = random_theorem1_trial(seed, Theorem1Sizes::default()).unwrap();
            let report = trial.verify().unwrap();
            if trial.masked_uninformative {
                assert_eq!(report.assumption_holds, Some(true), "seed {seed}");
                checked += 1;
            }
            if report.assumption_holds == Some(true) {
                assert!(report.holds, "seed {seed}: {report:?}");
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn dependent_components_are_rejected() {
        // Two perfectly correlated binary components.
        let probs = vec![0.5, 0.0, 0.0, 0.5];
        let j = FactoredJoint::new(vec![2, 2], 1, 1, probs).unwrap();
        let model = vec![vec![1.0]; 4];
        let sub = vec![vec![1.0]; 2];
        assert!(matches!(verify_theorem1(&j, 1, &model, &sub), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn context_interaction_escapes_the_image_only_assumption() {
        // x = masked XOR w. On the image feature alone x looks like a fair
        // coin whatever is masked, so the assumption holds; but the averaged
        // subset model cannot recover the interaction and D2 > D1 = 0.
        let half = vec![0.5, 0.5];
        let conditionals: Vec<Vec<f64>> = (0..8)
            .map(|c| {
                let (masked, w) = ((c / 2) % 2, c % 2);
                if masked ^ w == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] }
            })
            .collect();
        let joint = FactoredJoint::from_factors(&[half.clone(), half.clone()], &half, &conditionals).unwrap();
        let full = conditionals.clone();
        let subset = marginalized_model(&joint, 1, &full).unwrap();
        let report = verify_theorem1(&joint, 1, &full, &subset).unwrap();
        assert_eq!(report.assumption_holds, Some(true));
        assert!(report.d_rhs == 0.0);
        assert!((report.d_lhs - core::f64::consts::LN_2).abs() < 1e-12);
        assert!(!report.holds);
    }
}
