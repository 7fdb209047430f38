//! Exact finite-probability checks of the divergence inequalities behind
//! condition masking.
//!
//! Everything is computed on enumerable tables: a joint `q(x, conditions)`
//! over small alphabets, models given as conditional tables `p(x | s)` where
//! `s` is a statistic of the conditions, and the divergence is KL in nats.
//! Minimisation over adapter families is exhaustive over finite grids.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

mod joint;
mod prop1;
mod theorem1;
mod theorem2;

pub use joint::{random_instance, DiscreteJoint, JointSizes, MAX_ALPHABET};
pub use prop1::{prop1_trial, verify_proposition1, Prop1Sizes};
pub use theorem1::{
    marginalized_model, random_theorem1_trial, verify_theorem1, FactoredJoint, Theorem1Sizes,
    Theorem1Trial,
};
pub use theorem2::{
    adapter_cost_table, verify_theorem2, FrozenReadout, Theorem2Instance, Theorem2Sizes,
    MAX_EVALUATIONS,
};

/// Slack allowed in `d_lhs <= d_rhs`.
pub const THEOREM_TOLERANCE: f64 = 1e-9;

/// Tolerance on probability-table normalisation.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// A joint table `q(x, condition)` over finite alphabets.
pub trait JointTable {
    fn x_size(&self) -> usize;
    fn n_conditions(&self) -> usize;
    /// Joint mass `q(x, condition)`.
    fn prob(&self, condition: usize, x: usize) -> f64;

    fn condition_prob(&self, condition: usize) -> f64 {
        (0..self.x_size()).map(|x| self.prob(condition, x)).sum()
    }

    /// `q(x | condition)`; uniform when the condition has no mass.
    fn conditional(&self, condition: usize) -> Vec<f64> {
        let total = self.condition_prob(condition);
        let n = self.x_size();
        if total > 0.0 {
            (0..n).map(|x| self.prob(condition, x) / total).collect()
        } else {
            vec![1.0 / n as f64; n]
        }
    }
}

/// A deterministic map from condition index to a statistic value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Statistic {
    map: Vec<usize>,
    n_values: usize,
}

impl Statistic {
    pub fn new(map: Vec<usize>, n_values: usize) -> Result<Self> {
        if let Some(&bad) = map.iter().find(|&&v| v >= n_values) {
            return Err(Error::invalid(alloc::format!(
                "statistic value {bad} outside 0..{n_values}"
            )));
        }
        Ok(Self { map, n_values })
    }

    pub fn from_fn(n_conditions: usize, n_values: usize, f: impl Fn(usize) -> usize) -> Result<Self> {
        Self::new((0..n_conditions).map(f).collect(), n_values)
    }

    pub fn identity(n_conditions: usize) -> Self {
        Self { map: (0..n_conditions).collect(), n_values: n_conditions }
    }

    pub fn constant(n_conditions: usize) -> Self {
        Self { map: vec![0; n_conditions], n_values: 1 }
    }

    pub fn value(&self, condition: usize) -> usize {
        self.map[condition]
    }

    pub fn n_values(&self) -> usize {
        self.n_values
    }

    pub fn n_conditions(&self) -> usize {
        self.map.len()
    }
}

/// A model `p(x | s)` indexed by statistic value.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalModel {
    pub rows: Vec<Vec<f64>>,
    /// Statistic values with no mass under `q`; their rows are uniform.
    pub empty_rows: Vec<usize>,
}

impl ConditionalModel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            check_distribution(row).map_err(|e| match e {
                Error::InvalidParameter(msg) => Error::invalid(alloc::format!("model row {i}: {msg}")),
                other => other,
            })?;
        }
        Ok(Self { rows, empty_rows: Vec::new() })
    }
}

pub(crate) fn check_distribution(row: &[f64]) -> Result<()> {
    if row.is_empty() {
        return Err(Error::Empty("distribution"));
    }
    if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::invalid("probabilities must be finite and non-negative"));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE * row.len() as f64 {
        return Err(Error::invalid(alloc::format!("probabilities sum to {total}, expected 1")));
    }
    Ok(())
}

/// KL(p || q) in nats with `0 ln 0 = 0`; `+inf` when `q` misses mass of `p`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&pi, &qi)| {
            if pi == 0.0 {
                0.0
            } else if qi == 0.0 {
                f64::INFINITY
            } else {
                pi * libm::log(pi / qi)
            }
        })
        .sum()
}

/// The best model that sees only `statistic`: `p*(x | s) = q(x | S = s)`.
pub fn optimal_restricted_model(q: &impl JointTable, statistic: &Statistic) -> Result<ConditionalModel> {
    check_statistic(q, statistic)?;
    let n = q.x_size();
    let mut rows = vec![vec![0.0; n]; statistic.n_values()];
    for c in 0..q.n_conditions() {
        let row = &mut rows[statistic.value(c)];
        for (x, slot) in row.iter_mut().enumerate() {
            *slot += q.prob(c, x);
        }
    }
    let mut empty_rows = Vec::new();
    for (s, row) in rows.iter_mut().enumerate() {
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|p| *p /= total);
        } else {
            row.iter_mut().for_each(|p| *p = 1.0 / n as f64);
            empty_rows.push(s);
        }
    }
    Ok(ConditionalModel { rows, empty_rows })
}

/// `sum_c q(c) KL(q(x | c) || model(x | S(c)))`.
pub fn expected_divergence(
    q: &impl JointTable,
    model: &[Vec<f64>],
    statistic: &Statistic,
) -> Result<f64> {
    check_statistic(q, statistic)?;
    if model.len() < statistic.n_values() {
        return Err(Error::invalid(alloc::format!(
            "model has {} rows but the statistic takes {} values",
            model.len(),
            statistic.n_values()
        )));
    }
    if let Some(row) = model.iter().find(|r| r.len() != q.x_size()) {
        return Err(Error::DimensionMismatch { expected: q.x_size(), found: row.len() });
    }
    let mut total = 0.0;
    for c in 0..q.n_conditions() {
        let weight = q.condition_prob(c);
        if weight == 0.0 {
            continue;
        }
        total += weight * kl_divergence(&q.conditional(c), &model[statistic.value(c)]);
    }
    Ok(total)
}

fn check_statistic(q: &impl JointTable, statistic: &Statistic) -> Result<()> {
    if statistic.n_conditions() != q.n_conditions() {
        return Err(Error::DimensionMismatch {
            expected: q.n_conditions(),
            found: statistic.n_conditions(),
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum TheoremKind {
    #[cfg_attr(feature = "serde", serde(rename = "1"))]
    MaskingDivergence,
    #[cfg_attr(feature = "serde", serde(rename = "2"))]
    AdapterFamilies,
    #[cfg_attr(feature = "serde", serde(rename = "prop1"))]
    SelectionDominance,
}

impl TheoremKind {
    pub fn label(self) -> &'static str {
        match self {
            TheoremKind::MaskingDivergence => "1",
            TheoremKind::AdapterFamilies => "2",
            TheoremKind::SelectionDominance => "prop1",
        }
    }
}

/// Both sides of a checked inequality `d_lhs <= d_rhs` for one instance.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TheoremReport {
    pub theorem: TheoremKind,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub seed: Option<u64>,
    pub sizes: Vec<usize>,
    pub d_lhs: f64,
    pub d_rhs: f64,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub assumption_holds: Option<bool>,
    pub holds: bool,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub note: Option<String>,
}

impl TheoremReport {
    pub fn new(theorem: TheoremKind, sizes: Vec<usize>, d_lhs: f64, d_rhs: f64) -> Self {
        Self {
            theorem,
            seed: None,
            sizes,
            d_lhs,
            d_rhs,
            assumption_holds: None,
            holds: d_lhs <= d_rhs + THEOREM_TOLERANCE,
            note: None,
        }
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    /// A counterexample: the claim failed where it was expected to hold.
    pub fn is_violation(&self) -> bool {
        !self.holds && self.assumption_holds.unwrap_or(true)
    }
}
