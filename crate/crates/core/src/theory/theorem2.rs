//! Adapter families over a frozen readout.
//!
//! The frozen readout `theta(x | Q(e), c3)` sees a quantized scalar image
//! feature. An image adapter `psi` picks one shift per `c1` value; a text
//! adapter `phi` picks one shift per content label `c2 = f(c1)`, so every
//! `phi` is the `psi` given by `phi o f` and the image family can only do
//! better.

use alloc::vec;
use alloc::vec::Vec;

use super::joint::{random_instance_with, DiscreteJoint, JointSizes};
use super::{check_distribution, kl_divergence, JointTable, TheoremKind, TheoremReport};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Budget for exhaustive assignment enumeration.
pub const MAX_EVALUATIONS: u64 = 10_000_000;

/// `theta(x | lattice point, c3)`, rows stored `[(l * |c3| + c3) * |x| + x]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrozenReadout {
    lattice: usize,
    c3_size: usize,
    x_size: usize,
    rows: Vec<f64>,
}

impl FrozenReadout {
    pub fn new(lattice: usize, c3_size: usize, x_size: usize, rows: Vec<f64>) -> Result<Self> {
        if lattice == 0 || c3_size == 0 || x_size == 0 {
            return Err(Error::invalid("readout sizes must be positive"));
        }
        let expected = lattice * c3_size * x_size;
        if rows.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: rows.len() });
        }
        for row in rows.chunks(x_size) {
            check_distribution(row)?;
        }
        Ok(Self { lattice, c3_size, x_size, rows })
    }

    /// A readout whose rows do not depend on the feature.
    pub fn feature_blind(lattice: usize, per_c3: &[Vec<f64>]) -> Result<Self> {
        let x_size = per_c3.first().map_or(0, Vec::len);
        let rows = (0..lattice).flat_map(|_| per_c3.iter().flatten().copied()).collect();
        Self::new(lattice, per_c3.len(), x_size, rows)
    }

    pub fn lattice(&self) -> usize {
        self.lattice
    }

    /// Nearest lattice point `0..lattice`, clamped at the ends.
    pub fn quantize(&self, feature: f64) -> usize {
        let r = libm::round(feature);
        if r <= 0.0 {
            0
        } else {
            (r as usize).min(self.lattice - 1)
        }
    }

    pub fn row(&self, point: usize, c3: usize) -> &[f64] {
        let start = (point * self.c3_size + c3) * self.x_size;
        &self.rows[start..start + self.x_size]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Theorem2Sizes {
    pub joint: JointSizes,
    pub lattice: usize,
    pub shifts: usize,
}

impl Default for Theorem2Sizes {
    fn default() -> Self {
        Self { joint: JointSizes { x: 3, c1: 4, c2: 2, c3: 2 }, lattice: 7, shifts: 5 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Theorem2Instance {
    pub joint: DiscreteJoint,
    /// Scalar image feature `e1(c1)`.
    pub c1_features: Vec<f64>,
    pub readout: FrozenReadout,
    /// Shift grid shared by both adapter families.
    pub shifts: Vec<f64>,
    pub seed: Option<u64>,
}

impl Theorem2Instance {
    pub fn new(
        joint: DiscreteJoint,
        c1_features: Vec<f64>,
        readout: FrozenReadout,
        shifts: Vec<f64>,
    ) -> Result<Self> {
        let sizes = joint.sizes();
        if c1_features.len() != sizes.c1 {
            return Err(Error::DimensionMismatch { expected: sizes.c1, found: c1_features.len() });
        }
        if c1_features.iter().chain(&shifts).any(|v| !v.is_finite()) {
            return Err(Error::invalid("features and shifts must be finite"));
        }
        if shifts.is_empty() {
            return Err(Error::Empty("shift grid"));
        }
        if readout.c3_size != sizes.c3 || readout.x_size != sizes.x {
            return Err(Error::invalid("readout alphabet does not match the joint"));
        }
        Ok(Self { joint, c1_features, readout, shifts, seed: None })
    }

    /// Seeded instance: sharp conditionals and readout rows, features on
    /// the lattice range, shifts evenly spaced over half the lattice width
    /// on either side.
    pub fn random(seed: u64, sizes: Theorem2Sizes) -> Result<Self> {
        if sizes.lattice == 0 || sizes.shifts == 0 {
            return Err(Error::invalid("lattice and shift grid must be non-empty"));
        }
        let mut rng = SeededRng::new(seed);
        let joint = random_instance_with(&mut rng, sizes.joint, 2.0)?;
        let top = (sizes.lattice - 1) as f64;
        let c1_features = (0..sizes.joint.c1).map(|_| rng.range(0.0, top)).collect();
        let rows = (0..sizes.lattice * sizes.joint.c3)
            .flat_map(|_| rng.simplex(sizes.joint.x, 2.0))
            .collect();
        let readout = FrozenReadout::new(sizes.lattice, sizes.joint.c3, sizes.joint.x, rows)?;
        let half = top / 2.0;
        let shifts = if sizes.shifts == 1 {
            vec![0.0]
        } else {
            let step = 2.0 * half / (sizes.shifts - 1) as f64;
            (0..sizes.shifts).map(|i| -half + step * i as f64).collect()
        };
        let mut instance = Self::new(joint, c1_features, readout, shifts)?;
        instance.seed = Some(seed);
        Ok(instance)
    }
}

/// `cost[c1][s] = sum_c3 q(c1, c3) KL(q(x | c1, c3) || theta(x | Q(e1(c1) - shift_s), c3))`.
pub fn adapter_cost_table(instance: &Theorem2Instance) -> Vec<Vec<f64>> {
    let joint = &instance.joint;
    let sizes = joint.sizes();
    (0..sizes.c1)
        .map(|c1| {
            instance
                .shifts
                .iter()
                .map(|&shift| {
                    let point = instance.readout.quantize(instance.c1_features[c1] - shift);
                    (0..sizes.c3)
                        .map(|c3| {
                            let cond = joint.condition(c1, c3);
                            let weight = joint.condition_prob(cond);
                            if weight == 0.0 {
                                0.0
                            } else {
                                weight * kl_divergence(&joint.conditional(cond), instance.readout.row(point, c3))
                            }
                        })
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// Objective of a per-`c1` shift assignment, summed in ascending `c1`.
fn objective(cost: &[Vec<f64>], shift_of_c1: impl Fn(usize) -> usize) -> f64 {
    cost.iter().enumerate().map(|(c1, row)| row[shift_of_c1(c1)]).sum()
}

/// Minimum over all assignments `0..labels -> 0..n_shifts` by odometer.
fn exhaustive_min(labels: usize, n_shifts: usize, eval: impl Fn(&[usize]) -> f64) -> f64 {
    let mut assignment = vec![0usize; labels];
    let mut best = f64::INFINITY;
    loop {
        best = best.min(eval(&assignment));
        let mut i = 0;
        loop {
            if i == labels {
                return best;
            }
            assignment[i] += 1;
            if assignment[i] < n_shifts {
                break;
            }
            assignment[i] = 0;
            i += 1;
        }
    }
}

/// Compare the best image adapter (`d_lhs`) with the best text adapter
/// (`d_rhs`). The exhaustive route enumerates every assignment; the other
/// route minimises each label's share of the separable objective.
pub fn verify_theorem2(instance: &Theorem2Instance, exhaustive: bool) -> Result<TheoremReport> {
    let sizes = instance.joint.sizes();
    let map = instance.joint.content_map();
    let n_shifts = instance.shifts.len();
    let cost = adapter_cost_table(instance);

    let (d_lhs, d_rhs) = if exhaustive {
        let count = |labels: usize| (n_shifts as u64).checked_pow(labels as u32);
        let total = count(sizes.c1).zip(count(sizes.c2)).and_then(|(a, b)| a.checked_add(b));
        match total {
            Some(t) if t <= MAX_EVALUATIONS => {}
            _ => {
                return Err(Error::Capacity(alloc::format!(
                    "{n_shifts} shifts over {} + {} labels exceeds {MAX_EVALUATIONS} evaluations",
                    sizes.c1,
                    sizes.c2
                )))
            }
        }
        let psi = exhaustive_min(sizes.c1, n_shifts, |a| objective(&cost, |c1| a[c1]));
        let phi = exhaustive_min(sizes.c2, n_shifts, |a| objective(&cost, |c1| a[map[c1]]));
        (psi, phi)
    } else {
        let argmin = |values: &mut dyn Iterator<Item = f64>| {
            values
                .enumerate()
                .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best })
                .0
        };
        let psi_choice: Vec<usize> = cost.iter().map(|row| argmin(&mut row.iter().copied())).collect();
        let phi_choice: Vec<usize> = (0..sizes.c2)
            .map(|c2| {
                argmin(&mut (0..n_shifts).map(|s| {
                    (0..sizes.c1).filter(|&c1| map[c1] == c2).map(|c1| cost[c1][s]).sum()
                }))
            })
            .collect();
        (
            objective(&cost, |c1| psi_choice[c1]),
            objective(&cost, |c1| phi_choice[map[c1]]),
        )
    };

    let mut report_sizes = sizes.to_vec();
    report_sizes.extend([instance.readout.lattice(), n_shifts]);
    Ok(TheoremReport::new(TheoremKind::AdapterFamilies, report_sizes, d_lhs, d_rhs).with_seed(instance.seed))
}
