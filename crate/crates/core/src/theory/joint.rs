use alloc::vec::Vec;

use super::{JointTable, NORMALIZATION_TOLERANCE};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Largest alphabet size for any variable of a [`DiscreteJoint`].
pub const MAX_ALPHABET: usize = 6;

/// Alphabet sizes of `(x, c1, c2, c3)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JointSizes {
    pub x: usize,
    pub c1: usize,
    pub c2: usize,
    pub c3: usize,
}

impl JointSizes {
    pub fn new(x: usize, c1: usize, c2: usize, c3: usize) -> Result<Self> {
        let sizes = Self { x, c1, c2, c3 };
        sizes.validate()?;
        Ok(sizes)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("x", self.x), ("c1", self.c1), ("c2", self.c2), ("c3", self.c3)] {
            if n == 0 || n > MAX_ALPHABET {
                return Err(Error::invalid(alloc::format!(
                    "|{name}| = {n} outside 1..={MAX_ALPHABET}"
                )));
            }
        }
        if self.c2 > self.c1 {
            return Err(Error::invalid("c2 is a function of c1, so |c2| <= |c1|"));
        }
        Ok(())
    }

    pub fn to_vec(self) -> Vec<usize> {
        alloc::vec![self.x, self.c1, self.c2, self.c3]
    }
}

/// Joint `q(x, c1, c3)` with the content label `c2 = content_map[c1]`.
///
/// Conditions are the pairs `(c1, c3)`, indexed `c1 * |c3| + c3`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteJoint {
    sizes: JointSizes,
    content_map: Vec<usize>,
    /// `probs[(c1 * |c3| + c3) * |x| + x]`
    probs: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(sizes: JointSizes, content_map: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        sizes.validate()?;
        if content_map.len() != sizes.c1 {
            return Err(Error::DimensionMismatch { expected: sizes.c1, found: content_map.len() });
        }
        if content_map.iter().any(|&c2| c2 >= sizes.c2) {
            return Err(Error::invalid("content_map value outside the c2 alphabet"));
        }
        let expected = sizes.x * sizes.c1 * sizes.c3;
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
        Ok(Self { sizes, content_map, probs })
    }

    pub fn sizes(&self) -> JointSizes {
        self.sizes
    }

    pub fn content_map(&self) -> &[usize] {
        &self.content_map
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn condition(&self, c1: usize, c3: usize) -> usize {
        c1 * self.sizes.c3 + c3
    }

    pub fn c1_of(&self, condition: usize) -> usize {
        condition / self.sizes.c3
    }

    pub fn c3_of(&self, condition: usize) -> usize {
        condition % self.sizes.c3
    }

    pub fn c2_of(&self, condition: usize) -> usize {
        self.content_map[self.c1_of(condition)]
    }

    pub fn is_injective(&self) -> bool {
        let mut seen = alloc::vec![false; self.sizes.c2];
        self.content_map.iter().all(|&c2| !core::mem::replace(&mut seen[c2], true))
    }

    pub fn marginal_c1(&self) -> Vec<f64> {
        (0..self.sizes.c1)
            .map(|c1| (0..self.sizes.c3).map(|c3| self.condition_prob(self.condition(c1, c3))).sum())
            .collect()
    }

    pub fn marginal_c3(&self) -> Vec<f64> {
        (0..self.sizes.c3)
            .map(|c3| (0..self.sizes.c1).map(|c1| self.condition_prob(self.condition(c1, c3))).sum())
            .collect()
    }

    /// `q(c1, c3) = q(c1) q(c3)` for every pair, within `tol`.
    pub fn c1_c3_independent(&self, tol: f64) -> bool {
        let (m1, m3) = (self.marginal_c1(), self.marginal_c3());
        (0..self.sizes.c1).all(|c1| {
            (0..self.sizes.c3)
                .all(|c3| (self.condition_prob(self.condition(c1, c3)) - m1[c1] * m3[c3]).abs() <= tol)
        })
    }
}

impl JointTable for DiscreteJoint {
    fn x_size(&self) -> usize {
        self.sizes.x
    }

    fn n_conditions(&self) -> usize {
        self.sizes.c1 * self.sizes.c3
    }

    fn prob(&self, condition: usize, x: usize) -> f64 {
        self.probs[condition * self.sizes.x + x]
    }
}

/// Seeded instance with independent `c1`, `c3` and a surjective content map.
pub fn random_instance(seed: u64, sizes: JointSizes) -> Result<DiscreteJoint> {
    random_instance_with(&mut SeededRng::new(seed), sizes, 1.0)
}

pub(crate) fn random_instance_with(
    rng: &mut SeededRng,
    sizes: JointSizes,
    sharpness: f64,
) -> Result<DiscreteJoint> {
    sizes.validate()?;
    let q1 = rng.simplex(sizes.c1, 1.0);
    let q3 = rng.simplex(sizes.c3, 1.0);
    let mut content_map: Vec<usize> = (0..sizes.c1)
        .map(|c1| if c1 < sizes.c2 { c1 } else { rng.below(sizes.c2) })
        .collect();
    for i in (1..content_map.len()).rev() {
        let j = rng.below(i + 1);
        content_map.swap(i, j);
    }
    let mut probs = Vec::with_capacity(sizes.x * sizes.c1 * sizes.c3);
    for &p1 in &q1 {
        for &p3 in &q3 {
            let given = rng.simplex(sizes.x, sharpness);
            probs.extend(given.iter().map(|px| p1 * p3 * px));
        }
    }
    // Absorb rounding so the table sums to one within tolerance.
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    DiscreteJoint::new(sizes, content_map, probs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_table() {
        let sizes = JointSizes::new(3, 4, 2, 2).unwrap();
        let a = random_instance(11, sizes).unwrap();
        let b = random_instance(11, sizes).unwrap();
        let bits = |j: &DiscreteJoint| j.probs().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.content_map(), b.content_map());
    }

    #[test]
    fn unit_sizes_give_point_mass() {
        let j = random_instance(3, JointSizes::new(1, 1, 1, 1).unwrap()).unwrap();
        assert_eq!(j.probs(), &[1.0]);
    }

    #[test]
    fn seed_zero_marginals() {
        let j = random_instance(0, JointSizes::new(2, 2, 2, 2).unwrap()).unwrap();
        let total: f64 = j.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Marginalisation oracle: sum the flat table by hand.
        let mut m1 = [0.0; 2];
        let mut m3 = [0.0; 2];
        for c1 in 0..2 {
            for c3 in 0..2 {
                for x in 0..2 {
                    let p = j.probs()[(c1 * 2 + c3) * 2 + x];
                    m1[c1] += p;
                    m3[c3] += p;
                }
            }
        }
        for c1 in 0..2 {
            for c3 in 0..2 {
                let joint: f64 = (0..2).map(|x| j.probs()[(c1 * 2 + c3) * 2 + x]).sum();
                assert!((joint - m1[c1] * m3[c3]).abs() < 1e-12);
            }
        }
        assert!(j.c1_c3_independent(1e-12));
    }

    #[test]
    fn content_map_is_surjective() {
        for seed in 0..50 {
            let j = random_instance(seed, JointSizes::new(2, 5, 3, 2).unwrap()).unwrap();
            for c2 in 0..3 {
                assert!(j.content_map().contains(&c2));
            }
            assert!(!j.is_injective());
        }
    }

    #[test]
    fn validation() {
        assert!(JointSizes::new(0, 1, 1, 1).is_err());
        assert!(JointSizes::new(7, 1, 1, 1).is_err());
        assert!(JointSizes::new(2, 2, 3, 1).is_err());
        let sizes = JointSizes::new(1, 1, 1, 1).unwrap();
        assert!(DiscreteJoint::new(sizes, alloc::vec![0], alloc::vec![0.5]).is_err());
        assert!(DiscreteJoint::new(sizes, alloc::vec![1], alloc::vec![1.0]).is_err());
    }
}
