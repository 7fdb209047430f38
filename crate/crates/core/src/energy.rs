//! Energy scores.
//!
//! The free energy `-T ln sum_i exp(v_i / T)` is the logsumexp energy score
//! used for out-of-distribution detection: it is high when no logit is large,
//! so a larger value for the content text feature means the masked image
//! feature carries less of that content.

use crate::error::{check_dims, Error, Result};
use crate::vector::{cosine, FeatureVector};

pub const DEFAULT_TEMPERATURE: f64 = 1.0;

pub fn free_energy(logits: &[f64], temperature: f64) -> Result<f64> {
    if logits.is_empty() {
        return Err(Error::Empty("logits"));
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::invalid(alloc::format!("temperature must be positive, got {temperature}")));
    }
    if let Some(index) = logits.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: None, index });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max) / temperature;
    let sum: f64 = logits.iter().map(|&v| libm::exp(v / temperature - max)).sum();
    Ok(-temperature * (max + libm::log(sum)))
}

/// Free energy of the per-element logits `e1_masked[i] * e2[i]`; masked
/// slots are zero logits and still contribute `exp(0)`.
pub fn residual_content_energy(
    e1_masked: &FeatureVector,
    e2: &FeatureVector,
    temperature: f64,
) -> Result<f64> {
    check_dims(e1_masked.dim(), e2.dim())?;
    let logits: alloc::vec::Vec<f64> = e1_masked.iter().zip(e2.iter()).map(|(a, b)| a * b).collect();
    free_energy(&logits, temperature)
}

/// Cosine distance `1 - cos(c, x)`: smaller means more compatible.
pub fn distance_energy(c_emb: &FeatureVector, x_emb: &FeatureVector) -> Result<f64> {
    check_dims(c_emb.dim(), x_emb.dim())?;
    Ok(1.0 - cosine(c_emb, x_emb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::from_slice(v).unwrap()
    }

    /// Direct summation without the max shift; fine for small logits.
    fn direct(v: &[f64], t: f64) -> f64 {
        -t * v.iter().map(|x| (x / t).exp()).sum::<f64>().ln()
    }

    #[test]
    fn free_energy_examples() {
        assert_eq!(free_energy(&[0.0], 1.0).unwrap(), 0.0);
        assert!((free_energy(&[0.0, 0.0], 1.0).unwrap() + core::f64::consts::LN_2).abs() < 1e-12);
        let e = free_energy(&[1.0, 2.0], 1.0).unwrap();
        assert!((e - direct(&[1.0, 2.0], 1.0)).abs() < 1e-12);
        assert!((e + 2.313262).abs() < 1e-6);
        assert!(free_energy(&[], 1.0).is_err());
        assert!(free_energy(&[1.0], 0.0).is_err());
    }

    #[test]
    fn free_energy_survives_large_logits() {
        let e = free_energy(&[1000.0, 1000.0], 1.0).unwrap();
        assert!((e + 1000.0 + core::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn residual_energy_examples() {
        let e = residual_content_energy(&fv(&[0.0, 0.0]), &fv(&[3.0, -4.0]), 1.0).unwrap();
        assert!((e + core::f64::consts::LN_2).abs() < 1e-12);
        let e = residual_content_energy(&fv(&[1.0, 0.0]), &fv(&[2.0, 5.0]), 1.0).unwrap();
        assert!((e - direct(&[2.0, 0.0], 1.0)).abs() < 1e-12);
        assert!((e + 2.126928).abs() < 1e-6);
        let masked = residual_content_energy(&fv(&[0.0, 0.0]), &fv(&[2.0, 5.0]), 1.0).unwrap();
        assert!(masked > e);
        assert!((masked + core::f64::consts::LN_2).abs() < 1e-12);
        assert!(residual_content_energy(&fv(&[1.0]), &fv(&[1.0, 2.0]), 1.0).is_err());
    }

    #[test]
    fn distance_energy_examples() {
        assert!(distance_energy(&fv(&[0.3, 0.4]), &fv(&[0.3, 0.4])).unwrap().abs() < 1e-12);
        assert_eq!(distance_energy(&fv(&[1.0, 0.0]), &fv(&[0.0, 1.0])).unwrap(), 1.0);
        assert_eq!(distance_energy(&fv(&[1.0, 0.0]), &fv(&[-1.0, 0.0])).unwrap(), 2.0);
    }

    fn logits() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-5.0f64..5.0, 1..16)
    }

    proptest! {
        #[test]
        fn uniform_shift_identity(v in logits(), delta in -5.0f64..5.0, t in 0.2f64..4.0) {
            let shifted: Vec<f64> = v.iter().map(|x| x + delta).collect();
            let lhs = free_energy(&shifted, t).unwrap();
            let rhs = free_energy(&v, t).unwrap() - delta;
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }

        #[test]
        fn raising_a_logit_lowers_energy(v in logits(), i in any::<prop::sample::Index>(), up in 0.01f64..3.0) {
            let i = i.index(v.len());
            let mut raised = v.clone();
            raised[i] += up;
            prop_assert!(free_energy(&raised, 1.0).unwrap() < free_energy(&v, 1.0).unwrap());
        }

        #[test]
        fn zeroing_logits_moves_energy_by_sign(v in logits(), i in any::<prop::sample::Index>()) {
            let i = i.index(v.len());
            prop_assume!(v[i].abs() > 1e-3);
            let mut zeroed = v.clone();
            zeroed[i] = 0.0;
            let (before, after) = (free_energy(&v, 1.0).unwrap(), free_energy(&zeroed, 1.0).unwrap());
            if v[i] > 0.0 {
                prop_assert!(after > before);
            } else {
                prop_assert!(after < before);
            }
        }
    }

    #[test]
    fn ordering_example() {
        let v = vec![2.0, 0.0];
        let zeroed = vec![0.0, 0.0];
        assert!(free_energy(&zeroed, 1.0).unwrap() > free_energy(&v, 1.0).unwrap());
    }
}
