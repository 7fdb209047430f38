//! Feature vectors, masks and labeled embedding sets.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Deref;

use crate::error::{check_dims, Error, Result};

/// A finite, non-empty embedding vector. Arithmetic is done in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: None, index });
        }
        Ok(Self { values })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec())
    }

    pub fn from_f32(values: &[f32]) -> Result<Self> {
        Self::new(values.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(alloc::vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.values
    }

    pub fn dot(&self, other: &FeatureVector) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        Ok(dot(&self.values, &other.values))
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(dot(&self.values, &self.values))
    }

    /// Entry-wise map; the result is re-validated.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<FeatureVector> {
        FeatureVector::new(self.values.iter().map(|&v| f(v)).collect())
    }

    pub(crate) fn zip_with(
        &self,
        other: &FeatureVector,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<FeatureVector> {
        check_dims(self.dim(), other.dim())?;
        FeatureVector::new(self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect())
    }
}

impl Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Result of [`l2_normalize`]. `zero_norm` is raised when the input had no
/// direction and was returned unchanged.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalized {
    pub vector: FeatureVector,
    pub zero_norm: bool,
}

pub fn l2_normalize(v: &FeatureVector) -> Normalized {
    let norm = v.norm();
    if norm == 0.0 {
        return Normalized { vector: v.clone(), zero_norm: true };
    }
    let values = v.iter().map(|x| x / norm).collect();
    Normalized { vector: FeatureVector { values }, zero_norm: false }
}

/// Cosine similarity clamped to `[-1, 1]`. A zero vector on either side gives 0.
pub fn cosine_similarity(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    Ok(cosine(a, b))
}

pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = libm::sqrt(dot(a, a));
    let nb = libm::sqrt(dot(b, b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// A `{0, 1}` vector; `false` (0) marks a discarded element.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MaskVector {
    bits: Vec<bool>,
}

impl MaskVector {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::ZeroDimension);
        }
        Ok(Self { bits })
    }

    pub fn ones(dim: usize) -> Result<Self> {
        Self::new(alloc::vec![true; dim])
    }

    /// Parse a mask stored as real numbers; every entry must be exactly 0 or 1.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let bits = values
            .iter()
            .enumerate()
            .map(|(index, &value)| {
                if value == 1.0 {
                    Ok(true)
                } else if value == 0.0 {
                    Ok(false)
                } else {
                    Err(Error::NotBinary { index, value })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(bits)
    }

    pub fn dim(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn is_kept(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn masked_count(&self) -> usize {
        self.bits.iter().filter(|b| !**b).count()
    }

    pub fn masked_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, b)| !**b).map(|(i, _)| i)
    }

    pub fn to_feature(&self) -> FeatureVector {
        FeatureVector { values: self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect() }
    }
}

/// Labeled collection of equal-dimension vectors with free-form metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    rows: Vec<(String, FeatureVector)>,
    ids: BTreeSet<String>,
    pub metadata: BTreeMap<String, String>,
}

impl EmbeddingSet {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self { dim, rows: Vec::new(), ids: BTreeSet::new(), metadata: BTreeMap::new() })
    }

    /// Build a set with default `row-0000` style ids.
    pub fn from_vectors(dim: usize, vectors: impl IntoIterator<Item = FeatureVector>) -> Result<Self> {
        let mut set = Self::new(dim)?;
        for (i, v) in vectors.into_iter().enumerate() {
            set.push(default_id(i), v)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, id: impl Into<String>, vector: FeatureVector) -> Result<()> {
        let id = id.into();
        check_dims(self.dim, vector.dim())?;
        if !self.ids.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        self.rows.push((id, vector));
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[(String, FeatureVector)] {
        &self.rows
    }

    pub fn vectors(&self) -> impl Iterator<Item = &FeatureVector> + '_ {
        self.rows.iter().map(|(_, v)| v)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.rows.iter().map(|(id, _)| id.as_str())
    }

    pub fn get(&self, i: usize) -> Option<&FeatureVector> {
        self.rows.get(i).map(|(_, v)| v)
    }

    /// True when every id equals its default positional id.
    pub fn has_default_ids(&self) -> bool {
        self.rows.iter().enumerate().all(|(i, (id, _))| *id == default_id(i))
    }
}

pub fn default_id(i: usize) -> String {
    format!("row-{i:04}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::from_slice(v).unwrap()
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert_eq!(FeatureVector::new(vec![]), Err(Error::ZeroDimension));
        assert_eq!(
            FeatureVector::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { row: None, index: 1 })
        );
        assert!(FeatureVector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn normalize_three_four_five() {
        let n = l2_normalize(&fv(&[3.0, 4.0]));
        assert!(!n.zero_norm);
        assert!((n.vector[0] - 0.6).abs() < 1e-12);
        assert!((n.vector[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn normalize_zero_vector_is_flagged() {
        let n = l2_normalize(&fv(&[0.0, 0.0]));
        assert!(n.zero_norm);
        assert_eq!(n.vector.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn cosine_cases() {
        assert_eq!(cosine_similarity(&fv(&[1.0, 0.0]), &fv(&[1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&fv(&[1.0, 0.0]), &fv(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&fv(&[0.0, 0.0]), &fv(&[1.0, 1.0])).unwrap(), 0.0);
        assert_eq!(
            cosine_similarity(&fv(&[1.0, 0.0]), &fv(&[1.0, 0.0, 0.0])),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        );
    }

    #[test]
    fn mask_parsing() {
        let m = MaskVector::from_values(&[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(m.masked_count(), 1);
        assert_eq!(m.masked_indices().collect::<Vec<_>>(), vec![1]);
        assert_eq!(
            MaskVector::from_values(&[1.0, 0.5]),
            Err(Error::NotBinary { index: 1, value: 0.5 })
        );
    }

    #[test]
    fn embedding_set_invariants() {
        let mut set = EmbeddingSet::new(2).unwrap();
        set.push("a", fv(&[1.0, 2.0])).unwrap();
        assert_eq!(set.push("a", fv(&[0.0, 0.0])), Err(Error::DuplicateId("a".into())));
        assert!(matches!(set.push("b", fv(&[1.0])), Err(Error::DimensionMismatch { .. })));
        assert_eq!(set.len(), 1);
        assert!(EmbeddingSet::new(0).is_err());
        let d = EmbeddingSet::from_vectors(1, vec![fv(&[1.0]), fv(&[2.0])]).unwrap();
        assert_eq!(d.ids().collect::<Vec<_>>(), vec!["row-0000", "row-0001"]);
        assert!(d.has_default_ids());
    }

    fn vec_strategy(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, dim)
    }

    // Reference norm in compensated (Neumaier) summation.
    fn precise_norm(v: &[f64]) -> f64 {
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for x in v {
            let term = x * x;
            let t = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - t) + term;
            } else {
                comp += (term - t) + sum;
            }
            sum = t;
        }
        (sum + comp).sqrt()
    }

    proptest! {
        #[test]
        fn normalized_has_unit_norm(v in vec_strategy(8)) {
            let n = l2_normalize(&fv(&v));
            prop_assume!(!n.zero_norm);
            prop_assert!((precise_norm(&n.vector) - 1.0).abs() < 1e-6);
            let again = l2_normalize(&n.vector);
            for (a, b) in again.vector.iter().zip(n.vector.iter()) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }

        #[test]
        fn cosine_symmetric_and_scale_invariant(
            a in vec_strategy(6),
            b in vec_strategy(6),
            s in 0.01f64..100.0,
        ) {
            let (a, b) = (fv(&a), fv(&b));
            prop_assume!(a.norm() > 1e-6 && b.norm() > 1e-6);
            let ab = cosine_similarity(&a, &b).unwrap();
            prop_assert!((ab - cosine_similarity(&b, &a).unwrap()).abs() < 1e-6);
            let scaled = a.map(|x| x * s).unwrap();
            prop_assert!((ab - cosine_similarity(&scaled, &b).unwrap()).abs() < 1e-6);
            prop_assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-6);
        }
    }
}
