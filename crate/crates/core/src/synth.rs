//! Seeded synthetic corpora shaped like normalized image/text embeddings.
//!
//! Every vector is a sum of a direction shared by the whole corpus, a
//! content direction shared by an image and its caption, and independent
//! noise; images also carry a style component. A few coordinates get large
//! magnitudes, as contrastive embeddings typically show.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::vector::{l2_normalize, FeatureVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub n_pairs: usize,
    pub dim: usize,
    pub n_classes: usize,
    pub shared_scale: f64,
    pub content_scale: f64,
    pub style_scale: f64,
    pub noise_scale: f64,
    /// Coordinates that get a boosted shared component.
    pub outlier_dims: usize,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn new(n_pairs: usize, dim: usize, seed: u64) -> Self {
        Self {
            n_pairs,
            dim,
            n_classes: 10,
            shared_scale: 0.6,
            content_scale: 1.0,
            style_scale: 0.8,
            noise_scale: 0.5,
            outlier_dims: (dim / 32).max(1),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticPair {
    pub image: FeatureVector,
    pub text: FeatureVector,
    pub class: usize,
}

fn gaussian(rng: &mut SeededRng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| scale * rng.normal()).collect()
}

fn unit(values: Vec<f64>) -> Result<FeatureVector> {
    Ok(l2_normalize(&FeatureVector::new(values)?).vector)
}

pub fn synthetic_pairs(config: &SyntheticConfig) -> Result<Vec<SyntheticPair>> {
    if config.dim == 0 {
        return Err(Error::ZeroDimension);
    }
    if config.n_classes == 0 {
        return Err(Error::invalid("n_classes must be positive"));
    }
    let scales = [config.shared_scale, config.content_scale, config.style_scale, config.noise_scale];
    if scales.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::invalid("scales must be finite and non-negative"));
    }
    let d = config.dim;
    let per_dim = 1.0 / libm::sqrt(d as f64);
    let mut rng = SeededRng::new(config.seed);

    let mut shared = gaussian(&mut rng, d, per_dim);
    for i in rng.choose_indices(d, config.outlier_dims.min(d)) {
        shared[i] *= 6.0;
    }
    let classes: Vec<Vec<f64>> = (0..config.n_classes).map(|_| gaussian(&mut rng, d, per_dim)).collect();

    (0..config.n_pairs)
        .map(|_| {
            let class = rng.below(config.n_classes);
            let style = gaussian(&mut rng, d, per_dim);
            let image_noise = gaussian(&mut rng, d, per_dim);
            let text_noise = gaussian(&mut rng, d, per_dim);
            let image = (0..d)
                .map(|i| {
                    config.shared_scale * shared[i]
                        + config.content_scale * classes[class][i]
                        + config.style_scale * style[i]
                        + config.noise_scale * image_noise[i]
                })
                .collect();
            let text = (0..d)
                .map(|i| {
                    config.shared_scale * shared[i]
                        + config.content_scale * classes[class][i]
                        + config.noise_scale * text_noise[i]
                })
                .collect();
            Ok(SyntheticPair { image: unit(image)?, text: unit(text)?, class })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::cosine;

    #[test]
    fn deterministic_and_normalized() {
        let config = SyntheticConfig::new(8, 64, 13);
        let a = synthetic_pairs(&config).unwrap();
        let b = synthetic_pairs(&config).unwrap();
        assert_eq!(a, b);
        for pair in &a {
            assert!((pair.image.norm() - 1.0).abs() < 1e-12);
            assert!((pair.text.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn captions_match_their_images_better() {
        let pairs = synthetic_pairs(&SyntheticConfig::new(40, 64, 2)).unwrap();
        let mut wins = 0;
        for (i, p) in pairs.iter().enumerate() {
            let own = cosine(&p.image, &p.text);
            let other = &pairs[(i + 1) % pairs.len()];
            if other.class != p.class && own > cosine(&p.image, &other.text) {
                wins += 1;
            }
            if other.class == p.class {
                wins += 1;
            }
        }
        assert!(wins >= 36);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(synthetic_pairs(&SyntheticConfig::new(1, 0, 0)).is_err());
        let mut c = SyntheticConfig::new(1, 4, 0);
        c.n_classes = 0;
        assert!(synthetic_pairs(&c).is_err());
    }
}
