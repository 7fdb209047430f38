#![cfg_attr(not(test), no_std)]

//! Content/style disentanglement for style-reference image features, done
//! entirely in embedding space.
//!
//! The crate depends only on [`core`] and [`alloc`]. File formats, the batch
//! harness and the command line live in the `stylemask` crate.
//!
//! The pipeline for a single style reference:
//!
//! 1. [`elementwise_product`] of the image feature `e1` and the content text
//!    feature `e2`;
//! 2. exact 1-D k-means over the product entries ([`kmeans_1d`]);
//! 3. a [`MaskVector`] that zeroes the highest-centroid cluster
//!    ([`build_cluster_mask`]);
//! 4. [`apply_mask`] to obtain the masked image feature.
//!
//! Around that pipeline sit the energy scores ([`energy`]), the CLIP-space
//! evaluation metrics ([`metrics`]) and an exact finite-probability simulator
//! for the divergence inequalities that motivate masking ([`theory`]).

extern crate alloc;

mod error;
pub mod energy;
pub mod kmeans;
pub mod mask;
pub mod metrics;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod theory;
pub mod vector;

pub use error::{Error, Result};
pub use energy::{distance_energy, free_energy, residual_content_energy, DEFAULT_TEMPERATURE};
pub use kmeans::{kmeans_1d, Clustering1D};
pub use mask::{
    abs_difference, apply_mask, build_absdiff_mask, build_cluster_mask, build_top_fraction_mask,
    cluster_mask, elementwise_product, masked_count, top_count_mask, verify_selection_dominance,
    ClusterMask, DominanceReport, MaskStrategy, DEFAULT_K,
};
pub use metrics::{
    alignment_scores, classify_item, evaluate, fidelity_score, leakage_score, style_score,
    EvalItem, ItemScores, MetricsReport,
};
pub use stats::percentiles;
pub use vector::{cosine_similarity, l2_normalize, EmbeddingSet, FeatureVector, MaskVector, Normalized};
