//! CLIP-space style-transfer metrics.
//!
//! Every similarity here is a cosine. An item is *correctly classified* when
//! the generated embedding is strictly closer to the target prompt than to
//! the style reference's content phrase; ties count as misclassified.

use alloc::vec::Vec;

use crate::error::{check_dims, Error, Result};
use crate::stats::canonical_mean;
use crate::vector::{cosine, FeatureVector};

/// Calibration cosines below this magnitude make the leakage ratio unreliable.
pub const LEAKAGE_GUARD: f64 = 1e-8;

/// Embeddings involved in scoring one generated image.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalItem {
    /// Generated image, `e_g`.
    pub generated: FeatureVector,
    /// Style reference image, `e1`.
    pub style_ref: FeatureVector,
    /// Content text of the style reference, `e2`.
    pub content_text: FeatureVector,
    /// Target prompt text, `e3`.
    pub prompt_text: FeatureVector,
}

impl EvalItem {
    pub fn new(
        generated: FeatureVector,
        style_ref: FeatureVector,
        content_text: FeatureVector,
        prompt_text: FeatureVector,
    ) -> Result<Self> {
        let d = generated.dim();
        check_dims(d, style_ref.dim())?;
        check_dims(d, content_text.dim())?;
        check_dims(d, prompt_text.dim())?;
        Ok(Self { generated, style_ref, content_text, prompt_text })
    }

    pub fn dim(&self) -> usize {
        self.generated.dim()
    }

    pub fn scores(&self) -> ItemScores {
        let cos_content = cosine(&self.generated, &self.content_text);
        let cos_prompt = cosine(&self.generated, &self.prompt_text);
        let cos_style = cosine(&self.generated, &self.style_ref);
        let calibration = cosine(&self.style_ref, &self.content_text);
        let correct = cos_content < cos_prompt;
        let leakage_guarded = correct && calibration.abs() < LEAKAGE_GUARD;
        let leakage = if correct && !leakage_guarded { cos_content / calibration } else { 1.0 };
        let style = if correct { cos_style - cos_content } else { 0.0 };
        ItemScores {
            correct,
            cos_content,
            cos_prompt,
            cos_style,
            calibration,
            leakage,
            style,
            leakage_guarded,
        }
    }
}

/// Per-item breakdown of the metric suite.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ItemScores {
    pub correct: bool,
    /// cos(e_g, e2)
    pub cos_content: f64,
    /// cos(e_g, e3)
    pub cos_prompt: f64,
    /// cos(e_g, e1)
    pub cos_style: f64,
    /// cos(e1, e2)
    pub calibration: f64,
    pub leakage: f64,
    pub style: f64,
    /// Leakage fell back to 1 because |cos(e1, e2)| was below [`LEAKAGE_GUARD`].
    pub leakage_guarded: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MetricsReport {
    pub fidelity: f64,
    pub leakage: f64,
    pub style: f64,
    pub image_alignment: f64,
    pub text_alignment: f64,
    pub n_items: usize,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub per_item: Option<Vec<ItemScores>>,
}

impl MetricsReport {
    pub fn guarded_items(&self) -> Option<usize> {
        self.per_item.as_ref().map(|items| items.iter().filter(|s| s.leakage_guarded).count())
    }
}

pub fn classify_item(item: &EvalItem) -> bool {
    cosine(&item.generated, &item.content_text) < cosine(&item.generated, &item.prompt_text)
}

fn non_empty(items: &[EvalItem]) -> Result<()> {
    if items.is_empty() {
        Err(Error::Empty("evaluation items"))
    } else {
        Ok(())
    }
}

fn mean_of(items: &[EvalItem], f: impl Fn(&EvalItem) -> f64) -> Result<f64> {
    non_empty(items)?;
    let values: Vec<f64> = items.iter().map(f).collect();
    Ok(canonical_mean(&values))
}

pub fn fidelity_score(items: &[EvalItem]) -> Result<f64> {
    non_empty(items)?;
    let correct = items.iter().filter(|i| classify_item(i)).count();
    Ok(correct as f64 / items.len() as f64)
}

pub fn leakage_score(items: &[EvalItem]) -> Result<f64> {
    mean_of(items, |i| i.scores().leakage)
}

pub fn style_score(items: &[EvalItem]) -> Result<f64> {
    mean_of(items, |i| i.scores().style)
}

/// `(mean cos(e_g, e1), mean cos(e_g, e3))`.
pub fn alignment_scores(items: &[EvalItem]) -> Result<(f64, f64)> {
    let image = mean_of(items, |i| cosine(&i.generated, &i.style_ref))?;
    let text = mean_of(items, |i| cosine(&i.generated, &i.prompt_text))?;
    Ok((image, text))
}

/// Full metric suite from one scoring pass.
pub fn evaluate(items: &[EvalItem], keep_per_item: bool) -> Result<MetricsReport> {
    non_empty(items)?;
    let scores: Vec<ItemScores> = items.iter().map(EvalItem::scores).collect();
    Ok(report_from_scores(scores, keep_per_item))
}

/// Aggregate precomputed per-item scores (e.g. scored in parallel).
pub fn report_from_scores(scores: Vec<ItemScores>, keep_per_item: bool) -> MetricsReport {
    let n = scores.len();
    let column = |f: fn(&ItemScores) -> f64| -> f64 {
        canonical_mean(&scores.iter().map(f).collect::<Vec<_>>())
    };
    let correct = scores.iter().filter(|s| s.correct).count();
    MetricsReport {
        fidelity: correct as f64 / n as f64,
        leakage: column(|s| s.leakage),
        style: column(|s| s.style),
        image_alignment: column(|s| s.cos_style),
        text_alignment: column(|s| s.cos_prompt),
        n_items: n,
        per_item: keep_per_item.then_some(scores),
    }
}
