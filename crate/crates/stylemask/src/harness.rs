//! Batch studies over embedding corpora.
//!
//! Per-pair and per-trial work runs on a rayon pool; results are gathered in
//! input order before any reduction, so reports do not depend on the number
//! of workers.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use stylemask_core::theory::{
    prop1_trial, random_theorem1_trial, verify_theorem2, Prop1Sizes, Theorem1Sizes, Theorem2Instance,
    Theorem2Sizes, TheoremKind, TheoremReport,
};
use stylemask_core::{
    abs_difference, apply_mask, cluster_mask, elementwise_product, evaluate, masked_count, percentiles,
    residual_content_energy, top_count_mask, EmbeddingSet, EvalItem, FeatureVector, MetricsReport,
};

use crate::error::{AppError, Result};

/// Percentile columns of an energy report.
pub const PERCENTILE_COLUMNS: [f64; 5] = [0.0, 25.0, 50.0, 75.0, 100.0];

/// Gap above which a theorem instance counts as strictly separated.
pub const STRICT_GAP: f64 = 1e-6;

/// Run `f` on a pool of `workers` threads, or on the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(AppError::validation("--workers must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| AppError::validation(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Pair image rows with text rows; a single text row is shared by all images.
pub fn align_pairs(images: &EmbeddingSet, texts: &EmbeddingSet) -> Result<Vec<(FeatureVector, FeatureVector)>> {
    if images.dim() != texts.dim() {
        return Err(AppError::validation(format!(
            "dimension mismatch: image embeddings have dim {}, text embeddings have dim {}",
            images.dim(),
            texts.dim()
        )));
    }
    if images.is_empty() {
        return Err(AppError::validation("image embeddings are empty"));
    }
    let text_rows: Vec<&FeatureVector> = texts.vectors().collect();
    match text_rows.len() {
        1 => Ok(images.vectors().map(|v| (v.clone(), text_rows[0].clone())).collect()),
        n if n == images.len() => Ok(images.vectors().cloned().zip(text_rows.into_iter().cloned()).collect()),
        n => Err(AppError::validation(format!(
            "{} image rows but {n} text rows; text must have one row or one per image",
            images.len()
        ))),
    }
}

/// Build evaluation items from four aligned sets; single-row sets broadcast.
pub fn align_items(
    generated: &EmbeddingSet,
    style_ref: &EmbeddingSet,
    content_text: &EmbeddingSet,
    prompt_text: &EmbeddingSet,
) -> Result<Vec<EvalItem>> {
    let named = [
        ("generated", generated),
        ("style-ref", style_ref),
        ("content-text", content_text),
        ("prompt-text", prompt_text),
    ];
    for (name, set) in &named[1..] {
        if set.dim() != generated.dim() {
            return Err(AppError::validation(format!(
                "dimension mismatch: generated has dim {}, {name} has dim {}",
                generated.dim(),
                set.dim()
            )));
        }
    }
    let n = named.iter().map(|(_, s)| s.len()).max().unwrap_or(0);
    if n == 0 {
        return Err(AppError::validation("evaluation sets are empty"));
    }
    for (name, set) in &named {
        if set.len() != 1 && set.len() != n {
            return Err(AppError::validation(format!(
                "{name} has {} rows; expected 1 or {n}",
                set.len()
            )));
        }
    }
    let pick = |set: &EmbeddingSet, i: usize| set.get(if set.len() == 1 { 0 } else { i }).unwrap().clone();
    (0..n)
        .map(|i| {
            EvalItem::new(pick(generated, i), pick(style_ref, i), pick(content_text, i), pick(prompt_text, i))
                .map_err(AppError::from)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub proportions: Vec<f64>,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_values: Option<Vec<usize>>,
    pub seed: u64,
}

impl SweepConfig {
    pub fn new(proportions: Vec<f64>) -> Self {
        Self { proportions, temperature: stylemask_core::DEFAULT_TEMPERATURE, k_values: None, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.proportions.is_empty() {
            return Err(AppError::validation("at least one proportion is required"));
        }
        if let Some(p) = self.proportions.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(AppError::validation(format!("proportion {p} outside (0, 1]")));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(AppError::validation(format!("temperature must be positive, got {}", self.temperature)));
        }
        if let Some(ks) = &self.k_values {
            if ks.is_empty() || ks.iter().any(|&k| k < 2) {
                return Err(AppError::validation("k values must be a non-empty list of integers >= 2"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PercentileRow {
    pub proportion: f64,
    pub m_count: usize,
    pub percentiles: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrategyRows {
    pub product: Vec<PercentileRow>,
    pub absdiff: Vec<PercentileRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    pub config: SweepConfig,
    pub strategies: StrategyRows,
    pub n_pairs: usize,
}

/// Per-pair energies behind one proportion's percentile rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ProportionEnergies {
    pub proportion: f64,
    pub m_count: usize,
    pub product: Vec<f64>,
    pub absdiff: Vec<f64>,
    /// The two strategies selected different index sets.
    pub sets_differ: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergySweep {
    pub report: EnergyReport,
    pub per_proportion: Vec<ProportionEnergies>,
}

/// Mask the same number of elements per pair with the top products and with
/// the top |difference|, and compare residual content energies.
pub fn energy_sweep(
    pairs: &[(FeatureVector, FeatureVector)],
    config: &SweepConfig,
    workers: Option<usize>,
) -> Result<EnergySweep> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(AppError::validation("energy sweep needs at least one pair"));
    }
    let dim = pairs[0].0.dim();
    if let Some((i, _)) = pairs.iter().enumerate().find(|(_, (a, b))| a.dim() != dim || b.dim() != dim) {
        return Err(AppError::validation(format!("pair {i} does not have dim {dim}")));
    }
    let t = config.temperature;
    let scores: Vec<(Vec<f64>, Vec<f64>)> = pairs
        .iter()
        .map(|(e1, e2)| Ok((elementwise_product(e1, e2)?.into_inner(), abs_difference(e1, e2)?.into_inner())))
        .collect::<Result<_>>()?;

    let mut per_proportion = Vec::with_capacity(config.proportions.len());
    for &proportion in &config.proportions {
        let m = masked_count(proportion, dim)?;
        let rows: Vec<(f64, f64, bool)> = with_workers(workers, || {
            pairs
                .par_iter()
                .zip(scores.par_iter())
                .map(|((e1, e2), (product, diff))| {
                    let by_product = top_count_mask(product, m)?;
                    let by_diff = top_count_mask(diff, m)?;
                    let ep = residual_content_energy(&apply_mask(e1, &by_product)?, e2, t)?;
                    let ed = residual_content_energy(&apply_mask(e1, &by_diff)?, e2, t)?;
                    Ok((ep, ed, by_product != by_diff))
                })
                .collect::<Result<Vec<_>>>()
        })??;
        per_proportion.push(ProportionEnergies {
            proportion,
            m_count: m,
            product: rows.iter().map(|r| r.0).collect(),
            absdiff: rows.iter().map(|r| r.1).collect(),
            sets_differ: rows.iter().map(|r| r.2).collect(),
        });
    }

    let row = |e: &ProportionEnergies, values: &[f64]| -> Result<PercentileRow> {
        Ok(PercentileRow {
            proportion: e.proportion,
            m_count: e.m_count,
            percentiles: percentiles(values, &PERCENTILE_COLUMNS)?,
        })
    };
    let strategies = StrategyRows {
        product: per_proportion.iter().map(|e| row(e, &e.product)).collect::<Result<_>>()?,
        absdiff: per_proportion.iter().map(|e| row(e, &e.absdiff)).collect::<Result<_>>()?,
    };
    Ok(EnergySweep {
        report: EnergyReport { config: config.clone(), strategies, n_pairs: pairs.len() },
        per_proportion,
    })
}

fn percent_label(p: f64) -> String {
    let pct = format!("{:.2}", p * 100.0);
    let pct = pct.trim_end_matches('0').trim_end_matches('.');
    format!("{pct}%")
}

/// Aligned plain-text table: one line per proportion and strategy.
pub fn render_energy_table(report: &EnergyReport) -> String {
    let mut out = format!(
        "{:<10} {:<8} {:>4} {:>11} {:>11} {:>11} {:>11} {:>11}\n",
        "proportion", "strategy", "m", "p0", "p25", "p50", "p75", "p100"
    );
    let s = &report.strategies;
    for (prod, diff) in s.product.iter().zip(&s.absdiff) {
        for (name, row) in [("product", prod), ("absdiff", diff)] {
            out.push_str(&format!("{:<10} {:<8} {:>4}", percent_label(row.proportion), name, row.m_count));
            for v in &row.percentiles {
                out.push_str(&format!(" {v:>11.6}"));
            }
            out.push('\n');
        }
    }
    out
}

/// Evaluation items used by a K sweep.
#[derive(Clone, Debug)]
pub enum SweepItems {
    /// The same items for every K.
    Shared(Vec<EvalItem>),
    /// Items produced separately under each K.
    PerK(BTreeMap<usize, Vec<EvalItem>>),
    /// Score each pair's masked image feature as if it were the output:
    /// `generated = e1 masked`, `style_ref = e1`, `content_text = e2`, and
    /// the given prompt rows (one row is shared).
    MaskedProxy { prompts: Vec<FeatureVector> },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KSweepRow {
    pub k: usize,
    pub masked_counts: Vec<usize>,
    pub collapsed_pairs: usize,
    pub metrics: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KSweepReport {
    pub k_values: Vec<usize>,
    pub n_pairs: usize,
    pub rows: Vec<KSweepRow>,
}

/// Rebuild the cluster mask of every pair under each K and score the items.
pub fn k_sweep(
    pairs: &[(FeatureVector, FeatureVector)],
    items: &SweepItems,
    k_values: &[usize],
    workers: Option<usize>,
) -> Result<KSweepReport> {
    if k_values.is_empty() || k_values.iter().any(|&k| k < 2) {
        return Err(AppError::validation("k values must be a non-empty list of integers >= 2"));
    }
    if pairs.is_empty() {
        return Err(AppError::validation("k sweep needs at least one pair"));
    }
    if let SweepItems::MaskedProxy { prompts } = items {
        if prompts.len() != 1 && prompts.len() != pairs.len() {
            return Err(AppError::validation(format!(
                "{} prompt rows for {} pairs; expected 1 or one per pair",
                prompts.len(),
                pairs.len()
            )));
        }
    }
    let mut rows = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let masks = with_workers(workers, || {
            pairs
                .par_iter()
                .map(|(e1, e2)| Ok(cluster_mask(&elementwise_product(e1, e2)?, k)?))
                .collect::<Result<Vec<_>>>()
        })??;
        let metrics = match items {
            SweepItems::Shared(items) => evaluate(items, false)?,
            SweepItems::PerK(by_k) => {
                let items = by_k
                    .get(&k)
                    .ok_or_else(|| AppError::validation(format!("no evaluation items for K = {k}")))?;
                evaluate(items, false)?
            }
            SweepItems::MaskedProxy { prompts } => {
                let items = pairs
                    .iter()
                    .zip(&masks)
                    .enumerate()
                    .map(|(i, ((e1, e2), m))| {
                        let prompt = &prompts[if prompts.len() == 1 { 0 } else { i }];
                        Ok(EvalItem::new(apply_mask(e1, &m.mask)?, e1.clone(), e2.clone(), prompt.clone())?)
                    })
                    .collect::<Result<Vec<_>>>()?;
                evaluate(&items, false)?
            }
        };
        rows.push(KSweepRow {
            k,
            masked_counts: masks.iter().map(|m| m.mask.masked_count()).collect(),
            collapsed_pairs: masks.iter().filter(|m| m.clustering.collapsed()).count(),
            metrics,
        });
    }
    Ok(KSweepReport { k_values: k_values.to_vec(), n_pairs: pairs.len(), rows })
}

pub fn evaluate_corpus(items: &[EvalItem], per_item: bool) -> Result<MetricsReport> {
    Ok(evaluate(items, per_item)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoryRun {
    pub theorem: TheoremKind,
    pub trials: usize,
    pub seed: u64,
    /// Seeds of trials where the claim failed although expected to hold.
    pub violations: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assumption_held: Option<usize>,
    pub strict_gaps: usize,
    pub reports: Vec<TheoremReport>,
}

/// Seeded random trials; trial `i` uses seed `seed + i`.
pub fn run_theory(kind: TheoremKind, trials: usize, seed: u64, workers: Option<usize>) -> Result<TheoryRun> {
    if trials == 0 {
        return Err(AppError::validation("--trials must be at least 1"));
    }
    let seeds: Vec<u64> = (0..trials as u64).map(|i| seed.wrapping_add(i)).collect();
    let reports = with_workers(workers, || {
        seeds
            .par_iter()
            .map(|&s| -> Result<TheoremReport> {
                Ok(match kind {
                    TheoremKind::MaskingDivergence => random_theorem1_trial(s, Theorem1Sizes::default())?.verify()?,
                    TheoremKind::AdapterFamilies => {
                        verify_theorem2(&Theorem2Instance::random(s, Theorem2Sizes::default())?, true)?
                    }
                    TheoremKind::SelectionDominance => prop1_trial(s, Prop1Sizes::default())?,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let violations = reports.iter().filter(|r| r.is_violation()).filter_map(|r| r.seed).collect();
    let assumption_held = (kind == TheoremKind::MaskingDivergence)
        .then(|| reports.iter().filter(|r| r.assumption_holds == Some(true)).count());
    let strict_gaps = reports.iter().filter(|r| r.d_rhs - r.d_lhs > STRICT_GAP).count();
    Ok(TheoryRun { theorem: kind, trials, seed, violations, assumption_held, strict_gaps, reports })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::from_slice(v).unwrap()
    }

    #[test]
    fn percent_labels() {
        assert_eq!(percent_label(0.05), "5%");
        assert_eq!(percent_label(0.125), "12.5%");
        assert_eq!(percent_label(1.0), "100%");
    }

    #[test]
    fn identical_basis_pairs_are_fully_annihilated() {
        // Products are [0, 1, 0, 0]; every |difference| ties at 0, so the
        // baseline takes the lowest indices and reaches the shared coordinate
        // only once index 1 is selected.
        let e = fv(&[0.0, 1.0, 0.0, 0.0]);
        let pairs = vec![(e.clone(), e.clone()); 3];
        let sweep = energy_sweep(&pairs, &SweepConfig::new(vec![0.25, 0.5, 1.0]), None).unwrap();
        let annihilated = -(4.0f64).ln();
        let s = &sweep.report.strategies;
        for row in &s.product {
            assert!(row.percentiles.iter().all(|v| (v - annihilated).abs() < 1e-12));
        }
        for row in &s.absdiff[1..] {
            assert!(row.percentiles.iter().all(|v| (v - annihilated).abs() < 1e-12));
        }
        let kept = -(3.0 + 1.0f64.exp()).ln();
        assert!(s.absdiff[0].percentiles.iter().all(|v| (v - kept).abs() < 1e-12));
    }

    #[test]
    fn zero_count_matches_unmasked_energy() {
        let (e1, e2) = (fv(&[0.3, -0.4, 0.5]), fv(&[0.1, 0.7, -0.2]));
        let sweep = energy_sweep(&[(e1.clone(), e2.clone())], &SweepConfig::new(vec![0.1]), None).unwrap();
        let e = &sweep.per_proportion[0];
        assert_eq!(e.m_count, 0);
        let unmasked = residual_content_energy(&e1, &e2, 1.0).unwrap();
        assert_eq!(e.product, vec![unmasked]);
        assert_eq!(e.absdiff, vec![unmasked]);
    }

    #[test]
    fn config_validation() {
        assert!(SweepConfig::new(vec![]).validate().is_err());
        assert!(SweepConfig::new(vec![0.0]).validate().is_err());
        assert!(SweepConfig::new(vec![1.5]).validate().is_err());
        let mut c = SweepConfig::new(vec![0.5]);
        c.k_values = Some(vec![1]);
        assert!(c.validate().is_err());
        c.k_values = Some(vec![2, 5]);
        c.temperature = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn broadcast_and_mismatch() {
        let images = EmbeddingSet::from_vectors(2, [fv(&[1.0, 0.0]), fv(&[0.0, 1.0])]).unwrap();
        let one = EmbeddingSet::from_vectors(2, [fv(&[0.5, 0.5])]).unwrap();
        assert_eq!(align_pairs(&images, &one).unwrap().len(), 2);
        let three = EmbeddingSet::from_vectors(2, [fv(&[1.0, 0.0]), fv(&[1.0, 0.0]), fv(&[1.0, 0.0])]).unwrap();
        assert!(align_pairs(&images, &three).is_err());
        let wide = EmbeddingSet::from_vectors(3, [fv(&[1.0, 0.0, 0.0])]).unwrap();
        let msg = align_pairs(&images, &wide).unwrap_err().to_string();
        assert!(msg.contains("dim 2") && msg.contains("dim 3"));
    }

    #[test]
    fn k_sweep_single_k_equals_direct_evaluation() {
        let pairs = vec![(fv(&[0.9, -0.2, 0.5]), fv(&[0.8, 0.1, 0.6]))];
        let items = vec![EvalItem::new(fv(&[0.0, 1.0, 0.0]), fv(&[1.0, 0.0, 0.0]), fv(&[1.0, 0.0, 0.0]), fv(&[0.0, 1.0, 0.0])).unwrap()];
        let report = k_sweep(&pairs, &SweepItems::Shared(items.clone()), &[2], None).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows[0].metrics, evaluate(&items, false).unwrap());
    }

    #[test]
    fn constant_products_mask_nothing_for_any_k() {
        let e = fv(&[0.5, 0.5, 0.5, 0.5]);
        let pairs = vec![(e.clone(), e.clone()); 2];
        let items = SweepItems::MaskedProxy { prompts: vec![fv(&[1.0, -1.0, 0.0, 0.0])] };
        let report = k_sweep(&pairs, &items, &[2, 3, 5], None).unwrap();
        for row in &report.rows {
            assert_eq!(row.masked_counts, vec![0, 0]);
            assert_eq!(row.collapsed_pairs, 2);
            assert_eq!(row.metrics, report.rows[0].metrics);
        }
    }

    #[test]
    fn theory_runs_are_worker_independent() {
        let a = run_theory(TheoremKind::AdapterFamilies, 12, 3, Some(1)).unwrap();
        let b = run_theory(TheoremKind::AdapterFamilies, 12, 3, Some(4)).unwrap();
        assert_eq!(a, b);
        assert!(run_theory(TheoremKind::SelectionDominance, 0, 1, None).is_err());
        assert!(with_workers(Some(0), || ()).is_err());
    }
}
