//! `stylemask` command line.
//!
//! Values come from flags, then from the `--config` JSON file, then from
//! defaults. `STYLEMASK_LOG` sets the log level. Exit codes: 0 success, 1
//! I/O failure, 2 invalid input or flags, 3 a checked property was violated.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use stylemask_core::theory::TheoremKind;
use stylemask_core::{kmeans_1d, EmbeddingSet, FeatureVector, MaskStrategy, DEFAULT_K, DEFAULT_TEMPERATURE};

use crate::error::{AppError, Result};
use crate::harness::{align_items, align_pairs, energy_sweep, evaluate_corpus, render_energy_table, run_theory, SweepConfig};
use crate::io::{load_embeddings, save_embeddings, write_json};

/// Masking proportions swept when none are given.
pub const DEFAULT_PROPORTIONS: [f64; 10] = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

pub const LOG_ENV: &str = "STYLEMASK_LOG";

#[derive(Debug, Parser)]
#[command(name = "stylemask", version, about = "Mask content out of image embeddings and score the result")]
pub struct Cli {
    /// JSON file with default values for flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads for batch work.
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mask image embeddings against content text embeddings.
    Mask(MaskArgs),
    /// Score generated embeddings for fidelity, leakage, style and alignment.
    Evaluate(EvaluateArgs),
    /// Residual content energy of product vs |difference| masking.
    SimulateEnergy(EnergyArgs),
    /// Check the divergence and selection claims on seeded random instances.
    VerifyTheory(VerifyArgs),
    /// Print the 1-D clustering of each row of a file.
    Cluster(ClusterArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrategyName {
    ProductCluster,
    AbsdiffCluster,
    TopFrac,
    Random,
}

impl StrategyName {
    fn label(self) -> &'static str {
        match self {
            StrategyName::ProductCluster => "product-cluster",
            StrategyName::AbsdiffCluster => "absdiff-cluster",
            StrategyName::TopFrac => "top-frac",
            StrategyName::Random => "random",
        }
    }
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    #[arg(long, value_name = "FILE")]
    pub image_emb: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub text_emb: PathBuf,
    #[arg(long, value_enum)]
    pub strategy: StrategyName,
    /// Clusters for the clustering strategies (default 2).
    #[arg(long)]
    pub k: Option<usize>,
    /// Share of elements masked by top-frac and random.
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub mask_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "FILE")]
    pub generated: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub style_ref: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub content_text: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub prompt_text: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub report: PathBuf,
    /// Include per-item scores in the report.
    #[arg(long)]
    pub per_item: bool,
}

#[derive(Debug, Args)]
pub struct EnergyArgs {
    #[arg(long, value_name = "FILE")]
    pub image_embs: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub text_embs: PathBuf,
    /// Comma-separated proportions in (0, 1].
    #[arg(long, value_name = "CSV")]
    pub proportions: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub report: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TheoremName {
    #[value(name = "1")]
    MaskingDivergence,
    #[value(name = "2")]
    AdapterFamilies,
    #[value(name = "prop1")]
    SelectionDominance,
}

impl From<TheoremName> for TheoremKind {
    fn from(t: TheoremName) -> Self {
        match t {
            TheoremName::MaskingDivergence => TheoremKind::MaskingDivergence,
            TheoremName::AdapterFamilies => TheoremKind::AdapterFamilies,
            TheoremName::SelectionDominance => TheoremKind::SelectionDominance,
        }
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub theorem: TheoremName,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long, value_name = "FILE")]
    pub values: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
}

/// Values read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub k: Option<usize>,
    pub fraction: Option<f64>,
    pub seed: Option<u64>,
    pub temperature: Option<f64>,
    pub proportions: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub workers: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read(path).map_err(|e| AppError::io(path, e))?;
        serde_json::from_slice(&text).map_err(|e| AppError::format(path, format!("invalid config: {e}")))
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args(args: impl IntoIterator<Item = OsString>) -> u8 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let rendered = e.render().to_string();
            let line = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: {}", line.trim_start_matches("error: "));
            return 2;
        }
    };
    init_logging();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

fn init_logging() {
    let raw = std::env::var(LOG_ENV).ok();
    let level = match raw.as_deref().map(str::to_ascii_lowercase).as_deref() {
        None | Some("") => "warn".to_owned(),
        Some(l @ ("error" | "warn" | "info" | "debug")) => l.to_owned(),
        Some(_) => "warn".to_owned(),
    };
    let _ = env_logger::Builder::new().parse_filters(&level).format_timestamp(None).try_init();
    if let Some(r) = raw {
        if !["", "error", "warn", "info", "debug"].contains(&r.to_ascii_lowercase().as_str()) {
            warn!("{LOG_ENV}={r:?} is not one of error, warn, info, debug; using warn");
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let workers = cli.workers.or(config.workers);
    match cli.command {
        Command::Mask(args) => run_mask(&args, &config),
        Command::Evaluate(args) => run_evaluate(&args),
        Command::SimulateEnergy(args) => run_simulate_energy(&args, &config, workers),
        Command::VerifyTheory(args) => run_verify(&args, &config, workers),
        Command::Cluster(args) => run_cluster(&args, &config),
    }
}

/// Fail before any work if the output directory does not exist.
fn check_output(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(AppError::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist"),
        )),
        _ => Ok(()),
    }
}

fn strategy_from(args: &MaskArgs, config: &FileConfig) -> Result<MaskStrategy> {
    let k = args.k.or(config.k).unwrap_or(DEFAULT_K);
    let fraction = || {
        args.fraction
            .or(config.fraction)
            .ok_or_else(|| AppError::validation(format!("--fraction is required for --strategy {}", args.strategy.label())))
    };
    let strategy = match args.strategy {
        StrategyName::ProductCluster => MaskStrategy::ProductCluster { k },
        StrategyName::AbsdiffCluster => MaskStrategy::AbsDiffCluster { k },
        StrategyName::TopFrac => MaskStrategy::TopFraction { fraction: fraction()? },
        StrategyName::Random => {
            MaskStrategy::Random { fraction: fraction()?, seed: args.seed.or(config.seed).unwrap_or(0) }
        }
    };
    strategy.validate()?;
    Ok(strategy)
}

fn strategy_metadata(strategy: &MaskStrategy) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        m.insert(k.to_owned(), v);
    };
    match strategy {
        MaskStrategy::ProductCluster { k } => {
            put("strategy", "product-cluster".into());
            put("k", k.to_string());
        }
        MaskStrategy::AbsDiffCluster { k } => {
            put("strategy", "absdiff-cluster".into());
            put("k", k.to_string());
        }
        MaskStrategy::TopFraction { fraction } => {
            put("strategy", "top-frac".into());
            put("fraction", fraction.to_string());
        }
        MaskStrategy::Random { fraction, seed } => {
            put("strategy", "random".into());
            put("fraction", fraction.to_string());
            put("seed", seed.to_string());
        }
    }
    m
}

pub fn run_mask(args: &MaskArgs, config: &FileConfig) -> Result<()> {
    let strategy = strategy_from(args, config)?;
    check_output(&args.out)?;
    if let Some(p) = &args.mask_out {
        check_output(p)?;
    }
    let images = load_embeddings(&args.image_emb)?;
    let texts = load_embeddings(&args.text_emb)?;
    let pairs = align_pairs(&images, &texts)?;

    let mut masked = EmbeddingSet::new(images.dim())?;
    let mut masks = EmbeddingSet::new(images.dim())?;
    for (row, ((id, _), (e1, e2))) in images.rows().iter().zip(&pairs).enumerate() {
        let outcome = strategy.build(e1, e2, row as u64)?;
        if outcome.mask.masked_count() == 0 {
            warn!("row {id}: nothing masked");
        }
        if outcome.collapsed {
            warn!("row {id}: fewer distinct scores than clusters");
        }
        masked.push(id.clone(), stylemask_core::apply_mask(e1, &outcome.mask)?)?;
        masks.push(id.clone(), outcome.mask.to_feature())?;
    }
    masked.metadata = strategy_metadata(&strategy);
    masks.metadata = masked.metadata.clone();
    save_embeddings(&masked, &args.out)?;
    if let Some(p) = &args.mask_out {
        save_embeddings(&masks, p)?;
    }
    info!("masked {} rows", masked.len());
    Ok(())
}

pub fn run_evaluate(args: &EvaluateArgs) -> Result<()> {
    check_output(&args.report)?;
    let generated = load_embeddings(&args.generated)?;
    let style_ref = load_embeddings(&args.style_ref)?;
    let content_text = load_embeddings(&args.content_text)?;
    let prompt_text = load_embeddings(&args.prompt_text)?;
    let items = align_items(&generated, &style_ref, &content_text, &prompt_text)?;
    let report = evaluate_corpus(&items, args.per_item)?;
    let guarded = stylemask_core::evaluate(&items, true)?.guarded_items().unwrap_or(0);
    if guarded > 0 {
        warn!("{guarded} items had a near-zero style/content similarity; their leakage counts as 1");
    }
    write_json(&args.report, &report)?;
    println!("fidelity {:.3}", report.fidelity);
    println!("leakage {:.3}", report.leakage);
    println!("style {:.3}", report.style);
    println!("image_alignment {:.3}", report.image_alignment);
    println!("text_alignment {:.3}", report.text_alignment);
    Ok(())
}

fn parse_proportions(csv: &str) -> Result<Vec<f64>> {
    csv.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>().map_err(|_| AppError::validation(format!("invalid proportion {s:?}")))
        })
        .collect()
}

pub fn run_simulate_energy(args: &EnergyArgs, config: &FileConfig, workers: Option<usize>) -> Result<()> {
    let proportions = match &args.proportions {
        Some(csv) => parse_proportions(csv)?,
        None => config.proportions.clone().unwrap_or_else(|| DEFAULT_PROPORTIONS.to_vec()),
    };
    let sweep = SweepConfig {
        proportions,
        temperature: args.temperature.or(config.temperature).unwrap_or(DEFAULT_TEMPERATURE),
        k_values: None,
        seed: args.seed.or(config.seed).unwrap_or(0),
    };
    sweep.validate()?;
    check_output(&args.report)?;
    let images = load_embeddings(&args.image_embs)?;
    let texts = load_embeddings(&args.text_embs)?;
    let pairs = align_pairs(&images, &texts)?;
    let result = energy_sweep(&pairs, &sweep, workers)?;
    write_json(&args.report, &result.report)?;
    print!("{}", render_energy_table(&result.report));
    Ok(())
}

#[derive(Serialize)]
struct ClusterLine<'a> {
    id: &'a str,
    k: usize,
    effective_k: usize,
    labels: &'a [usize],
    centroids: &'a [f64],
    within_sse: f64,
}

pub fn run_verify(args: &VerifyArgs, config: &FileConfig, workers: Option<usize>) -> Result<()> {
    let trials = args
        .trials
        .or(config.trials)
        .ok_or_else(|| AppError::validation("--trials is required"))?;
    let seed = args.seed.or(config.seed).unwrap_or(0);
    check_output(&args.report)?;
    let kind = TheoremKind::from(args.theorem);
    let outcome = run_theory(kind, trials, seed, workers)?;
    write_json(&args.report, &outcome)?;
    let mut summary = format!(
        "theorem {}: {} trials, {} violations, {} strict gaps",
        kind.label(),
        outcome.trials,
        outcome.violations.len(),
        outcome.strict_gaps
    );
    if let Some(held) = outcome.assumption_held {
        summary.push_str(&format!(", assumption held in {held}"));
    }
    println!("{summary}");
    if let Some(&witness) = outcome.violations.first() {
        let r = outcome.reports.iter().find(|r| r.seed == Some(witness)).unwrap();
        return Err(AppError::Violation(format!(
            "theorem {} violated on {} trials; first witness seed {witness}: d_lhs {} > d_rhs {}",
            kind.label(),
            outcome.violations.len(),
            r.d_lhs,
            r.d_rhs
        )));
    }
    Ok(())
}

pub fn run_cluster(args: &ClusterArgs, config: &FileConfig) -> Result<()> {
    let k = args.k.or(config.k).unwrap_or(DEFAULT_K);
    let set = load_embeddings(&args.values)?;
    for (id, v) in set.rows() {
        let c = kmeans_1d(FeatureVector::as_slice(v), k)?;
        if c.collapsed() {
            warn!("row {id}: {} distinct values for k = {k}", c.effective_k);
        }
        let line = ClusterLine {
            id,
            k,
            effective_k: c.effective_k,
            labels: &c.labels,
            centroids: &c.centroids,
            within_sse: c.within_sse,
        };
        println!("{}", serde_json::to_string(&line).map_err(|e| AppError::validation(e.to_string()))?);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proportions_parse() {
        assert_eq!(parse_proportions("0.05, 0.1,0.9").unwrap(), vec![0.05, 0.1, 0.9]);
        assert!(parse_proportions("0.1,x").is_err());
    }

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from([
            "stylemask", "mask", "--image-emb", "a", "--text-emb", "b", "--strategy", "top-frac", "--out", "c",
            "--fraction", "0.3",
        ])
        .unwrap();
        let Command::Mask(args) = cli.command else { panic!() };
        let config = FileConfig { fraction: Some(0.6), k: Some(4), ..FileConfig::default() };
        assert_eq!(strategy_from(&args, &config).unwrap(), MaskStrategy::TopFraction { fraction: 0.3 });
    }

    #[test]
    fn config_fills_missing_flags() {
        let cli = Cli::try_parse_from([
            "stylemask", "mask", "--image-emb", "a", "--text-emb", "b", "--strategy", "product-cluster", "--out", "c",
        ])
        .unwrap();
        let Command::Mask(args) = cli.command else { panic!() };
        let config = FileConfig { k: Some(4), ..FileConfig::default() };
        assert_eq!(strategy_from(&args, &config).unwrap(), MaskStrategy::ProductCluster { k: 4 });
        assert_eq!(strategy_from(&args, &FileConfig::default()).unwrap(), MaskStrategy::ProductCluster { k: 2 });
    }

    #[test]
    fn fraction_required_for_fraction_strategies() {
        let cli = Cli::try_parse_from([
            "stylemask", "mask", "--image-emb", "a", "--text-emb", "b", "--strategy", "random", "--out", "c",
        ])
        .unwrap();
        let Command::Mask(args) = cli.command else { panic!() };
        assert_eq!(strategy_from(&args, &FileConfig::default()).unwrap_err().exit_code(), 2);
    }
}
