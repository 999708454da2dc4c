//! `scop` — spatial-pair curation and measurement toolkit.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use scop_core::decode::TemplatePool;
use scop_core::proxy::{self, Metric, PairingMode};
use scop_core::relation::RelationRule;
use scop_core::visor;

use scop_tools::config::Config;
use scop_tools::pipeline::{self, with_thread_pool};
use scop_tools::proxy_io::{self, Oracle};
use scop_tools::report;
use scop_tools::tenor_check::{run_checks, CheckConfig};
use scop_tools::{builtin, coco, crops, manifest, visor_io};

#[derive(Parser)]
#[command(
    name = "scop",
    about = "Curate spatially unambiguous object pairs and measure spatial understanding",
    version
)]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0, env = "SCOP_THREADS")]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full engine: ingest, pair, filter, decode, write manifest.
    Curate(CurateArgs),
    /// Filtering statistics only; prints the per-stage table.
    Stats(StatsArgs),
    /// Generate prompt groups (base + three variations).
    Prompts(PromptsArgs),
    /// Retrieve the most similar prompt variation per group.
    Retrieve(RetrieveArgs),
    /// Score detection trials: uncond, cond, at-least-n, object accuracy.
    Visor(VisorArgs),
    /// Run the ordering-injection property suite.
    TenorCheck(TenorCheckArgs),
}

#[derive(Args)]
struct CommonCurate {
    /// Instances JSON (COCO format).
    #[arg(long)]
    annotations: PathBuf,

    /// Optional `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    tau_v: Option<String>,
    #[arg(long)]
    tau_u: Option<String>,
    #[arg(long)]
    tau_o: Option<String>,
    #[arg(long)]
    tau_s: Option<String>,

    /// Union-area interpretation for visual significance.
    #[arg(long, value_enum)]
    union_mode: Option<UnionModeArg>,

    /// Sector rule for relation tokens.
    #[arg(long, value_enum)]
    relation_rule: Option<RelationRuleArg>,
}

impl CommonCurate {
    fn build_config(&self) -> Result<Config> {
        let mut config = Config::load(self.config.as_deref())?;
        for (key, value) in [
            ("tau_v", &self.tau_v),
            ("tau_u", &self.tau_u),
            ("tau_o", &self.tau_o),
            ("tau_s", &self.tau_s),
        ] {
            if let Some(value) = value {
                config.set(key, value, 0)?;
            }
        }
        if let Some(mode) = self.union_mode {
            config.union_mode = mode.into();
        }
        if let Some(rule) = self.relation_rule {
            config.relation_rule = rule.into();
        }
        Ok(config)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum UnionModeArg {
    Exact,
    EnclosingBox,
}

impl From<UnionModeArg> for scop_core::constraints::UnionMode {
    fn from(v: UnionModeArg) -> Self {
        match v {
            UnionModeArg::Exact => Self::Exact,
            UnionModeArg::EnclosingBox => Self::EnclosingBox,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RelationRuleArg {
    Octant,
    AxisDominant,
}

impl From<RelationRuleArg> for RelationRule {
    fn from(v: RelationRuleArg) -> Self {
        match v {
            RelationRuleArg::Octant => Self::Octant,
            RelationRuleArg::AxisDominant => Self::AxisDominant,
        }
    }
}

#[derive(Args)]
struct CurateArgs {
    #[command(flatten)]
    common: CommonCurate,

    /// Output directory for manifest.jsonl, stats.json, rejects.jsonl.
    #[arg(long)]
    out_dir: PathBuf,

    /// Replace the built-in caption templates (JSON: token -> [templates]).
    #[arg(long)]
    templates: Option<PathBuf>,

    #[arg(long)]
    and_probability: Option<f64>,
    #[arg(long)]
    max_expansion: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,

    /// Source images; enables pixel cropping.
    #[arg(long)]
    images_dir: Option<PathBuf>,

    /// Where crops go (default `<out-dir>/crops`).
    #[arg(long)]
    crops_dir: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    common: CommonCurate,

    /// Also write the stats report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PromptsArgs {
    /// Output JSONL of prompt groups.
    #[arg(long)]
    out: PathBuf,

    /// Optional `key = value` config file (reads `proxy_mode`).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Pairing mode (overrides the config file).
    #[arg(long, value_enum)]
    mode: Option<PairingModeArg>,

    /// Category names, one per line (default: the 80 built-in categories).
    #[arg(long)]
    categories: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PairingModeArg {
    Paper,
    Full,
}

impl From<PairingModeArg> for PairingMode {
    fn from(v: PairingModeArg) -> Self {
        match v {
            PairingModeArg::Paper => Self::Paper,
            PairingModeArg::Full => Self::Full,
        }
    }
}

#[derive(Args)]
struct RetrieveArgs {
    /// Prompt groups JSONL (from `scop prompts`).
    #[arg(long)]
    groups: PathBuf,

    /// Embeddings JSONL `{group_id, variant, vector}`.
    #[arg(long, conflicts_with = "oracle")]
    embeddings: Option<PathBuf>,

    /// Embed in-process with a reference embedder instead of a file.
    #[arg(long, value_enum)]
    oracle: Option<OracleArg>,

    /// Embedding dimension for the reference embedders.
    #[arg(long, default_value_t = 16)]
    dim: usize,

    /// Optional `key = value` config file (reads `metric`).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Similarity metric (overrides the config file).
    #[arg(long, value_enum)]
    metric: Option<MetricArg>,

    /// Also write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleArg {
    BagOfWords,
    OrderSensitive,
}

impl From<OracleArg> for Oracle {
    fn from(v: OracleArg) -> Self {
        match v {
            OracleArg::BagOfWords => Self::BagOfWords,
            OracleArg::OrderSensitive => Self::OrderSensitive,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Cosine,
    Dot,
    Euclidean,
}

impl From<MetricArg> for Metric {
    fn from(v: MetricArg) -> Self {
        match v {
            MetricArg::Cosine => Self::Cosine,
            MetricArg::Dot => Self::Dot,
            MetricArg::Euclidean => Self::Euclidean,
        }
    }
}

#[derive(Args)]
struct VisorArgs {
    /// Detection trials JSONL.
    #[arg(long)]
    detections: PathBuf,

    /// Optional `key = value` config file (reads `conf_threshold`).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Minimum detection confidence (overrides the config file).
    #[arg(long)]
    conf_threshold: Option<f64>,

    /// Also write the scores as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TenorCheckArgs {
    #[arg(long, default_value_t = 6)]
    tokens: usize,
    #[arg(long, default_value_t = 12)]
    model_dim: usize,
    #[arg(long, default_value_t = 8)]
    head_dim: usize,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Curate(args) => cmd_curate(args, cli.threads),
        Command::Stats(args) => cmd_stats(args, cli.threads),
        Command::Prompts(args) => cmd_prompts(args),
        Command::Retrieve(args) => cmd_retrieve(args),
        Command::Visor(args) => cmd_visor(args),
        Command::TenorCheck(args) => cmd_tenor_check(args),
    }
}

fn cmd_curate(args: CurateArgs, threads: usize) -> Result<()> {
    let mut config = args.common.build_config()?;
    if let Some(p) = args.and_probability {
        config.and_probability = p;
    }
    if let Some(e) = args.max_expansion {
        config.max_expansion = e;
    }
    if let Some(s) = args.seed {
        config.global_seed = s;
    }
    config.validate()?;

    let pool = match &args.templates {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading templates {}", path.display()))?;
            let map = serde_json::from_str(&text)
                .with_context(|| format!("parsing templates {}", path.display()))?;
            TemplatePool::from_map(map).map_err(|e| anyhow::anyhow!("{e}"))?
        }
        None => TemplatePool::default_pool(),
    };

    let loaded = coco::load_dataset(&args.common.annotations)?;
    let output = with_thread_pool(threads, || pipeline::curate(&loaded.index, &config, &pool))??;

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let written = manifest::write_manifest(&output.records, &args.out_dir.join("manifest.jsonl"))?;
    manifest::write_rejects(&loaded.rejects, &args.out_dir.join("rejects.jsonl"))?;
    report::write_json(&output.stats, &args.out_dir.join("stats.json"))?;

    if let Some(images_dir) = &args.images_dir {
        let crops_dir = args
            .crops_dir
            .clone()
            .unwrap_or_else(|| args.out_dir.join("crops"));
        let summary = crops::crop_records(&output.records, &loaded.index, images_dir, &crops_dir)?;
        println!(
            "crops: {} written, {} missing sources",
            summary.written, summary.missing_sources
        );
    }

    print!("{}", report::stats_table(&output.stats));
    println!("manifest: {written} records -> {}", args.out_dir.display());
    Ok(())
}

fn cmd_stats(args: StatsArgs, threads: usize) -> Result<()> {
    let config = args.common.build_config()?;
    config.validate()?;
    let loaded = coco::load_dataset(&args.common.annotations)?;
    let stats = with_thread_pool(threads, || pipeline::stats_only(&loaded.index, &config))?;
    if let Some(out) = &args.out {
        report::write_json(&stats, out)?;
    }
    print!("{}", report::stats_table(&stats));
    if !loaded.rejects.is_empty() {
        println!("rejected annotations: {}", loaded.rejects.len());
    }
    Ok(())
}

fn cmd_prompts(args: PromptsArgs) -> Result<()> {
    let config = Config::load(args.config.as_deref())?;
    config.validate()?;
    let mode = args.mode.map(PairingMode::from).unwrap_or(config.proxy_mode);
    let categories = match &args.categories {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("reading categories {}", path.display()))?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect(),
        None => builtin::coco_category_names(),
    };
    let groups = proxy::generate_groups(&categories, mode).map_err(|e| anyhow::anyhow!("{e}"))?;
    let written = proxy_io::write_groups(&groups, &args.out)?;
    println!("prompt groups: {written} -> {}", args.out.display());
    Ok(())
}

fn cmd_retrieve(args: RetrieveArgs) -> Result<()> {
    let config = Config::load(args.config.as_deref())?;
    config.validate()?;
    let metric = args.metric.map(Metric::from).unwrap_or(config.metric);
    let groups = proxy_io::read_groups(&args.groups)?;
    let records = match (&args.embeddings, args.oracle) {
        (Some(path), None) => proxy_io::read_embeddings(path)?,
        (None, Some(oracle)) => {
            if args.dim < 8 {
                bail!("--dim must be at least 8");
            }
            proxy_io::oracle_records(&groups, oracle.into(), args.dim)
        }
        (None, None) => bail!("provide --embeddings FILE or --oracle EMBEDDER"),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let report_data = proxy::retrieve_records(&groups, records, metric);
    if let Some(out) = &args.out {
        report::write_json(&report_data, out)?;
    }
    print!("{}", report::retrieval_table(&report_data));
    println!(
        "groups: {} evaluated, {} skipped",
        report_data.groups_evaluated, report_data.skipped
    );
    Ok(())
}

fn cmd_visor(args: VisorArgs) -> Result<()> {
    let config = Config::load(args.config.as_deref())?;
    config.validate()?;
    let conf = args.conf_threshold.unwrap_or(config.conf_threshold);
    if !(0.0..=1.0).contains(&conf) {
        bail!("--conf-threshold must be in [0, 1]");
    }
    let trials = visor_io::read_trials(&args.detections)?;
    let scores = visor::aggregate(&trials, conf).map_err(|e| anyhow::anyhow!("{e}"))?;
    if let Some(out) = &args.out {
        report::write_json(&scores, out)?;
    }
    print!("{}", report::visor_table(&scores));
    Ok(())
}

fn cmd_tenor_check(args: TenorCheckArgs) -> Result<()> {
    if !args.head_dim.is_multiple_of(2) {
        bail!("--head-dim must be even for sinusoidal encodings");
    }
    if args.tokens < 2 {
        bail!("--tokens must be at least 2 for a nontrivial permutation");
    }
    if args.model_dim == 0 {
        bail!("--model-dim must be positive");
    }
    let report = run_checks(&CheckConfig {
        tokens: args.tokens,
        model_dim: args.model_dim,
        head_dim: args.head_dim,
        seed: args.seed,
    });
    print!("{}", report.render());
    if !report.passed {
        bail!("tenor-check failed");
    }
    Ok(())
}
