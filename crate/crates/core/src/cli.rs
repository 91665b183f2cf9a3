//! `caption-arena` command line.
//!
//! Every command computes all of its outputs in memory and only then writes
//! them, so a failing command leaves no partial artifacts behind.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use crate::arena::{
    bootstrap_ratings, generate_battles, win_rate_matrix, BattleSet, BootstrapParams, RatingTable,
    Sampling, Scope,
};
use crate::chem::{scaffold_split, SplitAssignment};
use crate::config::RunConfig;
use crate::fusion::single_source;
use crate::metrics::{metric_suite, MetricRecord, MetricReport};
use crate::report::{
    grouped_leaderboard, leaderboard, rating_vs_metrics, split_a_vs_split_b, write_correlations,
    CorrelationMode, GroupKey,
};
use crate::store::{align, load_embeddings, load_manifest, ArenaInputs, DatasetManifest};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input or configuration (exit 2).
    #[error("{0}")]
    Usage(String),
    /// Anything else (exit 1).
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

macro_rules! usage_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Usage(e.to_string())
            }
        }
    )*};
}

usage_from!(
    crate::config::ConfigError,
    crate::store::StoreError,
    crate::chem::SplitError,
    crate::fusion::FusionError,
    crate::arena::ArenaError,
    crate::report::ReportError,
    csv::Error
);

#[derive(Debug, Parser)]
#[command(
    name = "caption-arena",
    version,
    about = "Rate molecule-caption sources by head-to-head battles"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (defaults to the config's out_dir).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 picks the number of CPUs.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Resample battles uniformly instead of dataset-first.
    #[arg(long, global = true)]
    pub pooled_bootstrap: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write scaffold splits for every dataset.
    Split,
    /// Run all pair models and write battles plus single-source metrics.
    Battles,
    /// Fit ratings with bootstrap confidence intervals.
    Rate {
        /// Battle CSVs (default: every file in <out>/battles).
        #[arg(long, num_args = 1..)]
        battles: Vec<PathBuf>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        per_round: Option<usize>,
    },
    /// Write a pairwise win-rate matrix.
    Winrate {
        #[arg(long, num_args = 1..)]
        battles: Vec<PathBuf>,
        /// A dataset name, or `aggregate`.
        #[arg(long, default_value = "aggregate")]
        scope: String,
    },
    /// Write the leaderboard, optionally grouped by a captioner field.
    Report {
        #[arg(long)]
        ratings: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long, num_args = 1..)]
        battles: Vec<PathBuf>,
        /// model_family, prompt_variant, representation or size_label.
        #[arg(long)]
        group_by: Option<String>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        per_round: Option<usize>,
    },
    /// Correlate ratings with metrics, or two disjoint sides with each other.
    Correlate {
        /// rating_vs_metrics or split_a_vs_split_b.
        #[arg(long, default_value = "rating_vs_metrics")]
        mode: String,
        #[arg(long)]
        ratings: Option<PathBuf>,
        /// Second rating table for split_a_vs_split_b.
        #[arg(long)]
        ratings_b: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        datasets_a: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        datasets_b: Vec<String>,
    },
}

/// Files to write, relative to nothing (already joined with the out dir).
type Outputs = Vec<(PathBuf, Vec<u8>)>;

struct Context {
    config: Option<RunConfig>,
    out: PathBuf,
    seed: u64,
    sampling: Sampling,
}

impl Context {
    fn new(common: &Common) -> Result<Self, CliError> {
        let config = match &common.config {
            Some(path) => {
                let c = RunConfig::load(path)?;
                c.validate()?;
                Some(c)
            }
            None => None,
        };
        let out = common
            .out
            .clone()
            .or_else(|| config.as_ref().map(|c| c.out_dir.clone()))
            .unwrap_or_else(|| PathBuf::from("."));
        let seed = common.seed.or(config.as_ref().map(|c| c.seed)).unwrap_or(0);
        let sampling = if common.pooled_bootstrap {
            Sampling::Pooled
        } else {
            Sampling::Stratified
        };
        Ok(Context {
            config,
            out,
            seed,
            sampling,
        })
    }

    fn config(&self) -> Result<&RunConfig, CliError> {
        self.config
            .as_ref()
            .ok_or_else(|| CliError::Usage("this command needs --config".into()))
    }

    fn bootstrap(
        &self,
        rounds: Option<usize>,
        per_round: Option<usize>,
    ) -> Result<BootstrapParams, CliError> {
        let mut p = self
            .config
            .as_ref()
            .map(|c| c.bootstrap_params())
            .unwrap_or_default();
        p.seed = self.seed;
        p.sampling = self.sampling;
        p.rounds = rounds.unwrap_or(p.rounds);
        p.per_round = per_round.unwrap_or(p.per_round);
        p.validate()?;
        Ok(p)
    }

    /// Explicit battle files, or every CSV under `<out>/battles`.
    fn battles(&self, explicit: &[PathBuf]) -> Result<BattleSet, CliError> {
        let files = if explicit.is_empty() {
            let dir = self.out.join("battles");
            let mut v: Vec<PathBuf> = fs::read_dir(&dir)
                .map_err(|e| CliError::Usage(format!("cannot list {}: {e}", dir.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            v.sort();
            v
        } else {
            explicit.to_vec()
        };
        if files.is_empty() {
            return Err(CliError::Usage("no battle files".into()));
        }
        let mut sets = Vec::new();
        for f in &files {
            let records = BattleSet::read_csv(open(f)?)
                .map_err(|e| CliError::Usage(format!("{}: {e}", f.display())))?;
            if records.is_empty() {
                return Err(CliError::Usage(format!("{}: no battles", f.display())));
            }
            sets.push(BattleSet::from_battles(records)?);
        }
        Ok(BattleSet::merge(sets)?)
    }
}

fn open(path: &Path) -> Result<fs::File, CliError> {
    fs::File::open(path)
        .map_err(|e| CliError::Usage(format!("cannot open {}: {e}", path.display())))
}

fn write_all(outputs: Outputs) -> Result<(), CliError> {
    for (path, bytes) in outputs {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)
                .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", dir.display())))?;
        }
        fs::write(&path, bytes)
            .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn load_manifests(config: &RunConfig) -> Result<Vec<DatasetManifest>, CliError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for d in &config.datasets {
        let m = load_manifest(&d.manifest)?;
        if !seen.insert(m.dataset.clone()) {
            return Err(CliError::Usage(format!(
                "dataset {:?} listed twice",
                m.dataset
            )));
        }
        out.push(m);
    }
    Ok(out)
}

fn split_path(out: &Path, dataset: &str) -> PathBuf {
    out.join("splits").join(format!("{dataset}.json"))
}

fn cmd_split(ctx: &Context) -> Result<Outputs, CliError> {
    let config = ctx.config()?;
    config.check_paths()?;
    let mut outputs = Vec::new();
    for manifest in load_manifests(config)? {
        let splits = scaffold_split(&manifest, config.ratios, ctx.seed, config.folds)?;
        for w in splits.iter().flat_map(|s| &s.warnings) {
            eprintln!("warning: {w}");
        }
        outputs.push((
            split_path(&ctx.out, &manifest.dataset),
            crate::chem::split::splits_to_json(&splits).into_bytes(),
        ));
    }
    Ok(outputs)
}

fn load_inputs(config: &RunConfig) -> Result<Vec<ArenaInputs>, CliError> {
    let manifests = load_manifests(config)?;
    manifests
        .into_iter()
        .zip(&config.datasets)
        .map(|(manifest, paths)| {
            let n = manifest.molecules.len();
            let mol = load_embeddings(&paths.molecule_embeddings, n)?;
            let mut caps = BTreeMap::new();
            for (name, path) in &paths.caption_embeddings {
                caps.insert(name.clone(), load_embeddings(path, n)?);
            }
            Ok(align(manifest, mol, caps)?)
        })
        .collect()
}

fn load_splits(out: &Path, dataset: &str) -> Result<Vec<SplitAssignment>, CliError> {
    let path = split_path(out, dataset);
    let text = fs::read_to_string(&path).map_err(|e| {
        CliError::Usage(format!(
            "cannot read {} (run `split` first): {e}",
            path.display()
        ))
    })?;
    let splits: Vec<SplitAssignment> = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("malformed {}: {e}", path.display())))?;
    if splits.is_empty() {
        return Err(CliError::Usage(format!("{} has no folds", path.display())));
    }
    Ok(splits)
}

fn single_source_metrics(
    inputs: &ArenaInputs,
    splits: &[SplitAssignment],
    config: &RunConfig,
    seed: u64,
) -> Result<Vec<MetricRecord>, CliError> {
    let mut names = inputs.captioners();
    names.sort_unstable();
    let jobs: Vec<(&SplitAssignment, &str)> = splits
        .iter()
        .flat_map(|s| names.iter().map(move |&c| (s, c)))
        .collect();
    let dataset = &inputs.manifest().dataset;
    let task = inputs.manifest().task;
    let per_job: Vec<Vec<MetricRecord>> = jobs
        .par_iter()
        .map(|&(split, captioner)| {
            let scores = single_source::<f64>(captioner, inputs, split, config.svm.params(), seed)?;
            let (values, skipped) = metric_suite(task, &scores.scores, &scores.labels);
            for (name, why) in skipped {
                eprintln!(
                    "note: {dataset} fold {} {captioner}: {name} undefined ({why})",
                    split.fold
                );
            }
            Ok(values
                .into_iter()
                .map(|(metric, value)| MetricRecord {
                    dataset: dataset.clone(),
                    fold: split.fold,
                    captioner: captioner.to_string(),
                    metric: metric.to_string(),
                    value,
                })
                .collect())
        })
        .collect::<Result<_, crate::fusion::FusionError>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

fn cmd_battles(ctx: &Context) -> Result<Outputs, CliError> {
    let config = ctx.config()?;
    config.check_paths()?;
    let mut outputs = Vec::new();
    let mut metrics = MetricReport::default();
    for inputs in load_inputs(config)? {
        let dataset = inputs.manifest().dataset.clone();
        let splits = load_splits(&ctx.out, &dataset)?;
        let battles = generate_battles::<f64>(&inputs, &splits, config.svm.params(), ctx.seed)
            .map_err(|e| CliError::Usage(format!("dataset {dataset}: {e}")))?;
        let bytes = csv_bytes(|b| Ok(battles.write_csv(b)?))?;
        outputs.push((
            ctx.out.join("battles").join(format!("{dataset}.csv")),
            bytes,
        ));
        metrics
            .records
            .extend(single_source_metrics(&inputs, &splits, config, ctx.seed)?);
    }
    outputs.push((
        ctx.out.join("metrics.csv"),
        csv_bytes(|b| Ok(metrics.write_csv(b)?))?,
    ));
    Ok(outputs)
}

fn rating_bytes(table: &RatingTable<f64>) -> Result<Vec<u8>, CliError> {
    csv_bytes(|b| Ok(table.write_csv(b)?))
}

fn cmd_rate(
    ctx: &Context,
    files: &[PathBuf],
    rounds: Option<usize>,
    per_round: Option<usize>,
) -> Result<Outputs, CliError> {
    let params = ctx.bootstrap(rounds, per_round)?;
    let battles = ctx.battles(files)?;
    let pooled = bootstrap_ratings::<f64>(&battles, &params)?;
    let mut outputs = vec![(ctx.out.join("ratings.csv"), rating_bytes(&pooled)?)];
    let folds: BTreeSet<usize> = battles.battles().iter().map(|b| b.fold).collect();
    for fold in folds {
        let subset = battles.filter(|b| b.fold == fold)?;
        let table = bootstrap_ratings::<f64>(&subset, &params)
            .map_err(|e| CliError::Usage(format!("fold {fold}: {e}")))?;
        outputs.push((
            ctx.out.join(format!("ratings_fold{fold}.csv")),
            rating_bytes(&table)?,
        ));
    }
    Ok(outputs)
}

fn cmd_winrate(ctx: &Context, files: &[PathBuf], scope: &str) -> Result<Outputs, CliError> {
    let battles = ctx.battles(files)?;
    let scope = Scope::parse(scope);
    let matrix = win_rate_matrix(&battles, &scope)?;
    let bytes = csv_bytes(|b| Ok(matrix.write_csv(b)?))?;
    Ok(vec![(
        ctx.out.join(format!("winrate_{}.csv", scope.label())),
        bytes,
    )])
}

fn read_ratings(path: &Path) -> Result<RatingTable<f64>, CliError> {
    RatingTable::read_csv(open(path)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn read_metrics(path: &Path) -> Result<MetricReport, CliError> {
    MetricReport::read_csv(open(path)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

struct ReportArgs<'a> {
    ratings: &'a Option<PathBuf>,
    metrics: &'a Option<PathBuf>,
    battles: &'a [PathBuf],
    group_by: &'a Option<String>,
    rounds: Option<usize>,
    per_round: Option<usize>,
}

fn cmd_report(ctx: &Context, args: ReportArgs<'_>) -> Result<Outputs, CliError> {
    match args.group_by {
        None => {
            let ratings = read_ratings(
                &args
                    .ratings
                    .clone()
                    .unwrap_or_else(|| ctx.out.join("ratings.csv")),
            )?;
            let metrics = read_metrics(
                &args
                    .metrics
                    .clone()
                    .unwrap_or_else(|| ctx.out.join("metrics.csv")),
            )?;
            let board = leaderboard(&ratings, &metrics);
            let bytes = csv_bytes(|b| Ok(board.write_csv(b)?))?;
            Ok(vec![(ctx.out.join("leaderboard.csv"), bytes)])
        }
        Some(key) => {
            let key: GroupKey = key.parse()?;
            let params = ctx.bootstrap(args.rounds, args.per_round)?;
            let manifests = load_manifests(ctx.config()?)?;
            let battles = ctx.battles(args.battles)?;
            let board = grouped_leaderboard(&battles, &manifests, key, &params)?;
            let bytes = csv_bytes(|b| Ok(board.write_csv(b)?))?;
            Ok(vec![(
                ctx.out.join(format!("leaderboard_{key}.csv")),
                bytes,
            )])
        }
    }
}

struct CorrelateArgs<'a> {
    mode: &'a str,
    ratings: &'a Option<PathBuf>,
    ratings_b: &'a Option<PathBuf>,
    metrics: &'a Option<PathBuf>,
    datasets_a: &'a [String],
    datasets_b: &'a [String],
}

fn cmd_correlate(ctx: &Context, args: CorrelateArgs<'_>) -> Result<Outputs, CliError> {
    let mode: CorrelationMode = args.mode.parse()?;
    let rows = match mode {
        CorrelationMode::RatingVsMetrics => {
            let ratings = read_ratings(
                &args
                    .ratings
                    .clone()
                    .unwrap_or_else(|| ctx.out.join("ratings.csv")),
            )?;
            let metrics = read_metrics(
                &args
                    .metrics
                    .clone()
                    .unwrap_or_else(|| ctx.out.join("metrics.csv")),
            )?;
            rating_vs_metrics(&ratings, &metrics)?
        }
        CorrelationMode::SplitAVsSplitB => {
            let ratings = match (args.ratings, args.ratings_b) {
                (Some(a), Some(b)) => Some((read_ratings(a)?, read_ratings(b)?)),
                (None, None) => None,
                _ => {
                    return Err(CliError::Usage(
                        "--ratings and --ratings-b go together".into(),
                    ))
                }
            };
            let metrics = match (args.datasets_a.is_empty(), args.datasets_b.is_empty()) {
                (false, false) => Some(read_metrics(
                    &args
                        .metrics
                        .clone()
                        .unwrap_or_else(|| ctx.out.join("metrics.csv")),
                )?),
                (true, true) => None,
                _ => {
                    return Err(CliError::Usage(
                        "--datasets-a and --datasets-b go together".into(),
                    ))
                }
            };
            split_a_vs_split_b(
                ratings.as_ref().map(|(a, b)| (a, b)),
                metrics
                    .as_ref()
                    .map(|m| (m, args.datasets_a, args.datasets_b)),
            )?
        }
    };
    let bytes = csv_bytes(|b| Ok(write_correlations(&rows, b)?))?;
    let name = match mode {
        CorrelationMode::RatingVsMetrics => "correlation_rating_vs_metrics.csv",
        CorrelationMode::SplitAVsSplitB => "correlation_split_a_vs_split_b.csv",
    };
    Ok(vec![(ctx.out.join(name), bytes)])
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let ctx = Context::new(&cli.common)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.common.threads)
        .build()
        .map_err(|e| CliError::Internal(format!("cannot start worker pool: {e}")))?;
    let outputs = pool.install(|| match &cli.command {
        Command::Split => cmd_split(&ctx),
        Command::Battles => cmd_battles(&ctx),
        Command::Rate {
            battles,
            rounds,
            per_round,
        } => cmd_rate(&ctx, battles, *rounds, *per_round),
        Command::Winrate { battles, scope } => cmd_winrate(&ctx, battles, scope),
        Command::Report {
            ratings,
            metrics,
            battles,
            group_by,
            rounds,
            per_round,
        } => cmd_report(
            &ctx,
            ReportArgs {
                ratings,
                metrics,
                battles,
                group_by,
                rounds: *rounds,
                per_round: *per_round,
            },
        ),
        Command::Correlate {
            mode,
            ratings,
            ratings_b,
            metrics,
            datasets_a,
            datasets_b,
        } => cmd_correlate(
            &ctx,
            CorrelateArgs {
                mode,
                ratings,
                ratings_b,
                metrics,
                datasets_a,
                datasets_b,
            },
        ),
    })?;
    write_all(outputs)
}

/// Parse arguments, run, and map the outcome to an exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
