//! Batch commands: `gen`, `label`, `build-graph`, `train`, `eval`, `report`.
//!
//! Every JSON artifact embeds the arguments that produced it. Failures print
//! one JSON line on stderr and exit 2 (config), 3 (data) or 4 (numeric).

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::{
    read_dataset, read_json, write_dataset, write_json, write_jsonl, DataError, Dataset, DatasetPaths, FeatureProvider,
    FeatureSpec, InteractionRecord, SyntheticParams, FEATURES_FILE, LABELS_FILE,
};
use crate::graph::{BipartiteGraph, EdgeKind, NodeIndex, NodeKind, NodeRef, SampleMode};
use crate::labeling::{
    label_users, ratio_histogram, HashtagLexicon, LabelError, LabelPolicy, LexiconFile, StanceLabel,
};
use crate::model::{Ablation, Aggregation, DoubleHConfig, LossReduction, ModelError, NodeFeatures};
use crate::train::{
    efficiency_report, evaluate_metrics, metrics_csv, predict, split_dataset, train_model, Checkpoint, Seeds, Split,
    Timing, TrainConfig, TrainError, TrainReport,
};

pub const GOLD_FILE: &str = "gold.jsonl";
pub const LEXICON_FILE: &str = "lexicon.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const REPORT_FILE: &str = "report.json";
pub const TIMING_FILE: &str = "timing.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Data,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }

    /// Single-line machine-readable form.
    pub fn to_json_line(&self) -> String {
        let kind = match self.kind {
            ErrorKind::Config => "config",
            ErrorKind::Data => "data",
            ErrorKind::Numeric => "numeric",
        };
        json!({"error": kind, "code": self.exit_code(), "message": self.message}).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Synthetic(_) => CliError::config(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<LabelError> for CliError {
    fn from(e: LabelError) -> Self {
        match e {
            LabelError::BadThreshold(_) | LabelError::NoBins => CliError::config(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        let kind = if e.is_numeric() {
            ErrorKind::Numeric
        } else if matches!(e, TrainError::Config(_) | TrainError::Model(ModelError::Config(_))) {
            ErrorKind::Config
        } else {
            ErrorKind::Data
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "doubleh",
    version,
    about = "User stance detection on a user-tweet bipartite graph"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic two-community dataset.
    Gen(GenArgs),
    /// Weakly label users from lexicon hashtags.
    Label(LabelArgs),
    /// Materialize the interaction graph and its statistics.
    BuildGraph(BuildGraphArgs),
    /// Train a model and write checkpoint, report and timing.
    Train(TrainArgs),
    /// Score a checkpoint against labeled users.
    Eval(EvalArgs),
    /// Tabulate F1 against training time across runs.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
struct GenArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    users_per_community: usize,
    #[arg(long, default_value_t = 5)]
    tweets_per_user: usize,
    #[arg(long, default_value_t = 5)]
    retweets_per_user: usize,
    #[arg(long, default_value_t = 0.9)]
    p_in: f64,
    /// Tweet feature shift.
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 0.2)]
    user_signal: f64,
    #[arg(long, default_value_t = 0.25)]
    noise: f64,
    #[arg(long, default_value_t = 0.25)]
    user_noise: f64,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 0.8)]
    hashtag_rate: f64,
    #[arg(long, default_value_t = 0.95)]
    hashtag_fidelity: f64,
}

#[derive(Debug, Args, Serialize)]
struct LabelArgs {
    #[arg(long)]
    data: PathBuf,
    /// Defaults to `<data>/lexicon.json`.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Label ties `f_u == threshold` negative instead of positive.
    #[arg(long)]
    tie_negative: bool,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// Defaults to `<data>/labels.jsonl`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Defaults to `<data>/label_histogram.json`.
    #[arg(long)]
    histogram: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct BuildGraphArgs {
    #[arg(long)]
    data: PathBuf,
    /// Defaults to `<data>/graph`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
enum FeatureChoice {
    /// External file when `<data>/features.jsonl` exists, else hashed bag of words.
    Auto,
    External,
    Hashed,
    Random,
}

#[derive(Debug, Args, Serialize)]
struct InputArgs {
    #[arg(long)]
    data: PathBuf,
    /// Defaults to `<data>/labels.jsonl`.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FeatureChoice::Auto)]
    features: FeatureChoice,
    /// Defaults to `<data>/features.jsonl`.
    #[arg(long)]
    features_file: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    feature_dim: usize,
    #[arg(long, default_value_t = 0)]
    feature_seed: u64,
    /// Lexicon whose hashtags are stripped before featurizing; `<data>/lexicon.json` if present.
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum AblationArg {
    Full,
    HeteroOnly,
    HomoOnly,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum AggArg {
    Sum,
    Mean,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ReductionArg {
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SampleArg {
    Replacement,
    Exhaustive,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = 0.1)]
    dropout: f64,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Epochs without validation-F1 gain before stopping; 0 disables.
    #[arg(long, default_value_t = 10)]
    patience: usize,
    #[arg(long, default_value_t = 10)]
    n1: usize,
    #[arg(long, default_value_t = 10)]
    n2: usize,
    #[arg(long, value_enum, default_value_t = AggArg::Sum)]
    agg: AggArg,
    #[arg(long, value_enum, default_value_t = AblationArg::Full)]
    ablation: AblationArg,
    #[arg(long, value_enum, default_value_t = ReductionArg::Mean)]
    reduction: ReductionArg,
    #[arg(long, value_enum, default_value_t = SampleArg::Replacement)]
    sample_mode: SampleArg,
    #[arg(long, default_value_t = 0.9)]
    split: f64,
    #[arg(long, default_value_t = 1)]
    split_seed: u64,
    #[arg(long, default_value_t = 2)]
    init_seed: u64,
    #[arg(long, default_value_t = 3)]
    sampler_seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Subset {
    Validation,
    Train,
    All,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value_t = Subset::Validation)]
    subset: Subset,
    /// Seed for neighbor sampling during scoring.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Metrics JSON path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ReportArgs {
    /// Training output directories.
    #[arg(long, num_args = 1.., required = true)]
    runs: Vec<PathBuf>,
    #[arg(long, default_value_t = crate::train::DEFAULT_F1_FLOOR)]
    floor: f64,
    /// Efficiency JSON path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_config<T: Serialize>(command: &str, args: &T) -> serde_json::Value {
    json!({"command": command, "version": env!("CARGO_PKG_VERSION"), "args": args})
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))
}

fn cmd_gen(args: &GenArgs) -> Result<(), CliError> {
    let params = SyntheticParams {
        users_per_community: args.users_per_community,
        tweets_per_user: args.tweets_per_user,
        retweets_per_user: args.retweets_per_user,
        p_in: args.p_in,
        tweet_signal: args.mu,
        user_signal: args.user_signal,
        noise: args.noise,
        user_noise: args.user_noise,
        dim: args.dim,
        hashtag_rate: args.hashtag_rate,
        hashtag_fidelity: args.hashtag_fidelity,
        seed: args.seed,
    };
    let synthetic = crate::data::generate_synthetic(&params)?;
    create_dir(&args.out)?;
    let paths = DatasetPaths {
        interactions: None,
        labels: None,
        ..DatasetPaths::in_dir(&args.out)
    };
    write_dataset(&synthetic.dataset, &paths)?;
    write_jsonl(&args.out.join(GOLD_FILE), &synthetic.dataset.labels)?;
    write_json(&args.out.join(LEXICON_FILE), &synthetic.lexicon.to_file())?;
    let (within, total) = synthetic.retweet_homophily();
    write_json(
        &args.out.join(MANIFEST_FILE),
        &json!({
            "run": run_config("gen", args),
            "params": params,
            "users": synthetic.dataset.users.len(),
            "tweets": synthetic.dataset.tweets.len(),
            "retweets": total,
            "within_community_retweets": within,
        }),
    )?;
    log::info!(
        "generated {} users and {} tweets in {}",
        synthetic.dataset.users.len(),
        synthetic.dataset.tweets.len(),
        args.out.display()
    );
    Ok(())
}

fn load_lexicon(path: &Path) -> Result<HashtagLexicon, CliError> {
    let file: LexiconFile = read_json(path)?;
    Ok(HashtagLexicon::from_file(file)?)
}

/// Users and tweets (plus interactions when present), without labels or features.
fn read_records(dir: &Path) -> Result<Dataset, CliError> {
    let paths = DatasetPaths {
        labels: None,
        features: None,
        ..DatasetPaths::existing(dir)
    };
    Ok(read_dataset(&paths)?)
}

fn cmd_label(args: &LabelArgs) -> Result<(), CliError> {
    let lexicon = load_lexicon(&args.lexicon.clone().unwrap_or_else(|| args.data.join(LEXICON_FILE)))?;
    let policy = LabelPolicy {
        tie_positive: !args.tie_negative,
        ..LabelPolicy::new(args.threshold)?
    };
    if args.bins == 0 {
        return Err(LabelError::NoBins.into());
    }
    let ds = read_records(&args.data)?;
    let ids: Vec<String> = ds.users.iter().map(|u| u.id.clone()).collect();
    let labels = label_users(&ids, ds.authored_hashtags(), &lexicon, &policy);
    let ratios: Vec<f64> = labels.iter().filter_map(|l| l.f_u).collect();
    let counts = ratio_histogram(&ratios, args.bins)?;
    let out = args.out.clone().unwrap_or_else(|| args.data.join(LABELS_FILE));
    write_jsonl(&out, &labels)?;
    let positive = labels.iter().filter(|l| l.label == StanceLabel::Positive).count();
    write_json(
        &args
            .histogram
            .clone()
            .unwrap_or_else(|| args.data.join("label_histogram.json")),
        &json!({
            "run": run_config("label", args),
            "bins": args.bins,
            "counts": counts,
            "total_users": ids.len(),
            "labeled_users": labels.len(),
            "positive_users": positive,
            "negative_users": labels.len() - positive,
        }),
    )?;
    log::info!("labeled {} of {} users", labels.len(), ids.len());
    Ok(())
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct GraphStats {
    users: usize,
    tweet_records: usize,
    tweet_nodes: usize,
    retweet_records: usize,
    /// Retweets over all tweet records.
    retweet_ratio: f64,
    post_edges: usize,
    retweet_edges: usize,
    directed_edges: usize,
    isolated_users: usize,
    avg_tweet_chars: f64,
    avg_tweet_words: f64,
}

fn graph_stats(ds: &Dataset, graph: &BipartiteGraph) -> Result<GraphStats, CliError> {
    let retweets = ds.tweets.iter().filter(|t| t.retweet_of.is_some()).count();
    let n = ds.tweets.len().max(1) as f64;
    let mut isolated = 0;
    for i in 0..graph.user_count() {
        if graph
            .degree(NodeRef::user(i))
            .map_err(|e| CliError::data(e.to_string()))?
            == 0
        {
            isolated += 1;
        }
    }
    Ok(GraphStats {
        users: graph.user_count(),
        tweet_records: ds.tweets.len(),
        tweet_nodes: graph.tweet_count(),
        retweet_records: retweets,
        retweet_ratio: retweets as f64 / n,
        post_edges: graph.edge_kind_count(EdgeKind::Post),
        retweet_edges: graph.edge_kind_count(EdgeKind::Retweet),
        directed_edges: graph.edge_count(),
        isolated_users: isolated,
        avg_tweet_chars: ds.tweets.iter().map(|t| t.text.chars().count()).sum::<usize>() as f64 / n,
        avg_tweet_words: ds
            .tweets
            .iter()
            .map(|t| t.text.split_whitespace().count())
            .sum::<usize>() as f64
            / n,
    })
}

fn cmd_build_graph(args: &BuildGraphArgs) -> Result<(), CliError> {
    let ds = read_records(&args.data)?;
    let (graph, index) = ds.graph()?;
    let out = args.out.clone().unwrap_or_else(|| args.data.join("graph"));
    create_dir(&out)?;
    let edges = graph
        .interactions()
        .into_iter()
        .map(|e| InteractionRecord {
            user_id: index.user_ids[e.user].clone(),
            tweet_id: index.tweet_ids[e.tweet].clone(),
            kind: e.kind,
        })
        .collect();
    let explicit = Dataset {
        interactions: Some(edges),
        ..ds.clone()
    };
    write_dataset(
        &explicit,
        &DatasetPaths {
            labels: None,
            features: None,
            ..DatasetPaths::in_dir(&out)
        },
    )?;
    let stats = graph_stats(&ds, &graph)?;
    write_json(
        &out.join("graph_stats.json"),
        &json!({"run": run_config("build-graph", args), "stats": stats}),
    )?;
    log::info!(
        "graph: {} users, {} tweets, {} directed edges",
        stats.users,
        stats.tweet_nodes,
        stats.directed_edges
    );
    Ok(())
}

struct Inputs {
    graph: BipartiteGraph,
    features: NodeFeatures,
    labeled: Vec<(NodeRef, StanceLabel)>,
    spec: FeatureSpec,
}

fn load_inputs(args: &InputArgs) -> Result<Inputs, CliError> {
    let mut ds = read_records(&args.data)?;
    let labels_path = args.labels.clone().unwrap_or_else(|| args.data.join(LABELS_FILE));
    ds.labels = crate::data::read_jsonl(&labels_path)?;
    ds.validate()?;
    let (graph, index): (BipartiteGraph, NodeIndex) = ds.graph()?;

    let features_file = args
        .features_file
        .clone()
        .unwrap_or_else(|| args.data.join(FEATURES_FILE));
    let provider = match args.features {
        FeatureChoice::Auto if features_file.exists() => FeatureProvider::external(&features_file)?,
        FeatureChoice::External => FeatureProvider::external(&features_file)?,
        FeatureChoice::Auto | FeatureChoice::Hashed => FeatureProvider::HashedBagOfWords { dim: args.feature_dim },
        FeatureChoice::Random => FeatureProvider::SeededRandom {
            dim: args.feature_dim,
            seed: args.feature_seed,
        },
    };
    let lexicon = match &args.lexicon {
        Some(p) => Some(load_lexicon(p)?),
        None if args.data.join(LEXICON_FILE).exists() => Some(load_lexicon(&args.data.join(LEXICON_FILE))?),
        None => None,
    };
    let features = ds.node_features(&index, &provider, lexicon.as_ref())?;
    let labeled = ds.labeled_nodes(&index)?;
    if labeled.is_empty() {
        return Err(CliError::data(format!(
            "{} holds no labeled users",
            labels_path.display()
        )));
    }
    Ok(Inputs {
        graph,
        features,
        labeled,
        spec: provider.spec(),
    })
}

fn train_config(args: &TrainArgs, feature_dim: usize) -> TrainConfig {
    TrainConfig {
        model: DoubleHConfig {
            layers: args.layers,
            hidden: args.hidden,
            feature_dim,
            dropout: args.dropout,
            one_hop_size: args.n1,
            two_hop_size: args.n2,
            aggregation: match args.agg {
                AggArg::Sum => Aggregation::Sum,
                AggArg::Mean => Aggregation::Mean,
            },
            ablation: match args.ablation {
                AblationArg::Full => Ablation::Full,
                AblationArg::HeteroOnly => Ablation::HeteroOnly,
                AblationArg::HomoOnly => Ablation::HomoOnly,
            },
            classes: 2,
        },
        lr: args.lr,
        batch_size: args.batch,
        epochs: args.epochs,
        patience: args.patience,
        reduction: match args.reduction {
            ReductionArg::Mean => LossReduction::Mean,
            ReductionArg::Sum => LossReduction::Sum,
        },
        sample_mode: match args.sample_mode {
            SampleArg::Replacement => SampleMode::Replacement,
            SampleArg::Exhaustive => SampleMode::Exhaustive,
        },
        split_ratio: args.split,
        seeds: Seeds {
            split: args.split_seed,
            init: args.init_seed,
            sampler: args.sampler_seed,
        },
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RunReport {
    run: serde_json::Value,
    /// Generator seed from `<data>/manifest.json`, when the data is synthetic.
    data_seed: Option<u64>,
    features: FeatureSpec,
    report: TrainReport,
}

fn data_seed(dir: &Path) -> Option<u64> {
    let manifest: serde_json::Value = read_json(&dir.join(MANIFEST_FILE)).ok()?;
    manifest["params"]["seed"].as_u64()
}

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let inputs = load_inputs(&args.input)?;
    let config = train_config(args, inputs.features.dim());
    let outcome = train_model(&inputs.graph, &inputs.features, &inputs.labeled, &config)?;
    create_dir(&args.out)?;
    let run = run_config("train", args);
    let mut checkpoint = Checkpoint::from_outcome(&outcome);
    checkpoint.run = Some(run.clone());
    checkpoint.save(&args.out.join(CHECKPOINT_FILE))?;
    write_json(
        &args.out.join(REPORT_FILE),
        &RunReport {
            run,
            data_seed: data_seed(&args.input.data),
            features: inputs.spec,
            report: outcome.report.clone(),
        },
    )?;
    write_json(&args.out.join(TIMING_FILE), &outcome.timing)?;
    std::fs::write(
        args.out.join("metrics.csv"),
        metrics_csv(&outcome.report, &outcome.timing),
    )
    .map_err(|e| CliError::data(e.to_string()))?;
    let best = &outcome.report.best_validation;
    log::info!(
        "best epoch {}: accuracy {:.4}, F1 {:.4}, {:.2}s",
        outcome.report.best_epoch,
        best.accuracy,
        best.f1_positive,
        outcome.timing.training_seconds
    );
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let inputs = load_inputs(&args.input)?;
    let config = &checkpoint.config;
    if config.model.feature_dim != inputs.features.dim() {
        return Err(CliError::config(format!(
            "checkpoint expects {}-dim features, inputs have {}",
            config.model.feature_dim,
            inputs.features.dim()
        )));
    }
    let chosen: Vec<(NodeRef, StanceLabel)> = match args.subset {
        Subset::All => inputs.labeled.clone(),
        Subset::Train | Subset::Validation => {
            let which = if matches!(args.subset, Subset::Train) {
                Split::Train
            } else {
                Split::Validation
            };
            let mask = split_dataset(inputs.labeled.len(), config.split_ratio, config.seeds.split)?;
            mask.indices(which).into_iter().map(|i| inputs.labeled[i]).collect()
        }
    };
    let nodes: Vec<NodeRef> = chosen.iter().map(|(v, _)| *v).collect();
    let gold: Vec<StanceLabel> = chosen.iter().map(|(_, g)| *g).collect();
    debug_assert!(nodes.iter().all(|v| v.kind == NodeKind::User));
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let scores = predict(
        &checkpoint.params,
        &config.model,
        &inputs.graph,
        &inputs.features,
        &nodes,
        config.batch_size,
        config.sample_mode,
        &mut rng,
    )?;
    let metrics = evaluate_metrics(&scores, &gold)?;
    let doc = json!({
        "run": run_config("eval", args),
        "features": inputs.spec,
        "users": nodes.len(),
        "metrics": metrics,
    });
    match &args.out {
        Some(p) => write_json(p, &doc)?,
        None => println!("{}", serde_json::to_string_pretty(&doc).expect("json value serializes")),
    }
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    let mut runs = Vec::with_capacity(args.runs.len());
    for dir in &args.runs {
        let report: RunReport = read_json(&dir.join(REPORT_FILE))?;
        let timing: Timing = read_json(&dir.join(TIMING_FILE))?;
        let label = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        runs.push((label, report.report, timing));
    }
    let table = efficiency_report(&runs, args.floor);
    print!("{}", table.table());
    if let Some(p) = &args.out {
        write_json(p, &json!({"run": run_config("report", args), "efficiency": table}))?;
    }
    Ok(())
}

/// Parses `argv` (program name first) and runs one command. Returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let err = CliError::config(e.to_string().lines().next().unwrap_or_default().to_string());
                eprintln!("{}", err.to_json_line());
                return err.exit_code();
            }
            print!("{e}");
            return 0;
        }
    };
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Label(a) => cmd_label(a),
        Command::BuildGraph(a) => cmd_build_graph(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            e.exit_code()
        }
    }
}
