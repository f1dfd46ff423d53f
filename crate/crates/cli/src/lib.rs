//! `mmproto` command-line front end.
//!
//! Every subcommand accepts `--config FILE` holding `key = value` lines whose
//! keys are flag names; flags on the command line take precedence over the
//! file, which takes precedence over built-in defaults.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mmproto_core::analysis::{
    ablation_csv_header, prototype_shift_ranking, reduced_text_ablation, retrieve_nearest,
    AnalysisConfig, DEFAULT_SHIFT_EPISODES, SHIFT_CSV_HEADER,
};
use mmproto_core::data::{
    load_dataset, write_atomic, write_dataset, ClassId, DatasetPaths, EmbeddingDataset, Sample, Split,
};
use mmproto_core::episode::{QueryCap, TextCap};
use mmproto_core::eval::{evaluate, EvalConfig, EvalMode, GanSource, REPORT_HEADER};
use mmproto_core::gan::{
    read_gan_state, train_tcgan, write_gan_state, BaseSet, GanConfig, GanState, GaussianNoise,
};
use mmproto_core::prototype::{
    refine_multimodal_prototypes, text_prototype, visual_prototype, RefineParams, SupportClass,
};
use mmproto_core::synth::{generate_synthetic, SynthConfig};
use mmproto_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "mmproto", version, about = "Multimodal prototypical few-shot classification")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded synthetic dataset (visual.csv, texts.csv, splits.csv).
    GenSynth(GenSynthArgs),
    /// Train the text-conditional generator on the base split and save it.
    TrainGan(TrainGanArgs),
    /// Episodic evaluation of one prototype mode; writes a report CSV.
    Eval(EvalArgs),
    /// Relative top-5 gain over image-only for reduced texts per image.
    AblateTexts(AblateArgs),
    /// Per-class prototype shift against per-class accuracy gain.
    RankShift(RankShiftArgs),
    /// Nearest novel samples to a class prototype.
    Retrieve(RetrieveArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Plain-text `key = value` file supplying defaults for any flag.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads for episodes; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Directory holding visual.csv, texts.csv and optionally splits.csv.
    #[arg(long, value_name = "DIR")]
    data: Option<PathBuf>,
    /// Visual embedding file (overrides DIR/visual.csv).
    #[arg(long, value_name = "FILE")]
    visual: Option<PathBuf>,
    /// Text embedding file (overrides DIR/texts.csv).
    #[arg(long, value_name = "FILE")]
    texts: Option<PathBuf>,
    /// Class split file (overrides DIR/splits.csv).
    #[arg(long, value_name = "FILE")]
    splits: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GanArgs {
    /// Previously trained generator; when absent one is trained from the flags below.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Conditioning-augmentation width [default: min(text_dim, 128); harness default].
    #[arg(long)]
    cond_dim: Option<usize>,
    /// Generator hidden widths, comma separated [default: 2*visual_dim; harness default].
    #[arg(long, value_delimiter = ',')]
    gen_hidden: Option<Vec<usize>>,
    /// Discriminator hidden widths, comma separated [default: 2*visual_dim; harness default].
    #[arg(long, value_delimiter = ',')]
    disc_hidden: Option<Vec<usize>>,
    /// Leaky-ReLU slope (harness default).
    #[arg(long, default_value_t = mmproto_core::numkit::DEFAULT_LEAKY_SLOPE)]
    leaky_slope: f64,
    /// Adam learning rate for both networks (method default).
    #[arg(long, default_value_t = mmproto_core::gan::DEFAULT_LR)]
    lr: f64,
    /// Training steps on the base split (method default).
    #[arg(long, default_value_t = mmproto_core::gan::DEFAULT_ITERATIONS)]
    iterations: u64,
    /// Examples per step (harness default).
    #[arg(long, default_value_t = mmproto_core::gan::DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    /// Weight of the conditioning-augmentation KL term (harness default).
    #[arg(long, default_value_t = mmproto_core::gan::DEFAULT_KL_WEIGHT)]
    kl_weight: f64,
    /// Weight of the auxiliary class-prediction loss (harness default).
    #[arg(long, default_value_t = 1.0)]
    aux_weight: f64,
    /// Weight of the unconditional real/fake loss (harness default).
    #[arg(long, default_value_t = 1.0)]
    uncond_weight: f64,
    /// Weight of the conditional real/fake loss (harness default).
    #[arg(long, default_value_t = 1.0)]
    cond_weight: f64,
    /// Seed of the generator's initialisation and training stream [default: --seed].
    #[arg(long)]
    gan_seed: Option<u64>,
}

#[derive(Debug, Args)]
struct RefineArgs {
    /// Fusion weight of text prototypes (method default).
    #[arg(long, default_value_t = mmproto_core::prototype::DEFAULT_LAMBDA)]
    lambda: f64,
    /// Fusion rounds (method default).
    #[arg(long, default_value_t = mmproto_core::prototype::DEFAULT_ROUNDS)]
    rounds: usize,
    /// Generator training steps on base data before each round (harness default).
    #[arg(long, default_value_t = mmproto_core::prototype::DEFAULT_EXTRA_STEPS)]
    extra_steps: u64,
}

#[derive(Debug, Args)]
struct GenSynthArgs {
    #[command(flatten)]
    common: Common,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Base classes (harness default).
    #[arg(long, default_value_t = SynthConfig::default().n_base_classes)]
    n_base: usize,
    /// Novel classes (harness default).
    #[arg(long, default_value_t = SynthConfig::default().n_novel_classes)]
    n_novel: usize,
    /// Samples per class (harness default).
    #[arg(long, default_value_t = SynthConfig::default().samples_per_class)]
    samples_per_class: usize,
    /// Texts per image (method default).
    #[arg(long, default_value_t = SynthConfig::default().texts_per_image)]
    texts_per_image: usize,
    /// Visual embedding width (harness default).
    #[arg(long, default_value_t = SynthConfig::default().visual_dim)]
    visual_dim: usize,
    /// Text embedding width (harness default).
    #[arg(long, default_value_t = SynthConfig::default().text_dim)]
    text_dim: usize,
    /// Spread of class means (harness default).
    #[arg(long, default_value_t = SynthConfig::default().between_class_std)]
    between_std: f64,
    /// Spread of samples around their class mean (harness default, pinned by pilot run).
    #[arg(long, default_value_t = SynthConfig::default().within_class_std)]
    within_std: f64,
    /// Noise added to every text vector (harness default).
    #[arg(long, default_value_t = SynthConfig::default().text_map_noise_std)]
    text_noise_std: f64,
    /// Share of a sample's own deviation its texts describe, in [0, 1] (harness default, pinned by pilot run).
    #[arg(long, default_value_t = SynthConfig::default().text_instance_weight)]
    text_instance_weight: f64,
}

#[derive(Debug, Args)]
struct TrainGanArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    gan: GanArgs,
    /// Model file to write.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct EpisodeArgs {
    /// Master seed; episode i uses its own derived stream.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Query samples per class, or `all` (harness default).
    #[arg(long, default_value_t = QueryCap::default())]
    query_per_class: QueryCap,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    gan: GanArgs,
    #[command(flatten)]
    refine: RefineArgs,
    #[command(flatten)]
    episode: EpisodeArgs,
    /// image_only, zsl or multimodal.
    #[arg(long)]
    mode: EvalMode,
    /// Classes per episode.
    #[arg(long, default_value_t = 5)]
    way: usize,
    /// Support samples per class.
    #[arg(long, default_value_t = 1)]
    shot: usize,
    /// Episodes (method default).
    #[arg(long, default_value_t = mmproto_core::eval::DEFAULT_EPISODES)]
    episodes: usize,
    /// Texts used per support image, or `all` (method default: all).
    #[arg(long, default_value_t = TextCap::Unlimited)]
    texts_cap: TextCap,
    /// Metrics, comma separated (method default).
    #[arg(long, value_delimiter = ',', default_value = "top1,top3,top5")]
    metrics: Vec<String>,
    /// Report CSV to write.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Optional per-episode accuracies CSV.
    #[arg(long, value_name = "FILE")]
    per_episode: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    gan: GanArgs,
    #[command(flatten)]
    refine: RefineArgs,
    #[command(flatten)]
    episode: EpisodeArgs,
    /// Texts-per-image grid (method default).
    #[arg(long = "texts-per-image", value_delimiter = ',', default_value = "1,2,5,10")]
    text_grid: Vec<usize>,
    /// Shot grid (method default).
    #[arg(long, value_delimiter = ',', default_value = "1,2,5")]
    shots: Vec<usize>,
    /// Classes per episode, or `all` novel classes (harness default).
    #[arg(long, default_value = "all")]
    way: String,
    /// Episodes per grid cell (harness default).
    #[arg(long, default_value_t = DEFAULT_SHIFT_EPISODES)]
    episodes: usize,
    /// Ablation CSV to write.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RankShiftArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    gan: GanArgs,
    #[command(flatten)]
    refine: RefineArgs,
    #[command(flatten)]
    episode: EpisodeArgs,
    /// Support samples per class.
    #[arg(long, default_value_t = 1)]
    shot: usize,
    /// Classes per episode, or `all` novel classes (harness default).
    #[arg(long, default_value = "all")]
    way: String,
    /// Episodes (method default).
    #[arg(long, default_value_t = DEFAULT_SHIFT_EPISODES)]
    episodes: usize,
    /// Texts used per support image, or `all`.
    #[arg(long, default_value_t = TextCap::Unlimited)]
    texts_cap: TextCap,
    /// Ranking CSV to write.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RetrieveArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    gan: GanArgs,
    #[command(flatten)]
    refine: RefineArgs,
    /// Novel class whose prototype is the query.
    #[arg(long)]
    class: u32,
    /// Prototype kind: image_only, zsl or multimodal.
    #[arg(long, default_value_t = EvalMode::ImageOnly)]
    mode: EvalMode,
    /// Support samples drawn from the class to build the prototype.
    #[arg(long, default_value_t = 1)]
    shot: usize,
    /// Texts used per support image, or `all`.
    #[arg(long, default_value_t = TextCap::Unlimited)]
    texts_cap: TextCap,
    /// Results to return.
    #[arg(long, default_value_t = 5)]
    top: usize,
    /// Seed for the support draw and generator noise.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Result CSV to write.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

/// A failed run: exit code plus message for the error stream.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_numerical_failure() {
            EXIT_NUMERICAL
        } else if e.is_data_error() {
            EXIT_DATA
        } else if matches!(e, Error::InvalidConfig(_)) {
            EXIT_USAGE
        } else {
            EXIT_FAILURE
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Reads a `key = value` file into `--key value` arguments.
fn config_file_args(path: &Path) -> CliResult<Vec<OsString>> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_DATA,
        message: format!("cannot read config file {}: {e}", path.display()),
    })?;
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Failure::usage(format!("{}:{}: expected `key = value`", path.display(), n + 1))
        })?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(Failure::usage(format!(
                "{}:{}: invalid key '{}'",
                path.display(),
                n + 1,
                key
            )));
        }
        out.push(OsString::from(format!("--{key}")));
        out.push(OsString::from(value.trim()));
    }
    Ok(out)
}

/// Splices config-file arguments in front of the command-line flags so the
/// latter override them.
fn expand_config(argv: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let mut config = None;
    let mut i = 0;
    while i < argv.len() {
        let a = argv[i].to_string_lossy();
        if a == "--config" {
            config = argv.get(i + 1).map(PathBuf::from);
            break;
        }
        if let Some(v) = a.strip_prefix("--config=") {
            config = Some(PathBuf::from(v));
            break;
        }
        i += 1;
    }
    let Some(path) = config else { return Ok(argv) };
    let subcommands: Vec<String> = Cli::command()
        .get_subcommands()
        .map(|s| s.get_name().to_string())
        .collect();
    let sub_idx = argv
        .iter()
        .position(|a| subcommands.iter().any(|s| a.to_string_lossy() == *s))
        .ok_or_else(|| Failure::usage("--config given without a subcommand"))?;
    let mut out = argv[..=sub_idx].to_vec();
    out.extend(config_file_args(&path)?);
    out.extend_from_slice(&argv[sub_idx + 1..]);
    Ok(out)
}

fn load_data(args: &DataArgs) -> CliResult<EmbeddingDataset> {
    let dir_paths = args.data.as_deref().map(DatasetPaths::in_dir);
    let visual = args
        .visual
        .clone()
        .or_else(|| dir_paths.as_ref().map(|p| p.visual.clone()))
        .ok_or_else(|| Failure::usage("a dataset is required: --data DIR or --visual/--texts"))?;
    let texts = args
        .texts
        .clone()
        .or_else(|| dir_paths.as_ref().map(|p| p.texts.clone()))
        .ok_or_else(|| Failure::usage("a text embedding file is required: --data DIR or --texts"))?;
    let splits = args
        .splits
        .clone()
        .or_else(|| dir_paths.as_ref().and_then(|p| p.splits.clone()));
    let ds = load_dataset(&visual, &texts, splits.as_deref())?;
    log::info!(
        "loaded {} samples (visual {}, text {})",
        ds.samples().len(),
        ds.visual_dim(),
        ds.text_dim()
    );
    Ok(ds)
}

fn data_describe(args: &DataArgs) -> Vec<String> {
    let show = |p: &Option<PathBuf>| p.as_ref().map_or_else(|| "-".to_string(), |p| p.display().to_string());
    vec![
        format!("data = {}", show(&args.data)),
        format!("visual = {}", show(&args.visual)),
        format!("texts = {}", show(&args.texts)),
        format!("splits = {}", show(&args.splits)),
    ]
}

fn gan_config(args: &GanArgs, dataset: &EmbeddingDataset, seed: u64) -> GanConfig {
    let mut c = GanConfig::new(dataset.text_dim(), dataset.visual_dim()).with_seed(args.gan_seed.unwrap_or(seed));
    if let Some(d) = args.cond_dim {
        c.cond_dim = d;
    }
    if let Some(h) = &args.gen_hidden {
        c.gen_hidden = h.clone();
    }
    if let Some(h) = &args.disc_hidden {
        c.disc_hidden = h.clone();
    }
    c.leaky_slope = args.leaky_slope;
    c.lr = args.lr;
    c.iterations = args.iterations;
    c.batch_size = args.batch_size;
    c.kl_weight = args.kl_weight;
    c.aux_weight = args.aux_weight;
    c.uncond_weight = args.uncond_weight;
    c.cond_weight = args.cond_weight;
    c
}

/// Generator used by a run: either loaded from `--model` or trained here.
enum Gan {
    Loaded(PathBuf, Box<GanState>),
    Train(GanConfig),
}

impl Gan {
    fn resolve(args: &GanArgs, dataset: &EmbeddingDataset, seed: u64) -> CliResult<Self> {
        match &args.model {
            Some(path) => Ok(Gan::Loaded(path.clone(), Box::new(read_gan_state(path)?))),
            None => {
                let c = gan_config(args, dataset, seed);
                c.validate()?;
                Ok(Gan::Train(c))
            }
        }
    }

    fn source(&self) -> GanSource<'_> {
        match self {
            Gan::Loaded(_, s) => GanSource::Trained(s),
            Gan::Train(c) => GanSource::Train(c),
        }
    }

    fn describe(&self) -> Vec<String> {
        match self {
            Gan::Loaded(path, s) => {
                let mut out = vec![format!("model = {}", path.display())];
                out.extend(s.config().describe().into_iter().map(|l| format!("gan.{l}")));
                out.push(format!("gan.trained_iterations = {}", s.iteration()));
                out
            }
            Gan::Train(c) => c.describe().into_iter().map(|l| format!("gan.{l}")).collect(),
        }
    }
}

fn refine_params(args: &RefineArgs) -> RefineParams {
    RefineParams {
        rounds: args.rounds,
        lambda: args.lambda,
        extra_steps: args.extra_steps,
    }
}

fn parse_way(way: &str) -> CliResult<Option<usize>> {
    match way.trim() {
        "all" => Ok(None),
        w => w
            .parse::<usize>()
            .ok()
            .filter(|&w| w >= 1)
            .map(Some)
            .ok_or_else(|| Failure::usage(format!("--way must be a positive integer or 'all', got '{w}'"))),
    }
}

fn parse_metrics(metrics: &[String]) -> CliResult<Vec<usize>> {
    metrics
        .iter()
        .map(|m| {
            m.trim()
                .strip_prefix("top")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k >= 1)
                .ok_or_else(|| Failure::usage(format!("unknown metric '{m}' (expected topK, e.g. top1)")))
        })
        .collect()
}

/// `#`-prefixed header naming the subcommand and every resolved setting.
fn header(command: &str, lines: &[String]) -> String {
    let mut h = format!("# mmproto {command}\n");
    for l in lines {
        let _ = writeln!(h, "# {l}");
    }
    h
}

fn write_text(path: &Path, body: &str) -> CliResult<()> {
    write_atomic(path, |w| w.write_all(body.as_bytes()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn gen_synth(args: GenSynthArgs) -> CliResult<()> {
    let config = SynthConfig {
        n_base_classes: args.n_base,
        n_novel_classes: args.n_novel,
        samples_per_class: args.samples_per_class,
        texts_per_image: args.texts_per_image,
        visual_dim: args.visual_dim,
        text_dim: args.text_dim,
        between_class_std: args.between_std,
        within_class_std: args.within_std,
        text_map_noise_std: args.text_noise_std,
        text_instance_weight: args.text_instance_weight,
        seed: args.seed,
    };
    let ds = generate_synthetic(&config)?;
    std::fs::create_dir_all(&args.out).map_err(|source| Error::Io {
        path: args.out.clone(),
        source,
    })?;
    let mut lines = vec!["mmproto gen-synth".to_string()];
    lines.extend(config.describe());
    write_dataset(&ds, &args.out, &lines)?;
    log::info!("wrote {} samples to {}", ds.samples().len(), args.out.display());
    Ok(())
}

fn train_gan(args: TrainGanArgs) -> CliResult<()> {
    if args.gan.model.is_some() {
        return Err(Failure::usage("train-gan writes a model; --model is not accepted here"));
    }
    let ds = load_data(&args.data)?;
    let config = gan_config(&args.gan, &ds, args.seed);
    for l in config.describe() {
        log::info!("{l}");
    }
    let state = train_tcgan(&ds, &config)?;
    write_gan_state(&state, &args.out)?;
    log::info!("wrote model {}", args.out.display());
    Ok(())
}

fn eval_config(
    way: usize,
    shot: usize,
    episodes: usize,
    texts_cap: TextCap,
    episode: &EpisodeArgs,
    refine: &RefineArgs,
    top_k: Vec<usize>,
    threads: usize,
) -> EvalConfig {
    EvalConfig {
        way,
        shot,
        episodes,
        query_cap: episode.query_per_class,
        texts_cap,
        refine: refine_params(refine),
        top_k,
        seed: episode.seed,
        threads,
    }
}

fn eval(args: EvalArgs) -> CliResult<()> {
    let top_k = parse_metrics(&args.metrics)?;
    let config = eval_config(
        args.way,
        args.shot,
        args.episodes,
        args.texts_cap,
        &args.episode,
        &args.refine,
        top_k,
        args.common.threads,
    );
    config.validate()?;
    let ds = load_data(&args.data)?;
    let gan = if args.mode.needs_generator() {
        Some(Gan::resolve(&args.gan, &ds, args.episode.seed)?)
    } else {
        None
    };
    let report = evaluate(&ds, args.mode, &config, gan.as_ref().map_or(GanSource::None, Gan::source))?;

    let mut lines = vec![format!("mode = {}", args.mode)];
    lines.extend(config.describe());
    lines.extend(data_describe(&args.data));
    if let Some(g) = &gan {
        lines.extend(g.describe());
    }
    let mut body = header("eval", &lines);
    body.push_str(REPORT_HEADER);
    body.push('\n');
    for row in report.csv_rows() {
        body.push_str(&row);
        body.push('\n');
        log::info!("{row}");
    }
    if let Some(path) = &args.per_episode {
        let mut per = header("eval per-episode", &lines);
        per.push_str("episode,metric,accuracy\n");
        for m in &report.metrics {
            for (i, a) in m.per_episode.iter().enumerate() {
                let _ = writeln!(per, "{i},{},{a}", m.name());
            }
        }
        write_text(path, &per)?;
    }
    write_text(&args.out, &body)
}

fn analysis_config(
    way: &str,
    episodes: usize,
    episode: &EpisodeArgs,
    refine: &RefineArgs,
    threads: usize,
) -> CliResult<AnalysisConfig> {
    Ok(AnalysisConfig {
        way: parse_way(way)?,
        episodes,
        query_cap: episode.query_per_class,
        refine: refine_params(refine),
        seed: episode.seed,
        threads,
        ..AnalysisConfig::default()
    })
}

fn ablate(args: AblateArgs) -> CliResult<()> {
    let config = analysis_config(&args.way, args.episodes, &args.episode, &args.refine, args.common.threads)?;
    let ds = load_data(&args.data)?;
    let gan = Gan::resolve(&args.gan, &ds, args.episode.seed)?;
    let rows = reduced_text_ablation(&ds, &config, &args.text_grid, &args.shots, gan.source())?;

    let mut lines = config.describe();
    lines.push(format!(
        "texts_per_image = {}",
        args.text_grid.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
    ));
    lines.push(format!(
        "shots = {}",
        args.shots.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
    ));
    lines.push(format!(
        "gain = ratio of mean multimodal top{0} to mean image_only top{0} on identical episodes",
        config.top_k
    ));
    lines.extend(data_describe(&args.data));
    lines.extend(gan.describe());
    let mut body = header("ablate-texts", &lines);
    body.push_str(&ablation_csv_header(&args.shots));
    body.push('\n');
    for r in &rows {
        body.push_str(&r.csv_row());
        body.push('\n');
    }
    write_text(&args.out, &body)
}

fn rank_shift(args: RankShiftArgs) -> CliResult<()> {
    let config = analysis_config(&args.way, args.episodes, &args.episode, &args.refine, args.common.threads)?;
    let ds = load_data(&args.data)?;
    let gan = Gan::resolve(&args.gan, &ds, args.episode.seed)?;
    let rows = prototype_shift_ranking(&ds, &config, args.shot, args.texts_cap, gan.source())?;

    let mut lines = config.describe();
    lines.push(format!("shot = {}", args.shot));
    lines.push(format!("texts_cap = {}", args.texts_cap));
    lines.push("shift = mean cosine distance between image_only and multimodal prototypes".into());
    lines.push(format!(
        "gain = mean per-class top{} accuracy difference, multimodal minus image_only",
        config.top_k
    ));
    lines.extend(data_describe(&args.data));
    lines.extend(gan.describe());
    let mut body = header("rank-shift", &lines);
    body.push_str(SHIFT_CSV_HEADER);
    body.push('\n');
    for r in &rows {
        body.push_str(&r.csv_row());
        body.push('\n');
    }
    write_text(&args.out, &body)
}

fn retrieve(args: RetrieveArgs) -> CliResult<()> {
    if args.shot == 0 || args.top == 0 {
        return Err(Failure::usage("--shot and --top must be >= 1"));
    }
    let ds = load_data(&args.data)?;
    let class = ClassId(args.class);
    match ds.class_split(class) {
        Some(Split::Novel) => {}
        Some(Split::Base) => return Err(Failure::usage(format!("class {class} is a base class"))),
        None => return Err(Error::UnknownClass(class).into()),
    }
    let members = ds.class_members(class);
    if members.len() < args.shot {
        return Err(Error::ClassTooSmall {
            class,
            available: members.len(),
            needed: args.shot,
        }
        .into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut support: Vec<usize> = index::sample(&mut rng, members.len(), args.shot)
        .into_iter()
        .map(|i| members[i])
        .collect();
    support.sort_unstable();

    let visuals: Vec<&[f64]> = support.iter().map(|&i| ds.sample(i).visual.as_slice()).collect();
    let mut gan_lines = Vec::new();
    let prototype = match args.mode {
        EvalMode::ImageOnly => visual_prototype(&visuals, class)?,
        mode => {
            let gan = Gan::resolve(&args.gan, &ds, args.seed)?;
            gan_lines = gan.describe();
            let mut state = match gan {
                Gan::Loaded(_, s) => *s,
                Gan::Train(c) => train_tcgan(&ds, &c)?,
            };
            let texts = support
                .iter()
                .map(|&i| (ds.sample(i).id, args.texts_cap.apply(ds.texts(i))))
                .collect::<Vec<_>>();
            let mut noise = GaussianNoise(&mut rng);
            if mode == EvalMode::Zsl {
                text_prototype(&state, &texts, class, &mut noise)?
            } else {
                let base = BaseSet::from_dataset(&ds)?;
                let sc = [SupportClass {
                    class_id: class,
                    visuals,
                    texts,
                }];
                let (_, set) = refine_multimodal_prototypes(&mut state, &sc, refine_params(&args.refine), &base, &mut noise)?;
                set.get(class).cloned().expect("refined class present")
            }
        }
    };
    let candidates: Vec<&Sample> = ds
        .classes(Split::Novel)
        .into_iter()
        .flat_map(|c| ds.class_members(c).iter().copied())
        .filter(|i| !support.contains(i))
        .map(|i| ds.sample(i))
        .collect();
    let result = retrieve_nearest(&prototype.vector, &candidates, args.top)?;
    if result.truncated {
        log::warn!("only {} candidates available, fewer than --top {}", result.ids.len(), args.top);
    }

    let mut lines = vec![
        format!("class = {class}"),
        format!("mode = {}", args.mode),
        format!("shot = {}", args.shot),
        format!(
            "support = {}",
            support.iter().map(|&i| ds.sample(i).id.to_string()).collect::<Vec<_>>().join(" ")
        ),
        format!("texts_cap = {}", args.texts_cap),
        format!("top = {}", args.top),
        format!("truncated = {}", result.truncated),
        format!("seed = {}", args.seed),
    ];
    if args.mode == EvalMode::Multimodal {
        let r = refine_params(&args.refine);
        lines.push(format!("lambda = {}", r.lambda));
        lines.push(format!("rounds = {}", r.rounds));
        lines.push(format!("extra_steps = {}", r.extra_steps));
    }
    lines.extend(data_describe(&args.data));
    lines.extend(gan_lines);
    let mut body = header("retrieve", &lines);
    body.push_str("rank,id,class,distance\n");
    for (rank, (id, d)) in result.ids.iter().zip(&result.distances).enumerate() {
        let c = ds.sample(ds.sample_index(*id).expect("retrieved id exists")).class;
        let _ = writeln!(body, "{},{id},{c},{d}", rank + 1);
    }
    write_text(&args.out, &body)
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::GenSynth(a) => gen_synth(a),
        Command::TrainGan(a) => train_gan(a),
        Command::Eval(a) => eval(a),
        Command::AblateTexts(a) => ablate(a),
        Command::RankShift(a) => rank_shift(a),
        Command::Retrieve(a) => retrieve(a),
    }
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let outcome = expand_config(argv).and_then(|argv| {
        Cli::try_parse_from(argv).map_err(|e| {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            Failure {
                code,
                message: String::new(),
            }
        })
    });
    let result = outcome.and_then(|cli| dispatch(cli.command));
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("error: {}", f.message);
            }
            f.code
        }
    }
}
