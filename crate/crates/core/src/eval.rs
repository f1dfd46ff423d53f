//! Episodic evaluation of the image-only, text-only (ZSL) and multimodal
//! prototype classifiers.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{ClassId, EmbeddingDataset, SampleId};
use crate::episode::{sample_episode, Episode, QueryCap, TextCap};
use crate::error::{Error, Result};
use crate::gan::{train_tcgan, BaseSet, GanConfig, GanState, GaussianNoise};
use crate::prototype::{
    classify, refine_multimodal_prototypes, text_prototype, visual_prototype, PrototypeSet,
    RefineParams, SupportClass,
};

pub const DEFAULT_EPISODES: usize = 600;
pub const DEFAULT_TOP_K: [usize; 3] = [1, 3, 5];
const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EvalMode {
    ImageOnly,
    Zsl,
    Multimodal,
}

impl EvalMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalMode::ImageOnly => "image_only",
            EvalMode::Zsl => "zsl",
            EvalMode::Multimodal => "multimodal",
        }
    }

    pub fn needs_generator(self) -> bool {
        self != EvalMode::ImageOnly
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "image_only" => Ok(EvalMode::ImageOnly),
            "zsl" => Ok(EvalMode::Zsl),
            "multimodal" => Ok(EvalMode::Multimodal),
            other => Err(Error::InvalidConfig(format!(
                "unknown mode '{other}' (expected image_only, zsl or multimodal)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub way: usize,
    pub shot: usize,
    pub episodes: usize,
    pub query_cap: QueryCap,
    pub texts_cap: TextCap,
    pub refine: RefineParams,
    pub top_k: Vec<usize>,
    pub seed: u64,
    /// Worker threads for episodes; 0 lets the pool decide.
    pub threads: usize,
}

impl EvalConfig {
    pub fn new(way: usize, shot: usize) -> Self {
        Self {
            way,
            shot,
            episodes: DEFAULT_EPISODES,
            query_cap: QueryCap::default(),
            texts_cap: TextCap::Unlimited,
            refine: RefineParams::default(),
            top_k: DEFAULT_TOP_K.to_vec(),
            seed: 0,
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.way == 0 || self.shot == 0 {
            return Err(Error::InvalidConfig("way and shot must be >= 1".into()));
        }
        if self.episodes < 2 {
            return Err(Error::InvalidConfig(format!(
                "at least 2 episodes are needed for a confidence interval, got {}",
                self.episodes
            )));
        }
        if self.top_k.is_empty() || self.top_k.contains(&0) {
            return Err(Error::InvalidConfig("top-k list must be non-empty with k >= 1".into()));
        }
        if self.refine.rounds == 0 {
            return Err(Error::InvalidConfig("rounds must be >= 1".into()));
        }
        if !(self.refine.lambda >= 0.0 && self.refine.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be finite and >= 0, got {}",
                self.refine.lambda
            )));
        }
        Ok(())
    }

    pub fn describe(&self) -> Vec<String> {
        vec![
            format!("way = {}", self.way),
            format!("shot = {}", self.shot),
            format!("episodes = {}", self.episodes),
            format!("query_per_class = {}", self.query_cap),
            format!("texts_cap = {}", self.texts_cap),
            format!("lambda = {}", self.refine.lambda),
            format!("rounds = {}", self.refine.rounds),
            format!("extra_steps = {}", self.refine.extra_steps),
            format!(
                "metrics = {}",
                self.top_k.iter().map(|k| format!("top{k}")).collect::<Vec<_>>().join(",")
            ),
            format!("seed = {}", self.seed),
        ]
    }
}

/// Where the generator for text-based modes comes from.
#[derive(Debug, Clone, Copy)]
pub enum GanSource<'a> {
    None,
    Train(&'a GanConfig),
    Trained(&'a GanState),
}

/// 1 when `truth` is among the first `k` ranked classes.
pub fn topk_accuracy(ranked: &[ClassId], truth: ClassId, k: usize) -> f64 {
    if ranked.iter().take(k).any(|&c| c == truth) {
        1.0
    } else {
        0.0
    }
}

/// Mean and 95% normal-approximation half-width `1.96·s/√n`.
pub fn confidence_interval(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "confidence interval needs at least 2 values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, Z_95 * var.sqrt() / n.sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub k: usize,
    pub per_episode: Vec<f64>,
    pub mean: f64,
    pub ci95: f64,
}

impl MetricSummary {
    pub fn name(&self) -> String {
        format!("top{}", self.k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub way: usize,
    pub shot: usize,
    pub episodes: usize,
    pub seed: u64,
    pub metrics: Vec<MetricSummary>,
}

pub const REPORT_HEADER: &str = "mode,way,shot,metric,mean,ci95,episodes,seed";

impl EvalReport {
    pub fn metric(&self, k: usize) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.k == k)
    }

    pub fn csv_rows(&self) -> Vec<String> {
        self.metrics
            .iter()
            .map(|m| {
                format!(
                    "{},{},{},{},{},{},{},{}",
                    self.mode,
                    self.way,
                    self.shot,
                    m.name(),
                    m.mean,
                    m.ci95,
                    self.episodes,
                    self.seed
                )
            })
            .collect()
    }
}

/// Ranked prediction for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub sample: SampleId,
    pub truth: ClassId,
    pub ranked: Vec<ClassId>,
}

/// Everything computed for one episode.
#[derive(Debug, Clone)]
pub struct EpisodeRun {
    pub episode: Episode,
    pub image_only: Option<(PrototypeSet, Vec<QueryOutcome>)>,
    pub zsl: Option<(PrototypeSet, Vec<QueryOutcome>)>,
    pub multimodal: Option<(PrototypeSet, Vec<QueryOutcome>)>,
}

impl EpisodeRun {
    pub fn outcomes(&self, mode: EvalMode) -> Option<&[QueryOutcome]> {
        let slot = match mode {
            EvalMode::ImageOnly => &self.image_only,
            EvalMode::Zsl => &self.zsl,
            EvalMode::Multimodal => &self.multimodal,
        };
        slot.as_ref().map(|(_, o)| o.as_slice())
    }

    pub fn prototypes(&self, mode: EvalMode) -> Option<&PrototypeSet> {
        let slot = match mode {
            EvalMode::ImageOnly => &self.image_only,
            EvalMode::Zsl => &self.zsl,
            EvalMode::Multimodal => &self.multimodal,
        };
        slot.as_ref().map(|(p, _)| p)
    }
}

/// Child RNG of episode `index`: the master seed on its own stream.
pub fn episode_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Shared state for running episodes against one dataset and generator.
pub struct EpisodeRunner<'a> {
    dataset: &'a EmbeddingDataset,
    gan: Option<GanState>,
    base: Option<BaseSet<'a>>,
}

impl<'a> EpisodeRunner<'a> {
    /// Trains or adopts a generator when any of `modes` needs one. Image-only
    /// runners never read text vectors.
    pub fn new(dataset: &'a EmbeddingDataset, modes: &[EvalMode], source: GanSource<'_>) -> Result<Self> {
        if !modes.iter().any(|m| m.needs_generator()) {
            return Ok(Self {
                dataset,
                gan: None,
                base: None,
            });
        }
        let gan = match source {
            GanSource::None => {
                return Err(Error::InvalidConfig(
                    "zsl and multimodal modes need a generator (model file or GAN config)".into(),
                ))
            }
            GanSource::Train(config) => train_tcgan(dataset, config)?,
            GanSource::Trained(state) => {
                let c = state.config();
                if c.text_dim != dataset.text_dim() || c.visual_dim != dataset.visual_dim() {
                    return Err(Error::InvalidConfig(format!(
                        "generator dims text={} visual={} do not match dataset text={} visual={}",
                        c.text_dim,
                        c.visual_dim,
                        dataset.text_dim(),
                        dataset.visual_dim()
                    )));
                }
                state.clone()
            }
        };
        let base = if modes.contains(&EvalMode::Multimodal) {
            Some(BaseSet::from_dataset(dataset)?)
        } else {
            None
        };
        Ok(Self {
            dataset,
            gan: Some(gan),
            base,
        })
    }

    pub fn generator(&self) -> Option<&GanState> {
        self.gan.as_ref()
    }

    fn outcomes(&self, protos: &PrototypeSet, episode: &Episode) -> Result<Vec<QueryOutcome>> {
        let mut out = Vec::with_capacity(episode.query_count());
        for class in &episode.classes {
            for &q in &class.query {
                let sample = self.dataset.sample(q);
                let c = classify(protos, &sample.visual)?;
                out.push(QueryOutcome {
                    sample: sample.id,
                    truth: class.class_id,
                    ranked: c.ranked,
                });
            }
        }
        Ok(out)
    }

    /// Samples episode `index` of the stream and evaluates it under `modes`
    /// on identical support and query sets.
    pub fn run(&self, config: &EvalConfig, modes: &[EvalMode], index: usize) -> Result<EpisodeRun> {
        let ds = self.dataset;
        let mut rng = episode_rng(config.seed, index);
        let episode = sample_episode(ds, config.way, config.shot, config.query_cap, config.texts_cap, &mut rng)?;
        let gan_seed: u64 = rng.random();

        let visuals: Vec<Vec<&[f64]>> = episode
            .classes
            .iter()
            .map(|c| c.support.iter().map(|&i| ds.sample(i).visual.as_slice()).collect())
            .collect();
        let text_support = || -> Vec<SupportClass<'_>> {
            episode
                .classes
                .iter()
                .zip(&visuals)
                .map(|(c, v)| SupportClass {
                    class_id: c.class_id,
                    visuals: v.clone(),
                    texts: c
                        .support
                        .iter()
                        .map(|&i| (ds.sample(i).id, config.texts_cap.apply(ds.texts(i))))
                        .collect(),
                })
                .collect()
        };

        let mut run = EpisodeRun {
            episode: episode.clone(),
            image_only: None,
            zsl: None,
            multimodal: None,
        };
        if modes.contains(&EvalMode::ImageOnly) {
            let protos = PrototypeSet::new(
                episode
                    .classes
                    .iter()
                    .zip(&visuals)
                    .map(|(c, v)| visual_prototype(v, c.class_id))
                    .collect::<Result<_>>()?,
            )?;
            let o = self.outcomes(&protos, &episode)?;
            run.image_only = Some((protos, o));
        }
        if modes.contains(&EvalMode::Zsl) {
            let gan = self.gan.as_ref().expect("generator present for zsl");
            let support = text_support();
            let mut noise = GaussianNoise(&mut rng);
            let protos = PrototypeSet::new(
                support
                    .iter()
                    .map(|s| text_prototype(gan, &s.texts, s.class_id, &mut noise))
                    .collect::<Result<_>>()?,
            )?;
            let o = self.outcomes(&protos, &episode)?;
            run.zsl = Some((protos, o));
        }
        if modes.contains(&EvalMode::Multimodal) {
            let mut gan = self.gan.clone().expect("generator present for multimodal");
            gan.reseed(gan_seed);
            let base = self.base.as_ref().expect("base set present for multimodal");
            let support = text_support();
            let mut noise = GaussianNoise(&mut rng);
            let (_, protos) = refine_multimodal_prototypes(&mut gan, &support, config.refine, base, &mut noise)?;
            let o = self.outcomes(&protos, &episode)?;
            run.multimodal = Some((protos, o));
        }
        Ok(run)
    }

    /// Runs episodes `0..config.episodes`, in index order regardless of the
    /// thread count.
    pub fn run_all(&self, config: &EvalConfig, modes: &[EvalMode]) -> Result<Vec<EpisodeRun>> {
        config.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| {
            (0..config.episodes)
                .into_par_iter()
                .map(|i| self.run(config, modes, i))
                .collect()
        })
    }
}

/// Per-episode mean top-k accuracy over the queries of `outcomes`.
pub fn episode_accuracy(outcomes: &[QueryOutcome], k: usize) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    outcomes.iter().map(|o| topk_accuracy(&o.ranked, o.truth, k)).sum::<f64>() / outcomes.len() as f64
}

static WARNED_TRIVIAL_K: AtomicBool = AtomicBool::new(false);

/// Builds the report for `mode` from completed runs.
pub fn summarize(runs: &[EpisodeRun], mode: EvalMode, config: &EvalConfig) -> Result<EvalReport> {
    let mut metrics = Vec::with_capacity(config.top_k.len());
    for &k in &config.top_k {
        if k >= config.way && config.way > 1 && !WARNED_TRIVIAL_K.swap(true, Ordering::Relaxed) {
            log::warn!("top-{k} with {}-way episodes is trivially 1.0", config.way);
        }
        let per_episode: Vec<f64> = runs
            .iter()
            .map(|r| {
                r.outcomes(mode)
                    .map(|o| episode_accuracy(o, k))
                    .ok_or_else(|| Error::InvalidConfig(format!("mode {mode} was not evaluated")))
            })
            .collect::<Result<_>>()?;
        let (mean, ci95) = confidence_interval(&per_episode)?;
        metrics.push(MetricSummary {
            k,
            per_episode,
            mean,
            ci95,
        });
    }
    Ok(EvalReport {
        mode,
        way: config.way,
        shot: config.shot,
        episodes: runs.len(),
        seed: config.seed,
        metrics,
    })
}

/// Evaluates several modes on one shared episode stream.
pub fn evaluate_paired(
    dataset: &EmbeddingDataset,
    modes: &[EvalMode],
    config: &EvalConfig,
    source: GanSource<'_>,
) -> Result<Vec<EvalReport>> {
    config.validate()?;
    let runner = EpisodeRunner::new(dataset, modes, source)?;
    let runs = runner.run_all(config, modes)?;
    modes.iter().map(|&m| summarize(&runs, m, config)).collect()
}

pub fn evaluate(
    dataset: &EmbeddingDataset,
    mode: EvalMode,
    config: &EvalConfig,
    source: GanSource<'_>,
) -> Result<EvalReport> {
    Ok(evaluate_paired(dataset, &[mode], config, source)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topk_cases() {
        let ranked = [ClassId(3), ClassId(1), ClassId(2)];
        assert_eq!(topk_accuracy(&ranked, ClassId(1), 1), 0.0);
        assert_eq!(topk_accuracy(&ranked, ClassId(1), 2), 1.0);
        for k in 3..6 {
            for c in 1..4 {
                assert_eq!(topk_accuracy(&ranked, ClassId(c), k), 1.0);
            }
        }
    }

    #[test]
    fn ci_zero_variance_and_minimum() {
        assert_eq!(confidence_interval(&[0.5; 7]).unwrap(), (0.5, 0.0));
        assert!(confidence_interval(&[0.5]).is_err());
        assert!(confidence_interval(&[]).is_err());
    }

    #[test]
    fn ci_halfwidth_for_unit_stddev() {
        // Alternating ±a has sample stddev 1 when a = sqrt((n-1)/n).
        let n = 600;
        let a = ((n as f64 - 1.0) / n as f64).sqrt();
        let values: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { a } else { -a }).collect();
        let (mean, hw) = confidence_interval(&values).unwrap();
        assert!(mean.abs() < 1e-15);
        assert!((hw - 1.96 / (600f64).sqrt()).abs() < 1e-12);
        assert!((hw - 0.08002).abs() < 1e-5);
    }

    #[test]
    fn modes_parse() {
        for m in [EvalMode::ImageOnly, EvalMode::Zsl, EvalMode::Multimodal] {
            assert_eq!(m.as_str().parse::<EvalMode>().unwrap(), m);
        }
        assert!("both".parse::<EvalMode>().is_err());
    }

    #[test]
    fn episode_streams_differ_and_repeat() {
        let a: u64 = episode_rng(42, 0).random();
        let b: u64 = episode_rng(42, 1).random();
        assert_ne!(a, b);
        assert_eq!(a, episode_rng(42, 0).random::<u64>());
    }
}
