//! Reduced-text ablation, prototype-shift ranking and prototype retrieval.

use std::collections::BTreeMap;

use crate::data::{ClassId, EmbeddingDataset, Sample, SampleId, Split};
use crate::episode::{QueryCap, TextCap};
use crate::error::{Error, Result};
use crate::eval::{episode_accuracy, EpisodeRunner, EvalConfig, EvalMode, GanSource, QueryOutcome};
use crate::numkit::cosine_distance;
use crate::prototype::RefineParams;

pub const DEFAULT_ABLATION_TEXTS: [usize; 4] = [1, 2, 5, 10];
pub const DEFAULT_ABLATION_SHOTS: [usize; 3] = [1, 2, 5];
pub const DEFAULT_SHIFT_EPISODES: usize = 100;
pub const ANALYSIS_TOP_K: usize = 5;

/// Episode settings shared by both analyses.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    /// `None` uses every novel class in each episode.
    pub way: Option<usize>,
    pub episodes: usize,
    pub query_cap: QueryCap,
    pub refine: RefineParams,
    pub top_k: usize,
    pub seed: u64,
    pub threads: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            way: None,
            episodes: DEFAULT_SHIFT_EPISODES,
            query_cap: QueryCap::default(),
            refine: RefineParams::default(),
            top_k: ANALYSIS_TOP_K,
            seed: 0,
            threads: 1,
        }
    }
}

impl AnalysisConfig {
    fn eval_config(&self, dataset: &EmbeddingDataset, shot: usize, texts_cap: TextCap) -> EvalConfig {
        EvalConfig {
            way: self.way.unwrap_or_else(|| dataset.classes(Split::Novel).len()),
            shot,
            episodes: self.episodes,
            query_cap: self.query_cap,
            texts_cap,
            refine: self.refine,
            top_k: vec![self.top_k],
            seed: self.seed,
            threads: self.threads,
        }
    }

    pub fn describe(&self) -> Vec<String> {
        vec![
            format!(
                "way = {}",
                self.way.map_or_else(|| "all".to_string(), |w| w.to_string())
            ),
            format!("episodes = {}", self.episodes),
            format!("query_per_class = {}", self.query_cap),
            format!("lambda = {}", self.refine.lambda),
            format!("rounds = {}", self.refine.rounds),
            format!("extra_steps = {}", self.refine.extra_steps),
            format!("metric = top{}", self.top_k),
            format!("seed = {}", self.seed),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub texts_per_image: usize,
    /// `(shot, multimodal / image-only mean top-k accuracy)`.
    pub gains: Vec<(usize, f64)>,
}

fn mean_accuracy<'r>(runs: impl Iterator<Item = &'r [QueryOutcome]>, k: usize) -> f64 {
    let accs: Vec<f64> = runs.map(|o| episode_accuracy(o, k)).collect();
    accs.iter().sum::<f64>() / accs.len() as f64
}

fn min_text_count(dataset: &EmbeddingDataset) -> Option<(usize, SampleId)> {
    dataset
        .classes(Split::Novel)
        .into_iter()
        .flat_map(|c| dataset.class_members(c).iter().copied())
        .map(|i| (dataset.sample(i).text_count(), dataset.sample(i).id))
        .min()
}

/// Relative top-k gain of multimodal over image-only prototypes for every
/// `(texts per image, shot)` pair, all on the same episode stream.
pub fn reduced_text_ablation(
    dataset: &EmbeddingDataset,
    config: &AnalysisConfig,
    texts: &[usize],
    shots: &[usize],
    source: GanSource<'_>,
) -> Result<Vec<AblationRow>> {
    if texts.is_empty() || shots.is_empty() {
        return Err(Error::InvalidConfig("ablation grids must be non-empty".into()));
    }
    if let (Some(&k_max), Some((available, sample))) = (texts.iter().max(), min_text_count(dataset)) {
        if k_max > available {
            return Err(Error::TextCapTooLarge {
                requested: k_max,
                available,
                sample,
            });
        }
    }
    if texts.contains(&0) {
        return Err(Error::InvalidConfig("texts per image must be >= 1".into()));
    }
    let modes = [EvalMode::ImageOnly, EvalMode::Multimodal];
    let runner = EpisodeRunner::new(dataset, &modes, source)?;
    let mut rows: Vec<AblationRow> = texts
        .iter()
        .map(|&k| AblationRow {
            texts_per_image: k,
            gains: Vec::new(),
        })
        .collect();
    for &shot in shots {
        for row in rows.iter_mut() {
            let cfg = config.eval_config(dataset, shot, TextCap::First(row.texts_per_image));
            let runs = runner.run_all(&cfg, &modes)?;
            let image = mean_accuracy(runs.iter().filter_map(|r| r.outcomes(EvalMode::ImageOnly)), config.top_k);
            let multi = mean_accuracy(runs.iter().filter_map(|r| r.outcomes(EvalMode::Multimodal)), config.top_k);
            let gain = multi / image;
            if !gain.is_finite() {
                return Err(Error::NonFinite(format!(
                    "relative gain at k={}, shot={shot}: image-only accuracy is {image}",
                    row.texts_per_image
                )));
            }
            log::info!("ablation k={} shot={shot}: image {image:.4} multimodal {multi:.4}", row.texts_per_image);
            row.gains.push((shot, gain));
        }
    }
    Ok(rows)
}

pub fn ablation_csv_header(shots: &[usize]) -> String {
    std::iter::once("k".to_string())
        .chain(shots.iter().map(|n| format!("gain_{n}shot")))
        .collect::<Vec<_>>()
        .join(",")
}

impl AblationRow {
    pub fn csv_row(&self) -> String {
        std::iter::once(self.texts_per_image.to_string())
            .chain(self.gains.iter().map(|(_, g)| g.to_string()))
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftRow {
    pub rank: usize,
    pub class_id: ClassId,
    /// Mean cosine distance between image-only and multimodal prototypes.
    pub shift: f64,
    /// Mean per-class top-k accuracy difference, multimodal minus image-only.
    pub gain: f64,
}

pub const SHIFT_CSV_HEADER: &str = "rank,class,shift,gain";

impl ShiftRow {
    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.rank, self.class_id, self.shift, self.gain)
    }
}

fn per_class_accuracy(outcomes: &[QueryOutcome], k: usize) -> BTreeMap<ClassId, f64> {
    let mut by_class: BTreeMap<ClassId, Vec<QueryOutcome>> = BTreeMap::new();
    for o in outcomes {
        by_class.entry(o.truth).or_default().push(o.clone());
    }
    by_class
        .into_iter()
        .map(|(c, o)| (c, episode_accuracy(&o, k)))
        .collect()
}

#[derive(Default)]
struct Accum {
    shift: f64,
    shift_n: usize,
    gain: f64,
    gain_n: usize,
}

/// Per-class prototype shift and accuracy gain averaged over episodes,
/// sorted by shift (largest first, ties by class id).
pub fn prototype_shift_ranking(
    dataset: &EmbeddingDataset,
    config: &AnalysisConfig,
    shot: usize,
    texts_cap: TextCap,
    source: GanSource<'_>,
) -> Result<Vec<ShiftRow>> {
    let modes = [EvalMode::ImageOnly, EvalMode::Multimodal];
    let runner = EpisodeRunner::new(dataset, &modes, source)?;
    let cfg = config.eval_config(dataset, shot, texts_cap);
    let runs = runner.run_all(&cfg, &modes)?;
    let mut acc: BTreeMap<ClassId, Accum> = BTreeMap::new();
    for run in &runs {
        let (Some(p_i), Some(p_m)) = (
            run.prototypes(EvalMode::ImageOnly),
            run.prototypes(EvalMode::Multimodal),
        ) else {
            continue;
        };
        let image = per_class_accuracy(run.outcomes(EvalMode::ImageOnly).unwrap_or(&[]), config.top_k);
        let multi = per_class_accuracy(run.outcomes(EvalMode::Multimodal).unwrap_or(&[]), config.top_k);
        for p in p_i.iter() {
            let Some(m) = p_m.get(p.class_id) else { continue };
            let a = acc.entry(p.class_id).or_default();
            a.shift += cosine_distance(&p.vector, &m.vector)?;
            a.shift_n += 1;
            if let (Some(gi), Some(gm)) = (image.get(&p.class_id), multi.get(&p.class_id)) {
                a.gain += gm - gi;
                a.gain_n += 1;
            }
        }
    }
    let mut rows: Vec<ShiftRow> = acc
        .into_iter()
        .map(|(class_id, a)| ShiftRow {
            rank: 0,
            class_id,
            shift: a.shift / a.shift_n as f64,
            gain: if a.gain_n == 0 { 0.0 } else { a.gain / a.gain_n as f64 },
        })
        .collect();
    rows.sort_by(|a, b| b.shift.total_cmp(&a.shift).then(a.class_id.cmp(&b.class_id)));
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(rows)
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "spearman inputs",
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::Empty("spearman needs at least 2 pairs"));
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::NonFinite("spearman correlation of a constant series".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Retrieval {
    pub ids: Vec<SampleId>,
    pub distances: Vec<f64>,
    /// Fewer candidates than requested were available.
    pub truncated: bool,
}

/// The `m` candidates closest to `prototype` by cosine distance, ties by sample id.
pub fn retrieve_nearest(prototype: &[f64], candidates: &[&Sample], m: usize) -> Result<Retrieval> {
    if m == 0 {
        return Err(Error::InvalidConfig("m must be >= 1".into()));
    }
    let mut scored: Vec<(f64, SampleId)> = candidates
        .iter()
        .map(|s| Ok((cosine_distance(prototype, &s.visual)?, s.id)))
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let truncated = m > scored.len();
    scored.truncate(m);
    Ok(Retrieval {
        ids: scored.iter().map(|s| s.1).collect(),
        distances: scored.iter().map(|s| s.0).collect(),
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Vec64;

    fn sample(id: u64, v: &[f64]) -> Sample {
        Sample::new(SampleId(id), ClassId(0), Split::Novel, Vec64::new(v.to_vec()).unwrap(), vec![])
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 2.0]), vec![3.0, 1.0, 2.0]);
        assert_eq!(average_ranks(&[1.0, 5.0, 1.0, 7.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn spearman_known_values() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((spearman(&x, &[2.0, 4.0, 8.0, 16.0, 32.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        // d = (0, 0, -1, 1, 0): 1 - 6·2/(5·24) = 0.9
        assert!((spearman(&x, &[1.0, 2.0, 4.0, 3.0, 5.0]).unwrap() - 0.9).abs() < 1e-12);
        assert!(spearman(&x, &[1.0; 5]).is_err());
        assert!(spearman(&x[..1], &x[..1]).is_err());
    }

    #[test]
    fn retrieval_cases() {
        let a = sample(5, &[1.0, 0.0]);
        let b = sample(2, &[0.0, 1.0]);
        let r = retrieve_nearest(&[1.0, 0.0], &[&b, &a], 1).unwrap();
        assert_eq!(r.ids, vec![SampleId(5)]);
        assert!(!r.truncated);
        let r = retrieve_nearest(&[0.3, 0.7], &[&a, &b], 5).unwrap();
        assert_eq!(r.ids, vec![SampleId(2), SampleId(5)]);
        assert!(r.truncated);
        let c = sample(1, &[2.0, 0.0]);
        let r = retrieve_nearest(&[1.0, 0.0], &[&a, &c], 2).unwrap();
        assert_eq!(r.ids, vec![SampleId(1), SampleId(5)]);
        assert!(retrieve_nearest(&[1.0, 0.0], &[&a], 0).is_err());
    }

    #[test]
    fn ablation_header() {
        assert_eq!(ablation_csv_header(&[1, 2, 5]), "k,gain_1shot,gain_2shot,gain_5shot");
        let row = AblationRow {
            texts_per_image: 10,
            gains: vec![(1, 1.25), (2, 1.0)],
        };
        assert_eq!(row.csv_row(), "10,1.25,1");
    }
}
