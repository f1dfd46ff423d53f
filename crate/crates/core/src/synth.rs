//! Seeded synthetic multimodal embeddings with known class structure, and
//! brute-force oracles for the classifier.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{ClassId, EmbeddingDataset, Sample, SampleId, Split};
use crate::error::{Error, Result};
use crate::numkit::Vec64;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_base_classes: usize,
    pub n_novel_classes: usize,
    pub samples_per_class: usize,
    pub texts_per_image: usize,
    pub visual_dim: usize,
    pub text_dim: usize,
    pub between_class_std: f64,
    pub within_class_std: f64,
    pub text_map_noise_std: f64,
    /// How much of a sample's own deviation from its class mean its texts
    /// describe: texts encode `μ_c + α·(v − μ_c)`.
    pub text_instance_weight: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_base_classes: 100,
            n_novel_classes: 10,
            samples_per_class: 50,
            texts_per_image: 10,
            visual_dim: 16,
            text_dim: 32,
            between_class_std: 1.0,
            within_class_std: 1.2,
            text_map_noise_std: 0.25,
            text_instance_weight: 0.25,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_base_classes", self.n_base_classes),
            ("n_novel_classes", self.n_novel_classes),
            ("samples_per_class", self.samples_per_class),
            ("texts_per_image", self.texts_per_image),
            ("visual_dim", self.visual_dim),
            ("text_dim", self.text_dim),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
        }
        let stds = [
            ("between_class_std", self.between_class_std),
            ("within_class_std", self.within_class_std),
            ("text_map_noise_std", self.text_map_noise_std),
        ];
        if let Some((name, v)) = stds.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidConfig(format!("{name} must be > 0, got {v}")));
        }
        if !(self.text_instance_weight.is_finite() && (0.0..=1.0).contains(&self.text_instance_weight)) {
            return Err(Error::InvalidConfig(format!(
                "text_instance_weight must lie in [0, 1], got {}",
                self.text_instance_weight
            )));
        }
        if self.visual_dim > self.text_dim {
            return Err(Error::InvalidConfig(format!(
                "visual_dim ({}) must not exceed text_dim ({})",
                self.visual_dim, self.text_dim
            )));
        }
        Ok(())
    }

    pub fn describe(&self) -> Vec<String> {
        vec![
            format!("n_base_classes = {}", self.n_base_classes),
            format!("n_novel_classes = {}", self.n_novel_classes),
            format!("samples_per_class = {}", self.samples_per_class),
            format!("texts_per_image = {}", self.texts_per_image),
            format!("visual_dim = {}", self.visual_dim),
            format!("text_dim = {}", self.text_dim),
            format!("between_class_std = {}", self.between_class_std),
            format!("within_class_std = {}", self.within_class_std),
            format!("text_map_noise_std = {}", self.text_map_noise_std),
            format!("text_instance_weight = {}", self.text_instance_weight),
            format!("seed = {}", self.seed),
        ]
    }
}

fn gaussian(std: f64) -> Normal<f64> {
    Normal::new(0.0, std).expect("validated std")
}

/// Classes `0..n_base` are base, the following `n_novel` are novel. Sample
/// ids run class by class from 0.
pub fn generate_synthetic(config: &SynthConfig) -> Result<EmbeddingDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (v, t) = (config.visual_dim, config.text_dim);

    let map_dist = gaussian(1.0 / (v as f64).sqrt());
    let a: Vec<f64> = (0..t * v).map(|_| map_dist.sample(&mut rng)).collect();
    let between = gaussian(config.between_class_std);
    let within = gaussian(config.within_class_std);
    let text_noise = gaussian(config.text_map_noise_std);
    let alpha = config.text_instance_weight;

    let n_classes = config.n_base_classes + config.n_novel_classes;
    let mut samples = Vec::with_capacity(n_classes * config.samples_per_class);
    let mut splits = BTreeMap::new();
    let mut next_id = 0u64;
    for c in 0..n_classes {
        let class = ClassId(c as u32);
        let split = if c < config.n_base_classes {
            Split::Base
        } else {
            Split::Novel
        };
        splits.insert(class, split);
        let mu: Vec<f64> = (0..v).map(|_| between.sample(&mut rng)).collect();
        for _ in 0..config.samples_per_class {
            let visual: Vec<f64> = mu.iter().map(|m| m + within.sample(&mut rng)).collect();
            let described: Vec<f64> = mu
                .iter()
                .zip(&visual)
                .map(|(m, x)| m + alpha * (x - m))
                .collect();
            let mapped: Vec<f64> = a
                .chunks_exact(v)
                .map(|row| row.iter().zip(&described).map(|(w, x)| w * x).sum())
                .collect();
            let texts = (0..config.texts_per_image)
                .map(|_| Vec64::new(mapped.iter().map(|m| m + text_noise.sample(&mut rng)).collect()))
                .collect::<Result<Vec<_>>>()?;
            samples.push(Sample::new(SampleId(next_id), class, split, Vec64::new(visual)?, texts));
            next_id += 1;
        }
    }
    EmbeddingDataset::new(v, t, samples, Some(splits))
}

fn cosine_similarity(a: &[f64], b: &[f64]) -> Option<f64> {
    let mut ab = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for i in 0..a.len() {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if aa == 0.0 || bb == 0.0 {
        None
    } else {
        Some(ab / (aa.sqrt() * bb.sqrt()))
    }
}

/// Exhaustive scan for the most cosine-similar prototype; ties go to the
/// smaller class id. Zero vectors are never selected.
pub fn oracle_nearest(prototypes: &[(ClassId, Vec<f64>)], query: &[f64]) -> Option<ClassId> {
    let mut best: Option<(f64, ClassId)> = None;
    for (class, p) in prototypes {
        let Some(s) = cosine_similarity(query, p) else { continue };
        best = match best {
            Some((bs, bc)) if bs > s || (bs == s && bc < *class) => Some((bs, bc)),
            _ => Some((s, *class)),
        };
    }
    best.map(|(_, c)| c)
}

/// Full ordering by repeated exhaustive extraction of the nearest remaining prototype.
pub fn oracle_ranking(prototypes: &[(ClassId, Vec<f64>)], query: &[f64]) -> Vec<ClassId> {
    let mut remaining = prototypes.to_vec();
    let mut ranked = Vec::with_capacity(remaining.len());
    while let Some(next) = oracle_nearest(&remaining, query) {
        ranked.push(next);
        remaining.retain(|(c, _)| *c != next);
    }
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        let c = SynthConfig {
            n_base_classes: 20,
            ..SynthConfig::default()
        };
        let ds = generate_synthetic(&c.with_seed(3)).unwrap();
        assert_eq!(ds.samples().len(), 1500);
        let texts: usize = ds.samples().iter().map(|s| s.text_count()).sum();
        assert_eq!(texts, 15000);
        assert_eq!(ds.classes(Split::Base).len(), 20);
        assert_eq!(ds.classes(Split::Novel).len(), 10);
        assert_eq!((ds.visual_dim(), ds.text_dim()), (16, 32));
    }

    #[test]
    fn same_seed_same_dataset() {
        let c = SynthConfig {
            n_base_classes: 3,
            n_novel_classes: 2,
            samples_per_class: 4,
            ..SynthConfig::default()
        };
        assert_eq!(generate_synthetic(&c).unwrap(), generate_synthetic(&c).unwrap());
        assert_ne!(
            generate_synthetic(&c).unwrap(),
            generate_synthetic(&c.clone().with_seed(1)).unwrap()
        );
    }

    #[test]
    fn within_class_variance_matches() {
        let c = SynthConfig {
            n_base_classes: 2,
            n_novel_classes: 1,
            samples_per_class: 500,
            texts_per_image: 1,
            ..SynthConfig::default()
        }
        .with_seed(11);
        let ds = generate_synthetic(&c).unwrap();
        let target = c.within_class_std.powi(2);
        for class in ds.classes(Split::Base).into_iter().chain(ds.classes(Split::Novel)) {
            let members = ds.class_members(class);
            let n = members.len() as f64;
            let mut total = 0.0;
            for d in 0..c.visual_dim {
                let xs: Vec<f64> = members.iter().map(|&i| ds.sample(i).visual[d]).collect();
                let m = xs.iter().sum::<f64>() / n;
                total += xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
            }
            let var = total / c.visual_dim as f64;
            assert!((var - target).abs() / target < 0.15, "class {class}: {var} vs {target}");
        }
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            SynthConfig { n_novel_classes: 0, ..SynthConfig::default() },
            SynthConfig { within_class_std: 0.0, ..SynthConfig::default() },
            SynthConfig { visual_dim: 64, ..SynthConfig::default() },
            SynthConfig { text_instance_weight: 1.5, ..SynthConfig::default() },
        ];
        for c in bad {
            assert!(matches!(generate_synthetic(&c), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn oracle_trivial_cases() {
        let one = vec![(ClassId(4), vec![1.0, 2.0])];
        assert_eq!(oracle_nearest(&one, &[-3.0, 0.5]), Some(ClassId(4)));
        let two = vec![(ClassId(0), vec![1.0, 0.0]), (ClassId(1), vec![0.0, 1.0])];
        assert_eq!(oracle_nearest(&two, &[0.0, 2.0]), Some(ClassId(1)));
        assert_eq!(oracle_ranking(&two, &[0.0, 2.0]), vec![ClassId(1), ClassId(0)]);
        let tied = vec![(ClassId(9), vec![1.0, 0.0]), (ClassId(2), vec![2.0, 0.0])];
        assert_eq!(oracle_nearest(&tied, &[1.0, 1.0]), Some(ClassId(2)));
    }
}
