#![allow(dead_code)]

use mmproto_core::synth::{generate_synthetic, SynthConfig};
use mmproto_core::data::EmbeddingDataset;

/// A few-class dataset that keeps GAN-backed tests quick.
pub fn small_dataset(seed: u64) -> EmbeddingDataset {
    generate_synthetic(&SynthConfig {
        n_base_classes: 8,
        n_novel_classes: 6,
        samples_per_class: 12,
        texts_per_image: 4,
        visual_dim: 6,
        text_dim: 10,
        ..SynthConfig::default()
    }
    .with_seed(seed))
    .unwrap()
}

pub fn cosine_distance_naive(a: &[f64], b: &[f64]) -> f64 {
    let mut ab = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for i in 0..a.len() {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    1.0 - ab / (aa.sqrt() * bb.sqrt())
}
