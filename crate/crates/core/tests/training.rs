use mmproto_core::data::{EmbeddingDataset, Split};
use mmproto_core::gan::{train_tcgan, FrozenNoise, GanConfig, GanState, TrainExample};
use mmproto_core::synth::{generate_synthetic, SynthConfig};

fn config(ds: &EmbeddingDataset, iterations: u64) -> GanConfig {
    let mut c = GanConfig::new(ds.text_dim(), ds.visual_dim()).with_seed(17);
    c.iterations = iterations;
    c.lr = 1e-3;
    c
}

fn eval_batch(ds: &EmbeddingDataset) -> Vec<TrainExample<'_>> {
    ds.classes(Split::Base)
        .into_iter()
        .flat_map(|c| ds.class_members(c)[..3].to_vec())
        .map(|i| TrainExample {
            visual: ds.sample(i).visual.as_slice(),
            text: ds.texts(i)[0].as_slice(),
            class: ds.sample(i).class,
        })
        .collect()
}

/// Mean cosine similarity between features generated from base texts and
/// the real visual mean of their class.
fn class_alignment(ds: &EmbeddingDataset, gan: &GanState) -> f64 {
    let zero = FrozenNoise::zeros(gan.config().cond_dim);
    let mut total = 0.0;
    let mut n = 0.0;
    for class in ds.classes(Split::Base) {
        let members = ds.class_members(class);
        let mut centre = vec![0.0; ds.visual_dim()];
        for &i in members {
            for (c, v) in centre.iter_mut().zip(ds.sample(i).visual.iter()) {
                *c += v / members.len() as f64;
            }
        }
        for &i in &members[..5] {
            let f = gan.generate_feature(&ds.texts(i)[0], &mut zero.clone()).unwrap();
            let dot: f64 = f.iter().zip(&centre).map(|(a, b)| a * b).sum();
            let nf: f64 = f.iter().map(|a| a * a).sum::<f64>().sqrt();
            let nc: f64 = centre.iter().map(|a| a * a).sum::<f64>().sqrt();
            total += dot / (nf * nc);
            n += 1.0;
        }
    }
    total / n
}

#[test]
fn training_reduces_classification_loss_and_aligns_generated_features() {
    let ds = generate_synthetic(&SynthConfig::default().with_seed(1)).unwrap();
    let batch = eval_batch(&ds);
    let untrained = train_tcgan(&ds, &config(&ds, 0)).unwrap();
    let trained = train_tcgan(&ds, &config(&ds, 200)).unwrap();
    let noise = vec![vec![0.0; untrained.config().cond_dim]; batch.len()];

    let before = untrained.losses_with_noise(&batch, &noise).unwrap();
    let after = trained.losses_with_noise(&batch, &noise).unwrap();
    assert!(
        after.parts.d_aux_real < before.parts.d_aux_real,
        "aux loss on real features {} -> {}",
        before.parts.d_aux_real,
        after.parts.d_aux_real
    );
    assert!(after.loss_d < before.loss_d, "loss_D {} -> {}", before.loss_d, after.loss_d);

    let a0 = class_alignment(&ds, &untrained);
    let a1 = class_alignment(&ds, &trained);
    assert!(a1 > a0 + 0.1, "alignment {a0} -> {a1}");
    assert_eq!(trained.iteration(), 200);
}

#[test]
fn training_is_deterministic_per_seed() {
    let ds = generate_synthetic(&SynthConfig {
        n_base_classes: 6,
        n_novel_classes: 2,
        samples_per_class: 8,
        ..SynthConfig::default()
    })
    .unwrap();
    let a = train_tcgan(&ds, &config(&ds, 40)).unwrap();
    let b = train_tcgan(&ds, &config(&ds, 40)).unwrap();
    assert_eq!(a, b);
    let c = train_tcgan(&ds, &config(&ds, 40).with_seed(18)).unwrap();
    assert_ne!(a, c);
}
