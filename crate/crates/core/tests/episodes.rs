mod common;

use std::collections::BTreeSet;

use mmproto_core::data::Split;
use mmproto_core::episode::{sample_episode, QueryCap, TextCap};
use mmproto_core::eval::{
    confidence_interval, episode_rng, evaluate, evaluate_paired, EvalConfig, EvalMode, GanSource,
};
use mmproto_core::gan::GanConfig;
use mmproto_core::prototype::RefineParams;
use mmproto_core::synth::{generate_synthetic, SynthConfig};
use mmproto_core::Error;

fn quick_gan(ds: &mmproto_core::data::EmbeddingDataset) -> GanConfig {
    let mut c = GanConfig::new(ds.text_dim(), ds.visual_dim()).with_seed(3);
    c.iterations = 30;
    c.batch_size = 8;
    c.lr = 1e-3;
    c
}

fn quick_eval(way: usize, shot: usize, episodes: usize) -> EvalConfig {
    EvalConfig {
        episodes,
        refine: RefineParams {
            rounds: 2,
            lambda: 1.0,
            extra_steps: 3,
        },
        ..EvalConfig::new(way, shot)
    }
}

#[test]
fn sampled_episodes_are_well_formed() {
    let ds = generate_synthetic(&SynthConfig {
        n_base_classes: 4,
        n_novel_classes: 12,
        samples_per_class: 9,
        texts_per_image: 2,
        ..SynthConfig::default()
    })
    .unwrap();
    let novel: BTreeSet<_> = ds.classes(Split::Novel).into_iter().collect();
    for seed in 0..1000u64 {
        let way = 1 + (seed as usize % 12);
        let shot = 1 + (seed as usize % 5);
        let cap = if seed % 3 == 0 { QueryCap::All } else { QueryCap::AtMost(1 + seed as usize % 4) };
        let ep = sample_episode(&ds, way, shot, cap, TextCap::Unlimited, &mut episode_rng(7, seed as usize)).unwrap();
        assert_eq!(ep.classes.len(), way);
        assert!(ep.classes.windows(2).all(|w| w[0].class_id < w[1].class_id));
        let mut seen = BTreeSet::new();
        for c in &ep.classes {
            assert!(novel.contains(&c.class_id));
            assert_eq!(c.support.len(), shot);
            let expect_q = match cap {
                QueryCap::All => 9 - shot,
                QueryCap::AtMost(n) => n.min(9 - shot),
            };
            assert_eq!(c.query.len(), expect_q);
            for &i in c.support.iter().chain(&c.query) {
                assert_eq!(ds.sample(i).class, c.class_id);
                assert!(seen.insert(i), "sample {i} drawn twice");
            }
        }
    }
    assert!(matches!(
        sample_episode(&ds, 13, 1, QueryCap::All, TextCap::Unlimited, &mut episode_rng(0, 0)),
        Err(Error::WayTooLarge { .. })
    ));
    assert!(matches!(
        sample_episode(&ds, 2, 9, QueryCap::All, TextCap::Unlimited, &mut episode_rng(0, 0)),
        Err(Error::ClassTooSmall { .. })
    ));
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let ds = common::small_dataset(2);
    let gan = quick_gan(&ds);
    let modes = [EvalMode::ImageOnly, EvalMode::Zsl, EvalMode::Multimodal];
    let mut reference = None;
    for threads in [1, 2, 8] {
        let cfg = EvalConfig {
            threads,
            seed: 13,
            ..quick_eval(4, 2, 6)
        };
        let reports = evaluate_paired(&ds, &modes, &cfg, GanSource::Train(&gan)).unwrap();
        match &reference {
            None => reference = Some(reports),
            Some(r) => assert_eq!(r, &reports, "threads = {threads}"),
        }
    }
}

#[test]
fn image_only_never_reads_texts() {
    let ds = common::small_dataset(4);
    ds.reset_text_reads();
    let report = evaluate(&ds, EvalMode::ImageOnly, &quick_eval(5, 1, 20), GanSource::None).unwrap();
    assert_eq!(ds.text_reads(), 0);
    assert_eq!(report.episodes, 20);
    let zsl = evaluate(&ds, EvalMode::Zsl, &quick_eval(5, 1, 2), GanSource::Train(&quick_gan(&ds))).unwrap();
    assert_eq!(zsl.metrics.len(), 3);
    assert!(ds.text_reads() > 0);
}

#[test]
fn one_way_episodes_are_always_correct() {
    let ds = common::small_dataset(6);
    let gan = quick_gan(&ds);
    let modes = [EvalMode::ImageOnly, EvalMode::Zsl, EvalMode::Multimodal];
    for report in evaluate_paired(&ds, &modes, &quick_eval(1, 1, 3), GanSource::Train(&gan)).unwrap() {
        for m in &report.metrics {
            assert!(m.per_episode.iter().all(|&a| a == 1.0));
            assert_eq!((m.mean, m.ci95), (1.0, 0.0));
        }
    }
}

#[test]
fn top_k_accuracy_is_monotone_in_k() {
    let ds = common::small_dataset(8);
    let cfg = EvalConfig {
        top_k: vec![1, 2, 3, 5],
        ..quick_eval(6, 1, 40)
    };
    let report = evaluate(&ds, EvalMode::ImageOnly, &cfg, GanSource::None).unwrap();
    for (i, w) in report.metrics.windows(2).enumerate() {
        assert!(w[0].mean <= w[1].mean);
        for e in 0..40 {
            assert!(w[0].per_episode[e] <= w[1].per_episode[e], "metric {i} episode {e}");
        }
    }
}

/// Welford running variance as an independent reference.
fn welford(values: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let n = values.len() as f64;
    (mean, 1.96 * (m2 / (n - 1.0)).sqrt() / n.sqrt())
}

#[test]
fn confidence_interval_matches_welford() {
    let ds = common::small_dataset(9);
    let report = evaluate(&ds, EvalMode::ImageOnly, &quick_eval(5, 1, 60), GanSource::None).unwrap();
    for m in &report.metrics {
        let (mean, half) = welford(&m.per_episode);
        assert!((m.mean - mean).abs() < 1e-12);
        assert!((m.ci95 - half).abs() < 1e-12);
    }
    let values = [0.2, 0.9, 0.4, 0.4, 1.0, 0.0, 0.65];
    let (mean, half) = confidence_interval(&values).unwrap();
    let (wm, wh) = welford(&values);
    assert!((mean - wm).abs() < 1e-12 && (half - wh).abs() < 1e-12);
    assert!(confidence_interval(&[0.5]).is_err());
}

#[test]
fn too_few_episodes_rejected() {
    let ds = common::small_dataset(10);
    let r = evaluate(&ds, EvalMode::ImageOnly, &quick_eval(5, 1, 1), GanSource::None);
    assert!(matches!(r, Err(Error::InvalidConfig(_))));
}
