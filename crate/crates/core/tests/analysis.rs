mod common;

use mmproto_core::analysis::{
    average_ranks, prototype_shift_ranking, reduced_text_ablation, spearman, AnalysisConfig,
};
use mmproto_core::episode::TextCap;
use mmproto_core::eval::GanSource;
use mmproto_core::gan::GanConfig;
use mmproto_core::prototype::RefineParams;
use mmproto_core::Error;

fn quick(ds: &mmproto_core::data::EmbeddingDataset) -> GanConfig {
    let mut c = GanConfig::new(ds.text_dim(), ds.visual_dim()).with_seed(1);
    c.iterations = 20;
    c.batch_size = 8;
    c
}

fn zero_lambda(episodes: usize) -> AnalysisConfig {
    AnalysisConfig {
        episodes,
        refine: RefineParams {
            rounds: 2,
            lambda: 0.0,
            extra_steps: 2,
        },
        ..AnalysisConfig::default()
    }
}

#[test]
fn zero_lambda_ablation_has_unit_gain() {
    let ds = common::small_dataset(41);
    let rows = reduced_text_ablation(&ds, &zero_lambda(4), &[1, 4], &[1, 2], GanSource::Train(&quick(&ds))).unwrap();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r.gains.iter().map(|g| g.0).collect::<Vec<_>>(), vec![1, 2]);
        assert!(r.gains.iter().all(|g| g.1 == 1.0), "{r:?}");
    }
}

#[test]
fn ablation_rejects_text_caps_beyond_the_data() {
    let ds = common::small_dataset(42);
    let r = reduced_text_ablation(&ds, &zero_lambda(2), &[5], &[1], GanSource::Train(&quick(&ds)));
    assert!(matches!(r, Err(Error::TextCapTooLarge { .. })));
}

#[test]
fn zero_lambda_shift_is_zero() {
    let ds = common::small_dataset(43);
    let rows = prototype_shift_ranking(&ds, &zero_lambda(5), 1, TextCap::Unlimited, GanSource::Train(&quick(&ds))).unwrap();
    assert_eq!(rows.len(), 6);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.rank, i + 1);
        assert!(r.shift.abs() < 1e-12 && r.gain == 0.0, "{r:?}");
    }
}

/// Pearson correlation of ranks computed by brute-force counting.
fn spearman_oracle(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|a| {
                let below = v.iter().filter(|b| *b < a).count() as f64;
                let equal = v.iter().filter(|b| *b == a).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx).powi(2);
        syy += (ry[i] - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

#[test]
fn spearman_matches_counting_oracle() {
    let cases: [(&[f64], &[f64]); 4] = [
        (&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 30.0, 40.0]),
        (&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]),
        (&[0.3, 0.3, 0.1, 0.9, 0.5], &[1.0, 0.0, 0.0, 2.0, 2.0]),
        (&[5.0, 1.0, 4.0, 4.0, 2.0, 8.0], &[0.1, 0.7, 0.2, 0.2, 0.9, -0.4]),
    ];
    for (x, y) in cases {
        assert!((spearman(x, y).unwrap() - spearman_oracle(x, y)).abs() < 1e-12);
    }
    assert_eq!(average_ranks(&[2.0, 1.0, 2.0]), vec![2.5, 1.0, 2.5]);
    assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).is_err());
}
