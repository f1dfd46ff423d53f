mod common;

use mmproto_core::analysis::retrieve_nearest;
use mmproto_core::data::{ClassId, Sample, SampleId, Split};
use mmproto_core::numkit::Vec64;
use mmproto_core::prototype::{classify, Prototype, PrototypeSet, Provenance};
use mmproto_core::synth::{oracle_nearest, oracle_ranking};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

#[test]
fn classify_matches_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let n = rng.random_range(1..=50);
        let raw: Vec<(ClassId, Vec<f64>)> = (0..n)
            .map(|i| (ClassId(i as u32 * 3 + 1), random_vec(&mut rng, 16)))
            .collect();
        let set = PrototypeSet::new(
            raw.iter()
                .map(|(c, v)| Prototype {
                    class_id: *c,
                    vector: Vec64::new(v.clone()).unwrap(),
                    provenance: Provenance::ImageOnly,
                    support_count: 1,
                })
                .collect(),
        )
        .unwrap();
        let query = random_vec(&mut rng, 16);
        let result = classify(&set, &query).unwrap();
        assert_eq!(Some(result.predicted), oracle_nearest(&raw, &query));
        assert_eq!(result.ranked, oracle_ranking(&raw, &query));
        assert!(result.distances.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn duplicated_prototype_vectors_resolve_to_smaller_id() {
    let v = vec![0.3, -1.0, 2.0];
    let set = PrototypeSet::new(
        [7u32, 2, 5]
            .iter()
            .map(|&c| Prototype {
                class_id: ClassId(c),
                vector: Vec64::new(v.clone()).unwrap(),
                provenance: Provenance::ImageOnly,
                support_count: 1,
            })
            .collect(),
    )
    .unwrap();
    let r = classify(&set, &[1.0, 1.0, 1.0]).unwrap();
    assert_eq!(r.ranked, vec![ClassId(2), ClassId(5), ClassId(7)]);
}

#[test]
fn retrieval_matches_full_sort() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let samples: Vec<Sample> = (0..500)
        .map(|i| {
            Sample::new(
                SampleId(1000 - i),
                ClassId(i as u32 % 7),
                Split::Novel,
                Vec64::new(random_vec(&mut rng, 12)).unwrap(),
                vec![Vec64::new(vec![0.0]).unwrap()],
            )
        })
        .collect();
    let refs: Vec<&Sample> = samples.iter().collect();
    for trial in 0..20 {
        let proto = random_vec(&mut rng, 12);
        let m = [1, 5, 37, 500, 600][trial % 5];
        let got = retrieve_nearest(&proto, &refs, m).unwrap();

        let mut all: Vec<(f64, SampleId)> = samples
            .iter()
            .map(|s| (common::cosine_distance_naive(&proto, &s.visual), s.id))
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let expect: Vec<SampleId> = all.iter().take(m).map(|x| x.1).collect();
        assert_eq!(got.ids, expect);
        assert_eq!(got.truncated, m > 500);
        for (d, (e, _)) in got.distances.iter().zip(&all) {
            assert!((d - e).abs() < 1e-12);
        }
    }
}
