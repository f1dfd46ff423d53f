mod common;

use mmproto_core::data::{load_dataset_dir, Split};
use mmproto_core::gan::{read_gan_state, train_tcgan, write_gan_state, BaseSet, FrozenNoise, GanConfig};

#[test]
fn dataset_round_trip_is_exact() {
    let ds = common::small_dataset(31);
    let dir = tempfile::tempdir().unwrap();
    write_dataset_with_header(&ds, dir.path());
    let back = load_dataset_dir(dir.path()).unwrap();
    assert_eq!(back.samples(), ds.samples());
    assert_eq!(back.classes(Split::Base), ds.classes(Split::Base));
    assert_eq!(back.classes(Split::Novel), ds.classes(Split::Novel));
    assert_eq!((back.visual_dim(), back.text_dim()), (ds.visual_dim(), ds.text_dim()));
}

fn write_dataset_with_header(ds: &mmproto_core::data::EmbeddingDataset, dir: &std::path::Path) {
    mmproto_core::data::write_dataset(ds, dir, &["seed = 31".to_string()]).unwrap();
    let visual = std::fs::read_to_string(dir.join("visual.csv")).unwrap();
    assert!(visual.starts_with("# seed = 31\n"));
}

#[test]
fn model_round_trip_is_bit_exact() {
    let ds = common::small_dataset(32);
    let mut config = GanConfig::new(ds.text_dim(), ds.visual_dim()).with_seed(5);
    config.iterations = 25;
    config.gen_hidden = vec![7, 5];
    let mut state = train_tcgan(&ds, &config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.model");
    write_gan_state(&state, &path).unwrap();
    let mut loaded = read_gan_state(&path).unwrap();
    assert_eq!(loaded, state);

    let again = dir.path().join("again.model");
    write_gan_state(&loaded, &again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());

    let text = ds.texts(0)[0].clone();
    let eps = FrozenNoise(vec![0.1; config.cond_dim]);
    let a = state.generate_feature(&text, &mut eps.clone()).unwrap();
    let b = loaded.generate_feature(&text, &mut eps.clone()).unwrap();
    assert_eq!(a.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>());

    // Training resumes identically, RNG included.
    let base = BaseSet::from_dataset(&ds).unwrap();
    state.train_more(&base, 10).unwrap();
    loaded.train_more(&base, 10).unwrap();
    assert_eq!(loaded, state);
}

#[test]
fn corrupt_models_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.model");
    std::fs::write(&path, b"MMPGAN\0\0garbage").unwrap();
    assert!(read_gan_state(&path).unwrap_err().is_data_error());
    std::fs::write(&path, b"not a model").unwrap();
    assert!(read_gan_state(&path).unwrap_err().is_data_error());
    assert!(read_gan_state(&dir.path().join("missing")).unwrap_err().is_data_error());
}
