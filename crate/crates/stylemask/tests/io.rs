use std::fs;
use std::path::{Path, PathBuf};

use proptest::prelude::*;
use stylemask::io::{decode_emb1, encode_emb1, load_embeddings, manifest_path, save_embeddings, save_json_fixture};
use stylemask::AppError;
use stylemask_core::rng::SeededRng;
use stylemask_core::{EmbeddingSet, FeatureVector, MaskVector};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn fv(v: &[f64]) -> FeatureVector {
    FeatureVector::from_slice(v).unwrap()
}

fn random_set(seed: u64, n: usize, dim: usize) -> EmbeddingSet {
    let mut rng = SeededRng::new(seed);
    let rows = (0..n).map(|_| {
        // Values representable in f32 so the round trip is exact.
        let v: Vec<f64> = (0..dim).map(|_| rng.normal() as f32 as f64).collect();
        FeatureVector::new(v).unwrap()
    });
    EmbeddingSet::from_vectors(dim, rows).unwrap()
}

fn same(a: &EmbeddingSet, b: &EmbeddingSet) -> bool {
    a.dim() == b.dim()
        && a.ids().eq(b.ids())
        && a.metadata == b.metadata
        && a.vectors().zip(b.vectors()).all(|(x, y)| {
            x.iter().zip(y.iter()).all(|(p, q)| p.to_bits() == q.to_bits())
        })
        && a.len() == b.len()
}

#[test]
fn single_row_identity() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.emb1");
    save_embeddings(&EmbeddingSet::from_vectors(2, [fv(&[1.0, 0.0])]).unwrap(), &path).unwrap();
    let back = load_embeddings(&path).unwrap();
    assert_eq!(back.len(), 1);
    assert_eq!(back.get(0).unwrap().as_slice(), &[1.0, 0.0]);
    assert_eq!(back.ids().next(), Some("row-0000"));
    assert!(!manifest_path(&path).exists());
}

#[test]
fn json_zero_vector() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zero.json");
    fs::write(&path, r#"{"dim":2,"vectors":[[0.0,0.0]]}"#).unwrap();
    let set = load_embeddings(&path).unwrap();
    assert_eq!(set.get(0).unwrap().as_slice(), &[0.0, 0.0]);
}

#[test]
fn hundred_random_vectors_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.emb1");
    let set = random_set(9, 100, 16);
    save_embeddings(&set, &path).unwrap();
    let back = load_embeddings(&path).unwrap();
    assert!(same(&set, &back));
    let first = fs::read(&path).unwrap();
    save_embeddings(&back, &path).unwrap();
    assert_eq!(fs::read(&path).unwrap(), first);
}

#[test]
fn empty_set_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.emb1");
    save_embeddings(&EmbeddingSet::new(4).unwrap(), &path).unwrap();
    assert_eq!(fs::metadata(&path).unwrap().len(), 14);
    let back = load_embeddings(&path).unwrap();
    assert_eq!((back.dim(), back.len()), (4, 0));
}

#[test]
fn payload_is_little_endian_f32() {
    let bytes = encode_emb1(&EmbeddingSet::from_vectors(2, [fv(&[1.5, -2.0])]).unwrap()).unwrap();
    let mut expected = b"EMB1".to_vec();
    expected.extend_from_slice(&1u16.to_le_bytes());
    expected.extend_from_slice(&2u32.to_le_bytes());
    expected.extend_from_slice(&1u32.to_le_bytes());
    expected.extend_from_slice(&1.5f32.to_le_bytes());
    expected.extend_from_slice(&(-2.0f32).to_le_bytes());
    assert_eq!(bytes, expected);
}

#[test]
fn manifest_carries_ids_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("named.emb1");
    let mut set = EmbeddingSet::new(2).unwrap();
    set.push("cat", fv(&[0.5, 0.25])).unwrap();
    set.push("dog", fv(&[0.0, -1.0])).unwrap();
    set.metadata.insert("encoder".into(), "test".into());
    save_embeddings(&set, &path).unwrap();
    let sidecar = dir.path().join("named.manifest.json");
    assert_eq!(manifest_path(&path), sidecar);
    assert!(sidecar.exists());
    let back = load_embeddings(&path).unwrap();
    assert!(same(&set, &back));

    // Rewriting with default ids and no metadata drops the stale sidecar.
    save_embeddings(&EmbeddingSet::from_vectors(2, [fv(&[1.0, 1.0])]).unwrap(), &path).unwrap();
    assert!(!sidecar.exists());
    assert_eq!(load_embeddings(&path).unwrap().len(), 1);
}

#[test]
fn manifest_with_wrong_id_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.emb1");
    save_embeddings(&random_set(1, 3, 2), &path).unwrap();
    fs::write(manifest_path(&path), r#"{"ids":["a","b"],"metadata":{}}"#).unwrap();
    let err = load_embeddings(&path).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn format_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.emb1");
    fs::write(&path, b"EMB2\x01\x00\x02\x00\x00\x00\x01\x00\x00\x00").unwrap();
    assert!(matches!(load_embeddings(&path), Err(AppError::Format { .. })));

    let mut truncated = encode_emb1(&random_set(2, 2, 3)).unwrap();
    truncated.truncate(truncated.len() - 4);
    fs::write(&path, &truncated).unwrap();
    let err = load_embeddings(&path).unwrap_err();
    assert!(matches!(err, AppError::Truncated { expected: 24, found: 20, .. }), "{err}");

    let mut version = encode_emb1(&random_set(2, 1, 3)).unwrap();
    version[4] = 9;
    assert!(matches!(decode_emb1(&version, &path), Err(AppError::Format { .. })));

    fs::write(&path, b"plain text").unwrap();
    assert!(matches!(load_embeddings(&path), Err(AppError::Format { .. })));
}

#[test]
fn non_finite_payload_names_row_and_index() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nan.emb1");
    let mut bytes = encode_emb1(&random_set(3, 3, 4)).unwrap();
    let offset = 14 + (2 * 4 + 3) * 4;
    bytes[offset..offset + 4].copy_from_slice(&f32::INFINITY.to_le_bytes());
    fs::write(&path, &bytes).unwrap();
    let msg = load_embeddings(&path).unwrap_err().to_string();
    assert!(msg.contains("row 2") && msg.contains("index 3"), "{msg}");
}

#[test]
fn json_row_with_wrong_length_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ragged.json");
    fs::write(&path, r#"{"dim":2,"vectors":[[1.0,0.0],[1.0]]}"#).unwrap();
    let err = load_embeddings(&path).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("row 1"), "{err}");
}

#[test]
fn missing_file_is_io_error() {
    let err = load_embeddings(Path::new("/nonexistent/e.emb1")).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("/nonexistent/e.emb1"));
}

#[test]
fn json_fixture_round_trip_preserves_ids() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.json");
    let mut set = EmbeddingSet::new(3).unwrap();
    set.push("a", fv(&[0.25, -0.5, 1.0])).unwrap();
    set.push("b", fv(&[2.0, 0.0, -0.125])).unwrap();
    save_json_fixture(&set, &path).unwrap();
    assert!(same(&set, &load_embeddings(&path).unwrap()));
}

#[test]
fn standin_fixtures_load_and_resave_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["standin_images.emb1", "standin_texts.emb1", "standin_classes.emb1"] {
        let set = load_embeddings(&fixture(name)).unwrap();
        assert_eq!(set.dim(), 512);
        for v in set.vectors() {
            assert!((v.norm() - 1.0).abs() < 1e-5);
        }
        let copy = dir.path().join(name);
        save_embeddings(&set, &copy).unwrap();
        assert_eq!(fs::read(&copy).unwrap(), fs::read(fixture(name)).unwrap(), "{name}");
        assert!(same(&set, &load_embeddings(&copy).unwrap()));
    }
    let classes = load_embeddings(&fixture("standin_classes.emb1")).unwrap();
    assert_eq!(classes.len(), 10);
    assert_eq!(classes.ids().next(), Some("An automobile"));
}

#[test]
fn masks_serialize_as_zero_one_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.emb1");
    let mask = MaskVector::new(vec![false, true, false, true, true, false]).unwrap();
    save_embeddings(&EmbeddingSet::from_vectors(6, [mask.to_feature()]).unwrap(), &path).unwrap();
    let back = load_embeddings(&path).unwrap();
    assert_eq!(MaskVector::from_values(back.get(0).unwrap()).unwrap(), mask);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn save_load_round_trip(seed in any::<u64>(), n in 0usize..20, dim in 1usize..24) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.emb1");
        let set = random_set(seed, n, dim);
        save_embeddings(&set, &path).unwrap();
        prop_assert!(same(&set, &load_embeddings(&path).unwrap()));
    }
}
