use fve::io::{read_features, read_gmm, write_features, write_gmm, GmmSnapshot};
use fve::{DiagGmm, FeatureBatch, FveError};
use ndarray::{array, Array2};

fn feature_bytes() -> Vec<u8> {
    let batch = FeatureBatch::with_groups(array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]], vec![7, 7, 9]).unwrap();
    let mut buf = Vec::new();
    write_features(&mut buf, &batch).unwrap();
    buf
}

fn gmm_bytes() -> Vec<u8> {
    let gmm = DiagGmm::new(array![0.25, 0.75], array![[0.0], [1.0]], array![[1.0], [2.0]]).unwrap();
    let mut buf = Vec::new();
    write_gmm(&mut buf, &GmmSnapshot::from_gmm(gmm)).unwrap();
    buf
}

fn feature_error(bytes: &[u8]) -> FveError {
    read_features(&mut &bytes[..]).unwrap_err()
}

fn gmm_error(bytes: &[u8]) -> FveError {
    read_gmm(&mut &bytes[..]).unwrap_err()
}

#[test]
fn every_truncation_of_a_feature_file_is_reported() {
    let bytes = feature_bytes();
    for cut in 0..bytes.len() {
        let err = feature_error(&bytes[..cut]);
        assert!(matches!(err, FveError::Truncated(_)), "cut at {cut}: {err}");
    }
}

#[test]
fn every_truncation_of_a_mixture_file_is_reported() {
    let bytes = gmm_bytes();
    for cut in 0..bytes.len() {
        assert!(matches!(gmm_error(&bytes[..cut]), FveError::Truncated(_)), "cut at {cut}");
    }
}

#[test]
fn magic_is_checked_per_format() {
    assert!(matches!(feature_error(&gmm_bytes()), FveError::BadMagic { .. }));
    assert!(matches!(gmm_error(&feature_bytes()), FveError::BadMagic { .. }));
}

#[test]
fn future_versions_are_rejected() {
    let mut f = feature_bytes();
    f[4] = 2;
    assert!(matches!(feature_error(&f), FveError::UnsupportedVersion(2)));
    let mut g = gmm_bytes();
    g[4] = 9;
    assert!(matches!(gmm_error(&g), FveError::UnsupportedVersion(9)));
}

#[test]
fn trailing_bytes_are_corruption() {
    let mut f = feature_bytes();
    f.push(0);
    assert!(matches!(feature_error(&f), FveError::Corrupt(_)));
    let mut g = gmm_bytes();
    g.extend_from_slice(&[0; 8]);
    assert!(matches!(gmm_error(&g), FveError::Corrupt(_)));
}

#[test]
fn non_finite_payload_is_rejected() {
    let mut f = feature_bytes();
    let payload = f.len() - 6 * 8;
    f[payload..payload + 8].copy_from_slice(&f64::NAN.to_le_bytes());
    assert!(matches!(feature_error(&f), FveError::Corrupt(_) | FveError::InvalidParameter(_)));
}

#[test]
fn negative_variance_in_a_mixture_file_is_rejected() {
    let mut g = gmm_bytes();
    let last = g.len() - 8;
    g[last..].copy_from_slice(&(-1.0f64).to_le_bytes());
    assert!(read_gmm(&mut &g[..]).is_err());
}

#[test]
fn empty_batches_round_trip() {
    let mut buf = Vec::new();
    write_features(&mut buf, &FeatureBatch::new(Array2::zeros((0, 2))).unwrap()).unwrap();
    let back = read_features(&mut buf.as_slice()).unwrap();
    assert_eq!((back.len(), back.dim()), (0, 2));
}
