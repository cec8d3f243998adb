use std::path::Path;

use ndarray::Array2;
use proptest::prelude::*;
use sphinv_core::io::{
    decode_native_cloud, encode_native_cloud, load_pointcloud, parse_ply, save_pointcloud, write_ply, NativeCloud,
    PlyEncoding,
};
use sphinv_core::{CoreError, NormalizeTransform, PointCloud};

fn four_points() -> PointCloud {
    PointCloud::from_rows(&[[0.1, -0.2, 0.3], [1.0 / 3.0, 2.5e-7, -1.0], [0.0, 0.0, 0.0], [-0.75, 0.5, 1e3]]).unwrap()
}

#[test]
fn save_load_each_format() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = four_points();
    for name in ["a.xyz", "a.ply", "a.pinv"] {
        let path = dir.path().join(name);
        save_pointcloud(&cloud, &path).unwrap();
        let back = load_pointcloud(&path).unwrap();
        assert_eq!(back, cloud, "{name}");
    }
}

#[test]
fn unsupported_extension() {
    let e = save_pointcloud(&four_points(), Path::new("/tmp/a.obj")).unwrap_err();
    assert!(matches!(e, CoreError::UnsupportedExtension(_)));
}

#[test]
fn xyz_parse_error_has_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.xyz");
    std::fs::write(&path, "0 0 0\n1 1 x\n").unwrap();
    let msg = load_pointcloud(&path).unwrap_err().to_string();
    assert!(msg.contains(":2:"), "{msg}");
}

#[test]
fn native_keeps_labels_and_metadata() {
    let cloud = four_points().with_labels(vec![0, 1, 1, 3]).unwrap();
    let native =
        NativeCloud { cloud, latent_dim: 16, transform: NormalizeTransform { center: [1.0, 2.0, 3.0], scale: 0.5 } };
    let bytes = encode_native_cloud(&native);
    assert_eq!(&bytes[..4], b"PINV");
    assert_eq!(decode_native_cloud(&bytes).unwrap(), native);
}

#[test]
fn ply_colors_written_and_read() {
    let cloud = four_points();
    let colors = Array2::from_shape_fn((4, 3), |(i, k)| ((i + k) % 2) as f64);
    for enc in [PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian] {
        let bytes = write_ply(&cloud, Some(&colors), enc);
        let (back, c) = parse_ply(&bytes).unwrap();
        assert_eq!(back, cloud);
        assert_eq!(c.unwrap(), colors);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn binary_ply_and_native_are_bit_exact(v in prop::collection::vec(-1e6f64..1e6, 3..60)) {
        let n = v.len() / 3;
        let cloud = PointCloud::new(Array2::from_shape_vec((n, 3), v[..n * 3].to_vec()).unwrap()).unwrap();
        let (ply, _) = parse_ply(&write_ply(&cloud, None, PlyEncoding::BinaryLittleEndian)).unwrap();
        prop_assert_eq!(&ply, &cloud);
        let native = decode_native_cloud(&encode_native_cloud(&NativeCloud::plain(cloud.clone()))).unwrap();
        prop_assert_eq!(native.cloud, cloud);
    }
}
