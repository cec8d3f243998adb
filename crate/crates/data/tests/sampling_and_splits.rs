use proptest::prelude::*;
use sphinv_core::PointCloud;
use sphinv_data::mesh::sample_with_faces;
use sphinv_data::{
    generate_family, load_corpus, make_split, save_corpus, ShapeFamily, ShapeFamilyConfig, TriangleMesh,
};

/// Two disjoint right triangles with areas 1 and 3.
fn two_triangles() -> TriangleMesh {
    let s1 = 2f64.sqrt();
    let s3 = 6f64.sqrt();
    TriangleMesh::new(
        vec![[0.0, 0.0, 0.0], [s1, 0.0, 0.0], [0.0, s1, 0.0], [5.0, 0.0, 0.0], [5.0 + s3, 0.0, 0.0], [5.0, s3, 0.0]],
        vec![[0, 1, 2], [3, 4, 5]],
    )
    .unwrap()
}

fn face_counts(n: usize, seed: u64) -> [usize; 2] {
    let (_, faces) = sample_with_faces(&two_triangles(), n, seed).unwrap();
    let second = faces.iter().filter(|&&f| f == 1).count();
    [n - second, second]
}

#[test]
fn area_proportional_counts() {
    let m = two_triangles();
    assert!((m.triangle_area(0) - 1.0).abs() < 1e-12 && (m.triangle_area(1) - 3.0).abs() < 1e-12);
    let [a, b] = face_counts(4000, 17);
    assert!((a as f64 - 1000.0).abs() <= 50.0, "{a}");
    assert!((b as f64 - 3000.0).abs() <= 150.0, "{b}");
}

#[test]
fn chi_square_at_large_n() {
    let n = 100_000;
    let [a, b] = face_counts(n, 3);
    let expected = [n as f64 * 0.25, n as f64 * 0.75];
    let chi2: f64 = [a, b].iter().zip(expected).map(|(&o, e)| (o as f64 - e).powi(2) / e).sum();
    // One degree of freedom: mean 1, standard deviation sqrt(2).
    assert!(chi2 < 1.0 + 3.0 * 2f64.sqrt(), "chi2 = {chi2}");
}

fn dummy_items(n: usize) -> Vec<PointCloud> {
    (0..n).map(|i| PointCloud::from_rows(&[[i as f64, 0.0, 0.0]]).unwrap()).collect()
}

#[test]
fn split_sizes() {
    assert_eq!(make_split(dummy_items(6778), 0.10, 0).unwrap().split.test.len(), 678);
    assert_eq!(make_split(dummy_items(10), 0.10, 0).unwrap().split.test.len(), 1);
}

proptest! {
    #[test]
    fn splits_are_disjoint_covering_and_reproducible(n in 2usize..300, frac in 0.01f64..0.99, seed in any::<u64>()) {
        let a = make_split(dummy_items(n), frac, seed).unwrap();
        let b = make_split(dummy_items(n), frac, seed).unwrap();
        prop_assert_eq!(&a.split, &b.split);
        let mut all: Vec<usize> = a.split.train.iter().chain(&a.split.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(a.split.test.len(), (frac * n as f64).round() as usize);
    }
}

#[test]
fn ellipsoid_family_contract() {
    let cfg = ShapeFamilyConfig::new(ShapeFamily::Ellipsoid, 256, 11);
    let corpus = generate_family(&cfg, 200).unwrap();
    assert_eq!(corpus.len(), 200);
    assert_eq!(corpus.split.test.len(), 20);
    for cloud in &corpus.items {
        assert_eq!(cloud.len(), 256);
        assert!(cloud.max_norm() <= 1.0 + 1e-6);
    }
    assert_eq!(generate_family(&cfg, 200).unwrap(), corpus);
}

#[test]
fn every_family_generates_normalized_clouds() {
    for family in [ShapeFamily::Ellipsoid, ShapeFamily::Box, ShapeFamily::Capsule, ShapeFamily::ChairToy] {
        let corpus = generate_family(&ShapeFamilyConfig::new(family, 128, 5), 4).unwrap();
        for cloud in &corpus.items {
            assert!(cloud.max_norm() <= 1.0 + 1e-6 && cloud.max_norm() > 0.999);
            let c = cloud.centroid();
            assert!(c.iter().all(|v| v.abs() < 1e-9));
        }
    }
}

#[test]
fn degenerate_ranges_give_congruent_shapes() {
    let cfg = ShapeFamilyConfig::new(ShapeFamily::Box, 4000, 2)
        .with_range("sx", 0.6, 0.6)
        .with_range("sy", 0.4, 0.4)
        .with_range("sz", 0.9, 0.9);
    let corpus = generate_family(&cfg, 3).unwrap();
    let extents: Vec<[f64; 3]> = corpus
        .items
        .iter()
        .map(|c| {
            let mut e = [0.0; 3];
            for k in 0..3 {
                let col = c.points().column(k);
                e[k] = col.fold(f64::MIN, |a, &b| a.max(b)) - col.fold(f64::MAX, |a, &b| a.min(b));
            }
            e
        })
        .collect();
    for e in &extents[1..] {
        for k in 0..3 {
            assert!((e[k] - extents[0][k]).abs() < 0.02, "{e:?} vs {:?}", extents[0]);
        }
    }
}

#[test]
fn manifest_round_trip_keeps_labels_and_split() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate_family(&ShapeFamilyConfig::new(ShapeFamily::ChairToy, 64, 8), 12).unwrap();
    let path = save_corpus(&corpus, dir.path()).unwrap();
    let loaded = load_corpus(&path).unwrap();
    assert_eq!(loaded, corpus);
    assert_eq!(load_corpus(dir.path()).unwrap(), corpus);
}
