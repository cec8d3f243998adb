use ndarray::Array2;
use proptest::prelude::*;
use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sphinv_core::metrics::{chamfer_points, directed_mean, emd_approx, emd_exact, min_cost_assignment, SinkhornConfig};

/// O(N*M) Chamfer written independently of the library's nearest-neighbor scan.
fn chamfer_oracle(p: &Array2<f64>, q: &Array2<f64>) -> f64 {
    let dist = |a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>| {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    let directed = |a: &Array2<f64>, b: &Array2<f64>| {
        a.outer_iter().map(|x| b.outer_iter().map(|y| dist(x, y)).fold(f64::INFINITY, f64::min)).sum::<f64>()
            / a.nrows() as f64
    };
    directed(p, q).max(directed(q, p))
}

/// Exhaustive search over all permutations (n <= 7).
fn emd_enumeration(p: &Array2<f64>, q: &Array2<f64>) -> f64 {
    fn rec(c: &Array2<f64>, row: usize, used: &mut [bool]) -> f64 {
        if row == c.nrows() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for j in 0..c.nrows() {
            if !used[j] {
                used[j] = true;
                best = best.min(c[[row, j]] + rec(c, row + 1, used));
                used[j] = false;
            }
        }
        best
    }
    let n = p.nrows();
    let c = Array2::from_shape_fn((n, n), |(i, j)| (&p.row(i) - &q.row(j)).mapv(|v| v * v).sum().sqrt());
    rec(&c, 0, &mut vec![false; n]) / n as f64
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0))
}

fn cloud_strategy(max: usize) -> impl Strategy<Value = Array2<f64>> {
    (1..=max).prop_flat_map(|n| {
        prop::collection::vec(-2.0f64..2.0, n * 3).prop_map(move |v| Array2::from_shape_vec((n, 3), v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chamfer_matches_oracle_and_is_symmetric(p in cloud_strategy(40), q in cloud_strategy(40)) {
        let a = chamfer_points(p.view(), q.view()).unwrap();
        let b = chamfer_points(q.view(), p.view()).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!((a - chamfer_oracle(&p, &q)).abs() < 1e-9);
    }

    #[test]
    fn chamfer_permutation_invariant(p in cloud_strategy(30), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_cloud(&mut rng, 17);
        let mut perm: Vec<usize> = (0..p.nrows()).collect();
        perm.shuffle(&mut rng);
        let pp = p.select(ndarray::Axis(0), &perm);
        let a = chamfer_points(p.view(), q.view()).unwrap();
        let b = chamfer_points(pp.view(), q.view()).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn emd_bounds_directed_chamfer(seed in any::<u64>(), n in 1usize..24) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_cloud(&mut rng, n);
        let q = random_cloud(&mut rng, n);
        let emd = emd_exact(p.view(), q.view()).unwrap().cost;
        prop_assert!(emd + 1e-12 >= directed_mean(p.view(), q.view()));
        prop_assert!(emd + 1e-12 >= directed_mean(q.view(), p.view()));
    }
}

#[test]
fn chamfer_oracle_thousand_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let n = rng.random_range(1..=128);
        let m = rng.random_range(1..=128);
        let p = random_cloud(&mut rng, n);
        let q = random_cloud(&mut rng, m);
        let got = chamfer_points(p.view(), q.view()).unwrap();
        assert!((got - chamfer_oracle(&p, &q)).abs() < 1e-9);
    }
}

#[test]
fn exact_emd_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 1..=7 {
        for _ in 0..5 {
            let p = random_cloud(&mut rng, n);
            let q = random_cloud(&mut rng, n);
            let got = emd_exact(p.view(), q.view()).unwrap();
            assert!((got.cost - emd_enumeration(&p, &q)).abs() < 1e-12);
            let mut cols = got.assignment.clone();
            cols.sort_unstable();
            assert_eq!(cols, (0..n).collect::<Vec<_>>());
        }
    }
}

#[test]
fn emd_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = random_cloud(&mut rng, 40);
    let q = random_cloud(&mut rng, 40);
    let mut perm: Vec<usize> = (0..40).collect();
    perm.shuffle(&mut rng);
    let a = emd_exact(p.view(), q.view()).unwrap().cost;
    let b = emd_exact(p.select(ndarray::Axis(0), &perm).view(), q.view()).unwrap().cost;
    let c = emd_exact(p.view(), q.select(ndarray::Axis(0), &perm).view()).unwrap().cost;
    assert!((a - b).abs() < 1e-12 && (a - c).abs() < 1e-12);
}

#[test]
fn approximate_emd_within_two_percent() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [8, 32, 64, 128, 256] {
        let p = random_cloud(&mut rng, n);
        let q = random_cloud(&mut rng, n);
        let exact = emd_exact(p.view(), q.view()).unwrap().cost;
        let approx = emd_approx(p.view(), q.view(), &SinkhornConfig::default()).unwrap().cost;
        assert!(approx + 1e-12 >= exact);
        assert!(approx <= exact * 1.02, "n={n}: approx {approx} exact {exact}");
    }
}

#[test]
fn assignment_is_a_permutation_on_ties() {
    let c = Array2::from_elem((5, 5), 1.0);
    let mut a = min_cost_assignment(&c);
    a.sort_unstable();
    assert_eq!(a, vec![0, 1, 2, 3, 4]);
}
