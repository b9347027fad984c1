mod common;

use common::{normal, random_graph};
use crimecast::linalg;
use crimecast::rng::stream;
use crimecast::spatial::{build_precision, morans_i, spectral_bounds, SpatialStructure, SpatialWeights};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn graph_strategy(max_n: usize) -> impl Strategy<Value = SpatialWeights> {
    (3..=max_n, 0.05f64..0.6, any::<u64>()).prop_map(|(n, p, seed)| random_graph(&mut stream(seed, &[]), n, p))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn precision_is_psd_with_zero_row_sums(w in graph_strategy(50)) {
        let q = build_precision(&w).to_dense();
        for i in 0..w.n() {
            prop_assert_eq!(q.row(i).sum(), 0.0);
            for j in 0..w.n() {
                prop_assert_eq!(q[(i, j)], q[(j, i)]);
            }
        }
        let ev = SymmetricEigen::new(q).eigenvalues;
        prop_assert!(ev.iter().all(|&v| v >= -1e-10));
    }

    #[test]
    fn cholesky_inside_bounds_only(w in graph_strategy(50), u in 0.0f64..1.0) {
        let b = spectral_bounds(&w).unwrap();
        let rho = b.lower + (b.upper - b.lower) * (0.001 + 0.998 * u);
        prop_assert!(linalg::cholesky(w.shifted_identity(rho), "I - ρW").is_ok());
        prop_assert!(linalg::cholesky(w.shifted_identity(b.upper + 1e-6), "I - ρW").is_err());
    }

    #[test]
    fn log_det_matches_dense(w in graph_strategy(30), u in 0.0f64..1.0) {
        let s = SpatialStructure::new(w.clone()).unwrap();
        let b = s.bounds();
        let rho = b.lower + (b.upper - b.lower) * (0.01 + 0.98 * u);
        let dense = w.shifted_identity(rho).determinant().ln();
        prop_assert!((s.log_det(rho) - dense).abs() < 1e-8);
    }

    #[test]
    fn morans_i_affine_invariant(w in graph_strategy(40), seed in any::<u64>(), a in 0.1f64..50.0, neg in any::<bool>(), b in -100.0f64..100.0) {
        let mut rng = stream(seed, &[]);
        let y: Vec<f64> = (0..w.n()).map(|_| normal(&mut rng)).collect();
        let a = if neg { -a } else { a };
        let z: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        let (m1, m2) = (morans_i(&y, &w).unwrap(), morans_i(&z, &w).unwrap());
        prop_assert!((m1.i_stat - m2.i_stat).abs() < 1e-10);
    }
}

#[test]
fn morans_i_null_mean() {
    let w = SpatialWeights::lattice(6);
    let n = w.n();
    let mut rng = stream(11, &[]);
    let reps = 1000;
    let values: Vec<f64> = (0..reps)
        .map(|_| {
            let y: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
            morans_i(&y, &w).unwrap().i_stat
        })
        .collect();
    let mean = values.iter().sum::<f64>() / reps as f64;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
    let expected = -1.0 / (n as f64 - 1.0);
    assert!(
        (mean - expected).abs() < 3.0 * sd / (reps as f64).sqrt(),
        "mean {mean} vs {expected}"
    );
}

#[test]
fn smooth_path_field_is_significant() {
    let n = 30;
    let w = SpatialWeights::from_index_pairs(n, (0..n - 1).map(|i| (i, i + 1))).unwrap();
    let y: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    let m = morans_i(&y, &w).unwrap();
    assert!(m.i_stat > 0.0 && m.p < 0.05);

    // permutation p-value agrees on significance
    let mut rng = stream(5, &[]);
    let mut perm = y.clone();
    let mut exceed = 0;
    for _ in 0..999 {
        for i in (1..n).rev() {
            perm.swap(i, rand::Rng::random_range(&mut rng, 0..=i));
        }
        if morans_i(&perm, &w).unwrap().i_stat >= m.i_stat {
            exceed += 1;
        }
    }
    assert!((exceed as f64 + 1.0) / 1000.0 < 0.05);
}

#[test]
fn spectral_examples() {
    let path = SpatialWeights::from_index_pairs(3, [(0, 1), (1, 2)]).unwrap();
    let b = spectral_bounds(&path).unwrap();
    assert!((b.lower + 1.0 / 2f64.sqrt()).abs() < 1e-12);
    assert!((b.upper - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    let cycle = SpatialWeights::from_index_pairs(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
    let b = spectral_bounds(&cycle).unwrap();
    assert!((b.lower + 0.5).abs() < 1e-12 && (b.upper - 0.5).abs() < 1e-12);
    let dense: DMatrix<f64> = cycle.to_dense();
    assert_eq!(dense.sum(), 8.0);
}
