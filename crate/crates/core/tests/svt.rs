mod common;

use cvdenoise::cv::{FoldAssignment, LambdaGrid};
use cvdenoise::linalg::{svd, Matrix};
use cvdenoise::svt::{cvsvt, fold_mask, svt, zero_double, MaskSide};
use proptest::prelude::*;

fn rank_one(n: usize, scale: f64) -> Matrix {
    let u: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.7).sin() + 1.2).collect();
    let v: Vec<f64> = (0..n).map(|j| ((j as f64) * 0.3).cos() - 0.4).collect();
    let mut m = Matrix::zeros(n, n);
    for (i, a) in u.iter().enumerate() {
        for (j, b) in v.iter().enumerate() {
            m.set(i, j, scale * a * b);
        }
    }
    m
}

fn noisy(m: &Matrix, seed: u64) -> Matrix {
    let mut rng = common::rng(seed);
    let noise = common::normals(&mut rng, m.rows() * m.cols());
    Matrix::new(m.rows(), m.cols(), m.data().iter().zip(noise).map(|(a, b)| a + b).collect()).unwrap()
}

#[test]
fn cv_recovers_a_strong_rank_one_signal() {
    let n = 30;
    let truth = rank_one(n, 3.0);
    let y = noisy(&truth, 1);
    let grid = LambdaGrid::powers_of_two(10).unwrap();
    let cv = cvsvt(&y, &grid, 4).unwrap();
    let fit = Matrix::new(n, n, cv.fit.values().to_vec()).unwrap();
    let err = fit.sub(&truth).unwrap().frobenius_norm() / truth.frobenius_norm();
    let noise_level = y.sub(&truth).unwrap().frobenius_norm() / truth.frobenius_norm();
    assert!(err < 0.5 * noise_level, "relative error {err}, raw {noise_level}");
    assert_eq!(svt(&Matrix::new(n, n, cv.fit.values().to_vec()).unwrap(), 1e-6).unwrap().rank, 1);
}

#[test]
fn rank_decreases_with_lambda() {
    let y = noisy(&rank_one(12, 2.0), 2);
    let mut last = usize::MAX;
    for k in -2..8 {
        let rank = svt(&y, 2f64.powi(k)).unwrap().rank;
        assert!(rank <= last);
        last = rank;
    }
    assert_eq!(last, 0);
}

#[test]
fn huge_lambda_gives_zero_matrix() {
    let y = noisy(&rank_one(5, 1.0), 3);
    let fit = svt(&y, 1e6).unwrap();
    assert_eq!(fit.rank, 0);
    assert!(fit.fit.data().iter().all(|&v| v == 0.0));
}

#[test]
fn masks_partition_the_doubled_matrix() {
    let y = noisy(&rank_one(6, 1.0), 4);
    let folds = FoldAssignment::bernoulli(36, 9).unwrap();
    let w = fold_mask(&folds, 0, 6).unwrap();
    let a = zero_double(&y, &w, MaskSide::Ones).unwrap();
    let b = zero_double(&y, &w, MaskSide::Zeros).unwrap();
    for ((x, p), q) in y.data().iter().zip(a.data()).zip(b.data()) {
        assert_eq!(p + q, 2.0 * x);
        assert!(*p == 0.0 || *q == 0.0);
    }
}

#[test]
fn rejects_bad_inputs() {
    assert!(svt(&Matrix::zeros(2, 3), 1.0).is_err());
    assert!(svt(&Matrix::zeros(2, 2), -1.0).is_err());
    let bad = Matrix::new(2, 2, vec![0.0, 0.5, 1.0, 1.0]).unwrap();
    assert!(zero_double(&Matrix::zeros(2, 2), &bad, MaskSide::Ones).is_err());
    let grid = LambdaGrid::powers_of_two(2).unwrap();
    assert!(cvsvt(&Matrix::zeros(1, 1), &grid, 0).is_err());
}

#[test]
fn single_point_grid_selects_it() {
    let y = noisy(&rank_one(8, 1.0), 5);
    let grid = LambdaGrid::new(vec![3.0]).unwrap();
    let cv = cvsvt(&y, &grid, 1).unwrap();
    assert_eq!(cv.lambda, 3.0);
    assert_eq!(cv.fit.values(), svt(&y, 3.0).unwrap().fit.data());
}

#[test]
fn cv_is_deterministic() {
    let y = noisy(&rank_one(10, 2.0), 6);
    let grid = LambdaGrid::powers_of_two(6).unwrap();
    let a = cvsvt(&y, &grid, 2).unwrap();
    let b = cvsvt(&y, &grid, 2).unwrap();
    assert_eq!(a.fit.values(), b.fit.values());
    assert_eq!(a.fold_lambdas, b.fold_lambdas);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn residual_is_the_discarded_spectrum(seed in 0u64..10_000, n in 2usize..9, lambda in 0.0f64..4.0) {
        let y = noisy(&Matrix::zeros(n, n), seed);
        let s = svd(&y).unwrap().s;
        let fit = svt(&y, lambda).unwrap();
        let lhs = fit.fit.sub(&y).unwrap().frobenius_norm().powi(2);
        let rhs: f64 = s.iter().filter(|&&v| v <= lambda).map(|v| v * v).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs));
        prop_assert_eq!(fit.rank, s.iter().filter(|&&v| v > lambda).count());
    }
}
