mod common;

use cvdenoise::cv::LambdaGrid;
use cvdenoise::dcart::{self, cvdcart, DcartSolver};
use cvdenoise::lattice::{LatticeShape, LatticeSignal};
use proptest::prelude::*;

#[test]
fn dp_matches_enumeration_on_small_lattices() {
    let mut rng = common::rng(11);
    let mut shapes: Vec<LatticeShape> = (2..=8).map(|n| LatticeShape::line(n).unwrap()).collect();
    shapes.extend((2..=4).map(|n| LatticeShape::square(n).unwrap()));
    shapes.push(LatticeShape::new(3, 2).unwrap());
    for shape in shapes {
        let rdps = common::rdps_of(&shape);
        for _ in 0..10 {
            let (y, mask, lambda) = common::random_instance(&mut rng, shape);
            let best = rdps
                .iter()
                .map(|p| common::partition_cost(&y, &mask, p, lambda))
                .fold(f64::INFINITY, f64::min);
            let fit = dcart::solve_completion(&y, &mask, lambda).unwrap();
            assert!(
                (fit.objective - best).abs() <= 1e-9 * best,
                "{shape:?}: dp {} vs enumeration {best}",
                fit.objective
            );
            let own = common::partition_cost(
                &y,
                &mask,
                &fit.partition.leaves().into_iter().cloned().collect::<Vec<_>>(),
                lambda,
            );
            assert!((own - fit.objective).abs() <= 1e-9 * best);
        }
    }
}

#[test]
fn two_by_two_has_three_split_trees_plus_leaf() {
    // leaf, row split (4 trees below it), column split (4 trees)
    assert_eq!(common::rdps_of(&LatticeShape::square(2).unwrap()).len(), 9);
}

#[test]
fn leaf_count_nonincreasing_along_grid() {
    let mut rng = common::rng(5);
    let grid = LambdaGrid::powers_of_two(10).unwrap();
    for n in [5usize, 8, 13] {
        let shape = LatticeShape::square(n).unwrap();
        for _ in 0..5 {
            let (y, mask, _) = common::random_instance(&mut rng, shape);
            let solver = DcartSolver::new(&y, Some(&mask)).unwrap();
            let counts: Vec<usize> = grid.values().iter().map(|&l| solver.solve(l).unwrap().leaf_count).collect();
            assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");
        }
    }
}

#[test]
fn fit_is_constant_on_leaves() {
    let mut rng = common::rng(8);
    let shape = LatticeShape::square(16).unwrap();
    let (y, mask, lambda) = common::random_instance(&mut rng, shape);
    let fit = dcart::solve_completion(&y, &mask, lambda).unwrap();
    for leaf in fit.partition.leaves() {
        let idx = leaf.indices(&shape);
        let v = fit.fit.values()[idx[0]];
        assert!(idx.iter().all(|&p| fit.fit.values()[p] == v));
    }
}

#[test]
fn cvdcart_noiseless_constant_and_deterministic() {
    let shape = LatticeShape::square(16).unwrap();
    let y = LatticeSignal::filled(shape, -2.5);
    let grid = LambdaGrid::default_for(shape.len()).unwrap();
    let res = cvdcart(&y, &grid, 3).unwrap();
    assert!(res.fit.values().iter().all(|&v| v == -2.5));

    let mut rng = common::rng(2);
    let (noisy, _, _) = common::random_instance(&mut rng, shape);
    let a = cvdcart(&noisy, &grid, 99).unwrap();
    let b = cvdcart(&noisy, &grid, 99).unwrap();
    assert_eq!(a.lambda.to_bits(), b.lambda.to_bits());
    assert_eq!(a.fold_lambdas, b.fold_lambdas);
    assert_eq!(a.fit, b.fit);
}

#[test]
fn cvdcart_rejects_tiny_input() {
    let y = LatticeSignal::from_vec(vec![1.0, 2.0, 3.0]).unwrap();
    assert!(cvdcart(&y, &LambdaGrid::powers_of_two(2).unwrap(), 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn completion_ignores_values_outside_subset(
        seed in any::<u64>(),
        side in 2usize..9,
        dim in 1usize..3,
        bump in -50.0f64..50.0,
    ) {
        let mut rng = common::rng(seed);
        let shape = LatticeShape::new(dim, side).unwrap();
        let (y, mask, lambda) = common::random_instance(&mut rng, shape);
        let mut z = y.clone();
        for (p, &inside) in mask.iter().enumerate() {
            if !inside {
                z.values_mut()[p] += bump;
            }
        }
        let a = dcart::solve_completion(&y, &mask, lambda).unwrap();
        let b = dcart::solve_completion(&z, &mask, lambda).unwrap();
        prop_assert_eq!(a.fit, b.fit);
        prop_assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }

    #[test]
    fn objective_recomputes(seed in any::<u64>(), side in 2usize..12, dim in 1usize..4) {
        let side = if dim == 3 { side.min(5) } else { side };
        let mut rng = common::rng(seed);
        let shape = LatticeShape::new(dim, side).unwrap();
        let (y, mask, lambda) = common::random_instance(&mut rng, shape);
        let fit = dcart::solve_completion(&y, &mask, lambda).unwrap();
        let again = dcart::objective(&y, Some(&mask), &fit.partition, lambda);
        prop_assert!((again - fit.objective).abs() <= 1e-9 * shape.len() as f64);
        let d = shape.dim();
        prop_assert!(fit.visits <= (1 << d) * shape.len());
        prop_assert!(fit.work <= (1 << d) * shape.len() * (d + 1));
    }
}
