//! Generic K-fold cross-validation with per-fold tuning.
//!
//! Each fold `j` picks its own `lambda_j` by scoring completion fits (fits
//! that only see data outside the fold) on the held-out entries. The chosen
//! completion fits are spliced into an intermediate signal, and the final
//! tuning value is the grid point whose full-data fit is closest to that
//! intermediate signal in squared Euclidean distance.
//!
//! Fold ids are 0-based throughout: fold `0` is the first fold.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::LatticeSignal;
use crate::numeric::compensated_sum;
use crate::rng::{self, Purpose};

/// Redraw budget for random folds that come out with an empty side.
pub const MAX_FOLD_REDRAWS: usize = 64;

/// Partition of `{0, .., len-1}` into `k` disjoint folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    k: usize,
    membership: Vec<usize>,
}

impl FoldAssignment {
    pub fn new(k: usize, membership: Vec<usize>) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
        }
        if let Some(&bad) = membership.iter().find(|&&f| f >= k) {
            return Err(Error::invalid(format!("fold id {bad} out of range for k = {k}")));
        }
        Ok(FoldAssignment { k, membership })
    }

    /// Fold `j` holds the indices congruent to `j` modulo `k`.
    pub fn interleaved(n: usize, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
        }
        if n < k {
            return Err(Error::invalid(format!(
                "cannot split {n} points into {k} nonempty folds"
            )));
        }
        Ok(FoldAssignment {
            k,
            membership: (0..n).map(|i| i % k).collect(),
        })
    }

    /// Two folds from i.i.d. fair coin flips, redrawn (on a fresh stream of
    /// the same seed) while either fold is empty.
    pub fn bernoulli(n: usize, seed: u64) -> Result<Self> {
        use rand::Rng;
        if n < 2 {
            return Err(Error::invalid(format!(
                "random two-fold split needs at least 2 points, got {n}"
            )));
        }
        for attempt in 0..MAX_FOLD_REDRAWS {
            let mut gen = rng::stream(seed, Purpose::Folds, attempt as u64);
            let membership: Vec<usize> = (0..n).map(|_| usize::from(!gen.random::<bool>())).collect();
            let first = membership.iter().filter(|&&f| f == 0).count();
            if first > 0 && first < n {
                return Ok(FoldAssignment { k: 2, membership });
            }
        }
        Err(Error::DegeneratePartition {
            retries: MAX_FOLD_REDRAWS,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.membership.len()
    }

    pub fn is_empty(&self) -> bool {
        self.membership.is_empty()
    }

    pub fn fold_of(&self, index: usize) -> usize {
        self.membership[index]
    }

    pub fn membership(&self) -> &[usize] {
        &self.membership
    }

    pub fn contains(&self, fold: usize, index: usize) -> bool {
        self.membership[index] == fold
    }

    /// Indices in fold `j`, ascending.
    pub fn members(&self, fold: usize) -> Vec<usize> {
        self.indices_where(|f| f == fold)
    }

    /// Indices outside fold `j`, ascending.
    pub fn complement(&self, fold: usize) -> Vec<usize> {
        self.indices_where(|f| f != fold)
    }

    /// `true` at the indices of fold `j`.
    pub fn mask(&self, fold: usize) -> Vec<bool> {
        self.membership.iter().map(|&f| f == fold).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.membership {
            sizes[f] += 1;
        }
        sizes
    }

    fn indices_where(&self, pred: impl Fn(usize) -> bool) -> Vec<usize> {
        self.membership
            .iter()
            .enumerate()
            .filter(|(_, &f)| pred(f))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Strictly increasing, strictly positive tuning values.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaGrid {
    values: Vec<f64>,
}

impl LambdaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("lambda grid is empty"));
        }
        if values.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(Error::invalid("lambda grid values must be finite and positive"));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("lambda grid must be strictly increasing"));
        }
        Ok(LambdaGrid { values })
    }

    /// `{1, 2, 4, ..., 2^max_exponent}`.
    pub fn powers_of_two(max_exponent: u32) -> Result<Self> {
        Self::powers_of_two_between(0, max_exponent as i32)
    }

    /// `{2^min_exponent, ..., 2^max_exponent}`.
    pub fn powers_of_two_between(min_exponent: i32, max_exponent: i32) -> Result<Self> {
        if min_exponent > max_exponent {
            return Err(Error::invalid(format!(
                "grid exponents out of order: {min_exponent} > {max_exponent}"
            )));
        }
        if min_exponent < -1000 || max_exponent > 1000 {
            return Err(Error::invalid("grid exponent too large"));
        }
        LambdaGrid::new((min_exponent..=max_exponent).map(|e| 2f64.powi(e)).collect())
    }

    /// Powers of two up to `2^ceil(log2 total)`.
    pub fn default_for(total: usize) -> Result<Self> {
        Self::powers_of_two(default_max_exponent(total)?)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, lambda: f64) -> bool {
        self.values.contains(&lambda)
    }
}

/// `ceil(log2 total)`, computed on integers.
pub fn default_max_exponent(total: usize) -> Result<u32> {
    if total < 2 {
        return Err(Error::invalid(format!(
            "default grid needs at least 2 points, got {total}"
        )));
    }
    Ok(usize::BITS - (total - 1).leading_zeros())
}

pub fn default_grid(total: usize) -> Result<LambdaGrid> {
    LambdaGrid::default_for(total)
}

/// A tuning-indexed family of estimators with completion variants.
///
/// `completion_fit(y, folds, j, lambda)` must depend on `y` only through the
/// entries outside fold `j`. Implementors may override the `*_path` methods
/// to share work across the grid; the results must match the pointwise fits.
pub trait EstimatorFamily: Sync {
    fn full_fit(&self, y: &LatticeSignal, lambda: f64) -> Result<LatticeSignal>;

    fn completion_fit(
        &self,
        y: &LatticeSignal,
        folds: &FoldAssignment,
        fold: usize,
        lambda: f64,
    ) -> Result<LatticeSignal>;

    fn full_path(&self, y: &LatticeSignal, grid: &LambdaGrid) -> Result<Vec<LatticeSignal>> {
        in_grid_order(grid, |lambda| self.full_fit(y, lambda))
    }

    fn completion_path(
        &self,
        y: &LatticeSignal,
        folds: &FoldAssignment,
        fold: usize,
        grid: &LambdaGrid,
    ) -> Result<Vec<LatticeSignal>> {
        in_grid_order(grid, |lambda| self.completion_fit(y, folds, fold, lambda))
    }
}

/// Evaluates `f` over the grid (possibly in parallel) and returns results in
/// grid order; the first failing lambda in grid order wins.
pub fn in_grid_order<T, F>(grid: &LambdaGrid, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(f64) -> Result<T> + Sync,
{
    let results: Vec<Result<T>> = grid.values().par_iter().map(|&lambda| f(lambda)).collect();
    results
        .into_iter()
        .zip(grid.values())
        .map(|(r, &lambda)| r.map_err(|e| e.at_lambda(lambda)))
        .collect()
}

/// Squared prediction error of `fit` on fold `j`.
pub fn cv_error(y: &LatticeSignal, fit: &LatticeSignal, fold: usize, folds: &FoldAssignment) -> Result<f64> {
    y.ensure_same_shape(fit)?;
    check_folds(y, folds)?;
    check_fold_id(folds, fold)?;
    Ok(compensated_sum(
        y.values()
            .iter()
            .zip(fit.values())
            .zip(folds.membership())
            .filter(|(_, &f)| f == fold)
            .map(|((a, b), _)| (a - b) * (a - b)),
    ))
}

/// Index of the first minimum; NaN scores never win.
pub fn argmin_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        match best {
            Some(b) if s >= scores[b] => {}
            _ => best = Some(i),
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct FoldSelection {
    pub fold: usize,
    pub lambda: f64,
    pub index: usize,
    /// CV error at each grid value, grid order.
    pub errors: Vec<f64>,
    /// Completion fit at the selected lambda.
    pub fit: LatticeSignal,
}

pub fn select_fold_lambda<F: EstimatorFamily + ?Sized>(
    family: &F,
    y: &LatticeSignal,
    folds: &FoldAssignment,
    fold: usize,
    grid: &LambdaGrid,
) -> Result<FoldSelection> {
    check_folds(y, folds)?;
    check_fold_id(folds, fold)?;
    let fits = family.completion_path(y, folds, fold, grid)?;
    let errors = fits
        .iter()
        .map(|fit| cv_error(y, fit, fold, folds))
        .collect::<Result<Vec<_>>>()?;
    let index = argmin_first(&errors).ok_or_else(|| Error::invalid("all CV errors are NaN"))?;
    let fit = fits.into_iter().nth(index).expect("index within grid");
    Ok(FoldSelection {
        fold,
        lambda: grid.values()[index],
        index,
        errors,
        fit,
    })
}

/// Splices the completion fits: the result equals `fits[j]` on fold `j`.
pub fn splice(folds: &FoldAssignment, fits: &[LatticeSignal]) -> Result<LatticeSignal> {
    if fits.len() != folds.k() {
        return Err(Error::invalid(format!(
            "{} fits for {} folds",
            fits.len(),
            folds.k()
        )));
    }
    let first = &fits[0];
    for f in fits {
        first.ensure_same_shape(f)?;
    }
    if first.len() != folds.len() {
        return Err(Error::invalid("fold assignment does not match the signal length"));
    }
    let values = folds
        .membership()
        .iter()
        .enumerate()
        .map(|(i, &f)| fits[f].values()[i])
        .collect();
    first.with_values(values)
}

/// Intermediate estimator built from freshly computed completion fits.
pub fn assemble_intermediate<F: EstimatorFamily + ?Sized>(
    family: &F,
    y: &LatticeSignal,
    folds: &FoldAssignment,
    fold_lambdas: &[f64],
) -> Result<LatticeSignal> {
    check_folds(y, folds)?;
    if fold_lambdas.len() != folds.k() {
        return Err(Error::invalid(format!(
            "{} fold lambdas for {} folds",
            fold_lambdas.len(),
            folds.k()
        )));
    }
    let fits = fold_lambdas
        .iter()
        .enumerate()
        .map(|(j, &lambda)| {
            family
                .completion_fit(y, folds, j, lambda)
                .map_err(|e| e.at_lambda(lambda))
        })
        .collect::<Result<Vec<_>>>()?;
    splice(folds, &fits)
}

#[derive(Debug, Clone)]
pub struct FinalSelection {
    pub lambda: f64,
    pub index: usize,
    /// `||full_fit(lambda) - intermediate||^2` per grid value.
    pub distances: Vec<f64>,
    pub fit: LatticeSignal,
}

pub fn select_final_lambda<F: EstimatorFamily + ?Sized>(
    family: &F,
    y: &LatticeSignal,
    intermediate: &LatticeSignal,
    grid: &LambdaGrid,
) -> Result<FinalSelection> {
    y.ensure_same_shape(intermediate)?;
    let fits = family.full_path(y, grid)?;
    let distances = fits
        .iter()
        .map(|fit| fit.squared_distance(intermediate))
        .collect::<Result<Vec<_>>>()?;
    let index =
        argmin_first(&distances).ok_or_else(|| Error::invalid("all final distances are NaN"))?;
    let fit = fits.into_iter().nth(index).expect("index within grid");
    Ok(FinalSelection {
        lambda: grid.values()[index],
        index,
        distances,
        fit,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum FoldStrategy {
    /// Deterministic folds `{j, j+k, j+2k, ...}`.
    Interleaved { k: usize },
    /// Two folds from seeded fair coin flips.
    Bernoulli { seed: u64 },
    Fixed(FoldAssignment),
}

impl FoldStrategy {
    pub fn build(&self, n: usize) -> Result<FoldAssignment> {
        match self {
            FoldStrategy::Interleaved { k } => FoldAssignment::interleaved(n, *k),
            FoldStrategy::Bernoulli { seed } => FoldAssignment::bernoulli(n, *seed),
            FoldStrategy::Fixed(f) => {
                if f.len() != n {
                    return Err(Error::invalid(format!(
                        "fixed folds cover {} points, signal has {n}",
                        f.len()
                    )));
                }
                Ok(f.clone())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CvConfig {
    pub folds: FoldStrategy,
    pub grid: LambdaGrid,
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub grid: LambdaGrid,
    pub folds: FoldAssignment,
    pub fold_lambdas: Vec<f64>,
    /// CV error curves, one per fold, in grid order.
    pub fold_errors: Vec<Vec<f64>>,
    pub intermediate: LatticeSignal,
    pub lambda: f64,
    pub final_distances: Vec<f64>,
    pub fit: LatticeSignal,
}

pub fn run_cv<F: EstimatorFamily + ?Sized>(
    family: &F,
    y: &LatticeSignal,
    config: &CvConfig,
) -> Result<CvResult> {
    let folds = config
        .folds
        .build(y.len())
        .map_err(|e| e.in_step("fold construction"))?;
    run_cv_with_folds(family, y, folds, &config.grid)
}

pub fn run_cv_with_folds<F: EstimatorFamily + ?Sized>(
    family: &F,
    y: &LatticeSignal,
    folds: FoldAssignment,
    grid: &LambdaGrid,
) -> Result<CvResult> {
    check_folds(y, &folds).map_err(|e| e.in_step("fold construction"))?;
    let selections = (0..folds.k())
        .map(|j| select_fold_lambda(family, y, &folds, j, grid))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_step("per-fold selection"))?;
    let fits: Vec<LatticeSignal> = selections.iter().map(|s| s.fit.clone()).collect();
    let intermediate = splice(&folds, &fits).map_err(|e| e.in_step("intermediate assembly"))?;
    let last = select_final_lambda(family, y, &intermediate, grid)
        .map_err(|e| e.in_step("final selection"))?;
    Ok(CvResult {
        grid: grid.clone(),
        fold_lambdas: selections.iter().map(|s| s.lambda).collect(),
        fold_errors: selections.into_iter().map(|s| s.errors).collect(),
        folds,
        intermediate,
        lambda: last.lambda,
        final_distances: last.distances,
        fit: last.fit,
    })
}

fn check_folds(y: &LatticeSignal, folds: &FoldAssignment) -> Result<()> {
    if folds.len() != y.len() {
        return Err(Error::invalid(format!(
            "fold assignment covers {} points, signal has {}",
            folds.len(),
            y.len()
        )));
    }
    Ok(())
}

fn check_fold_id(folds: &FoldAssignment, fold: usize) -> Result<()> {
    if fold >= folds.k() {
        return Err(Error::invalid(format!(
            "fold {fold} out of range for k = {}",
            folds.k()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_based(v: Vec<usize>) -> Vec<usize> {
        v.into_iter().map(|i| i + 1).collect()
    }

    #[test]
    fn interleaved_seven_two() {
        let f = FoldAssignment::interleaved(7, 2).unwrap();
        assert_eq!(one_based(f.members(0)), vec![1, 3, 5, 7]);
        assert_eq!(one_based(f.members(1)), vec![2, 4, 6]);
    }

    #[test]
    fn interleaved_six_three() {
        let f = FoldAssignment::interleaved(6, 3).unwrap();
        assert_eq!(one_based(f.members(0)), vec![1, 4]);
        assert_eq!(one_based(f.members(1)), vec![2, 5]);
        assert_eq!(one_based(f.members(2)), vec![3, 6]);
    }

    #[test]
    fn interleaved_singletons() {
        let f = FoldAssignment::interleaved(5, 5).unwrap();
        for j in 0..5 {
            assert_eq!(f.members(j), vec![j]);
        }
    }

    #[test]
    fn interleaved_too_short() {
        assert!(matches!(
            FoldAssignment::interleaved(2, 3),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn bernoulli_deterministic_and_covering() {
        let a = FoldAssignment::bernoulli(256, 17).unwrap();
        let b = FoldAssignment::bernoulli(256, 17).unwrap();
        assert_eq!(a, b);
        let sizes = a.sizes();
        assert_eq!(sizes.iter().sum::<usize>(), 256);
        assert!(sizes.iter().all(|&s| s > 0));
    }

    #[test]
    fn bernoulli_two_points_never_degenerate() {
        for seed in 0..200 {
            let f = FoldAssignment::bernoulli(2, seed).unwrap();
            assert_eq!(f.sizes(), vec![1, 1]);
        }
    }

    #[test]
    fn bernoulli_mean_fold_size() {
        // Binomial(64, 1/2) has mean 32 and sd 4; band is mean +/- 0.8 sd.
        let total: usize = (0..10_000u64)
            .map(|s| FoldAssignment::bernoulli(64, s).unwrap().sizes()[0])
            .sum();
        let mean = total as f64 / 10_000.0;
        assert!((28.8..=35.2).contains(&mean), "mean {mean}");
    }

    #[test]
    fn cv_error_hand_sums() {
        let y = LatticeSignal::from_vec(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let zero = LatticeSignal::from_vec(vec![0.0; 4]).unwrap();
        let folds = FoldAssignment::interleaved(4, 2).unwrap();
        assert_eq!(cv_error(&y, &zero, 0, &folds).unwrap(), 10.0);
        assert_eq!(cv_error(&y, &zero, 1, &folds).unwrap(), 20.0);
        assert_eq!(cv_error(&y, &y, 0, &folds).unwrap(), 0.0);
    }

    #[test]
    fn cv_error_shape_mismatch() {
        let y = LatticeSignal::from_vec(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let short = LatticeSignal::from_vec(vec![0.0; 3]).unwrap();
        let folds = FoldAssignment::interleaved(4, 2).unwrap();
        assert!(cv_error(&y, &short, 0, &folds).is_err());
    }

    #[test]
    fn default_grids() {
        let g = default_grid(256).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.values()[8], 256.0);
        assert_eq!(default_grid(2).unwrap().values(), &[1.0, 2.0]);
        let g = default_grid(300).unwrap();
        assert_eq!(*g.values().last().unwrap(), 512.0);
        assert!(default_grid(1).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(LambdaGrid::new(vec![]).is_err());
        assert!(LambdaGrid::new(vec![1.0, 1.0]).is_err());
        assert!(LambdaGrid::new(vec![0.0, 1.0]).is_err());
        assert!(LambdaGrid::new(vec![0.5, 3.0]).is_ok());
    }

    #[test]
    fn argmin_prefers_first() {
        assert_eq!(argmin_first(&[3.0, 1.0, 1.0, 2.0]), Some(1));
        assert_eq!(argmin_first(&[f64::NAN, 2.0]), Some(1));
        assert_eq!(argmin_first(&[]), None);
    }

    /// Completion fit: the outside-fold mean shrunk by `1/(1+lambda)`.
    struct ShrunkMean;

    impl ShrunkMean {
        fn mean_of(y: &LatticeSignal, idx: &[usize]) -> f64 {
            idx.iter().map(|&i| y.values()[i]).sum::<f64>() / idx.len() as f64
        }
    }

    impl EstimatorFamily for ShrunkMean {
        fn full_fit(&self, y: &LatticeSignal, lambda: f64) -> Result<LatticeSignal> {
            let all: Vec<usize> = (0..y.len()).collect();
            Ok(LatticeSignal::filled(y.shape(), Self::mean_of(y, &all) / (1.0 + lambda)))
        }

        fn completion_fit(
            &self,
            y: &LatticeSignal,
            folds: &FoldAssignment,
            fold: usize,
            lambda: f64,
        ) -> Result<LatticeSignal> {
            let m = Self::mean_of(y, &folds.complement(fold));
            Ok(LatticeSignal::filled(y.shape(), m / (1.0 + lambda)))
        }
    }

    #[test]
    fn fold_selection_matches_exhaustive_scan() {
        let y = LatticeSignal::from_vec(vec![0.3, 0.1, 0.2, 0.4, 0.25, 0.35, 0.15, 0.3]).unwrap();
        let folds = FoldAssignment::interleaved(8, 2).unwrap();
        let grid = LambdaGrid::new(vec![0.01, 0.1, 0.5, 1.0, 4.0]).unwrap();
        for j in 0..2 {
            let sel = select_fold_lambda(&ShrunkMean, &y, &folds, j, &grid).unwrap();
            // brute force
            let outside: Vec<usize> = (0..8).filter(|i| i % 2 != j).collect();
            let m = outside.iter().map(|&i| y.values()[i]).sum::<f64>() / outside.len() as f64;
            let mut best = (f64::INFINITY, 0.0);
            for &lambda in grid.values() {
                let c = m / (1.0 + lambda);
                let err: f64 = (0..8)
                    .filter(|i| i % 2 == j)
                    .map(|i| (y.values()[i] - c).powi(2))
                    .sum();
                if err < best.0 {
                    best = (err, lambda);
                }
            }
            assert_eq!(sel.lambda, best.1);
        }
    }

    #[test]
    fn singleton_grid_selects_it() {
        let y = LatticeSignal::from_vec(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let folds = FoldAssignment::interleaved(4, 2).unwrap();
        let grid = LambdaGrid::new(vec![3.0]).unwrap();
        let sel = select_fold_lambda(&ShrunkMean, &y, &folds, 0, &grid).unwrap();
        assert_eq!(sel.lambda, 3.0);
        let fin = select_final_lambda(&ShrunkMean, &y, &sel.fit, &grid).unwrap();
        assert_eq!(fin.lambda, 3.0);
    }

    /// Every fit is the same constant: all errors tie.
    struct Constant;

    impl EstimatorFamily for Constant {
        fn full_fit(&self, y: &LatticeSignal, _lambda: f64) -> Result<LatticeSignal> {
            Ok(LatticeSignal::filled(y.shape(), 1.0))
        }
        fn completion_fit(
            &self,
            y: &LatticeSignal,
            _folds: &FoldAssignment,
            _fold: usize,
            _lambda: f64,
        ) -> Result<LatticeSignal> {
            Ok(LatticeSignal::filled(y.shape(), 1.0))
        }
    }

    #[test]
    fn ties_go_to_smallest_lambda() {
        let y = LatticeSignal::from_vec(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let folds = FoldAssignment::interleaved(4, 2).unwrap();
        let grid = LambdaGrid::new(vec![2.0, 5.0]).unwrap();
        let sel = select_fold_lambda(&Constant, &y, &folds, 1, &grid).unwrap();
        assert_eq!(sel.lambda, 2.0);
        let res = run_cv(
            &Constant,
            &y,
            &CvConfig {
                folds: FoldStrategy::Interleaved { k: 2 },
                grid,
            },
        )
        .unwrap();
        assert_eq!(res.lambda, 2.0);
        assert!(res.intermediate.values().iter().all(|&v| v == 1.0));
    }

    /// Per-fold constants a, b, c.
    struct PerFoldConstant(Vec<f64>);

    impl EstimatorFamily for PerFoldConstant {
        fn full_fit(&self, y: &LatticeSignal, lambda: f64) -> Result<LatticeSignal> {
            Ok(LatticeSignal::filled(y.shape(), lambda))
        }
        fn completion_fit(
            &self,
            y: &LatticeSignal,
            _folds: &FoldAssignment,
            fold: usize,
            _lambda: f64,
        ) -> Result<LatticeSignal> {
            Ok(LatticeSignal::filled(y.shape(), self.0[fold]))
        }
    }

    #[test]
    fn intermediate_interleaves() {
        let y = LatticeSignal::from_vec(vec![0.0; 6]).unwrap();
        let folds = FoldAssignment::interleaved(6, 3).unwrap();
        let fam = PerFoldConstant(vec![1.0, 2.0, 3.0]);
        let t = assemble_intermediate(&fam, &y, &folds, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(t.values(), &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn final_selection_exhaustive() {
        // full_fit(lambda) is the constant lambda; intermediate (1,2,3,1,2,3)
        // has distance 6(l-2)^2 + 4 minimized at l = 2
        let y = LatticeSignal::from_vec(vec![0.0; 6]).unwrap();
        let t = LatticeSignal::from_vec(vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0]).unwrap();
        let grid = LambdaGrid::new(vec![1.0, 2.0, 4.0]).unwrap();
        let fam = PerFoldConstant(vec![]);
        let fin = select_final_lambda(&fam, &y, &t, &grid).unwrap();
        assert_eq!(fin.distances, vec![10.0, 4.0, 28.0]);
        assert_eq!(fin.lambda, 2.0);
        // exact hit
        let exact = LatticeSignal::filled(y.shape(), 4.0);
        assert_eq!(select_final_lambda(&fam, &y, &exact, &grid).unwrap().lambda, 4.0);
    }

    struct Failing;

    impl EstimatorFamily for Failing {
        fn full_fit(&self, _y: &LatticeSignal, lambda: f64) -> Result<LatticeSignal> {
            Err(Error::NonConvergence {
                solver: "test",
                iterations: 1,
                residual: lambda,
            })
        }
        fn completion_fit(
            &self,
            y: &LatticeSignal,
            _folds: &FoldAssignment,
            _fold: usize,
            lambda: f64,
        ) -> Result<LatticeSignal> {
            self.full_fit(y, lambda)
        }
    }

    #[test]
    fn failures_carry_lambda_and_step() {
        let y = LatticeSignal::from_vec(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let grid = LambdaGrid::new(vec![2.0, 8.0]).unwrap();
        let err = run_cv(
            &Failing,
            &y,
            &CvConfig {
                folds: FoldStrategy::Interleaved { k: 2 },
                grid,
            },
        )
        .unwrap_err();
        match err {
            Error::InStep { step, source } => {
                assert_eq!(step, "per-fold selection");
                assert!(matches!(*source, Error::AtLambda { lambda, .. } if lambda == 2.0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
