//! Singular value thresholding for square matrices.
//!
//! Completion fits come from "zero doubling": entries in the held-out fold
//! are set to zero and the rest doubled, which keeps the input unbiased for
//! the signal when each entry lands in a fold with probability 1/2.

use crate::cv::{CvConfig, CvResult, EstimatorFamily, FoldAssignment, FoldStrategy, LambdaGrid};
use crate::error::{Error, Result};
use crate::lattice::{LatticeShape, LatticeSignal};
use crate::linalg::{svd, Matrix, Svd};

#[derive(Debug, Clone)]
pub struct SvtFit {
    pub fit: Matrix,
    /// Indices (into the nonincreasing singular values) that were kept.
    pub retained: Vec<usize>,
    pub rank: usize,
}

/// Keep the singular triples with `s_i > lambda` from an existing SVD.
pub fn threshold(f: &Svd, lambda: f64) -> SvtFit {
    let rank = f.s.iter().take_while(|&&s| s > lambda).count();
    SvtFit {
        fit: f.reconstruct(rank),
        retained: (0..rank).collect(),
        rank,
    }
}

pub fn svt(y: &Matrix, lambda: f64) -> Result<SvtFit> {
    if !y.is_square() {
        return Err(Error::invalid(format!(
            "thresholding needs a square matrix, got {}x{}",
            y.rows(),
            y.cols()
        )));
    }
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::invalid(format!("lambda must be nonnegative, got {lambda}")));
    }
    Ok(threshold(&svd(y)?, lambda))
}

/// Which side of a 0/1 mask is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskSide {
    /// Entries where the mask is 1.
    Ones,
    /// Entries where the mask is 0.
    Zeros,
}

/// `2 Y o W` or `2 Y o (1 - W)`.
pub fn zero_double(y: &Matrix, mask: &Matrix, side: MaskSide) -> Result<Matrix> {
    if y.rows() != mask.rows() || y.cols() != mask.cols() {
        return Err(Error::invalid(format!(
            "mask is {}x{}, matrix is {}x{}",
            mask.rows(),
            mask.cols(),
            y.rows(),
            y.cols()
        )));
    }
    if mask.data().iter().any(|&w| w != 0.0 && w != 1.0) {
        return Err(Error::invalid("mask entries must be 0 or 1"));
    }
    let keep = |w: f64| match side {
        MaskSide::Ones => w == 1.0,
        MaskSide::Zeros => w == 0.0,
    };
    let data = y
        .data()
        .iter()
        .zip(mask.data())
        .map(|(&v, &w)| if keep(w) { 2.0 * v } else { 0.0 })
        .collect();
    Matrix::new(y.rows(), y.cols(), data)
}

/// Mask with ones exactly on `fold`.
pub fn fold_mask(folds: &FoldAssignment, fold: usize, side: usize) -> Result<Matrix> {
    let data = folds.membership().iter().map(|&g| if g == fold { 1.0 } else { 0.0 }).collect();
    Matrix::new(side, side, data)
}

fn as_matrix(y: &LatticeSignal) -> Result<Matrix> {
    let shape = y.shape();
    if shape.dim() != 2 {
        return Err(Error::invalid("thresholding needs a 2-D signal"));
    }
    Matrix::new(shape.side(), shape.side(), y.values().to_vec())
}

fn as_signal(m: Matrix) -> Result<LatticeSignal> {
    LatticeSignal::new(LatticeShape::square(m.rows())?, m.into_data())
}

/// SVT as a CV family; one SVD per input matrix serves the whole grid.
#[derive(Debug, Clone, Copy, Default)]
pub struct SvtFamily;

impl SvtFamily {
    fn completion_input(y: &LatticeSignal, folds: &FoldAssignment, fold: usize) -> Result<Matrix> {
        let m = as_matrix(y)?;
        zero_double(&m, &fold_mask(folds, fold, m.rows())?, MaskSide::Zeros)
    }

    fn path(input: &Matrix, grid: &LambdaGrid) -> Result<Vec<LatticeSignal>> {
        let f = svd(input)?;
        grid.values().iter().map(|&l| as_signal(threshold(&f, l).fit)).collect()
    }
}

impl EstimatorFamily for SvtFamily {
    fn full_fit(&self, y: &LatticeSignal, lambda: f64) -> Result<LatticeSignal> {
        as_signal(svt(&as_matrix(y)?, lambda)?.fit)
    }

    fn completion_fit(
        &self,
        y: &LatticeSignal,
        folds: &FoldAssignment,
        fold: usize,
        lambda: f64,
    ) -> Result<LatticeSignal> {
        as_signal(svt(&Self::completion_input(y, folds, fold)?, lambda)?.fit)
    }

    fn full_path(&self, y: &LatticeSignal, grid: &LambdaGrid) -> Result<Vec<LatticeSignal>> {
        Self::path(&as_matrix(y)?, grid)
    }

    fn completion_path(
        &self,
        y: &LatticeSignal,
        folds: &FoldAssignment,
        fold: usize,
        grid: &LambdaGrid,
    ) -> Result<Vec<LatticeSignal>> {
        Self::path(&Self::completion_input(y, folds, fold)?, grid)
    }
}

/// Entrywise Bernoulli(1/2) folds, zero-doubled completion fits, final
/// threshold of the full matrix.
pub fn cvsvt(y: &Matrix, grid: &LambdaGrid, seed: u64) -> Result<CvResult> {
    if !y.is_square() || y.rows() < 2 {
        return Err(Error::invalid(format!(
            "cross-validated thresholding needs a square matrix of side >= 2, got {}x{}",
            y.rows(),
            y.cols()
        )));
    }
    let signal = as_signal(y.clone())?;
    crate::cv::run_cv(
        &SvtFamily,
        &signal,
        &CvConfig {
            folds: FoldStrategy::Bernoulli { seed },
            grid: grid.clone(),
        },
    )
}
