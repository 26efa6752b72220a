//! Dyadic CART: least squares over piecewise-constant signals on recursive
//! dyadic partitions, penalized by `lambda` per leaf.
//!
//! The solver is the bottom-up dynamic program over all dyadic rectangles.
//! Rectangles are visited in increasing [`Rectangle::size`] order (ties by
//! lower corner), so both halves of any split are finished before their
//! parent. For each rectangle `R` it keeps
//!
//! * `SUM(R)`, `SUMSQ(R)`, `COUNT(R)` over `R ∩ I`, in double-double precision,
//! * `OPT(R) = min(SSE(R ∩ I) + lambda, min_axis OPT(R1) + OPT(R2))`,
//! * `SPLIT(R)`, the minimizing axis or none.
//!
//! On ties the no-split option wins, then the lowest axis.
//!
//! The completion variant only sees `y` on a subset `I`. A leaf that meets
//! `I` is fitted by the mean of `y` over that intersection; a leaf that
//! misses `I` gets the mean of `y` over all of `I`.

use rayon::prelude::*;

use crate::cv::{CvConfig, CvResult, EstimatorFamily, FoldAssignment, FoldStrategy, LambdaGrid};
use crate::error::{Error, Result};
use crate::lattice::{DyadicIntervals, Interval, LatticeShape, LatticeSignal, RdpPartition, Rectangle};
use crate::numeric::{compensated_sum, DoubleDouble};

#[derive(Debug, Clone)]
pub struct DcartFit {
    pub fit: LatticeSignal,
    pub partition: RdpPartition,
    /// `OPT` of the whole lattice: restricted SSE plus `lambda` per leaf.
    pub objective: f64,
    pub leaf_count: usize,
    /// Rectangles visited by the dynamic program.
    pub visits: usize,
    /// Candidate costs compared, at most `d + 1` per rectangle.
    pub work: usize,
}

/// Dyadic rectangles of one lattice shape, addressed by mixed-radix ids
/// over the per-axis dyadic intervals.
#[derive(Debug, Clone)]
pub struct DyadicIndex {
    shape: LatticeShape,
    axis: DyadicIntervals,
    strides: Vec<usize>,
    order: Vec<usize>,
}

impl DyadicIndex {
    pub fn new(shape: LatticeShape) -> Self {
        let axis = DyadicIntervals::new(shape.side());
        let m = axis.len();
        let strides: Vec<usize> = (0..shape.dim()).map(|k| m.pow(k as u32)).collect();
        let total = m.pow(shape.dim() as u32);
        let mut order: Vec<usize> = (0..total).collect();
        let key = |id: usize| -> (usize, Vec<usize>) {
            let mut size = 0;
            let mut corner = Vec::with_capacity(shape.dim());
            let mut rest = id;
            for _ in 0..shape.dim() {
                let iv = axis.node(rest % m).interval;
                size += iv.len();
                corner.push(iv.lo);
                rest /= m;
            }
            (size, corner)
        };
        order.sort_by_cached_key(|&id| key(id));
        DyadicIndex {
            shape,
            axis,
            strides,
            order,
        }
    }

    pub fn shape(&self) -> LatticeShape {
        self.shape
    }

    pub fn rect_count(&self) -> usize {
        self.order.len()
    }

    fn interval_id(&self, rect: usize, axis: usize) -> usize {
        (rect / self.strides[axis]) % self.axis.len()
    }

    fn interval(&self, rect: usize, axis: usize) -> Interval {
        self.axis.node(self.interval_id(rect, axis)).interval
    }

    /// Ids of the two halves of `rect` split on `axis`, if that side is >= 2.
    fn children(&self, rect: usize, axis: usize) -> Option<(usize, usize)> {
        let iid = self.interval_id(rect, axis);
        self.axis.node(iid).children.map(|(a, b)| {
            let base = rect - iid * self.strides[axis];
            (base + a * self.strides[axis], base + b * self.strides[axis])
        })
    }

    fn root(&self) -> usize {
        let r = self.axis.root();
        self.strides.iter().map(|s| r * s).sum()
    }

    fn rectangle(&self, rect: usize) -> Rectangle {
        Rectangle::new((0..self.shape.dim()).map(|k| self.interval(rect, k)).collect())
            .expect("dimension >= 1")
    }

    /// Lattice point of a rectangle whose sides all have length 1.
    fn unit_point(&self, rect: usize) -> usize {
        let coords: Vec<usize> = (0..self.shape.dim()).map(|k| self.interval(rect, k).lo).collect();
        self.shape.linear_index(&coords)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct RectStats {
    count: usize,
    sum: DoubleDouble,
    sumsq: DoubleDouble,
}

impl RectStats {
    fn merge(a: &RectStats, b: &RectStats) -> RectStats {
        RectStats {
            count: a.count + b.count,
            sum: a.sum.add(b.sum),
            sumsq: a.sumsq.add(b.sumsq),
        }
    }

    /// Within-rectangle SSE over `R ∩ I`; zero when the intersection is empty.
    fn sse(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let centered = self.sumsq.sub(self.sum.mul(self.sum).div_f64(self.count as f64));
        centered.to_f64().max(0.0)
    }

    fn mean(&self) -> f64 {
        self.sum.div_f64(self.count as f64).to_f64()
    }
}

/// Sufficient statistics of `y` restricted to `I`, reusable across `lambda`.
#[derive(Debug, Clone)]
pub struct DcartSolver {
    index: DyadicIndex,
    stats: Vec<RectStats>,
    subset_mean: f64,
}

impl DcartSolver {
    /// `subset[i]` marks membership of point `i` in `I`; `None` means all points.
    pub fn new(y: &LatticeSignal, subset: Option<&[bool]>) -> Result<Self> {
        Self::with_index(DyadicIndex::new(y.shape()), y, subset)
    }

    pub fn with_index(index: DyadicIndex, y: &LatticeSignal, subset: Option<&[bool]>) -> Result<Self> {
        if index.shape() != y.shape() {
            return Err(Error::invalid("dyadic index built for a different lattice"));
        }
        if let Some(mask) = subset {
            if mask.len() != y.len() {
                return Err(Error::invalid(format!(
                    "subset mask has {} entries, signal has {}",
                    mask.len(),
                    y.len()
                )));
            }
        }
        let inside = |i: usize| subset.is_none_or(|m| m[i]);
        let mut stats = vec![RectStats::default(); index.rect_count()];
        let d = index.shape().dim();
        for &rect in &index.order {
            let split = (0..d).find_map(|k| index.children(rect, k));
            stats[rect] = match split {
                Some((a, b)) => RectStats::merge(&stats[a], &stats[b]),
                None => {
                    let p = index.unit_point(rect);
                    if inside(p) {
                        let v = y.values()[p];
                        RectStats {
                            count: 1,
                            sum: DoubleDouble::from_f64(v),
                            sumsq: DoubleDouble::square(v),
                        }
                    } else {
                        RectStats::default()
                    }
                }
            };
        }
        let whole = stats[index.root()];
        if whole.count == 0 {
            return Err(Error::invalid("index subset I is empty"));
        }
        Ok(DcartSolver {
            subset_mean: whole.mean(),
            index,
            stats,
        })
    }

    pub fn solve(&self, lambda: f64) -> Result<DcartFit> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
        }
        let index = &self.index;
        let d = index.shape().dim();
        let total = index.rect_count();
        let mut opt = vec![0.0f64; total];
        let mut split: Vec<Option<u8>> = vec![None; total];
        let mut visits = 0usize;
        let mut work = 0usize;
        for &rect in &index.order {
            visits += 1;
            work += 1;
            let mut best = self.stats[rect].sse() + lambda;
            let mut best_axis = None;
            for k in 0..d {
                if let Some((a, b)) = index.children(rect, k) {
                    work += 1;
                    let cost = opt[a] + opt[b];
                    if cost < best {
                        best = cost;
                        best_axis = Some(k as u8);
                    }
                }
            }
            opt[rect] = best;
            split[rect] = best_axis;
        }

        let root = index.root();
        let partition = self.build_partition(root, &split);
        let mut values = vec![0.0; index.shape().len()];
        for leaf in partition.leaves() {
            let value = self.leaf_value(leaf);
            for p in leaf.indices(&index.shape()) {
                values[p] = value;
            }
        }
        Ok(DcartFit {
            fit: LatticeSignal::new(index.shape(), values)?,
            leaf_count: partition.leaf_count(),
            partition,
            objective: opt[root],
            visits,
            work,
        })
    }

    fn build_partition(&self, rect: usize, split: &[Option<u8>]) -> RdpPartition {
        let r = self.index.rectangle(rect);
        match split[rect] {
            None => RdpPartition::Leaf(r),
            Some(axis) => {
                let axis = axis as usize;
                let (a, b) = self.index.children(rect, axis).expect("recorded split is valid");
                RdpPartition::Split {
                    rect: r,
                    axis,
                    children: Box::new((self.build_partition(a, split), self.build_partition(b, split))),
                }
            }
        }
    }

    fn leaf_value(&self, leaf: &Rectangle) -> f64 {
        let m = self.index.axis.len();
        let id: usize = leaf
            .bounds()
            .iter()
            .enumerate()
            .map(|(k, iv)| {
                let iid = self
                    .index
                    .axis
                    .nodes()
                    .binary_search_by_key(&(iv.len(), iv.lo), |n| (n.interval.len(), n.interval.lo))
                    .expect("leaf is dyadic");
                iid * m.pow(k as u32)
            })
            .sum();
        let s = &self.stats[id];
        if s.count > 0 {
            s.mean()
        } else {
            self.subset_mean
        }
    }
}

/// Completion fit from `y` restricted to `subset` (true = observed).
pub fn solve_completion(y: &LatticeSignal, subset: &[bool], lambda: f64) -> Result<DcartFit> {
    DcartSolver::new(y, Some(subset))?.solve(lambda)
}

pub fn solve_full(y: &LatticeSignal, lambda: f64) -> Result<DcartFit> {
    DcartSolver::new(y, None)?.solve(lambda)
}

/// Restricted SSE of the partition's leaf means plus `lambda` per leaf,
/// recomputed directly from `y` (two-pass, no dynamic-program state).
pub fn objective(y: &LatticeSignal, subset: Option<&[bool]>, partition: &RdpPartition, lambda: f64) -> f64 {
    let shape = y.shape();
    let leaves = partition.leaves();
    let sse = compensated_sum(leaves.iter().map(|leaf| {
        let vals: Vec<f64> = leaf
            .indices(&shape)
            .into_iter()
            .filter(|&p| subset.is_none_or(|m| m[p]))
            .map(|p| y.values()[p])
            .collect();
        if vals.is_empty() {
            return 0.0;
        }
        let mean = compensated_sum(vals.iter().copied()) / vals.len() as f64;
        compensated_sum(vals.iter().map(|v| (v - mean) * (v - mean)))
    }));
    sse + lambda * leaves.len() as f64
}

/// Dyadic CART as a CV family; completion fits see `y` outside the fold.
#[derive(Debug, Clone, Copy, Default)]
pub struct DcartFamily;

impl DcartFamily {
    fn solver(y: &LatticeSignal, folds: Option<(&FoldAssignment, usize)>) -> Result<DcartSolver> {
        match folds {
            None => DcartSolver::new(y, None),
            Some((f, j)) => {
                let outside: Vec<bool> = f.membership().iter().map(|&g| g != j).collect();
                DcartSolver::new(y, Some(&outside))
            }
        }
    }

    fn path(solver: &DcartSolver, grid: &LambdaGrid) -> Result<Vec<LatticeSignal>> {
        let fits: Vec<Result<LatticeSignal>> = grid
            .values()
            .par_iter()
            .map(|&lambda| solver.solve(lambda).map(|f| f.fit))
            .collect();
        fits.into_iter()
            .zip(grid.values())
            .map(|(r, &l)| r.map_err(|e| e.at_lambda(l)))
            .collect()
    }
}

impl EstimatorFamily for DcartFamily {
    fn full_fit(&self, y: &LatticeSignal, lambda: f64) -> Result<LatticeSignal> {
        Ok(solve_full(y, lambda)?.fit)
    }

    fn completion_fit(
        &self,
        y: &LatticeSignal,
        folds: &FoldAssignment,
        fold: usize,
        lambda: f64,
    ) -> Result<LatticeSignal> {
        Ok(Self::solver(y, Some((folds, fold)))?.solve(lambda)?.fit)
    }

    fn full_path(&self, y: &LatticeSignal, grid: &LambdaGrid) -> Result<Vec<LatticeSignal>> {
        Self::path(&Self::solver(y, None)?, grid)
    }

    fn completion_path(
        &self,
        y: &LatticeSignal,
        folds: &FoldAssignment,
        fold: usize,
        grid: &LambdaGrid,
    ) -> Result<Vec<LatticeSignal>> {
        Self::path(&Self::solver(y, Some((folds, fold)))?, grid)
    }
}

/// Two random folds, dyadic CART completion fits, final refit on all data.
pub fn cvdcart(y: &LatticeSignal, grid: &LambdaGrid, seed: u64) -> Result<CvResult> {
    if y.len() < 4 {
        return Err(Error::invalid(format!(
            "cross-validated dyadic CART needs at least 4 points, got {}",
            y.len()
        )));
    }
    crate::cv::run_cv(
        &DcartFamily,
        y,
        &CvConfig {
            folds: FoldStrategy::Bernoulli { seed },
            grid: grid.clone(),
        },
    )
}
