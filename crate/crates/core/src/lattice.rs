//! Square lattices `{1..n}^d`, axis-aligned rectangles, dyadic splits and
//! recursive dyadic partitions.
//!
//! Coordinates are 0-based and intervals are inclusive on both ends, so the
//! 1-based interval `[1, 5]` is `Interval::new(0, 4)`. Signals are stored
//! with the first coordinate varying fastest: the point `(i_1, ..., i_d)`
//! lives at `i_1 + n * i_2 + ... + n^(d-1) * i_d`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticeShape {
    dim: usize,
    side: usize,
}

impl LatticeShape {
    pub fn new(dim: usize, side: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("lattice dimension must be at least 1"));
        }
        if side == 0 {
            return Err(Error::invalid("lattice side length must be at least 1"));
        }
        let mut total = 1usize;
        for _ in 0..dim {
            total = total
                .checked_mul(side)
                .ok_or_else(|| Error::invalid("lattice size overflows usize"))?;
        }
        Ok(LatticeShape { dim, side })
    }

    pub fn line(n: usize) -> Result<Self> {
        Self::new(1, n)
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(2, n)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Total number of lattice points, `n^d`.
    pub fn len(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn linear_index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dim);
        coords
            .iter()
            .rev()
            .fold(0, |acc, &c| acc * self.side + c)
    }

    pub fn coords(&self, mut index: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.dim);
        for _ in 0..self.dim {
            out.push(index % self.side);
            index /= self.side;
        }
        out
    }

    pub fn full_rectangle(&self) -> Rectangle {
        Rectangle {
            bounds: vec![Interval::new(0, self.side - 1); self.dim],
        }
    }
}

/// Real-valued array over a lattice; the observation, truth and fit objects.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSignal {
    shape: LatticeShape,
    values: Vec<f64>,
}

impl LatticeSignal {
    pub fn new(shape: LatticeShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::invalid(format!(
                "signal has {} values but the lattice has {} points",
                values.len(),
                shape.len()
            )));
        }
        Ok(LatticeSignal { shape, values })
    }

    /// One-dimensional signal of length `values.len()`.
    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        let shape = LatticeShape::line(values.len())?;
        Ok(LatticeSignal { shape, values })
    }

    pub fn zeros(shape: LatticeShape) -> Self {
        LatticeSignal {
            values: vec![0.0; shape.len()],
            shape,
        }
    }

    pub fn filled(shape: LatticeShape, value: f64) -> Self {
        LatticeSignal {
            values: vec![value; shape.len()],
            shape,
        }
    }

    pub fn shape(&self) -> LatticeShape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, coords: &[usize]) -> f64 {
        self.values[self.shape.linear_index(coords)]
    }

    /// Same lattice, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        LatticeSignal::new(self.shape, values)
    }

    pub fn ensure_same_shape(&self, other: &LatticeSignal) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::invalid(format!(
                "shape mismatch: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    /// Squared Euclidean distance over all points.
    pub fn squared_distance(&self, other: &LatticeSignal) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(crate::numeric::squared_distance(&self.values, &other.values))
    }

    /// `(1/N) ||self - other||^2`.
    pub fn mse(&self, other: &LatticeSignal) -> Result<f64> {
        Ok(self.squared_distance(other)? / self.len() as f64)
    }
}

/// Inclusive 0-based integer interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interval {
    pub lo: usize,
    pub hi: usize,
}

impl Interval {
    pub fn new(lo: usize, hi: usize) -> Self {
        assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, x: usize) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Left part gets `ceil(len / 2)` points.
    pub fn dyadic_halves(&self) -> Option<(Interval, Interval)> {
        let len = self.len();
        if len < 2 {
            return None;
        }
        let mid = self.lo + len.div_ceil(2) - 1;
        Some((Interval::new(self.lo, mid), Interval::new(mid + 1, self.hi)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rectangle {
    bounds: Vec<Interval>,
}

impl Rectangle {
    pub fn new(bounds: Vec<Interval>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::invalid("rectangle needs at least one axis"));
        }
        Ok(Rectangle { bounds })
    }

    /// Builds a rectangle from 1-based inclusive `(a, b)` pairs.
    pub fn from_one_based(pairs: &[(usize, usize)]) -> Result<Self> {
        let mut bounds = Vec::with_capacity(pairs.len());
        for &(a, b) in pairs {
            if a == 0 || a > b {
                return Err(Error::invalid(format!("bad interval [{a}, {b}]")));
            }
            bounds.push(Interval::new(a - 1, b - 1));
        }
        Rectangle::new(bounds)
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[Interval] {
        &self.bounds
    }

    pub fn interval(&self, axis: usize) -> Interval {
        self.bounds[axis]
    }

    /// Sum of side lengths.
    pub fn size(&self) -> usize {
        self.bounds.iter().map(Interval::len).sum()
    }

    /// Number of lattice points inside.
    pub fn cell_count(&self) -> usize {
        self.bounds.iter().map(Interval::len).product()
    }

    pub fn contains(&self, coords: &[usize]) -> bool {
        self.bounds.iter().zip(coords).all(|(iv, &c)| iv.contains(c))
    }

    pub fn fits_in(&self, shape: &LatticeShape) -> bool {
        self.dim() == shape.dim() && self.bounds.iter().all(|iv| iv.hi < shape.side())
    }

    pub fn dyadic_split(&self, axis: usize) -> Result<(Rectangle, Rectangle)> {
        if axis >= self.dim() {
            return Err(Error::invalid(format!(
                "axis {axis} out of range for a {}-dimensional rectangle",
                self.dim()
            )));
        }
        let (left, right) = self.bounds[axis]
            .dyadic_halves()
            .ok_or(Error::NoSplit { axis })?;
        let mut a = self.clone();
        let mut b = self.clone();
        a.bounds[axis] = left;
        b.bounds[axis] = right;
        Ok((a, b))
    }

    /// Linear indices of the points inside, first axis fastest.
    pub fn indices(&self, shape: &LatticeShape) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.cell_count());
        let mut coords: Vec<usize> = self.bounds.iter().map(|iv| iv.lo).collect();
        loop {
            out.push(shape.linear_index(&coords));
            let mut axis = 0;
            loop {
                if axis == coords.len() {
                    return out;
                }
                if coords[axis] < self.bounds[axis].hi {
                    coords[axis] += 1;
                    break;
                }
                coords[axis] = self.bounds[axis].lo;
                axis += 1;
            }
        }
    }
}

impl fmt::Display for Rectangle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, iv) in self.bounds.iter().enumerate() {
            if i > 0 {
                write!(f, "x")?;
            }
            write!(f, "[{},{}]", iv.lo + 1, iv.hi + 1)?;
        }
        Ok(())
    }
}

/// Every interval reachable by repeated dyadic halving of `[0, n-1]`,
/// ordered by increasing length and then by left end.
///
/// Children always precede their parent, so index order is a valid
/// bottom-up processing order.
#[derive(Debug, Clone)]
pub struct DyadicIntervals {
    nodes: Vec<IntervalNode>,
    root: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct IntervalNode {
    pub interval: Interval,
    /// Indices of the two halves, if the interval has length >= 2.
    pub children: Option<(usize, usize)>,
}

impl DyadicIntervals {
    pub fn new(side: usize) -> Self {
        let mut raw = Vec::new();
        let mut stack = vec![Interval::new(0, side - 1)];
        while let Some(iv) = stack.pop() {
            raw.push(iv);
            if let Some((a, b)) = iv.dyadic_halves() {
                stack.push(a);
                stack.push(b);
            }
        }
        raw.sort_by_key(|iv| (iv.len(), iv.lo));
        let position = |iv: Interval| -> usize {
            raw.binary_search_by_key(&(iv.len(), iv.lo), |x| (x.len(), x.lo))
                .expect("halves of a dyadic interval are dyadic")
        };
        let nodes: Vec<IntervalNode> = raw
            .iter()
            .map(|&iv| IntervalNode {
                interval: iv,
                children: iv.dyadic_halves().map(|(a, b)| (position(a), position(b))),
            })
            .collect();
        let root = nodes.len() - 1;
        DyadicIntervals { nodes, root }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[IntervalNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &IntervalNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> usize {
        self.root
    }
}

/// All dyadic rectangles of the lattice, each once, sorted by
/// [`Rectangle::size`] and then lexicographically by lower corner.
pub fn enumerate_dyadic_rectangles(shape: &LatticeShape) -> Vec<Rectangle> {
    let axis = DyadicIntervals::new(shape.side());
    let m = axis.len();
    let total = m.pow(shape.dim() as u32);
    let mut rects: Vec<Rectangle> = (0..total)
        .map(|mut id| {
            let mut bounds = Vec::with_capacity(shape.dim());
            for _ in 0..shape.dim() {
                bounds.push(axis.node(id % m).interval);
                id /= m;
            }
            Rectangle { bounds }
        })
        .collect();
    rects.sort_by(|a, b| {
        a.size().cmp(&b.size()).then_with(|| {
            let ka = a.bounds.iter().map(|iv| (iv.lo, iv.hi));
            let kb = b.bounds.iter().map(|iv| (iv.lo, iv.hi));
            ka.cmp(kb)
        })
    });
    rects
}

/// Binary tree encoding of a recursive dyadic partition.
#[derive(Debug, Clone, PartialEq)]
pub enum RdpPartition {
    Leaf(Rectangle),
    Split {
        rect: Rectangle,
        axis: usize,
        children: Box<(RdpPartition, RdpPartition)>,
    },
}

impl RdpPartition {
    pub fn trivial(rect: Rectangle) -> Self {
        RdpPartition::Leaf(rect)
    }

    /// Node splitting `rect` along `axis` with the given sub-partitions.
    /// The children must cover exactly the two dyadic halves.
    pub fn split(rect: Rectangle, axis: usize, left: RdpPartition, right: RdpPartition) -> Result<Self> {
        let (a, b) = rect.dyadic_split(axis)?;
        if left.root() != &a || right.root() != &b {
            return Err(Error::invalid(format!(
                "children {} / {} are not the dyadic halves of {rect} on axis {axis}",
                left.root(),
                right.root()
            )));
        }
        Ok(RdpPartition::Split {
            rect,
            axis,
            children: Box::new((left, right)),
        })
    }

    pub fn root(&self) -> &Rectangle {
        match self {
            RdpPartition::Leaf(r) => r,
            RdpPartition::Split { rect, .. } => rect,
        }
    }

    /// Leaf rectangles, depth-first with the left child first.
    pub fn leaves(&self) -> Vec<&Rectangle> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            match node {
                RdpPartition::Leaf(r) => out.push(r),
                RdpPartition::Split { children, .. } => {
                    stack.push(&children.1);
                    stack.push(&children.0);
                }
            }
        }
        out
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            RdpPartition::Leaf(_) => 1,
            RdpPartition::Split { children, .. } => children.0.leaf_count() + children.1.leaf_count(),
        }
    }

    pub fn internal_count(&self) -> usize {
        match self {
            RdpPartition::Leaf(_) => 0,
            RdpPartition::Split { children, .. } => {
                1 + children.0.internal_count() + children.1.internal_count()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(pairs: &[(usize, usize)]) -> Rectangle {
        Rectangle::from_one_based(pairs).unwrap()
    }

    #[test]
    fn split_odd_interval() {
        let (a, b) = rect(&[(1, 5)]).dyadic_split(0).unwrap();
        assert_eq!(a, rect(&[(1, 3)]));
        assert_eq!(b, rect(&[(4, 5)]));
    }

    #[test]
    fn split_even_interval() {
        let (a, b) = rect(&[(1, 4)]).dyadic_split(0).unwrap();
        assert_eq!(a, rect(&[(1, 2)]));
        assert_eq!(b, rect(&[(3, 4)]));
    }

    #[test]
    fn split_second_axis() {
        let (a, b) = rect(&[(3, 4), (1, 4)]).dyadic_split(1).unwrap();
        assert_eq!(a, rect(&[(3, 4), (1, 2)]));
        assert_eq!(b, rect(&[(3, 4), (3, 4)]));
    }

    #[test]
    fn unit_axis_refuses_split() {
        let err = rect(&[(2, 2), (1, 4)]).dyadic_split(0).unwrap_err();
        assert!(matches!(err, Error::NoSplit { axis: 0 }));
    }

    #[test]
    fn sizes() {
        assert_eq!(rect(&[(1, 4), (1, 4)]).size(), 8);
        assert_eq!(rect(&[(2, 2), (2, 2), (2, 2)]).size(), 3);
        assert_eq!(rect(&[(1, 2), (3, 3)]).size(), 3);
    }

    #[test]
    fn enumerate_line_of_four() {
        let rects = enumerate_dyadic_rectangles(&LatticeShape::line(4).unwrap());
        let mut got: Vec<String> = rects.iter().map(|r| r.to_string()).collect();
        got.sort();
        let mut want = vec!["[1,4]", "[1,2]", "[3,4]", "[1,1]", "[2,2]", "[3,3]", "[4,4]"];
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn enumerate_single_point() {
        let rects = enumerate_dyadic_rectangles(&LatticeShape::line(1).unwrap());
        assert_eq!(rects, vec![rect(&[(1, 1)])]);
    }

    #[test]
    fn enumerate_order_is_by_size() {
        let rects = enumerate_dyadic_rectangles(&LatticeShape::square(5).unwrap());
        assert!(rects.windows(2).all(|w| w[0].size() <= w[1].size()));
        assert_eq!(rects.last().unwrap().size(), 10);
    }

    #[test]
    fn linear_index_first_axis_fastest() {
        let shape = LatticeShape::new(3, 4).unwrap();
        assert_eq!(shape.linear_index(&[1, 0, 0]), 1);
        assert_eq!(shape.linear_index(&[0, 1, 0]), 4);
        assert_eq!(shape.linear_index(&[0, 0, 1]), 16);
        for i in 0..shape.len() {
            assert_eq!(shape.linear_index(&shape.coords(i)), i);
        }
    }

    #[test]
    fn rectangle_indices_match_contains() {
        let shape = LatticeShape::square(6).unwrap();
        let r = rect(&[(2, 4), (3, 6)]);
        let idx = r.indices(&shape);
        assert_eq!(idx.len(), r.cell_count());
        for i in 0..shape.len() {
            assert_eq!(idx.contains(&i), r.contains(&shape.coords(i)));
        }
    }

    #[test]
    fn partition_leaves() {
        let root = rect(&[(1, 4)]);
        let trivial = RdpPartition::trivial(root.clone());
        assert_eq!(trivial.leaves(), vec![&root]);

        let p = RdpPartition::split(
            root,
            0,
            RdpPartition::trivial(rect(&[(1, 2)])),
            RdpPartition::trivial(rect(&[(3, 4)])),
        )
        .unwrap();
        assert_eq!(p.leaves(), vec![&rect(&[(1, 2)]), &rect(&[(3, 4)])]);
        assert_eq!(p.leaf_count(), p.internal_count() + 1);
    }

    #[test]
    fn partition_rejects_wrong_children() {
        let err = RdpPartition::split(
            rect(&[(1, 4)]),
            0,
            RdpPartition::trivial(rect(&[(1, 3)])),
            RdpPartition::trivial(rect(&[(4, 4)])),
        );
        assert!(err.is_err());
    }

    #[test]
    fn signal_shape_checked() {
        let shape = LatticeShape::square(3).unwrap();
        assert!(LatticeSignal::new(shape, vec![0.0; 8]).is_err());
        assert!(LatticeSignal::new(shape, vec![0.0; 9]).is_ok());
    }
}
