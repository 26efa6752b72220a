//! Cross-validated denoising of signals on regular lattices.
//!
//! Every estimator family plugs into the same two-stage tuning procedure in
//! [`cv`]: per-fold penalty selection from completion fits, then a final
//! penalty chosen by distance to the spliced intermediate estimate.

pub mod cv;
pub mod dcart;
pub mod error;
pub mod io;
pub mod lasso;
pub mod lattice;
pub mod linalg;
pub mod numeric;
pub mod rng;
pub mod simbench;
pub mod svt;
pub mod tfilter;

pub use cv::{CvConfig, CvResult, EstimatorFamily, FoldAssignment, FoldStrategy, LambdaGrid};
pub use error::{Error, Result};
pub use lattice::{Interval, LatticeShape, LatticeSignal, RdpPartition, Rectangle};
