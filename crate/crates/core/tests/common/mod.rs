#![allow(dead_code)]

use std::collections::HashMap;

use cvdenoise::lattice::{LatticeShape, LatticeSignal, Rectangle};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Every recursive dyadic partition of `rect`, as leaf lists. Split trees
/// that produce the same leaves are listed once per tree.
pub fn all_rdps(rect: &Rectangle, memo: &mut HashMap<Rectangle, Vec<Vec<Rectangle>>>) -> Vec<Vec<Rectangle>> {
    if let Some(hit) = memo.get(rect) {
        return hit.clone();
    }
    let mut out = vec![vec![rect.clone()]];
    for axis in 0..rect.dim() {
        if let Ok((a, b)) = rect.dyadic_split(axis) {
            let left = all_rdps(&a, memo);
            let right = all_rdps(&b, memo);
            for l in &left {
                for r in &right {
                    let mut leaves = l.clone();
                    leaves.extend(r.iter().cloned());
                    out.push(leaves);
                }
            }
        }
    }
    memo.insert(rect.clone(), out.clone());
    out
}

pub fn rdps_of(shape: &LatticeShape) -> Vec<Vec<Rectangle>> {
    all_rdps(&shape.full_rectangle(), &mut HashMap::new())
}

/// Restricted SSE about leaf means plus `lambda` per leaf, by plain loops.
pub fn partition_cost(y: &LatticeSignal, mask: &[bool], leaves: &[Rectangle], lambda: f64) -> f64 {
    let shape = y.shape();
    let mut total = 0.0;
    for leaf in leaves {
        let mut vals = Vec::new();
        for (p, &observed) in mask.iter().enumerate() {
            if observed && leaf.contains(&shape.coords(p)) {
                vals.push(y.values()[p]);
            }
        }
        if !vals.is_empty() {
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            total += vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        }
        total += lambda;
    }
    total
}

/// Random instance: normal signal with a few level shifts, nonempty mask,
/// log-uniform lambda.
pub fn random_instance(rng: &mut ChaCha8Rng, shape: LatticeShape) -> (LatticeSignal, Vec<bool>, f64) {
    let n = shape.len();
    let shift: f64 = rng.random_range(0.0..5.0);
    let cut = rng.random_range(0..n);
    let noise = normals(rng, n);
    let values: Vec<f64> = (0..n).map(|i| noise[i] + if i >= cut { shift } else { 0.0 }).collect();
    let mut mask: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
    if !mask.iter().any(|&m| m) {
        mask[rng.random_range(0..n)] = true;
    }
    let lambda = 10f64.powf(rng.random_range(-2.0..2.0));
    (LatticeSignal::new(shape, values).unwrap(), mask, lambda)
}
