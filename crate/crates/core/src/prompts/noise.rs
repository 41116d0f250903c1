//! Prompt corruption for robustness ablations.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PromptPlan;

/// Number of labels flipped for a noise level `p` over `n` points:
/// `floor(p * n)`, with a small guard against products such as
/// `0.29 * 100 = 28.999...`.
pub fn flip_count(p: f64, n: usize) -> usize {
    let p = if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) };
    ((p * n as f64 + 1e-9).floor() as usize).min(n)
}

/// Inverts the labels of exactly `flip_count(p, N)` points chosen uniformly
/// without replacement. Positions and indices are unchanged.
pub fn flip_labels(plan: &PromptPlan, p: f64, seed: u64) -> PromptPlan {
    let n = plan.len();
    let k = flip_count(p, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flip = vec![false; n];
    for i in index::sample(&mut rng, n, k) {
        flip[i] = true;
    }

    let mut out = plan.clone();
    for (pt, f) in out.batches.iter_mut().flatten().zip(flip) {
        if f {
            pt.label = pt.label.inverted();
        }
    }
    out
}

/// Moves every point by a uniform integer offset in `[-radius, radius]²`,
/// clamped to the grid.
pub fn jitter_points(plan: &PromptPlan, radius: u32, seed: u64) -> PromptPlan {
    let mut out = plan.clone();
    if radius == 0 {
        return out;
    }
    let r = radius as i64;
    let (max_c, max_r) = (plan.width as i64 - 1, plan.height as i64 - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for pt in out.batches.iter_mut().flatten() {
        let dc = rng.random_range(-r..=r);
        let dr = rng.random_range(-r..=r);
        pt.col = (pt.col as i64 + dc).clamp(0, max_c) as u32;
        pt.row = (pt.row as i64 + dr).clamp(0, max_r) as u32;
    }
    out
}
