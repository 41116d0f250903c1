use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{partition_batches, AbsentClassPolicy, Label, PromptPlan, PromptPoint, SamplerConfig};
use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::prelabel::PreLabel;

/// Stratified sampling of balanced positive/negative prompts.
///
/// For each class a `ceil(sqrt(n))` square grid of strata is laid over the
/// image. Strata holding class pixels are visited in row-major order, each
/// visit drawing one uniformly random remaining pixel, cycling until `n`
/// points are drawn or the class runs out of pixels. The result is fully
/// determined by `(prelabel, config)`.
pub fn sample_prompts(prelabel: &PreLabel, config: &SamplerConfig) -> Result<PromptPlan> {
    config.validate()?;
    if prelabel.valid.count_ones() == 0 {
        return Err(Error::NoCoverage);
    }
    let (w, h) = (prelabel.grid.width, prelabel.grid.height);
    let positive = prelabel.mask.clone();
    let negative = Mask::from_fn(w, h, |c, r| prelabel.valid.get(c, r) && !prelabel.mask.get(c, r));

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut warnings = Vec::new();
    let mut points = Vec::with_capacity(config.n_pos + config.n_neg);

    for (label, class_mask, n) in [
        (Label::Positive, &positive, config.n_pos),
        (Label::Negative, &negative, config.n_neg),
    ] {
        if n == 0 {
            continue;
        }
        let candidates = match candidate_mask(class_mask, config) {
            Some(m) => m,
            None => match config.absent_class_policy {
                AbsentClassPolicy::Error => return Err(Error::AbsentClass(label)),
                AbsentClassPolicy::SkipClass => {
                    let msg = format!("{label} class absent; no {label} prompts emitted");
                    warn!("{msg}");
                    warnings.push(msg);
                    continue;
                }
            },
        };
        let drawn = stratified_draw(&candidates, n, &mut rng);
        if drawn.len() < n {
            let msg = format!("only {} {label} pixels available, requested {n}", drawn.len());
            warn!("{msg}");
            warnings.push(msg);
        }
        for (col, row) in drawn {
            let index = points.len() as u32;
            points.push(PromptPoint { col, row, label, index });
        }
    }

    Ok(PromptPlan {
        batches: partition_batches(&points, config.n_batches),
        seed: config.seed,
        config: config.clone(),
        width: w,
        height: h,
        warnings,
    })
}

/// The eroded mask when it keeps enough pixels, else the raw mask, else
/// `None` when the class is absent.
fn candidate_mask(mask: &Mask, config: &SamplerConfig) -> Option<Mask> {
    let min = config.min_class_pixels.max(1);
    if config.edge_margin > 0 {
        let eroded = erode(mask, config.edge_margin);
        if eroded.count_ones() >= min {
            return Some(eroded);
        }
    }
    (mask.count_ones() >= min).then(|| mask.clone())
}

fn stratified_draw(mask: &Mask, n: usize, rng: &mut ChaCha8Rng) -> Vec<(u32, u32)> {
    let (w, h) = (mask.width(), mask.height());
    let g = (n as f64).sqrt().ceil() as usize;
    let g = g.max(1);
    let mut pools: Vec<Vec<(u32, u32)>> = vec![Vec::new(); g * g];
    for row in 0..h {
        let sy = row * g / h;
        for col in 0..w {
            if mask.get(col, row) {
                let sx = col * g / w;
                pools[sy * g + sx].push((col as u32, row as u32));
            }
        }
    }
    pools.retain(|p| !p.is_empty());

    let mut out = Vec::with_capacity(n);
    while out.len() < n && pools.iter().any(|p| !p.is_empty()) {
        for pool in pools.iter_mut() {
            if out.len() == n {
                break;
            }
            if pool.is_empty() {
                continue;
            }
            let j = rng.random_range(0..pool.len());
            out.push(pool.swap_remove(j));
        }
    }
    out
}

/// Binary erosion with a `(2r+1)²` square; neighbors outside the grid do not
/// erode.
pub fn erode(mask: &Mask, radius: usize) -> Mask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width(), mask.height());
    let horizontal = Mask::from_fn(w, h, |c, r| {
        let lo = c.saturating_sub(radius);
        let hi = (c + radius).min(w - 1);
        (lo..=hi).all(|x| mask.get(x, r))
    });
    Mask::from_fn(w, h, |c, r| {
        let lo = r.saturating_sub(radius);
        let hi = (r + radius).min(h - 1);
        (lo..=hi).all(|y| horizontal.get(c, y))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{CrsId, GeoTransform, GridSpec};

    fn prelabel(mask: Mask) -> PreLabel {
        let grid = GridSpec::new(
            mask.width(),
            mask.height(),
            GeoTransform::north_up(0.0, 0.0, 0.5),
            CrsId::new(32650).unwrap(),
        )
        .unwrap();
        let valid = Mask::from_fn(mask.width(), mask.height(), |_, _| true);
        PreLabel::from_masks(grid, mask, valid).unwrap()
    }

    #[test]
    fn all_cropland_skips_negatives() {
        let pl = prelabel(Mask::from_fn(8, 8, |_, _| true));
        let cfg = SamplerConfig { n_pos: 4, n_neg: 4, ..Default::default() };
        let plan = sample_prompts(&pl, &cfg).unwrap();
        assert_eq!(plan.count(Label::Positive), 4);
        assert_eq!(plan.count(Label::Negative), 0);
        assert_eq!(plan.warnings.len(), 1);
    }

    #[test]
    fn absent_class_error_policy() {
        let pl = prelabel(Mask::from_fn(8, 8, |_, _| true));
        let cfg = SamplerConfig {
            absent_class_policy: AbsentClassPolicy::Error,
            ..Default::default()
        };
        assert!(matches!(sample_prompts(&pl, &cfg), Err(Error::AbsentClass(Label::Negative))));
    }

    #[test]
    fn checkerboard_membership() {
        let mask = Mask::from_fn(6, 6, |c, r| (c + r) % 2 == 0);
        let pl = prelabel(mask.clone());
        for seed in 0..20 {
            let cfg = SamplerConfig { n_pos: 2, n_neg: 2, seed, ..Default::default() };
            let plan = sample_prompts(&pl, &cfg).unwrap();
            for p in plan.points() {
                assert_eq!(mask.get(p.col as usize, p.row as usize), p.label.is_positive());
            }
        }
    }

    #[test]
    fn defaults_give_three_batches_of_ten_and_ten() {
        let pl = prelabel(Mask::from_fn(64, 64, |c, _| c < 32));
        let plan = sample_prompts(&pl, &SamplerConfig::default()).unwrap();
        assert_eq!(plan.batches.len(), 3);
        for b in &plan.batches {
            assert_eq!(b.iter().filter(|p| p.label.is_positive()).count(), 10);
            assert_eq!(b.iter().filter(|p| !p.label.is_positive()).count(), 10);
        }
    }

    #[test]
    fn no_coverage() {
        let mask = Mask::zeros(4, 4);
        let grid = GridSpec::new(4, 4, GeoTransform::north_up(0.0, 0.0, 1.0), CrsId::new(32650).unwrap()).unwrap();
        let pl = PreLabel::from_masks(grid, mask.clone(), mask).unwrap();
        assert!(matches!(sample_prompts(&pl, &SamplerConfig::default()), Err(Error::NoCoverage)));
    }

    #[test]
    fn small_class_is_exhausted_without_duplicates() {
        let pl = prelabel(Mask::from_fn(4, 4, |c, r| c == 0 && r < 3));
        let plan = sample_prompts(&pl, &SamplerConfig::default()).unwrap();
        assert_eq!(plan.count(Label::Positive), 3);
        assert_eq!(plan.count(Label::Negative), 13);
        assert_eq!(plan.warnings.len(), 2);
    }

    #[test]
    fn erosion_keeps_points_off_boundaries() {
        let mask = Mask::from_fn(32, 32, |c, _| c < 16);
        let pl = prelabel(mask);
        let cfg = SamplerConfig { edge_margin: 3, ..Default::default() };
        let plan = sample_prompts(&pl, &cfg).unwrap();
        for p in plan.points() {
            match p.label {
                Label::Positive => assert!(p.col <= 12, "{p:?}"),
                Label::Negative => assert!(p.col >= 19, "{p:?}"),
            }
        }
    }

    #[test]
    fn erosion_falls_back_when_it_empties_the_class() {
        let pl = prelabel(Mask::from_fn(16, 16, |c, _| c == 3));
        let cfg = SamplerConfig { n_pos: 5, n_neg: 0, edge_margin: 2, ..Default::default() };
        let plan = sample_prompts(&pl, &cfg).unwrap();
        assert_eq!(plan.count(Label::Positive), 5);
        assert!(plan.points().all(|p| p.col == 3));
    }

    #[test]
    fn erode_square_kernel() {
        let mask = Mask::from_fn(5, 5, |c, r| (1..4).contains(&c) && (1..4).contains(&r));
        let e = erode(&mask, 1);
        assert_eq!(e.count_ones(), 1);
        assert!(e.get(2, 2));
        // borders of the grid do not erode
        let full = Mask::from_fn(3, 3, |_, _| true);
        assert_eq!(erode(&full, 1).count_ones(), 9);
    }
}
