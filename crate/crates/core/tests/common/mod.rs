//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::path::Path;

use cropland_apt::geo::{read_raster, GeoRaster, GridSpec};
use cropland_apt::mask::Mask;
use cropland_apt::metrics::ConfusionMatrix;
use cropland_apt::pipeline::{discover_tiles, tile_seed, RunConfig};
use cropland_apt::prelabel::PreLabel;
use cropland_apt::prompts::{sample_prompts, PromptPoint};

/// Nearest-center resampling by exhaustive search over source columns and
/// rows in world space (squared distance on an axis-aligned lattice
/// separates per axis). North-up grids only; ties go to the larger index.
pub fn brute_resample(src: &GeoRaster, target: &GridSpec, fill: f64) -> Vec<f64> {
    let s = src.geotransform();
    let t = target.geotransform;
    assert!(s.shear_x == 0.0 && s.shear_y == 0.0 && s.pixel_h < 0.0 && s.pixel_w > 0.0);
    let (sw, sh) = (src.width(), src.height());
    let nearest = |v: f64, origin: f64, step: f64, n: usize| -> usize {
        let mut best = (f64::INFINITY, 0usize);
        for i in 0..n {
            let d = ((v - (origin + (i as f64 + 0.5) * step)) / step).abs();
            if d <= best.0 {
                best = (d, i);
            }
        }
        best.1
    };
    let mut out = Vec::with_capacity(target.len());
    for r in 0..target.height {
        for c in 0..target.width {
            let x = t.origin_x + (c as f64 + 0.5) * t.pixel_w + (r as f64 + 0.5) * t.shear_x;
            let y = t.origin_y + (c as f64 + 0.5) * t.shear_y + (r as f64 + 0.5) * t.pixel_h;
            let inside = x >= s.origin_x
                && x < s.origin_x + sw as f64 * s.pixel_w
                && y <= s.origin_y
                && y > s.origin_y + sh as f64 * s.pixel_h;
            if inside {
                let sc = nearest(x, s.origin_x, s.pixel_w, sw);
                let sr = nearest(y, s.origin_y, s.pixel_h, sh);
                out.push(src.get(0, sc, sr));
            } else {
                out.push(fill);
            }
        }
    }
    out
}

/// Nearest-prompt labels by exhaustive search; ties to the smallest index.
pub fn brute_voronoi(w: usize, h: usize, points: &[PromptPoint]) -> Vec<bool> {
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h as i64 {
        for c in 0..w as i64 {
            let mut best: Option<(i64, u32, bool)> = None;
            for p in points {
                let d = (c - p.col as i64).pow(2) + (r - p.row as i64).pow(2);
                let cand = (d, p.index, p.label.is_positive());
                if best.is_none_or(|b| (cand.0, cand.1) < (b.0, b.1)) {
                    best = Some(cand);
                }
            }
            out.push(best.unwrap().2);
        }
    }
    out
}

pub fn brute_confusion(pred: &[bool], gt: &[bool], ignore: Option<&[bool]>) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::default();
    for i in 0..pred.len() {
        if ignore.is_some_and(|m| m[i]) {
            continue;
        }
        match (pred[i], gt[i]) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    cm
}

pub fn mask_bools(m: &Mask) -> Vec<bool> {
    m.data().iter().map(|v| *v == 1).collect()
}

/// Aggregate confusion of the whole pipeline computed with brute-force
/// resampling, remapping, nearest-prompt decoding and counting. Only the
/// prompt sampler is shared with the library.
pub fn brute_pipeline(cfg: &RunConfig) -> ConfusionMatrix {
    let glc = read_raster(&cfg.data.glc_path).unwrap();
    let mut total = ConfusionMatrix::default();
    for tile in discover_tiles(cfg).unwrap() {
        let image = read_raster(&tile.image).unwrap();
        let grid = image.grid();
        let window = brute_resample(&glc, &grid, 255.0);
        let (w, h) = (grid.width, grid.height);
        let in_extent = brute_resample(&glc, &grid, f64::NAN);
        let valid = Mask::new(
            w,
            h,
            in_extent
                .iter()
                .map(|v| (!v.is_nan() && glc.nodata() != Some(*v)) as u8)
                .collect(),
        )
        .unwrap();
        let crop = Mask::new(
            w,
            h,
            window
                .iter()
                .zip(valid.data())
                .map(|(v, ok)| (*ok == 1 && cfg.class_map.is_cropland(*v)) as u8)
                .collect(),
        )
        .unwrap();
        let pl = PreLabel::from_masks(grid, crop, valid).unwrap();
        if pl.coverage == 0.0 || pl.coverage < cfg.coverage_threshold {
            continue;
        }
        let mut sc = cfg.sampler.clone();
        sc.seed = tile_seed(cfg.seed, &tile.id);
        let plan = sample_prompts(&pl, &sc).unwrap();
        let points: Vec<PromptPoint> = plan.points().copied().collect();
        let pred = brute_voronoi(w, h, &points);
        let gt_r = read_raster(tile.gt.as_ref().unwrap()).unwrap();
        let gt: Vec<bool> = gt_r.band(0).iter().map(|v| *v == 1.0).collect();
        total = total + brute_confusion(&pred, &gt, None);
    }
    total
}

/// Every file under `dir`, relative path → bytes, sorted.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
