//! Prompt-noise sweep: clean prompts are sampled once per tile, then each
//! (flip level, seed) pair corrupts them with [`flip_labels`] (and
//! [`jitter_points`] when a radius is set) before decoding.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{discover_tiles, read_mask, tile_seed, Backends, Context, Tile};
use crate::backend::decode_plan;
use crate::error::{Error, Result};
use crate::geo::read_raster;
use crate::mask::binarize;
use crate::metrics::{compute_metrics_with, confusion, ConfusionMatrix};
use crate::prelabel::make_prelabel;
use crate::prompts::{flip_labels, jitter_points, sample_prompts};

use super::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; zero for a single seed.
    pub std: f64,
}

impl MeanStd {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub cm: ConfusionMatrix,
    pub oa: Option<f64>,
    pub miou: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub flip_p: f64,
    pub jitter_radius: u32,
    pub oa: Option<MeanStd>,
    pub miou: Option<MeanStd>,
    pub f1: Option<MeanStd>,
    pub per_seed: Vec<SeedResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub seed: u64,
    pub backend: String,
    pub tiles: usize,
    /// Tiles contributing to every level.
    pub evaluated: usize,
    pub skipped: usize,
    pub failed: Vec<String>,
    pub levels: Vec<LevelSummary>,
}

/// Seed for the `s`-th noise draw on a tile.
fn noise_seed(global: u64, tile_id: &str, stream: &str, s: u64) -> u64 {
    tile_seed(s, &format!("{global}/{tile_id}/{stream}"))
}

/// Confusion matrices indexed `[level][seed]`, or `None` for a skipped tile.
fn tile_sweep(
    ctx: &Context,
    backends: &Backends,
    tile: &Tile,
    levels: &[f64],
    seeds: &[u64],
    jitter: u32,
) -> Result<Option<Vec<Vec<ConfusionMatrix>>>> {
    let image = read_raster(&tile.image)?;
    let pl = make_prelabel(&image, ctx.glc(), &ctx.cfg.class_map)?;
    if ctx.skip_reason(&pl).is_some() {
        return Ok(None);
    }
    let gt_path = tile.gt.as_ref().ok_or_else(|| Error::Config("noise sweep needs gt_dir".into()))?;
    let (gt, ignore, _) = read_mask(gt_path)?;
    let plan = sample_prompts(&pl, &ctx.sampler_for(&tile.id))?;
    let backend = backends.current();
    let embedding = backend.encode(&image)?;
    let g = ctx.cfg.seed;
    levels
        .iter()
        .map(|&p| {
            seeds
                .iter()
                .map(|&s| {
                    let mut noisy = flip_labels(&plan, p, noise_seed(g, &tile.id, "flip", s));
                    if jitter > 0 {
                        noisy = jitter_points(&noisy, jitter, noise_seed(g, &tile.id, "jitter", s));
                    }
                    let mask = binarize(&decode_plan(backend, &embedding, &noisy)?, backends.threshold());
                    confusion(&mask, &gt, ignore.as_ref())
                })
                .collect()
        })
        .collect::<Result<_>>()
        .map(Some)
}

/// Runs the sweep and writes `ablation.json` and `ablation.csv`.
pub fn ablate_noise(cfg: RunConfig) -> Result<NoiseReport> {
    cfg.validate()?;
    let noise = cfg
        .noise
        .clone()
        .ok_or_else(|| Error::Config("ablate-noise needs a [noise] table".into()))?;
    if cfg.data.gt_dir.is_none() {
        return Err(Error::Config("ablate-noise needs data.gt_dir".into()));
    }
    let seeds = noise.seeds.seeds();
    let mut ctx = Context::new(cfg);
    ctx.load_glc()?;
    let root = &ctx.layout.root;
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let tiles = discover_tiles(&ctx.cfg)?;
    let backends = Backends::build(&ctx.cfg)?;

    let results = super::for_each_tile(&ctx, &tiles, |t| {
        tile_sweep(&ctx, &backends, t, &noise.flip_p, &seeds, noise.jitter_radius)
    })?;

    let mut totals = vec![vec![ConfusionMatrix::default(); seeds.len()]; noise.flip_p.len()];
    let (mut evaluated, mut skipped, mut failed) = (0, 0, Vec::new());
    for (tile, r) in tiles.iter().zip(results) {
        match r {
            Ok(Some(cms)) => {
                evaluated += 1;
                for (tot, lvl) in totals.iter_mut().zip(cms) {
                    for (t, cm) in tot.iter_mut().zip(lvl) {
                        *t = *t + cm;
                    }
                }
            }
            Ok(None) => skipped += 1,
            Err(e) => {
                log::warn!("tile {}: {e}", tile.id);
                failed.push(tile.id.clone());
            }
        }
    }

    let f1_mode = ctx.cfg.f1_mode;
    let levels = noise
        .flip_p
        .iter()
        .zip(totals)
        .map(|(&flip_p, tot)| {
            let per_seed: Vec<SeedResult> = seeds
                .iter()
                .zip(tot)
                .map(|(&seed, cm)| {
                    let m = compute_metrics_with(cm, f1_mode);
                    SeedResult { seed, cm, oa: m.oa, miou: m.miou, f1: m.f1 }
                })
                .collect();
            let stat = |f: fn(&SeedResult) -> Option<f64>| {
                MeanStd::of(&per_seed.iter().filter_map(f).collect::<Vec<_>>())
            };
            LevelSummary {
                flip_p,
                jitter_radius: noise.jitter_radius,
                oa: stat(|r| r.oa),
                miou: stat(|r| r.miou),
                f1: stat(|r| r.f1),
                per_seed,
            }
        })
        .collect();

    let report = NoiseReport {
        seed: ctx.cfg.seed,
        backend: ctx.cfg.backend.kind.as_str().to_owned(),
        tiles: tiles.len(),
        evaluated,
        skipped,
        failed,
        levels,
    };
    write_report(&ctx, &report)?;
    Ok(report)
}

fn write_report(ctx: &Context, report: &NoiseReport) -> Result<()> {
    let json_path = ctx.layout.root.join("ablation.json");
    let mut text = serde_json::to_string_pretty(report).map_err(|e| Error::Report(e.to_string()))?;
    text.push('\n');
    std::fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;

    let csv_path = ctx.layout.root.join("ablation.csv");
    let file = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let rep = |e: csv::Error| Error::Report(format!("{}: {e}", csv_path.display()));
    w.write_record([
        "flip_p", "jitter_radius", "n_seeds", "oa_mean", "oa_std", "miou_mean", "miou_std", "f1_mean", "f1_std",
    ])
    .map_err(rep)?;
    let pair = |m: Option<MeanStd>| match m {
        Some(m) => [m.mean.to_string(), m.std.to_string()],
        None => [String::new(), String::new()],
    };
    for l in &report.levels {
        let [oa_m, oa_s] = pair(l.oa);
        let [mi_m, mi_s] = pair(l.miou);
        let [f1_m, f1_s] = pair(l.f1);
        w.write_record([
            l.flip_p.to_string(),
            l.jitter_radius.to_string(),
            l.per_seed.len().to_string(),
            oa_m,
            oa_s,
            mi_m,
            mi_s,
            f1_m,
            f1_s,
        ])
        .map_err(rep)?;
    }
    let mut inner = w.into_inner().map_err(|e| Error::Report(e.to_string()))?;
    inner.flush().map_err(|e| Error::io(&csv_path, e))
}
