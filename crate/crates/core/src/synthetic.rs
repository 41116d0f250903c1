//! Deterministic synthetic dataset: field-parcel ground truth at high
//! resolution, RGB imagery derived from it, and a land-cover mosaic obtained
//! by majority-coarsening the ground truth and corrupting a fraction of its
//! cells.

use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geo::{write_raster, CrsId, GeoRaster, GeoTransform, GridSpec, SampleType};
use crate::mask::Mask;
use crate::pipeline::{DataPaths, NoiseConfig, RunConfig};
use crate::prelabel::WORLDCOVER_CROPLAND;

/// WorldCover classes other than cropland used for non-cropland cells.
pub const NONCROP_CODES: [u8; 7] = [10, 20, 30, 50, 60, 80, 90];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub tiles_x: usize,
    pub tiles_y: usize,
    /// Tile side in pixels; must be a multiple of `factor`.
    pub tile_size: usize,
    /// Land-cover cell size in image pixels.
    pub factor: usize,
    /// Image pixel size in CRS units.
    pub pixel_size: f64,
    /// Fraction of land-cover cells whose cropland status is inverted.
    pub corruption: f64,
    pub parcels_per_tile: usize,
    pub crop_fraction: f64,
    pub seed: u64,
    pub origin: (f64, f64),
    pub crs: u32,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            tiles_x: 4,
            tiles_y: 2,
            tile_size: 240,
            factor: 20,
            pixel_size: 0.5,
            corruption: 0.1,
            parcels_per_tile: 6,
            crop_fraction: 0.5,
            seed: 0,
            origin: (500_000.0, 3_000_000.0),
            crs: 32650,
        }
    }
}

pub struct SyntheticTile {
    pub id: String,
    pub image: GeoRaster,
    pub gt: GeoRaster,
}

pub struct SyntheticData {
    pub spec: SyntheticSpec,
    /// Ground truth over the whole mosaic.
    pub gt: Mask,
    pub glc: GeoRaster,
    pub tiles: Vec<SyntheticTile>,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub root: PathBuf,
    pub image_dir: PathBuf,
    pub gt_dir: PathBuf,
    pub glc_path: PathBuf,
    pub tile_ids: Vec<String>,
}

pub fn tile_id(tx: usize, ty: usize, tiles_x: usize) -> String {
    format!("tile_{:02}", ty * tiles_x + tx)
}

/// Builds the dataset in memory.
pub fn build(spec: &SyntheticSpec) -> Result<SyntheticData> {
    if spec.tiles_x == 0 || spec.tiles_y == 0 || spec.factor == 0 || spec.tile_size == 0 {
        return Err(Error::Config("synthetic dataset dimensions must be positive".into()));
    }
    if !spec.tile_size.is_multiple_of(spec.factor) {
        return Err(Error::Config("tile_size must be a multiple of factor".into()));
    }
    if !(0.0..=1.0).contains(&spec.corruption) || !(0.0..=1.0).contains(&spec.crop_fraction) {
        return Err(Error::Config("corruption and crop_fraction must lie in [0, 1]".into()));
    }
    let crs = CrsId::new(spec.crs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h) = (spec.tiles_x * spec.tile_size, spec.tiles_y * spec.tile_size);

    // Voronoi parcels, each wholly cropland or not
    let n_parcels = (spec.parcels_per_tile * spec.tiles_x * spec.tiles_y).max(1);
    let parcels: Vec<(i64, i64, bool, i16)> = (0..n_parcels)
        .map(|_| {
            (
                rng.random_range(0..w as i64),
                rng.random_range(0..h as i64),
                rng.random_bool(spec.crop_fraction),
                rng.random_range(-25..=25),
            )
        })
        .collect();
    let mut owner = vec![0usize; w * h];
    for r in 0..h {
        for c in 0..w {
            let (mut best, mut bi) = (i64::MAX, 0);
            for (i, (pc, pr, _, _)) in parcels.iter().enumerate() {
                let d = (c as i64 - pc).pow(2) + (r as i64 - pr).pow(2);
                if d < best {
                    best = d;
                    bi = i;
                }
            }
            owner[r * w + c] = bi;
        }
    }
    let gt = Mask::new(w, h, owner.iter().map(|&o| parcels[o].2 as u8).collect())?;

    // land cover: majority per block (ties count as cropland), then corruption
    let f = spec.factor;
    let (cw, ch) = (w / f, h / f);
    let mut crop_cell: Vec<bool> = (0..cw * ch)
        .map(|i| {
            let (cx, cy) = (i % cw, i / cw);
            let ones: usize = (cy * f..(cy + 1) * f)
                .map(|r| (cx * f..(cx + 1) * f).filter(|&c| gt.get(c, r)).count())
                .sum();
            2 * ones >= f * f
        })
        .collect();
    let n_corrupt = ((spec.corruption * (cw * ch) as f64) + 1e-9).floor() as usize;
    for i in index::sample(&mut rng, cw * ch, n_corrupt) {
        crop_cell[i] = !crop_cell[i];
    }
    let glc_data: Vec<f64> = crop_cell
        .iter()
        .map(|&c| {
            let other = NONCROP_CODES[rng.random_range(0..NONCROP_CODES.len())];
            if c {
                WORLDCOVER_CROPLAND as f64
            } else {
                other as f64
            }
        })
        .collect();
    let glc_pixel = spec.pixel_size * f as f64;
    let glc_grid = GridSpec::new(cw, ch, GeoTransform::north_up(spec.origin.0, spec.origin.1, glc_pixel), crs)?;
    let glc = GeoRaster::new(glc_grid, 1, glc_data, SampleType::U8, Some(0.0))?;

    // imagery: class colour, per-parcel brightness, pixel noise
    let mut img = vec![[0f64; 3]; w * h];
    for (i, px) in img.iter_mut().enumerate() {
        let (_, _, crop, shade) = parcels[owner[i]];
        let base: [i16; 3] = if crop { [70, 150, 60] } else { [150, 120, 95] };
        for (b, v) in px.iter_mut().enumerate() {
            let noise: i16 = rng.random_range(-12..=12);
            *v = (base[b] + shade + noise).clamp(0, 255) as f64;
        }
    }

    let ts = spec.tile_size;
    let mut tiles = Vec::with_capacity(spec.tiles_x * spec.tiles_y);
    for ty in 0..spec.tiles_y {
        for tx in 0..spec.tiles_x {
            let gt_tf = GeoTransform::north_up(
                spec.origin.0 + (tx * ts) as f64 * spec.pixel_size,
                spec.origin.1 - (ty * ts) as f64 * spec.pixel_size,
                spec.pixel_size,
            );
            let grid = GridSpec::new(ts, ts, gt_tf, crs)?;
            let at = |c: usize, r: usize| (ty * ts + r) * w + tx * ts + c;
            let bands: Vec<f64> = (0..3)
                .flat_map(|b| (0..ts * ts).map(move |i| (b, i)))
                .map(|(b, i)| img[at(i % ts, i / ts)][b])
                .collect();
            let gt_tile: Vec<f64> = (0..ts * ts).map(|i| gt.data()[at(i % ts, i / ts)] as f64).collect();
            tiles.push(SyntheticTile {
                id: tile_id(tx, ty, spec.tiles_x),
                image: GeoRaster::new(grid, 3, bands, SampleType::U8, None)?,
                gt: GeoRaster::new(grid, 1, gt_tile, SampleType::U8, None)?,
            });
        }
    }
    Ok(SyntheticData {
        spec: spec.clone(),
        gt,
        glc,
        tiles,
    })
}

/// Writes `images/`, `gt/` and `glc.tif` under `root`.
pub fn generate(spec: &SyntheticSpec, root: impl AsRef<Path>) -> Result<SyntheticDataset> {
    let data = build(spec)?;
    write(&data, root)
}

pub fn write(data: &SyntheticData, root: impl AsRef<Path>) -> Result<SyntheticDataset> {
    let root = root.as_ref().to_path_buf();
    let image_dir = root.join("images");
    let gt_dir = root.join("gt");
    for d in [&image_dir, &gt_dir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let glc_path = root.join("glc.tif");
    write_raster(&glc_path, &data.glc)?;
    for t in &data.tiles {
        write_raster(image_dir.join(format!("{}.tif", t.id)), &t.image)?;
        write_raster(gt_dir.join(format!("{}.tif", t.id)), &t.gt)?;
    }
    Ok(SyntheticDataset {
        root,
        image_dir,
        gt_dir,
        glc_path,
        tile_ids: data.tiles.iter().map(|t| t.id.clone()).collect(),
    })
}

impl SyntheticDataset {
    /// Default configuration for this dataset writing into `output_dir`.
    pub fn config(&self, output_dir: impl Into<PathBuf>) -> RunConfig {
        let mut cfg = RunConfig::new(DataPaths {
            image_dir: self.image_dir.clone(),
            glc_path: self.glc_path.clone(),
            gt_dir: Some(self.gt_dir.clone()),
            output_dir: output_dir.into(),
        });
        cfg.noise = Some(NoiseConfig::default());
        cfg
    }

    /// Writes `config.toml` next to the data with paths relative to it.
    pub fn write_config(&self, output_dir: &str) -> Result<PathBuf> {
        let mut cfg = self.config(output_dir);
        cfg.data.image_dir = "images".into();
        cfg.data.glc_path = "glc.tif".into();
        cfg.data.gt_dir = Some("gt".into());
        let path = self.root.join("config.toml");
        std::fs::write(&path, cfg.to_toml()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
