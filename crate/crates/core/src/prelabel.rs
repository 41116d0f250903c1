//! Binary cropland pre-labels derived from a global land-cover raster.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{extract_window_resampled, GeoRaster, GridSpec, SampleType};
use crate::mask::Mask;

/// ESA WorldCover legend code for cropland.
pub const WORLDCOVER_CROPLAND: i64 = 40;

/// Nodata value used when a pre-label is written as a GeoTIFF.
pub const PRELABEL_NODATA: f64 = 255.0;

/// Source land-cover codes that count as cropland.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ClassMapRepr", into = "ClassMapRepr")]
pub struct ClassMap {
    cropland_codes: BTreeSet<i64>,
}

#[derive(Serialize, Deserialize)]
struct ClassMapRepr {
    cropland_codes: Vec<i64>,
}

impl TryFrom<ClassMapRepr> for ClassMap {
    type Error = Error;
    fn try_from(r: ClassMapRepr) -> Result<Self> {
        ClassMap::new(r.cropland_codes)
    }
}

impl From<ClassMap> for ClassMapRepr {
    fn from(c: ClassMap) -> Self {
        ClassMapRepr {
            cropland_codes: c.cropland_codes.into_iter().collect(),
        }
    }
}

impl ClassMap {
    pub fn new(codes: impl IntoIterator<Item = i64>) -> Result<Self> {
        let cropland_codes: BTreeSet<i64> = codes.into_iter().collect();
        if cropland_codes.is_empty() {
            return Err(Error::Config("class map needs at least one cropland code".into()));
        }
        Ok(Self { cropland_codes })
    }

    pub fn codes(&self) -> impl Iterator<Item = i64> + '_ {
        self.cropland_codes.iter().copied()
    }

    pub fn is_cropland(&self, value: f64) -> bool {
        value.fract() == 0.0 && self.cropland_codes.contains(&(value as i64))
    }
}

impl Default for ClassMap {
    fn default() -> Self {
        Self {
            cropland_codes: BTreeSet::from([WORLDCOVER_CROPLAND]),
        }
    }
}

/// Cropland pre-label aligned pixel-for-pixel with an image tile.
#[derive(Debug, Clone, PartialEq)]
pub struct PreLabel {
    pub grid: GridSpec,
    /// 1 = cropland (only ever set where `valid` is 1)
    pub mask: Mask,
    /// 1 = land-cover source coverage present
    pub valid: Mask,
    /// `None` when coverage is zero.
    pub p_crop: Option<f64>,
    pub p_noncrop: Option<f64>,
    pub coverage: f64,
}

impl PreLabel {
    /// Builds a pre-label from its masks, deriving the statistics.
    pub fn from_masks(grid: GridSpec, mask: Mask, valid: Mask) -> Result<Self> {
        if mask.width() != grid.width || mask.height() != grid.height || !mask.same_shape(&valid) {
            return Err(Error::DimensionMismatch("pre-label masks must match the image grid".into()));
        }
        let n_valid = valid.count_ones();
        let n_crop = mask
            .data()
            .iter()
            .zip(valid.data())
            .filter(|(m, v)| **m == 1 && **v == 1)
            .count();
        let (p_crop, p_noncrop) = if n_valid == 0 {
            (None, None)
        } else {
            let p = n_crop as f64 / n_valid as f64;
            (Some(p), Some(1.0 - p))
        };
        Ok(Self {
            grid,
            mask,
            valid,
            p_crop,
            p_noncrop,
            coverage: n_valid as f64 / grid.len() as f64,
        })
    }

    /// Single-band u8 raster: 1 cropland, 0 non-cropland, 255 no coverage.
    pub fn to_raster(&self) -> GeoRaster {
        let data = self
            .mask
            .data()
            .iter()
            .zip(self.valid.data())
            .map(|(m, v)| if *v == 1 { *m as f64 } else { PRELABEL_NODATA })
            .collect();
        GeoRaster::new(self.grid, 1, data, SampleType::U8, Some(PRELABEL_NODATA))
            .expect("pre-label raster matches its grid")
    }

    /// Inverse of [`PreLabel::to_raster`].
    pub fn from_raster(raster: &GeoRaster) -> Result<Self> {
        if raster.bands() != 1 {
            return Err(Error::InvalidRaster("pre-label raster must be single-band".into()));
        }
        let band = raster.band(0);
        let mut mask = Vec::with_capacity(band.len());
        let mut valid = Vec::with_capacity(band.len());
        for v in band {
            if raster.is_nodata(*v) || *v == PRELABEL_NODATA {
                mask.push(0);
                valid.push(0);
            } else if *v == 0.0 || *v == 1.0 {
                mask.push(*v as u8);
                valid.push(1);
            } else {
                return Err(Error::InvalidRaster(format!("pre-label value {v} is not 0, 1 or nodata")));
            }
        }
        let (w, h) = (raster.width(), raster.height());
        Self::from_masks(raster.grid(), Mask::new(w, h, mask)?, Mask::new(w, h, valid)?)
    }
}

/// Remaps a land-cover window on the image grid to a binary pre-label.
pub fn remap_to_binary(glc_window: &GeoRaster, class_map: &ClassMap) -> Result<PreLabel> {
    if glc_window.bands() != 1 {
        return Err(Error::InvalidRaster("land-cover window must be single-band".into()));
    }
    let (w, h) = (glc_window.width(), glc_window.height());
    let band = glc_window.band(0);
    let mut mask = Vec::with_capacity(band.len());
    let mut valid = Vec::with_capacity(band.len());
    for v in band {
        let ok = !glc_window.is_nodata(*v);
        valid.push(ok as u8);
        mask.push((ok && class_map.is_cropland(*v)) as u8);
    }
    PreLabel::from_masks(glc_window.grid(), Mask::new(w, h, mask)?, Mask::new(w, h, valid)?)
}

/// Cropland and non-cropland shares over valid pixels.
pub fn compute_proportions(prelabel: &PreLabel) -> Result<(f64, f64)> {
    let n_valid = prelabel.valid.count_ones();
    if n_valid == 0 {
        return Err(Error::NoCoverage);
    }
    let n_crop = prelabel
        .mask
        .data()
        .iter()
        .zip(prelabel.valid.data())
        .filter(|(m, v)| **m == 1 && **v == 1)
        .count();
    let p = n_crop as f64 / n_valid as f64;
    Ok((p, 1.0 - p))
}

/// Windows `glc` onto the image grid and remaps it to a binary pre-label.
pub fn make_prelabel(image: &GeoRaster, glc: &GeoRaster, class_map: &ClassMap) -> Result<PreLabel> {
    let window = extract_window_resampled(glc, &image.grid())?;
    remap_to_binary(&window.raster, class_map)
}
