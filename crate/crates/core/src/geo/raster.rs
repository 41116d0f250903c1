use serde::{Deserialize, Serialize};

use super::transform::GeoTransform;
use crate::error::{Error, Result};

/// EPSG code of a coordinate reference system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct CrsId(u32);

impl CrsId {
    pub fn new(code: u32) -> Result<Self> {
        if code == 0 {
            return Err(Error::InvalidRaster("EPSG code must be positive".into()));
        }
        Ok(Self(code))
    }

    pub fn code(self) -> u32 {
        self.0
    }
}

impl TryFrom<u32> for CrsId {
    type Error = Error;
    fn try_from(code: u32) -> Result<Self> {
        Self::new(code)
    }
}

impl From<CrsId> for u32 {
    fn from(c: CrsId) -> u32 {
        c.0
    }
}

impl std::fmt::Display for CrsId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "EPSG:{}", self.0)
    }
}

/// On-disk sample type. Values are held as `f64` in memory, which is exact
/// for every variant here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleType {
    U8,
    U16,
    I16,
    U32,
    I32,
    F32,
    F64,
}

impl SampleType {
    pub fn bits(self) -> u16 {
        match self {
            SampleType::U8 => 8,
            SampleType::U16 | SampleType::I16 => 16,
            SampleType::U32 | SampleType::I32 | SampleType::F32 => 32,
            SampleType::F64 => 64,
        }
    }

    pub fn is_integer(self) -> bool {
        !matches!(self, SampleType::F32 | SampleType::F64)
    }

    /// Whether `v` is representable without loss.
    pub fn holds(self, v: f64) -> bool {
        let in_int = |lo: f64, hi: f64| v.fract() == 0.0 && v >= lo && v <= hi;
        match self {
            SampleType::U8 => in_int(0.0, u8::MAX as f64),
            SampleType::U16 => in_int(0.0, u16::MAX as f64),
            SampleType::I16 => in_int(i16::MIN as f64, i16::MAX as f64),
            SampleType::U32 => in_int(0.0, u32::MAX as f64),
            SampleType::I32 => in_int(i32::MIN as f64, i32::MAX as f64),
            SampleType::F32 => v.is_nan() || (v as f32) as f64 == v,
            SampleType::F64 => true,
        }
    }
}

/// Raster geometry without pixel data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub geotransform: GeoTransform,
    pub crs: CrsId,
}

impl GridSpec {
    pub fn new(width: usize, height: usize, geotransform: GeoTransform, crs: CrsId) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!(
                "grid must be at least 1x1, got {width}x{height}"
            )));
        }
        if !geotransform.is_invertible() {
            return Err(Error::SingularTransform);
        }
        Ok(Self {
            width,
            height,
            geotransform,
            crs,
        })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A georeferenced pixel grid with band-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoRaster {
    grid: GridSpec,
    bands: usize,
    data: Vec<f64>,
    sample_type: SampleType,
    nodata: Option<f64>,
}

impl GeoRaster {
    pub fn new(
        grid: GridSpec,
        bands: usize,
        data: Vec<f64>,
        sample_type: SampleType,
        nodata: Option<f64>,
    ) -> Result<Self> {
        if bands == 0 {
            return Err(Error::InvalidRaster("raster needs at least one band".into()));
        }
        let expected = grid.len() * bands;
        if data.len() != expected {
            return Err(Error::InvalidRaster(format!(
                "data length {} != {}x{}x{}",
                data.len(),
                grid.width,
                grid.height,
                bands
            )));
        }
        if let Some(v) = data.iter().find(|v| !sample_type.holds(**v)) {
            return Err(Error::InvalidRaster(format!(
                "value {v} does not fit sample type {sample_type:?}"
            )));
        }
        Ok(Self {
            grid,
            bands,
            data,
            sample_type,
            nodata,
        })
    }

    /// Single-band raster filled with one value.
    pub fn filled(grid: GridSpec, value: f64, sample_type: SampleType, nodata: Option<f64>) -> Result<Self> {
        Self::new(grid, 1, vec![value; grid.len()], sample_type, nodata)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }
    pub fn width(&self) -> usize {
        self.grid.width
    }
    pub fn height(&self) -> usize {
        self.grid.height
    }
    pub fn bands(&self) -> usize {
        self.bands
    }
    pub fn geotransform(&self) -> GeoTransform {
        self.grid.geotransform
    }
    pub fn crs(&self) -> CrsId {
        self.grid.crs
    }
    pub fn sample_type(&self) -> SampleType {
        self.sample_type
    }
    pub fn nodata(&self) -> Option<f64> {
        self.nodata
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn band(&self, b: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn get(&self, band: usize, col: usize, row: usize) -> f64 {
        self.data[band * self.grid.len() + row * self.grid.width + col]
    }

    pub fn is_nodata(&self, v: f64) -> bool {
        match self.nodata {
            Some(nd) if nd.is_nan() => v.is_nan(),
            Some(nd) => v == nd,
            None => false,
        }
    }
}
