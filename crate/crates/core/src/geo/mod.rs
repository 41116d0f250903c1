//! Georeferenced rasters: affine math, GeoTIFF I/O and categorical
//! window resampling.

mod geotiff;
mod raster;
mod resample;
mod transform;

pub use geotiff::{read_raster, write_raster};
pub use raster::{CrsId, GeoRaster, GridSpec, SampleType};
pub use resample::{extract_window_resampled, Window, DEFAULT_FILL};
pub use transform::{nearest_index, GeoTransform, InverseTransform};
