use super::raster::{GeoRaster, GridSpec};
use super::transform::nearest_index;
use crate::error::{Error, Result};

/// Fill value for uncovered output pixels when the source declares no
/// nodata value. 255 sits outside the ESA WorldCover legend.
pub const DEFAULT_FILL: f64 = 255.0;

/// A categorical window resampled onto a target grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// Single band on the target grid. `nodata` is always set.
    pub raster: GeoRaster,
    /// Share of output pixels whose center falls inside the source extent
    /// and lands on a non-nodata source pixel.
    pub coverage: f64,
}

/// Nearest-neighbor resampling of a single-band categorical raster onto
/// `target`.
///
/// Each output pixel center is mapped into source pixel space and takes the
/// value of the source pixel whose center is nearest there. Centers outside
/// the source extent receive the source nodata value, or [`DEFAULT_FILL`].
pub fn extract_window_resampled(src: &GeoRaster, target: &GridSpec) -> Result<Window> {
    if src.crs() != target.crs {
        return Err(Error::CrsMismatch {
            source_code: src.crs().code(),
            target_code: target.crs.code(),
        });
    }
    if src.bands() != 1 {
        return Err(Error::InvalidRaster(format!(
            "categorical source must be single-band, got {} bands",
            src.bands()
        )));
    }

    let fill = src
        .nodata()
        .filter(|nd| src.sample_type().holds(*nd))
        .unwrap_or(DEFAULT_FILL);
    let inv = src.geotransform().inverse()?;
    let tgt_gt = target.geotransform;
    let (sw, sh) = (src.width() as i64, src.height() as i64);
    let band = src.band(0);

    let mut out = Vec::with_capacity(target.len());
    let mut valid = 0usize;
    for row in 0..target.height {
        for col in 0..target.width {
            let (x, y) = tgt_gt.pixel_to_world(col as f64, row as f64);
            let (sc, sr) = inv.apply(x, y);
            let (ic, ir) = (nearest_index(sc), nearest_index(sr));
            if ic >= 0 && ic < sw && ir >= 0 && ir < sh {
                let v = band[(ir * sw + ic) as usize];
                if !src.is_nodata(v) {
                    valid += 1;
                }
                out.push(v);
            } else {
                out.push(fill);
            }
        }
    }

    // DEFAULT_FILL fits every SampleType.
    let raster = GeoRaster::new(*target, 1, out, src.sample_type(), Some(fill))?;
    Ok(Window {
        raster,
        coverage: valid as f64 / target.len() as f64,
    })
}
