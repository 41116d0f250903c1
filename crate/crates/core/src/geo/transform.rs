//! Affine pixel/world coordinate math.
//!
//! Coefficients follow the GDAL ordering
//! `[origin_x, pixel_w, shear_x, origin_y, shear_y, pixel_h]` with the
//! origin at the outer corner of pixel (0, 0). Integer pixel indices refer
//! to pixel centers, so `pixel_to_world(0, 0)` is half a pixel in from the
//! origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoTransform {
    pub origin_x: f64,
    /// x step per column
    pub pixel_w: f64,
    /// x step per row
    pub shear_x: f64,
    pub origin_y: f64,
    /// y step per column
    pub shear_y: f64,
    /// y step per row, negative for north-up rasters
    pub pixel_h: f64,
}

impl GeoTransform {
    /// North-up transform without rotation terms.
    pub fn north_up(origin_x: f64, origin_y: f64, pixel_size: f64) -> Self {
        Self {
            origin_x,
            pixel_w: pixel_size,
            shear_x: 0.0,
            origin_y,
            shear_y: 0.0,
            pixel_h: -pixel_size,
        }
    }

    pub fn from_gdal(c: [f64; 6]) -> Self {
        Self {
            origin_x: c[0],
            pixel_w: c[1],
            shear_x: c[2],
            origin_y: c[3],
            shear_y: c[4],
            pixel_h: c[5],
        }
    }

    pub fn to_gdal(&self) -> [f64; 6] {
        [
            self.origin_x,
            self.pixel_w,
            self.shear_x,
            self.origin_y,
            self.shear_y,
            self.pixel_h,
        ]
    }

    pub fn determinant(&self) -> f64 {
        self.pixel_w * self.pixel_h - self.shear_x * self.shear_y
    }

    pub fn is_invertible(&self) -> bool {
        let det = self.determinant();
        det != 0.0 && det.is_finite()
    }

    /// World coordinate of the center of pixel `(col, row)`.
    pub fn pixel_to_world(&self, col: f64, row: f64) -> (f64, f64) {
        let c = col + 0.5;
        let r = row + 0.5;
        (
            self.origin_x + c * self.pixel_w + r * self.shear_x,
            self.origin_y + c * self.shear_y + r * self.pixel_h,
        )
    }

    pub fn world_to_pixel(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        Ok(self.inverse()?.apply(x, y))
    }

    pub fn inverse(&self) -> Result<InverseTransform> {
        if !self.is_invertible() {
            return Err(Error::SingularTransform);
        }
        let det = self.determinant();
        Ok(InverseTransform {
            origin_x: self.origin_x,
            origin_y: self.origin_y,
            a: self.pixel_h / det,
            b: -self.shear_x / det,
            c: -self.shear_y / det,
            d: self.pixel_w / det,
        })
    }
}

/// Precomputed world-to-pixel map, for hot loops that invert many points.
#[derive(Debug, Clone, Copy)]
pub struct InverseTransform {
    origin_x: f64,
    origin_y: f64,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl InverseTransform {
    /// Fractional pixel coordinates in the center convention: pixel centers
    /// map to whole numbers.
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let dx = x - self.origin_x;
        let dy = y - self.origin_y;
        (
            self.a * dx + self.b * dy - 0.5,
            self.c * dx + self.d * dy - 0.5,
        )
    }
}

/// Index of the pixel center nearest to a fractional center-convention
/// coordinate. Exact halves go to the higher index, which makes a pixel
/// own the half-open interval `[i - 0.5, i + 0.5)`.
pub fn nearest_index(coord: f64) -> i64 {
    let f = coord.floor();
    if coord - f >= 0.5 {
        f as i64 + 1
    } else {
        f as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gt(c: [f64; 6]) -> GeoTransform {
        GeoTransform::from_gdal(c)
    }

    #[test]
    fn pixel_to_world_examples() {
        assert_eq!(
            gt([100.0, 0.5, 0.0, 200.0, 0.0, -0.5]).pixel_to_world(0.0, 0.0),
            (100.25, 199.75)
        );
        assert_eq!(
            gt([0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).pixel_to_world(0.0, 0.0),
            (0.5, 0.5)
        );
        assert_eq!(
            gt([0.0, 1.0, 0.0, 0.0, 0.0, -1.0]).pixel_to_world(3.0, 2.0),
            (3.5, -2.5)
        );
    }

    #[test]
    fn world_to_pixel_examples() {
        let (c, r) = gt([100.0, 0.5, 0.0, 200.0, 0.0, -0.5])
            .world_to_pixel(100.25, 199.75)
            .unwrap();
        assert!(c.abs() < 1e-12 && r.abs() < 1e-12);

        let (c, r) = gt([0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
            .world_to_pixel(0.5, 0.5)
            .unwrap();
        assert!(c.abs() < 1e-12 && r.abs() < 1e-12);

        let (c, r) = gt([0.0, 1.0, 0.0, 0.0, 0.0, -1.0])
            .world_to_pixel(3.5, -2.5)
            .unwrap();
        assert!((c - 3.0).abs() < 1e-12 && (r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn singular_transform_rejected() {
        let singular = gt([0.0, 1.0, 0.0, 0.0, 2.0, 0.0]);
        assert!(matches!(
            singular.world_to_pixel(1.0, 1.0),
            Err(Error::SingularTransform)
        ));
    }

    #[test]
    fn nearest_index_half_open() {
        assert_eq!(nearest_index(-0.5), 0);
        assert_eq!(nearest_index(-0.500001), -1);
        assert_eq!(nearest_index(0.4999), 0);
        assert_eq!(nearest_index(0.5), 1);
        assert_eq!(nearest_index(2.0), 2);
    }
}
