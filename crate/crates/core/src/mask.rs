//! Binary masks and per-pixel logit grids on an image grid.

use crate::error::{Error, Result};

/// Row-major binary grid; every cell is 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "mask data length {} != {width}x{height}",
                data.len()
            )));
        }
        if data.iter().any(|v| *v > 1) {
            return Err(Error::InvalidRaster("mask values must be 0 or 1".into()));
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(col, row) as u8);
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn len(&self) -> usize {
        self.data.len()
    }
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, col: usize, row: usize) -> bool {
        self.data[row * self.width + col] == 1
    }

    pub fn set(&mut self, col: usize, row: usize, v: bool) {
        self.data[row * self.width + col] = v as u8;
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|v| **v == 1).count()
    }

    pub fn same_shape(&self, other: &Mask) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn invert(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| 1 - v).collect(),
        }
    }
}

/// Real-valued cropland logits, row-major on the image grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskLogits {
    width: usize,
    height: usize,
    data: Vec<f32>,
    /// Backend-native low-resolution state, fed back on the next decode when
    /// the backend supports it.
    pub low_res: Option<LowResLogits>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowResLogits {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl MaskLogits {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "logit data length {} != {width}x{height}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRaster("logits must be finite".into()));
        }
        Ok(Self {
            width,
            height,
            data,
            low_res: None,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn data(&self) -> &[f32] {
        &self.data
    }
    pub fn get(&self, col: usize, row: usize) -> f32 {
        self.data[row * self.width + col]
    }
}

/// Foreground where the logit is strictly greater than `threshold`.
pub fn binarize(logits: &MaskLogits, threshold: f32) -> Mask {
    Mask {
        width: logits.width,
        height: logits.height,
        data: logits.data.iter().map(|v| (*v > threshold) as u8).collect(),
    }
}
