//! Tensor preparation shared by model-backed segmentation: longest-side
//! resize with bottom-right zero padding, prompt coordinate scaling and
//! mapping low-resolution logits back onto the original grid.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{BackendError, Error, Result};
use crate::geo::GeoRaster;

fn default_true() -> bool {
    true
}

fn default_long_side() -> usize {
    1024
}

/// Sidecar JSON written next to the exported encoder and decoder graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VfmBackendConfig {
    pub encoder_graph: PathBuf,
    pub decoder_graph: PathBuf,
    /// Side of the square model input.
    #[serde(default = "default_long_side")]
    pub input_long_side: usize,
    pub channel_mean: [f32; 3],
    pub channel_std: [f32; 3],
    #[serde(default)]
    pub logit_threshold: f32,
    /// Pass the previous low-resolution logits back to the decoder.
    #[serde(default = "default_true")]
    pub mask_feedback: bool,
    /// Append a label -1 padding point to every prompt set.
    #[serde(default = "default_true")]
    pub pad_point: bool,
}

impl VfmBackendConfig {
    /// Reads the sidecar; graph paths are resolved relative to its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new(""));
        cfg.encoder_graph = dir.join(&cfg.encoder_graph);
        cfg.decoder_graph = dir.join(&cfg.decoder_graph);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.input_long_side == 0 {
            return Err(BackendError::Config("input_long_side must be positive".into()));
        }
        if self.channel_std.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(BackendError::Config("channel_std entries must be positive".into()));
        }
        if self.channel_mean.iter().any(|m| !m.is_finite()) || !self.logit_threshold.is_finite() {
            return Err(BackendError::Config("non-finite normalization or threshold".into()));
        }
        Ok(())
    }
}

/// Factor taking original pixel coordinates to model-input coordinates.
pub fn resize_scale(width: usize, height: usize, long_side: usize) -> f64 {
    long_side as f64 / width.max(height) as f64
}

/// Size of the resized image before padding.
pub fn resized_dims(width: usize, height: usize, long_side: usize) -> (usize, usize) {
    let s = resize_scale(width, height, long_side);
    let w = ((width as f64 * s).round() as usize).clamp(1, long_side);
    let h = ((height as f64 * s).round() as usize).clamp(1, long_side);
    (w, h)
}

/// Prompt pixel coordinates in model-input space.
pub fn scale_point(col: u32, row: u32, scale: f64) -> [f32; 2] {
    [(col as f64 * scale) as f32, (row as f64 * scale) as f32]
}

/// Bilinear sample of a row-major grid at continuous coordinates with pixel
/// centers at integer + 0.5 and clamp-to-edge outside the grid.
pub fn bilinear(data: &[f32], w: usize, h: usize, x: f64, y: f64) -> f32 {
    let fx = (x - 0.5).clamp(0.0, (w - 1) as f64);
    let fy = (y - 0.5).clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (tx, ty) = ((fx - x0 as f64) as f32, (fy - y0 as f64) as f32);
    let at = |c: usize, r: usize| data[r * w + c];
    let top = at(x0, y0) * (1.0 - tx) + at(x1, y0) * tx;
    let bottom = at(x0, y1) * (1.0 - tx) + at(x1, y1) * tx;
    top * (1.0 - ty) + bottom * ty
}

/// Builds the `[1, 3, L, L]` normalized input tensor data from the first
/// three bands.
pub fn image_tensor(image: &GeoRaster, cfg: &VfmBackendConfig) -> Vec<f32> {
    let l = cfg.input_long_side;
    let (w, h) = (image.width(), image.height());
    let (rw, rh) = resized_dims(w, h, l);
    let (sx, sy) = (w as f64 / rw as f64, h as f64 / rh as f64);
    let mut out = vec![0f32; 3 * l * l];
    for ch in 0..3 {
        let band: Vec<f32> = image
            .band(ch.min(image.bands() - 1))
            .iter()
            .map(|v| if v.is_finite() { *v as f32 } else { 0.0 })
            .collect();
        let plane = &mut out[ch * l * l..(ch + 1) * l * l];
        for r in 0..rh {
            let y = (r as f64 + 0.5) * sy;
            for c in 0..rw {
                let x = (c as f64 + 0.5) * sx;
                let v = bilinear(&band, w, h, x, y);
                plane[r * l + c] = (v - cfg.channel_mean[ch]) / cfg.channel_std[ch];
            }
        }
    }
    out
}

/// Maps decoder logits of size `lw × lh`, spanning the padded `L × L` input
/// square, onto the original `width × height` grid.
pub fn upsample_logits(
    low: &[f32],
    lw: usize,
    lh: usize,
    width: usize,
    height: usize,
    long_side: usize,
) -> Vec<f32> {
    let s = resize_scale(width, height, long_side);
    let (kx, ky) = (lw as f64 / long_side as f64, lh as f64 / long_side as f64);
    let mut out = Vec::with_capacity(width * height);
    for r in 0..height {
        let y = (r as f64 + 0.5) * s * ky;
        for c in 0..width {
            let x = (c as f64 + 0.5) * s * kx;
            out.push(bilinear(low, lw, lh, x, y));
        }
    }
    out
}
