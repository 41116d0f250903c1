//! ONNX encoder/decoder pair executed with tract.

use std::path::Path;
use std::sync::Arc;

use tract_onnx::prelude::*;

use super::preprocess::{image_tensor, resize_scale, scale_point, upsample_logits, VfmBackendConfig};
use super::{ImageEmbedding, SegmentationBackend};
use crate::error::{BackendError, Error, Result};
use crate::geo::GeoRaster;
use crate::mask::{LowResLogits, MaskLogits};
use crate::prompts::PromptPoint;

const DECODER_INPUTS: [&str; 6] = [
    "image_embeddings",
    "point_coords",
    "point_labels",
    "mask_input",
    "has_mask_input",
    "orig_im_size",
];

pub struct VfmBackend {
    config: VfmBackendConfig,
    encoder: Arc<TypedRunnableModel>,
    /// Decoder with symbolic point count; specialized per decode call.
    decoder: InferenceModel,
    decoder_inputs: Vec<String>,
    mask_output: usize,
}

struct Embedding {
    tensor: Tensor,
}

fn graph_err(path: &Path, e: impl std::fmt::Display) -> Error {
    BackendError::GraphLoad {
        path: path.to_path_buf(),
        message: format!("{e:#}"),
    }
    .into()
}

fn infer_err(e: impl std::fmt::Display) -> Error {
    BackendError::Inference(format!("{e:#}")).into()
}

fn tensor(shape: &[usize], data: &[f32]) -> Result<Tensor> {
    Tensor::from_shape(shape, data).map_err(infer_err)
}

impl VfmBackend {
    pub fn from_sidecar(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(VfmBackendConfig::load(path)?)
    }

    pub fn new(config: VfmBackendConfig) -> Result<Self> {
        config.validate()?;
        let l = config.input_long_side;
        let enc_path = &config.encoder_graph;
        let encoder = tract_onnx::onnx()
            .model_for_path(enc_path)
            .and_then(|m| m.with_input_fact(0, f32::fact([1, 3, l, l]).into()))
            .and_then(|m| m.into_optimized())
            .and_then(|m| m.into_runnable())
            .map_err(|e| graph_err(enc_path, e))?;

        let dec_path = &config.decoder_graph;
        let decoder = tract_onnx::onnx()
            .model_for_path(dec_path)
            .map_err(|e| graph_err(dec_path, e))?;
        let decoder_inputs = decoder
            .input_outlets()
            .map_err(|e| graph_err(dec_path, e))?
            .iter()
            .map(|o| decoder.node(o.node).name.clone())
            .collect::<Vec<_>>();
        if let Some(unknown) = decoder_inputs.iter().find(|n| !DECODER_INPUTS.contains(&n.as_str())) {
            return Err(BackendError::ShapeMismatch(format!("unsupported decoder input {unknown:?}")).into());
        }
        for required in &DECODER_INPUTS[..3] {
            if !decoder_inputs.iter().any(|n| n == required) {
                return Err(BackendError::ShapeMismatch(format!("decoder lacks input {required:?}")).into());
            }
        }
        if config.mask_feedback && !decoder_inputs.iter().any(|n| n == "mask_input") {
            log::info!("decoder has no mask_input; previous logits will not be fed back");
        }

        let outputs = decoder.output_outlets().map_err(|e| graph_err(dec_path, e))?;
        let mask_output = outputs
            .iter()
            .position(|o| {
                decoder.outlet_label(*o) == Some("low_res_masks") || decoder.node(o.node).name == "low_res_masks"
            })
            .unwrap_or(0);

        Ok(Self {
            config,
            encoder,
            decoder,
            decoder_inputs,
            mask_output,
        })
    }

    pub fn config(&self) -> &VfmBackendConfig {
        &self.config
    }
}

impl SegmentationBackend for VfmBackend {
    fn encode(&self, image: &GeoRaster) -> Result<ImageEmbedding> {
        if image.bands() != 3 {
            return Err(BackendError::ShapeMismatch(format!("image has {} bands, expected 3", image.bands())).into());
        }
        let l = self.config.input_long_side;
        let input = tensor(&[1, 3, l, l], &image_tensor(image, &self.config))?;
        let mut out = self.encoder.run(tvec!(input.into())).map_err(infer_err)?;
        if out.is_empty() {
            return Err(BackendError::ShapeMismatch("encoder produced no output".into()).into());
        }
        let tensor = out.remove(0).into_tensor();
        if tensor.rank() != 4 {
            return Err(BackendError::ShapeMismatch(format!(
                "embedding shape {:?}, expected rank 4",
                tensor.shape()
            ))
            .into());
        }
        Ok(ImageEmbedding::new(image.width(), image.height(), Embedding { tensor }))
    }

    fn decode(&self, e: &ImageEmbedding, points: &[PromptPoint], prev: Option<&MaskLogits>) -> Result<MaskLogits> {
        if points.is_empty() {
            return Err(Error::NoPoints);
        }
        let emb = e
            .state::<Embedding>()
            .ok_or_else(|| BackendError::ShapeMismatch("embedding was not produced by this backend".into()))?;
        let l = self.config.input_long_side;
        let (w, h) = (e.width, e.height);
        let scale = resize_scale(w, h, l);

        let mut coords: Vec<f32> = Vec::with_capacity(2 * (points.len() + 1));
        let mut labels: Vec<f32> = Vec::with_capacity(points.len() + 1);
        for p in points {
            coords.extend(scale_point(p.col, p.row, scale));
            labels.push(if p.label.is_positive() { 1.0 } else { 0.0 });
        }
        if self.config.pad_point {
            coords.extend([0.0, 0.0]);
            labels.push(-1.0);
        }
        let n = labels.len();

        // mask prompts live at 4x the embedding resolution
        let es = emb.tensor.shape();
        let (mh, mw) = (es[2] * 4, es[3] * 4);
        let feedback = prev
            .and_then(|p| p.low_res.as_ref())
            .filter(|lr| self.config.mask_feedback && lr.width == mw && lr.height == mh);

        let mut inputs: TVec<TValue> = tvec!();
        for name in &self.decoder_inputs {
            let t = match name.as_str() {
                "image_embeddings" => emb.tensor.clone(),
                "point_coords" => tensor(&[1, n, 2], &coords)?,
                "point_labels" => tensor(&[1, n], &labels)?,
                "mask_input" => match feedback {
                    Some(lr) => tensor(&[1, 1, mh, mw], &lr.data)?,
                    None => tensor(&[1, 1, mh, mw], &vec![0.0; mh * mw])?,
                },
                "has_mask_input" => tensor(&[1], &[if feedback.is_some() { 1.0 } else { 0.0 }])?,
                "orig_im_size" => tensor(&[2], &[h as f32, w as f32])?,
                other => unreachable!("input {other} rejected at load"),
            };
            inputs.push(t.into());
        }

        let mut model = self.decoder.clone();
        for (i, t) in inputs.iter().enumerate() {
            model
                .set_input_fact(i, InferenceFact::dt_shape_from_tensor(t))
                .map_err(infer_err)?;
        }
        let plan = model
            .into_optimized()
            .and_then(|m| m.into_runnable())
            .map_err(infer_err)?;
        let outputs = plan.run(inputs).map_err(infer_err)?;
        let out = outputs
            .get(self.mask_output)
            .ok_or_else(|| BackendError::ShapeMismatch("decoder produced no mask output".into()))?;
        let shape = out.shape().to_vec();
        if shape.len() < 2 {
            return Err(BackendError::ShapeMismatch(format!("mask output shape {shape:?}")).into());
        }
        let (lh, lw) = (shape[shape.len() - 2], shape[shape.len() - 1]);
        let all = out.to_plain_array_view::<f32>().map_err(infer_err)?;
        // first mask of the first batch entry
        let low: Vec<f32> = all.iter().take(lh * lw).copied().collect();
        if low.iter().any(|v| !v.is_finite()) {
            return Err(BackendError::Inference("decoder produced non-finite logits".into()).into());
        }

        let full = if (lw, lh) == (w, h) {
            low.clone()
        } else {
            upsample_logits(&low, lw, lh, w, h, l)
        };
        let mut logits = MaskLogits::new(w, h, full)?;
        logits.low_res = Some(LowResLogits {
            width: lw,
            height: lh,
            data: low,
        });
        Ok(logits)
    }

    fn threshold(&self) -> f32 {
        self.config.logit_threshold
    }
}
