//! Prompt-conditioned segmentation backends and the iterative prompting
//! driver.
//!
//! A backend encodes an image once and then decodes any number of prompt
//! sets against that embedding. [`run_iterative`] feeds a [`PromptPlan`]
//! batch by batch, each decode seeing every point accumulated so far plus
//! the previous decode's logits.

mod oracle;
pub mod preprocess;
#[cfg(feature = "vfm")]
mod vfm;

use std::any::Any;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

pub use oracle::{oracle_decode, OracleBackend};
pub use preprocess::VfmBackendConfig;
#[cfg(feature = "vfm")]
pub use vfm::VfmBackend;

use crate::error::{Error, Result};
use crate::geo::GeoRaster;
use crate::mask::MaskLogits;
use crate::prompts::{PromptPlan, PromptPoint};

/// Backend-specific image state, produced once per image and reused for
/// every decode on it.
pub struct ImageEmbedding {
    pub width: usize,
    pub height: usize,
    state: Box<dyn Any + Send + Sync>,
}

impl ImageEmbedding {
    pub fn new(width: usize, height: usize, state: impl Any + Send + Sync) -> Self {
        Self {
            width,
            height,
            state: Box::new(state),
        }
    }

    pub fn state<T: 'static>(&self) -> Option<&T> {
        self.state.downcast_ref()
    }
}

impl std::fmt::Debug for ImageEmbedding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImageEmbedding")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

/// `decode` must be a pure function of its arguments.
pub trait SegmentationBackend: Send + Sync {
    fn encode(&self, image: &GeoRaster) -> Result<ImageEmbedding>;

    fn decode(
        &self,
        embedding: &ImageEmbedding,
        points: &[PromptPoint],
        prev: Option<&MaskLogits>,
    ) -> Result<MaskLogits>;

    /// Logit threshold for binarizing this backend's output.
    fn threshold(&self) -> f32 {
        0.0
    }
}

impl<B: SegmentationBackend + ?Sized> SegmentationBackend for Box<B> {
    fn encode(&self, image: &GeoRaster) -> Result<ImageEmbedding> {
        (**self).encode(image)
    }
    fn decode(&self, e: &ImageEmbedding, p: &[PromptPoint], prev: Option<&MaskLogits>) -> Result<MaskLogits> {
        (**self).decode(e, p, prev)
    }
    fn threshold(&self) -> f32 {
        (**self).threshold()
    }
}

/// Encodes `image` once, then decodes each non-empty batch of `plan` with
/// the union of all batches so far and the previous logits.
pub fn run_iterative<B: SegmentationBackend + ?Sized>(
    backend: &B,
    image: &GeoRaster,
    plan: &PromptPlan,
) -> Result<MaskLogits> {
    if plan.is_empty() {
        return Err(Error::EmptyPlan);
    }
    if plan.width != image.width() || plan.height != image.height() {
        return Err(Error::DimensionMismatch(format!(
            "plan grid {}x{} vs image {}x{}",
            plan.width,
            plan.height,
            image.width(),
            image.height()
        )));
    }
    let embedding = backend.encode(image)?;
    decode_plan(backend, &embedding, plan)
}

/// The decode loop of [`run_iterative`] against an existing embedding.
pub fn decode_plan<B: SegmentationBackend + ?Sized>(
    backend: &B,
    embedding: &ImageEmbedding,
    plan: &PromptPlan,
) -> Result<MaskLogits> {
    if plan.is_empty() {
        return Err(Error::EmptyPlan);
    }
    let mut accumulated: Vec<PromptPoint> = Vec::with_capacity(plan.len());
    let mut logits: Option<MaskLogits> = None;
    for batch in plan.batches.iter().filter(|b| !b.is_empty()) {
        accumulated.extend_from_slice(batch);
        logits = Some(backend.decode(embedding, &accumulated, logits.as_ref())?);
    }
    Ok(logits.expect("non-empty plan has a non-empty batch"))
}

/// Wraps a backend and counts calls into it.
pub struct CountingBackend<B> {
    pub inner: B,
    encodes: AtomicUsize,
    decode_sizes: Mutex<Vec<usize>>,
}

impl<B> CountingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            encodes: AtomicUsize::new(0),
            decode_sizes: Mutex::new(Vec::new()),
        }
    }

    pub fn encode_calls(&self) -> usize {
        self.encodes.load(Ordering::SeqCst)
    }

    pub fn decode_calls(&self) -> usize {
        self.decode_sizes.lock().unwrap().len()
    }

    /// Number of points passed to each decode call, in call order.
    pub fn decode_sizes(&self) -> Vec<usize> {
        self.decode_sizes.lock().unwrap().clone()
    }
}

impl<B: SegmentationBackend> SegmentationBackend for CountingBackend<B> {
    fn encode(&self, image: &GeoRaster) -> Result<ImageEmbedding> {
        self.encodes.fetch_add(1, Ordering::SeqCst);
        self.inner.encode(image)
    }

    fn decode(&self, e: &ImageEmbedding, p: &[PromptPoint], prev: Option<&MaskLogits>) -> Result<MaskLogits> {
        self.decode_sizes.lock().unwrap().push(p.len());
        self.inner.decode(e, p, prev)
    }

    fn threshold(&self) -> f32 {
        self.inner.threshold()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{CrsId, GeoTransform, GridSpec, SampleType};
    use crate::mask::binarize;
    use crate::prompts::{partition_batches, Label, SamplerConfig};

    fn image(w: usize, h: usize) -> GeoRaster {
        let grid = GridSpec::new(w, h, GeoTransform::north_up(0.0, 0.0, 0.5), CrsId::new(32650).unwrap()).unwrap();
        GeoRaster::new(grid, 3, vec![0.0; w * h * 3], SampleType::U8, None).unwrap()
    }

    fn plan(points: &[PromptPoint], n_batches: usize, w: usize, h: usize) -> PromptPlan {
        PromptPlan {
            batches: partition_batches(points, n_batches),
            seed: 0,
            config: SamplerConfig::default(),
            width: w,
            height: h,
            warnings: vec![],
        }
    }

    fn pt(col: u32, row: u32, label: Label, index: u32) -> PromptPoint {
        PromptPoint { col, row, label, index }
    }

    #[test]
    fn single_positive_gives_all_positive() {
        let p = plan(&[pt(3, 2, Label::Positive, 0)], 1, 8, 8);
        let logits = run_iterative(&OracleBackend, &image(8, 8), &p).unwrap();
        assert_eq!(binarize(&logits, 0.0).count_ones(), 64);
    }

    #[test]
    fn batching_does_not_change_the_oracle_result() {
        let pts: Vec<PromptPoint> = (0..12)
            .map(|i| pt((i * 5) % 16, (i * 7) % 16, if i < 6 { Label::Positive } else { Label::Negative }, i))
            .collect();
        let one = run_iterative(&OracleBackend, &image(16, 16), &plan(&pts, 1, 16, 16)).unwrap();
        let three = run_iterative(&OracleBackend, &image(16, 16), &plan(&pts, 3, 16, 16)).unwrap();
        assert_eq!(one, three);
    }

    #[test]
    fn encode_once_decode_per_batch() {
        let pts: Vec<PromptPoint> = (0..60)
            .map(|i| pt(i % 32, i / 2, if i < 30 { Label::Positive } else { Label::Negative }, i))
            .collect();
        let backend = CountingBackend::new(OracleBackend);
        run_iterative(&backend, &image(32, 32), &plan(&pts, 3, 32, 32)).unwrap();
        assert_eq!(backend.encode_calls(), 1);
        assert_eq!(backend.decode_calls(), 3);
        assert_eq!(backend.decode_sizes(), vec![20, 40, 60]);
    }

    #[test]
    fn empty_plan_rejected() {
        let p = plan(&[], 3, 4, 4);
        assert!(matches!(run_iterative(&OracleBackend, &image(4, 4), &p), Err(Error::EmptyPlan)));
    }

    #[test]
    fn plan_grid_must_match_image() {
        let p = plan(&[pt(0, 0, Label::Positive, 0)], 1, 4, 4);
        assert!(matches!(
            run_iterative(&OracleBackend, &image(5, 4), &p),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
