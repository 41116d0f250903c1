//! Point prompts generated from a pre-label.
//!
//! Positive points land on cropland, negative points on covered
//! non-cropland. A [`PromptPlan`] keeps them as ordered batches that the
//! iterative driver feeds to the backend one after another.

mod batches;
mod geojson;
mod noise;
mod sampler;

use serde::{Deserialize, Serialize};

pub use batches::partition_batches;
pub use geojson::{plan_from_geojson, plan_to_geojson, read_plan, write_plan};
pub use noise::{flip_count, flip_labels, jitter_points};
pub use sampler::{erode, sample_prompts};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn inverted(self) -> Label {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptPoint {
    pub col: u32,
    pub row: u32,
    pub label: Label,
    /// Position in sampling order (all positives, then all negatives). Stable
    /// under batching, so backends can use it to break ties.
    pub index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbsentClassPolicy {
    /// Emit only the classes that are present and record a warning.
    #[default]
    SkipClass,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_pos: usize,
    pub n_neg: usize,
    pub n_batches: usize,
    pub seed: u64,
    /// Chebyshev erosion radius applied to each class mask before sampling.
    pub edge_margin: usize,
    /// A class with fewer pixels than this is treated as absent.
    pub min_class_pixels: usize,
    pub absent_class_policy: AbsentClassPolicy,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_pos: 30,
            n_neg: 30,
            n_batches: 3,
            seed: 0,
            edge_margin: 0,
            min_class_pixels: 1,
            absent_class_policy: AbsentClassPolicy::SkipClass,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_batches == 0 {
            return Err(Error::Config("sampler.n_batches must be at least 1".into()));
        }
        Ok(())
    }
}

/// Ordered prompt batches for one tile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptPlan {
    pub batches: Vec<Vec<PromptPoint>>,
    pub seed: u64,
    pub config: SamplerConfig,
    /// Image grid the points index into.
    pub width: usize,
    pub height: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl PromptPlan {
    pub fn points(&self) -> impl Iterator<Item = &PromptPoint> {
        self.batches.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.batches.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn count(&self, label: Label) -> usize {
        self.points().filter(|p| p.label == label).count()
    }
}
