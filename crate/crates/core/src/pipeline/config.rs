//! Run configuration loaded from TOML.
//!
//! ```toml
//! seed = 7
//! workers = 4
//! coverage_threshold = 0.5
//!
//! [data]
//! image_dir = "images"
//! glc_path = "glc.tif"
//! gt_dir = "gt"
//! output_dir = "out"
//!
//! [sampler]
//! n_pos = 30
//! n_neg = 30
//! n_batches = 3
//!
//! [backend]
//! kind = "oracle"
//!
//! [noise]
//! flip_p = [0.0, 0.1, 0.3]
//! seeds = 20
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::F1Mode;
use crate::prelabel::ClassMap;
use crate::prompts::SamplerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub image_dir: PathBuf,
    pub glc_path: PathBuf,
    #[serde(default)]
    pub gt_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Oracle,
    Vfm,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Oracle => "oracle",
            BackendKind::Vfm => "vfm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSpec {
    pub kind: BackendKind,
    /// Sidecar JSON describing the exported graphs; required for `vfm`.
    pub vfm_config: Option<PathBuf>,
    /// Overrides the backend's own binarization threshold.
    pub logit_threshold: Option<f32>,
}

/// Either a seed count (`seeds = 20` means 0..20) or an explicit list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Count(u64),
    List(Vec<u64>),
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::Count(n) => (0..*n).collect(),
            SeedSpec::List(v) => v.clone(),
        }
    }
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec::Count(20)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub flip_p: Vec<f64>,
    pub jitter_radius: u32,
    pub seeds: SeedSpec,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            flip_p: vec![0.0, 0.1, 0.3],
            jitter_radius: 0,
            seeds: SeedSpec::default(),
        }
    }
}

fn default_coverage() -> f64 {
    0.5
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataPaths,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Tiles whose pre-label coverage is below this fraction are skipped.
    #[serde(default = "default_coverage")]
    pub coverage_threshold: f64,
    #[serde(default)]
    pub f1_mode: F1Mode,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub class_map: ClassMap,
    #[serde(default)]
    pub backend: BackendSpec,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub backend: Option<BackendKind>,
    pub workers: Option<usize>,
}

impl RunConfig {
    /// Defaults for everything but the data paths.
    pub fn new(data: DataPaths) -> Self {
        Self {
            data,
            seed: 0,
            workers: default_workers(),
            coverage_threshold: default_coverage(),
            f1_mode: F1Mode::default(),
            sampler: SamplerConfig::default(),
            class_map: ClassMap::default(),
            backend: BackendSpec::default(),
            noise: None,
        }
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve_paths(base_dir);
        Ok(cfg)
    }

    /// Reads, resolves and validates a config file.
    pub fn load(path: impl AsRef<Path>, overrides: &Overrides) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text, path.parent().unwrap_or(Path::new("")))?;
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is serializable")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(b) = o.backend {
            self.backend.kind = b;
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        let abs = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        abs(&mut self.data.image_dir);
        abs(&mut self.data.glc_path);
        abs(&mut self.data.output_dir);
        if let Some(p) = self.data.gt_dir.as_mut() {
            abs(p);
        }
        if let Some(p) = self.backend.vfm_config.as_mut() {
            abs(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.coverage_threshold) {
            return cfg(format!("coverage_threshold {} outside [0, 1]", self.coverage_threshold));
        }
        if self.workers == 0 {
            return cfg("workers must be at least 1".into());
        }
        self.sampler.validate()?;
        if !self.data.image_dir.is_dir() {
            return cfg(format!("image_dir {} is not a directory", self.data.image_dir.display()));
        }
        if !self.data.glc_path.is_file() {
            return cfg(format!("glc_path {} does not exist", self.data.glc_path.display()));
        }
        if let Some(gt) = &self.data.gt_dir {
            if !gt.is_dir() {
                return cfg(format!("gt_dir {} is not a directory", gt.display()));
            }
        }
        if self.backend.kind == BackendKind::Vfm {
            match &self.backend.vfm_config {
                None => return cfg("backend.kind = \"vfm\" needs backend.vfm_config".into()),
                Some(p) if !p.is_file() => return cfg(format!("vfm_config {} does not exist", p.display())),
                _ => {}
            }
        }
        if self.backend.logit_threshold.is_some_and(|t| !t.is_finite()) {
            return cfg("backend.logit_threshold must be finite".into());
        }
        if let Some(n) = &self.noise {
            if let Some(p) = n.flip_p.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return cfg(format!("noise.flip_p value {p} outside [0, 1]"));
            }
            if n.flip_p.is_empty() || n.seeds.seeds().is_empty() {
                return cfg("noise needs at least one flip_p level and one seed".into());
            }
        }
        Ok(())
    }
}
