//! Experiment configuration: one strict JSON document drives data,
//! patching, splitting, model choice, training, and evaluation.
//! Unknown keys are rejected.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::data::{SplitSpec, SynthConfig};
use crate::error::{Error, Result};
use crate::evaluate::Region;
use crate::train::TrainConfig;

fn default_dt() -> f64 {
    0.004
}

fn default_dx() -> f64 {
    25.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// `"synth"` to generate, otherwise a path to an NPY volume.
    pub source: String,
    #[serde(default)]
    pub synth: Option<SynthConfig>,
    /// Sampling for NPY sources (synthetic volumes carry their own).
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_dx")]
    pub dx: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatchConfig {
    pub size: usize,
    pub stride: usize,
}

impl Default for PatchConfig {
    fn default() -> Self {
        PatchConfig { size: 64, stride: 32 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// `C_small`, `R_small`, `C_large` or `R_large`.
    pub preset: String,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub regions: Vec<Region>,
    pub fk_split_hz: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { regions: Vec::new(), fk_split_hz: 50.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub patch: PatchConfig,
    #[serde(default)]
    pub split: SplitSpec,
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig =
            serde_json::from_str(json).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.source == "synth" && self.data.synth.is_none() {
            return Err(Error::Config(
                "data.source is \"synth\" but no data.synth block is given".into(),
            ));
        }
        if self.patch.size == 0 || self.patch.stride == 0 {
            return Err(Error::Config("patch size and stride must be positive".into()));
        }
        self.split.validate()?;
        self.train.validate()?;
        crate::model::Preset::parse(&self.model.preset)?;
        Ok(())
    }

    /// Produces the configured volume (generated or loaded).
    pub fn load_volume(&self) -> Result<crate::data::SeismicVolume> {
        if self.data.source == "synth" {
            let synth = self.data.synth.as_ref().ok_or_else(|| {
                Error::Config("data.source is \"synth\" but no data.synth block is given".into())
            })?;
            crate::data::synth_volume(synth)
        } else {
            crate::data::SeismicVolume::from_npy(
                Path::new(&self.data.source),
                self.data.dt,
                self.data.dx,
            )
        }
    }
}
