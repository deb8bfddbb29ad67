use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::acoustics::SimConfig;
use crate::geometry::RoomFamily;
use crate::model::{Aggregation, EchoScanConfig};
use crate::objective::LossWeights;
use crate::tensor::LrSchedule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub seed: u64,
    pub train_count: usize,
    pub test_count: usize,
    /// Families assigned round-robin by sample index.
    pub families: Vec<RoomFamily>,
    pub b: usize,
    pub h: usize,
    pub pixel_size: f64,
    /// Fraction of the training set held out for validation.
    pub val_fraction: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            train_count: 2000,
            test_count: 200,
            families: RoomFamily::STANDARD.to_vec(),
            b: 32,
            h: 16,
            pixel_size: 0.625,
            val_fraction: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskConfig {
    pub count: usize,
    /// Inclusive upper bound on each mask length, in samples.
    pub max_len: usize,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self { count: 3, max_len: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub batch_size: usize,
    pub steps: u64,
    pub weights: LossWeights,
    pub schedule: LrSchedule,
    pub augment: bool,
    pub mask: MaskConfig,
    pub val_every: u64,
    /// Zero disables periodic checkpoints.
    pub checkpoint_every: u64,
    pub log_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            batch_size: 32,
            steps: 6000,
            weights: LossWeights::default(),
            schedule: LrSchedule::default(),
            augment: true,
            mask: MaskConfig::default(),
            val_every: 200,
            checkpoint_every: 1000,
            log_every: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub aggregations: Vec<Aggregation>,
    pub first_order: Vec<bool>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self { aggregations: Aggregation::ALL.to_vec(), first_order: vec![false, true] }
    }
}

/// Everything a run needs; the on-disk run-config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub sim: SimConfig,
    pub model: EchoScanConfig,
    pub train: TrainConfig,
    pub ablation: AblationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl RunConfig {
    /// 2k/200 rooms, 32-pixel floorplans, 512-sample inputs.
    pub fn desk() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            sim: SimConfig::desk(),
            model: EchoScanConfig::desk(),
            train: TrainConfig::default(),
            ablation: AblationConfig::default(),
        }
    }

    /// 100-pixel floorplans, 40-cell heights, 1024-sample inputs.
    pub fn full() -> Self {
        Self {
            dataset: DatasetConfig { train_count: 600_000, test_count: 1000, b: 100, h: 40, pixel_size: 0.2, ..DatasetConfig::default() },
            sim: SimConfig::default(),
            model: EchoScanConfig::default(),
            train: TrainConfig { steps: 200_000, ..TrainConfig::default() },
            ablation: AblationConfig::default(),
        }
    }

    pub fn profile(name: &str) -> Result<Self, PipelineError> {
        match name {
            "desk" => Ok(Self::desk()),
            "full" => Ok(Self::full()),
            other => Err(PipelineError::Config(format!("unknown profile {other:?}, expected desk or full"))),
        }
    }

    /// Parse a run-config. Keys present in the file override the profile
    /// named by its optional top-level `"profile"` key (default `desk`).
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let mut user: serde_json::Value = serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        let profile = match user.as_object_mut().and_then(|o| o.remove("profile")) {
            Some(serde_json::Value::String(s)) => s,
            Some(other) => return Err(PipelineError::Config(format!("profile must be a string, got {other}"))),
            None => "desk".to_string(),
        };
        let mut base = serde_json::to_value(Self::profile(&profile)?).map_err(|e| PipelineError::Config(e.to_string()))?;
        merge(&mut base, user);
        let cfg: Self = serde_json::from_value(base).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        Self::from_json(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| PipelineError::Config(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| PipelineError::io(path, e))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.model.validate()?;
        let d = &self.dataset;
        if self.train.batch_size == 0 {
            return Err(PipelineError::Config("batch size must be at least 1".into()));
        }
        if d.families.is_empty() || d.families.contains(&RoomFamily::Imported) {
            return Err(PipelineError::Config("dataset families must be non-empty standard families".into()));
        }
        if self.model.b_out != d.b || self.model.h_out != d.h || self.model.n != self.sim.n {
            return Err(PipelineError::Config(format!(
                "model output {}x{}/{} and input {} must match dataset {}x{}/{} and simulation length {}",
                self.model.b_out, self.model.b_out, self.model.h_out, self.model.n, d.b, d.b, d.h, self.sim.n
            )));
        }
        if !(0.0..1.0).contains(&d.val_fraction) || d.pixel_size <= 0.0 {
            return Err(PipelineError::Config("val_fraction must be in [0, 1) and pixel_size positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let digest = Sha256::digest(value.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn merge(base: &mut serde_json::Value, over: serde_json::Value) {
    match (base, over) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
