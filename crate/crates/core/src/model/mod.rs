//! Echo-to-geometry network: residual 1-D encoder, multi-aggregation pooling and a
//! dual-head decoder (floorplan image and height vector), plus Grad-CAM.

mod gradcam;
mod net;

pub use gradcam::{cam_from_features, grad_cam, interpolate_to_length};
pub use net::{EchoScan, Forward};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("generalized mean with rho = {rho} needs non-negative features, found {value}")]
    NegativeFeature { rho: f64, value: f64 },
    #[error("invalid model config: {0}")]
    Config(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Aggregation {
    #[serde(rename = "SP")]
    Sp,
    #[serde(rename = "GeM")]
    Gem,
    #[serde(rename = "SP+GeM")]
    SpGem,
}

impl Aggregation {
    pub const ALL: [Aggregation; 3] = [Aggregation::Sp, Aggregation::Gem, Aggregation::SpGem];

    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::Sp => "SP",
            Aggregation::Gem => "GeM",
            Aggregation::SpGem => "SP+GeM",
        }
    }

    /// Descriptor width for `c` encoder channels.
    pub fn width(self, c: usize) -> usize {
        match self {
            Aggregation::SpGem => 2 * c,
            _ => c,
        }
    }
}

impl std::str::FromStr for Aggregation {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "SP" | "sp" => Ok(Aggregation::Sp),
            "GeM" | "gem" => Ok(Aggregation::Gem),
            "SP+GeM" | "sp+gem" => Ok(Aggregation::SpGem),
            other => Err(ModelError::Config(format!("unknown aggregation {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EchoScanConfig {
    pub m: usize,
    pub n: usize,
    /// `(channels, stride)` per residual stage.
    pub stages: Vec<(usize, usize)>,
    pub b_out: usize,
    pub h_out: usize,
    pub aggregation: Aggregation,
    pub rho_gem: f64,
    /// Side of the square grid the descriptor is projected onto.
    pub seed_grid: usize,
    pub seed_channels: usize,
    /// Output channels of each upsampling block; each block doubles the side.
    pub decoder_channels: Vec<usize>,
    /// Temporal length each skip feature is average-pooled to before its
    /// linear projection.
    pub skip_len: usize,
}

impl Default for EchoScanConfig {
    fn default() -> Self {
        Self {
            m: 6,
            n: 1024,
            stages: vec![(32, 4), (64, 4), (128, 4), (256, 4)],
            b_out: 100,
            h_out: 40,
            aggregation: Aggregation::SpGem,
            rho_gem: 3.0,
            seed_grid: 25,
            seed_channels: 16,
            decoder_channels: vec![64, 32],
            skip_len: 4,
        }
    }
}

impl EchoScanConfig {
    /// Small profile: 512-sample input, 32-pixel floorplan, 16-cell height.
    pub fn desk() -> Self {
        Self {
            n: 512,
            stages: vec![(16, 4), (32, 4), (64, 4), (64, 2)],
            b_out: 32,
            h_out: 16,
            seed_grid: 4,
            seed_channels: 32,
            decoder_channels: vec![32, 16, 8],
            ..Self::default()
        }
    }

    /// Encoder output channels.
    pub fn channels(&self) -> usize {
        self.stages.last().map_or(self.m, |s| s.0)
    }

    /// Temporal length after every stage.
    pub fn stage_lengths(&self) -> Vec<usize> {
        let mut len = self.n;
        self.stages
            .iter()
            .map(|&(_, s)| {
                len /= s;
                len
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.stages.is_empty() {
            return Err(ModelError::Config("encoder needs at least one stage".into()));
        }
        let mut len = self.n;
        for &(c, s) in &self.stages {
            if c == 0 || s < 2 || s % 2 != 0 || len % s != 0 {
                return Err(ModelError::Config(format!("stage ({c}, {s}) does not evenly reduce length {len}")));
            }
            len /= s;
        }
        if self.decoder_channels.len() > self.stages.len() {
            return Err(ModelError::Config("more decoder blocks than encoder stages".into()));
        }
        if self.seed_grid << self.decoder_channels.len() != self.b_out {
            return Err(ModelError::Config(format!(
                "seed grid {} doubled {} times is not {}",
                self.seed_grid,
                self.decoder_channels.len(),
                self.b_out
            )));
        }
        if self.rho_gem < 1.0 || self.skip_len == 0 || self.seed_channels == 0 {
            return Err(ModelError::Config("rho_gem >= 1, skip_len > 0 and seed_channels > 0 required".into()));
        }
        Ok(())
    }
}

/// Per-channel generalized mean `(mean f^rho)^(1/rho)` of a `C×L` map.
pub fn aggregate(f: &[f64], channels: usize, rho: f64) -> Result<Vec<f64>, ModelError> {
    if channels == 0 || f.len() % channels != 0 {
        return Err(ModelError::Config(format!("{} features do not split into {channels} channels", f.len())));
    }
    let len = f.len() / channels;
    if rho != 1.0 {
        if let Some(&v) = f.iter().find(|&&v| v < 0.0) {
            return Err(ModelError::NegativeFeature { rho, value: v });
        }
    }
    Ok(f.chunks(len)
        .map(|c| {
            if rho == 1.0 {
                c.iter().sum::<f64>() / len as f64
            } else {
                (c.iter().map(|v| v.powf(rho)).sum::<f64>() / len as f64).powf(1.0 / rho)
            }
        })
        .collect())
}

/// Descriptor for one `C×L` map: `[a_SP; a_GeM]`, or either half alone.
pub fn assemble_descriptor(f: &[f64], channels: usize, mode: Aggregation, rho_gem: f64) -> Result<Vec<f64>, ModelError> {
    Ok(match mode {
        Aggregation::Sp => aggregate(f, channels, 1.0)?,
        Aggregation::Gem => aggregate(f, channels, rho_gem)?,
        Aggregation::SpGem => {
            let mut a = aggregate(f, channels, 1.0)?;
            a.extend(aggregate(f, channels, rho_gem)?);
            a
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_means() {
        assert!((aggregate(&[5.0, 5.0, 5.0], 1, 3.0).unwrap()[0] - 5.0).abs() < 1e-12);
        assert_eq!(aggregate(&[1.0, 2.0, 3.0], 1, 1.0).unwrap(), vec![2.0]);
        assert!((aggregate(&[1.0, 2.0, 3.0], 1, 3.0).unwrap()[0] - 12f64.cbrt()).abs() < 1e-12);
        assert!(matches!(aggregate(&[1.0, -2.0], 1, 3.0), Err(ModelError::NegativeFeature { .. })));
    }

    #[test]
    fn descriptor_layout() {
        let f = [1.0, 2.0, 3.0, 4.0, 4.0, 4.0];
        assert_eq!(assemble_descriptor(&f, 2, Aggregation::Sp, 3.0).unwrap().len(), 2);
        let a = assemble_descriptor(&f, 2, Aggregation::SpGem, 3.0).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(&a[..2], aggregate(&f, 2, 1.0).unwrap().as_slice());
        assert!((a[1] - a[3]).abs() < 1e-12);
    }

    #[test]
    fn profiles_validate() {
        EchoScanConfig::default().validate().unwrap();
        EchoScanConfig::desk().validate().unwrap();
        assert_eq!(EchoScanConfig::default().stage_lengths(), vec![256, 64, 16, 4]);
        assert_eq!(EchoScanConfig::desk().stage_lengths(), vec![128, 32, 8, 4]);
        let bad = EchoScanConfig { b_out: 30, ..EchoScanConfig::desk() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn aggregation_names() {
        for a in Aggregation::ALL {
            assert_eq!(a.as_str().parse::<Aggregation>().unwrap(), a);
            assert_eq!(serde_json::to_string(&a).unwrap(), format!("\"{}\"", a.as_str()));
        }
    }
}
