use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::dataset::{generate_dataset, Dataset, GenSpec};
use super::train::train;
use super::PipelineError;
use crate::model::Aggregation;
use crate::objective::{evaluate, MetricReport, ModelPredictor, Scored};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationArm {
    pub aggregation: Aggregation,
    pub first_order_only: bool,
    pub config_hash: String,
    /// Hash of the arm config with both switches reset to the base values;
    /// identical across arms when they differ only in the switches.
    pub base_hash: String,
    pub final_loss: f64,
    pub report: MetricReport,
    /// Per-room test scores, in test-set order, for paired comparisons.
    pub scores: Vec<Scored>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub arms: Vec<AblationArm>,
}

impl AblationReport {
    pub fn arm(&self, aggregation: Aggregation, first_order_only: bool) -> Option<&AblationArm> {
        self.arms.iter().find(|a| a.aggregation == aggregation && a.first_order_only == first_order_only)
    }
}

/// `base` with only the aggregation mode and reflection truncation changed.
pub fn arm_config(base: &RunConfig, aggregation: Aggregation, first_order_only: bool) -> RunConfig {
    let mut cfg = base.clone();
    cfg.model.aggregation = aggregation;
    cfg.sim.first_order_only = first_order_only;
    cfg
}

fn data_dir(work: &Path, first_order_only: bool) -> std::path::PathBuf {
    work.join(if first_order_only { "first_order" } else { "full_order" })
}

/// Train and test every arm of `base.ablation` under shared seeds. Datasets
/// are generated (or resumed) under `work`; arms with the same truncation
/// share data, and the two truncations share rooms and noise draws.
pub fn run_ablation(base: &RunConfig, work: &Path) -> Result<AblationReport, PipelineError> {
    base.validate()?;
    let mut arms = Vec::new();
    for &fo in &base.ablation.first_order {
        let data_cfg = arm_config(base, base.model.aggregation, fo);
        let dir = data_dir(work, fo);
        generate_dataset(&dir.join("train"), &GenSpec::train(&data_cfg))?;
        generate_dataset(&dir.join("test"), &GenSpec::test(&data_cfg))?;
        let train_ds = Dataset::open(&dir.join("train"))?;
        let test_ds = Dataset::open(&dir.join("test"))?;
        let (tr, va) = train_ds.split(base.dataset.val_fraction);
        for &agg in &base.ablation.aggregations {
            let cfg = arm_config(base, agg, fo);
            let reset = arm_config(&cfg, base.model.aggregation, base.sim.first_order_only);
            log::info!("ablation arm {} first_order_only={fo}", agg.as_str());
            let out = train(&cfg, &tr, &va, None)?;
            let (report, scores) = evaluate(&ModelPredictor { model: &out.model }, &test_ds.samples, 16)?;
            arms.push(AblationArm {
                aggregation: agg,
                first_order_only: fo,
                config_hash: cfg.hash(),
                base_hash: reset.hash(),
                final_loss: out.steps.last().map_or(f64::NAN, |s| s.loss.total),
                report,
                scores,
            });
        }
    }
    Ok(AblationReport { arms })
}
