use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::augment::apply_time_masks;
use super::config::RunConfig;
use super::PipelineError;
use crate::geometry::{mix64, rng_for};
use crate::model::{EchoScan, EchoScanConfig};
use crate::objective::{evaluate, total_loss_graph, EvalSample, LossParts, ModelPredictor};
use crate::tensor::{adam_step, load_checkpoint, save_checkpoint, AdamState, Graph, Tensor};

const BATCH_SALT: u64 = 0x6261_7463_6800_0001;
const MASK_SALT: u64 = 0x6d61_736b_0000_0001;
const EVAL_BATCH: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: u64,
    pub lr: f64,
    pub loss: LossParts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValLog {
    pub step: u64,
    pub iou_2d: f64,
    pub iou_3d: f64,
    pub mse_h: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: EchoScan<f32>,
    /// Loss of every step.
    pub steps: Vec<StepLog>,
    pub val: Vec<ValLog>,
}

/// Stack samples into `x: [B, M, N]`, `gt_lw: [B, b*b]` and `gt_h: [B, h]`.
pub fn assemble_batch(batch: &[&EvalSample]) -> Result<(Tensor<f32>, Tensor<f32>, Tensor<f32>), PipelineError> {
    let first = batch.first().ok_or_else(|| PipelineError::Config("empty batch".into()))?;
    let (m, n, p, h) = (first.m, first.n, first.gt_fp.len(), first.gt_h.len());
    let mut x = Vec::with_capacity(batch.len() * m * n);
    let mut lw = Vec::with_capacity(batch.len() * p);
    let mut hv = Vec::with_capacity(batch.len() * h);
    for s in batch {
        x.extend_from_slice(&s.input);
        lw.extend(s.gt_fp.iter().map(|&v| v as f32));
        hv.extend(s.gt_h.iter().map(|&v| v as f32));
    }
    let b = batch.len();
    Ok((Tensor::new(vec![b, m, n], x)?, Tensor::new(vec![b, p], lw)?, Tensor::new(vec![b, h], hv)?))
}

/// Loss of `model` on one batch, without augmentation.
pub fn batch_loss(model: &EchoScan<f32>, batch: &[&EvalSample], run: &RunConfig) -> Result<LossParts, PipelineError> {
    let (x, lw, h) = assemble_batch(batch)?;
    let mut g = Graph::new();
    let vars = model.bind(&mut g);
    let xv = g.constant(x);
    let out = model.forward(&mut g, &vars, xv)?;
    Ok(total_loss_graph(&mut g, out.fp_logits, out.h_logits, &lw, &h, run.train.weights)?.parts)
}

/// One Adam update on `batch`; returns the loss before the update.
pub fn train_step(
    model: &mut EchoScan<f32>,
    state: &mut AdamState<f32>,
    x: Tensor<f32>,
    lw: &Tensor<f32>,
    h: &Tensor<f32>,
    run: &RunConfig,
    lr: f64,
) -> Result<LossParts, PipelineError> {
    let mut g = Graph::new();
    let vars = model.bind(&mut g);
    let xv = g.constant(x);
    let out = model.forward(&mut g, &vars, xv)?;
    let loss = total_loss_graph(&mut g, out.fp_logits, out.h_logits, lw, h, run.train.weights)?;
    if !loss.parts.total.is_finite() {
        return Ok(loss.parts);
    }
    let grads = g.backward(loss.total)?;
    let grads: Vec<Tensor<f32>> = vars.iter().map(|&v| grads.wrt(v)).collect();
    adam_step(&mut model.params, &grads, state, lr);
    Ok(loss.parts)
}

fn dump_non_finite(dir: &Path, step: u64, lr: f64, ids: &[String], parts: &LossParts, model: &EchoScan<f32>) -> PathBuf {
    let norms: Vec<(String, f64)> = model
        .params
        .iter()
        .map(|(name, t)| (name.to_string(), t.data().iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()))
        .collect();
    let report = serde_json::json!({ "step": step, "lr": lr, "batch": ids, "loss": parts, "param_norms": norms });
    let path = dir.join(format!("nan-step-{step}.json"));
    if let Err(e) = std::fs::write(&path, serde_json::to_string_pretty(&report).unwrap_or_default()) {
        log::error!("could not write {}: {e}", path.display());
    }
    path
}

fn validate(model: &EchoScan<f32>, val: &[EvalSample], step: u64) -> Result<ValLog, PipelineError> {
    let (r, _) = evaluate(&ModelPredictor { model }, val, EVAL_BATCH)?;
    Ok(ValLog { step, iou_2d: r.iou_2d, iou_3d: r.iou_3d, mse_h: r.mse_h })
}

/// Train a fresh model on `train_set`. Batches are drawn from per-epoch
/// shuffles; validation runs every `val_every` steps and after the last one.
/// With `out_dir`, periodic checkpoints, the final `model.ckpt` and any
/// non-finite-loss diagnostics are written there.
pub fn train(run: &RunConfig, train_set: &[EvalSample], val_set: &[EvalSample], out_dir: Option<&Path>) -> Result<TrainOutcome, PipelineError> {
    run.validate()?;
    if train_set.is_empty() {
        return Err(PipelineError::Config("training set is empty".into()));
    }
    let tc = &run.train;
    let mut model = EchoScan::<f32>::new(run.model.clone(), tc.seed)?;
    let mut state = AdamState::new(&model.params);
    let mut order_rng = rng_for(mix64(tc.seed ^ BATCH_SALT));
    let mut mask_rng = rng_for(mix64(tc.seed ^ MASK_SALT));
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut steps = Vec::with_capacity(tc.steps as usize);
    let mut val = Vec::new();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    for step in 0..tc.steps {
        let mut batch = Vec::with_capacity(tc.batch_size);
        while batch.len() < tc.batch_size {
            if cursor == order.len() {
                order = (0..train_set.len()).collect();
                order.shuffle(&mut order_rng);
                cursor = 0;
            }
            batch.push(&train_set[order[cursor]]);
            cursor += 1;
        }
        let (mut x, lw, h) = assemble_batch(&batch)?;
        if tc.augment {
            let (m, n) = (batch[0].m, batch[0].n);
            for sample in x.data_mut().chunks_mut(m * n) {
                apply_time_masks(sample, m, n, &tc.mask, &mut mask_rng);
            }
        }
        let lr = tc.schedule.lr_at(step);
        let parts = train_step(&mut model, &mut state, x, &lw, &h, run, lr)?;
        if !parts.total.is_finite() {
            let ids: Vec<String> = batch.iter().map(|s| s.id.clone()).collect();
            let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(std::env::temp_dir);
            let dump = dump_non_finite(&dir, step, lr, &ids, &parts, &model);
            return Err(PipelineError::NonFiniteLoss { step, dump: dump.display().to_string() });
        }
        if tc.log_every > 0 && step % tc.log_every == 0 {
            log::info!("step {step} lr {lr:.3e} loss {:.5} (mse_lw {:.5} dice {:.5} mse_h {:.5})", parts.total, parts.mse_lw, parts.dice_lw, parts.mse_h);
        }
        steps.push(StepLog { step, lr, loss: parts });
        let done = step + 1;
        if !val_set.is_empty() && tc.val_every > 0 && done % tc.val_every == 0 {
            let v = validate(&model, val_set, done)?;
            log::info!("step {done} validation iou_2d {:.4} iou_3d {:.4}", v.iou_2d, v.iou_3d);
            val.push(v);
        }
        if let Some(dir) = out_dir {
            if tc.checkpoint_every > 0 && done % tc.checkpoint_every == 0 && done < tc.steps {
                save_model(&dir.join(format!("checkpoint-{done}.ckpt")), &model)?;
            }
        }
    }
    if !val_set.is_empty() && val.last().is_none_or(|v| v.step != tc.steps) {
        val.push(validate(&model, val_set, tc.steps)?);
    }
    if let Some(dir) = out_dir {
        save_model(&dir.join("model.ckpt"), &model)?;
    }
    Ok(TrainOutcome { model, steps, val })
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Checkpoint plus a `<path>.json` holding the model config.
pub fn save_model(path: &Path, model: &EchoScan<f32>) -> Result<(), PipelineError> {
    save_checkpoint(&model.params, path)?;
    let side = sidecar(path);
    let text = serde_json::to_string_pretty(&model.cfg).map_err(|e| PipelineError::Format(e.to_string()))?;
    std::fs::write(&side, text).map_err(|e| PipelineError::io(&side, e))
}

/// Load a checkpoint. The config comes from the `<path>.json` sidecar when
/// present, otherwise from `fallback`.
pub fn load_model(path: &Path, fallback: Option<&EchoScanConfig>) -> Result<EchoScan<f32>, PipelineError> {
    let side = sidecar(path);
    let cfg = if side.exists() {
        let text = std::fs::read_to_string(&side).map_err(|e| PipelineError::io(&side, e))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Format(format!("{}: {e}", side.display())))?
    } else {
        fallback.cloned().ok_or_else(|| PipelineError::Config(format!("{} has no config sidecar; pass a run-config", path.display())))?
    };
    let params = load_checkpoint(path).map_err(|e| match e {
        crate::tensor::TensorError::Io(source) => PipelineError::io(path, source),
        other => other.into(),
    })?;
    Ok(EchoScan::with_params(cfg, params)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{RoomFamily, Visibility};

    fn toy_run() -> RunConfig {
        let mut run = RunConfig::desk();
        run.model = EchoScanConfig {
            m: 6,
            n: 64,
            stages: vec![(4, 4), (8, 4)],
            b_out: 8,
            h_out: 4,
            seed_grid: 4,
            seed_channels: 4,
            decoder_channels: vec![4],
            skip_len: 2,
            ..EchoScanConfig::desk()
        };
        run.sim.n = 64;
        run.dataset.b = 8;
        run.dataset.h = 4;
        run.train.batch_size = 2;
        run.train.steps = 3;
        run.train.val_every = 2;
        run
    }

    fn toy_samples(k: usize) -> Vec<EvalSample> {
        (0..k)
            .map(|i| EvalSample {
                id: format!("s{i}"),
                family: RoomFamily::Shoebox,
                visibility: Visibility::Los,
                input: (0..6 * 64).map(|t| (((t * (i + 3)) % 17) as f32 / 17.0) - 0.4).collect(),
                m: 6,
                n: 64,
                gt_fp: (0..64).map(|p| ((p / 8 + i) % 3 == 0) as u8).collect(),
                gt_h: vec![0, 1, 1, 0],
            })
            .collect()
    }

    #[test]
    fn one_step_lowers_batch_loss() {
        let run = toy_run();
        let samples = toy_samples(2);
        let refs: Vec<&EvalSample> = samples.iter().collect();
        let mut model = EchoScan::<f32>::new(run.model.clone(), 1).unwrap();
        let mut state = AdamState::new(&model.params);
        let before = batch_loss(&model, &refs, &run).unwrap().total;
        let (x, lw, h) = assemble_batch(&refs).unwrap();
        train_step(&mut model, &mut state, x, &lw, &h, &run, 1e-3).unwrap();
        let after = batch_loss(&model, &refs, &run).unwrap().total;
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn deterministic_and_checkpoint_round_trip() {
        let run = toy_run();
        let samples = toy_samples(5);
        let dir = tempfile::tempdir().unwrap();
        let a = train(&run, &samples[..4], &samples[4..], Some(dir.path())).unwrap();
        let b = train(&run, &samples[..4], &samples[4..], None).unwrap();
        assert_eq!(a.steps, b.steps);
        assert_eq!(a.val, b.val);
        assert_eq!(a.val.iter().map(|v| v.step).collect::<Vec<_>>(), vec![2, 3]);
        let loaded = load_model(&dir.path().join("model.ckpt"), None).unwrap();
        let again = validate(&loaded, &samples[4..], 3).unwrap();
        assert_eq!(&again, a.val.last().unwrap());
    }
}
