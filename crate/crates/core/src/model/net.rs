use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Aggregation, EchoScanConfig, ModelError};
use crate::tensor::{Element, Graph, ParamId, ParamStore, Tensor, Var};

#[derive(Clone, Debug)]
struct StageParams {
    down_w: ParamId,
    down_b: ParamId,
    norm1: (ParamId, ParamId),
    conv1: (ParamId, ParamId),
    norm2: (ParamId, ParamId),
    conv2: (ParamId, ParamId),
    stride: usize,
}

#[derive(Clone, Debug)]
struct BlockParams {
    skip_w: ParamId,
    skip_b: ParamId,
    conv_w: ParamId,
    conv_b: ParamId,
    /// Encoder stage feeding this block.
    stage: usize,
}

#[derive(Clone, Debug)]
struct Layout {
    stages: Vec<StageParams>,
    seed_w: ParamId,
    seed_b: ParamId,
    blocks: Vec<BlockParams>,
    out_w: ParamId,
    out_b: ParamId,
    height_w: ParamId,
    height_b: ParamId,
}

/// Graph handles produced by one forward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    /// `[B, b*b]` floorplan logits, row-major image per sample.
    pub fp_logits: Var,
    /// `[B, h]` height logits.
    pub h_logits: Var,
    /// `[B, C, L]` final encoder features.
    pub features: Var,
    /// Output of every encoder stage.
    pub stages: Vec<Var>,
    /// `[B, width]` aggregated descriptor.
    pub descriptor: Var,
}

#[derive(Clone, Debug)]
pub struct EchoScan<T> {
    pub cfg: EchoScanConfig,
    pub params: ParamStore<T>,
    layout: Layout,
}

fn pooled_len(len: usize, skip_len: usize) -> usize {
    if len > skip_len && len % skip_len == 0 {
        skip_len
    } else {
        len
    }
}

impl<T: Element> EchoScan<T> {
    /// He-initialised network; identical `(cfg, seed)` give identical weights.
    pub fn new(cfg: EchoScanConfig, seed: u64) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamStore::new();
        let mut stages = Vec::new();
        let mut cin = cfg.m;
        for (s, &(c, stride)) in cfg.stages.iter().enumerate() {
            let k = 2 * stride;
            let down_w = p.add_he(format!("enc.{s}.down.w"), &[c, cin, k], cin * k, &mut rng);
            let down_b = p.add_const(format!("enc.{s}.down.b"), &[c], 0.0);
            let norm1 = (p.add_const(format!("enc.{s}.norm1.g"), &[c], 1.0), p.add_const(format!("enc.{s}.norm1.b"), &[c], 0.0));
            let conv1 = (p.add_he(format!("enc.{s}.conv1.w"), &[c, c, 3], c * 3, &mut rng), p.add_const(format!("enc.{s}.conv1.b"), &[c], 0.0));
            let norm2 = (p.add_const(format!("enc.{s}.norm2.g"), &[c], 1.0), p.add_const(format!("enc.{s}.norm2.b"), &[c], 0.0));
            let conv2 = (p.add_he(format!("enc.{s}.conv2.w"), &[c, c, 3], c * 3, &mut rng), p.add_const(format!("enc.{s}.conv2.b"), &[c], 0.0));
            stages.push(StageParams { down_w, down_b, norm1, conv1, norm2, conv2, stride });
            cin = c;
        }
        let width = cfg.aggregation.width(cfg.channels());
        let s0 = cfg.seed_grid;
        let seed_w = p.add_he("dec.seed.w", &[cfg.seed_channels * s0 * s0, width], width, &mut rng);
        let seed_b = p.add_const("dec.seed.b", &[cfg.seed_channels * s0 * s0], 0.0);
        let lengths = cfg.stage_lengths();
        let mut blocks = Vec::new();
        let mut din = cfg.seed_channels;
        let mut side = s0;
        for (k, &dout) in cfg.decoder_channels.iter().enumerate() {
            side *= 2;
            let stage = cfg.stages.len() - 1 - k;
            let skip_in = cfg.stages[stage].0 * pooled_len(lengths[stage], cfg.skip_len);
            let skip_w = p.add_he(format!("dec.{k}.skip.w"), &[side * side, skip_in], skip_in, &mut rng);
            let skip_b = p.add_const(format!("dec.{k}.skip.b"), &[side * side], 0.0);
            let conv_w = p.add_he(format!("dec.{k}.conv.w"), &[dout, din + 1, 3, 3], (din + 1) * 9, &mut rng);
            let conv_b = p.add_const(format!("dec.{k}.conv.b"), &[dout], 0.0);
            blocks.push(BlockParams { skip_w, skip_b, conv_w, conv_b, stage });
            din = dout;
        }
        let out_w = p.add_he("dec.out.w", &[1, din, 1, 1], din, &mut rng);
        let out_b = p.add_const("dec.out.b", &[1], 0.0);
        let height_w = p.add_he("height.w", &[cfg.h_out, width], width, &mut rng);
        let height_b = p.add_const("height.b", &[cfg.h_out], 0.0);
        let layout = Layout { stages, seed_w, seed_b, blocks, out_w, out_b, height_w, height_b };
        Ok(Self { cfg, params: p, layout })
    }

    /// Same architecture with weights taken from `params` (e.g. a loaded
    /// checkpoint). Names and shapes must match.
    pub fn with_params(cfg: EchoScanConfig, params: ParamStore<T>) -> Result<Self, ModelError> {
        let template = Self::new(cfg, 0)?;
        if template.params.len() != params.len() {
            return Err(ModelError::Config(format!("expected {} tensors, got {}", template.params.len(), params.len())));
        }
        for (id, (name, t)) in template.params.ids().zip(params.iter()) {
            let want = template.params.get(id);
            if template.params.name(id) != name || want.shape() != t.shape() {
                return Err(ModelError::Config(format!("parameter {name} {:?} does not match {}", t.shape(), template.params.name(id))));
            }
        }
        Ok(Self { params, ..template })
    }

    pub fn cast<U: Element>(&self) -> EchoScan<U> {
        EchoScan { cfg: self.cfg.clone(), params: self.params.cast(), layout: self.layout.clone() }
    }

    /// Zero the final floorplan and height layers.
    pub fn zero_heads(&mut self) {
        for id in [self.layout.out_w, self.layout.out_b, self.layout.height_w, self.layout.height_b] {
            self.params.get_mut(id).data_mut().fill(T::zero());
        }
    }

    pub fn bind(&self, g: &mut Graph<T>) -> Vec<Var> {
        self.params.bind(g)
    }

    /// `x: [B, M, N]`; `vars` from [`EchoScan::bind`] on the same graph.
    pub fn forward(&self, g: &mut Graph<T>, vars: &[Var], x: Var) -> Result<Forward, ModelError> {
        let cfg = &self.cfg;
        let xs = g.shape(x).to_vec();
        if xs.len() != 3 || xs[1] != cfg.m || xs[2] != cfg.n {
            return Err(ModelError::Tensor(crate::tensor::TensorError::ShapeMismatch {
                op: "echoscan",
                detail: format!("input {xs:?}, expected [B, {}, {}]", cfg.m, cfg.n),
            }));
        }
        let batch = xs[0];
        let v = |id: ParamId| vars[id.index()];
        let mut y = x;
        let mut stage_out = Vec::new();
        for sp in &self.layout.stages {
            let d = g.conv1d(y, v(sp.down_w), Some(v(sp.down_b)), sp.stride, sp.stride / 2)?;
            let r = g.channel_norm(d, v(sp.norm1.0), v(sp.norm1.1))?;
            let r = g.relu(r);
            let r = g.conv1d(r, v(sp.conv1.0), Some(v(sp.conv1.1)), 1, 1)?;
            let r = g.channel_norm(r, v(sp.norm2.0), v(sp.norm2.1))?;
            let r = g.relu(r);
            let r = g.conv1d(r, v(sp.conv2.0), Some(v(sp.conv2.1)), 1, 1)?;
            let sum = g.add(d, r)?;
            y = g.relu(sum);
            stage_out.push(y);
        }
        let features = y;
        let descriptor = match cfg.aggregation {
            Aggregation::Sp => g.mean_last(features)?,
            Aggregation::Gem => self.gem(g, features)?,
            Aggregation::SpGem => {
                let sp = g.mean_last(features)?;
                let gem = self.gem(g, features)?;
                g.concat(&[sp, gem])?
            }
        };

        let s0 = cfg.seed_grid;
        let z = g.linear(descriptor, v(self.layout.seed_w), Some(v(self.layout.seed_b)))?;
        let z = g.relu(z);
        let mut z = g.reshape(z, &[batch, cfg.seed_channels, s0, s0])?;
        let mut side = s0;
        let lengths = cfg.stage_lengths();
        for bp in &self.layout.blocks {
            side *= 2;
            let up = g.upsample2d(z, 2)?;
            let feat = stage_out[bp.stage];
            let (c, len) = (cfg.stages[bp.stage].0, lengths[bp.stage]);
            let pooled = pooled_len(len, cfg.skip_len);
            let skip = if pooled < len {
                let grouped = g.reshape(feat, &[batch, c, pooled, len / pooled])?;
                g.mean_last(grouped)?
            } else {
                feat
            };
            let flat = g.reshape(skip, &[batch, c * pooled])?;
            let proj = g.linear(flat, v(bp.skip_w), Some(v(bp.skip_b)))?;
            let proj = g.reshape(proj, &[batch, 1, side, side])?;
            let cat = g.concat(&[up, proj])?;
            let conv = g.conv2d(cat, v(bp.conv_w), Some(v(bp.conv_b)), 1)?;
            z = g.relu(conv);
        }
        let out = g.conv2d(z, v(self.layout.out_w), Some(v(self.layout.out_b)), 0)?;
        let fp_logits = g.reshape(out, &[batch, cfg.b_out * cfg.b_out])?;
        let h_logits = g.linear(descriptor, v(self.layout.height_w), Some(v(self.layout.height_b)))?;
        Ok(Forward { fp_logits, h_logits, features, stages: stage_out, descriptor })
    }

    fn gem(&self, g: &mut Graph<T>, f: Var) -> Result<Var, ModelError> {
        let rho = self.cfg.rho_gem;
        let p = g.pow(f, rho);
        let m = g.mean_last(p)?;
        Ok(g.pow(m, 1.0 / rho))
    }

    /// Sigmoid outputs `(floorplan [B, b*b], height [B, h])` for `x: [B, M, N]`.
    pub fn predict(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>), ModelError> {
        let mut g = Graph::new();
        let vars: Vec<Var> = self.params.iter().map(|(_, t)| g.constant(t.clone())).collect();
        let xv = g.constant(x.clone());
        let out = self.forward(&mut g, &vars, xv)?;
        let fp = g.sigmoid(out.fp_logits);
        let h = g.sigmoid(out.h_logits);
        Ok((g.value(fp).clone(), g.value(h).clone()))
    }

    /// Encoder output `[B, C, L]` and descriptor `[B, width]`.
    pub fn encode(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>), ModelError> {
        let mut g = Graph::new();
        let vars: Vec<Var> = self.params.iter().map(|(_, t)| g.constant(t.clone())).collect();
        let xv = g.constant(x.clone());
        let out = self.forward(&mut g, &vars, xv)?;
        Ok((g.value(out.features).clone(), g.value(out.descriptor).clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> EchoScanConfig {
        EchoScanConfig {
            m: 2,
            n: 64,
            stages: vec![(4, 4), (8, 4)],
            b_out: 8,
            h_out: 4,
            aggregation: Aggregation::SpGem,
            rho_gem: 3.0,
            seed_grid: 4,
            seed_channels: 2,
            decoder_channels: vec![3],
            skip_len: 2,
        }
    }

    #[test]
    fn output_shapes() {
        for cfg in [tiny(), EchoScanConfig::desk()] {
            let net = EchoScan::<f32>::new(cfg.clone(), 1).unwrap();
            let x = Tensor::zeros(&[2, cfg.m, cfg.n]);
            let (fp, h) = net.predict(&x).unwrap();
            assert_eq!(fp.shape(), &[2, cfg.b_out * cfg.b_out]);
            assert_eq!(h.shape(), &[2, cfg.h_out]);
            let (f, a) = net.encode(&x).unwrap();
            assert_eq!(f.shape(), &[2, cfg.channels(), *cfg.stage_lengths().last().unwrap()]);
            assert_eq!(a.shape(), &[2, 2 * cfg.channels()]);
            assert!(f.data().iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }

    #[test]
    fn zero_heads_give_half() {
        let mut net = EchoScan::<f64>::new(tiny(), 3).unwrap();
        net.zero_heads();
        let x = Tensor::full(&[1, 2, 64], 0.3);
        let (fp, h) = net.predict(&x).unwrap();
        assert!(fp.data().iter().chain(h.data()).all(|&p| p == 0.5));
    }

    #[test]
    fn rejects_bad_input() {
        let net = EchoScan::<f32>::new(tiny(), 1).unwrap();
        assert!(net.predict(&Tensor::zeros(&[1, 2, 60])).is_err());
    }
}
