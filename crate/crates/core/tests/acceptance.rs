//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test --release --test acceptance` runs everything; pass criterion
//! numbers (`-- 3 7`) to run a subset.

mod common;

use std::path::Path;
use std::time::Instant;

use echo_lab::geometry::{derive_seed, rng_for, sample_room_seeded, RoomFamily, Visibility};
use echo_lab::model::{aggregate, EchoScan, EchoScanConfig};
use echo_lab::objective::{dice_loss, evaluate, iou, pit_height_loss, total_loss_graph, LossWeights, ModelPredictor};
use echo_lab::pipeline::{generate_dataset, run_ablation, train, AblationConfig, Dataset, GenSpec, RunConfig};
use echo_lab::tensor::gradcheck::{max_relative_error, relative_error};
use echo_lab::tensor::{lr_at, Graph, LrSchedule, Tensor, TensorError, Var};
use rand::Rng;

type Outcome = Result<String, String>;

// Tolerances.
const TOA_TOL_SAMPLES: f64 = 1.0;
const TOA_BUDGET_S: f64 = 30.0;
const OP_GRAD_TOL: f64 = 1e-4;
const MODEL_GRAD_TOL: f64 = 1e-3;
/// Both analytic and numeric gradient norms below this count as an exact
/// zero (biases ahead of a normalisation).
const ZERO_GRAD: f64 = 1e-9;
const GRAD_BUDGET_S: f64 = 120.0;
const GEM_WORKED_TOL: f64 = 1e-6;
const MEMO_IOU: f64 = 0.90;
const MEMO_MSE_H: f64 = 5e-3;
const MEMO_BUDGET_S: f64 = 1800.0;
/// Allowed excess of the first-order arm, in standard errors of the paired
/// per-room IOU difference.
const ABLATION_NOISE_SE: f64 = 2.0;
const ABLATION_BUDGET_S: f64 = 7200.0;
const LR_TOL: f64 = 1e-15;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_budget(start: Instant, budget: f64, detail: String) -> Outcome {
    let t = start.elapsed().as_secs_f64();
    check(t < budget, format!("{detail}; {t:.1} s of {budget:.0} s"))
}

fn c1_simulation_fidelity() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let room = sample_room_seeded(RoomFamily::Shoebox, derive_seed(1, i)).map_err(|e| e.to_string())?;
        let err = common::first_order_toa_error(&room, 8000.0, 1024).ok_or(format!("room {i}: first-order image set differs from the mirror oracle"))?;
        worst = worst.max(err);
    }
    if worst > TOA_TOL_SAMPLES {
        return Err(format!("worst first-order TOA gap {worst:.3} samples > {TOA_TOL_SAMPLES}"));
    }
    within_budget(start, TOA_BUDGET_S, format!("100 shoebox rooms, worst TOA gap {worst:.3} samples"))
}

fn signed(rng: &mut impl Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(0.05..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

fn positive(rng: &mut impl Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(0.2..1.5)).collect()).unwrap()
}

type Build = Box<dyn Fn(&mut Graph<f64>, &[Var]) -> Result<Var, TensorError>>;

fn op_cases(seed: u64) -> Vec<(&'static str, Vec<Tensor<f64>>, Build)> {
    let mut rng = rng_for(seed);
    let s = [2, 3, 5];
    let a = signed(&mut rng, &s);
    let b = signed(&mut rng, &s);
    let p = positive(&mut rng, &s);
    let x4 = signed(&mut rng, &[2, 2, 3, 4]);
    let y4 = signed(&mut rng, &[2, 3, 3, 4]);
    let target = Tensor::new(vec![2, 6], (0..12).map(|i| ((i * 7 + seed as usize) % 3 == 0) as u8 as f64).collect()).unwrap();
    let probs = Tensor::new(vec![2, 6], (0..12).map(|_| rng.random_range(0.05..0.95)).collect()).unwrap();
    vec![
        ("add", vec![a.clone(), b.clone()], Box::new(|g, v| g.add(v[0], v[1]))),
        ("sub", vec![a.clone(), b.clone()], Box::new(|g, v| g.sub(v[0], v[1]))),
        ("mul", vec![a.clone(), b.clone()], Box::new(|g, v| g.mul(v[0], v[1]))),
        ("div", vec![a.clone(), p.clone()], Box::new(|g, v| g.div(v[0], v[1]))),
        ("scale", vec![a.clone()], Box::new(|g, v| Ok(g.scale(v[0], -1.3)))),
        ("add_scalar", vec![a.clone()], Box::new(|g, v| Ok(g.add_scalar(v[0], 0.7)))),
        ("relu", vec![a.clone()], Box::new(|g, v| Ok(g.relu(v[0])))),
        ("sigmoid", vec![a.clone()], Box::new(|g, v| Ok(g.sigmoid(v[0])))),
        ("pow", vec![p.clone()], Box::new(|g, v| Ok(g.pow(v[0], 3.0)))),
        ("reshape", vec![a.clone()], Box::new(|g, v| g.reshape(v[0], &[6, 5]))),
        ("sum_last", vec![a.clone()], Box::new(|g, v| g.sum_last(v[0]))),
        ("mean_last", vec![a.clone()], Box::new(|g, v| g.mean_last(v[0]))),
        ("sum_all", vec![a.clone()], Box::new(|g, v| Ok(g.sum_all(v[0])))),
        ("mean_all", vec![a.clone()], Box::new(|g, v| Ok(g.mean_all(v[0])))),
        ("gather", vec![a.clone()], Box::new(|g, v| g.gather(v[0], vec![29, 0, 4, 4, 17], &[5]))),
        ("linear", vec![signed(&mut rng, &[3, 4]), signed(&mut rng, &[2, 4]), signed(&mut rng, &[2])], Box::new(|g, v| g.linear(v[0], v[1], Some(v[2])))),
        (
            "conv1d",
            vec![signed(&mut rng, &[2, 3, 12]), signed(&mut rng, &[4, 3, 4]), signed(&mut rng, &[4])],
            Box::new(|g, v| g.conv1d(v[0], v[1], Some(v[2]), 2, 1)),
        ),
        ("conv2d", vec![x4.clone(), signed(&mut rng, &[3, 2, 3, 3]), signed(&mut rng, &[3])], Box::new(|g, v| g.conv2d(v[0], v[1], Some(v[2]), 1))),
        ("upsample2d", vec![x4.clone()], Box::new(|g, v| g.upsample2d(v[0], 2))),
        ("concat", vec![x4, y4], Box::new(|g, v| g.concat(&[v[0], v[1]]))),
        ("channel_norm", vec![signed(&mut rng, &[2, 3, 7]), signed(&mut rng, &[3]), signed(&mut rng, &[3])], Box::new(|g, v| g.channel_norm(v[0], v[1], v[2]))),
        ("dice", vec![probs], Box::new(move |g, v| g.dice(v[0], &target))),
    ]
}

/// Desk-profile network with a two-room batch; every parameter tensor is
/// probed at sampled coordinates and along random full-parameter directions.
fn model_gradient_error() -> Result<(f64, usize, usize), String> {
    let cfg = EchoScanConfig::desk();
    let mut model = EchoScan::<f64>::new(cfg.clone(), 11).map_err(|e| e.to_string())?;
    let mut rng = rng_for(12);
    let x = signed(&mut rng, &[2, cfg.m, cfg.n]);
    let lw = Tensor::new(vec![2, cfg.b_out * cfg.b_out], (0..2 * cfg.b_out * cfg.b_out).map(|_| rng.random_bool(0.4) as u8 as f64).collect()).unwrap();
    let h = Tensor::new(vec![2, cfg.h_out], (0..2 * cfg.h_out).map(|k| ((k % cfg.h_out) >= 5 && (k % cfg.h_out) < 12) as u8 as f64).collect()).unwrap();
    let loss = |m: &EchoScan<f64>, grads: bool| -> Result<(f64, Vec<Tensor<f64>>), String> {
        let mut g = Graph::new();
        let vars = m.bind(&mut g);
        let xv = g.constant(x.clone());
        let out = m.forward(&mut g, &vars, xv).map_err(|e| e.to_string())?;
        let l = total_loss_graph(&mut g, out.fp_logits, out.h_logits, &lw, &h, LossWeights::default()).map_err(|e| e.to_string())?;
        let value = g.value(l.total).data()[0];
        if !grads {
            return Ok((value, Vec::new()));
        }
        let gr = g.backward(l.total).map_err(|e| e.to_string())?;
        Ok((value, vars.iter().map(|&v| gr.wrt(v)).collect()))
    };
    let (_, analytic) = loss(&model, true)?;
    let step = 1e-5;
    let ids: Vec<_> = model.params.ids().collect();
    let mut worst: f64 = 0.0;
    let mut probes = 0;
    let mut zero_tensors = 0;
    for (k, &id) in ids.iter().enumerate() {
        let len = model.params.get(id).len();
        let coords: Vec<usize> = if len <= 6 { (0..len).collect() } else { (0..6).map(|_| rng.random_range(0..len)).collect() };
        let mut a = Vec::new();
        let mut n = Vec::new();
        for &c in &coords {
            let x0 = model.params.get(id).data()[c];
            model.params.get_mut(id).data_mut()[c] = x0 + step;
            let up = loss(&model, false)?.0;
            model.params.get_mut(id).data_mut()[c] = x0 - step;
            let down = loss(&model, false)?.0;
            model.params.get_mut(id).data_mut()[c] = x0;
            a.push(analytic[k].data()[c]);
            n.push((up - down) / (2.0 * step));
            probes += 1;
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm(&a) < ZERO_GRAD && norm(&n) < ZERO_GRAD {
            zero_tensors += 1;
            continue;
        }
        let e = relative_error(&a, &n);
        if e > worst {
            worst = e;
        }
    }
    for _ in 0..3 {
        let dirs: Vec<Vec<f64>> = ids.iter().map(|&id| (0..model.params.get(id).len()).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let shift = |m: &mut EchoScan<f64>, s: f64| {
            for (k, &id) in ids.iter().enumerate() {
                m.params.get_mut(id).data_mut().iter_mut().zip(&dirs[k]).for_each(|(p, d)| *p += s * d);
            }
        };
        let along: f64 = analytic.iter().zip(&dirs).map(|(g, d)| g.data().iter().zip(d).map(|(a, b)| a * b).sum::<f64>()).sum();
        let mut m = model.clone();
        shift(&mut m, step);
        let up = loss(&m, false)?.0;
        shift(&mut m, -2.0 * step);
        let down = loss(&m, false)?.0;
        worst = worst.max(relative_error(&[along], &[(up - down) / (2.0 * step)]));
        probes += 1;
    }
    Ok((worst, probes, zero_tensors))
}

fn c2_autodiff() -> Outcome {
    let start = Instant::now();
    let mut worst_op: (f64, &str) = (0.0, "");
    for seed in 0..3 {
        for (name, inputs, build) in op_cases(100 + seed) {
            let err = max_relative_error(&inputs, 1e-5, |g, v| {
                let y = build(g, v)?;
                let shape = g.shape(y).to_vec();
                let n: usize = shape.iter().product();
                let w = g.constant(Tensor::new(shape, (0..n).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect()).unwrap());
                let p = g.mul(y, w)?;
                Ok(g.sum_all(p))
            })
            .map_err(|e| format!("{name}: {e}"))?;
            if err > worst_op.0 {
                worst_op = (err, name);
            }
        }
    }
    if worst_op.0 >= OP_GRAD_TOL {
        return Err(format!("op {} relative error {:.2e} >= {OP_GRAD_TOL:e}", worst_op.1, worst_op.0));
    }
    let (model_err, probes, zeros) = model_gradient_error()?;
    if model_err >= MODEL_GRAD_TOL {
        return Err(format!("desk model relative error {model_err:.2e} >= {MODEL_GRAD_TOL:e}"));
    }
    within_budget(
        start,
        GRAD_BUDGET_S,
        format!("22 ops x 3 seeds worst {:.2e} ({}); desk model worst {model_err:.2e} over {probes} probes ({zeros} tensors with vanishing gradient)", worst_op.0, worst_op.1),
    )
}

fn pixel_oracle(p: &[u8], t: &[u8]) -> (usize, usize, usize) {
    let mut both = 0;
    let mut only_p = 0;
    let mut only_t = 0;
    for (&a, &b) in p.iter().zip(t) {
        match (a, b) {
            (1, 1) => both += 1,
            (1, 0) => only_p += 1,
            (0, 1) => only_t += 1,
            _ => {}
        }
    }
    (both, only_p, only_t)
}

fn c3_metric_oracles() -> Outcome {
    let mut rng = rng_for(3);
    for case in 0..1000 {
        let density = rng.random_range(0.0..1.0);
        let p: Vec<u8> = (0..64).map(|_| rng.random_bool(density) as u8).collect();
        let t: Vec<u8> = (0..64).map(|_| rng.random_bool(density) as u8).collect();
        let (both, op, ot) = pixel_oracle(&p, &t);
        let pf: Vec<f64> = p.iter().map(|&v| v as f64).collect();
        let tf: Vec<f64> = t.iter().map(|&v| v as f64).collect();
        let union = both + op + ot;
        let want_iou = if union == 0 { 1.0 } else { both as f64 / union as f64 };
        let mass = 2 * both + op + ot;
        let want_dice = if mass == 0 { 0.0 } else { 1.0 - (2 * both) as f64 / mass as f64 };
        let (gi, gd) = (iou(&pf, &tf).unwrap(), dice_loss(&pf, &tf).unwrap());
        if gi != want_iou || gd != want_dice {
            return Err(format!("case {case}: iou {gi} vs {want_iou}, dice {gd} vs {want_dice}"));
        }
    }
    let d = dice_loss(&[1.0, 1.0, 0.0], &[0.0, 1.0, 1.0]).unwrap();
    let i = iou(&[1.0, 1.0, 1.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
    check(d == 0.5 && i == 1.0 / 3.0, format!("1000 random 8x8 pairs exact; worked dice {d}, iou {i}"))
}

fn c4_pit() -> Outcome {
    let mut rng = rng_for(4);
    for case in 0..1000 {
        let n = rng.random_range(1..48);
        let pred: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let t: Vec<f64> = (0..n).map(|_| rng.random_bool(0.5) as u8 as f64).collect();
        let r: Vec<f64> = t.iter().rev().copied().collect();
        let (a, b) = (pit_height_loss(&pred, &t).unwrap().0, pit_height_loss(&pred, &r).unwrap().0);
        if a != b {
            return Err(format!("case {case}: {a} vs {b} after reversing the target"));
        }
    }
    Ok("1000 random cases bit-identical under target reversal".into())
}

fn c5_aggregation() -> Outcome {
    let mut rng = rng_for(5);
    let mut min_gap = f64::INFINITY;
    for case in 0..1000 {
        let c = rng.random_range(1..6);
        let l = rng.random_range(1..40);
        let f: Vec<f64> = (0..c * l).map(|_| rng.random_range(0.0..10.0)).collect();
        let sp = aggregate(&f, c, 1.0).unwrap();
        let gem = aggregate(&f, c, 3.0).unwrap();
        for ch in 0..c {
            let max = f[ch * l..(ch + 1) * l].iter().copied().fold(0.0, f64::max);
            if !(sp[ch] <= gem[ch] * (1.0 + 1e-12) && gem[ch] <= max * (1.0 + 1e-12)) {
                return Err(format!("case {case} channel {ch}: SP {} GeM {} max {max}", sp[ch], gem[ch]));
            }
            min_gap = min_gap.min(gem[ch] - sp[ch]);
        }
        let v = rng.random_range(0.0..10.0);
        let constant = vec![v; c * l];
        for (a, b) in aggregate(&constant, c, 1.0).unwrap().iter().zip(aggregate(&constant, c, 3.0).unwrap()) {
            if (a - v).abs() > 1e-12 * v.max(1.0) || (b - v).abs() > 1e-12 * v.max(1.0) {
                return Err(format!("case {case}: constant {v} aggregated to {a}, {b}"));
            }
        }
    }
    let worked = aggregate(&[1.0, 2.0, 3.0], 1, 3.0).unwrap()[0];
    check((worked - 2.2894).abs() < 1e-4 && (worked - 12f64.cbrt()).abs() < GEM_WORKED_TOL, format!("1000 maps ordered; GeM of [1,2,3] = {worked:.6}"))
}

fn c6_memorization() -> Outcome {
    let start = Instant::now();
    let mut run = RunConfig::desk();
    run.dataset.families = vec![RoomFamily::Shoebox, RoomFamily::L];
    run.train.batch_size = 8;
    run.train.steps = 2000;
    run.train.val_every = 0;
    run.train.checkpoint_every = 0;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    generate_dataset(dir.path(), &GenSpec { count: 16, ..GenSpec::train(&run) }).map_err(|e| e.to_string())?;
    let ds = Dataset::open(dir.path()).map_err(|e| e.to_string())?;
    let out = train(&run, &ds.samples, &[], None).map_err(|e| e.to_string())?;
    let (r, _) = evaluate(&ModelPredictor { model: &out.model }, &ds.samples, 16).map_err(|e| e.to_string())?;
    let detail = format!("16 rooms, 2000 steps, batch 8: IOU2D {:.4} (>= {MEMO_IOU}), height MSE {:.2e} (<= {MEMO_MSE_H:e})", r.iou_2d, r.mse_h);
    if r.iou_2d < MEMO_IOU || r.mse_h > MEMO_MSE_H {
        return Err(detail);
    }
    within_budget(start, MEMO_BUDGET_S, detail)
}

fn c7_los() -> Outcome {
    let mut nlos = 0;
    let mut per_family = [0usize; 5];
    for i in 0..1000u64 {
        let fam = RoomFamily::STANDARD[(i % 5) as usize];
        let room = sample_room_seeded(fam, derive_seed(77, i)).map_err(|e| e.to_string())?;
        let oracle = common::ray_cast_los(&room.polygon, room.device.xy());
        if oracle != room.los_label {
            return Err(format!("room {i} ({}): classifier {:?}, ray oracle {oracle:?}", fam.as_str(), room.los_label));
        }
        if oracle == Visibility::Nlos {
            nlos += 1;
            per_family[(i % 5) as usize] += 1;
        }
    }
    Ok(format!("1000 rooms agree; NLOS {nlos} (L {}, T {})", per_family[3], per_family[4]))
}

fn c8_first_order_ablation() -> Outcome {
    let start = Instant::now();
    let mut base = RunConfig::desk();
    base.dataset.train_count = 1000;
    base.dataset.test_count = 200;
    base.dataset.seed = 8;
    base.train.seed = 8;
    base.train.batch_size = 16;
    base.train.steps = 2000;
    base.train.val_every = 0;
    base.train.checkpoint_every = 0;
    base.ablation = AblationConfig { aggregations: vec![base.model.aggregation], first_order: vec![false, true] };
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report = run_ablation(&base, work.path()).map_err(|e| e.to_string())?;
    let full = report.arm(base.model.aggregation, false).ok_or("missing full-order arm")?;
    let first = report.arm(base.model.aggregation, true).ok_or("missing first-order arm")?;
    if full.base_hash != first.base_hash || full.config_hash == first.config_hash {
        return Err("arms differ in more than the reflection switch".into());
    }
    let diffs: Vec<f64> = full
        .scores
        .iter()
        .zip(&first.scores)
        .filter(|(a, _)| !a.family.is_convex_family())
        .map(|(a, b)| {
            assert_eq!(a.id, b.id);
            b.iou_2d - a.iou_2d
        })
        .collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let se = sd / n.sqrt();
    let nc = |a: &echo_lab::pipeline::AblationArm| a.report.by_convexity["non_convex"].as_ref().map_or(f64::NAN, |g| g.iou_2d);
    let detail = format!(
        "non-convex IOU2D full {:.4} vs first-order {:.4} over {} rooms; paired excess {mean:+.4} (allowed {:.4} = {ABLATION_NOISE_SE} SE)",
        nc(full),
        nc(first),
        diffs.len(),
        ABLATION_NOISE_SE * se
    );
    if mean > ABLATION_NOISE_SE * se {
        return Err(detail);
    }
    within_budget(start, ABLATION_BUDGET_S, detail)
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn c9_schedule_and_determinism() -> Outcome {
    let s = LrSchedule::default();
    let (warm, end) = (lr_at(s.warmup, &s), lr_at(s.warmup + s.cycle_len, &s));
    if (warm - 1e-2).abs() > LR_TOL || (end - 1e-6).abs() > LR_TOL {
        return Err(format!("lr at warmup end {warm:e}, at cycle end {end:e}"));
    }
    let mut run = RunConfig::desk();
    run.train.batch_size = 4;
    run.train.steps = 30;
    run.train.val_every = 10;
    let spec = GenSpec { count: 10, ..GenSpec::train(&run) };
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    generate_dataset(a.path(), &spec).map_err(|e| e.to_string())?;
    generate_dataset(b.path(), &spec).map_err(|e| e.to_string())?;
    let (fa, fb) = (dir_bytes(a.path()), dir_bytes(b.path()));
    if fa != fb {
        return Err("two generations of the same dataset differ".into());
    }
    let ds = Dataset::open(a.path()).map_err(|e| e.to_string())?;
    let (tr, va) = ds.split(0.2);
    let r1 = train(&run, &tr, &va, None).map_err(|e| e.to_string())?;
    let r2 = train(&run, &tr, &va, None).map_err(|e| e.to_string())?;
    let same_params = r1.model.params.iter().zip(r2.model.params.iter()).all(|(x, y)| x.1.data() == y.1.data());
    check(
        r1.steps == r2.steps && r1.val == r2.val && same_params,
        format!("lr {warm:e} at step {}, {end:e} at step {}; {} dataset files identical; 30-step trajectories identical", s.warmup, s.warmup + s.cycle_len, fa.len()),
    )
}

fn main() {
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("simulation fidelity", c1_simulation_fidelity),
        ("autodiff correctness", c2_autodiff),
        ("metric and loss oracles", c3_metric_oracles),
        ("PIT reversal invariance", c4_pit),
        ("aggregation properties", c5_aggregation),
        ("memorization run", c6_memorization),
        ("LOS/NLOS classifier", c7_los),
        ("first-order ablation direction", c8_first_order_ablation),
        ("scheduler endpoints and determinism", c9_schedule_and_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let num = (i + 1).to_string();
        if !wanted.is_empty() && !wanted.contains(&num) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let t = start.elapsed().as_secs_f64();
        match result {
            Ok(d) => println!("PASS {num} {name}: {d} [{t:.1} s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL {num} {name}: {d} [{t:.1} s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
