use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use echo_lab::geometry::RoomFamily;
use echo_lab::model::grad_cam;
use echo_lab::objective::{evaluate, ModelPredictor, Predictor};
use echo_lab::pipeline::{generate_dataset, load_model, run_ablation, train, Dataset, GenSpec, GrayImage, RunConfig};
use echo_lab::tensor::Tensor;

const SEED_ENV: &str = "ECHO_LAB_SEED";

#[derive(Parser)]
#[command(name = "echo-lab", version, about = "Room geometry from simulated echoes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run-config JSON; missing keys come from the named profile.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed; falls back to $ECHO_LAB_SEED.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset directory.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Restrict to these families (repeatable).
        #[arg(long)]
        family: Vec<RoomFamily>,
        #[arg(long)]
        count: Option<usize>,
        /// `train` uses the dataset seed directly, `test` an independent stream.
        #[arg(long, default_value = "train", value_parser = ["train", "test"])]
        split: String,
    },
    /// Train a model on a dataset; writes `model.ckpt` into `--out`.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Print a MetricReport for a checkpoint on a dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Grad-CAM temporal saliency of one sample.
    Saliency {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// PGM output; without it the values are printed as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and test every ablation arm; prints the comparison as JSON.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        work: PathBuf,
    },
    /// Write a sample's ground-truth floorplan, beside the prediction when a
    /// checkpoint is given.
    Render {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Pixel upscaling factor.
        #[arg(long, default_value_t = 4)]
        scale: usize,
    },
}

fn seed_override(flag: Option<u64>) -> Result<Option<u64>, String> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| format!("{SEED_ENV}={v:?} is not an unsigned integer")),
        Err(_) => Ok(None),
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    Ok(match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::desk(),
    })
}

fn sample_at(ds: &Dataset, index: usize) -> Result<&echo_lab::objective::EvalSample> {
    match ds.samples.get(index) {
        Some(s) => Ok(s),
        None => bail!("index {index} out of range for {} samples", ds.samples.len()),
    }
}

fn write_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(command: Command, seed: Option<u64>) -> Result<()> {
    match command {
        Command::Gen { common, out, family, count, split } => {
            let mut cfg = load_config(&common)?;
            if let Some(s) = seed {
                cfg.dataset.seed = s;
            }
            if !family.is_empty() {
                cfg.dataset.families = family;
            }
            if let Some(n) = count {
                cfg.dataset.train_count = n;
                cfg.dataset.test_count = n;
            }
            cfg.validate()?;
            let spec = if split == "test" { GenSpec::test(&cfg) } else { GenSpec::train(&cfg) };
            let m = generate_dataset(&out, &spec)?;
            eprintln!("{}: {} samples", out.display(), m.samples.len());
        }
        Command::Train { common, dataset, out, steps, batch_size } => {
            let mut cfg = load_config(&common)?;
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            if let Some(s) = steps {
                cfg.train.steps = s;
            }
            if let Some(b) = batch_size {
                cfg.train.batch_size = b;
            }
            let ds = Dataset::open(&dataset)?;
            let (tr, va) = ds.split(cfg.dataset.val_fraction);
            std::fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
            cfg.save(&out.join("run-config.json"))?;
            let outcome = train(&cfg, &tr, &va, Some(&out))?;
            let log = serde_json::json!({ "steps": outcome.steps, "validation": outcome.val });
            std::fs::write(out.join("train-log.json"), serde_json::to_string(&log)?).context("writing train log")?;
            eprintln!("wrote {}", out.join("model.ckpt").display());
        }
        Command::Eval { common, checkpoint, dataset } => {
            let cfg = load_config(&common)?;
            let model = load_model(&checkpoint, Some(&cfg.model))?;
            let ds = Dataset::open(&dataset)?;
            let (report, _) = evaluate(&ModelPredictor { model: &model }, &ds.samples, 16)?;
            write_json(&report)?;
        }
        Command::Saliency { common, checkpoint, dataset, index, out } => {
            let cfg = load_config(&common)?;
            let model = load_model(&checkpoint, Some(&cfg.model))?;
            let ds = Dataset::open(&dataset)?;
            let s = sample_at(&ds, index)?;
            let x = Tensor::new(vec![1, s.m, s.n], s.input.clone())?;
            let map = grad_cam(&model, &x)?;
            match out {
                Some(path) => {
                    let rows = 32;
                    let values = (0..rows).flat_map(|_| map.iter().copied()).collect();
                    GrayImage::new(map.len(), rows, values)?.write(&path)?;
                }
                None => write_json(&map)?,
            }
        }
        Command::Ablate { common, work } => {
            let mut cfg = load_config(&common)?;
            if let Some(s) = seed {
                cfg.dataset.seed = s;
                cfg.train.seed = s;
            }
            write_json(&run_ablation(&cfg, &work)?)?;
        }
        Command::Render { common, dataset, index, checkpoint, out, scale } => {
            let ds = Dataset::open(&dataset)?;
            let s = sample_at(&ds, index)?;
            let b = ds.manifest.spec.b;
            let mut panels = vec![GrayImage::from_mask(b, &s.gt_fp)?];
            if let Some(path) = checkpoint {
                let cfg = load_config(&common)?;
                let model = load_model(&path, Some(&cfg.model))?;
                let pred = ModelPredictor { model: &model }.predict(&[s])?;
                panels.push(GrayImage::new(b, b, pred[0].0.clone())?);
            }
            write_image(&out, &GrayImage::side_by_side(&panels).upscale(scale.max(1)))?;
        }
    }
    Ok(())
}

fn write_image(path: &Path, img: &GrayImage) -> Result<()> {
    img.write(path)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let flag = match &cli.command {
        Command::Gen { common, .. }
        | Command::Train { common, .. }
        | Command::Eval { common, .. }
        | Command::Saliency { common, .. }
        | Command::Ablate { common, .. }
        | Command::Render { common, .. } => common.seed,
    };
    let seed = match seed_override(flag) {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    match run(cli.command, seed) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
