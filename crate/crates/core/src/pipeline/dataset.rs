//! On-disk dataset: `manifest.json`, a packed `rirs.bin` of little-endian
//! `f32` records (channel-major `M×N` each) and one `gt/<id>.pgm` floorplan
//! per sample. Height vectors live in the manifest as bit strings.

use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::pgm::GrayImage;
use super::PipelineError;
use crate::acoustics::{simulate, SimConfig, NUM_MICS};
use crate::geometry::{derive_seed, mix64, rng_for, sample_room_seeded, RoomFamily, RoomSpec};
use crate::objective::EvalSample;
use crate::raster::{rasterize_floorplan, rasterize_height, HeightVector, RasterError};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";
pub const RIRS: &str = "rirs.bin";
/// Rooms that overflow the canvas are redrawn at most this many times.
pub const CANVAS_ATTEMPTS: u64 = 64;
const CHUNK: usize = 256;
const NOISE_SALT: u64 = 0x6e6f_6973_6500_0001;
const TEST_SALT: u64 = 0x7465_7374_0000_0001;

/// Everything that determines the bytes of a dataset directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub seed: u64,
    pub count: usize,
    pub families: Vec<RoomFamily>,
    pub b: usize,
    pub h: usize,
    pub pixel_size: f64,
    pub sim: SimConfig,
}

impl GenSpec {
    pub fn train(cfg: &RunConfig) -> Self {
        Self::with_seed(cfg, cfg.dataset.seed, cfg.dataset.train_count)
    }

    /// Same settings, independent room stream.
    pub fn test(cfg: &RunConfig) -> Self {
        Self::with_seed(cfg, mix64(cfg.dataset.seed ^ TEST_SALT), cfg.dataset.test_count)
    }

    fn with_seed(cfg: &RunConfig, seed: u64, count: usize) -> Self {
        let d = &cfg.dataset;
        Self { seed, count, families: d.families.clone(), b: d.b, h: d.h, pixel_size: d.pixel_size, sim: cfg.sim.clone() }
    }

    /// Family of sample `index`, round-robin over `families`.
    pub fn family(&self, index: usize) -> RoomFamily {
        self.families[index % self.families.len()]
    }

    fn record_bytes(&self) -> u64 {
        (NUM_MICS * self.sim.n * 4) as u64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub index: usize,
    pub family: RoomFamily,
    /// Seed the room was finally drawn from.
    pub seed: u64,
    pub los_label: crate::geometry::Visibility,
    pub room: RoomSpec,
    pub snr_db: Option<f64>,
    /// Byte offset of the record in `rirs.bin`.
    pub offset: u64,
    pub len: u64,
    pub gt_path: String,
    pub height_bits: String,
    /// Draws discarded because the room overflowed the canvas.
    pub regenerations: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub spec: GenSpec,
    pub m: usize,
    pub n: usize,
    pub samples: Vec<SampleRecord>,
}

impl Manifest {
    pub fn family_counts(&self) -> std::collections::BTreeMap<RoomFamily, usize> {
        let mut out = std::collections::BTreeMap::new();
        for s in &self.samples {
            *out.entry(s.family).or_insert(0) += 1;
        }
        out
    }
}

struct Generated {
    record: SampleRecord,
    rir: Vec<f32>,
    gt: GrayImage,
}

fn generate_one(spec: &GenSpec, index: usize) -> Result<Generated, PipelineError> {
    let family = spec.family(index);
    let base = derive_seed(spec.seed, index as u64);
    for attempt in 0..CANVAS_ATTEMPTS {
        let seed = if attempt == 0 { base } else { derive_seed(base, attempt) };
        let room = sample_room_seeded(family, seed)?;
        let fp = match rasterize_floorplan(&room, spec.b, spec.pixel_size) {
            Ok(fp) => fp,
            Err(e @ RasterError::RoomExceedsCanvas { .. }) => {
                log::debug!("sample {index} seed {seed}: {e}; redrawing");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let hv = match rasterize_height(&room, spec.h, spec.pixel_size) {
            Ok(hv) => hv,
            Err(e @ RasterError::HeightExceedsCanvas { .. }) => {
                log::debug!("sample {index} seed {seed}: {e}; redrawing");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let mut rng = rng_for(mix64(seed ^ NOISE_SALT));
        let rir = simulate(&room, &spec.sim, &mut rng)?;
        let id = format!("{index:07}");
        let record = SampleRecord {
            gt_path: format!("gt/{id}.pgm"),
            id,
            index,
            family,
            seed,
            los_label: room.los_label,
            snr_db: rir.snr_db,
            room,
            offset: 0,
            len: spec.record_bytes(),
            height_bits: hv.to_bit_string(),
            regenerations: attempt,
        };
        return Ok(Generated { record, rir: rir.samples, gt: GrayImage::from_mask(spec.b, &fp.pixels)? });
    }
    Err(PipelineError::Format(format!("sample {index}: no room fitting the canvas after {CANVAS_ATTEMPTS} draws")))
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), PipelineError> {
    let tmp = dir.join("manifest.json.tmp");
    let text = serde_json::to_string_pretty(manifest).map_err(|e| PipelineError::Format(e.to_string()))?;
    fs::write(&tmp, text).map_err(|e| PipelineError::io(&tmp, e))?;
    let path = dir.join(MANIFEST);
    fs::rename(&tmp, &path).map_err(|e| PipelineError::io(&path, e))
}

/// Generate `spec.count` samples into `dir`. An existing manifest with the
/// same spec is resumed: samples it lists are kept, anything written after
/// it is discarded, and generation continues from the next index.
pub fn generate_dataset(dir: &Path, spec: &GenSpec) -> Result<Manifest, PipelineError> {
    if spec.families.is_empty() || spec.families.contains(&RoomFamily::Imported) {
        return Err(PipelineError::Config("generation needs at least one standard family".into()));
    }
    let gt_dir = dir.join("gt");
    fs::create_dir_all(&gt_dir).map_err(|e| PipelineError::io(&gt_dir, e))?;
    let manifest_path = dir.join(MANIFEST);
    let mut manifest = if manifest_path.exists() {
        let m = read_manifest(dir)?;
        if m.spec.seed != spec.seed || m.spec.families != spec.families || m.spec.b != spec.b || m.spec.h != spec.h || m.spec.pixel_size != spec.pixel_size || m.spec.sim != spec.sim {
            return Err(PipelineError::Config(format!("{} holds a dataset with different settings", dir.display())));
        }
        m
    } else {
        Manifest { version: MANIFEST_VERSION, spec: spec.clone(), m: NUM_MICS, n: spec.sim.n, samples: Vec::new() }
    };
    manifest.samples.truncate(spec.count);
    manifest.spec.count = spec.count;
    let rir_path = dir.join(RIRS);
    let mut rirs = OpenOptions::new().create(true).truncate(false).read(true).write(true).open(&rir_path).map_err(|e| PipelineError::io(&rir_path, e))?;
    let mut end = manifest.samples.len() as u64 * spec.record_bytes();
    rirs.set_len(end).map_err(|e| PipelineError::io(&rir_path, e))?;
    rirs.seek(SeekFrom::Start(end)).map_err(|e| PipelineError::io(&rir_path, e))?;

    let mut next = manifest.samples.len();
    while next < spec.count {
        let stop = (next + CHUNK).min(spec.count);
        let batch: Vec<Generated> = (next..stop).into_par_iter().map(|i| generate_one(spec, i)).collect::<Result<_, _>>()?;
        let mut bytes = Vec::with_capacity(batch.len() * spec.record_bytes() as usize);
        for mut g in batch {
            g.gt.write(&dir.join(&g.record.gt_path))?;
            g.record.offset = end;
            end += g.record.len;
            bytes.extend(g.rir.iter().flat_map(|v| v.to_le_bytes()));
            manifest.samples.push(g.record);
        }
        rirs.write_all(&bytes).map_err(|e| PipelineError::io(&rir_path, e))?;
        rirs.sync_data().map_err(|e| PipelineError::io(&rir_path, e))?;
        write_manifest(dir, &manifest)?;
        log::info!("{}: {stop}/{} samples", dir.display(), spec.count);
        next = stop;
    }
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, PipelineError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| PipelineError::Format(format!("{}: {e}", path.display())))?;
    if m.version != MANIFEST_VERSION {
        return Err(PipelineError::Format(format!("manifest version {} is not {MANIFEST_VERSION}", m.version)));
    }
    Ok(m)
}

/// Scale a sample so its largest magnitude is one.
pub fn normalize_input(x: &mut [f32]) {
    let peak = x.iter().fold(0.0f32, |a, &v| a.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v /= peak);
    }
}

/// A loaded dataset directory.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub manifest: Manifest,
    pub samples: Vec<EvalSample>,
}

impl Dataset {
    /// Read and integrity-check every record. Inputs are peak-normalized.
    pub fn open(dir: &Path) -> Result<Self, PipelineError> {
        let manifest = read_manifest(dir)?;
        let rir_path = dir.join(RIRS);
        let mut file = File::open(&rir_path).map_err(|e| PipelineError::io(&rir_path, e))?;
        let size = file.metadata().map_err(|e| PipelineError::io(&rir_path, e))?.len();
        let want = (manifest.m * manifest.n * 4) as u64;
        let mut ids = std::collections::HashSet::new();
        let mut samples = Vec::with_capacity(manifest.samples.len());
        let mut buf = vec![0u8; want as usize];
        for r in &manifest.samples {
            if !ids.insert(&r.id) {
                return Err(PipelineError::Format(format!("duplicate sample id {}", r.id)));
            }
            if r.len != want || r.offset + r.len > size {
                return Err(PipelineError::Format(format!("sample {}: record [{}, +{}) invalid for {size}-byte data file", r.id, r.offset, r.len)));
            }
            file.seek(SeekFrom::Start(r.offset)).map_err(|e| PipelineError::io(&rir_path, e))?;
            file.read_exact(&mut buf).map_err(|e| PipelineError::io(&rir_path, e))?;
            let mut input: Vec<f32> = buf.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            normalize_input(&mut input);
            let gt = GrayImage::read(&dir.join(&r.gt_path))?;
            if gt.width != manifest.spec.b || gt.height != manifest.spec.b {
                return Err(PipelineError::Format(format!("sample {}: floorplan is {}x{}", r.id, gt.width, gt.height)));
            }
            let hv = HeightVector::from_bit_string(&r.height_bits, manifest.spec.pixel_size)?;
            if hv.h != manifest.spec.h {
                return Err(PipelineError::Format(format!("sample {}: height vector has {} cells", r.id, hv.h)));
            }
            samples.push(EvalSample {
                id: r.id.clone(),
                family: r.family,
                visibility: r.los_label,
                input,
                m: manifest.m,
                n: manifest.n,
                gt_fp: gt.values.iter().map(|&v| (v >= 0.5) as u8).collect(),
                gt_h: hv.pixels,
            });
        }
        Ok(Self { manifest, samples })
    }

    /// Fixed split: the last `fraction` of samples (at least one when the
    /// fraction is positive and there are two or more samples) is held out.
    pub fn split(&self, fraction: f64) -> (Vec<EvalSample>, Vec<EvalSample>) {
        let n = self.samples.len();
        let mut held = (n as f64 * fraction).round() as usize;
        if fraction > 0.0 && n >= 2 {
            held = held.clamp(1, n - 1);
        }
        let cut = n - held.min(n);
        (self.samples[..cut].to_vec(), self.samples[cut..].to_vec())
    }
}
