use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{enumerate_image_sources_capped, truncate_first_order, AcousticsError, ImageSource, ORDER_CAP};
use crate::geometry::{DevicePose, RoomSpec};

pub const SPEED_OF_SOUND: f64 = 343.0;
pub const SAMPLE_RATE: f64 = 8000.0;
pub const NUM_MICS: usize = 6;
pub const RING_RADIUS: f64 = 0.05;
pub const SNR_RANGE_DB: (f64, f64) = (10.0, 20.0);

/// Microphones on a horizontal ring around the loudspeaker.
#[derive(Clone, Debug, PartialEq)]
pub struct MicArray {
    pub mic_positions: Vec<[f64; 3]>,
    pub source: [f64; 3],
}

impl MicArray {
    /// Six microphones at angles `2πm/6`, 5 cm from the device.
    pub fn ring(device: DevicePose) -> Self {
        let mic_positions = (0..NUM_MICS)
            .map(|m| {
                let a = 2.0 * PI * m as f64 / NUM_MICS as f64;
                [device.x + RING_RADIUS * a.cos(), device.y + RING_RADIUS * a.sin(), device.z]
            })
            .collect();
        Self { mic_positions, source: [device.x, device.y, device.z] }
    }
}

/// `M×N` impulse responses, channel-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RirSet {
    pub samples: Vec<f32>,
    pub m: usize,
    pub n: usize,
    pub fs: f64,
    /// SNR of the added noise, if any.
    pub snr_db: Option<f64>,
}

impl RirSet {
    pub fn zeros(m: usize, n: usize, fs: f64) -> Self {
        Self { samples: vec![0.0; m * n], m, n, fs, snr_db: None }
    }

    pub fn channel(&self, i: usize) -> &[f32] {
        &self.samples[i * self.n..(i + 1) * self.n]
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|&x| (x as f64) * (x as f64)).sum()
    }

    /// Index of the first non-zero bin over all channels.
    pub fn first_nonzero_bin(&self) -> Option<usize> {
        (0..self.m).filter_map(|c| self.channel(c).iter().position(|&x| x != 0.0)).min()
    }
}

/// Simulation settings shared by dataset generation and the ablations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub fs: f64,
    pub n: usize,
    pub speed_of_sound: f64,
    pub order_cap: usize,
    pub first_order_only: bool,
    pub snr_db: (f64, f64),
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { fs: SAMPLE_RATE, n: 1024, speed_of_sound: SPEED_OF_SOUND, order_cap: ORDER_CAP, first_order_only: false, snr_db: SNR_RANGE_DB }
    }
}

impl SimConfig {
    pub fn desk() -> Self {
        Self { n: 512, ..Self::default() }
    }

    /// Longest path that still lands inside the `n`-sample window.
    pub fn max_dist(&self) -> f64 {
        self.speed_of_sound * self.n as f64 / self.fs
    }
}

/// Each image deposits `amplitude / distance` at `t = distance·fs/c`,
/// split linearly over the two neighbouring bins.
pub fn synthesize_rir(images: &[ImageSource], array: &MicArray, fs: f64, n: usize, c: f64) -> RirSet {
    let m = array.mic_positions.len();
    let mut acc = vec![0.0f64; m * n];
    for (ch, mic) in array.mic_positions.iter().enumerate() {
        let out = &mut acc[ch * n..(ch + 1) * n];
        for img in images {
            let d = ((img.position[0] - mic[0]).powi(2) + (img.position[1] - mic[1]).powi(2) + (img.position[2] - mic[2]).powi(2)).sqrt();
            let t = d * fs / c;
            let i0 = t.floor();
            if i0 < 0.0 || i0 >= n as f64 {
                continue;
            }
            let (i0, frac) = (i0 as usize, t - i0);
            let a = img.amplitude / d;
            out[i0] += (1.0 - frac) * a;
            if i0 + 1 < n {
                out[i0 + 1] += frac * a;
            }
        }
    }
    RirSet { samples: acc.into_iter().map(|x| x as f32).collect(), m, n, fs, snr_db: None }
}

/// Noise-free impulse responses of `spec` under `cfg`.
pub fn simulate_clean(spec: &RoomSpec, cfg: &SimConfig) -> RirSet {
    // Mics sit up to one ring radius farther from an image than the device.
    let reach = cfg.max_dist() + RING_RADIUS;
    let mut images = enumerate_image_sources_capped(spec, reach, cfg.order_cap);
    if cfg.first_order_only {
        images = truncate_first_order(&images);
    }
    synthesize_rir(&images, &MicArray::ring(spec.device), cfg.fs, cfg.n, cfg.speed_of_sound)
}

/// Add white Gaussian noise whose total energy is exactly
/// `energy / 10^(snr_db/10)`.
pub fn add_noise_at(rir: &RirSet, snr_db: f64, rng: &mut impl Rng) -> Result<RirSet, AcousticsError> {
    let e = rir.energy();
    if e <= 0.0 {
        return Err(AcousticsError::ZeroEnergyRir);
    }
    let mut out = rir.clone();
    out.snr_db = Some(snr_db);
    let target = e / 10f64.powf(snr_db / 10.0);
    let noise: Vec<f64> = (0..rir.samples.len()).map(|_| StandardNormal.sample(rng)).collect();
    let ne: f64 = noise.iter().map(|x| x * x).sum();
    if target == 0.0 || ne == 0.0 {
        return Ok(out);
    }
    let k = (target / ne).sqrt();
    for (s, z) in out.samples.iter_mut().zip(noise) {
        *s = (*s as f64 + k * z) as f32;
    }
    Ok(out)
}

/// Noise at an SNR drawn uniformly from `range_db`.
pub fn add_noise(rir: &RirSet, range_db: (f64, f64), rng: &mut impl Rng) -> Result<RirSet, AcousticsError> {
    let snr = if range_db.0 == range_db.1 { range_db.0 } else { rng.random_range(range_db.0..=range_db.1) };
    add_noise_at(rir, snr, rng)
}

/// Full measurement: clean simulation followed by noise.
pub fn simulate(spec: &RoomSpec, cfg: &SimConfig, rng: &mut impl Rng) -> Result<RirSet, AcousticsError> {
    add_noise(&simulate_clean(spec, cfg), cfg.snr_db, rng)
}
