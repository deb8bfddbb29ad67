//! Image-source simulation of multichannel room impulse responses.

mod images;
mod materials;
mod synth;

pub use images::{enumerate_image_sources, enumerate_image_sources_capped, truncate_first_order, ImageSource, ORDER_CAP};
pub use materials::{assign_materials, Material, MaterialAssignment, CEILING_MATERIALS, FLOOR_MATERIALS, SIDEWALL_MATERIALS};
pub use synth::{
    add_noise, add_noise_at, simulate, simulate_clean, synthesize_rir, MicArray, RirSet, SimConfig, NUM_MICS, RING_RADIUS, SAMPLE_RATE,
    SNR_RANGE_DB, SPEED_OF_SOUND,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AcousticsError {
    #[error("impulse response has zero energy")]
    ZeroEnergyRir,
}
