//! Echo-based room geometry inference laboratory.
//!
//! * [`geometry`] synthesizes polygonal rooms and device poses.
//! * [`raster`] turns a room into device-centred ground-truth masks.
//! * [`acoustics`] simulates multichannel impulse responses with the
//!   image-source method.
//! * [`tensor`] is a small reverse-mode autodiff kernel with Adam.
//! * [`model`] is the encoder / multi-aggregation / dual-head decoder network.
//! * [`objective`] holds the losses and evaluation metrics.
//! * [`pipeline`] binds everything into dataset generation, training,
//!   evaluation and ablation drivers.

pub mod acoustics;
pub mod geometry;
pub mod model;
pub mod objective;
pub mod pipeline;
pub mod raster;
pub mod tensor;
