use rand::Rng;

use super::config::MaskConfig;
use crate::acoustics::RirSet;

/// Zero `cfg.count` contiguous spans of `x` (`m` channels of `n` samples,
/// channel-major), each of length drawn from `{0..=max_len}` at a uniform
/// offset. The same spans are cut from every channel. Returns `(start, len)`
/// of each mask.
pub fn apply_time_masks(x: &mut [f32], m: usize, n: usize, cfg: &MaskConfig, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut spans = Vec::with_capacity(cfg.count);
    for _ in 0..cfg.count {
        let len = rng.random_range(0..=cfg.max_len).min(n);
        let start = rng.random_range(0..=n - len);
        for c in 0..m {
            x[c * n + start..][..len].fill(0.0);
        }
        spans.push((start, len));
    }
    spans
}

/// Three masks of up to 100 samples, shared across microphones.
pub fn time_mask_augment(rir: &RirSet, rng: &mut impl Rng) -> RirSet {
    let mut out = rir.clone();
    apply_time_masks(&mut out.samples, out.m, out.n, &MaskConfig::default(), rng);
    out
}
