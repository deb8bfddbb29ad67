use super::{EchoScan, ModelError};
use crate::tensor::{Element, Graph, Tensor};

/// Linear resampling of `v` onto `n` points, treating each input value as
/// the centre of an equal-width cell.
pub fn interpolate_to_length(v: &[f64], n: usize) -> Vec<f64> {
    let l = v.len();
    if l == 0 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            let u = ((i as f64 + 0.5) * l as f64 / n as f64 - 0.5).clamp(0.0, (l - 1) as f64);
            let i0 = u.floor() as usize;
            let i1 = (i0 + 1).min(l - 1);
            let f = u - i0 as f64;
            (1.0 - f) * v[i0] + f * v[i1]
        })
        .collect()
}

/// Saliency from one `C×L` feature map and its gradient: channel weights are
/// the mean gradient over `L`, the map is `relu(Σ_c w_c F_c)` resampled to
/// `n` points and divided by its maximum.
pub fn cam_from_features(features: &[f64], grads: &[f64], channels: usize, n: usize) -> Vec<f64> {
    let len = features.len() / channels;
    let weights: Vec<f64> = grads.chunks(len).map(|g| g.iter().sum::<f64>() / len as f64).collect();
    let raw: Vec<f64> = (0..len)
        .map(|l| (0..channels).map(|c| weights[c] * features[c * len + l]).sum::<f64>().max(0.0))
        .collect();
    let mut map = interpolate_to_length(&raw, n);
    let peak = map.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        map.iter_mut().for_each(|v| *v /= peak);
    }
    map
}

/// Temporal saliency of `x: [1, M, N]` for the summed floorplan
/// probabilities. Returns `N` values in `[0, 1]`.
pub fn grad_cam<T: Element>(model: &EchoScan<T>, x: &Tensor<T>) -> Result<Vec<f64>, ModelError> {
    let mut g = Graph::new();
    let vars = model.bind(&mut g);
    let xv = g.constant(x.clone());
    let out = model.forward(&mut g, &vars, xv)?;
    let probs = g.sigmoid(out.fp_logits);
    let target = g.sum_all(probs);
    let grads = g.backward(target)?;
    let f = g.value(out.features);
    let shape = f.shape().to_vec();
    if shape[0] != 1 {
        return Err(ModelError::Config(format!("saliency expects a single example, got batch {}", shape[0])));
    }
    Ok(cam_from_features(&f.to_f64_vec(), &grads.wrt(out.features).to_f64_vec(), shape[1], model.cfg.n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EchoScanConfig;

    #[test]
    fn toy_single_channel() {
        // F = [2, 1], dF = [0.5, 1.5]: weight 1.0, map [2, 1] -> normalized [1, 0.5].
        let m = cam_from_features(&[2.0, 1.0], &[0.5, 1.5], 1, 2);
        assert_eq!(m, vec![1.0, 0.5]);
        let m4 = cam_from_features(&[2.0, 1.0], &[0.5, 1.5], 1, 4);
        assert_eq!(m4, vec![1.0, 0.875, 0.625, 0.5]);
        // Negative weight clips everything to zero.
        assert_eq!(cam_from_features(&[2.0, 1.0], &[-1.0, -1.0], 1, 3), vec![0.0; 3]);
    }

    #[test]
    fn zeroed_head_gives_empty_map() {
        let mut net = EchoScan::<f64>::new(EchoScanConfig::desk(), 2).unwrap();
        net.zero_heads();
        let x = Tensor::full(&[1, 6, 512], 0.1);
        let map = grad_cam(&net, &x).unwrap();
        assert_eq!(map.len(), 512);
        assert!(map.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn map_is_normalized() {
        let net = EchoScan::<f32>::new(EchoScanConfig::desk(), 5).unwrap();
        let data: Vec<f64> = (0..6 * 512).map(|i| ((i * 37 % 101) as f64 / 101.0) - 0.3).collect();
        let x = Tensor::from_f64(&[1, 6, 512], &data).unwrap();
        let map = grad_cam(&net, &x).unwrap();
        assert_eq!(map.len(), 512);
        assert!(map.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
