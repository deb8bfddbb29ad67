//! Central finite-difference gradient checking in `f64`.

use super::{Graph, Tensor, TensorError, Var};

/// Worst relative error between analytic and numerical gradients over all
/// `inputs`, measured per input as `‖a - n‖₂ / max(‖a‖₂, ‖n‖₂)`.
///
/// `build` receives a fresh graph and the inputs bound as tracked leaves and
/// must return a single-element root.
pub fn max_relative_error<F>(inputs: &[Tensor<f64>], step: f64, build: F) -> Result<f64, TensorError>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var, TensorError>,
{
    let eval = |values: &[Tensor<f64>]| -> Result<f64, TensorError> {
        let mut g = Graph::new();
        let vars: Vec<Var> = values.iter().map(|t| g.param(t.clone())).collect();
        let root = build(&mut g, &vars)?;
        Ok(g.value(root).data()[0])
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let root = build(&mut g, &vars)?;
    let grads = g.backward(root)?;

    let mut worst: f64 = 0.0;
    let mut probe = inputs.to_vec();
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.wrt(vars[k]);
        let mut numeric = vec![0.0; input.len()];
        for i in 0..input.len() {
            let x0 = input.data()[i];
            probe[k].data_mut()[i] = x0 + step;
            let up = eval(&probe)?;
            probe[k].data_mut()[i] = x0 - step;
            let down = eval(&probe)?;
            probe[k].data_mut()[i] = x0;
            numeric[i] = (up - down) / (2.0 * step);
        }
        worst = worst.max(relative_error(analytic.data(), &numeric));
    }
    Ok(worst)
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}
