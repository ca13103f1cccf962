use ndarray::{ArrayViewMut, Dimension, Zip};

use super::{Gradients, TrainError};
use crate::phasor::PhasorNetwork;

/// RMSProp accumulator and hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct RmsPropState {
    /// Running mean of squared gradients, same layout as [`Gradients`].
    pub mean_square: Gradients,
    pub learning_rate: f64,
    pub decay_rho: f64,
    pub epsilon: f64,
    pub step: u64,
}

impl RmsPropState {
    pub fn new(net: &PhasorNetwork) -> Self {
        Self::with_hyperparameters(net, 1e-3, 0.9, 1e-8)
    }

    pub fn with_hyperparameters(net: &PhasorNetwork, learning_rate: f64, decay_rho: f64, epsilon: f64) -> Self {
        Self {
            mean_square: Gradients::zeros_like(net),
            learning_rate,
            decay_rho,
            epsilon,
            step: 0,
        }
    }

    fn check(&self) -> Result<(), TrainError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(self.learning_rate) && ok(self.decay_rho) && self.decay_rho < 1.0 && ok(self.epsilon)) {
            return Err(TrainError::BadHyperparameter(format!(
                "lr={} rho={} eps={}",
                self.learning_rate, self.decay_rho, self.epsilon
            )));
        }
        Ok(())
    }
}

fn update<D: Dimension>(
    mut params: ArrayViewMut<f64, D>,
    grads: &ndarray::Array<f64, D>,
    mut ms: ArrayViewMut<f64, D>,
    lr: f64,
    rho: f64,
    eps: f64,
) {
    Zip::from(&mut params).and(grads).and(&mut ms).for_each(|p, &g, s| {
        *s = rho * *s + (1.0 - rho) * g * g;
        *p -= lr * g / (s.sqrt() + eps);
    });
}

/// `s ← ρs + (1−ρ)g²; p ← p − lr·g/(√s + ε)` for every trainable parameter.
pub fn rmsprop_step(net: &mut PhasorNetwork, grads: &Gradients, state: &mut RmsPropState) -> Result<(), TrainError> {
    state.check()?;
    if grads.hidden_w.dim() != net.hidden.weights.dim()
        || grads.hidden_b.len() != net.hidden.bias.len()
        || grads.output_w.dim() != net.output.weights.dim()
        || grads.output_b.len() != net.output.bias.len()
    {
        return Err(TrainError::ShapeMismatch);
    }
    if let Some(&g) = grads.iter().find(|g| !g.is_finite()) {
        return Err(TrainError::NonFiniteGradient(g));
    }
    let (lr, rho, eps) = (state.learning_rate, state.decay_rho, state.epsilon);
    let ms = &mut state.mean_square;
    update(net.hidden.weights.view_mut(), &grads.hidden_w, ms.hidden_w.view_mut(), lr, rho, eps);
    update(net.hidden.bias.view_mut(), &grads.hidden_b, ms.hidden_b.view_mut(), lr, rho, eps);
    update(net.output.weights.view_mut(), &grads.output_w, ms.output_w.view_mut(), lr, rho, eps);
    update(net.output.bias.view_mut(), &grads.output_b, ms.output_b.view_mut(), lr, rho, eps);
    state.step += 1;
    Ok(())
}
