//! Analytic gradients of the cosine loss through the two trainable layers.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

use super::TrainError;
use crate::phasor::{angle_of, LabelCode, PhasorLayer, PhasorNetwork, MAGNITUDE_FLOOR};

/// Gradients for every trainable parameter of a [`PhasorNetwork`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub hidden_w: Array2<f64>,
    pub hidden_b: Array1<f64>,
    pub output_w: Array2<f64>,
    pub output_b: Array1<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &PhasorNetwork) -> Self {
        Self {
            hidden_w: Array2::zeros(net.hidden.weights.dim()),
            hidden_b: Array1::zeros(net.hidden.bias.len()),
            output_w: Array2::zeros(net.output.weights.dim()),
            output_b: Array1::zeros(net.output.bias.len()),
        }
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Every gradient value in a fixed order: hidden weights, hidden bias,
    /// output weights, output bias.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.hidden_w
            .iter()
            .chain(self.hidden_b.iter())
            .chain(self.output_w.iter())
            .chain(self.output_b.iter())
    }
}

/// Intermediate values of one layer kept for the backward pass.
struct LayerTape {
    cos: Array2<f64>,
    sin: Array2<f64>,
    re: Array2<f64>,
    im: Array2<f64>,
    out: Array2<f64>,
}

fn forward_taped(layer: &PhasorLayer, x: ArrayView2<f64>) -> LayerTape {
    let cos = x.mapv(|v| (PI * v).cos());
    let sin = x.mapv(|v| (PI * v).sin());
    let wt = layer.weights.t();
    let mut re = cos.dot(&wt);
    re += &layer.bias.view().insert_axis(Axis(0));
    let im = sin.dot(&wt);
    let out = angle_of(&re, &im);
    LayerTape { cos, sin, re, im, out }
}

/// Turns `∂L/∂output` into `(∂L/∂re, ∂L/∂im)` using
/// `∂atan2(v,u)/π = (u·dv − v·du) / (π(u² + v²))`; zero below the magnitude floor.
fn through_angle(tape: &LayerTape, d_out: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let mut du = Array2::zeros(d_out.dim());
    let mut dv = Array2::zeros(d_out.dim());
    Zip::from(&mut du)
        .and(&mut dv)
        .and(d_out)
        .and(&tape.re)
        .and(&tape.im)
        .for_each(|du, dv, &g, &u, &v| {
            let r2 = u * u + v * v;
            if r2 >= MAGNITUDE_FLOOR * MAGNITUDE_FLOOR {
                *du = -g * v / (PI * r2);
                *dv = g * u / (PI * r2);
            }
        });
    (du, dv)
}

fn weight_grads(tape: &LayerTape, du: &Array2<f64>, dv: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
    let gw = du.t().dot(&tape.cos) + dv.t().dot(&tape.sin);
    let gb = du.sum_axis(Axis(0));
    (gw, gb)
}

/// Per-example losses and the gradient of the mean batch loss.
///
/// `pixels` holds normalized images as rows; the projection layer is held
/// fixed and receives no gradient.
pub fn backprop_gradients(
    net: &PhasorNetwork,
    pixels: ArrayView2<f64>,
    labels: &[u8],
    code: &LabelCode,
) -> Result<(f64, Gradients), TrainError> {
    let batch = pixels.nrows();
    if batch == 0 {
        return Err(TrainError::EmptyBatch);
    }
    if labels.len() != batch {
        return Err(TrainError::LabelCount {
            images: batch,
            labels: labels.len(),
        });
    }
    let n_classes = net.n_classes();
    let mut target = Array2::from_elem((batch, n_classes), code.off);
    for (i, &l) in labels.iter().enumerate() {
        let l = l as usize;
        if l >= n_classes {
            return Err(TrainError::LabelOutOfRange { label: l, n_classes });
        }
        target[[i, l]] = code.on;
    }

    let projected = net.project_batch(pixels);
    let hidden = forward_taped(&net.hidden, projected.view());
    let output = forward_taped(&net.output, hidden.out.view());

    // L = mean over the batch of 1 − mean_k cos(π(y_k − t_k))
    let scale = 1.0 / (batch * n_classes) as f64;
    let diff = &output.out - &target;
    let loss = diff.mapv(|d| 1.0 - (PI * d).cos()).sum() * scale;
    if !loss.is_finite() {
        return Err(TrainError::NonFiniteLoss {
            loss,
            detail: format!(
                "batch of {batch}; max |output pre-activation| {:.3e}",
                output.re.iter().chain(output.im.iter()).fold(0.0f64, |m, v| m.max(v.abs()))
            ),
        });
    }
    let d_out = diff.mapv(|d| PI * (PI * d).sin() * scale);

    let (du2, dv2) = through_angle(&output, &d_out);
    let (output_w, output_b) = weight_grads(&output, &du2, &dv2);

    // ∂re/∂x = −π w sin x, ∂im/∂x = π w cos x
    let back_u = du2.dot(&net.output.weights);
    let back_v = dv2.dot(&net.output.weights);
    let d_hidden = (&output.cos * &back_v - &output.sin * &back_u) * PI;

    let (du1, dv1) = through_angle(&hidden, &d_hidden);
    let (hidden_w, hidden_b) = weight_grads(&hidden, &du1, &dv1);

    Ok((
        loss,
        Gradients {
            hidden_w,
            hidden_b,
            output_w,
            output_b,
        },
    ))
}

/// Mean batch loss without gradients.
pub fn batch_loss(net: &PhasorNetwork, pixels: ArrayView2<f64>, labels: &[u8], code: &LabelCode) -> f64 {
    let out = net.forward_batch(pixels);
    let n = out.len() as f64;
    out.indexed_iter()
        .map(|((i, k), &y)| {
            let t = if k == labels[i] as usize { code.on } else { code.off };
            1.0 - (PI * (y - t)).cos()
        })
        .sum::<f64>()
        / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasor::init_trainable;

    fn tiny_net(seed: u64) -> PhasorNetwork {
        // 2 pixels → 3 projected → 3 hidden → 2 classes
        let mut net = PhasorNetwork::new(2, 3, 3, 2, seed).unwrap();
        net.hidden = init_trainable(3, 3, seed, 11).unwrap();
        net.output = init_trainable(3, 2, seed, 12).unwrap();
        net
    }

    #[test]
    fn empty_and_mismatched_batches() {
        let net = tiny_net(1);
        let code = LabelCode::default();
        let px = Array2::<f64>::zeros((0, 2));
        assert!(matches!(backprop_gradients(&net, px.view(), &[], &code), Err(TrainError::EmptyBatch)));
        let px = Array2::<f64>::zeros((2, 2));
        assert!(matches!(
            backprop_gradients(&net, px.view(), &[0], &code),
            Err(TrainError::LabelCount { .. })
        ));
        assert!(matches!(
            backprop_gradients(&net, px.view(), &[0, 5], &code),
            Err(TrainError::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn duplicated_batch_has_same_gradient() {
        let net = tiny_net(3);
        let code = LabelCode::default();
        let px = ndarray::array![[0.1, 0.9], [0.5, 0.2], [0.7, 0.7]];
        let labels = [0u8, 1, 1];
        let (l1, g1) = backprop_gradients(&net, px.view(), &labels, &code).unwrap();
        let doubled = ndarray::concatenate(Axis(0), &[px.view(), px.view()]).unwrap();
        let labels2 = [0u8, 1, 1, 0, 1, 1];
        let (l2, g2) = backprop_gradients(&net, doubled.view(), &labels2, &code).unwrap();
        assert!((l1 - l2).abs() < 1e-14);
        for (a, b) in g1.iter().zip(g2.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn batch_loss_agrees_with_backprop_loss() {
        let net = tiny_net(5);
        let px = ndarray::array![[0.3, 0.4], [1.0, 0.0]];
        let (l, _) = backprop_gradients(&net, px.view(), &[1, 0], &LabelCode::default()).unwrap();
        assert!((l - batch_loss(&net, px.view(), &[1, 0], &LabelCode::default())).abs() < 1e-14);
    }
}
