//! Feedforward embedding network: ReLU hidden layers, a sigmoid embedding
//! layer, then optional row-wise L2 normalization. Trained with Adam.

mod adam;
mod checkpoint;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossResult;
use crate::numerics::{dot, l2_normalize_rows, Matrix, NORM_FLOOR};
use crate::rng::SeededRng;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpEmbedder {
    layer_sizes: Vec<usize>,
    /// Per layer, `out x in`.
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
    normalize_output: bool,
}

/// Parameter gradients, shaped like the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }

    fn slices(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
            .collect()
    }
}

/// Intermediate values kept by [`MlpEmbedder::forward_batch`] for backprop.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Layer inputs: `activations[0]` is the batch, `activations[l]` feeds layer `l`.
    activations: Vec<Matrix>,
    /// Pre-activations of every layer.
    pre_activations: Vec<Matrix>,
    /// Sigmoid outputs of the embedding layer.
    sigmoid: Matrix,
    /// Row norms of `sigmoid`, present when normalizing.
    norms: Option<Vec<f64>>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl MlpEmbedder {
    /// Weights uniform in `±sqrt(6 / fan_in)`, biases zero.
    pub fn init(layer_sizes: &[usize], normalize_output: bool, rng: &mut SeededRng) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "need at least two positive layer sizes, got {layer_sizes:?}"
            )));
        }
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..=limit))
                .collect();
            weights.push(Matrix::new(fan_out, fan_in, data)?);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            normalize_output,
        })
    }

    pub(crate) fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
        normalize_output: bool,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 || weights.len() != layer_sizes.len() - 1 || biases.len() != weights.len() {
            return Err(Error::Checkpoint("layer count does not match layer sizes".into()));
        }
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.shape() != (layer_sizes[l + 1], layer_sizes[l]) || b.len() != layer_sizes[l + 1] {
                return Err(Error::Checkpoint(format!("layer {l} parameter shapes inconsistent")));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what: "bias", layer: l });
            }
        }
        Ok(Self {
            layer_sizes,
            weights,
            biases,
            normalize_output,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn embedding_dim(&self) -> usize {
        *self.layer_sizes.last().expect("at least two layers")
    }

    pub fn normalize_output(&self) -> bool {
        self.normalize_output
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.as_slice().len()).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Parameters in layer order, each layer's weights (row-major) then biases.
    pub fn parameters_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_parameters_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} parameters", self.parameter_count()),
                got: format!("{}", params.len()),
            });
        }
        let mut rest = params;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (head, tail) = rest.split_at(w.as_slice().len());
            w.as_mut_slice().copy_from_slice(head);
            let (head, tail) = tail.split_at(b.len());
            b.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w.as_mut_slice(), b.as_mut_slice()])
            .collect()
    }

    pub(crate) fn param_shapes(&self) -> Vec<usize> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice().len(), b.len()])
            .collect()
    }

    /// Embeds every row of `inputs`.
    pub fn forward_batch(&self, inputs: &Matrix) -> Result<(Matrix, ForwardCache)> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} input features", self.input_dim()),
                got: format!("{}", inputs.cols()),
            });
        }
        let n = inputs.rows();
        let last = self.weights.len() - 1;
        let mut activations = vec![inputs.clone()];
        let mut pre_activations = Vec::with_capacity(self.weights.len());
        let mut sigmoid_out = None;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let input = activations.last().expect("non-empty");
            let mut z = Matrix::zeros(n, w.rows());
            for i in 0..n {
                let x = input.row(i);
                for (o, zo) in z.row_mut(i).iter_mut().enumerate() {
                    *zo = dot(w.row(o), x) + b[o];
                }
            }
            if !z.all_finite() {
                return Err(Error::NonFinite {
                    what: "pre-activation",
                    layer: l,
                });
            }
            let mut a = z.clone();
            if l == last {
                a.as_mut_slice().iter_mut().for_each(|v| *v = sigmoid(*v));
                sigmoid_out = Some(a);
            } else {
                a.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
                activations.push(a);
            }
            pre_activations.push(z);
        }
        let sigmoid = sigmoid_out.expect("at least one layer");
        let (output, norms) = if self.normalize_output {
            let normalized = l2_normalize_rows(&sigmoid);
            (normalized.matrix, Some(normalized.norms))
        } else {
            (sigmoid.clone(), None)
        };
        Ok((
            output,
            ForwardCache {
                activations,
                pre_activations,
                sigmoid,
                norms,
            },
        ))
    }

    /// Embeddings only.
    pub fn embed(&self, inputs: &Matrix) -> Result<Matrix> {
        Ok(self.forward_batch(inputs)?.0)
    }

    /// Backpropagates `d loss / d output` to the parameters.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &Matrix) -> Result<Gradients> {
        let n = cache.sigmoid.rows();
        let e = cache.sigmoid.cols();
        if grad_output.shape() != (n, e) {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", (n, e)),
                got: format!("{:?}", grad_output.shape()),
            });
        }
        let last = self.weights.len() - 1;

        // through y = s / |s|: dL/ds = (g - y (y.g)) / |s|
        let mut delta = grad_output.clone();
        if let Some(norms) = &cache.norms {
            for (i, &raw) in norms.iter().enumerate().take(n) {
                let s = cache.sigmoid.row(i);
                let norm = raw.max(NORM_FLOOR);
                let y: Vec<f64> = s.iter().map(|v| v / norm).collect();
                let proj = dot(&y, grad_output.row(i));
                for (d, (g, yk)) in delta.row_mut(i).iter_mut().zip(grad_output.row(i).iter().zip(&y)) {
                    *d = (g - yk * proj) / norm;
                }
            }
        }
        for (d, s) in delta.as_mut_slice().iter_mut().zip(cache.sigmoid.as_slice()) {
            *d *= s * (1.0 - s);
        }

        let mut grad_w = vec![Matrix::zeros(0, 0); self.weights.len()];
        let mut grad_b = vec![Vec::new(); self.weights.len()];
        for l in (0..=last).rev() {
            let w = &self.weights[l];
            let input = &cache.activations[l];
            let mut gw = Matrix::zeros(w.rows(), w.cols());
            let mut gb = vec![0.0; w.rows()];
            for i in 0..n {
                let d = delta.row(i);
                let x = input.row(i);
                for (o, &dv) in d.iter().enumerate() {
                    if dv != 0.0 {
                        gw.add_scaled_to_row(o, dv, x);
                        gb[o] += dv;
                    }
                }
            }
            if !gw.all_finite() || gb.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: "gradient",
                    layer: l,
                });
            }
            if l > 0 {
                let z_prev = &cache.pre_activations[l - 1];
                let mut next = Matrix::zeros(n, w.cols());
                for i in 0..n {
                    for (o, &dv) in delta.row(i).iter().enumerate() {
                        if dv != 0.0 {
                            next.add_scaled_to_row(i, dv, w.row(o));
                        }
                    }
                    for (v, &z) in next.row_mut(i).iter_mut().zip(z_prev.row(i)) {
                        if z <= 0.0 {
                            *v = 0.0;
                        }
                    }
                }
                delta = next;
            }
            grad_w[l] = gw;
            grad_b[l] = gb;
        }
        Ok(Gradients {
            weights: grad_w,
            biases: grad_b,
        })
    }

    /// One optimization step: forward, loss, backprop, Adam update.
    ///
    /// `loss_adapter` maps the batch embeddings to a loss; returning `None`
    /// (e.g. mining found no triplet) skips the update and leaves the model and
    /// optimizer untouched.
    pub fn train_step<F>(&mut self, adam: &mut AdamState, inputs: &Matrix, loss_adapter: F) -> Result<Option<f64>>
    where
        F: FnOnce(&Matrix) -> Result<Option<LossResult>>,
    {
        let (embeddings, cache) = self.forward_batch(inputs)?;
        let Some(loss) = loss_adapter(&embeddings)? else {
            return Ok(None);
        };
        if !loss.value.is_finite() {
            return Err(Error::NonFiniteLoss(loss.value));
        }
        if !loss.grad.all_finite() {
            return Err(Error::NonFinite {
                what: "loss gradient",
                layer: self.weights.len(),
            });
        }
        let grads = self.backward(&cache, &loss.grad)?;
        adam.step(&mut self.param_slices_mut(), &grads.slices())?;
        Ok(Some(loss.value))
    }
}
