//! Feed-forward networks with hand-written reverse-mode gradients.
//!
//! Every layer is an affine map `z = x·W + b` followed by an [`Activation`].
//! Weights are stored `in × out`, so a zero input row is skipped entirely in
//! both passes; the sparse outputs of tiling layers make the next affine map
//! proportionally cheaper.

mod activation;
mod adam;
pub mod checkpoint;

pub use activation::{rbf_forward, Activation, ActivationPenalty, RbfConfig};
pub use adam::Adam;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tiling;

/// Values per activation block in [`DenseNet::features`].
const BLOCK_VALUES: usize = 8192;

/// Half-width of the uniform initialisation of the output layer.
pub const OUTPUT_INIT_RANGE: f64 = 0.003;

/// One affine map plus its activation.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    /// Number of units, i.e. columns of the affine map.
    pub out_dim: usize,
    pub activation: Activation,
    #[serde(default)]
    pub penalty: ActivationPenalty,
    /// Weight of the out-of-bound penalty on FTA pre-activations; 0 disables it.
    #[serde(default)]
    pub boundary_penalty: f64,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
            penalty: ActivationPenalty::None,
            boundary_penalty: 0.0,
        }
    }

    pub fn with_penalty(mut self, penalty: ActivationPenalty) -> Self {
        self.penalty = penalty;
        self
    }

    pub fn with_boundary_penalty(mut self, weight: f64) -> Self {
        self.boundary_penalty = weight;
        self
    }

    /// Width of the layer's output, after any tiling/RBF expansion.
    pub fn output_width(&self) -> usize {
        self.out_dim * self.activation.expansion()
    }

    /// Symmetric bound used by the out-of-bound penalty.
    fn boundary(&self) -> Option<f64> {
        match &self.activation {
            Activation::Fta(cfg) if self.boundary_penalty > 0.0 => {
                Some(cfg.lower().abs().max(cfg.upper().abs()))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    spec: LayerSpec,
    weights: Matrix,
    bias: Vec<f64>,
}

impl Layer {
    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn param_count(&self) -> usize {
        self.weights.as_slice().len() + self.bias.len()
    }
}

/// Layered feed-forward network.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<Layer>,
    // Bumped on every parameter change; tapes remember the value they saw.
    version: u64,
}

/// Intermediate values recorded by [`DenseNet::forward`].
#[derive(Debug, Clone)]
pub struct Tape {
    version: u64,
    /// `inputs[i]` feeds layer `i`; the final entry is the network output.
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
}

impl Tape {
    /// Output of layer `i` (post-activation).
    pub fn layer_output(&self, i: usize) -> &Matrix {
        &self.inputs[i + 1]
    }

    /// Pre-activation of layer `i`.
    pub fn pre_activation(&self, i: usize) -> &Matrix {
        &self.pre[i]
    }

    pub fn output(&self) -> &Matrix {
        self.inputs.last().expect("tape holds at least the input")
    }
}

/// Gradient of one layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Gradients for every parameter of a network plus the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
    pub input: Matrix,
}

impl Gradients {
    /// All parameter gradients in layer order, weights before bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for g in &self.layers {
            out.extend_from_slice(g.weights.as_slice());
            out.extend_from_slice(&g.bias);
        }
        out
    }

    /// Parameter gradients of a single layer, weights before bias.
    pub fn flatten_layer(&self, layer: usize) -> Vec<f64> {
        let g = &self.layers[layer];
        let mut out = g.weights.as_slice().to_vec();
        out.extend_from_slice(&g.bias);
        out
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|g| g.weights.as_slice().len() + g.bias.len())
            .sum()
    }

    pub(crate) fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|g| [g.weights.as_slice(), g.bias.as_slice()])
    }
}

impl DenseNet {
    /// Builds and initialises a network.
    ///
    /// Hidden layers use Glorot-uniform weights `±√(6 / (fan_in + fan_out))`,
    /// the output layer uses `U[-0.003, 0.003]`, and every bias starts at 0.
    pub fn new(specs: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Shape("a network needs at least one layer".into()));
        }
        for (i, pair) in specs.windows(2).enumerate() {
            if pair[1].in_dim != pair[0].output_width() {
                return Err(Error::Shape(format!(
                    "layer {} expects {} inputs but layer {i} produces {}",
                    i + 1,
                    pair[1].in_dim,
                    pair[0].output_width()
                )));
            }
        }
        if let Some(i) = specs.iter().position(|s| s.in_dim == 0 || s.out_dim == 0) {
            return Err(Error::Shape(format!("layer {i} has a zero dimension")));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last = specs.len() - 1;
        let layers = specs
            .into_iter()
            .enumerate()
            .map(|(i, spec)| {
                let limit = if i == last {
                    OUTPUT_INIT_RANGE
                } else {
                    (6.0 / (spec.in_dim + spec.out_dim) as f64).sqrt()
                };
                let weights = (0..spec.in_dim * spec.out_dim)
                    .map(|_| rng.random_range(-limit..=limit))
                    .collect();
                Layer {
                    weights: Matrix::from_vec(spec.in_dim, spec.out_dim, weights)
                        .expect("length matches shape"),
                    bias: vec![0.0; spec.out_dim],
                    spec,
                }
            })
            .collect();
        Ok(Self { layers, version: 0 })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").spec.output_width()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Overwrites one layer's parameters.
    pub fn set_layer_params(&mut self, layer: usize, weights: Matrix, bias: Vec<f64>) -> Result<()> {
        let l = self
            .layers
            .get_mut(layer)
            .ok_or_else(|| Error::Shape(format!("no layer {layer}")))?;
        if weights.shape() != l.weights.shape() || bias.len() != l.bias.len() {
            return Err(Error::Shape(format!(
                "layer {layer} expects {:?} weights and {} biases",
                l.weights.shape(),
                l.bias.len()
            )));
        }
        l.weights = weights;
        l.bias = bias;
        self.version += 1;
        Ok(())
    }

    /// Copies every parameter from a network of identical shape.
    pub fn copy_params_from(&mut self, other: &DenseNet) {
        debug_assert_eq!(self.layers.len(), other.layers.len());
        for (dst, src) in self.layers.iter_mut().zip(&other.layers) {
            dst.weights.as_mut_slice().copy_from_slice(src.weights.as_slice());
            dst.bias.copy_from_slice(&src.bias);
        }
        self.version += 1;
    }

    pub(crate) fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.version += 1;
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
    }

    pub(crate) fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
    }

    /// Whether every parameter is finite.
    pub fn is_finite(&self) -> bool {
        self.tensors().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "network expects {} input columns, got {}",
                self.input_dim(),
                x.cols()
            )));
        }
        Ok(())
    }

    /// Runs the network and records what [`DenseNet::backward`] needs.
    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, Tape)> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        inputs.push(x.clone());
        for (i, layer) in self.layers.iter().enumerate() {
            let z = affine(inputs.last().expect("non-empty"), layer);
            let h = activate(&z, layer, i, 0)?;
            pre.push(z);
            inputs.push(h);
        }
        let y = inputs.last().expect("non-empty").clone();
        Ok((
            y,
            Tape {
                version: self.version,
                inputs,
                pre,
            },
        ))
    }

    /// Runs the network without recording a tape.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        self.features(x, self.layers.len() - 1)
    }

    /// Output of hidden layer `layer` (post-activation) for a batch.
    ///
    /// Rows are pushed through in small blocks so that wide FTA outputs stay
    /// in cache; every row is computed independently, so the result does not
    /// depend on the blocking.
    pub fn features(&self, x: &Matrix, layer: usize) -> Result<Matrix> {
        self.check_input(x)?;
        let layers = &self.layers[..=layer];
        let widest = layers.iter().map(|l| l.spec.output_width()).max().unwrap_or(1);
        let block = (BLOCK_VALUES / widest).clamp(1, x.rows().max(1));
        let out_cols = layers[layer].spec.output_width();
        let mut out = Vec::with_capacity(x.rows() * out_cols);
        let mut start = 0;
        while start < x.rows() {
            let end = (start + block).min(x.rows());
            let mut h = Matrix::from_vec(
                end - start,
                x.cols(),
                x.as_slice()[start * x.cols()..end * x.cols()].to_vec(),
            )?;
            for (i, l) in layers.iter().enumerate() {
                let z = affine(&h, l);
                h = activate(&z, l, i, start)?;
            }
            out.extend_from_slice(h.as_slice());
            start = end;
        }
        Matrix::from_vec(x.rows(), out_cols, out)
    }

    /// Activation and out-of-bound penalties recorded on a tape, averaged
    /// over the batch rows.
    pub fn penalty(&self, tape: &Tape) -> f64 {
        let batch = tape.inputs[0].rows().max(1) as f64;
        let mut total = 0.0;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.spec.penalty != ActivationPenalty::None {
                total += tape.inputs[i + 1]
                    .as_slice()
                    .iter()
                    .map(|&h| layer.spec.penalty.value(h))
                    .sum::<f64>();
            }
            if let Some(bound) = layer.spec.boundary() {
                total += layer.spec.boundary_penalty
                    * tape.pre[i]
                        .as_slice()
                        .iter()
                        .map(|&z| tiling::out_of_bound_penalty(z, bound).0)
                        .sum::<f64>();
            }
        }
        total / batch
    }

    /// Gradients of `Σ_rows d_out·y + penalty(tape)` with respect to every
    /// parameter and the input.
    ///
    /// `d_out` is the derivative of the data loss with respect to the network
    /// output, so a mean-reduced loss should already carry its `1/batch`.
    pub fn backward(&self, tape: &Tape, d_out: &Matrix) -> Result<Gradients> {
        if tape.version != self.version || tape.pre.len() != self.layers.len() {
            return Err(Error::StaleTape);
        }
        let out = tape.output();
        if d_out.shape() != out.shape() {
            return Err(Error::Shape(format!(
                "output gradient is {:?} but the output is {:?}",
                d_out.shape(),
                out.shape()
            )));
        }
        let batch = out.rows();
        let scale = 1.0 / batch.max(1) as f64;
        let mut grads: Vec<LayerGradient> = Vec::with_capacity(self.layers.len());
        let mut d_post = d_out.clone();
        let mut scratch = Vec::new();

        for (i, layer) in self.layers.iter().enumerate().rev() {
            let spec = &layer.spec;
            let pre = &tape.pre[i];
            let post = &tape.inputs[i + 1];
            let input = &tape.inputs[i];

            if spec.penalty != ActivationPenalty::None {
                for (d, &h) in d_post.as_mut_slice().iter_mut().zip(post.as_slice()) {
                    *d += scale * spec.penalty.grad(h);
                }
            }

            scratch.resize(spec.activation.expansion(), 0.0);
            let mut d_pre = Matrix::zeros(batch, spec.out_dim);
            for r in 0..batch {
                spec.activation.backward_row(
                    pre.row(r),
                    post.row(r),
                    d_post.row(r),
                    d_pre.row_mut(r),
                    &mut scratch,
                );
            }
            if let Some(bound) = spec.boundary() {
                let w = spec.boundary_penalty * scale;
                for (d, &z) in d_pre.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                    *d += w * tiling::out_of_bound_penalty(z, bound).1;
                }
            }

            let mut d_w = Matrix::zeros(spec.in_dim, spec.out_dim);
            let mut d_b = vec![0.0; spec.out_dim];
            let mut d_in = Matrix::zeros(batch, spec.in_dim);
            for r in 0..batch {
                let g = d_pre.row(r);
                for (b, &v) in d_b.iter_mut().zip(g) {
                    *b += v;
                }
                if g.iter().all(|v| *v == 0.0) {
                    continue;
                }
                for (j, &x) in input.row(r).iter().enumerate() {
                    if x != 0.0 {
                        for (w, &v) in d_w.row_mut(j).iter_mut().zip(g) {
                            *w += x * v;
                        }
                    }
                }
                let d_in_row = d_in.row_mut(r);
                for (j, d) in d_in_row.iter_mut().enumerate() {
                    *d = dot(layer.weights.row(j), g);
                }
            }
            grads.push(LayerGradient {
                weights: d_w,
                bias: d_b,
            });
            d_post = d_in;
        }
        grads.reverse();
        Ok(Gradients {
            layers: grads,
            input: d_post,
        })
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn affine(x: &Matrix, layer: &Layer) -> Matrix {
    let mut z = Matrix::zeros(x.rows(), layer.spec.out_dim);
    for r in 0..x.rows() {
        let out = z.row_mut(r);
        out.copy_from_slice(&layer.bias);
        for (j, &v) in x.row(r).iter().enumerate() {
            if v != 0.0 {
                for (o, &w) in out.iter_mut().zip(layer.weights.row(j)) {
                    *o += v * w;
                }
            }
        }
    }
    z
}

/// `first_row` is the batch row of `z`'s first row, for error messages.
fn activate(z: &Matrix, layer: &Layer, index: usize, first_row: usize) -> Result<Matrix> {
    if let Some(pos) = z.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            layer: index,
            what: format!(
                "pre-activation at row {}, unit {}",
                first_row + pos / z.cols().max(1),
                pos % z.cols().max(1)
            ),
        });
    }
    let mut h = Matrix::zeros(z.rows(), layer.spec.output_width());
    for r in 0..z.rows() {
        layer.spec.activation.forward_row(z.row(r), h.row_mut(r));
    }
    Ok(h)
}
