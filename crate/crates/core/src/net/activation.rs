use crate::error::{Error, Result};
use crate::tiling::{self, TilingConfig};

/// Gaussian bumps `exp(-(z - c_j)² / σ)` over a fixed set of centers.
///
/// The exponent divides by the bandwidth `σ` itself, not `2σ²`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RbfConfig {
    centers: Vec<f64>,
    bandwidth: f64,
}

impl RbfConfig {
    pub fn new(centers: Vec<f64>, bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::Domain(format!(
                "RBF bandwidth must be positive, got {bandwidth}"
            )));
        }
        if centers.is_empty() {
            return Err(Error::Domain("RBF needs at least one center".into()));
        }
        Ok(Self { centers, bandwidth })
    }

    /// Centers placed on the cutoffs of a tiling.
    pub fn on_tiling(cfg: &TilingConfig, bandwidth: f64) -> Result<Self> {
        Self::new(tiling::tiling_vector(cfg), bandwidth)
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub(crate) fn forward_into(&self, z: f64, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.centers) {
            let d = z - c;
            *o = (-d * d / self.bandwidth).exp();
        }
    }
}

/// Evaluates the RBF features of a scalar.
pub fn rbf_forward(z: f64, centers: &[f64], bandwidth: f64) -> Result<Vec<f64>> {
    let cfg = RbfConfig::new(centers.to_vec(), bandwidth)?;
    let mut out = vec![0.0; centers.len()];
    cfg.forward_into(z, &mut out);
    Ok(out)
}

/// Nonlinearity applied after a layer's affine map.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
    /// Fuzzy tiling; each unit expands into `bins` outputs.
    Fta(TilingConfig),
    /// Radial basis features; each unit expands into one output per center.
    Rbf(RbfConfig),
}

impl Activation {
    /// Number of outputs each unit produces.
    pub fn expansion(&self) -> usize {
        match self {
            Activation::Fta(cfg) => cfg.bins(),
            Activation::Rbf(cfg) => cfg.centers.len(),
            _ => 1,
        }
    }

    /// Maps one row of pre-activations to one row of outputs.
    pub(crate) fn forward_row(&self, pre: &[f64], out: &mut [f64]) {
        match self {
            Activation::Relu => {
                for (o, &z) in out.iter_mut().zip(pre) {
                    *o = z.max(0.0);
                }
            }
            Activation::Tanh => {
                for (o, &z) in out.iter_mut().zip(pre) {
                    *o = z.tanh();
                }
            }
            Activation::Linear => out.copy_from_slice(pre),
            Activation::Fta(cfg) => {
                let k = cfg.bins();
                for (chunk, &z) in out.chunks_exact_mut(k).zip(pre) {
                    tiling::fta_forward_into(z, cfg, chunk);
                }
            }
            Activation::Rbf(cfg) => {
                let k = cfg.centers.len();
                for (chunk, &z) in out.chunks_exact_mut(k).zip(pre) {
                    cfg.forward_into(z, chunk);
                }
            }
        }
    }

    /// Pulls a row of output gradients back to the pre-activations.
    ///
    /// `scratch` must hold at least `expansion()` values.
    pub(crate) fn backward_row(
        &self,
        pre: &[f64],
        post: &[f64],
        d_post: &[f64],
        d_pre: &mut [f64],
        scratch: &mut [f64],
    ) {
        match self {
            Activation::Relu => {
                for ((d, &z), &g) in d_pre.iter_mut().zip(pre).zip(d_post) {
                    *d = if z > 0.0 { g } else { 0.0 };
                }
            }
            Activation::Tanh => {
                for ((d, &h), &g) in d_pre.iter_mut().zip(post).zip(d_post) {
                    *d = g * (1.0 - h * h);
                }
            }
            Activation::Linear => d_pre.copy_from_slice(d_post),
            Activation::Fta(cfg) => {
                let k = cfg.bins();
                let deriv = &mut scratch[..k];
                for (u, (d, &z)) in d_pre.iter_mut().zip(pre).enumerate() {
                    tiling::fta_derivative_into(z, cfg, deriv);
                    *d = deriv
                        .iter()
                        .zip(&d_post[u * k..(u + 1) * k])
                        .map(|(a, b)| a * b)
                        .sum();
                }
            }
            Activation::Rbf(cfg) => {
                let k = cfg.centers.len();
                for (u, (d, &z)) in d_pre.iter_mut().zip(pre).enumerate() {
                    let outs = &post[u * k..(u + 1) * k];
                    let grads = &d_post[u * k..(u + 1) * k];
                    *d = cfg
                        .centers
                        .iter()
                        .zip(outs)
                        .zip(grads)
                        .map(|((c, phi), g)| g * phi * (-2.0 * (z - c) / cfg.bandwidth))
                        .sum();
                }
            }
        }
    }
}

/// Penalty on a layer's activations, added to the loss and averaged over the
/// batch.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub enum ActivationPenalty {
    #[default]
    None,
    /// `weight · Σ|h|`
    L1(f64),
    /// `weight · Σh²`
    L2(f64),
}

impl ActivationPenalty {
    pub(crate) fn value(&self, h: f64) -> f64 {
        match *self {
            ActivationPenalty::None => 0.0,
            ActivationPenalty::L1(w) => w * h.abs(),
            ActivationPenalty::L2(w) => w * h * h,
        }
    }

    pub(crate) fn grad(&self, h: f64) -> f64 {
        match *self {
            ActivationPenalty::None => 0.0,
            ActivationPenalty::L1(w) => w * sign(h),
            ActivationPenalty::L2(w) => 2.0 * w * h,
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
