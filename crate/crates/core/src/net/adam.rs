use super::{DenseNet, Gradients};
use crate::error::{Error, Result};

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    /// Zero moments shaped like `net`'s parameters, with `(β₁, β₂) = (0.9, 0.999)`
    /// and `ε = 1e-8`.
    pub fn new(net: &DenseNet, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = net.tensors().map(|t| vec![0.0; t.len()]).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != net.layers.len()
            || grads.tensors().zip(&self.first).any(|(g, m)| g.len() != m.len())
        {
            return Err(Error::Shape(
                "gradients do not match the optimiser state".into(),
            ));
        }
        self.step += 1;
        let t = self.step as i32;
        let correct1 = 1.0 - self.beta1.powi(t);
        let correct2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.epsilon);
        for (((param, grad), m), v) in net
            .tensors_mut()
            .zip(grads.tensors())
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                let m_hat = m[i] / correct1;
                let v_hat = v[i] / correct2;
                param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
