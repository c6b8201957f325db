//! Sparsity and gradient-interference measurements.
//!
//! A feature slot counts as active when it is exactly nonzero; tiling layers
//! produce exact zeros, so no threshold is applied.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Mean over rows of the fraction of nonzero entries.
pub fn instance_sparsity(features: &Matrix) -> f64 {
    if features.rows() == 0 || features.cols() == 0 {
        return 0.0;
    }
    let width = features.cols() as f64;
    let total: f64 = features
        .iter_rows()
        .map(|r| r.iter().filter(|v| **v != 0.0).count() as f64 / width)
        .sum();
    total / features.rows() as f64
}

/// Mean over paired rows of the fraction of slots active in both.
pub fn overlap_sparsity(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "overlap needs equal shapes, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if a.rows() == 0 || a.cols() == 0 {
        return Ok(0.0);
    }
    let width = a.cols() as f64;
    let total: f64 = a
        .iter_rows()
        .zip(b.iter_rows())
        .map(|(x, y)| {
            x.iter()
                .zip(y)
                .filter(|(u, v)| **u != 0.0 && **v != 0.0)
                .count() as f64
                / width
        })
        .sum();
    Ok(total / a.rows() as f64)
}

/// How per-sample gradients are paired for interference statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Sample `2i` with sample `2i + 1`.
    #[default]
    Disjoint,
    /// Every unordered pair.
    AllPairs,
}

/// Gradient-interference statistics over unit-normalised gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interference {
    /// Mean inner product.
    pub m1: f64,
    /// Mean of the negative inner products, 0 when there are none.
    pub m2: f64,
    /// Fraction of pairs with a negative inner product.
    pub m3: f64,
    pub pairs: usize,
    /// Pairs dropped because one of the gradients was exactly zero.
    pub excluded: usize,
}

/// Interference statistics for per-sample gradient vectors.
///
/// Pairs involving an all-zero gradient are skipped and counted in
/// `excluded`. Fails when fewer than two gradients are given or the vectors
/// differ in length.
pub fn interference(gradients: &[Vec<f64>], pairing: Pairing) -> Result<Interference> {
    if gradients.len() < 2 {
        return Err(Error::Domain(
            "interference needs at least two gradients".into(),
        ));
    }
    let dim = gradients[0].len();
    if gradients.iter().any(|g| g.len() != dim) {
        return Err(Error::Shape("gradient vectors differ in length".into()));
    }
    let pairs: Vec<(usize, usize)> = match pairing {
        Pairing::Disjoint => (0..gradients.len() / 2).map(|i| (2 * i, 2 * i + 1)).collect(),
        Pairing::AllPairs => (0..gradients.len())
            .flat_map(|i| (i + 1..gradients.len()).map(move |j| (i, j)))
            .collect(),
    };
    let norms: Vec<f64> = gradients.iter().map(|g| dot(g, g)).collect();

    let (mut sum, mut neg_sum, mut neg, mut used, mut excluded) = (0.0, 0.0, 0usize, 0usize, 0);
    for (i, j) in pairs {
        if norms[i] == 0.0 || norms[j] == 0.0 {
            excluded += 1;
            continue;
        }
        let c = (dot(&gradients[i], &gradients[j]) / (norms[i] * norms[j]).sqrt()).clamp(-1.0, 1.0);
        sum += c;
        if c < 0.0 {
            neg += 1;
            neg_sum += c;
        }
        used += 1;
    }
    if used == 0 {
        return Ok(Interference {
            m1: 0.0,
            m2: 0.0,
            m3: 0.0,
            pairs: 0,
            excluded,
        });
    }
    Ok(Interference {
        m1: sum / used as f64,
        m2: if neg > 0 { neg_sum / neg as f64 } else { 0.0 },
        m3: neg as f64 / used as f64,
        pairs: used,
        excluded,
    })
}

/// Scales `g` to unit L2 norm; returns `None` for the zero vector.
pub fn normalized(g: &[f64]) -> Option<Vec<f64>> {
    let n = dot(g, g).sqrt();
    (n > 0.0).then(|| g.iter().map(|v| v / n).collect())
}

/// Fraction of entries with a nonzero derivative.
pub fn gradient_sparsity(gradient: &[f64]) -> f64 {
    if gradient.is_empty() {
        return 0.0;
    }
    gradient.iter().filter(|g| **g != 0.0).count() as f64 / gradient.len() as f64
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One row of an RL learning curve.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct MetricRecord {
    pub step: usize,
    pub episodic_return: Option<f64>,
    pub instance_sparsity: f64,
    pub overlap_sparsity: f64,
    pub ratio: Option<f64>,
    pub m1: Option<f64>,
    pub m2: Option<f64>,
    pub m3: Option<f64>,
    pub grad_sparsity_layer2: Option<f64>,
    pub grad_sparsity_total: Option<f64>,
}

impl MetricRecord {
    pub const CSV_HEADER: &'static str = "step,episodic_return,instance_sparsity,overlap_sparsity,ratio,m1,m2,m3,grad_sparsity_layer2,grad_sparsity_total";

    /// Comma-separated row matching [`MetricRecord::CSV_HEADER`]; absent
    /// values are empty fields.
    pub fn to_csv_row(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.step,
            opt(self.episodic_return),
            self.instance_sparsity,
            self.overlap_sparsity,
            opt(self.ratio),
            opt(self.m1),
            opt(self.m2),
            opt(self.m3),
            opt(self.grad_sparsity_layer2),
            opt(self.grad_sparsity_total),
        )
    }
}
