//! Tiling activation (TA) and fuzzy tiling activation (FTA).
//!
//! A scalar pre-activation `z` is mapped onto `k` evenly spaced tiles covering
//! `[l, u]`. Tile `j` spans `[c_j, c_j + δ]` where `c = (l, l+δ, ..., u-δ)`.
//! The distance from `z` to tile `j` is
//!
//! ```text
//! g_j(z) = max(c_j - z, 0) + max(z - δ - c_j, 0)
//! ```
//!
//! TA emits `1 - I₊(g_j)` and FTA emits `1 - I_{η,+}(g_j)`, where the fuzzy
//! indicator keeps `x` when `x ≤ η` and saturates to 1 otherwise. FTA therefore
//! has a linear ramp of width `η` on both sides of every active tile.
//! Outputs stay in `[0, 1]` only while `η ≤ 1`; for wider ramps (such as
//! `η = δ = 2`) the formula is applied as written and the ramps go negative.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Parameters of one tiling: bounds, tile width, sparsity control and bin count.
///
/// The tile width is always stored as `(upper - lower) / bins`, so the triple
/// `(lower, upper, tile_width)` is consistent by construction.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "TilingSpec", into = "TilingSpec")]
pub struct TilingConfig {
    lower: f64,
    upper: f64,
    tile_width: f64,
    eta: f64,
    bins: usize,
}

/// On-disk form of a [`TilingConfig`]: bounds plus either a tile width or a
/// bin count. `eta` defaults to the tile width.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct TilingSpec {
    lower: f64,
    upper: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tile_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
}

impl TryFrom<TilingSpec> for TilingConfig {
    type Error = Error;

    fn try_from(s: TilingSpec) -> Result<Self> {
        let cfg = match (s.tile_width, s.bins) {
            (Some(w), None) => Self::new(s.lower, s.upper, w, 0.0)?,
            (None, Some(k)) => Self::from_bins(s.lower, s.upper, k, 0.0)?,
            (Some(w), Some(k)) => {
                let cfg = Self::from_bins(s.lower, s.upper, k, 0.0)?;
                if (cfg.tile_width - w).abs() > DIVISIBILITY_TOL * w {
                    return Err(Error::InvalidTiling(format!(
                        "{k} bins of width {w} do not cover [{}, {}]",
                        s.lower, s.upper
                    )));
                }
                cfg
            }
            (None, None) => {
                return Err(Error::InvalidTiling(
                    "either `tile_width` or `bins` is required".into(),
                ))
            }
        };
        let eta = s.eta.unwrap_or(cfg.tile_width);
        cfg.with_eta(eta)
    }
}

impl From<TilingConfig> for TilingSpec {
    fn from(c: TilingConfig) -> Self {
        Self {
            lower: c.lower,
            upper: c.upper,
            tile_width: None,
            bins: Some(c.bins),
            eta: Some(c.eta),
        }
    }
}

/// Relative slack allowed when checking that `δ` divides `u - l`.
const DIVISIBILITY_TOL: f64 = 1e-9;

impl TilingConfig {
    /// Tiling of `[lower, upper]` with tiles of width `tile_width`.
    ///
    /// `upper - lower` must be an integer multiple of `tile_width` and the
    /// tiling must contain at least two tiles.
    pub fn new(lower: f64, upper: f64, tile_width: f64, eta: f64) -> Result<Self> {
        check_bounds(lower, upper)?;
        if !(tile_width.is_finite() && tile_width > 0.0) {
            return Err(Error::InvalidTiling(format!(
                "tile width must be positive, got {tile_width}"
            )));
        }
        let ratio = (upper - lower) / tile_width;
        let bins = ratio.round();
        if (ratio - bins).abs() > DIVISIBILITY_TOL * ratio.max(1.0) {
            return Err(Error::InvalidTiling(format!(
                "tile width {tile_width} does not divide [{lower}, {upper}]"
            )));
        }
        Self::from_bins(lower, upper, bins as usize, eta)
    }

    /// Tiling of `[lower, upper]` split into `bins` tiles.
    pub fn from_bins(lower: f64, upper: f64, bins: usize, eta: f64) -> Result<Self> {
        check_bounds(lower, upper)?;
        if bins < 2 {
            return Err(Error::InvalidTiling(format!(
                "at least two tiles are required (tile width < u - l), got {bins}"
            )));
        }
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::InvalidTiling(format!(
                "sparsity control must be finite and non-negative, got {eta}"
            )));
        }
        Ok(Self {
            lower,
            upper,
            tile_width: (upper - lower) / bins as f64,
            eta,
            bins,
        })
    }

    /// Tiling with `η = δ`, the default sparsity control.
    pub fn with_default_eta(lower: f64, upper: f64, tile_width: f64) -> Result<Self> {
        Self::new(lower, upper, tile_width, tile_width)
    }

    /// Tiling with tiles of exactly `tile_width` that covers `[lower, upper]`.
    ///
    /// When the width does not divide the range, the range is widened evenly on
    /// both sides up to the next multiple of the width.
    pub fn covering(lower: f64, upper: f64, tile_width: f64, eta: f64) -> Result<Self> {
        check_bounds(lower, upper)?;
        if !(tile_width.is_finite() && tile_width > 0.0) {
            return Err(Error::InvalidTiling(format!(
                "tile width must be positive, got {tile_width}"
            )));
        }
        let span = upper - lower;
        let ratio = span / tile_width;
        let mut bins = ratio.round();
        if (ratio - bins).abs() > DIVISIBILITY_TOL * ratio.max(1.0) {
            bins = ratio.ceil();
        }
        let bins = (bins as usize).max(2);
        let pad = (bins as f64 * tile_width - span) / 2.0;
        Self::from_bins(lower - pad, upper + pad, bins, eta)
    }

    /// Same tiling with a different sparsity control.
    pub fn with_eta(self, eta: f64) -> Result<Self> {
        Self::from_bins(self.lower, self.upper, self.bins, eta)
    }

    #[inline]
    pub fn lower(&self) -> f64 {
        self.lower
    }

    #[inline]
    pub fn upper(&self) -> f64 {
        self.upper
    }

    #[inline]
    pub fn tile_width(&self) -> f64 {
        self.tile_width
    }

    #[inline]
    pub fn eta(&self) -> f64 {
        self.eta
    }

    #[inline]
    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Left edge of tile `j`.
    #[inline]
    fn cutoff(&self, j: usize) -> f64 {
        self.lower + j as f64 * self.tile_width
    }

    /// Tiles that can be within `η` of `z`; every tile outside the range has
    /// a zero output and a zero derivative. Padded by one tile on each side
    /// against rounding, and the full range for non-finite `z`.
    fn window(&self, z: f64) -> std::ops::Range<usize> {
        if !z.is_finite() {
            return 0..self.bins;
        }
        let lo = ((z - self.eta - self.lower) / self.tile_width).floor() - 1.0;
        let hi = ((z + self.eta - self.lower) / self.tile_width).floor() + 2.0;
        let clamp = |v: f64| v.clamp(0.0, self.bins as f64) as usize;
        clamp(lo)..clamp(hi)
    }

    /// Distance from `z` to tile `j`; zero inside the tile.
    ///
    /// The right edge is computed as the next cutoff, so `z == c_{j+1}` lies
    /// exactly on tile `j`'s right edge.
    #[inline]
    fn distance(&self, j: usize, z: f64) -> f64 {
        let left = self.cutoff(j);
        let right = self.cutoff(j + 1);
        (left - z).max(0.0) + (z - right).max(0.0)
    }
}

fn check_bounds(lower: f64, upper: f64) -> Result<()> {
    if !(lower.is_finite() && upper.is_finite() && lower < upper) {
        return Err(Error::InvalidTiling(format!(
            "bounds must be finite with lower < upper, got [{lower}, {upper}]"
        )));
    }
    Ok(())
}

/// Activation output of a single scalar.
///
/// Entries lie in `[0, 1]` when `η ≤ 1`. A wider ramp (`η > 1`) reaches below
/// zero, down to `1 - η`, on tiles whose distance exceeds 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector(Vec<f64>);

impl SparseVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of entries that are not exactly zero.
    pub fn nonzero_count(&self) -> usize {
        self.0.iter().filter(|v| **v != 0.0).count()
    }

    /// Indices of the nonzero entries.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

impl std::ops::Index<usize> for SparseVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// The cutoffs `(l, l+δ, ..., u-δ)`.
pub fn tiling_vector(cfg: &TilingConfig) -> Vec<f64> {
    (0..cfg.bins).map(|j| cfg.cutoff(j)).collect()
}

/// `I_{η,+}(x)`: `x` when `x ≤ η`, otherwise 1.
///
/// With `η = 0` this is the hard indicator `I₊`.
#[inline]
pub fn fuzzy_indicator(x: f64, eta: f64) -> f64 {
    if x <= eta {
        x
    } else {
        1.0
    }
}

/// Hard tiling activation.
pub fn ta_forward(z: f64, cfg: &TilingConfig) -> SparseVector {
    SparseVector(
        (0..cfg.bins)
            .map(|j| if cfg.distance(j, z) > 0.0 { 0.0 } else { 1.0 })
            .collect(),
    )
}

/// Fuzzy tiling activation.
pub fn fta_forward(z: f64, cfg: &TilingConfig) -> SparseVector {
    let mut out = vec![0.0; cfg.bins];
    fta_forward_into(z, cfg, &mut out);
    SparseVector(out)
}

/// Derivative of every FTA output with respect to `z`.
///
/// At the measure-zero breakpoints (`g_j = 0` or `g_j = η`) the derivative is
/// taken to be 0.
pub fn fta_backward(z: f64, cfg: &TilingConfig) -> Vec<f64> {
    let mut out = vec![0.0; cfg.bins];
    fta_derivative_into(z, cfg, &mut out);
    out
}

pub(crate) fn fta_forward_into(z: f64, cfg: &TilingConfig, out: &mut [f64]) {
    debug_assert_eq!(out.len(), cfg.bins);
    out.fill(0.0);
    for j in cfg.window(z) {
        out[j] = 1.0 - fuzzy_indicator(cfg.distance(j, z), cfg.eta);
    }
}

pub(crate) fn fta_derivative_into(z: f64, cfg: &TilingConfig, out: &mut [f64]) {
    debug_assert_eq!(out.len(), cfg.bins);
    out.fill(0.0);
    for j in cfg.window(z) {
        let left = cfg.cutoff(j);
        let right = cfg.cutoff(j + 1);
        out[j] = if z < left && left - z < cfg.eta {
            1.0
        } else if z > right && z - right < cfg.eta {
            -1.0
        } else {
            0.0
        };
    }
}

/// Applies FTA to every entry of `pre` (`batch × d`), producing `batch × d·k`.
///
/// Unit `i`'s tiles occupy columns `i·k .. (i+1)·k`.
pub fn fta_layer_forward(pre: &Matrix, cfg: &TilingConfig) -> Result<Matrix> {
    let k = cfg.bins;
    let mut out = Matrix::zeros(pre.rows(), pre.cols() * k);
    for r in 0..pre.rows() {
        for (i, &z) in pre.row(r).iter().enumerate() {
            if !z.is_finite() {
                return Err(Error::NonFinite {
                    layer: 0,
                    what: format!("FTA input at row {r}, column {i} is {z}"),
                });
            }
        }
        let (src, dst) = (pre.row(r).to_vec(), out.row_mut(r));
        for (i, z) in src.into_iter().enumerate() {
            fta_forward_into(z, cfg, &mut dst[i * k..(i + 1) * k]);
        }
    }
    Ok(out)
}

/// Worst-case number of nonzero FTA outputs for inputs in `[l, u]`:
/// `2⌊η/δ⌋ + 3`.
pub fn sparsity_upper_bound(cfg: &TilingConfig) -> usize {
    2 * (cfg.eta / cfg.tile_width).floor() as usize + 3
}

/// Largest `η` whose sparsity bound keeps at most `⌊kρ⌋` of `k` tiles active:
/// `(δ/2)(⌊kρ⌋ - 1)`.
pub fn max_eta_for_sparsity(bins: usize, tile_width: f64, rho: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Domain(format!(
            "sparsity level must lie in [0, 1), got {rho}"
        )));
    }
    let budget = bins as f64 * rho;
    // Absorb representation error such as 100 * 0.1 landing just below 10.
    let budget_floor = (budget * (1.0 + 1e-12)).floor();
    if budget_floor < 3.0 {
        return Err(Error::Domain(format!(
            "k·ρ = {budget} is below 3; no η satisfies the sparsity bound"
        )));
    }
    Ok(tile_width * (budget_floor - 1.0) / 2.0)
}

/// Out-of-bound penalty `I(|z| > u)·|z|` for the symmetric range `[-u, u]`,
/// returned together with its derivative `I(z > u) - I(z < -u)`.
pub fn out_of_bound_penalty(z: f64, bound: f64) -> (f64, f64) {
    debug_assert!(bound > 0.0);
    if z > bound {
        (z, 1.0)
    } else if z < -bound {
        (-z, -1.0)
    } else {
        (0.0, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit(delta: f64, eta: f64) -> TilingConfig {
        TilingConfig::new(0.0, 1.0, delta, eta).unwrap()
    }

    /// Direct transcription of the activation, independent of the tile-edge
    /// bookkeeping used by the implementation.
    fn literal(z: f64, c: &[f64], delta: f64, eta: f64) -> Vec<f64> {
        c.iter()
            .map(|&cj| {
                let x = (cj - z).max(0.0) + (z - delta - cj).max(0.0);
                let ind = if x < eta {
                    x
                } else if x > eta {
                    1.0
                } else {
                    eta
                };
                1.0 - ind
            })
            .collect()
    }

    #[test]
    fn tiling_vector_examples() {
        assert_eq!(tiling_vector(&unit(0.25, 0.0)), vec![0.0, 0.25, 0.5, 0.75]);
        assert_eq!(tiling_vector(&unit(0.5, 0.0)), vec![0.0, 0.5]);
        let c = tiling_vector(&TilingConfig::with_default_eta(-20.0, 20.0, 2.0).unwrap());
        assert_eq!(c.len(), 20);
        assert_eq!(c[0], -20.0);
        assert_eq!(c[1], -18.0);
        assert_eq!(c[19], 18.0);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn config_validation() {
        assert!(TilingConfig::new(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(TilingConfig::new(0.0, 1.0, 0.3, 0.0).is_err());
        assert!(TilingConfig::new(1.0, 0.0, 0.25, 0.0).is_err());
        assert!(TilingConfig::new(0.0, 1.0, 0.25, -0.1).is_err());
        assert!(TilingConfig::from_bins(0.0, 1.0, 1, 0.0).is_err());
        let cfg = TilingConfig::from_bins(-1.0, 1.0, 40, 1.0 / 40.0).unwrap();
        assert_eq!(cfg.tile_width(), 0.05);
        assert_eq!(cfg.bins() as f64 * cfg.tile_width(), cfg.upper() - cfg.lower());
        let default = TilingConfig::with_default_eta(-20.0, 20.0, 2.0).unwrap();
        assert_eq!(default.eta(), default.tile_width());
    }

    #[test]
    fn covering_expands_evenly() {
        let cfg = TilingConfig::covering(-1.0, 1.0, 0.8, 0.8).unwrap();
        assert_eq!(cfg.bins(), 3);
        assert_abs_diff_eq!(cfg.lower(), -1.2, epsilon = 1e-12);
        assert_abs_diff_eq!(cfg.upper(), 1.2, epsilon = 1e-12);
        let exact = TilingConfig::covering(-1.0, 1.0, 0.1, 0.1).unwrap();
        assert_eq!(exact.bins(), 20);
        assert_eq!(exact.lower(), -1.0);
    }

    #[test]
    fn ta_examples() {
        let cfg = unit(0.25, 0.0);
        assert_eq!(ta_forward(0.3, &cfg).as_slice(), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(ta_forward(0.5, &cfg).as_slice(), &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(ta_forward(0.0, &cfg).as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        let wide = TilingConfig::with_default_eta(-20.0, 20.0, 2.0).unwrap();
        let at_l = ta_forward(-20.0, &wide);
        assert_eq!(at_l.support(), vec![0]);
    }

    #[test]
    fn fuzzy_indicator_branches() {
        assert_eq!(fuzzy_indicator(0.05, 0.1), 0.05);
        assert_eq!(fuzzy_indicator(0.45, 0.1), 1.0);
        assert_eq!(fuzzy_indicator(0.1, 0.1), 0.1);
        assert_eq!(fuzzy_indicator(0.0, 0.0), 0.0);
        assert_eq!(fuzzy_indicator(0.2, 0.0), 1.0);
    }

    #[test]
    fn fta_examples() {
        let cfg = unit(0.25, 0.1);
        let expect = literal(0.3, &[0.0, 0.25, 0.5, 0.75], 0.25, 0.1);
        // Hand evaluation: distances (0.05, 0, 0.2, 0.45) -> (0.95, 1, 0, 0).
        for (a, b) in expect.iter().zip([0.95, 1.0, 0.0, 0.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        let got = fta_forward(0.3, &cfg);
        for (a, b) in got.as_slice().iter().zip(&expect) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }

        let hard = fta_forward(0.3, &unit(0.25, 0.0));
        assert_eq!(hard, ta_forward(0.3, &unit(0.25, 0.0)));

        let mid = fta_forward(0.375, &unit(0.25, 0.25));
        let expect = literal(0.375, &[0.0, 0.25, 0.5, 0.75], 0.25, 0.25);
        for ((a, b), c) in mid.as_slice().iter().zip(&expect).zip([0.875, 1.0, 0.875, 0.0]) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
            assert_abs_diff_eq!(*a, c, epsilon = 1e-12);
        }
    }

    #[test]
    fn fta_backward_examples() {
        let cfg = unit(0.25, 0.25);
        assert_eq!(fta_backward(0.3, &cfg), vec![-1.0, 0.0, 1.0, 0.0]);
        // Central differences on the literal formula.
        let h = 1e-7;
        let c = tiling_vector(&cfg);
        let plus = literal(0.3 + h, &c, 0.25, 0.25);
        let minus = literal(0.3 - h, &c, 0.25, 0.25);
        for (j, g) in fta_backward(0.3, &cfg).into_iter().enumerate() {
            assert_abs_diff_eq!((plus[j] - minus[j]) / (2.0 * h), g, epsilon = 1e-6);
        }
        assert!(fta_backward(0.3, &unit(0.25, 0.0)).iter().all(|g| *g == 0.0));
        assert!(fta_backward(1.0 + 0.25 + 1.0, &cfg).iter().all(|g| *g == 0.0));
    }

    #[test]
    fn fta_decays_outside_bounds() {
        let cfg = unit(0.25, 0.1);
        assert_eq!(fta_forward(-0.2, &cfg).nonzero_count(), 0);
        assert_eq!(fta_forward(1.2, &cfg).nonzero_count(), 0);
        assert_eq!(fta_forward(1.05, &cfg).nonzero_count(), 1);
    }

    #[test]
    fn layer_forward_concatenates() {
        let cfg = unit(0.25, 0.1);
        let z = Matrix::from_rows(&[[0.3, 0.3]]).unwrap();
        let out = fta_layer_forward(&z, &cfg).unwrap();
        let expect = [0.95, 1.0, 0.0, 0.0, 0.95, 1.0, 0.0, 0.0];
        for (a, b) in out.row(0).iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        let single = fta_layer_forward(&Matrix::from_rows(&[[0.3]]).unwrap(), &cfg).unwrap();
        assert_eq!(single.row(0), fta_forward(0.3, &cfg).as_slice());

        let wide = TilingConfig::with_default_eta(-20.0, 20.0, 2.0).unwrap();
        let big = fta_layer_forward(&Matrix::zeros(64, 64), &wide).unwrap();
        assert_eq!(big.shape(), (64, 1280));

        let bad = Matrix::from_rows(&[[0.1, f64::NAN]]).unwrap();
        assert!(matches!(fta_layer_forward(&bad, &cfg), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn sparsity_bound_examples() {
        assert_eq!(sparsity_upper_bound(&unit(0.25, 0.25)), 5);
        assert_eq!(sparsity_upper_bound(&unit(0.25, 0.0)), 3);
        let cfg = TilingConfig::from_bins(0.0, 5.0, 100, 0.225).unwrap();
        assert_eq!(sparsity_upper_bound(&cfg), 11);
    }

    #[test]
    fn max_eta_examples() {
        assert_eq!(max_eta_for_sparsity(100, 0.05, 0.1).unwrap(), 0.225);
        assert_eq!(max_eta_for_sparsity(30, 0.25, 0.1).unwrap(), 0.25);
        assert_eq!(max_eta_for_sparsity(20, 2.0, 0.25).unwrap(), 4.0);
        assert!(matches!(max_eta_for_sparsity(20, 2.0, 0.1), Err(Error::Domain(_))));
        assert!(max_eta_for_sparsity(20, 2.0, 1.0).is_err());
    }

    #[test]
    fn max_eta_against_empirical_count() {
        // k = 20, δ = 2, ρ = 0.25 gives η = 4. The realised count stays within
        // the 2⌊η/δ⌋ + 3 = 7 bound but reaches 6 > ⌊kρ⌋ = 5 on a cutoff, so
        // the closed form does not by itself cap the count at ⌊kρ⌋.
        let eta = max_eta_for_sparsity(20, 2.0, 0.25).unwrap();
        let cfg = TilingConfig::from_bins(-20.0, 20.0, 20, eta).unwrap();
        assert_eq!(sparsity_upper_bound(&cfg), 7);
        let max_active = (0..=40_000)
            .map(|i| fta_forward(-20.0 + i as f64 * 1e-3, &cfg).nonzero_count())
            .max()
            .unwrap();
        assert!(max_active <= sparsity_upper_bound(&cfg));
        assert_eq!(fta_forward(-10.0, &cfg).nonzero_count(), 6);
        // Mid-tile the neighbours sit at g = 1 and vanish.
        assert_eq!(fta_forward(-9.0, &cfg).nonzero_count(), 3);
    }

    #[test]
    fn out_of_bound_penalty_examples() {
        assert_eq!(out_of_bound_penalty(0.5, 1.0), (0.0, 0.0));
        assert_eq!(out_of_bound_penalty(3.0, 1.0), (3.0, 1.0));
        assert_eq!(out_of_bound_penalty(-3.0, 1.0), (3.0, -1.0));
        assert_eq!(out_of_bound_penalty(1.0, 1.0), (0.0, 0.0));
    }
}
