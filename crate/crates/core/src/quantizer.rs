//! ADC distortion model.
//!
//! A `b`-bit MMSE scalar quantizer on a unit-variance Gaussian input leaves a
//! normalized mean-square error `f(b)`. Under the additive quantization noise
//! model the quantizer output on RF path `i` is `(1 - f(b_i)) z_i + n_q,i`
//! with `n_q` uncorrelated with `z` and of variance `f(b_i)(1 - f(b_i)) l_i`.
//!
//! The default table holds the optimal non-uniform Gaussian quantizer
//! distortions for 1..=5 bits; [`design_lloyd_max`] rebuilds those quantizers
//! from scratch so the table can be checked empirically.

use nalgebra::DVector;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::{Error, Result, C64};

/// Largest bit width with a tabulated distortion.
pub const MAX_TABLE_BITS: u8 = 5;

/// Normalized MMSE distortion of the optimal Gaussian quantizer, `b = 1..=5`.
pub const DEFAULT_DISTORTION: [f64; 5] = [0.3634, 0.1175, 0.03454, 0.009497, 0.002499];

/// The map `b -> f(b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantGainTable {
    f: [f64; MAX_TABLE_BITS as usize],
}

impl Default for QuantGainTable {
    fn default() -> Self {
        Self { f: DEFAULT_DISTORTION }
    }
}

impl QuantGainTable {
    /// Values must lie in (0, 1) and strictly decrease with `b`.
    pub fn new(f: [f64; MAX_TABLE_BITS as usize]) -> Result<Self> {
        if f.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "distortion ratios must lie in (0, 1): {f:?}"
            )));
        }
        if f.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter(format!(
                "distortion ratios must strictly decrease: {f:?}"
            )));
        }
        Ok(Self { f })
    }

    /// Replaces a single entry, revalidating the table.
    pub fn with_entry(&self, bits: u8, value: f64) -> Result<Self> {
        check_bits(bits)?;
        let mut f = self.f;
        f[bits as usize - 1] = value;
        Self::new(f)
    }

    /// `f(b)`.
    pub fn f(&self, bits: u8) -> Result<f64> {
        check_bits(bits)?;
        Ok(self.f[bits as usize - 1])
    }

    pub fn values(&self) -> &[f64; MAX_TABLE_BITS as usize] {
        &self.f
    }
}

fn check_bits(bits: u8) -> Result<()> {
    if (1..=MAX_TABLE_BITS).contains(&bits) {
        Ok(())
    } else {
        Err(Error::BitWidthOutOfRange(bits))
    }
}

/// Per-path ADC bit widths, applied to both I and Q.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitAllocation(Vec<u8>);

impl BitAllocation {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::InvalidParameter("empty bit allocation".into()));
        }
        if let Some(&b) = bits.iter().find(|&&b| !(1..=MAX_TABLE_BITS).contains(&b)) {
            return Err(Error::BitWidthOutOfRange(b));
        }
        Ok(Self(bits))
    }

    pub fn uniform(n_s: usize, bits: u8) -> Result<Self> {
        Self::new(vec![bits; n_s])
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `f(b_i)` for every path.
    pub fn distortions(&self, table: &QuantGainTable) -> Result<Vec<f64>> {
        self.0.iter().map(|&b| table.f(b)).collect()
    }
}

impl std::fmt::Display for BitAllocation {
    /// Dash-separated widths, e.g. `4-2-1-1`.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|b| b.to_string()).collect();
        f.write_str(&parts.join("-"))
    }
}

/// ADC configuration across the RF paths.
#[derive(Debug, Clone, PartialEq)]
pub enum Quantization {
    Bits(BitAllocation),
    /// Infinite-resolution ADCs, modelled as `f = 0` exactly.
    Unquantized,
}

impl Quantization {
    pub fn distortions(&self, table: &QuantGainTable, n_s: usize) -> Result<Vec<f64>> {
        match self {
            Quantization::Bits(b) => {
                if b.len() != n_s {
                    return Err(Error::DimensionMismatch(format!(
                        "allocation has {} paths, model has {n_s}",
                        b.len()
                    )));
                }
                b.distortions(table)
            }
            Quantization::Unquantized => Ok(vec![0.0; n_s]),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Quantization::Bits(b) => b.to_string(),
            Quantization::Unquantized => "inf".to_string(),
        }
    }
}

/// Diagonals of the AQNM matrices `W_alpha`, `W_{1-alpha}` and `D_q^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct AqnmMatrices {
    /// `1 - f(b_i)`.
    pub w_alpha: DVector<f64>,
    /// `f(b_i)`.
    pub w_one_minus_alpha: DVector<f64>,
    /// `f(b_i)(1 - f(b_i)) l_i`.
    pub d_q_sq: DVector<f64>,
}

impl AqnmMatrices {
    /// Builds the matrices from per-path distortion ratios and gains `l_i`.
    pub fn from_distortions(f: &[f64], l: &[f64]) -> Result<Self> {
        if f.len() != l.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} distortions for {} path gains",
                f.len(),
                l.len()
            )));
        }
        if let Some(&bad) = l.iter().find(|&&v| !(v >= 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "path gain l_i must be >= 1, got {bad}"
            )));
        }
        if f.iter().any(|&v| !(0.0..1.0).contains(&v)) {
            return Err(Error::InvalidParameter("distortion ratios must lie in [0, 1)".into()));
        }
        let n = f.len();
        Ok(Self {
            w_alpha: DVector::from_iterator(n, f.iter().map(|v| 1.0 - v)),
            w_one_minus_alpha: DVector::from_column_slice(f),
            d_q_sq: DVector::from_iterator(n, f.iter().zip(l).map(|(fi, li)| fi * (1.0 - fi) * li)),
        })
    }

    pub fn n_s(&self) -> usize {
        self.w_alpha.len()
    }

    pub fn is_unquantized(&self) -> bool {
        self.d_q_sq.iter().all(|&v| v == 0.0)
    }
}

pub fn build_aqnm(table: &QuantGainTable, bits: &BitAllocation, l: &[f64]) -> Result<AqnmMatrices> {
    if bits.len() != l.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} bit widths for {} path gains",
            bits.len(),
            l.len()
        )));
    }
    AqnmMatrices::from_distortions(&bits.distortions(table)?, l)
}

const LLOYD_TOLERANCE: f64 = 1e-12;
const LLOYD_MAX_ITERATIONS: usize = 100_000;

/// MMSE scalar quantizer for the zero-mean unit-variance Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydMaxCodebook {
    pub bits: u8,
    /// Reconstruction levels, strictly increasing.
    pub levels: Vec<f64>,
    /// Decision boundaries; `thresholds[k]` separates `levels[k]` and `levels[k + 1]`.
    pub thresholds: Vec<f64>,
    pub iterations: usize,
}

fn pdf(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
    }
}

/// Upper tail `P(X > x)`.
fn tail(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// `P(a < X <= b)`, evaluated on the tail side to keep precision.
fn cell_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        tail(a) - tail(b)
    } else if b <= 0.0 {
        tail(-b) - tail(-a)
    } else {
        1.0 - tail(b) - tail(-a)
    }
}

/// `x * pdf(x)`, zero at the infinities.
fn x_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        x * pdf(x)
    }
}

fn centroid(a: f64, b: f64) -> f64 {
    (pdf(a) - pdf(b)) / cell_mass(a, b)
}

/// `E[(X - y)^2; a < X <= b]` for the standard normal.
fn cell_distortion(a: f64, b: f64, y: f64) -> f64 {
    let mass = cell_mass(a, b);
    let first = pdf(a) - pdf(b);
    let second = mass + x_pdf(a) - x_pdf(b);
    second - 2.0 * y * first + y * y * mass
}

fn cell_bounds(thresholds: &[f64], k: usize) -> (f64, f64) {
    let lo = if k == 0 { f64::NEG_INFINITY } else { thresholds[k - 1] };
    let hi = thresholds.get(k).copied().unwrap_or(f64::INFINITY);
    (lo, hi)
}

fn total_distortion(levels: &[f64], thresholds: &[f64]) -> f64 {
    levels
        .iter()
        .enumerate()
        .map(|(k, &y)| {
            let (a, b) = cell_bounds(thresholds, k);
            cell_distortion(a, b, y)
        })
        .sum()
}

/// Runs Lloyd's centroid / midpoint iteration on the unit Gaussian density,
/// starting from equiprobable cells, until the distortion changes by less
/// than `1e-12`.
pub fn design_lloyd_max(bits: u8) -> Result<LloydMaxCodebook> {
    check_bits(bits)?;
    let n_levels = 1usize << bits;
    let normal = Normal::standard();
    let mut thresholds: Vec<f64> = (1..n_levels)
        .map(|k| normal.inverse_cdf(k as f64 / n_levels as f64))
        .collect();
    let mut levels = vec![0.0; n_levels];
    let mut previous = f64::INFINITY;

    for iteration in 1..=LLOYD_MAX_ITERATIONS {
        for (k, level) in levels.iter_mut().enumerate() {
            let (a, b) = cell_bounds(&thresholds, k);
            *level = centroid(a, b);
        }
        // Enforce odd symmetry of the levels.
        for k in 0..n_levels / 2 {
            let m = 0.5 * (levels[n_levels - 1 - k] - levels[k]);
            levels[k] = -m;
            levels[n_levels - 1 - k] = m;
        }
        for (k, t) in thresholds.iter_mut().enumerate() {
            *t = 0.5 * (levels[k] + levels[k + 1]);
        }
        thresholds[n_levels / 2 - 1] = 0.0;

        let distortion = total_distortion(&levels, &thresholds);
        if (previous - distortion).abs() < LLOYD_TOLERANCE {
            return Ok(LloydMaxCodebook {
                bits,
                levels,
                thresholds,
                iterations: iteration,
            });
        }
        previous = distortion;
    }
    Err(Error::NoConvergence(LLOYD_MAX_ITERATIONS))
}

impl LloydMaxCodebook {
    /// Expected normalized MSE on the unit Gaussian.
    pub fn distortion(&self) -> f64 {
        total_distortion(&self.levels, &self.thresholds)
    }

    /// Nearest reconstruction level. A sample exactly on a boundary maps to
    /// the upper level, so `0` goes to the positive level for `bits = 1`.
    pub fn quantize(&self, x: f64) -> f64 {
        let k = self.thresholds.partition_point(|&t| t <= x);
        self.levels[k]
    }

    pub fn quantize_samples(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| self.quantize(v)).collect()
    }

    /// Quantizes I and Q independently.
    pub fn quantize_complex(&self, z: &[C64]) -> Vec<C64> {
        z.iter()
            .map(|v| C64::new(self.quantize(v.re), self.quantize(v.im)))
            .collect()
    }
}
