//! Estimation and information-theoretic figures of merit.
//!
//! For the model `y = K x + n1`, `n1 ~ CN(0, Phi)`, `x ~ CN(0, p I)`:
//!
//! ```text
//! CRLB      = (K^H Phi^{-1} K)^{-1}
//! C         = log2 det(I + p K K^H Phi^{-1})
//!           = n_s log2 p + log2 det(CRLB^{-1} + I / p)
//! q(b_i)    = p sigma_i^2 / (sigma_n^2 + f(b_i) l_i / (1 - f(b_i)))
//! K_f(b)    = sum_i q(b_i)
//! ```
//!
//! With the ideal combiner everything is diagonal and `C = sum_i log2(1 + q(b_i))`.

use nalgebra::DVector;
use std::f64::consts::LN_2;

use crate::quantizer::{QuantGainTable, Quantization};
use crate::receiver::{CombinerMode, EffectiveModel, PowerConvention};
use crate::{linalg, CMatrix, Error, Result};

/// Agreement required between the matrix and closed-form CRLB, relative to
/// the largest entry (or absolute below 1).
pub const CLOSED_FORM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct CrlbResult {
    /// `(K^H Phi^{-1} K)^{-1}`.
    pub crlb: CMatrix,
    /// Diagonal of the inverse CRLB. In ideal mode this is the closed form
    /// `sigma_i^2 / (sigma_n^2 + f l / (1 - f))`; otherwise the diagonal of
    /// `K^H Phi^{-1} K`.
    pub inv_crlb_diag: DVector<f64>,
    /// Largest entry gap to the closed form, ideal mode only.
    pub closed_form_gap: Option<f64>,
}

/// `K^H Phi^{-1} K` through the Cholesky factor of `Phi`.
pub fn fisher_information(model: &EffectiveModel) -> Result<CMatrix> {
    let chol = linalg::cholesky(&model.phi, "noise covariance Phi")?;
    let m = chol
        .l_dirty()
        .solve_lower_triangular(&model.k)
        .ok_or(Error::Singular("noise covariance Phi"))?;
    Ok(linalg::hermitian_part(&(m.adjoint() * m)))
}

/// `sigma_n^2 Sigma^{-2} + Sigma^{-2} W_alpha^{-2} D_q^2`, ideal combiner only.
pub fn crlb_closed_form(model: &EffectiveModel) -> CMatrix {
    let d = DVector::from_fn(model.n_s(), |i, _| {
        let s2 = model.sigma[i].powi(2);
        model.sigma_n_sq / s2 + model.d_q_sq[i] / (model.w_alpha[i].powi(2) * s2)
    });
    linalg::diag(&d)
}

/// `sigma_i^2 / (sigma_n^2 + f(b_i) l_i / (1 - f(b_i)))`.
pub fn inv_crlb_closed_form(model: &EffectiveModel) -> DVector<f64> {
    let f = model.distortions();
    DVector::from_fn(model.n_s(), |i, _| {
        model.sigma[i].powi(2) / (model.sigma_n_sq + f[i] * model.l[i] / (1.0 - f[i]))
    })
}

pub fn crlb(model: &EffectiveModel) -> Result<CrlbResult> {
    if model.w_alpha.iter().any(|&a| a <= 0.0) || model.sigma.iter().any(|&s| s <= 0.0) {
        return Err(Error::Singular("effective channel K"));
    }
    let fisher = fisher_information(model)?;
    let crlb = linalg::inverse_hpd(&fisher, "Fisher information K^H Phi^{-1} K")?;
    match model.mode {
        CombinerMode::Ideal => {
            let closed = crlb_closed_form(model);
            let gap = linalg::max_abs_diff(&crlb, &closed);
            let scale = closed.iter().map(|z| z.norm()).fold(1.0, f64::max);
            if gap > CLOSED_FORM_TOLERANCE * scale {
                return Err(Error::ClosedFormMismatch(gap));
            }
            Ok(CrlbResult {
                crlb,
                inv_crlb_diag: inv_crlb_closed_form(model),
                closed_form_gap: Some(gap),
            })
        }
        CombinerMode::PhaseConstrained => Ok(CrlbResult {
            crlb,
            inv_crlb_diag: linalg::real_diag(&fisher),
            closed_form_gap: None,
        }),
    }
}

#[derive(Debug, Clone)]
pub struct CapacityReport {
    /// Bits per channel use from the determinant form.
    pub capacity_bits: f64,
    /// `log2(1 + q(b_i))`; these sum to the capacity in ideal mode.
    pub per_path_terms: DVector<f64>,
    pub k_f_score: f64,
    pub mode: CombinerMode,
    pub convention: PowerConvention,
    pub allocation: Quantization,
}

/// `q(b_i)` for each path of the model.
pub fn per_path_q(model: &EffectiveModel) -> DVector<f64> {
    inv_crlb_closed_form(model).scale(model.p)
}

/// `log2 det(I + p K K^H Phi^{-1})` via two Cholesky factorizations.
pub fn capacity_det(model: &EffectiveModel) -> Result<f64> {
    let chol = linalg::cholesky(&model.phi, "noise covariance Phi")?;
    let m = chol
        .l_dirty()
        .solve_lower_triangular(&model.k)
        .ok_or(Error::Singular("noise covariance Phi"))?;
    let n = model.n_s();
    let a = CMatrix::identity(n, n) + (&m * m.adjoint()).scale(model.p);
    let c = linalg::ln_det_hpd(&a, "I + p K K^H Phi^{-1}")? / LN_2;
    if !c.is_finite() {
        return Err(Error::NonFinite("capacity determinant"));
    }
    Ok(c)
}

/// `n_s log2 p + log2 det(K^H Phi^{-1} K + I / p)`.
pub fn capacity_via_fisher(model: &EffectiveModel) -> Result<f64> {
    let n = model.n_s();
    let a = fisher_information(model)? + CMatrix::identity(n, n).scale(1.0 / model.p);
    Ok(n as f64 * model.p.log2() + linalg::ln_det_hpd(&a, "K^H Phi^{-1} K + I/p")? / LN_2)
}

pub fn capacity(model: &EffectiveModel) -> Result<CapacityReport> {
    let capacity_bits = capacity_det(model)?;
    let q = per_path_q(model);
    let allocation = if model.d_q_sq.iter().all(|&v| v == 0.0) {
        Quantization::Unquantized
    } else {
        model.quantization.clone().unwrap_or(Quantization::Unquantized)
    };
    Ok(CapacityReport {
        capacity_bits,
        per_path_terms: q.map(|v| (1.0 + v).log2()),
        k_f_score: q.sum(),
        mode: model.mode,
        convention: model.convention,
        allocation,
    })
}

/// ADC resolution of a single path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    Bits(u8),
    Infinite,
}

/// Per-path gain term; `p` is the per-stream symbol power.
pub fn q_of_b(
    p: f64,
    sigma_n_sq: f64,
    sigma_i: f64,
    l_i: f64,
    resolution: Resolution,
    table: &QuantGainTable,
) -> Result<f64> {
    let f = match resolution {
        Resolution::Bits(b) => table.f(b)?,
        Resolution::Infinite => 0.0,
    };
    Ok(q_from_distortion(p, sigma_n_sq, sigma_i * sigma_i, l_i, f))
}

#[inline]
pub(crate) fn q_from_distortion(p: f64, sigma_n_sq: f64, sigma_sq: f64, l: f64, f: f64) -> f64 {
    p * sigma_sq / (sigma_n_sq + f * l / (1.0 - f))
}

/// `K_f(b) = sum_i k_f(b_i)` using the model's singular values and path gains.
pub fn k_f_sum(model: &EffectiveModel, bits: &crate::quantizer::BitAllocation, table: &QuantGainTable) -> Result<f64> {
    if bits.len() != model.n_s() {
        return Err(Error::DimensionMismatch(format!(
            "{} bit widths for {} paths",
            bits.len(),
            model.n_s()
        )));
    }
    bits.bits().iter().enumerate().try_fold(0.0, |acc, (i, &b)| {
        Ok(acc
            + q_of_b(
                model.p,
                model.sigma_n_sq,
                model.sigma[i],
                model.l[i],
                Resolution::Bits(b),
                table,
            )?)
    })
}

/// Infinite-resolution capacity with total power split evenly,
/// `sum_i log2(1 + rho sigma_i^2 / n_s)`.
pub fn capacity_infinite_uniform(sigma: &[f64], rho: f64) -> f64 {
    let n = sigma.len() as f64;
    sigma.iter().map(|s| (1.0 + rho * s * s / n).log2()).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterFilling {
    pub capacity: f64,
    /// Allocated power relative to the uniform share; `sum(epsilon) = n_s`
    /// and `epsilon = 1` everywhere reproduces the uniform allocation.
    pub epsilon: Vec<f64>,
    /// Water level in the same units as `epsilon`.
    pub water_level: f64,
}

/// Water-filling over the eigen-channels:
/// `max sum_i log2(1 + epsilon_i rho sigma_i^2 / n_s)` s.t. `sum epsilon_i = n_s`.
pub fn capacity_infinite_waterfill(sigma: &[f64], rho: f64) -> Result<WaterFilling> {
    let n = sigma.len();
    if n == 0 || !(rho > 0.0) {
        return Err(Error::InvalidParameter(
            "water-filling needs rho > 0 and at least one path".into(),
        ));
    }
    if sigma.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidParameter("singular values must be positive".into()));
    }
    let total = n as f64;
    // Floor of each path: the power that brings it to the water surface.
    let floor: Vec<f64> = sigma.iter().map(|s| total / (rho * s * s)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| floor[a].total_cmp(&floor[b]));

    // eps_i = (n + sum_{j active} (floor_j - floor_i)) / k, exact 1 for equal floors.
    let share = |active: &[usize], i: usize| {
        let excess: f64 = active.iter().map(|&j| floor[j] - floor[i]).sum();
        (total + excess) / active.len() as f64
    };
    let mut k = n;
    while k > 1 && share(&order[..k], order[k - 1]) <= 0.0 {
        k -= 1;
    }
    let active = &order[..k];
    let mut epsilon = vec![0.0; n];
    for &i in active {
        epsilon[i] = share(active, i);
    }
    let water_level = floor[active[0]] + epsilon[active[0]];
    let capacity = sigma
        .iter()
        .zip(&epsilon)
        .map(|(s, e)| (1.0 + e * rho * s * s / total).log2())
        .sum();
    Ok(WaterFilling {
        capacity,
        epsilon,
        water_level,
    })
}
