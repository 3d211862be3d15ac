//! Hybrid combiner and the effective receive model `y = K x + n1`.
//!
//! With the precoder fixed to `F_opt`, the received symbol after analog
//! combining, per-path quantization (AQNM) and digital combining is
//!
//! ```text
//! y  = W_D^H W_alpha W_A^H U Sigma x + W_D^H W_alpha W_A^H n + W_D^H n_q
//! K  = W_D^H W_alpha W_A^H U Sigma
//! G  = W_D^H W_alpha W_A^H
//! Phi = sigma_n^2 G G^H + W_D^H D_q^2 W_D
//! ```
//!
//! Transmit power follows one of two conventions ([`PowerConvention`]); a
//! model records which one produced it.

use nalgebra::DVector;

use crate::channel::{ChannelRealization, SvdTriple};
use crate::quantizer::{AqnmMatrices, QuantGainTable, Quantization};
use crate::rng::{complex_normal, seeded};
use crate::{linalg, CMatrix, Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinerMode {
    /// `W_A^H = U^H`, `W_D^H = I`.
    Ideal,
    /// Unit-modulus analog stage with a least-squares digital correction.
    PhaseConstrained,
}

#[derive(Debug, Clone)]
pub struct CombinerSet {
    /// Analog stage actually applied before the ADCs, `n_s x n_r`.
    pub w_a_h: CMatrix,
    /// Digital stage, `n_s x n_s`.
    pub w_d_h: CMatrix,
    pub mode: CombinerMode,
    /// `||W_D W_A^H - U^H||_F`; zero in ideal mode.
    pub residual: f64,
}

impl CombinerSet {
    pub fn within_tolerance(&self, tolerance: f64) -> bool {
        self.residual <= tolerance
    }
}

pub fn build_combiners(svd: &SvdTriple, mode: CombinerMode) -> Result<CombinerSet> {
    let n_s = svd.n_s();
    match mode {
        CombinerMode::Ideal => Ok(CombinerSet {
            w_a_h: svd.u.adjoint(),
            w_d_h: CMatrix::identity(n_s, n_s),
            mode,
            residual: 0.0,
        }),
        CombinerMode::PhaseConstrained => {
            let n_r = svd.u.nrows();
            let amp = 1.0 / (n_r as f64).sqrt();
            let w_a = svd.u.map(|z| C64::from_polar(amp, z.arg()));
            // U ~ W_A W_D^H  =>  W_D^H = (W_A^H W_A)^{-1} W_A^H U
            let gram = w_a.adjoint() * &w_a;
            let chol = linalg::cholesky(&gram, "analog combiner Gram matrix")?;
            let l = chol.l_dirty();
            let min_pivot = (0..n_s).map(|i| l[(i, i)].re).fold(f64::INFINITY, f64::min);
            if !(min_pivot > 1e-10) {
                return Err(Error::Singular("analog combiner Gram matrix"));
            }
            let w_d_h = chol.solve(&(w_a.adjoint() * &svd.u));
            let w_a_h = w_a.adjoint();
            let residual = linalg::frobenius(&(w_d_h.adjoint() * &w_a_h - svd.u.adjoint()));
            Ok(CombinerSet {
                w_a_h,
                w_d_h,
                mode,
                residual,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerConvention {
    /// `E[x x^H] = p I`: every stream carries power `p`.
    PerStream,
    /// `E[x x^H] = (p / n_s) I`: total power `p` split evenly.
    SplitTotal,
}

impl PowerConvention {
    pub fn label(self) -> &'static str {
        match self {
            PowerConvention::PerStream => "per-stream",
            PowerConvention::SplitTotal => "split-total",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalConfig {
    pub p: f64,
    pub sigma_n_sq: f64,
    pub convention: PowerConvention,
}

impl SignalConfig {
    pub fn new(p: f64, sigma_n_sq: f64, convention: PowerConvention) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) || !(sigma_n_sq > 0.0 && sigma_n_sq.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need p > 0 and sigma_n^2 > 0, got {p}, {sigma_n_sq}"
            )));
        }
        Ok(Self {
            p,
            sigma_n_sq,
            convention,
        })
    }

    /// Unit power `p = 1` with `sigma_n^2 = 1 / rho`.
    pub fn from_snr_db(snr_db: f64, convention: PowerConvention) -> Result<Self> {
        Self::new(1.0, 10f64.powf(-snr_db / 10.0), convention)
    }

    /// Thermal noise switched off. Only meaningful for simulation; the
    /// metrics need a positive-definite `Phi`.
    pub fn noiseless(p: f64, convention: PowerConvention) -> Self {
        Self {
            p,
            sigma_n_sq: 0.0,
            convention,
        }
    }

    /// Average SNR `rho = p / sigma_n^2`.
    pub fn rho(&self) -> f64 {
        self.p / self.sigma_n_sq
    }

    /// Per-stream symbol power for `n_s` streams.
    pub fn stream_power(&self, n_s: usize) -> f64 {
        match self.convention {
            PowerConvention::PerStream => self.p,
            PowerConvention::SplitTotal => self.p / n_s as f64,
        }
    }
}

/// The assembled linear model for one channel, combiner and allocation.
#[derive(Debug, Clone)]
pub struct EffectiveModel {
    /// Effective channel `K`, `n_s x n_s`.
    pub k: CMatrix,
    /// Combined gain `G`, `n_s x n_r`.
    pub g: CMatrix,
    pub w_d_h: CMatrix,
    /// Noise covariance `Phi`.
    pub phi: CMatrix,
    /// `1 - f(b_i)`.
    pub w_alpha: DVector<f64>,
    /// Quantization noise variances, diagonal of `D_q^2`.
    pub d_q_sq: DVector<f64>,
    /// Path gains `l_i`.
    pub l: DVector<f64>,
    pub sigma: DVector<f64>,
    /// Per-stream symbol power, `E[x x^H] = p I`.
    pub p: f64,
    pub sigma_n_sq: f64,
    pub convention: PowerConvention,
    pub mode: CombinerMode,
    /// The allocation the model was built for, when known.
    pub quantization: Option<Quantization>,
}

impl EffectiveModel {
    pub fn n_s(&self) -> usize {
        self.sigma.len()
    }

    /// `f(b_i) = 1 - (W_alpha)_ii`.
    pub fn distortions(&self) -> DVector<f64> {
        self.w_alpha.map(|a| 1.0 - a)
    }

    /// `sigma_n^2 G G^H + W_D^H D_q^2 W_D`, recomputed from the parts.
    pub fn phi_from_parts(&self) -> CMatrix {
        let thermal = (&self.g * self.g.adjoint()).scale(self.sigma_n_sq);
        let quant = &self.w_d_h * linalg::diag(&self.d_q_sq) * self.w_d_h.adjoint();
        thermal + quant
    }
}

/// Channel-dependent, allocation-independent part of the receiver. Building
/// a model for a new allocation only rescales rows.
#[derive(Debug, Clone)]
pub struct ReceiverFrontEnd {
    pub svd: SvdTriple,
    pub combiners: CombinerSet,
    l: DVector<f64>,
    /// `W_A^H U Sigma`.
    a_u_sigma: CMatrix,
}

impl ReceiverFrontEnd {
    pub fn new(svd: SvdTriple, combiners: CombinerSet, channel: &ChannelRealization) -> Result<Self> {
        let n_s = svd.n_s();
        let n_r = svd.u.nrows();
        if channel.h.nrows() != n_r || channel.h.ncols() != svd.f_opt.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "channel {:?} vs SVD factors {n_r}x{}",
                channel.h.shape(),
                svd.f_opt.nrows()
            )));
        }
        if combiners.w_a_h.shape() != (n_s, n_r) || combiners.w_d_h.shape() != (n_s, n_s) {
            return Err(Error::DimensionMismatch("combiner shapes do not match the SVD".into()));
        }
        let l = path_gains(&combiners, channel);
        let a_u_sigma = &combiners.w_a_h * &svd.u * linalg::diag(&svd.sigma);
        Ok(Self {
            svd,
            combiners,
            l,
            a_u_sigma,
        })
    }

    pub fn n_s(&self) -> usize {
        self.svd.n_s()
    }

    pub fn path_gains(&self) -> &DVector<f64> {
        &self.l
    }

    pub fn aqnm(&self, quant: &Quantization, table: &QuantGainTable) -> Result<AqnmMatrices> {
        let f = quant.distortions(table, self.n_s())?;
        AqnmMatrices::from_distortions(&f, self.l.as_slice())
    }

    pub fn model_for(
        &self,
        quant: &Quantization,
        table: &QuantGainTable,
        sig: &SignalConfig,
    ) -> Result<EffectiveModel> {
        let mut model = self.model(&self.aqnm(quant, table)?, sig)?;
        model.quantization = Some(quant.clone());
        Ok(model)
    }

    pub fn model(&self, aqnm: &AqnmMatrices, sig: &SignalConfig) -> Result<EffectiveModel> {
        let n_s = self.n_s();
        if aqnm.n_s() != n_s {
            return Err(Error::DimensionMismatch(format!(
                "AQNM for {} paths, receiver has {n_s}",
                aqnm.n_s()
            )));
        }
        let w_d_h = &self.combiners.w_d_h;
        let mut g = self.combiners.w_a_h.clone();
        let mut k = self.a_u_sigma.clone();
        for i in 0..n_s {
            g.row_mut(i).scale_mut(aqnm.w_alpha[i]);
            k.row_mut(i).scale_mut(aqnm.w_alpha[i]);
        }
        let g = w_d_h * g;
        let k = w_d_h * k;
        let mut model = EffectiveModel {
            k,
            g,
            w_d_h: w_d_h.clone(),
            phi: CMatrix::zeros(n_s, n_s),
            w_alpha: aqnm.w_alpha.clone(),
            d_q_sq: aqnm.d_q_sq.clone(),
            l: self.l.clone(),
            sigma: self.svd.sigma.clone(),
            p: sig.stream_power(n_s),
            sigma_n_sq: sig.sigma_n_sq,
            convention: sig.convention,
            mode: self.combiners.mode,
            quantization: None,
        };
        model.phi = linalg::hermitian_part(&model.phi_from_parts());
        Ok(model)
    }
}

/// `l_i = 1 + [W_A^H H H^H W_A]_ii`.
pub fn path_gains(combiners: &CombinerSet, channel: &ChannelRealization) -> DVector<f64> {
    let a_h = &combiners.w_a_h * &channel.h;
    DVector::from_iterator(
        a_h.nrows(),
        a_h.row_iter()
            .map(|r| 1.0 + r.iter().map(|z| z.norm_sqr()).sum::<f64>()),
    )
}

pub fn effective_model(
    svd: &SvdTriple,
    combiners: &CombinerSet,
    aqnm: &AqnmMatrices,
    sig: &SignalConfig,
    channel: &ChannelRealization,
) -> Result<EffectiveModel> {
    ReceiverFrontEnd::new(svd.clone(), combiners.clone(), channel)?.model(aqnm, sig)
}

/// Transmitted symbols and received vectors, one column per sample.
#[derive(Debug, Clone)]
pub struct ReceivedSamples {
    pub x: CMatrix,
    pub y: CMatrix,
}

const BLOCK: usize = 4096;

fn fill_normal(rows: usize, cols: usize, scale: &[f64], rng: &mut impl rand::Rng) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = complex_normal(rng) * scale[i];
        }
    }
    m
}

/// Draws `x ~ CN(0, p I)`, `n ~ CN(0, sigma_n^2 I)` and `n_q ~ CN(0, D_q^2)`
/// block by block and returns `(x, y)`. Each block draws all of `x`, then
/// `n`, then `n_q`, column-major.
pub fn simulate_received(model: &EffectiveModel, n_samples: usize, seed: u64) -> Result<ReceivedSamples> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
    }
    let n_s = model.n_s();
    let mut rng = seeded(seed);
    let mut x = CMatrix::zeros(n_s, n_samples);
    let mut y = CMatrix::zeros(n_s, n_samples);
    let x_scale = vec![model.p.sqrt(); n_s];
    let mut start = 0;
    while start < n_samples {
        let len = BLOCK.min(n_samples - start);
        let xb = fill_normal(n_s, len, &x_scale, &mut rng);
        let n1 = noise_block(model, len, &mut rng);
        let yb = &model.k * &xb + n1;
        x.columns_mut(start, len).copy_from(&xb);
        y.columns_mut(start, len).copy_from(&yb);
        start += len;
    }
    Ok(ReceivedSamples { x, y })
}

fn noise_block(model: &EffectiveModel, len: usize, rng: &mut impl rand::Rng) -> CMatrix {
    let n_r = model.g.ncols();
    let n_s = model.n_s();
    let n = fill_normal(n_r, len, &vec![model.sigma_n_sq.sqrt(); n_r], rng);
    let dq: Vec<f64> = model.d_q_sq.iter().map(|v| v.sqrt()).collect();
    let n_q = fill_normal(n_s, len, &dq, rng);
    &model.g * n + &model.w_d_h * n_q
}

/// Samples of `n1 = G n + W_D^H n_q`, one column per sample.
pub fn sample_noise(model: &EffectiveModel, n_samples: usize, seed: u64) -> CMatrix {
    let mut rng = seeded(seed);
    let mut out = CMatrix::zeros(model.n_s(), n_samples);
    let mut start = 0;
    while start < n_samples {
        let len = BLOCK.min(n_samples - start);
        out.columns_mut(start, len)
            .copy_from(&noise_block(model, len, &mut rng));
        start += len;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CscgReport {
    /// `||cov_hat - Phi||_F / ||Phi||_F`.
    pub cov_err: f64,
    /// `||pseudo_cov_hat||_F / ||Phi||_F`.
    pub pseudo_cov_ratio: f64,
}

/// Monte-Carlo check that `n1` is circularly-symmetric with covariance `Phi`.
/// Both statistics fall back to absolute norms when `Phi = 0`.
pub fn verify_cscg(model: &EffectiveModel, n_samples: usize, seed: u64) -> Result<CscgReport> {
    if n_samples < 10_000 {
        return Err(Error::InvalidParameter(format!(
            "need at least 10^4 samples, got {n_samples}"
        )));
    }
    let n_s = model.n_s();
    let mut rng = seeded(seed);
    let mut cov = CMatrix::zeros(n_s, n_s);
    let mut pseudo = CMatrix::zeros(n_s, n_s);
    let mut start = 0;
    while start < n_samples {
        let len = BLOCK.min(n_samples - start);
        let n1 = noise_block(model, len, &mut rng);
        cov += &n1 * n1.adjoint();
        pseudo += &n1 * n1.transpose();
        start += len;
    }
    let inv_n = 1.0 / n_samples as f64;
    cov.scale_mut(inv_n);
    pseudo.scale_mut(inv_n);
    let phi_norm = linalg::frobenius(&model.phi);
    let denom = if phi_norm > 0.0 { phi_norm } else { 1.0 };
    Ok(CscgReport {
        cov_err: linalg::frobenius(&(cov - &model.phi)) / denom,
        pseudo_cov_ratio: linalg::frobenius(&pseudo) / denom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{boost_dominant, generate_channel, truncated_svd, ChannelParams};
    use crate::quantizer::{build_aqnm, BitAllocation};

    fn scalar_front_end(sigma: f64) -> (ReceiverFrontEnd, ChannelRealization) {
        let mut h = CMatrix::zeros(1, 1);
        h[(0, 0)] = C64::new(sigma, 0.0);
        let ch = ChannelRealization::from_matrix(h).unwrap();
        let svd = truncated_svd(&ch, 1).unwrap();
        let comb = build_combiners(&svd, CombinerMode::Ideal).unwrap();
        (ReceiverFrontEnd::new(svd, comb, &ch).unwrap(), ch)
    }

    fn random_front_end(seed: u64, n_s: usize) -> (ReceiverFrontEnd, ChannelRealization) {
        let ch = generate_channel(&ChannelParams {
            seed,
            ..Default::default()
        })
        .unwrap();
        let ch = boost_dominant(&ch, 3.0).unwrap();
        let svd = truncated_svd(&ch, n_s).unwrap();
        let comb = build_combiners(&svd, CombinerMode::Ideal).unwrap();
        (ReceiverFrontEnd::new(svd, comb, &ch).unwrap(), ch)
    }

    #[test]
    fn ideal_combiner_reproduces_u_h() {
        let (fe, _) = random_front_end(1, 8);
        let c = &fe.combiners;
        assert_eq!(linalg::max_abs_diff(&(&c.w_d_h * &c.w_a_h), &fe.svd.u.adjoint()), 0.0);
        assert_eq!(c.residual, 0.0);
    }

    #[test]
    fn constrained_combiner_exact_for_unimodular_u() {
        let n_r = 16;
        let u = CMatrix::from_element(n_r, 1, C64::new(1.0 / (n_r as f64).sqrt(), 0.0));
        let svd = SvdTriple {
            u: u.clone(),
            sigma: DVector::from_vec(vec![1.0]),
            f_opt: CMatrix::identity(1, 1),
        };
        let c = build_combiners(&svd, CombinerMode::PhaseConstrained).unwrap();
        assert!(linalg::max_abs_diff(&c.w_a_h.adjoint(), &u) < 1e-15);
        assert!(c.residual < 1e-14, "{}", c.residual);
    }

    #[test]
    fn constrained_combiner_has_unit_modulus_entries() {
        let (fe, _) = random_front_end(2, 8);
        let c = build_combiners(&fe.svd, CombinerMode::PhaseConstrained).unwrap();
        let amp = 1.0 / 8.0;
        assert!(c.w_a_h.iter().all(|z| (z.norm() - amp).abs() < 1e-14));
    }

    #[test]
    fn ideal_path_gains_are_one_plus_sigma_squared() {
        let (fe, _) = random_front_end(3, 8);
        for i in 0..8 {
            let expect = 1.0 + fe.svd.sigma[i].powi(2);
            assert!((fe.path_gains()[i] / expect - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_distortion_model() {
        let (fe, _) = random_front_end(4, 4);
        let sig = SignalConfig::new(1.0, 0.3, PowerConvention::PerStream).unwrap();
        let m = fe
            .model_for(&Quantization::Unquantized, &QuantGainTable::default(), &sig)
            .unwrap();
        let sigma = linalg::diag(&fe.svd.sigma);
        let scale = fe.svd.sigma[0];
        assert!(linalg::max_abs_diff(&m.k, &sigma) < 1e-10 * scale);
        assert!(linalg::max_abs_diff(&m.phi, &CMatrix::identity(4, 4).scale(0.3)) < 1e-12);
    }

    #[test]
    fn scalar_phi_hand_value() {
        let (fe, ch) = scalar_front_end(2.0);
        let sig = SignalConfig::new(1.0, 1.0, PowerConvention::PerStream).unwrap();
        let aqnm = build_aqnm(
            &QuantGainTable::default(),
            &BitAllocation::new(vec![1]).unwrap(),
            fe.path_gains().as_slice(),
        )
        .unwrap();
        let m = effective_model(&fe.svd, &fe.combiners, &aqnm, &sig, &ch).unwrap();
        assert!((m.l[0] - 5.0).abs() < 1e-14);
        let w = 1.0f64 - 0.3634;
        let expected = w * w + 0.3634 * w * 5.0;
        assert!((m.phi[(0, 0)].re - expected).abs() < 1e-12);
        assert!((m.phi[(0, 0)].re - 1.56195).abs() < 1e-4);
    }

    #[test]
    fn ideal_phi_is_diagonal_closed_form() {
        let (fe, _) = random_front_end(5, 8);
        let sig = SignalConfig::new(1.0, 0.5, PowerConvention::SplitTotal).unwrap();
        let b = BitAllocation::new(vec![1, 2, 3, 4, 1, 2, 3, 4]).unwrap();
        let m = fe
            .model_for(&Quantization::Bits(b.clone()), &QuantGainTable::default(), &sig)
            .unwrap();
        let scale = linalg::frobenius(&m.phi);
        assert!(linalg::max_off_diagonal(&m.phi) <= 1e-12 * scale);
        let f = b.distortions(&QuantGainTable::default()).unwrap();
        for (i, fi) in f.iter().enumerate() {
            let expect = 0.5 * (1.0 - fi).powi(2) + fi * (1.0 - fi) * m.l[i];
            assert!((m.phi[(i, i)].re / expect - 1.0).abs() < 1e-12);
        }
        assert!((m.p - 1.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_reported() {
        let (fe, ch) = random_front_end(6, 4);
        let sig = SignalConfig::new(1.0, 1.0, PowerConvention::PerStream).unwrap();
        let aqnm = AqnmMatrices::from_distortions(&[0.1, 0.1], &[2.0, 2.0]).unwrap();
        assert!(matches!(fe.model(&aqnm, &sig), Err(Error::DimensionMismatch(_))));
        let (other, _) = scalar_front_end(1.0);
        assert!(ReceiverFrontEnd::new(other.svd, other.combiners, &ch).is_err());
    }

    #[test]
    fn noiseless_unquantized_samples_are_kx() {
        let (fe, _) = random_front_end(7, 4);
        let sig = SignalConfig::noiseless(1.0, PowerConvention::PerStream);
        let m = fe
            .model_for(&Quantization::Unquantized, &QuantGainTable::default(), &sig)
            .unwrap();
        let s = simulate_received(&m, 100, 1).unwrap();
        assert_eq!(linalg::max_abs_diff(&s.y, &(&m.k * &s.x)), 0.0);
        let r = verify_cscg(&m, 10_000, 2).unwrap();
        assert_eq!((r.cov_err, r.pseudo_cov_ratio), (0.0, 0.0));
    }

    #[test]
    fn simulation_is_deterministic() {
        let (fe, _) = random_front_end(8, 4);
        let sig = SignalConfig::new(1.0, 0.1, PowerConvention::PerStream).unwrap();
        let m = fe
            .model_for(
                &Quantization::Bits(BitAllocation::uniform(4, 2).unwrap()),
                &QuantGainTable::default(),
                &sig,
            )
            .unwrap();
        let a = simulate_received(&m, 5000, 99).unwrap();
        let b = simulate_received(&m, 5000, 99).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.x, b.x);
        assert!(simulate_received(&m, 0, 1).is_err());
        assert!(verify_cscg(&m, 100, 1).is_err());
    }
}
