//! Synthetic narrowband mmWave channels.
//!
//! Channels follow a clustered geometric (Saleh-Valenzuela style) model with
//! half-wavelength uniform linear arrays at both ends:
//!
//! ```text
//! H = sqrt(n_t n_r / (C L)) * sum_{c,l} alpha_{c,l} a_r(theta_{c,l}) a_t(phi_{c,l})^H
//! ```
//!
//! with `alpha ~ CN(0, 1)` and angles uniform on `[0, 2 pi)`. Steering vectors
//! are unit-norm, `a(theta)_k = exp(j pi k sin theta) / sqrt(N)`.
//!
//! Per path the generator draws, in order: `Re(alpha)`, `Im(alpha)`, the
//! arrival angle, then the departure angle.

use nalgebra::{DVector, SVD};
use rand::Rng;
use std::f64::consts::{PI, TAU};

use crate::rng::{complex_normal, seeded};
use crate::{linalg, CMatrix, Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub n_t: usize,
    pub n_r: usize,
    pub n_clusters: usize,
    pub n_rays: usize,
    /// Multiplier applied to the dominant singular value by [`boost_dominant`].
    pub boost: f64,
    pub seed: u64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            n_t: 32,
            n_r: 64,
            n_clusters: 4,
            n_rays: 10,
            boost: 3.0,
            seed: 0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_t == 0 || self.n_r == 0 {
            return Err(Error::InvalidParameter("antenna counts must be positive".into()));
        }
        if self.n_clusters == 0 || self.n_rays == 0 {
            return Err(Error::InvalidParameter("n_clusters * n_rays must be positive".into()));
        }
        check_boost(self.boost)
    }

    pub fn n_paths(&self) -> usize {
        self.n_clusters * self.n_rays
    }
}

fn check_boost(boost: f64) -> Result<()> {
    if !(boost.is_finite() && boost >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "boost must be finite and >= 1, got {boost}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub h: CMatrix,
    pub params: ChannelParams,
}

impl ChannelRealization {
    /// Wraps an explicit matrix, e.g. a measured channel or a test fixture.
    pub fn from_matrix(h: CMatrix) -> Result<Self> {
        if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("channel entries"));
        }
        if linalg::frobenius(&h) == 0.0 {
            return Err(Error::InvalidParameter("channel matrix is zero".into()));
        }
        let params = ChannelParams {
            n_t: h.ncols(),
            n_r: h.nrows(),
            boost: 1.0,
            ..Default::default()
        };
        Ok(Self { h, params })
    }
}

/// Unit-norm ULA response at half-wavelength spacing.
pub fn steering_vector(n: usize, angle: f64) -> DVector<C64> {
    let scale = 1.0 / (n as f64).sqrt();
    let phase = PI * angle.sin();
    DVector::from_fn(n, |k, _| C64::from_polar(scale, phase * k as f64))
}

pub fn generate_channel(params: &ChannelParams) -> Result<ChannelRealization> {
    params.validate()?;
    let mut rng = seeded(params.seed);
    let mut h = CMatrix::zeros(params.n_r, params.n_t);
    for _ in 0..params.n_paths() {
        let alpha = complex_normal(&mut rng);
        let theta: f64 = rng.random_range(0.0..TAU);
        let phi: f64 = rng.random_range(0.0..TAU);
        let a_r = steering_vector(params.n_r, theta);
        let a_t = steering_vector(params.n_t, phi);
        h.ger(alpha, &a_r, &a_t.conjugate(), C64::new(1.0, 0.0));
    }
    let norm = ((params.n_t * params.n_r) as f64 / params.n_paths() as f64).sqrt();
    h.scale_mut(norm);
    Ok(ChannelRealization {
        h,
        params: params.clone(),
    })
}

/// Full thin SVD with singular values sorted in descending order.
fn sorted_svd(h: &CMatrix) -> (CMatrix, Vec<f64>, CMatrix) {
    let svd = SVD::new(h.clone(), true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^H");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = CMatrix::from_columns(&order.iter().map(|&i| u.column(i)).collect::<Vec<_>>());
    let v = v_t.adjoint();
    let v = CMatrix::from_columns(&order.iter().map(|&i| v.column(i)).collect::<Vec<_>>());
    (u, sigma, v)
}

/// Scales the largest singular value of `H` by `boost`, keeping every other
/// singular value and all singular vectors.
pub fn boost_dominant(channel: &ChannelRealization, boost: f64) -> Result<ChannelRealization> {
    check_boost(boost)?;
    let (u, mut sigma, v) = sorted_svd(&channel.h);
    sigma[0] *= boost;
    let s = linalg::diag(&DVector::from_vec(sigma));
    let h = &u * s * v.adjoint();
    let mut params = channel.params.clone();
    params.boost = boost;
    Ok(ChannelRealization { h, params })
}

/// Top-`n_s` singular triplets `H ~ U diag(sigma) F_opt^H`.
#[derive(Debug, Clone)]
pub struct SvdTriple {
    /// `n_r x n_s` left singular vectors.
    pub u: CMatrix,
    /// Descending, strictly positive.
    pub sigma: DVector<f64>,
    /// `n_t x n_s` right singular vectors; the optimal fully-digital precoder.
    pub f_opt: CMatrix,
}

impl SvdTriple {
    pub fn n_s(&self) -> usize {
        self.sigma.len()
    }

    /// `U diag(sigma) F_opt^H`.
    pub fn reconstruct(&self) -> CMatrix {
        &self.u * linalg::diag(&self.sigma) * self.f_opt.adjoint()
    }
}

pub fn truncated_svd(channel: &ChannelRealization, n_s: usize) -> Result<SvdTriple> {
    let h = &channel.h;
    let max_rank = h.nrows().min(h.ncols());
    if n_s == 0 || n_s > max_rank {
        return Err(Error::InvalidParameter(format!(
            "n_s = {n_s} must lie in 1..={max_rank}"
        )));
    }
    let (u, sigma, v) = sorted_svd(h);
    let tol = sigma[0] * f64::EPSILON * h.nrows().max(h.ncols()) as f64;
    if let Some(index) = (0..n_s).find(|&i| sigma[i] <= tol) {
        return Err(Error::RankDeficient {
            index,
            value: sigma[index],
        });
    }
    Ok(SvdTriple {
        u: u.columns(0, n_s).into_owned(),
        sigma: DVector::from_iterator(n_s, sigma.into_iter().take(n_s)),
        f_opt: v.columns(0, n_s).into_owned(),
    })
}
