//! Small complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::{CMatrix, Error, Result, C64};

/// Lifts a real vector onto the diagonal of a complex matrix.
pub fn diag(values: &DVector<f64>) -> CMatrix {
    CMatrix::from_diagonal(&values.map(|v| C64::new(v, 0.0)))
}

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Cholesky factorization of the Hermitian part of `a`. Complex square roots
/// never fail, so the pivots are checked to be real and positive.
pub fn cholesky(a: &CMatrix, what: &'static str) -> Result<Cholesky<C64, Dyn>> {
    let chol = Cholesky::new(hermitian_part(a)).ok_or(Error::Singular(what))?;
    let l = chol.l_dirty();
    let ok = (0..l.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-12 * d.re
    });
    if ok {
        Ok(chol)
    } else {
        Err(Error::Singular(what))
    }
}

/// Natural log-determinant of a Hermitian positive-definite matrix.
pub fn ln_det_hpd(a: &CMatrix, what: &'static str) -> Result<f64> {
    let chol = cholesky(a, what)?;
    let l = chol.l_dirty();
    Ok(2.0 * (0..l.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>())
}

/// Inverse of a Hermitian positive-definite matrix, re-symmetrised.
pub fn inverse_hpd(a: &CMatrix, what: &'static str) -> Result<CMatrix> {
    let inv = cholesky(a, what)?.inverse();
    Ok(hermitian_part(&inv))
}

/// Singular values of a general complex matrix, descending.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub fn real_diag(a: &CMatrix) -> DVector<f64> {
    DVector::from_iterator(
        a.nrows().min(a.ncols()),
        (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)].re),
    )
}

/// Largest off-diagonal modulus.
pub fn max_off_diagonal(a: &CMatrix) -> f64 {
    let mut m = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if i != j {
                m = m.max(a[(i, j)].norm());
            }
        }
    }
    m
}

pub fn to_complex(a: &DMatrix<f64>) -> CMatrix {
    a.map(|v| C64::new(v, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_det_of_diagonal() {
        let a = diag(&DVector::from_vec(vec![2.0, 3.0, 0.5]));
        assert!((ln_det_hpd(&a, "a").unwrap() - 3.0f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn log_det_matches_lu_on_hermitian() {
        let b = CMatrix::from_fn(3, 3, |i, j| {
            C64::new((i + 2 * j) as f64 * 0.3, (i as f64 - j as f64) * 0.7)
        });
        let a = &b * b.adjoint() + CMatrix::identity(3, 3);
        let via_lu = a.clone().determinant().re.ln();
        assert!((ln_det_hpd(&a, "a").unwrap() - via_lu).abs() < 1e-10);
    }

    #[test]
    fn indefinite_is_rejected() {
        let a = diag(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(matches!(ln_det_hpd(&a, "a"), Err(Error::Singular("a"))));
    }
}
