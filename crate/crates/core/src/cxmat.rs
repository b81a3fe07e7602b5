//! Dense complex matrix helpers built on `nalgebra`.
//!
//! Everything here operates on small Hermitian matrices (a few antennas per
//! side), so the routines favour clarity over blocking or in-place tricks.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative tolerance of the Hermitian symmetry check.
pub const HERMITIAN_TOL: f64 = 1e-8;

/// Eigenvalues at or above `1 - SPECTRUM_SLACK` are accepted by [`inv_sqrt_psd`].
const SPECTRUM_SLACK: f64 = 1e-6;

/// Hermitian eigendecomposition with eigenvalues in ascending order.
#[derive(Debug, Clone)]
pub struct HermEig {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: CMatrix,
}

impl HermEig {
    /// Rebuilds `U diag(f(λ)) Uᴴ`.
    pub fn rebuild_with(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let s = f(lam);
            scaled.column_mut(j).scale_mut(s);
        }
        hermitian_part(&(scaled * u.adjoint()))
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.rebuild_with(|l| l)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn ensure_square(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

fn ensure_finite(m: &CMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn ensure_hermitian(m: &CMatrix) -> Result<()> {
    let n = m.nrows();
    let norm = frobenius(m);
    let mut asym_sq = 0.0;
    for j in 0..n {
        for i in 0..n {
            asym_sq += (m[(i, j)] - m[(j, i)].conj()).norm_sqr();
        }
    }
    let asym = asym_sq.sqrt();
    if asym > HERMITIAN_TOL * norm {
        let asymmetry = if norm > 0.0 { asym / norm } else { f64::INFINITY };
        return Err(Error::NonHermitian { asymmetry });
    }
    Ok(())
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn herm_eig(m: &CMatrix) -> Result<HermEig> {
    ensure_square(m)?;
    ensure_finite(m)?;
    ensure_hermitian(m)?;
    let eig = SymmetricEigen::new(hermitian_part(m));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermEig {
        eigenvalues,
        eigenvectors,
    })
}

/// `M^{-1/2}` for a Hermitian matrix whose spectrum is bounded below by one.
///
/// Every interference-plus-noise matrix here has the form `I + PSD`, so a
/// smaller eigenvalue is reported as an error instead of being floored.
pub fn inv_sqrt_psd(m: &CMatrix) -> Result<CMatrix> {
    let eig = herm_eig(m)?;
    let min = eig.min_eigenvalue();
    if min < 1.0 - SPECTRUM_SLACK {
        return Err(Error::SpectrumBelowOne {
            min_eigenvalue: min,
        });
    }
    Ok(eig.rebuild_with(|l| 1.0 / l.sqrt()))
}

/// Natural-log determinant of a Hermitian positive-definite matrix.
pub fn logdet_psd(m: &CMatrix) -> Result<f64> {
    ensure_square(m)?;
    ensure_finite(m)?;
    ensure_hermitian(m)?;
    let chol = Cholesky::new(hermitian_part(m)).ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..l.nrows() {
        // complex square roots of negative pivots come back (nearly) imaginary
        let d = l[(i, i)];
        if !(d.re > 0.0) || d.im.abs() > 1e-8 * d.re {
            return Err(Error::NotPositiveDefinite);
        }
        acc += d.re.ln();
    }
    Ok(2.0 * acc)
}

/// Inverse of a Hermitian positive-definite matrix.
pub fn inv_hpd(m: &CMatrix) -> Result<CMatrix> {
    ensure_square(m)?;
    ensure_finite(m)?;
    let chol = Cholesky::new(hermitian_part(m)).ok_or(Error::NotPositiveDefinite)?;
    Ok(hermitian_part(&chol.inverse()))
}

/// Main diagonal as a column vector.
pub fn vecd(m: &CMatrix) -> Result<CVector> {
    ensure_square(m)?;
    Ok(m.diagonal())
}

/// `(M + Mᴴ) / 2`.
pub fn hermitianize(m: &CMatrix) -> Result<CMatrix> {
    ensure_square(m)?;
    Ok(hermitian_part(m))
}
