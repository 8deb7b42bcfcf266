//! Small dense linear-algebra helpers shared by the coding schemes.
//!
//! Everything here is column-major, matching the `vec(·)` convention used for
//! projectors and lifted queries.

use nalgebra::{DMatrix, DVector, SVD};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const SVD_MAX_ITERS: usize = 10_000;

/// Sign with `sgn(0) = +1`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn sign_matrix(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(sign)
}

/// Column-major vectorization.
pub fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_of`] for a `rows x cols` target.
pub fn unvec(v: &DVector<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(rows, cols, v.as_slice())
}

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    // Filled column by column so the draw order is the storage order.
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_vec(rows, cols, data)
}

/// Random `d x c` matrix with orthonormal columns (QR of a Gaussian draw,
/// signs fixed so that `R` has a non-negative diagonal).
pub fn random_orthonormal<R: Rng + ?Sized>(rng: &mut R, d: usize, c: usize) -> DMatrix<f64> {
    assert!(c <= d, "cannot draw {c} orthonormal columns in dimension {d}");
    let g = gaussian(rng, d, c);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..c {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub fn svd(m: &DMatrix<f64>) -> Result<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("svd input"));
    }
    m.clone()
        .try_svd(true, true, f64::EPSILON, SVD_MAX_ITERS)
        .ok_or_else(|| {
            Error::Numerical(format!(
                "SVD of a {}x{} matrix did not converge",
                m.nrows(),
                m.ncols()
            ))
        })
}

/// Minimum-norm least-squares solution `X` of `design · X ≈ rhs` through the
/// pseudo-inverse. Singular values below `max(rows, cols) · eps · σ_max` are
/// treated as zero.
pub fn lstsq(design: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if design.nrows() != rhs.nrows() {
        return Err(Error::dims("lstsq rhs rows", design.nrows(), rhs.nrows()));
    }
    let dec = svd(design)?;
    let u = dec.u.as_ref().expect("u requested");
    let v_t = dec.v_t.as_ref().expect("v_t requested");
    let sv = &dec.singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let cutoff = smax * f64::EPSILON * design.nrows().max(design.ncols()) as f64;
    // X = V Σ⁺ Uᵀ rhs
    let mut projected = u.transpose() * rhs;
    for (i, mut row) in projected.row_iter_mut().enumerate() {
        let s = sv[i];
        if s > cutoff && s > 0.0 {
            row /= s;
        } else {
            row.fill(0.0);
        }
    }
    Ok(v_t.transpose() * projected)
}

/// Maximizer of `Tr(Pᵀ D)` over `d x c` matrices with orthonormal columns,
/// for `D` of shape `d x c`. With `D = Z Σ Yᵀ` the maximizer is `Z Yᵀ`.
pub fn polar_maximizer(d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    assert!(d.ncols() <= d.nrows(), "polar_maximizer expects a tall matrix");
    let dec = svd(d)?;
    let z = dec.u.expect("u requested");
    let y_t = dec.v_t.expect("v_t requested");
    Ok(z * y_t)
}

/// Frobenius norm of `MᵀM − I`.
pub fn orthonormality_residual(m: &DMatrix<f64>) -> f64 {
    let gram = m.transpose() * m;
    (gram - DMatrix::identity(m.ncols(), m.ncols())).norm()
}

pub fn ensure_finite(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
