//! Centered PCA for shrinking feature dimensionality before lifting.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Mean and leading principal directions (`d x target`).
#[derive(Debug, Clone, PartialEq)]
pub struct PcaTransform {
    pub mean: DVector<f64>,
    pub components: DMatrix<f64>,
}

impl PcaTransform {
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::dims("pca input dimension", self.mean.len(), x.len()));
        }
        Ok(self.components.transpose() * (x - &self.mean))
    }

    pub fn reconstruct(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        if y.len() != self.components.ncols() {
            return Err(Error::dims("pca code dimension", self.components.ncols(), y.len()));
        }
        Ok(&self.components * y + &self.mean)
    }
}

/// Projects the columns of `data` (`d x n`) onto their top `target_dim`
/// principal directions. Returns the `target_dim x n` scores and the
/// transform.
pub fn pca_reduce(data: &DMatrix<f64>, target_dim: usize) -> Result<(DMatrix<f64>, PcaTransform)> {
    let (d, n) = data.shape();
    if n == 0 || d == 0 {
        return Err(Error::EmptyInput("pca data"));
    }
    if target_dim == 0 || target_dim > d {
        return Err(Error::InvalidParameter(format!(
            "target dimension {target_dim} must be between 1 and {d}"
        )));
    }
    let mean = data.column_mean();
    let mut centered = data.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let svd = linalg::svd(&centered)?;
    let u = svd.u.expect("left vectors requested");
    // A thin decomposition of a wide matrix has fewer than d left vectors;
    // pad with an orthonormal complement so any target up to d is valid.
    let components = if u.ncols() >= target_dim {
        u.columns(0, target_dim).into_owned()
    } else {
        complete_basis(&u, target_dim)
    };
    let scores = components.transpose() * &centered;
    Ok((scores, PcaTransform { mean, components }))
}

fn complete_basis(u: &DMatrix<f64>, target: usize) -> DMatrix<f64> {
    let d = u.nrows();
    let mut cols: Vec<DVector<f64>> = u.column_iter().map(|c| c.into_owned()).collect();
    for e in 0..d {
        if cols.len() == target {
            break;
        }
        let mut v = DVector::from_fn(d, |i, _| f64::from(u8::from(i == e)));
        for _ in 0..2 {
            for c in &cols {
                let dot = c.dot(&v);
                v.axpy(-dot, c, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            cols.push(v / norm);
        }
    }
    DMatrix::from_columns(&cols)
}
