//! Dense kernels: squared distances, inner-product tables and PCA.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vecio::VectorDataset;

#[inline]
pub(crate) fn dist2<T: Scalar, U: Scalar>(a: &[T], b: &[U]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let t = x.to_acc() - y.to_acc();
            t * t
        })
        .sum()
}

#[inline]
pub(crate) fn dot<T: Scalar, U: Scalar>(a: &[T], b: &[U]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.to_acc() * y.to_acc()).sum()
}

#[inline]
pub(crate) fn norm2<T: Scalar>(a: &[T]) -> f64 {
    a.iter().map(|x| x.to_acc() * x.to_acc()).sum()
}

/// Squared Euclidean distance, accumulated in `f64`.
pub fn sq_l2<T: Scalar>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::arg(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(dist2(a, b))
}

/// Row-major `f64` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// `gram[i][j] = <a_i, b_j>`.
pub fn gram<T: Scalar>(a: &VectorDataset<T>, b: &VectorDataset<T>) -> Result<DenseMatrix> {
    if !a.is_empty() && !b.is_empty() && a.dim() != b.dim() {
        return Err(Error::arg(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let cols = b.len();
    let mut data = vec![0.0; a.len() * cols];
    if cols > 0 {
        data.par_chunks_mut(cols).enumerate().for_each(|(i, out)| {
            let ai = a.row(i);
            for (j, o) in out.iter_mut().enumerate() {
                *o = dot(ai, b.row(j));
            }
        });
    }
    Ok(DenseMatrix {
        rows: a.len(),
        cols,
        data,
    })
}

/// Orthonormal basis `r_1 … r_d` ordered by descending explained variance.
/// The mean is not part of the rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    d: usize,
    /// Row `i` is `r_i`.
    rows: Vec<f64>,
    variances: Vec<f64>,
}

impl Rotation {
    pub fn identity(d: usize) -> Self {
        let mut rows = vec![0.0; d * d];
        for i in 0..d {
            rows[i * d + i] = 1.0;
        }
        Self {
            d,
            rows,
            variances: vec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.rows[i * self.d..(i + 1) * self.d]
    }

    pub fn explained_variances(&self) -> &[f64] {
        &self.variances
    }

    /// `out[j] = <r_j, x - offset>` for `j < out.len()`.
    pub fn project_into<T: Scalar>(&self, x: &[T], offset: Option<&[f64]>, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let r = self.component(j);
            *o = match offset {
                Some(mu) => x
                    .iter()
                    .zip(mu)
                    .zip(r)
                    .map(|((xv, m), rv)| (xv.to_acc() - m) * rv)
                    .sum(),
                None => dot(x, r),
            };
        }
    }

    /// `Rᵀ z` with `z` zero-padded to full dimension.
    pub fn back_project_into(&self, z: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, &zj) in z.iter().enumerate() {
            if zj == 0.0 {
                continue;
            }
            for (o, r) in out.iter_mut().zip(self.component(j)) {
                *o += zj * r;
            }
        }
    }
}

/// PCA of the mean-centred covariance of `dataset`.
pub fn pca<T: Scalar>(dataset: &VectorDataset<T>) -> Result<Rotation> {
    let n = dataset.len();
    let d = dataset.dim();
    if n < 2 {
        return Err(Error::arg(format!("PCA needs at least 2 vectors, got {n}")));
    }
    if dataset.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("PCA input contains non-finite values"));
    }
    let mean = dataset.column_mean();
    let cov = covariance(dataset, &mean);
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("covariance overflowed".into()));
    }
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, &cov));

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let mut rows = Vec::with_capacity(d * d);
    let mut variances = Vec::with_capacity(d);
    for &idx in &order {
        let col = eig.eigenvectors.column(idx);
        let norm = col.norm();
        // Fix the sign so the largest-magnitude entry is positive.
        let pivot = (0..d)
            .max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs()).then(b.cmp(&a)))
            .unwrap_or(0);
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        rows.extend(col.iter().map(|v| sign * v / norm));
        variances.push(eig.eigenvalues[idx].max(0.0));
    }
    Ok(Rotation { d, rows, variances })
}

fn covariance<T: Scalar>(dataset: &VectorDataset<T>, mean: &[f64]) -> Vec<f64> {
    const CHUNK: usize = 4096;
    let d = dataset.dim();
    let n = dataset.len();
    let partials: Vec<Vec<f64>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; d * d];
            let mut centred = vec![0.0; d];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                for ((z, x), m) in centred.iter_mut().zip(dataset.row(i)).zip(mean) {
                    *z = x.to_acc() - m;
                }
                for a in 0..d {
                    let za = centred[a];
                    let row = &mut acc[a * d..a * d + d];
                    for b in a..d {
                        row[b] += za * centred[b];
                    }
                }
            }
            acc
        })
        .collect();
    let mut cov = vec![0.0; d * d];
    for p in partials {
        cov.iter_mut().zip(&p).for_each(|(c, v)| *c += v);
    }
    let denom = (n - 1) as f64;
    for a in 0..d {
        for b in a..d {
            let v = cov[a * d + b] / denom;
            cov[a * d + b] = v;
            cov[b * d + a] = v;
        }
    }
    cov
}

/// Projects every vector onto the first `n_dims` components, without centring.
pub fn project<T: Scalar>(
    rotation: &Rotation,
    n_dims: usize,
    vectors: &VectorDataset<T>,
) -> Result<VectorDataset<T>> {
    project_with_offset(rotation, n_dims, vectors, None)
}

/// Like [`project`], subtracting `offset` from each vector first.
pub fn project_with_offset<T: Scalar>(
    rotation: &Rotation,
    n_dims: usize,
    vectors: &VectorDataset<T>,
    offset: Option<&[f64]>,
) -> Result<VectorDataset<T>> {
    if n_dims == 0 || n_dims > rotation.d {
        return Err(Error::arg(format!(
            "n_dims {n_dims} outside 1..={}",
            rotation.d
        )));
    }
    if !vectors.is_empty() && vectors.dim() != rotation.d {
        return Err(Error::arg(format!(
            "vectors have dimension {}, rotation {}",
            vectors.dim(),
            rotation.d
        )));
    }
    let mut out = vec![T::zero(); vectors.len() * n_dims];
    out.par_chunks_mut(n_dims).enumerate().for_each_init(
        || vec![0.0; n_dims],
        |buf, (i, o)| {
            rotation.project_into(vectors.row(i), offset, buf);
            for (dst, v) in o.iter_mut().zip(buf.iter()) {
                *dst = T::from_acc(*v);
            }
        },
    );
    VectorDataset::new(n_dims, out)
}
