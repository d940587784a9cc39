//! Small dense helpers shared by the estimators.

use std::f64::consts::PI;

use faer::{c64, Mat, Side};

use crate::{Error, Result};

#[inline]
pub(crate) fn cis(phase: f64) -> c64 {
    let (s, c) = phase.sin_cos();
    c64::new(c, s)
}

/// `exp(j 2 pi x)`.
#[inline]
pub(crate) fn tone(x: f64) -> c64 {
    cis(2.0 * PI * x)
}

pub(crate) fn kron(a: &[c64], b: &[c64]) -> Vec<c64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        out.extend(b.iter().map(|&y| x * y));
    }
    out
}

/// `a^H b`.
pub(crate) fn inner(a: &[c64], b: &[c64]) -> c64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm_sqr(a: &[c64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// `u v^H`.
#[cfg(test)]
pub(crate) fn outer(u: &[c64], v: &[c64]) -> Mat<c64> {
    Mat::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
}

/// Column-stacked copy of `m`.
pub(crate) fn vec_of(m: &Mat<c64>) -> Vec<c64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for j in 0..m.ncols() {
        out.extend_from_slice(m.col_as_slice(j));
    }
    out
}

pub(crate) fn unvec(v: &[c64], nrows: usize, ncols: usize) -> Mat<c64> {
    assert_eq!(v.len(), nrows * ncols);
    Mat::from_fn(nrows, ncols, |i, j| v[i + j * nrows])
}

pub(crate) fn mat_from_cols(nrows: usize, cols: &[Vec<c64>]) -> Mat<c64> {
    Mat::from_fn(nrows, cols.len(), |i, j| cols[j][i])
}

pub(crate) fn hermitian_part(x: &Mat<c64>) -> Mat<c64> {
    let xh = x.adjoint().to_owned();
    (x + &xh) * faer::Scale(c64::new(0.5, 0.0))
}

pub(crate) fn frob_dist(a: &Mat<c64>, b: &Mat<c64>) -> f64 {
    debug_assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for (x, y) in a.col_as_slice(j).iter().zip(b.col_as_slice(j)) {
            acc += (x - y).norm_sqr();
        }
    }
    acc.sqrt()
}

/// Eigendecomposition of a Hermitian matrix (lower triangle read), eigenvalues ascending.
pub(crate) fn eigh(x: &Mat<c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let evd = x
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("hermitian eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let vals = (0..x.nrows()).map(|i| s[i].re).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Moore-Penrose pseudo-inverse; singular values at or below
/// `rcond * s_max` are treated as zero. `rcond = 0` uses a machine-precision cutoff.
pub(crate) fn pinv(a: &Mat<c64>, rcond: f64) -> Result<Mat<c64>> {
    let (m, n) = (a.nrows(), a.ncols());
    if m == 0 || n == 0 {
        return Ok(Mat::zeros(n, m));
    }
    let svd = a
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("svd failed: {e:?}")))?;
    let s = svd.S().column_vector();
    let k = s.nrows();
    let smax = (0..k).map(|i| s[i].re).fold(0.0, f64::max);
    let cutoff = smax * rcond.max(m.max(n) as f64 * f64::EPSILON);
    let u = svd.U();
    let v = svd.V();
    let mut out = Mat::<c64>::zeros(n, m);
    for idx in 0..k {
        let sv = s[idx].re;
        if sv <= cutoff {
            continue;
        }
        let inv = 1.0 / sv;
        for j in 0..m {
            let uj = u[(j, idx)].conj() * inv;
            for i in 0..n {
                out[(i, j)] += v[(i, idx)] * uj;
            }
        }
    }
    Ok(out)
}

pub(crate) fn mat_vec(a: &Mat<c64>, x: &[c64]) -> Vec<c64> {
    assert_eq!(a.ncols(), x.len());
    let mut out = vec![c64::new(0.0, 0.0); a.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == c64::new(0.0, 0.0) {
            continue;
        }
        for (o, &aij) in out.iter_mut().zip(a.col_as_slice(j)) {
            *o += aij * xj;
        }
    }
    out
}

/// `a^H x`.
pub(crate) fn mat_adj_vec(a: &Mat<c64>, x: &[c64]) -> Vec<c64> {
    assert_eq!(a.nrows(), x.len());
    (0..a.ncols()).map(|j| inner(a.col_as_slice(j), x)).collect()
}
