//! One- and two-level Toeplitz operators and the PSD cone projection.
//!
//! A two-level generator `G` of dims `(a, b)` holds entries `G(i, k)` for
//! `|i| < a`, `|k| < b`. The matrix `toeplitz2(G)` is `a x a` block Toeplitz
//! with `b x b` Toeplitz blocks: block `(p, q)` is `toeplitz1(G(q - p, .))`.
//! The outer level matches the first Kronecker factor of a UPA response.

use faer::{c64, Mat};

use crate::array::{upa_response, FrequencyPair, UpaGeometry};
use crate::linalg::{eigh, hermitian_part, tone};
use crate::{Error, Result};

/// Generator of an `(a b) x (a b)` two-level Toeplitz matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzGenerator2 {
    a: usize,
    b: usize,
    // row-major over i in -a+1..a, then k in -b+1..b
    data: Vec<c64>,
}

impl ToeplitzGenerator2 {
    pub fn zeros(a: usize, b: usize) -> Self {
        assert!(a > 0 && b > 0, "generator dims must be positive");
        Self { a, b, data: vec![c64::new(0.0, 0.0); (2 * a - 1) * (2 * b - 1)] }
    }

    /// Generator of the identity matrix.
    pub fn identity(a: usize, b: usize) -> Self {
        let mut g = Self::zeros(a, b);
        g.set(0, 0, c64::new(1.0, 0.0));
        g
    }

    pub fn from_fn(a: usize, b: usize, mut f: impl FnMut(isize, isize) -> c64) -> Self {
        let mut g = Self::zeros(a, b);
        for i in g.i_range() {
            for k in g.k_range() {
                g.set(i, k, f(i, k));
            }
        }
        g
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.a, self.b)
    }

    pub fn i_range(&self) -> std::ops::RangeInclusive<isize> {
        -(self.a as isize - 1)..=(self.a as isize - 1)
    }

    pub fn k_range(&self) -> std::ops::RangeInclusive<isize> {
        -(self.b as isize - 1)..=(self.b as isize - 1)
    }

    #[inline]
    fn index(&self, i: isize, k: isize) -> usize {
        let (a, b) = (self.a as isize, self.b as isize);
        debug_assert!(i.abs() < a && k.abs() < b, "generator index ({i}, {k}) out of range");
        ((i + a - 1) * (2 * b - 1) + (k + b - 1)) as usize
    }

    #[inline]
    pub fn get(&self, i: isize, k: isize) -> c64 {
        self.data[self.index(i, k)]
    }

    #[inline]
    pub fn set(&mut self, i: isize, k: isize, v: c64) {
        let idx = self.index(i, k);
        self.data[idx] = v;
    }

    /// Raw entries, row-major over `i` then `k`.
    pub fn data(&self) -> &[c64] {
        &self.data
    }

    pub fn from_data(a: usize, b: usize, data: Vec<c64>) -> Result<Self> {
        if a == 0 || b == 0 {
            return Err(Error::Domain("generator dims must be positive".into()));
        }
        let want = (2 * a - 1) * (2 * b - 1);
        if data.len() != want {
            return Err(Error::shape("generator data", want, data.len()));
        }
        Ok(Self { a, b, data })
    }

    /// `G(-i, -k) = conj(G(i, k))` within `tol`.
    pub fn is_hermitian_generating(&self, tol: f64) -> bool {
        self.i_range()
            .all(|i| self.k_range().all(|k| (self.get(-i, -k) - self.get(i, k).conj()).norm() <= tol))
    }
}

/// `n x n` Toeplitz matrix with entry `(r, c) = u(c - r)`; `u` lists offsets `-n+1..=n-1`.
pub fn toeplitz1(u: &[c64]) -> Result<Mat<c64>> {
    if u.len() % 2 == 0 {
        return Err(Error::Domain(format!("toeplitz generator must have odd length, got {}", u.len())));
    }
    let n = (u.len() + 1) / 2;
    Ok(Mat::from_fn(n, n, |r, c| u[c + n - 1 - r]))
}

pub fn toeplitz2(g: &ToeplitzGenerator2) -> Mat<c64> {
    let (a, b) = g.dims();
    Mat::from_fn(a * b, a * b, |row, col| {
        let (p, r) = (row / b, row % b);
        let (q, c) = (col / b, col % b);
        g.get(q as isize - p as isize, c as isize - r as isize)
    })
}

/// Diagonal averaging: entry `(i, k)` is the mean of `X` over all positions
/// with outer block offset `i` and inner diagonal offset `k`.
pub fn toeplitz2_adjoint(x: &Mat<c64>, a: usize, b: usize) -> Result<ToeplitzGenerator2> {
    if a == 0 || b == 0 {
        return Err(Error::Domain("generator dims must be positive".into()));
    }
    let n = a * b;
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::shape("toeplitz adjoint input", format!("{n}x{n}"), format!("{}x{}", x.nrows(), x.ncols())));
    }
    Ok(adjoint_with(a, b, |r, c| x[(r, c)]))
}

/// [`toeplitz2_adjoint`] of the implicit matrix with entries `entry(row, col)`.
pub(crate) fn adjoint_with(a: usize, b: usize, entry: impl Fn(usize, usize) -> c64) -> ToeplitzGenerator2 {
    let mut g = ToeplitzGenerator2::zeros(a, b);
    for q in 0..a {
        for c in 0..b {
            let col = q * b + c;
            for p in 0..a {
                let i = q as isize - p as isize;
                for r in 0..b {
                    let k = c as isize - r as isize;
                    let idx = g.index(i, k);
                    g.data[idx] += entry(p * b + r, col);
                }
            }
        }
    }
    for i in g.i_range() {
        for k in g.k_range() {
            let count = ((a - i.unsigned_abs()) * (b - k.unsigned_abs())) as f64;
            let idx = g.index(i, k);
            g.data[idx] /= count;
        }
    }
    g
}

/// Generator with `toeplitz2(G) = sum_l w_l v_l v_l^H`, `v_l` the unit-norm
/// `(a, b)` planar response at `freqs[l]`.
pub fn generator_from_paths(freqs: &[FrequencyPair], weights: &[f64], a: usize, b: usize) -> Result<ToeplitzGenerator2> {
    if freqs.len() != weights.len() {
        return Err(Error::shape("generator weights", freqs.len(), weights.len()));
    }
    if a == 0 || b == 0 {
        return Err(Error::Domain("generator dims must be positive".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(Error::Domain(format!("generator weights must be non-negative, got {w}")));
    }
    let scale = 1.0 / (a * b) as f64;
    Ok(ToeplitzGenerator2::from_fn(a, b, |i, k| {
        freqs
            .iter()
            .zip(weights)
            .map(|(p, &w)| tone(-(i as f64 * p.x1 + k as f64 * p.x2)) * (w * scale))
            .sum()
    }))
}

/// `Tr(toeplitz2(G)) = a b Re G(0, 0)`.
pub fn trace_of(g: &ToeplitzGenerator2) -> Result<f64> {
    let c = g.get(0, 0);
    if c.im.abs() > 1e-12 * c.re.abs().max(1.0) {
        return Err(Error::Domain(format!("central generator entry is not real: {c}")));
    }
    let (a, b) = g.dims();
    Ok((a * b) as f64 * c.re)
}

/// Frobenius-nearest PSD matrix to `(X + X^H) / 2`.
pub fn psd_project(x: &Mat<c64>) -> Result<Mat<c64>> {
    if x.nrows() != x.ncols() {
        return Err(Error::shape("psd projection input", "square", format!("{}x{}", x.nrows(), x.ncols())));
    }
    let (vals, u) = eigh(&hermitian_part(x))?;
    Ok(hermitian_part(&rebuild_positive(&vals, &u)))
}

/// `sum_{lambda_i > 0} lambda_i u_i u_i^H`, Hermitian up to round-off.
pub(crate) fn rebuild_positive(vals: &[f64], u: &Mat<c64>) -> Mat<c64> {
    let n = u.nrows();
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 0.0).collect();
    let mut scaled = Mat::<c64>::zeros(n, keep.len());
    let mut plain = Mat::<c64>::zeros(n, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        for r in 0..n {
            plain[(r, c)] = u[(r, i)];
            scaled[(r, c)] = u[(r, i)] * vals[i];
        }
    }
    &scaled * plain.adjoint()
}

/// Unit-norm response of a two-level generator's dims, for tests and callers
/// that want the `v` in `sum w v v^H`.
pub fn level_response(a: usize, b: usize, p: FrequencyPair) -> Result<Vec<c64>> {
    Ok(upa_response(UpaGeometry::new(a, b)?, p))
}
