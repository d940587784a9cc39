//! PSD cone projection for the ADMM iterations.
//!
//! Iterates of the structured SDP have only a handful of positive
//! eigenvalues, so for large blocks the positive part is found with a
//! warm-started block Krylov method and Rayleigh-Ritz extraction. Any failure
//! to certify the result falls back to a dense eigendecomposition.

use faer::{c64, Mat};

use crate::linalg::{eigh, hermitian_part};
use crate::toeplitz::rebuild_positive;
use crate::Result;

/// Below this order a dense eigendecomposition is cheaper than the Krylov path.
const DENSE_BELOW: usize = 96;
/// Give up on the Krylov path once the basis exceeds `n / KRYLOV_FRACTION`.
const KRYLOV_FRACTION: usize = 4;
/// Relative Ritz residual accepted for the positive pairs.
const RITZ_TOL: f64 = 1e-11;
/// Slack allowed when ruling out a positive eigenvalue behind the first non-positive Ritz value.
const STRADDLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default)]
pub(crate) struct PsdProjector {
    // eigenvectors of the positive part at the previous call
    warm: Option<Mat<c64>>,
    pub(crate) dense_calls: usize,
    pub(crate) krylov_calls: usize,
}

impl PsdProjector {
    /// Positive part of the Hermitian matrix `x` whose Frobenius norm is `norm`.
    pub(crate) fn project(&mut self, x: &Mat<c64>, norm: f64) -> Result<Mat<c64>> {
        if x.nrows() >= DENSE_BELOW {
            if let Some(out) = self.krylov(x, norm) {
                self.krylov_calls += 1;
                return Ok(out);
            }
        }
        self.dense_calls += 1;
        let (vals, u) = eigh(x)?;
        let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 0.0).collect();
        self.warm = Some(Mat::from_fn(u.nrows(), keep.len(), |r, c| u[(r, keep[c])]));
        Ok(rebuild_positive(&vals, &u))
    }

    fn krylov(&mut self, x: &Mat<c64>, norm: f64) -> Option<Mat<c64>> {
        let n = x.nrows();
        let warm_cols = self.warm.as_ref().map_or(0, |w| w.ncols());
        let block = (warm_cols + 4).max(6);
        let max_basis = n / KRYLOV_FRACTION;
        if block * 2 > max_basis {
            return None;
        }
        let scale = norm.max(f64::MIN_POSITIVE);

        let mut start = Mat::<c64>::zeros(n, block);
        for c in 0..block {
            for r in 0..n {
                start[(r, c)] = match &self.warm {
                    Some(w) if c < warm_cols => w[(r, c)],
                    _ => probe(r, c),
                };
            }
        }

        let mut q: Vec<Vec<c64>> = Vec::new();
        let mut aq: Vec<Vec<c64>> = Vec::new();
        let mut pending = orthonormalize_into(&mut q, cols(&start));
        while !pending.is_empty() {
            let blk = Mat::from_fn(n, pending.len(), |r, c| q[pending[c]][r]);
            let img = x * &blk;
            for c in 0..pending.len() {
                aq.push(img.col_as_slice(c).to_vec());
            }

            let m = q.len();
            if m >= 2 * block || m >= max_basis {
                if let Some(out) = ritz_positive_part(&q, &aq, scale) {
                    let (proj, vecs) = out;
                    self.warm = Some(vecs);
                    return Some(proj);
                }
            }
            if m + block > max_basis {
                return None;
            }
            pending = orthonormalize_into(&mut q, cols(&img));
        }
        None
    }
}

fn cols(m: &Mat<c64>) -> Vec<Vec<c64>> {
    (0..m.ncols()).map(|j| m.col_as_slice(j).to_vec()).collect()
}

/// Deterministic, well-spread probe vector entries.
fn probe(r: usize, c: usize) -> c64 {
    // Weyl sequence phases; distinct irrational multipliers per column
    let phi = 0.618_033_988_749_894_9 * (r as f64 + 1.0) * (c as f64 + 1.0).sqrt()
        + 0.414_213_562_373_095 * (r * r % 97) as f64;
    crate::linalg::tone(phi.fract())
}

/// Appends the components of `vs` orthogonal to the current basis, returning
/// the indices of the newly added vectors.
fn orthonormalize_into(q: &mut Vec<Vec<c64>>, vs: Vec<Vec<c64>>) -> Vec<usize> {
    let mut added = Vec::new();
    for mut v in vs {
        let before = crate::linalg::norm_sqr(&v).sqrt();
        if before == 0.0 {
            continue;
        }
        // two passes of classical Gram-Schmidt
        for _ in 0..2 {
            for b in q.iter() {
                let c = crate::linalg::inner(b, &v);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= c * bi;
                }
            }
        }
        let after = crate::linalg::norm_sqr(&v).sqrt();
        if after <= 1e-10 * before {
            continue;
        }
        for vi in v.iter_mut() {
            *vi /= after;
        }
        added.push(q.len());
        q.push(v);
    }
    added
}

/// Rayleigh-Ritz on the basis; returns the positive part and its vectors when
/// every positive Ritz pair and the largest non-positive one have converged.
fn ritz_positive_part(q: &[Vec<c64>], aq: &[Vec<c64>], scale: f64) -> Option<(Mat<c64>, Mat<c64>)> {
    let m = aq.len();
    let n = q[0].len();
    let t = Mat::from_fn(m, m, |i, j| crate::linalg::inner(&q[i], &aq[j]));
    let (theta, y) = eigh(&hermitian_part(&t)).ok()?;

    let qm = Mat::from_fn(n, m, |r, c| q[c][r]);
    let aqm = Mat::from_fn(n, m, |r, c| aq[c][r]);
    let residual = |idx: usize| -> f64 {
        let yi = y.col(idx);
        let ax = &aqm * yi;
        let xx = &qm * yi;
        let mut acc = 0.0;
        for r in 0..n {
            acc += (ax[r] - xx[r] * theta[idx]).norm_sqr();
        }
        acc.sqrt()
    };

    // theta is ascending; walk down from the top
    let mut positive = Vec::new();
    let mut idx = m;
    while idx > 0 {
        idx -= 1;
        if theta[idx] <= 0.0 {
            // the pair straddling zero must be resolved well enough to rule
            // out a hidden positive eigenvalue
            if residual(idx) > theta[idx].abs() + STRADDLE_TOL * scale {
                return None;
            }
            break;
        }
        if residual(idx) > RITZ_TOL * scale {
            return None;
        }
        positive.push(idx);
    }
    if positive.len() == m {
        return None;
    }

    let vecs = Mat::from_fn(n, positive.len(), |r, c| {
        let yi = y.col(positive[c]);
        (0..m).map(|k| qm[(r, k)] * yi[k]).sum()
    });
    let vals: Vec<f64> = positive.iter().map(|&i| theta[i]).collect();
    Some((rebuild_positive(&vals, &vecs), vecs))
}
