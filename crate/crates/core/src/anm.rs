//! Atomic-norm channel estimation through the decoupled two-level Toeplitz
//! semidefinite relaxation.
//!
//! The estimator solves
//!
//! ```text
//! min  gamma/(2M) Tr T(U) + gamma/(2N) Tr T(V) + 1/2 ||H P_bar - Y||_F^2
//! s.t. [[T(U), H], [H^H, T(V)]] >= 0
//! ```
//!
//! by ADMM on the splitting `M = [[T(U), H], [H^H, T(V)]]`, `M >= 0`. Every
//! primal update is closed form; the `M` update is a PSD cone projection.
//!
//! With unit-norm steering vectors the relaxation of a single unit path has
//! value `1 / sqrt(MN)`. [`sdp_value`] and [`mmv_value`] rescale by
//! `sqrt(MN)` so that they are directly comparable with `sum_l |sigma_l|`,
//! and the configured weight is taken on the same scale: `gamma = mu sqrt(MN)`.

mod projector;

use faer::linalg::solvers::{Llt, Solve};
use faer::{c64, Mat, Side};
use serde::{Deserialize, Serialize};

use crate::array::UpaGeometry;
use crate::channel::ChannelMatrix;
use crate::linalg::{frob_dist, hermitian_part};
use crate::sounding::MeasurementSet;
use crate::toeplitz::{adjoint_with, toeplitz2, ToeplitzGenerator2};
use crate::{Error, Result};

use projector::PsdProjector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdmmConfig {
    /// Weight on the rescaled relaxation; the solver uses `gamma = mu sqrt(MN)`.
    pub mu: f64,
    /// Augmented-Lagrangian penalty.
    pub rho: f64,
    pub max_iters: usize,
    /// Bound on `||M - Z||_F`; `None` means `1e-4 (M + N)`.
    pub primal_tol: Option<f64>,
    /// Bound on the relative change of the estimate between iterations.
    pub rel_change_tol: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self { mu: 1.0, rho: 0.05, max_iters: 2000, primal_tol: None, rel_change_tol: 1e-6 }
    }
}

impl AdmmConfig {
    /// Weight from [`noise_weight`] and `rho = 10 sqrt(P_t)`, which keeps the
    /// iteration count in the hundreds across SNRs.
    pub fn for_link(m: usize, n: usize, noise_var: f64, pilot_power: f64) -> Self {
        Self {
            mu: noise_weight(m, n, noise_var, pilot_power),
            rho: 10.0 * pilot_power.sqrt().max(1e-3),
            ..Self::default()
        }
    }

    /// Settings for [`sdp_value`] and [`mmv_value`]. The weight is ignored there
    /// and the tolerances apply to the unit-Frobenius-norm rescaled channel.
    pub fn for_values() -> Self {
        Self { mu: 1.0, rho: 0.3, max_iters: 20_000, primal_tol: Some(1e-7), rel_change_tol: 1e-7 }
    }

    pub fn primal_tol_for(&self, m: usize, n: usize) -> f64 {
        self.primal_tol.unwrap_or(1e-4 * (m + n) as f64)
    }

    fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Domain(format!("ADMM penalty must be positive, got {}", self.rho)));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::Domain(format!("ADMM weight must be non-negative, got {}", self.mu)));
        }
        if self.primal_tol.is_some_and(|t| !(t > 0.0)) || !(self.rel_change_tol > 0.0) {
            return Err(Error::Domain("ADMM tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Noise-level weight per unit of `sum_l |sigma_l|` for an `M x N` link:
/// `sigma_w sqrt(P_t) (1 + 1/ln n) sqrt(ln n + ln(4 pi ln n))` with `n = MN`.
///
/// A unit path sounded at pilot power `P_t` has a measurement image of norm
/// about `sqrt(P_t)`, and the bracket bounds the dual atomic norm of white
/// noise over unit atoms.
pub fn noise_weight(m: usize, n: usize, noise_var: f64, pilot_power: f64) -> f64 {
    let ln = ((m * n).max(3) as f64).ln();
    (noise_var * pilot_power).sqrt() * (1.0 + 1.0 / ln) * (ln + (4.0 * std::f64::consts::PI * ln).ln()).sqrt()
}

/// `cfg` with the weight moved to the unscaled relaxation of an `m x n` link.
fn internal(cfg: &AdmmConfig, m: usize, n: usize) -> AdmmConfig {
    AdmmConfig { mu: cfg.mu * ((m * n) as f64).sqrt(), ..*cfg }
}

/// ADMM iterate. `m_var` and `dual` are `(M + N) x (M + N)` with the receive
/// block first.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub h: Mat<c64>,
    pub u2: ToeplitzGenerator2,
    pub v2: ToeplitzGenerator2,
    pub m_var: Mat<c64>,
    pub dual: Mat<c64>,
    pub iter: usize,
}

impl AdmmState {
    pub fn zeros(rx: UpaGeometry, tx: UpaGeometry) -> Self {
        let (m, n) = (rx.len(), tx.len());
        Self {
            h: Mat::zeros(m, n),
            u2: ToeplitzGenerator2::zeros(rx.n1, rx.n2),
            v2: ToeplitzGenerator2::zeros(tx.n1, tx.n2),
            m_var: Mat::zeros(m + n, m + n),
            dual: Mat::zeros(m + n, m + n),
            iter: 0,
        }
    }

    /// `[[T(U), H], [H^H, T(V)]]`.
    pub fn block_matrix(&self) -> Mat<c64> {
        assemble_block(&toeplitz2(&self.u2), &self.h, &toeplitz2(&self.v2))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdmmDiagnostics {
    pub primal_residuals: Vec<f64>,
    pub objectives: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl AdmmDiagnostics {
    /// One `iter,primal_residual,objective` row per iteration, 1-based.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,primal_residual,objective\n");
        for (k, (r, o)) in self.primal_residuals.iter().zip(&self.objectives).enumerate() {
            out.push_str(&format!("{},{r},{o}\n", k + 1));
        }
        out
    }
}

/// Result of [`sdp_value`] or [`mmv_value`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormValue {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Recovers `H` from pilots `Y` with the ADMM of the module docs.
pub fn admm_estimate(
    meas: &MeasurementSet,
    rx: UpaGeometry,
    tx: UpaGeometry,
    cfg: &AdmmConfig,
) -> Result<(ChannelMatrix, AdmmDiagnostics)> {
    cfg.validate()?;
    let pbar = meas.config().effective();
    if meas.m() != rx.len() || pbar.nrows() != tx.len() {
        return Err(Error::shape(
            "measurement geometry",
            format!("{}x{}", rx.len(), tx.len()),
            format!("{}x{}", meas.m(), pbar.nrows()),
        ));
    }
    let inner = internal(cfg, rx.len(), tx.len());
    let mut solver = Solver::new(rx, SecondKind::Toeplitz(tx.n1, tx.n2), &inner, Fit::data(meas.y(), pbar, cfg.rho)?);
    let mut it = Iterate::zeros(rx, SecondKind::Toeplitz(tx.n1, tx.n2));
    let tol = cfg.primal_tol_for(rx.len(), tx.len());
    // ||Y|| / ||P_bar||_F is below the norm of any H that explains Y
    let floor = meas.y().norm_l2() / pbar.norm_l2();
    let mut diag = AdmmDiagnostics::default();
    for _ in 0..cfg.max_iters {
        let prev = it.h.clone();
        let stats = solver.step(&mut it)?;
        diag.primal_residuals.push(stats.residual);
        diag.objectives.push(stats.objective);
        let change = relative_change(&it.h, &prev, floor);
        if stats.residual < tol && change < cfg.rel_change_tol {
            diag.converged = true;
            break;
        }
    }
    diag.iterations = it.iter;
    let est = ChannelMatrix::new(it.h, rx.into(), tx.into())?;
    Ok((est, diag))
}

/// One ADMM sweep from `state`.
pub fn admm_step(state: &AdmmState, y: &Mat<c64>, pbar: &Mat<c64>, cfg: &AdmmConfig) -> Result<AdmmState> {
    cfg.validate()?;
    let (m1, m2) = state.u2.dims();
    let (n1, n2) = state.v2.dims();
    let rx = UpaGeometry::new(m1, m2)?;
    if y.nrows() != rx.len() || pbar.nrows() != n1 * n2 || y.ncols() != pbar.ncols() {
        return Err(Error::shape(
            "ADMM data",
            format!("Y {}xP, P_bar {}xP", rx.len(), n1 * n2),
            format!("Y {}x{}, P_bar {}x{}", y.nrows(), y.ncols(), pbar.nrows(), pbar.ncols()),
        ));
    }
    let kind = SecondKind::Toeplitz(n1, n2);
    let mut solver = Solver::new(rx, kind, &internal(cfg, rx.len(), n1 * n2), Fit::data(y, pbar, cfg.rho)?);
    let z = state.block_matrix();
    let mut it = Iterate {
        h: state.h.clone(),
        u: state.u2.clone(),
        second: Second::Toeplitz(state.v2.clone()),
        m_var: state.m_var.clone(),
        dual: state.dual.clone(),
        iter: state.iter,
        z_norm: z.norm_l2(),
        z,
    };
    solver.step(&mut it)?;
    let Second::Toeplitz(v2) = it.second else { unreachable!() };
    Ok(AdmmState { h: it.h, u2: it.u, v2, m_var: it.m_var, dual: it.dual, iter: it.iter })
}

/// The relaxation value `SDP(H)`, scaled so that one unit path gives 1.
///
/// Both blocks of the PSD constraint are two-level Toeplitz, so both
/// geometries must be UPAs.
pub fn sdp_value(h: &ChannelMatrix, cfg: &AdmmConfig) -> Result<NormValue> {
    let (Some(rx), Some(tx)) = (h.rx_geom().as_upa(), h.tx_geom().as_upa()) else {
        return Err(Error::Domain("SDP value needs UPA geometries on both sides".into()));
    };
    pinned_value(h.entries(), rx, SecondKind::Toeplitz(tx.n1, tx.n2), cfg)
}

/// The multiple-measurement-vector atomic norm of `H` over receive atoms,
/// scaled like [`sdp_value`].
pub fn mmv_value(h: &ChannelMatrix, cfg: &AdmmConfig) -> Result<NormValue> {
    let Some(rx) = h.rx_geom().as_upa() else {
        return Err(Error::Domain("MMV value needs a UPA receive geometry".into()));
    };
    pinned_value(h.entries(), rx, SecondKind::Free(h.ncols()), cfg)
}

fn pinned_value(h: &Mat<c64>, rx: UpaGeometry, kind: SecondKind, cfg: &AdmmConfig) -> Result<NormValue> {
    cfg.validate()?;
    let norm = h.norm_l2();
    if norm == 0.0 {
        return Ok(NormValue { value: 0.0, iterations: 0, converged: true });
    }
    let unit = Mat::from_fn(h.nrows(), h.ncols(), |i, j| h[(i, j)] / norm);
    let unit_cfg = AdmmConfig { mu: 1.0, ..*cfg };
    let mut solver = Solver::new(rx, kind, &unit_cfg, Fit::Pinned);
    let mut it = Iterate::zeros(rx, kind);
    it.h = unit;
    let tol = cfg.primal_tol_for(rx.len(), kind.len());
    let mut converged = false;
    let mut objective = 0.0;
    for _ in 0..cfg.max_iters {
        let stats = solver.step(&mut it)?;
        objective = stats.objective;
        if stats.residual < tol && stats.z_change < cfg.rel_change_tol {
            converged = true;
            break;
        }
    }
    let scale = ((rx.len() * kind.len()) as f64).sqrt() * norm;
    Ok(NormValue { value: objective * scale, iterations: it.iter, converged })
}

/// Change between iterates relative to their size, or to `floor` when both
/// are smaller, so an estimate shrinking towards zero still stops.
fn relative_change(new: &Mat<c64>, old: &Mat<c64>, floor: f64) -> f64 {
    let d = frob_dist(new, old);
    if d == 0.0 {
        return 0.0;
    }
    d / new.norm_l2().max(old.norm_l2()).max(floor)
}

/// Shape of the transmit-side block of the PSD constraint.
#[derive(Debug, Clone, Copy)]
enum SecondKind {
    Toeplitz(usize, usize),
    Free(usize),
}

impl SecondKind {
    fn len(&self) -> usize {
        match *self {
            SecondKind::Toeplitz(a, b) => a * b,
            SecondKind::Free(n) => n,
        }
    }
}

#[derive(Debug, Clone)]
enum Second {
    Toeplitz(ToeplitzGenerator2),
    Free(Mat<c64>),
}

impl Second {
    fn matrix(&self) -> Mat<c64> {
        match self {
            Second::Toeplitz(g) => toeplitz2(g),
            Second::Free(x) => x.clone(),
        }
    }
}

#[derive(Debug, Clone)]
struct Iterate {
    h: Mat<c64>,
    u: ToeplitzGenerator2,
    second: Second,
    m_var: Mat<c64>,
    dual: Mat<c64>,
    iter: usize,
    // block matrix of the latest sweep
    z: Mat<c64>,
    z_norm: f64,
}

impl Iterate {
    fn zeros(rx: UpaGeometry, kind: SecondKind) -> Self {
        let (m, n) = (rx.len(), kind.len());
        let second = match kind {
            SecondKind::Toeplitz(a, b) => Second::Toeplitz(ToeplitzGenerator2::zeros(a, b)),
            SecondKind::Free(n) => Second::Free(Mat::zeros(n, n)),
        };
        Self {
            h: Mat::zeros(m, n),
            u: ToeplitzGenerator2::zeros(rx.n1, rx.n2),
            second,
            m_var: Mat::zeros(m + n, m + n),
            dual: Mat::zeros(m + n, m + n),
            iter: 0,
            z: Mat::zeros(m + n, m + n),
            z_norm: 0.0,
        }
    }
}

/// How the `H` block is updated.
enum Fit {
    /// Held fixed.
    Pinned,
    /// Least-squares data term against `Y` through `P_bar`.
    Data {
        y: Mat<c64>,
        pbar: Mat<c64>,
        y_pbar_h: Mat<c64>,
        gram: Llt<c64>,
    },
}

impl Fit {
    fn data(y: &Mat<c64>, pbar: &Mat<c64>, rho: f64) -> Result<Self> {
        let n = pbar.nrows();
        let mut a = pbar * pbar.adjoint();
        for i in 0..n {
            a[(i, i)] += c64::new(2.0 * rho, 0.0);
        }
        let gram = hermitian_part(&a)
            .llt(Side::Lower)
            .map_err(|e| Error::Numerical(format!("cholesky of P_bar P_bar^H + 2 rho I failed: {e:?}")))?;
        Ok(Fit::Data { y: y.clone(), pbar: pbar.clone(), y_pbar_h: y * pbar.adjoint(), gram })
    }
}

struct StepStats {
    residual: f64,
    objective: f64,
    /// `||Z_new - Z_old||_F / max(||Z_new||_F, ||Z_old||_F)`.
    z_change: f64,
}

struct Solver {
    rx: UpaGeometry,
    kind: SecondKind,
    gamma: f64,
    rho: f64,
    fit: Fit,
    projector: PsdProjector,
    // Z - Upsilon / rho, reused across iterations
    work: Mat<c64>,
}

impl Solver {
    fn new(rx: UpaGeometry, kind: SecondKind, cfg: &AdmmConfig, fit: Fit) -> Self {
        let total = rx.len() + kind.len();
        Self {
            rx,
            kind,
            gamma: cfg.mu,
            rho: cfg.rho,
            fit,
            projector: PsdProjector::default(),
            work: Mat::zeros(total, total),
        }
    }

    fn step(&mut self, it: &mut Iterate) -> Result<StepStats> {
        let (m, n) = (self.rx.len(), self.kind.len());
        let total = m + n;
        let rho = self.rho;
        let inv_rho = 1.0 / rho;

        if let Fit::Data { y_pbar_h, gram, .. } = &self.fit {
            let rhs = Mat::from_fn(m, n, |i, j| {
                y_pbar_h[(i, j)] + it.m_var[(i, m + j)] * (2.0 * rho) + it.dual[(i, m + j)] * 2.0
            });
            // H A = rhs with A Hermitian, so A H^H = rhs^H
            let hh = gram.solve(rhs.adjoint().to_owned());
            it.h = hh.adjoint().to_owned();
        }

        let (mv, dl) = (&it.m_var, &it.dual);
        let mut u = adjoint_with(self.rx.n1, self.rx.n2, |r, c| mv[(r, c)] + dl[(r, c)] * inv_rho);
        u.set(0, 0, u.get(0, 0) - self.gamma / (2.0 * m as f64 * rho));
        it.u = hermitian_generator(&u);

        let shift = self.gamma / (2.0 * n as f64 * rho);
        it.second = match self.kind {
            SecondKind::Toeplitz(a, b) => {
                let mut v = adjoint_with(a, b, |r, c| mv[(m + r, m + c)] + dl[(m + r, m + c)] * inv_rho);
                v.set(0, 0, v.get(0, 0) - shift);
                Second::Toeplitz(hermitian_generator(&v))
            }
            SecondKind::Free(_) => {
                let bottom = Mat::from_fn(n, n, |i, j| mv[(m + i, m + j)] + dl[(m + i, m + j)] * inv_rho);
                let mut x = hermitian_part(&bottom);
                for i in 0..n {
                    x[(i, i)] -= c64::new(shift, 0.0);
                }
                Second::Free(x)
            }
        };

        // rebuild Z in place and form Z - Upsilon / rho in one sweep
        let top = toeplitz2(&it.u);
        let bottom = it.second.matrix();
        let h_adj = it.h.adjoint().to_owned();
        let (mut z_diff, mut z_norm, mut work_norm) = (0.0, 0.0, 0.0);
        for j in 0..total {
            let zc = it.z.col_as_slice_mut(j);
            let (upper, lower) = if j < m {
                (top.col_as_slice(j), h_adj.col_as_slice(j))
            } else {
                (it.h.col_as_slice(j - m), bottom.col_as_slice(j - m))
            };
            let wc = self.work.col_as_slice_mut(j);
            let dc = it.dual.col_as_slice(j);
            for i in 0..total {
                let v = if i < m { upper[i] } else { lower[i - m] };
                z_diff += (v - zc[i]).norm_sqr();
                z_norm += v.norm_sqr();
                zc[i] = v;
                let w = v - dc[i] * inv_rho;
                work_norm += w.norm_sqr();
                wc[i] = w;
            }
        }
        let z_norm = z_norm.sqrt();
        let z_change = if z_diff == 0.0 { 0.0 } else { z_diff.sqrt() / z_norm.max(it.z_norm) };
        it.z_norm = z_norm;

        it.m_var = self.projector.project(&self.work, work_norm.sqrt())?;

        let mut residual = 0.0;
        for j in 0..total {
            let mc = it.m_var.col_as_slice(j);
            let zc = it.z.col_as_slice(j);
            let dc = it.dual.col_as_slice_mut(j);
            for i in 0..total {
                let g = mc[i] - zc[i];
                residual += g.norm_sqr();
                dc[i] += g * rho;
            }
        }
        it.iter += 1;

        let second_trace = match &it.second {
            Second::Toeplitz(g) => {
                let (a, b) = g.dims();
                (a * b) as f64 * g.get(0, 0).re
            }
            Second::Free(x) => (0..n).map(|i| x[(i, i)].re).sum(),
        };
        let traces = self.gamma / 2.0 * it.u.get(0, 0).re + self.gamma / (2.0 * n as f64) * second_trace;
        let fit = match &self.fit {
            Fit::Pinned => 0.0,
            Fit::Data { y, pbar, .. } => {
                let r = &it.h * pbar - y;
                0.5 * r.norm_l2().powi(2)
            }
        };
        Ok(StepStats { residual: residual.sqrt(), objective: traces + fit, z_change })
    }
}

/// Nearest generator of a Hermitian two-level Toeplitz matrix.
fn hermitian_generator(g: &ToeplitzGenerator2) -> ToeplitzGenerator2 {
    let (a, b) = g.dims();
    ToeplitzGenerator2::from_fn(a, b, |i, k| (g.get(i, k) + g.get(-i, -k).conj()) * 0.5)
}

fn assemble_block(top: &Mat<c64>, h: &Mat<c64>, bottom: &Mat<c64>) -> Mat<c64> {
    let (m, n) = (top.nrows(), bottom.nrows());
    Mat::from_fn(m + n, m + n, |i, j| match (i < m, j < m) {
        (true, true) => top[(i, j)],
        (true, false) => h[(i, j - m)],
        (false, true) => h[(j, i - m)].conj(),
        (false, false) => bottom[(i - m, j - m)],
    })
}
