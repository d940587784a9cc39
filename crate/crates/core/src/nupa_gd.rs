//! Gradient-descent atomic estimator for arbitrary planar geometries.
//!
//! The estimate is a finite sum of atoms `sigma_l b(f_l) a(g_l)^H`. Gains
//! start from a least-squares fit over a uniform frequency grid, then all
//! parameters descend the weighted objective
//!
//! ```text
//! Gamma = mu sum_l |sigma_l| + 1/2 || Y - H(atoms) Pbar ||_F^2
//! ```
//!
//! with a backtracking step, and weak atoms are pruned after every step.
//! Gain gradients are conjugate-coordinate (Wirtinger) derivatives, so
//! `sigma - kappa * grad` is a descent direction for small `kappa`.

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::array::{ArrayGeometry, Axis, FrequencyPair};
use crate::channel::{sum_paths, ChannelMatrix, Path};
use crate::linalg::{frob_dist, inner, pinv};
use crate::sounding::MeasurementSet;
use crate::{Error, Result};

pub use crate::array::wrap;

/// Gains below this modulus get a zero l1 subgradient.
const ZERO_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GdConfig {
    /// Grid points per frequency axis; `None` picks the largest `N_G` with `N_G^4 <= M P`.
    pub grid_points: Option<usize>,
    /// Relative singular-value cutoff of the initial least-squares fit.
    pub ls_rcond: f64,
    /// Initial step of every line search.
    pub step0: f64,
    /// Step shrink factor in `(0, 1)`.
    pub backtrack: f64,
    pub backtrack_cap: usize,
    /// Atoms with `|sigma| < prune_factor * max |sigma|` are dropped.
    pub prune_factor: f64,
    pub stop_eps: f64,
    pub max_iters: usize,
    pub mu: f64,
    /// Divide each coordinate of the descent direction by its Gauss-Newton curvature.
    pub scaled: bool,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            grid_points: None,
            ls_rcond: 0.1,
            step0: 1.0,
            backtrack: 0.5,
            backtrack_cap: 40,
            prune_factor: 0.7,
            stop_eps: 1e-6,
            max_iters: 3000,
            mu: 1.0,
            scaled: true,
        }
    }
}

impl GdConfig {
    /// Defaults with half the atomic-norm noise weight. Each fitted atom
    /// is kept only if its correlation with the data exceeds `mu`, and the
    /// full weight removes every path at low SNR.
    pub fn for_link(m: usize, n: usize, noise_var: f64, pilot_power: f64) -> Self {
        Self {
            mu: 0.5 * crate::anm::noise_weight(m, n, noise_var, pilot_power),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("gradient descent: {what}")));
        if !(self.step0 > 0.0 && self.step0.is_finite()) {
            return bad("step0 must be positive");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack must lie in (0, 1)");
        }
        if !(self.prune_factor > 0.0 && self.prune_factor <= 1.0) {
            return bad("prune_factor must lie in (0, 1]");
        }
        if !(self.stop_eps > 0.0) {
            return bad("stop_eps must be positive");
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad("mu must be non-negative");
        }
        if !(0.0..1.0).contains(&self.ls_rcond) {
            return bad("ls_rcond must lie in [0, 1)");
        }
        if self.grid_points == Some(0) {
            return bad("grid_points must be at least 1");
        }
        Ok(())
    }
}

/// One term `sigma b(f) a(g)^H` of the estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    /// Transmit frequency pair.
    pub g: FrequencyPair,
    /// Receive frequency pair.
    pub f: FrequencyPair,
    pub sigma: c64,
}

impl Atom {
    fn as_path(&self) -> Path {
        Path {
            gain: self.sigma,
            aod: self.g,
            aoa: self.f,
        }
    }
}

/// Partial derivatives of the objective for one atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomGradient {
    pub g: [f64; 2],
    pub f: [f64; 2],
    /// Derivative with respect to `conj(sigma)`.
    pub sigma: c64,
    /// The gain was numerically zero and the l1 term was dropped.
    pub zero_gain: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GdState {
    pub atoms: Vec<Atom>,
    pub iteration: usize,
    /// Objective after initialization and after every iteration.
    pub objective_history: Vec<f64>,
    /// Atom count after initialization and after every iteration.
    pub active_history: Vec<usize>,
    pub backtrack_failures: usize,
    pub zero_gain_flags: usize,
    pub converged: bool,
    /// Every atom was pruned; the estimate is the zero channel.
    pub empty: bool,
}

impl GdState {
    pub fn active(&self) -> usize {
        self.atoms.len()
    }

    /// One `iter,objective,paths` row per entry of the histories; row 0 is the
    /// initialization.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,objective,paths\n");
        for (k, (o, a)) in self.objective_history.iter().zip(&self.active_history).enumerate() {
            out.push_str(&format!("{k},{o},{a}\n"));
        }
        out
    }
}

/// Measurements, effective pilots and geometries shared by every evaluation.
#[derive(Debug, Clone)]
pub struct AtomicProblem {
    y: Mat<c64>,
    pbar: Mat<c64>,
    tx: ArrayGeometry,
    rx: ArrayGeometry,
}

impl AtomicProblem {
    pub fn new(meas: &MeasurementSet, tx: &ArrayGeometry, rx: &ArrayGeometry) -> Result<Self> {
        Self::from_parts(meas.y().clone(), meas.config().effective().clone(), tx, rx)
    }

    /// `y` is the `M x P` measurement matrix, `pbar` the `N x P` effective pilots.
    pub fn from_parts(y: Mat<c64>, pbar: Mat<c64>, tx: &ArrayGeometry, rx: &ArrayGeometry) -> Result<Self> {
        if pbar.nrows() != tx.len() {
            return Err(Error::shape("pilot rows vs transmit elements", tx.len(), pbar.nrows()));
        }
        if y.nrows() != rx.len() || y.ncols() != pbar.ncols() {
            return Err(Error::shape(
                "measurement matrix",
                format!("{}x{}", rx.len(), pbar.ncols()),
                format!("{}x{}", y.nrows(), y.ncols()),
            ));
        }
        Ok(Self {
            y,
            pbar,
            tx: tx.clone(),
            rx: rx.clone(),
        })
    }

    pub fn y(&self) -> &Mat<c64> {
        &self.y
    }

    pub fn pbar(&self) -> &Mat<c64> {
        &self.pbar
    }

    pub fn tx(&self) -> &ArrayGeometry {
        &self.tx
    }

    pub fn rx(&self) -> &ArrayGeometry {
        &self.rx
    }

    pub fn channel(&self, atoms: &[Atom]) -> Mat<c64> {
        let paths: Vec<Path> = atoms.iter().map(Atom::as_path).collect();
        sum_paths(&paths, &self.tx, &self.rx)
    }

    /// `H Pbar - Y` for the channel `h`.
    fn residual(&self, h: &Mat<c64>) -> Mat<c64> {
        h * &self.pbar - &self.y
    }

    /// Column `vec(b a^H Pbar)`, the measurement image of one unit atom.
    pub(crate) fn image(&self, g: FrequencyPair, f: FrequencyPair) -> Vec<c64> {
        let a = self.tx.response(g);
        let b = self.rx.response(f);
        let c: Vec<c64> = (0..self.pbar.ncols())
            .map(|p| inner(self.pbar.col_as_slice(p), &a).conj())
            .collect();
        crate::linalg::kron(&c, &b)
    }
}

/// Largest `n_g >= 1` with `n_g^4 <= m p`.
pub fn grid_size(m: usize, p: usize) -> usize {
    let cap = m * p;
    let mut n = 1;
    while (n + 1usize).pow(4) <= cap {
        n += 1;
    }
    n
}

/// All `(g, f)` pairs on the uniform grid `-1/2 + i / n_g`, ordered `g1, g2, f1, f2` slowest to fastest.
pub fn init_grid(n_g: usize) -> Vec<(FrequencyPair, FrequencyPair)> {
    let pts: Vec<f64> = (0..n_g).map(|i| -0.5 + i as f64 / n_g as f64).collect();
    let mut out = Vec::with_capacity(n_g.pow(4));
    for &g1 in &pts {
        for &g2 in &pts {
            for &f1 in &pts {
                for &f2 in &pts {
                    out.push((FrequencyPair::new(g1, g2), FrequencyPair::new(f1, f2)));
                }
            }
        }
    }
    out
}

/// Minimum-norm least-squares gains for fixed atom frequencies.
///
/// Singular values of the atom matrix at or below `rcond * s_max` are
/// dropped; `rcond = 0` keeps everything above rounding level.
pub fn ls_init(grid: &[(FrequencyPair, FrequencyPair)], problem: &AtomicProblem, rcond: f64) -> Result<Vec<c64>> {
    let rows = problem.y.nrows() * problem.y.ncols();
    if grid.len() > rows {
        return Err(Error::Domain(format!(
            "{} atoms exceed the {rows} available measurements",
            grid.len()
        )));
    }
    let mut a = Mat::<c64>::zeros(rows, grid.len());
    for (j, &(g, f)) in grid.iter().enumerate() {
        for (dst, v) in a.col_as_slice_mut(j).iter_mut().zip(problem.image(g, f)) {
            *dst = v;
        }
    }
    let y = crate::linalg::vec_of(&problem.y);
    Ok(crate::linalg::mat_vec(&pinv(&a, rcond)?, &y))
}

pub fn objective(atoms: &[Atom], problem: &AtomicProblem, mu: f64) -> f64 {
    objective_of(atoms, &problem.residual(&problem.channel(atoms)), mu)
}

fn objective_of(atoms: &[Atom], residual: &Mat<c64>, mu: f64) -> f64 {
    let l1: f64 = atoms.iter().map(|a| a.sigma.norm()).sum();
    let fit = residual.norm_l2();
    mu * l1 + 0.5 * fit * fit
}

pub fn gradients(atoms: &[Atom], problem: &AtomicProblem, mu: f64) -> Vec<AtomGradient> {
    let e = problem.residual(&problem.channel(atoms));
    // back-projected residual Z = E Pbar^H, so <vec(E), Pbar-image of vec(b a^H)> = conj(b^H Z a)
    let z = &e * problem.pbar.adjoint();
    atoms
        .iter()
        .map(|atom| {
            let a = problem.tx.response(atom.g);
            let b = problem.rx.response(atom.f);
            let za = crate::linalg::mat_vec(&z, &a);
            let bzb = |v: &[c64]| inner(&b, &crate::linalg::mat_vec(&z, v));
            let s = atom.sigma;
            let freq = |x: c64| (s * x.conj()).re;
            let g = Axis::BOTH.map(|ax| freq(bzb(&problem.tx.response_partial(atom.g, ax))));
            let f = Axis::BOTH.map(|ax| freq(inner(&problem.rx.response_partial(atom.f, ax), &za)));
            let zero_gain = s.norm() < ZERO_GAIN;
            let l1 = if zero_gain { c64::new(0.0, 0.0) } else { s * (mu / (2.0 * s.norm())) };
            AtomGradient {
                g,
                f,
                sigma: l1 + inner(&b, &za) * 0.5,
                zero_gain,
            }
        })
        .collect()
}

/// Relative error `||analytic - fd|| / ||fd||` of [`gradients`] against central
/// differences of [`objective`] with step `h`, over every real coordinate.
///
/// Gain gradients are conjugate-coordinate derivatives, so they are compared
/// after doubling against the derivatives along `Re sigma` and `Im sigma`.
pub fn finite_difference_error(atoms: &[Atom], problem: &AtomicProblem, mu: f64, h: f64) -> f64 {
    let grads = gradients(atoms, problem, mu);
    let eval = |a: &[Atom]| objective(a, problem, mu);
    let mut diff = 0.0;
    let mut norm = 0.0;
    for (l, d) in grads.iter().enumerate() {
        let mut push = |analytic: f64, perturb: &dyn Fn(&mut Atom, f64)| {
            let mut plus = atoms.to_vec();
            let mut minus = atoms.to_vec();
            perturb(&mut plus[l], h);
            perturb(&mut minus[l], -h);
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
            diff += (analytic - fd).powi(2);
            norm += fd * fd;
        };
        push(d.g[0], &|a, s| a.g.x1 += s);
        push(d.g[1], &|a, s| a.g.x2 += s);
        push(d.f[0], &|a, s| a.f.x1 += s);
        push(d.f[1], &|a, s| a.f.x2 += s);
        push(2.0 * d.sigma.re, &|a, s| a.sigma.re += s);
        push(2.0 * d.sigma.im, &|a, s| a.sigma.im += s);
    }
    if norm == 0.0 {
        return diff.sqrt();
    }
    (diff / norm).sqrt()
}

/// Result of one backtracking line search.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmijoOutcome {
    pub atoms: Vec<Atom>,
    pub kappa: f64,
    pub objective: f64,
    /// `false` when the backtrack cap was hit and the input was returned unchanged.
    pub accepted: bool,
}

pub fn armijo_step(atoms: &[Atom], grads: &[AtomGradient], problem: &AtomicProblem, cfg: &GdConfig) -> ArmijoOutcome {
    let current = objective(atoms, problem, cfg.mu);
    let flat = grads.iter().all(|d| d.g == [0.0; 2] && d.f == [0.0; 2] && d.sigma == c64::new(0.0, 0.0));
    if flat {
        return ArmijoOutcome {
            atoms: atoms.to_vec(),
            kappa: cfg.step0,
            objective: current,
            accepted: true,
        };
    }
    let mut kappa = cfg.step0;
    for _ in 0..=cfg.backtrack_cap {
        let cand: Vec<Atom> = atoms
            .iter()
            .zip(grads)
            .map(|(a, d)| Atom {
                g: FrequencyPair::new(wrap(a.g.x1 - kappa * d.g[0]), wrap(a.g.x2 - kappa * d.g[1])),
                f: FrequencyPair::new(wrap(a.f.x1 - kappa * d.f[0]), wrap(a.f.x2 - kappa * d.f[1])),
                sigma: a.sigma - d.sigma * kappa,
            })
            .collect();
        let value = objective(&cand, problem, cfg.mu);
        if value < current {
            return ArmijoOutcome {
                atoms: cand,
                kappa,
                objective: value,
                accepted: true,
            };
        }
        kappa *= cfg.backtrack;
    }
    ArmijoOutcome {
        atoms: atoms.to_vec(),
        kappa,
        objective: current,
        accepted: false,
    }
}

/// Divides every gradient coordinate by the diagonal of the Gauss-Newton
/// matrix of the fit term, so a unit step is the per-coordinate Newton step.
pub fn scale_directions(atoms: &[Atom], grads: Vec<AtomGradient>, problem: &AtomicProblem) -> Vec<AtomGradient> {
    let energy = |v: &[c64]| crate::linalg::norm_sqr(&crate::linalg::mat_adj_vec(&problem.pbar, v));
    atoms
        .iter()
        .zip(grads)
        .map(|(atom, mut d)| {
            let a = problem.tx.response(atom.g);
            let b = problem.rx.response(atom.f);
            let (ea, eb) = (energy(&a), crate::linalg::norm_sqr(&b));
            let s2 = atom.sigma.norm_sqr();
            let floor = f64::MIN_POSITIVE;
            for (i, ax) in Axis::BOTH.into_iter().enumerate() {
                let cg = s2 * eb * energy(&problem.tx.response_partial(atom.g, ax));
                let cf = s2 * ea * crate::linalg::norm_sqr(&problem.rx.response_partial(atom.f, ax));
                d.g[i] /= cg.max(floor);
                d.f[i] /= cf.max(floor);
            }
            d.sigma /= (0.5 * ea * eb).max(floor);
            d
        })
        .collect()
}

/// Drops atoms whose gain modulus is strictly below `factor * max |sigma|`.
pub fn prune(atoms: Vec<Atom>, factor: f64) -> Vec<Atom> {
    let top = atoms.iter().map(|a| a.sigma.norm()).fold(0.0, f64::max);
    if top == 0.0 {
        return Vec::new();
    }
    let eta = factor * top;
    atoms.into_iter().filter(|a| a.sigma.norm() >= eta).collect()
}

pub fn gd_estimate(
    meas: &MeasurementSet,
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    cfg: &GdConfig,
) -> Result<(ChannelMatrix, GdState)> {
    cfg.validate()?;
    let problem = AtomicProblem::new(meas, tx, rx)?;
    let (m, p) = (problem.y.nrows(), problem.y.ncols());
    let n_g = cfg.grid_points.unwrap_or_else(|| grid_size(m, p));
    if n_g.pow(4) > m * p {
        return Err(Error::Config(format!(
            "grid of {n_g}^4 atoms exceeds the {} measurements",
            m * p
        )));
    }
    let grid = init_grid(n_g);
    let gains = ls_init(&grid, &problem, cfg.ls_rcond)?;
    let atoms: Vec<Atom> = grid
        .iter()
        .zip(gains)
        .map(|(&(g, f), sigma)| Atom { g, f, sigma })
        .filter(|a| a.sigma != c64::new(0.0, 0.0))
        .collect();
    let (h, state) = descend(&problem, atoms, cfg);
    Ok((ChannelMatrix::new(h, rx.clone(), tx.clone())?, state))
}

fn descend(problem: &AtomicProblem, atoms: Vec<Atom>, cfg: &GdConfig) -> (Mat<c64>, GdState) {
    let mut h = problem.channel(&atoms);
    let mut state = GdState {
        objective_history: vec![objective_of(&atoms, &problem.residual(&h), cfg.mu)],
        active_history: vec![atoms.len()],
        atoms,
        ..GdState::default()
    };
    while state.iteration < cfg.max_iters {
        if state.atoms.is_empty() {
            break;
        }
        state.iteration += 1;
        let mut grads = gradients(&state.atoms, problem, cfg.mu);
        if cfg.scaled {
            grads = scale_directions(&state.atoms, grads, problem);
        }
        state.zero_gain_flags += grads.iter().filter(|d| d.zero_gain).count();
        let step = armijo_step(&state.atoms, &grads, problem, cfg);
        if !step.accepted {
            state.backtrack_failures += 1;
        }
        state.atoms = prune(step.atoms, cfg.prune_factor);
        let next = problem.channel(&state.atoms);
        let moved = frob_dist(&next, &h);
        h = next;
        state.objective_history.push(objective_of(&state.atoms, &problem.residual(&h), cfg.mu));
        state.active_history.push(state.atoms.len());
        if moved < cfg.stop_eps {
            state.converged = true;
            break;
        }
    }
    state.empty = state.atoms.is_empty();
    if state.empty {
        state.converged = true;
    }
    (h, state)
}
