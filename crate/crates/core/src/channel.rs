//! Sparse multipath channels, separation checks and the NMSE metric.

use faer::{c64, Mat};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::array::{ArrayGeometry, FrequencyPair, UpaGeometry};
use crate::linalg::{cis, unvec, vec_of};
use crate::{Error, Result};

/// Number of rejection-sampling attempts before [`draw_paths`] gives up.
pub const DRAW_RETRY_CAP: usize = 10_000;

/// One propagation path: gain, departure pair `g` and arrival pair `f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub gain: c64,
    pub aod: FrequencyPair,
    pub aoa: FrequencyPair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    paths: Vec<Path>,
}

impl PathSet {
    pub fn new(paths: Vec<Path>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::Domain("a path set needs at least one path".into()));
        }
        Ok(Self { paths })
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// `sum_l |sigma_l|`.
    pub fn gain_l1(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm()).sum()
    }
}

/// An `M x N` channel together with the receive and transmit geometries.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    entries: Mat<c64>,
    rx_geom: ArrayGeometry,
    tx_geom: ArrayGeometry,
}

impl ChannelMatrix {
    pub fn new(entries: Mat<c64>, rx_geom: ArrayGeometry, tx_geom: ArrayGeometry) -> Result<Self> {
        let want = (rx_geom.len(), tx_geom.len());
        let got = (entries.nrows(), entries.ncols());
        if want != got {
            return Err(Error::shape("channel matrix", format!("{want:?}"), format!("{got:?}")));
        }
        Ok(Self { entries, rx_geom, tx_geom })
    }

    pub fn zeros(rx_geom: ArrayGeometry, tx_geom: ArrayGeometry) -> Self {
        let entries = Mat::zeros(rx_geom.len(), tx_geom.len());
        Self { entries, rx_geom, tx_geom }
    }

    pub fn entries(&self) -> &Mat<c64> {
        &self.entries
    }

    pub fn into_entries(self) -> Mat<c64> {
        self.entries
    }

    pub fn rx_geom(&self) -> &ArrayGeometry {
        &self.rx_geom
    }

    pub fn tx_geom(&self) -> &ArrayGeometry {
        &self.tx_geom
    }

    /// `M`, the receive element count.
    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    /// `N`, the transmit element count.
    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.norm_l2()
    }

    pub fn scaled(&self, c: c64) -> Self {
        let entries = Mat::from_fn(self.nrows(), self.ncols(), |i, j| self.entries[(i, j)] * c);
        Self { entries, ..self.clone() }
    }
}

/// `H = sum_l sigma_l b(f_l) a(g_l)^H`.
pub fn assemble_channel(paths: &PathSet, tx: &ArrayGeometry, rx: &ArrayGeometry) -> Result<ChannelMatrix> {
    Ok(ChannelMatrix {
        entries: sum_paths(paths.paths(), tx, rx),
        rx_geom: rx.clone(),
        tx_geom: tx.clone(),
    })
}

/// Like [`assemble_channel`] but accepts an empty list (giving the zero matrix).
pub(crate) fn sum_paths(paths: &[Path], tx: &ArrayGeometry, rx: &ArrayGeometry) -> Mat<c64> {
    let mut h = Mat::<c64>::zeros(rx.len(), tx.len());
    for p in paths {
        let a = tx.response(p.aod);
        let b = rx.response(p.aoa);
        for (j, aj) in a.iter().enumerate() {
            let w = p.gain * aj.conj();
            for (i, bi) in b.iter().enumerate() {
                h[(i, j)] += w * bi;
            }
        }
    }
    h
}

/// Column-stacked `vec(H)`.
pub fn vectorize(h: &ChannelMatrix) -> Vec<c64> {
    vec_of(&h.entries)
}

/// Inverse of [`vectorize`].
pub fn devectorize(v: &[c64], rx: &ArrayGeometry, tx: &ArrayGeometry) -> Result<ChannelMatrix> {
    let (m, n) = (rx.len(), tx.len());
    if v.len() != m * n {
        return Err(Error::shape("vectorized channel", m * n, v.len()));
    }
    Ok(ChannelMatrix {
        entries: unvec(v, m, n),
        rx_geom: rx.clone(),
        tx_geom: tx.clone(),
    })
}

/// Law of the complex path gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainLaw {
    /// `|sigma| = 1` with uniform phase.
    #[default]
    UnitModulus,
    /// Circular complex Gaussian with unit variance.
    ComplexGaussian,
}

/// Draws `count` paths with i.i.d. uniform frequencies on the torus.
///
/// With `min_sep = Some(delta)` the draw is repeated until every wrap-around
/// separation along receive axis `i` is at least `delta / (M_i - 1)` and along
/// transmit axis `i` at least `delta / (N_i - 1)`. This needs UPA geometries.
pub fn draw_paths<R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    min_sep: Option<f64>,
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    gains: GainLaw,
) -> Result<PathSet> {
    if count == 0 {
        return Err(Error::Domain("path count must be at least 1".into()));
    }
    let thresholds = match min_sep {
        None => None,
        Some(delta) => {
            if !(delta >= 0.0) {
                return Err(Error::Domain(format!("separation factor must be non-negative, got {delta}")));
            }
            let (Some(t), Some(r)) = (tx.as_upa(), rx.as_upa()) else {
                return Err(Error::Domain("separation-constrained draws need UPA geometries".into()));
            };
            let per = |d: usize| -> Result<f64> {
                if d < 2 {
                    return Err(Error::Domain(format!("separation rule needs at least 2 elements per axis, got {d}")));
                }
                Ok(delta / (d - 1) as f64)
            };
            Some(Separations { f1: per(r.n1)?, f2: per(r.n2)?, g1: per(t.n1)?, g2: per(t.n2)? })
        }
    };

    let attempts = if thresholds.is_some() { DRAW_RETRY_CAP } else { 1 };
    for _ in 0..attempts {
        let paths: Vec<Path> = (0..count).map(|_| draw_one(rng, gains)).collect();
        let set = PathSet { paths };
        match thresholds {
            None => return Ok(set),
            Some(_) if count < 2 => return Ok(set),
            Some(t) => {
                let s = min_separation(&set);
                if s.f1 >= t.f1 && s.f2 >= t.f2 && s.g1 >= t.g1 && s.g2 >= t.g2 {
                    return Ok(set);
                }
            }
        }
    }
    Err(Error::SamplingFailed { attempts })
}

fn draw_one<R: Rng + ?Sized>(rng: &mut R, law: GainLaw) -> Path {
    let gain = match law {
        GainLaw::UnitModulus => cis(rng.random_range(0.0..std::f64::consts::TAU)),
        GainLaw::ComplexGaussian => {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            c64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        }
    };
    let mut freq = || rng.random_range(-0.5..0.5);
    let aod = FrequencyPair::new(freq(), freq());
    let aoa = FrequencyPair::new(freq(), freq());
    Path { gain, aod, aoa }
}

/// Minimum wrap-around separations of a path set, one per frequency axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Separations {
    pub f1: f64,
    pub f2: f64,
    pub g1: f64,
    pub g2: f64,
}

/// Distance between two frequencies on the unit circle `R / Z`.
pub fn torus_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Pairwise minimum torus distance along each axis; `1/2` everywhere for a single path.
pub fn min_separation(paths: &PathSet) -> Separations {
    let mut s = Separations { f1: 0.5, f2: 0.5, g1: 0.5, g2: 0.5 };
    let p = paths.paths();
    for (i, a) in p.iter().enumerate() {
        for b in &p[i + 1..] {
            s.f1 = s.f1.min(torus_distance(a.aoa.x1, b.aoa.x1));
            s.f2 = s.f2.min(torus_distance(a.aoa.x2, b.aoa.x2));
            s.g1 = s.g1.min(torus_distance(a.aod.x1, b.aod.x1));
            s.g2 = s.g2.min(torus_distance(a.aod.x2, b.aod.x2));
        }
    }
    s
}

/// The exact-recovery separation predicate for UPA links:
/// `Delta_f_i >= 1 / floor((M_i - 1) / 4)` and `Delta_g_i >= 1 / floor((N_i - 1) / 4)`.
pub fn separation_ok(paths: &PathSet, tx: UpaGeometry, rx: UpaGeometry) -> Result<bool> {
    let threshold = |dim: usize| -> Result<f64> {
        let q = dim.saturating_sub(1) / 4;
        if q == 0 {
            return Err(Error::DegenerateSeparation { dim });
        }
        Ok(1.0 / q as f64)
    };
    let t = Separations {
        f1: threshold(rx.n1)?,
        f2: threshold(rx.n2)?,
        g1: threshold(tx.n1)?,
        g2: threshold(tx.n2)?,
    };
    if paths.len() < 2 {
        return Ok(true);
    }
    let s = min_separation(paths);
    Ok(s.f1 >= t.f1 && s.f2 >= t.f2 && s.g1 >= t.g1 && s.g2 >= t.g2)
}

/// `||H_hat - H||_F^2 / ||H||_F^2`.
pub fn nmse(estimate: &ChannelMatrix, truth: &ChannelMatrix) -> Result<f64> {
    nmse_mat(&estimate.entries, &truth.entries)
}

pub(crate) fn nmse_mat(estimate: &Mat<c64>, truth: &Mat<c64>) -> Result<f64> {
    let want = (truth.nrows(), truth.ncols());
    let got = (estimate.nrows(), estimate.ncols());
    if want != got {
        return Err(Error::shape("estimate", format!("{want:?}"), format!("{got:?}")));
    }
    let denom = truth.norm_l2().powi(2);
    if denom == 0.0 {
        return Err(Error::Domain("NMSE is undefined for a zero reference channel".into()));
    }
    let diff = crate::linalg::frob_dist(estimate, truth);
    Ok(diff * diff / denom)
}
