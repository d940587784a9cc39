//! On-grid comparison estimators: orthogonal matching pursuit over a
//! quantized angle dictionary, and two-sided 2D MUSIC with gain pairing.
//!
//! Both use the same angle grid. Elevation and azimuth angles are
//! `(i - 1) 2 pi / N_G - pi`, mapped to frequency pairs
//! `(1/2 sin(theta) cos(phi), 1/2 cos(theta))`. Distinct angle pairs often map to
//! the same frequency pair, so the dictionaries keep each pair once.

use std::collections::HashSet;
use std::f64::consts::PI;

use faer::{c64, Mat};

use crate::array::{ArrayGeometry, FrequencyPair};
use crate::channel::ChannelMatrix;
use crate::linalg::{eigh, norm_sqr};
use crate::nupa_gd::{ls_init, objective, AtomicProblem, Atom};
use crate::sounding::MeasurementSet;
use crate::{Error, Result};

/// Default bound on the columns of one dictionary side.
pub const DICTIONARY_COLUMN_CAP: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct AngleGrid {
    size: usize,
}

impl AngleGrid {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::Domain(format!("angle grid needs at least 2 points, got {size}")));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Grid angles `(i - 1) 2 pi / N_G - pi`, `i = 1..=N_G`.
    pub fn angles(&self) -> Vec<f64> {
        (0..self.size)
            .map(|i| i as f64 * 2.0 * PI / self.size as f64 - PI)
            .collect()
    }

    /// Distinct frequency pairs over all (elevation, azimuth) combinations, in first-seen order.
    pub fn frequency_pairs(&self) -> Vec<FrequencyPair> {
        let angles = self.angles();
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for &theta in &angles {
            for &phi in &angles {
                let p = angle_to_frequency(theta, phi);
                // quantize away rounding noise, e.g. sin(pi) != 0
                let key = ((p.x1 * 1e9).round() as i64, (p.x2 * 1e9).round() as i64);
                if seen.insert(key) {
                    out.push(p);
                }
            }
        }
        out
    }
}

/// `(1/2 sin(theta) cos(phi), 1/2 cos(theta))`.
pub fn angle_to_frequency(theta: f64, phi: f64) -> FrequencyPair {
    FrequencyPair::new(0.5 * theta.sin() * phi.cos(), 0.5 * theta.cos())
}

/// Per-side steering dictionaries over a shared list of frequency pairs.
#[derive(Debug, Clone)]
pub struct Dictionary {
    pairs: Vec<FrequencyPair>,
    /// `N x K` transmit steering columns.
    a: Mat<c64>,
    /// `M x K` receive steering columns.
    b: Mat<c64>,
}

pub fn build_dictionaries(grid: &AngleGrid, tx: &ArrayGeometry, rx: &ArrayGeometry) -> Result<Dictionary> {
    build_dictionaries_capped(grid, tx, rx, DICTIONARY_COLUMN_CAP)
}

pub fn build_dictionaries_capped(
    grid: &AngleGrid,
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    column_cap: usize,
) -> Result<Dictionary> {
    let pairs = grid.frequency_pairs();
    if pairs.len() > column_cap {
        return Err(Error::Config(format!(
            "dictionary of {} columns exceeds the cap of {column_cap}",
            pairs.len()
        )));
    }
    let steer = |geom: &ArrayGeometry| {
        let cols: Vec<Vec<c64>> = pairs.iter().map(|&p| geom.response(p)).collect();
        crate::linalg::mat_from_cols(geom.len(), &cols)
    };
    Ok(Dictionary {
        a: steer(tx),
        b: steer(rx),
        pairs,
    })
}

impl Dictionary {
    pub fn pairs(&self) -> &[FrequencyPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn tx_dictionary(&self) -> &Mat<c64> {
        &self.a
    }

    pub fn rx_dictionary(&self) -> &Mat<c64> {
        &self.b
    }

    /// Measurement image `vec(b_r a_t^H Pbar)` of the atom with transmit column `t` and receive column `r`.
    pub fn sensing_column(&self, t: usize, r: usize, pbar: &Mat<c64>) -> Vec<c64> {
        let c = self.a.col(t).adjoint() * pbar;
        let b = self.b.col_as_slice(r);
        let mut out = Vec::with_capacity(b.len() * pbar.ncols());
        for p in 0..pbar.ncols() {
            out.extend(b.iter().map(|&v| v * c[p]));
        }
        out
    }

    /// Dense sensing matrix with column `t K + r`; refused above `entry_cap` entries.
    pub fn sensing_matrix(&self, pbar: &Mat<c64>, entry_cap: usize) -> Result<Mat<c64>> {
        let k = self.len();
        let rows = self.b.nrows() * pbar.ncols();
        if k * k * rows > entry_cap {
            return Err(Error::Config(format!(
                "dense sensing matrix of {rows}x{} exceeds the cap of {entry_cap} entries",
                k * k
            )));
        }
        let mut g = Mat::<c64>::zeros(rows, k * k);
        for t in 0..k {
            for r in 0..k {
                let col = self.sensing_column(t, r, pbar);
                g.col_as_slice_mut(t * k + r).copy_from_slice(&col);
            }
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OmpReport {
    /// Selected `(transmit, receive)` dictionary columns in selection order.
    pub support: Vec<(usize, usize)>,
    /// Residual norm before the first and after every selection.
    pub residual_norms: Vec<f64>,
}

/// Orthogonal matching pursuit with at most `l` selections; stops early once
/// the residual norm is at most `residual_tol`.
pub fn omp_estimate(
    meas: &MeasurementSet,
    dict: &Dictionary,
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    l: usize,
    residual_tol: Option<f64>,
) -> Result<(ChannelMatrix, OmpReport)> {
    let k = dict.len();
    if l == 0 || l > k * k {
        return Err(Error::Domain(format!("OMP sparsity {l} outside 1..={}", k * k)));
    }
    check_dictionary(dict, tx, rx)?;
    let problem = AtomicProblem::new(meas, tx, rx)?;
    let pbar = problem.pbar();
    let tol = residual_tol.unwrap_or(0.0);

    // transmit columns seen through the pilots, Pbar^H a_t, and their norms
    let at = pbar.adjoint() * &dict.a;
    let inv_norms: Vec<f64> = (0..k)
        .map(|t| {
            let n = norm_sqr(at.col_as_slice(t)).sqrt();
            if n > 0.0 {
                1.0 / n
            } else {
                0.0
            }
        })
        .collect();

    let mut report = OmpReport::default();
    let mut atoms: Vec<Atom> = Vec::new();
    let mut resid = problem.y().clone();
    report.residual_norms.push(resid.norm_l2());
    while atoms.len() < l && resid.norm_l2() > tol {
        // <vec(b_r a_t^H Pbar), vec(R)> = b_r^H R Pbar^H a_t
        let corr = dict.b.adjoint() * &resid * &at;
        let mut best = (0, 0, -1.0);
        for t in 0..k {
            for (r, v) in corr.col_as_slice(t).iter().enumerate() {
                let score = v.norm() * inv_norms[t];
                if score > best.2 {
                    best = (t, r, score);
                }
            }
        }
        let (t, r, _) = best;
        report.support.push((t, r));
        atoms.push(Atom {
            g: dict.pairs[t],
            f: dict.pairs[r],
            sigma: c64::new(0.0, 0.0),
        });
        refit(&mut atoms, &problem)?;
        let h = problem.channel(&atoms);
        resid = problem.y() - h * pbar;
        report.residual_norms.push(resid.norm_l2());
    }
    let h = problem.channel(&atoms);
    Ok((ChannelMatrix::new(h, rx.clone(), tx.clone())?, report))
}

fn check_dictionary(dict: &Dictionary, tx: &ArrayGeometry, rx: &ArrayGeometry) -> Result<()> {
    if dict.a.nrows() != tx.len() || dict.b.nrows() != rx.len() {
        return Err(Error::shape(
            "dictionary rows (tx, rx)",
            format!("({}, {})", tx.len(), rx.len()),
            format!("({}, {})", dict.a.nrows(), dict.b.nrows()),
        ));
    }
    Ok(())
}

/// Least-squares gains for the current frequencies.
fn refit(atoms: &mut [Atom], problem: &AtomicProblem) -> Result<()> {
    let pairs: Vec<_> = atoms.iter().map(|a| (a.g, a.f)).collect();
    for (a, s) in atoms.iter_mut().zip(ls_init(&pairs, problem, 0.0)?) {
        a.sigma = s;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MusicReport {
    /// Receive-side pseudo-spectrum over the dictionary pairs.
    pub rx_spectrum: Vec<f64>,
    /// Transmit-side pseudo-spectrum over the dictionary pairs.
    pub tx_spectrum: Vec<f64>,
    /// Selected receive and transmit pairs, indices into the dictionary.
    pub rx_peaks: Vec<usize>,
    pub tx_peaks: Vec<usize>,
    /// `tx_peaks[pairing[l]]` is matched with `rx_peaks[l]`.
    pub pairing: Vec<usize>,
    /// A signal-subspace eigenvalue was not above the noise floor.
    pub degenerate: bool,
}

/// Largest path count for which every pairing is tried.
pub const MUSIC_MAX_PATHS: usize = 6;

/// Two-sided 2D MUSIC: receive pairs from the column space of `Y`, transmit
/// pairs from the column space of `Y^T` (steering `Pbar^T conj(a)`), then the
/// pairing with the smallest least-squares residual.
pub fn music_estimate(
    meas: &MeasurementSet,
    dict: &Dictionary,
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    l: usize,
) -> Result<(ChannelMatrix, MusicReport)> {
    check_dictionary(dict, tx, rx)?;
    let problem = AtomicProblem::new(meas, tx, rx)?;
    let y = problem.y();
    let (m, p) = (y.nrows(), y.ncols());
    if l == 0 || l >= m.min(p) {
        return Err(Error::Domain(format!("MUSIC path count {l} must lie in 1..{}", m.min(p))));
    }
    if l > MUSIC_MAX_PATHS {
        return Err(Error::Domain(format!("MUSIC pairing supports at most {MUSIC_MAX_PATHS} paths")));
    }
    if l > dict.len() {
        return Err(Error::Domain(format!("MUSIC path count {l} exceeds the {} grid pairs", dict.len())));
    }

    let rcov = y * y.adjoint() * faer::Scale(c64::new(1.0 / p as f64, 0.0));
    let yt = y.transpose().to_owned();
    let tcov = &yt * yt.adjoint() * faer::Scale(c64::new(1.0 / m as f64, 0.0));
    let (rx_noise, rx_degenerate) = noise_subspace(&rcov, l)?;
    let (tx_noise, tx_degenerate) = noise_subspace(&tcov, l)?;

    let rx_spectrum = pseudo_spectrum(&rx_noise, &dict.b);
    // transmit steering seen through the pilots: Pbar^T conj(a) = conj(Pbar^H a)
    let tx_steer = (problem.pbar().adjoint() * &dict.a).conjugate().to_owned();
    let tx_spectrum = pseudo_spectrum(&tx_noise, &tx_steer);

    let rx_peaks = pick_peaks(&rx_spectrum, dict.pairs(), l, exclusion_radius(m));
    let tx_peaks = pick_peaks(&tx_spectrum, dict.pairs(), l, exclusion_radius(tx.len()));

    let mut best: Option<(f64, Vec<usize>, Vec<Atom>)> = None;
    for perm in permutations(l) {
        let mut atoms: Vec<Atom> = (0..l)
            .map(|i| Atom {
                g: dict.pairs[tx_peaks[perm[i]]],
                f: dict.pairs[rx_peaks[i]],
                sigma: c64::new(0.0, 0.0),
            })
            .collect();
        refit(&mut atoms, &problem)?;
        let cost = objective(&atoms, &problem, 0.0);
        if best.as_ref().is_none_or(|b| cost < b.0) {
            best = Some((cost, perm, atoms));
        }
    }
    let (_, pairing, atoms) = best.expect("at least one pairing");
    let h = problem.channel(&atoms);
    let report = MusicReport {
        rx_spectrum,
        tx_spectrum,
        rx_peaks,
        tx_peaks,
        pairing,
        degenerate: rx_degenerate || tx_degenerate,
    };
    Ok((ChannelMatrix::new(h, rx.clone(), tx.clone())?, report))
}

/// Eigenvectors beyond the `l` largest, and whether the signal part is degenerate.
fn noise_subspace(cov: &Mat<c64>, l: usize) -> Result<(Mat<c64>, bool)> {
    let (vals, u) = eigh(&crate::linalg::hermitian_part(cov))?;
    let n = vals.len();
    let keep = n - l;
    let top = vals[n - 1].abs().max(f64::MIN_POSITIVE);
    let degenerate = vals[keep] <= vals[keep.saturating_sub(1)] + 1e-12 * top;
    // eigenvalues ascend, so the first n - l columns span the noise subspace
    Ok((u.subcols(0, keep).to_owned(), degenerate))
}

/// `1 / ||E_n^H s||^2` for unit-normalized steering columns `s`.
fn pseudo_spectrum(noise: &Mat<c64>, steer: &Mat<c64>) -> Vec<f64> {
    let proj = noise.adjoint() * steer;
    (0..steer.ncols())
        .map(|j| {
            let s = norm_sqr(steer.col_as_slice(j));
            if s == 0.0 {
                return 0.0;
            }
            let leak = norm_sqr(proj.col_as_slice(j)) / s;
            1.0 / leak.max(1e-300)
        })
        .collect()
}

/// Frequency radius within which a second peak is taken to be a sidelobe of
/// the first: half a beamwidth of a square array with `n` elements.
fn exclusion_radius(n: usize) -> f64 {
    0.5 / (n as f64).sqrt()
}

/// Greedy top-`l` peaks with a frequency-space exclusion zone.
fn pick_peaks(spectrum: &[f64], pairs: &[FrequencyPair], l: usize, radius: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..spectrum.len()).collect();
    order.sort_by(|&i, &j| spectrum[j].total_cmp(&spectrum[i]).then(i.cmp(&j)));
    let dist = |a: FrequencyPair, b: FrequencyPair| {
        let d1 = crate::channel::torus_distance(a.x1, b.x1);
        let d2 = crate::channel::torus_distance(a.x2, b.x2);
        (d1 * d1 + d2 * d2).sqrt()
    };
    let mut peaks: Vec<usize> = Vec::with_capacity(l);
    for &i in &order {
        if peaks.iter().all(|&j| dist(pairs[i], pairs[j]) >= radius) {
            peaks.push(i);
            if peaks.len() == l {
                return peaks;
            }
        }
    }
    // the exclusion zones cover the grid; fill with the best remaining points
    for &i in &order {
        if peaks.len() == l {
            break;
        }
        if !peaks.contains(&i) {
            peaks.push(i);
        }
    }
    peaks
}

/// All permutations of `0..n` in lexicographic order.
fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).expect("successor exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{NupaGeometry, UpaGeometry};
    use crate::channel::{nmse_mat, sum_paths, Path};
    use crate::linalg::tone;
    use crate::sounding::{dft_codebook, forward_apply, kron_codebook, sound, SoundingConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn upa() -> ArrayGeometry {
        UpaGeometry::new(4, 4).unwrap().into()
    }

    fn sounding(pilot_power: f64, noise_var: f64) -> SoundingConfig {
        let cb = kron_codebook(&dft_codebook(4, 4).unwrap(), &dft_codebook(4, 4).unwrap()).unwrap();
        SoundingConfig::new(cb, pilot_power, noise_var).unwrap()
    }

    fn noiseless(paths: &[Path], geom: &ArrayGeometry, cfg: SoundingConfig) -> (Mat<c64>, MeasurementSet) {
        let h = sum_paths(paths, geom, geom);
        let y = &h * cfg.effective();
        (h, MeasurementSet::new(y, cfg).unwrap())
    }

    #[test]
    fn grid_angles_and_frequencies() {
        let grid = AngleGrid::new(8).unwrap();
        let angles = grid.angles();
        assert_eq!(angles[0], -PI);
        assert!((angles[4] - 0.0).abs() < 1e-15);
        let p = angle_to_frequency(0.0, 1.234);
        assert_eq!(p, FrequencyPair::new(0.0, 0.5));
        let pairs = grid.frequency_pairs();
        assert!(pairs.len() < 64);
        assert!(AngleGrid::new(1).is_err());
        assert_eq!(AngleGrid::new(90).unwrap().frequency_pairs().len(), 2026);
    }

    #[test]
    fn dictionary_columns_are_steering_vectors() {
        let grid = AngleGrid::new(12).unwrap();
        let nupa: ArrayGeometry = NupaGeometry::circular(6, 1.0, 1.0).unwrap().into();
        let dict = build_dictionaries(&grid, &upa(), &nupa).unwrap();
        for j in 0..dict.len() {
            assert!((norm_sqr(dict.tx_dictionary().col_as_slice(j)) - 1.0).abs() < 1e-12);
            assert!((norm_sqr(dict.rx_dictionary().col_as_slice(j)) - 1.0).abs() < 1e-12);
        }
        let j = dict.pairs().iter().position(|p| *p == FrequencyPair::new(0.0, 0.5)).unwrap();
        let want = upa().response(FrequencyPair::new(0.0, 0.5));
        assert_eq!(dict.tx_dictionary().col_as_slice(j), &want[..]);
        assert!(build_dictionaries_capped(&grid, &upa(), &nupa, 3).is_err());
    }

    #[test]
    fn sensing_matrix_matches_khatri_rao_construction() {
        let grid = AngleGrid::new(4).unwrap();
        let g = upa();
        let dict = build_dictionaries(&grid, &g, &g).unwrap();
        let cfg = sounding(2.0, 0.0);
        let k = dict.len();
        let sm = dict.sensing_matrix(cfg.effective(), 1 << 24).unwrap();
        for t in 0..k {
            for r in 0..k {
                // forward operator applied to vec(b a^H)
                let outer = Mat::from_fn(16, 16, |i, j| dict.b[(i, r)] * dict.a[(j, t)].conj());
                let want = forward_apply(&crate::linalg::vec_of(&outer), &cfg).unwrap();
                let got = sm.col_as_slice(t * k + r);
                let d: f64 = want.iter().zip(got).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                assert!(d < 1e-12);
            }
        }
        assert!(dict.sensing_matrix(cfg.effective(), 10).is_err());
    }

    fn on_grid_paths(dict: &Dictionary, picks: &[(usize, usize, f64)]) -> Vec<Path> {
        picks
            .iter()
            .map(|&(t, r, ph)| Path {
                gain: tone(ph),
                aod: dict.pairs()[t],
                aoa: dict.pairs()[r],
            })
            .collect()
    }

    #[test]
    fn omp_recovers_on_grid_support() {
        let g = upa();
        let dict = build_dictionaries(&AngleGrid::new(30).unwrap(), &g, &g).unwrap();
        let paths = on_grid_paths(&dict, &[(10, 200, 0.1), (150, 33, 0.6), (77, 120, 0.85)]);
        let (h, meas) = noiseless(&paths, &g, sounding(10.0, 0.0));
        let (est, report) = omp_estimate(&meas, &dict, &g, &g, 3, None).unwrap();
        assert!(nmse_mat(est.entries(), &h).unwrap() < 1e-10);
        // distinct pairs may share a steering vector, so compare frequencies
        let mut got: Vec<_> = report.support.iter().map(|&(t, r)| (dict.pairs()[t], dict.pairs()[r])).collect();
        let mut want: Vec<_> = paths.iter().map(|p| (p.aod, p.aoa)).collect();
        let key = |x: &(FrequencyPair, FrequencyPair)| (x.0.x1, x.0.x2, x.1.x1, x.1.x2);
        got.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        want.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        assert_eq!(got, want);
        assert!(report.residual_norms.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn omp_zero_measurements_stop_at_once() {
        let g = upa();
        let dict = build_dictionaries(&AngleGrid::new(8).unwrap(), &g, &g).unwrap();
        let meas = MeasurementSet::new(Mat::zeros(16, 16), sounding(1.0, 0.0)).unwrap();
        let (est, report) = omp_estimate(&meas, &dict, &g, &g, 3, Some(1e-12)).unwrap();
        assert_eq!(est.frobenius_norm(), 0.0);
        assert!(report.support.is_empty());
        assert!(omp_estimate(&meas, &dict, &g, &g, 0, None).is_err());
    }

    #[test]
    fn music_single_path_peaks_at_truth() {
        let g = upa();
        let dict = build_dictionaries(&AngleGrid::new(30).unwrap(), &g, &g).unwrap();
        let paths = on_grid_paths(&dict, &[(41, 97, 0.3)]);
        let (h, meas) = noiseless(&paths, &g, sounding(10.0, 0.0));
        let (est, report) = music_estimate(&meas, &dict, &g, &g, 1).unwrap();
        assert_eq!(dict.pairs()[report.rx_peaks[0]], paths[0].aoa);
        assert_eq!(dict.pairs()[report.tx_peaks[0]], paths[0].aod);
        assert!(nmse_mat(est.entries(), &h).unwrap() < 1e-6);
    }

    #[test]
    fn music_two_paths_at_high_snr() {
        let g = upa();
        let dict = build_dictionaries(&AngleGrid::new(30).unwrap(), &g, &g).unwrap();
        let truth = [
            (FrequencyPair::new(-0.2, 0.1), FrequencyPair::new(0.15, -0.3)),
            (FrequencyPair::new(0.25, -0.2), FrequencyPair::new(-0.3, 0.2)),
        ];
        // snap the truth to the nearest grid pairs
        let snap = |q: FrequencyPair| {
            (0..dict.len())
                .min_by(|&i, &j| {
                    let d = |k: usize| (dict.pairs()[k].x1 - q.x1).hypot(dict.pairs()[k].x2 - q.x2);
                    d(i).total_cmp(&d(j))
                })
                .unwrap()
        };
        let picks: Vec<_> = truth.iter().enumerate().map(|(i, (gq, fq))| (snap(*gq), snap(*fq), 0.3 * i as f64)).collect();
        let paths = on_grid_paths(&dict, &picks);
        let h = sum_paths(&paths, &g, &g);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = sounding(1000.0, 1.0);
        let meas = sound(&ChannelMatrix::new(h.clone(), g.clone(), g.clone()).unwrap(), &cfg, &mut rng).unwrap();
        let (est, report) = music_estimate(&meas, &dict, &g, &g, 2).unwrap();
        let cell = 0.5 * 2.0 * PI / 30.0;
        for p in &paths {
            let near = |set: &[usize], q: FrequencyPair| {
                set.iter().any(|&k| (dict.pairs()[k].x1 - q.x1).hypot(dict.pairs()[k].x2 - q.x2) <= cell)
            };
            assert!(near(&report.rx_peaks, p.aoa));
            assert!(near(&report.tx_peaks, p.aod));
        }
        assert!(nmse_mat(est.entries(), &h).unwrap() < 1e-2);
    }

    #[test]
    fn music_spectrum_ignores_global_phase() {
        let g = upa();
        let dict = build_dictionaries(&AngleGrid::new(12).unwrap(), &g, &g).unwrap();
        let paths = on_grid_paths(&dict, &[(3, 20, 0.1), (30, 7, 0.4)]);
        let h = ChannelMatrix::new(sum_paths(&paths, &g, &g), g.clone(), g.clone()).unwrap();
        let meas = sound(&h, &sounding(5.0, 1.0), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let rot = MeasurementSet::new(meas.y() * faer::Scale(tone(0.37)), meas.config().clone()).unwrap();
        let (_, r1) = music_estimate(&meas, &dict, &g, &g, 2).unwrap();
        let (_, r2) = music_estimate(&rot, &dict, &g, &g, 2).unwrap();
        for (a, b) in r1.rx_spectrum.iter().zip(&r2.rx_spectrum) {
            assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0));
        }
        assert!(music_estimate(&meas, &dict, &g, &g, 16).is_err());
    }

    #[test]
    fn permutations_enumerate_all_orders() {
        assert_eq!(permutations(1), vec![vec![0]]);
        let p3 = permutations(3);
        assert_eq!(p3.len(), 6);
        assert_eq!(p3[0], vec![0, 1, 2]);
        assert_eq!(p3[5], vec![2, 1, 0]);
        assert_eq!(permutations(4).len(), 24);
    }
}
