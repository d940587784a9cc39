//! DFT codebooks, pilot sounding and the vectorized measurement operator.
//!
//! With pilot matrix `S = sqrt(Pt) I_P` the received block is
//! `Y = sqrt(Pt) H P + W`. Every estimator works with the effective operator
//! `P_bar = sqrt(Pt) P`, and in vectorized form `y = (P_bar^T kron I_M) h + w`.

use faer::{c64, Mat};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::array::uls_response;
use crate::channel::ChannelMatrix;
use crate::linalg::{unvec, vec_of};
use crate::{Error, Result};

/// Singular values at or below this count as rank deficiency.
const RANK_TOL: f64 = 1e-10;

/// `n x p` DFT codebook whose column `i` is the uniform linear response at `i / p`.
pub fn dft_codebook(n: usize, p: usize) -> Result<Mat<c64>> {
    if p == 0 || p > n {
        return Err(Error::Domain(format!("DFT codebook needs 1 <= p <= n, got n={n}, p={p}")));
    }
    let cols: Vec<Vec<c64>> = (0..p)
        .map(|i| uls_response(n, i as f64 / p as f64))
        .collect::<Result<_>>()?;
    Ok(crate::linalg::mat_from_cols(n, &cols))
}

/// Beamformer matrix `P` with unit-norm, linearly independent columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    beams: Mat<c64>,
    factors: Option<(usize, usize)>,
}

impl Codebook {
    pub fn new(beams: Mat<c64>) -> Result<Self> {
        Self::checked(beams, None)
    }

    pub(crate) fn checked(beams: Mat<c64>, factors: Option<(usize, usize)>) -> Result<Self> {
        let (n, p) = (beams.nrows(), beams.ncols());
        if p == 0 || p > n {
            return Err(Error::Domain(format!("codebook must have 1 <= P <= N, got {n}x{p}")));
        }
        for j in 0..p {
            let norm = crate::linalg::norm_sqr(beams.col_as_slice(j)).sqrt();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(Error::Domain(format!("codebook column {j} has norm {norm}, expected 1")));
            }
        }
        let sv = beams
            .singular_values()
            .map_err(|e| Error::Numerical(format!("codebook svd failed: {e:?}")))?;
        let rank = sv.iter().filter(|&&s| s > RANK_TOL).count();
        if rank < p {
            return Err(Error::Domain(format!("codebook has rank {rank}, expected {p}")));
        }
        Ok(Self { beams, factors })
    }

    /// `N`, the transmit element count.
    pub fn n(&self) -> usize {
        self.beams.nrows()
    }

    /// `P`, the number of beams.
    pub fn p(&self) -> usize {
        self.beams.ncols()
    }

    pub fn beams(&self) -> &Mat<c64> {
        &self.beams
    }

    /// Column counts `(P1, P2)` when built by [`kron_codebook`].
    pub fn factors(&self) -> Option<(usize, usize)> {
        self.factors
    }
}

/// `P = P1 kron P2`.
pub fn kron_codebook(p1: &Mat<c64>, p2: &Mat<c64>) -> Result<Codebook> {
    let (r1, c1, r2, c2) = (p1.nrows(), p1.ncols(), p2.nrows(), p2.ncols());
    let beams = Mat::from_fn(r1 * r2, c1 * c2, |i, j| p1[(i / r2, j / c2)] * p2[(i % r2, j % c2)]);
    Codebook::checked(beams, Some((c1, c2)))
}

/// Codebook plus pilot power and noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct SoundingConfig {
    codebook: Codebook,
    pilot_power: f64,
    noise_var: f64,
    effective: Mat<c64>,
}

impl SoundingConfig {
    pub fn new(codebook: Codebook, pilot_power: f64, noise_var: f64) -> Result<Self> {
        if !(pilot_power > 0.0 && pilot_power.is_finite()) {
            return Err(Error::Domain(format!("pilot power must be positive, got {pilot_power}")));
        }
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(Error::Domain(format!("noise variance must be non-negative, got {noise_var}")));
        }
        let s = pilot_power.sqrt();
        let b = codebook.beams();
        let effective = Mat::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)] * s);
        Ok(Self { codebook, pilot_power, noise_var, effective })
    }

    /// Pilot power from an SNR in dB, `SNR = Pt / sigma_w^2`.
    pub fn from_snr_db(codebook: Codebook, snr_db: f64, noise_var: f64) -> Result<Self> {
        let pilot_power = noise_var * 10f64.powf(snr_db / 10.0);
        Self::new(codebook, pilot_power, noise_var)
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn pilot_power(&self) -> f64 {
        self.pilot_power
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// `P_bar = sqrt(Pt) P`, an `N x P` matrix.
    pub fn effective(&self) -> &Mat<c64> {
        &self.effective
    }

    pub fn with_noise_var(&self, noise_var: f64) -> Result<Self> {
        Self::new(self.codebook.clone(), self.pilot_power, noise_var)
    }
}

/// Received pilots `Y` (`M x P`) and the configuration that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    y: Mat<c64>,
    config: SoundingConfig,
}

impl MeasurementSet {
    pub fn new(y: Mat<c64>, config: SoundingConfig) -> Result<Self> {
        if y.ncols() != config.codebook().p() {
            return Err(Error::shape("measurement columns", config.codebook().p(), y.ncols()));
        }
        Ok(Self { y, config })
    }

    pub fn y(&self) -> &Mat<c64> {
        &self.y
    }

    /// `vec(Y)`.
    pub fn y_vec(&self) -> Vec<c64> {
        vec_of(&self.y)
    }

    pub fn config(&self) -> &SoundingConfig {
        &self.config
    }

    /// `M`, the receive element count.
    pub fn m(&self) -> usize {
        self.y.nrows()
    }
}

/// `Y = sqrt(Pt) H P + W` with circular Gaussian `W` of per-entry variance `sigma_w^2`.
///
/// Noise is drawn in column-major order, real part first.
pub fn sound<R: Rng + ?Sized>(h: &ChannelMatrix, cfg: &SoundingConfig, rng: &mut R) -> Result<MeasurementSet> {
    if h.ncols() != cfg.codebook().n() {
        return Err(Error::shape("channel columns", cfg.codebook().n(), h.ncols()));
    }
    let mut y = h.entries() * cfg.effective();
    let sd = (cfg.noise_var() / 2.0).sqrt();
    if sd > 0.0 {
        for j in 0..y.ncols() {
            for i in 0..y.nrows() {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                y[(i, j)] += c64::new(re, im) * sd;
            }
        }
    }
    MeasurementSet::new(y, cfg.clone())
}

/// `sqrt(Pt) (P^T kron I_M) h`, evaluated as `vec(H P_bar)`.
pub fn forward_apply(h: &[c64], cfg: &SoundingConfig) -> Result<Vec<c64>> {
    let n = cfg.codebook().n();
    if h.is_empty() || h.len() % n != 0 {
        return Err(Error::shape("vectorized channel length", format!("a positive multiple of {n}"), h.len()));
    }
    let hm = unvec(h, h.len() / n, n);
    Ok(vec_of(&(&hm * cfg.effective())))
}

/// `sqrt(Pt) (conj(P) kron I_M) r`, evaluated as `vec(R P_bar^H)`.
pub fn adjoint_apply(r: &[c64], cfg: &SoundingConfig) -> Result<Vec<c64>> {
    let p = cfg.codebook().p();
    if r.is_empty() || r.len() % p != 0 {
        return Err(Error::shape("vectorized measurement length", format!("a positive multiple of {p}"), r.len()));
    }
    let rm = unvec(r, r.len() / p, p);
    Ok(vec_of(&(&rm * cfg.effective().adjoint())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{ArrayGeometry, UpaGeometry};
    use crate::channel::{assemble_channel, draw_paths, GainLaw};
    use crate::linalg::{inner, kron};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<c64> {
        (0..n).map(|_| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    fn square_cfg(pt: f64, nv: f64) -> SoundingConfig {
        let p = dft_codebook(4, 4).unwrap();
        SoundingConfig::new(kron_codebook(&p, &p).unwrap(), pt, nv).unwrap()
    }

    fn gram_is_identity(m: &Mat<c64>) -> bool {
        let g = m.adjoint() * m;
        (0..g.nrows()).all(|i| {
            (0..g.ncols()).all(|j| {
                let want = if i == j { 1.0 } else { 0.0 };
                (g[(i, j)] - c64::new(want, 0.0)).norm() < 1e-12
            })
        })
    }

    #[test]
    fn dft_examples() {
        let d = dft_codebook(2, 2).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let want = [[s, s], [s, -s]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((d[(i, j)] - c64::new(want[i][j], 0.0)).norm() < 1e-15);
            }
        }
        assert!(gram_is_identity(&dft_codebook(4, 4).unwrap()));
        let half = dft_codebook(4, 2).unwrap();
        let want = uls_response(4, 0.5).unwrap();
        for i in 0..4 {
            assert!((half[(i, 1)] - want[i]).norm() < 1e-15);
        }
        assert!(dft_codebook(2, 3).is_err());
        assert!(dft_codebook(2, 0).is_err());
    }

    #[test]
    fn kron_examples() {
        let d2 = dft_codebook(2, 2).unwrap();
        let cb = kron_codebook(&d2, &d2).unwrap();
        assert!(gram_is_identity(cb.beams()));
        assert_eq!(cb.factors(), Some((2, 2)));

        let a = dft_codebook(4, 2).unwrap();
        let b = dft_codebook(4, 2).unwrap();
        let cb = kron_codebook(&a, &b).unwrap();
        assert_eq!((cb.n(), cb.p()), (16, 4));
        for i in 0..2 {
            for j in 0..2 {
                let want = kron(a.col_as_slice(i), b.col_as_slice(j));
                let got = cb.beams().col_as_slice(i * 2 + j);
                assert!(want.iter().zip(got).all(|(x, y)| (x - y).norm() < 1e-15));
            }
        }
        let sv = cb.beams().singular_values().unwrap();
        assert!(sv.iter().all(|&s| s > 1e-10));

        let dup = Mat::from_fn(2, 2, |_, _| c64::new(1.0 / 2f64.sqrt(), 0.0));
        assert!(Codebook::new(dup).is_err());
    }

    #[test]
    fn sound_noiseless_and_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g: ArrayGeometry = UpaGeometry::new(4, 4).unwrap().into();
        let set = draw_paths(&mut rng, 3, None, &g, &g, GainLaw::UnitModulus).unwrap();
        let h = assemble_channel(&set, &g, &g).unwrap();

        let cfg = square_cfg(3.0, 0.0);
        let y = sound(&h, &cfg, &mut rng).unwrap();
        let want = h.entries() * cfg.codebook().beams() * faer::Scale(c64::new(3f64.sqrt(), 0.0));
        assert!(crate::linalg::frob_dist(y.y(), &want) < 1e-13);

        let eye = Codebook::new(Mat::identity(16, 16)).unwrap();
        let cfg = SoundingConfig::new(eye, 1.0, 0.0).unwrap();
        let y = sound(&h, &cfg, &mut rng).unwrap();
        assert_eq!(y.y(), h.entries());
    }

    #[test]
    fn noise_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g: ArrayGeometry = UpaGeometry::new(1, 1).unwrap().into();
        let zero = crate::channel::ChannelMatrix::zeros(g.clone(), g);
        let cb = Codebook::new(Mat::identity(1, 1)).unwrap();
        let cfg = SoundingConfig::new(cb, 1.0, 2.5).unwrap();
        let (mut acc, mut re_acc) = (0.0, 0.0);
        let n = 10_000;
        for _ in 0..n {
            let z = sound(&zero, &cfg, &mut rng).unwrap().y()[(0, 0)];
            acc += z.norm_sqr();
            re_acc += z.re * z.re;
        }
        let var = acc / n as f64;
        assert!((var - 2.5).abs() < 0.25, "{var}");
        assert!((re_acc / n as f64 - 1.25).abs() < 0.125);
    }

    #[test]
    fn sound_linear_at_fixed_noise() {
        let g: ArrayGeometry = UpaGeometry::new(4, 4).unwrap().into();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let h1 = assemble_channel(&draw_paths(&mut rng, 2, None, &g, &g, GainLaw::ComplexGaussian).unwrap(), &g, &g).unwrap();
        let h2 = assemble_channel(&draw_paths(&mut rng, 2, None, &g, &g, GainLaw::ComplexGaussian).unwrap(), &g, &g).unwrap();
        let sum = crate::channel::ChannelMatrix::new(h1.entries() + h2.entries(), g.clone(), g.clone()).unwrap();
        let cfg = square_cfg(2.0, 1.0);
        let run = |h: &crate::channel::ChannelMatrix| sound(h, &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let (y1, y2, ys) = (run(&h1), run(&h2), run(&sum));
        let noise = run(&crate::channel::ChannelMatrix::zeros(g.clone(), g.clone()));
        // Y(h1 + h2) = Y(h1) + Y(h2) - W
        let lhs = ys.y();
        let rhs = y1.y() + y2.y() - noise.y();
        assert!(crate::linalg::frob_dist(lhs, &rhs) < 1e-12);
    }

    #[test]
    fn forward_matches_dense_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cb = Codebook::new(dft_codebook(4, 3).unwrap()).unwrap();
        let cfg = SoundingConfig::new(cb, 2.0, 0.0).unwrap();
        let m = 4;
        let h = random_vec(&mut rng, m * 4);
        let pb = cfg.effective();
        // (P_bar^T kron I_M), dense
        let op = Mat::from_fn(m * 3, m * 4, |r, c| {
            let (ri, rj) = (r % m, r / m);
            let (ci, cj) = (c % m, c / m);
            if ri == ci {
                pb[(cj, rj)]
            } else {
                c64::new(0.0, 0.0)
            }
        });
        let dense = crate::linalg::mat_vec(&op, &h);
        let fast = forward_apply(&h, &cfg).unwrap();
        assert!(dense.iter().zip(&fast).all(|(a, b)| (a - b).norm() < 1e-12));

        let hm = unvec(&h, m, 4);
        let via_matrix = vec_of(&(&hm * pb));
        assert!(via_matrix.iter().zip(&fast).all(|(a, b)| (a - b).norm() < 1e-12));

        let zero = forward_apply(&vec![c64::new(0.0, 0.0); 8], &cfg).unwrap();
        assert!(zero.iter().all(|z| *z == c64::new(0.0, 0.0)));
        assert!(forward_apply(&h[..5], &cfg).is_err());
    }

    #[test]
    fn adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let cfg = square_cfg(1.7, 0.0);
        let m = 3;
        for _ in 0..100 {
            let h = random_vec(&mut rng, m * 16);
            let r = random_vec(&mut rng, m * 16);
            let lhs = inner(&forward_apply(&h, &cfg).unwrap(), &r);
            let rhs = inner(&h, &adjoint_apply(&r, &cfg).unwrap());
            assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
        }

        let eye = Codebook::new(Mat::identity(4, 4)).unwrap();
        let cfg = SoundingConfig::new(eye, 4.0, 0.0).unwrap();
        let r = random_vec(&mut rng, 8);
        let back = adjoint_apply(&r, &cfg).unwrap();
        assert!(back.iter().zip(&r).all(|(a, b)| (a - b * 2.0).norm() < 1e-14));
        let zero = adjoint_apply(&vec![c64::new(0.0, 0.0); 8], &cfg).unwrap();
        assert!(zero.iter().all(|z| *z == c64::new(0.0, 0.0)));
    }

    #[test]
    fn snr_to_power() {
        let cfg = SoundingConfig::from_snr_db(Codebook::new(Mat::identity(2, 2)).unwrap(), 10.0, 1.0).unwrap();
        assert!((cfg.pilot_power() - 10.0).abs() < 1e-12);
        assert!(SoundingConfig::new(Codebook::new(Mat::identity(2, 2)).unwrap(), 0.0, 1.0).is_err());
    }
}
