//! Experiment configuration, read from TOML.

use std::fmt;
use std::path::{Path as FsPath, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::anm::AdmmConfig;
use crate::array::{ArrayGeometry, NupaGeometry, UpaGeometry};
use crate::channel::GainLaw;
use crate::nupa_gd::GdConfig;
use crate::sounding::{dft_codebook, kron_codebook, Codebook};
use crate::{Error, Result};

use super::io;

/// Radius of the default circular arrays: half-wavelength spacing between
/// neighbours of a 16-element ring.
pub const CIRCULAR_RADIUS_WAVELENGTHS: f64 = 4.0 / std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Anm,
    Gd,
    Omp,
    Music,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [EstimatorKind::Anm, EstimatorKind::Gd, EstimatorKind::Omp, EstimatorKind::Music];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Anm => "anm",
            EstimatorKind::Gd => "gd",
            EstimatorKind::Omp => "omp",
            EstimatorKind::Music => "music",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown estimator `{s}`; expected one of anm, gd, omp, music")))
    }
}

/// Parses a comma-separated estimator list such as `anm,omp`.
pub fn parse_estimators(list: &str) -> Result<Vec<EstimatorKind>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometrySpec {
    Upa {
        n1: usize,
        n2: usize,
    },
    /// Ring of `elements` antennas; `radius` is in wavelengths.
    Circular {
        elements: usize,
        radius: f64,
    },
    /// A geometry file written by [`io::write_geometry`].
    File {
        path: PathBuf,
    },
}

impl GeometrySpec {
    pub fn circular_default() -> Self {
        GeometrySpec::Circular { elements: 16, radius: CIRCULAR_RADIUS_WAVELENGTHS }
    }

    pub fn build(&self) -> Result<ArrayGeometry> {
        match self {
            GeometrySpec::Upa { n1, n2 } => Ok(UpaGeometry::new(*n1, *n2)?.into()),
            GeometrySpec::Circular { elements, radius } => Ok(NupaGeometry::circular(*elements, *radius, 1.0)?.into()),
            GeometrySpec::File { path } => io::read_geometry(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CodebookSpec {
    /// `P1 kron P2` of DFT codebooks. The element split `n1 x n2` defaults to
    /// the transmit UPA and must be given for other geometries.
    Kron {
        p1: usize,
        p2: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n1: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n2: Option<usize>,
    },
    /// `N x beams` DFT codebook.
    Dft {
        beams: usize,
    },
    /// A measurement file written by [`io::write_measurements`]; its codebook is used.
    File {
        path: PathBuf,
    },
}

impl CodebookSpec {
    pub fn build(&self, tx: &ArrayGeometry) -> Result<Codebook> {
        let cb = match self {
            CodebookSpec::Kron { p1, p2, n1, n2 } => {
                let (n1, n2) = match (n1, n2, tx.as_upa()) {
                    (Some(a), Some(b), _) => (*a, *b),
                    (None, None, Some(u)) => (u.n1, u.n2),
                    _ => {
                        return Err(Error::Config(
                            "kron codebook on a non-UPA transmitter needs both n1 and n2".into(),
                        ))
                    }
                };
                kron_codebook(&dft_codebook(n1, *p1)?, &dft_codebook(n2, *p2)?)?
            }
            CodebookSpec::Dft { beams } => Codebook::new(dft_codebook(tx.len(), *beams)?)?,
            CodebookSpec::File { path } => io::read_measurements(path)?.config().codebook().clone(),
        };
        if cb.n() != tx.len() {
            return Err(Error::shape("codebook rows vs transmit elements", tx.len(), cb.n()));
        }
        Ok(cb)
    }
}

/// ADMM overrides; absent fields take [`AdmmConfig::for_link`] values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnmSettings {
    /// Fixed weight; absent means the noise-level rule.
    pub mu: Option<f64>,
    pub rho: Option<f64>,
    pub max_iters: Option<usize>,
    pub rel_change_tol: Option<f64>,
}

impl AnmSettings {
    pub fn resolve(&self, m: usize, n: usize, noise_var: f64, pilot_power: f64) -> AdmmConfig {
        let mut c = AdmmConfig::for_link(m, n, noise_var, pilot_power);
        if let Some(v) = self.mu {
            c.mu = v;
        }
        if let Some(v) = self.rho {
            c.rho = v;
        }
        if let Some(v) = self.max_iters {
            c.max_iters = v;
        }
        if let Some(v) = self.rel_change_tol {
            c.rel_change_tol = v;
        }
        c
    }
}

/// Gradient-descent overrides; absent fields take [`GdConfig::for_link`] values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GdSettings {
    /// Fixed weight; absent means half the noise-level rule.
    pub mu: Option<f64>,
    pub grid_points: Option<usize>,
    pub ls_rcond: Option<f64>,
    pub step0: Option<f64>,
    pub backtrack: Option<f64>,
    pub prune_factor: Option<f64>,
    pub stop_eps: Option<f64>,
    pub max_iters: Option<usize>,
    pub scaled: Option<bool>,
}

impl GdSettings {
    pub fn resolve(&self, m: usize, n: usize, noise_var: f64, pilot_power: f64) -> GdConfig {
        let mut c = GdConfig::for_link(m, n, noise_var, pilot_power);
        if let Some(v) = self.mu {
            c.mu = v;
        }
        if self.grid_points.is_some() {
            c.grid_points = self.grid_points;
        }
        if let Some(v) = self.ls_rcond {
            c.ls_rcond = v;
        }
        if let Some(v) = self.step0 {
            c.step0 = v;
        }
        if let Some(v) = self.backtrack {
            c.backtrack = v;
        }
        if let Some(v) = self.prune_factor {
            c.prune_factor = v;
        }
        if let Some(v) = self.stop_eps {
            c.stop_eps = v;
        }
        if let Some(v) = self.max_iters {
            c.max_iters = v;
        }
        if let Some(v) = self.scaled {
            c.scaled = v;
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OmpSettings {
    /// Angle grid points per axis.
    pub grid: usize,
    pub residual_tol: Option<f64>,
}

impl Default for OmpSettings {
    fn default() -> Self {
        Self { grid: 90, residual_tol: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MusicSettings {
    pub grid: usize,
}

impl Default for MusicSettings {
    fn default() -> Self {
        Self { grid: 90 }
    }
}

/// Settings of the relaxation-accuracy sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig1Settings {
    pub seed: u64,
    /// Draws per separation factor.
    pub draws: usize,
    pub deltas: Vec<f64>,
    pub paths: usize,
    pub rx: UpaGeometry,
    pub tx: UpaGeometry,
    pub admm: AdmmConfig,
}

impl Default for Fig1Settings {
    fn default() -> Self {
        Self {
            seed: 1,
            draws: 100,
            deltas: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            paths: 2,
            rx: UpaGeometry { n1: 16, n2: 16 },
            tx: UpaGeometry { n1: 16, n2: 16 },
            admm: AdmmConfig::for_values(),
        }
    }
}

impl Fig1Settings {
    pub fn validate(&self) -> Result<()> {
        if self.draws == 0 {
            return Err(Error::Config("fig1.draws must be at least 1".into()));
        }
        if self.deltas.is_empty() || self.deltas.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(Error::Config("fig1.deltas must be a non-empty list of non-negative numbers".into()));
        }
        if self.paths == 0 {
            return Err(Error::Config("fig1.paths must be at least 1".into()));
        }
        UpaGeometry::new(self.rx.n1, self.rx.n2)?;
        UpaGeometry::new(self.tx.n1, self.tx.n2)?;
        Ok(())
    }
}

/// One Monte Carlo experiment. Every field has a default, so an empty file
/// is the 16-by-16 UPA link with all three UPA estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    pub paths: usize,
    pub snr_db: Vec<f64>,
    /// Noise variance; pilot power is `noise_var * 10^(snr/10)`, or
    /// `10^(snr/10)` for a noiseless run.
    pub noise_var: f64,
    pub gains: GainLaw,
    /// Separation factor for the path draws (UPA only).
    pub min_separation: Option<f64>,
    pub estimators: Vec<EstimatorKind>,
    pub tx: GeometrySpec,
    pub rx: GeometrySpec,
    pub codebook: CodebookSpec,
    pub anm: AnmSettings,
    pub gd: GdSettings,
    pub omp: OmpSettings,
    pub music: MusicSettings,
    pub fig1: Fig1Settings,
    /// Output directory.
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            trials: 100,
            paths: 3,
            snr_db: vec![2.0, 4.0, 6.0, 8.0, 10.0],
            noise_var: 1.0,
            gains: GainLaw::UnitModulus,
            min_separation: None,
            estimators: vec![EstimatorKind::Anm, EstimatorKind::Omp, EstimatorKind::Music],
            tx: GeometrySpec::Upa { n1: 4, n2: 4 },
            rx: GeometrySpec::Upa { n1: 4, n2: 4 },
            codebook: CodebookSpec::Kron { p1: 4, p2: 4, n1: None, n2: None },
            anm: AnmSettings::default(),
            gd: GdSettings::default(),
            omp: OmpSettings::default(),
            music: MusicSettings::default(),
            fig1: Fig1Settings::default(),
            output: None,
        }
    }
}

/// Built geometries and codebook of a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub tx: ArrayGeometry,
    pub rx: ArrayGeometry,
    pub codebook: Codebook,
}

impl ExperimentConfig {
    /// 16-element circular arrays on both sides with the gradient estimator.
    pub fn circular() -> Self {
        Self {
            estimators: vec![EstimatorKind::Gd, EstimatorKind::Omp, EstimatorKind::Music],
            tx: GeometrySpec::circular_default(),
            rx: GeometrySpec::circular_default(),
            codebook: CodebookSpec::Kron { p1: 4, p2: 4, n1: Some(4), n2: Some(4) },
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML file; relative file paths inside resolve against its directory.
    pub fn load(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or_else(|| FsPath::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for g in [&mut cfg.tx, &mut cfg.rx] {
            if let GeometrySpec::File { path } = g {
                fix(path);
            }
        }
        if let CodebookSpec::File { path } = &mut cfg.codebook {
            fix(path);
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.snr_db.is_empty() {
            return Err(Error::Config("snr_db must list at least one value".into()));
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("snr_db values must be finite".into()));
        }
        if self.paths == 0 {
            return Err(Error::Config("paths must be at least 1".into()));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(Error::Config("noise_var must be finite and non-negative".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("select at least one estimator".into()));
        }
        let mut seen = self.estimators.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.estimators.len() {
            return Err(Error::Config("estimators are listed more than once".into()));
        }
        if self.omp.grid < 2 || self.music.grid < 2 {
            return Err(Error::Config("baseline grids need at least 2 points".into()));
        }
        self.fig1.validate()
    }

    pub fn link(&self) -> Result<Link> {
        let tx = self.tx.build()?;
        let rx = self.rx.build()?;
        let codebook = self.codebook.build(&tx)?;
        Ok(Link { tx, rx, codebook })
    }

    /// Pilot power for an SNR in dB.
    pub fn pilot_power(&self, snr_db: f64) -> f64 {
        let reference = if self.noise_var > 0.0 { self.noise_var } else { 1.0 };
        reference * 10f64.powf(snr_db / 10.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        for cfg in [ExperimentConfig::default(), ExperimentConfig::circular()] {
            let text = cfg.to_toml_string().unwrap();
            assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
        }
    }

    #[test]
    fn keyed_overrides() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            seed = 9
            trials = 4
            snr_db = [0.0, 5.0]
            estimators = ["gd", "music"]
            [tx]
            kind = "circular"
            elements = 8
            radius = 0.5
            [codebook]
            kind = "dft"
            beams = 8
            [gd]
            mu = 0.25
            "#,
        )
        .unwrap();
        assert_eq!(cfg.trials, 4);
        assert_eq!(cfg.estimators, vec![EstimatorKind::Gd, EstimatorKind::Music]);
        let link = ExperimentConfig { rx: cfg.tx.clone(), ..cfg.clone() }.link().unwrap();
        assert_eq!(link.codebook.p(), 8);
        assert_eq!(cfg.gd.resolve(8, 8, 1.0, 1.0).mu, 0.25);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for text in ["trials = 0", "snr_db = []", "estimators = []", "estimators = [\"anm\", \"anm\"]", "bogus = 1", "noise_var = -1.0"] {
            assert!(ExperimentConfig::from_toml_str(text).is_err(), "{text}");
        }
    }

    #[test]
    fn estimator_names() {
        assert_eq!(parse_estimators("anm, OMP,music").unwrap(), vec![EstimatorKind::Anm, EstimatorKind::Omp, EstimatorKind::Music]);
        assert!(parse_estimators("lasso").is_err());
    }

    #[test]
    fn kron_on_a_ring_needs_a_split() {
        let cfg = ExperimentConfig {
            tx: GeometrySpec::circular_default(),
            codebook: CodebookSpec::Kron { p1: 4, p2: 4, n1: None, n2: None },
            ..ExperimentConfig::default()
        };
        assert!(matches!(cfg.link(), Err(Error::Config(_))));
        assert_eq!(ExperimentConfig::circular().link().unwrap().codebook.p(), 16);
    }
}
