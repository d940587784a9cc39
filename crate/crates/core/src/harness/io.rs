//! Versioned JSON files for geometries, channels, measurements and estimates.
//!
//! Every file is an object with `schema` and `version` fields next to its
//! payload. Complex scalars are `[re, im]` pairs and matrices are stored
//! column by column with explicit `rows` and `cols`.

use std::path::Path as FsPath;

use faer::{c64, Mat};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::array::{ArrayGeometry, FrequencyPair};
use crate::channel::{ChannelMatrix, Path, PathSet};
use crate::sounding::{Codebook, MeasurementSet, SoundingConfig};
use crate::{Error, Result};

use super::bench::Diagnostics;
use super::config::EstimatorKind;

pub const SCHEMA_VERSION: u32 = 1;

pub const GEOMETRY_SCHEMA: &str = "fdmimo.geometry";
pub const CHANNEL_SCHEMA: &str = "fdmimo.channel";
pub const MEASUREMENT_SCHEMA: &str = "fdmimo.measurements";
pub const ESTIMATE_SCHEMA: &str = "fdmimo.estimate";

/// Column-major complex matrix: `data[j][i]` is entry `(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<[f64; 2]>>,
}

impl ComplexMatrix {
    pub fn from_mat(m: &Mat<c64>) -> Self {
        let data = (0..m.ncols())
            .map(|j| (0..m.nrows()).map(|i| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }

    pub fn to_mat(&self) -> Result<Mat<c64>> {
        if self.data.len() != self.cols {
            return Err(Error::shape("matrix column count", self.cols, self.data.len()));
        }
        if let Some((j, col)) = self.data.iter().enumerate().find(|(_, c)| c.len() != self.rows) {
            return Err(Error::Schema(format!(
                "matrix column {j} has {} entries but rows = {}",
                col.len(),
                self.rows
            )));
        }
        Ok(Mat::from_fn(self.rows, self.cols, |i, j| {
            let [re, im] = self.data[j][i];
            c64::new(re, im)
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathRecord {
    pub gain: [f64; 2],
    pub aod: [f64; 2],
    pub aoa: [f64; 2],
}

impl From<&Path> for PathRecord {
    fn from(p: &Path) -> Self {
        Self { gain: [p.gain.re, p.gain.im], aod: [p.aod.x1, p.aod.x2], aoa: [p.aoa.x1, p.aoa.x2] }
    }
}

impl From<&PathRecord> for Path {
    fn from(r: &PathRecord) -> Self {
        Path {
            gain: c64::new(r.gain[0], r.gain[1]),
            aod: FrequencyPair::new(r.aod[0], r.aod[1]),
            aoa: FrequencyPair::new(r.aoa[0], r.aoa[1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Envelope<T> {
    schema: String,
    version: u32,
    #[serde(flatten)]
    body: T,
}

#[derive(Debug, Deserialize)]
struct Header {
    schema: Option<String>,
    version: Option<u32>,
}

/// Serializes `body` under `schema`.
pub fn to_json<T: Serialize>(schema: &str, body: &T) -> Result<String> {
    let env = Envelope { schema: schema.to_string(), version: SCHEMA_VERSION, body };
    Ok(serde_json::to_string_pretty(&env)?)
}

/// Parses a payload, checking the schema name and version first.
pub fn from_json<T: DeserializeOwned>(schema: &str, text: &str) -> Result<T> {
    let head: Header = serde_json::from_str(text)?;
    match head.schema.as_deref() {
        Some(s) if s == schema => {}
        Some(s) => return Err(Error::Schema(format!("expected schema `{schema}`, found `{s}`"))),
        None => return Err(Error::Schema(format!("missing `schema` field (expected `{schema}`)"))),
    }
    match head.version {
        Some(SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(Error::Schema(format!(
                "`{schema}` version {v} is not supported (expected {SCHEMA_VERSION})"
            )))
        }
        None => return Err(Error::Schema(format!("missing `version` field in `{schema}`"))),
    }
    let env: Envelope<T> = serde_json::from_str(text)?;
    Ok(env.body)
}

fn write_file(path: &FsPath, text: String) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryFile {
    pub geometry: ArrayGeometry,
}

pub fn write_geometry(path: &FsPath, g: &ArrayGeometry) -> Result<()> {
    write_file(path, to_json(GEOMETRY_SCHEMA, &GeometryFile { geometry: g.clone() })?)
}

pub fn read_geometry(path: &FsPath) -> Result<ArrayGeometry> {
    let f: GeometryFile = from_json(GEOMETRY_SCHEMA, &std::fs::read_to_string(path)?)?;
    // re-validate through the constructors
    match f.geometry {
        ArrayGeometry::Upa(u) => Ok(crate::array::UpaGeometry::new(u.n1, u.n2)?.into()),
        ArrayGeometry::Nupa(n) => Ok(crate::array::NupaGeometry::new(n.coords, n.wavelength)?.into()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    pub rx: ArrayGeometry,
    pub tx: ArrayGeometry,
    pub h: ComplexMatrix,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub paths: Vec<PathRecord>,
}

impl ChannelFile {
    pub fn new(h: &ChannelMatrix, paths: Option<&PathSet>) -> Self {
        Self {
            rx: h.rx_geom().clone(),
            tx: h.tx_geom().clone(),
            h: ComplexMatrix::from_mat(h.entries()),
            paths: paths.map(|p| p.paths().iter().map(PathRecord::from).collect()).unwrap_or_default(),
        }
    }

    pub fn channel(&self) -> Result<ChannelMatrix> {
        ChannelMatrix::new(self.h.to_mat()?, self.rx.clone(), self.tx.clone())
    }

    pub fn path_set(&self) -> Result<Option<PathSet>> {
        if self.paths.is_empty() {
            return Ok(None);
        }
        PathSet::new(self.paths.iter().map(Path::from).collect()).map(Some)
    }
}

pub fn write_channel(path: &FsPath, h: &ChannelMatrix, paths: Option<&PathSet>) -> Result<()> {
    write_file(path, to_json(CHANNEL_SCHEMA, &ChannelFile::new(h, paths))?)
}

pub fn read_channel(path: &FsPath) -> Result<ChannelFile> {
    from_json(CHANNEL_SCHEMA, &std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementFile {
    pub pilot_power: f64,
    pub noise_var: f64,
    pub codebook: ComplexMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codebook_factors: Option<[usize; 2]>,
    pub y: ComplexMatrix,
}

impl MeasurementFile {
    pub fn new(meas: &MeasurementSet) -> Self {
        let cfg = meas.config();
        Self {
            pilot_power: cfg.pilot_power(),
            noise_var: cfg.noise_var(),
            codebook: ComplexMatrix::from_mat(cfg.codebook().beams()),
            codebook_factors: cfg.codebook().factors().map(|(a, b)| [a, b]),
            y: ComplexMatrix::from_mat(meas.y()),
        }
    }

    pub fn measurements(&self) -> Result<MeasurementSet> {
        let beams = self.codebook.to_mat()?;
        let cb = Codebook::checked(beams, self.codebook_factors.map(|[a, b]| (a, b)))?;
        let cfg = SoundingConfig::new(cb, self.pilot_power, self.noise_var)?;
        MeasurementSet::new(self.y.to_mat()?, cfg)
    }
}

pub fn write_measurements(path: &FsPath, meas: &MeasurementSet) -> Result<()> {
    write_file(path, to_json(MEASUREMENT_SCHEMA, &MeasurementFile::new(meas))?)
}

pub fn read_measurements(path: &FsPath) -> Result<MeasurementSet> {
    let f: MeasurementFile = from_json(MEASUREMENT_SCHEMA, &std::fs::read_to_string(path)?)?;
    f.measurements()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateFile {
    pub estimator: EstimatorKind,
    pub h: ComplexMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nmse: Option<f64>,
    pub wall_time_s: f64,
    pub diagnostics: Diagnostics,
}

pub fn write_estimate(path: &FsPath, est: &EstimateFile) -> Result<()> {
    write_file(path, to_json(ESTIMATE_SCHEMA, est)?)
}

pub fn read_estimate(path: &FsPath) -> Result<EstimateFile> {
    from_json(ESTIMATE_SCHEMA, &std::fs::read_to_string(path)?)
}
