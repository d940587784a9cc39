//! Seeded Monte Carlo NMSE sweeps.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path as FsPath;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anm::admm_estimate;
use crate::baselines::{build_dictionaries, music_estimate, omp_estimate, AngleGrid, Dictionary};
use crate::channel::{assemble_channel, draw_paths, nmse, ChannelMatrix, PathSet};
use crate::nupa_gd::gd_estimate;
use crate::sounding::{sound, MeasurementSet, SoundingConfig};
use crate::{Error, Result};

use super::config::{EstimatorKind, ExperimentConfig, Link};

pub const CSV_HEADER: &str = "snr_db,estimator,trials,failures,mean_nmse,std_err,mean_nmse_db";

/// Short summary of one estimator run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    /// Paths in the returned estimate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOutcome {
    pub estimator: EstimatorKind,
    /// `None` when the estimator failed.
    pub nmse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub diagnostics: Diagnostics,
    /// Wall time; kept out of the deterministic outputs.
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub snr_index: usize,
    pub snr_db: f64,
    pub seed: u64,
    pub outcomes: Vec<EstimatorOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub snr_db: f64,
    pub estimator: EstimatorKind,
    /// Successful trials.
    pub trials: usize,
    pub failures: usize,
    pub mean_nmse: f64,
    /// Standard error of the mean; NaN with fewer than two trials.
    pub std_err: f64,
    pub mean_nmse_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub trials: Vec<TrialRecord>,
    pub rows: Vec<AggregateRow>,
}

/// Dictionaries shared by the grid baselines, keyed by grid size.
#[derive(Debug, Default)]
pub struct Dictionaries(BTreeMap<usize, Dictionary>);

impl Dictionaries {
    pub fn for_config(cfg: &ExperimentConfig, link: &Link) -> Result<Self> {
        let mut map = BTreeMap::new();
        for kind in &cfg.estimators {
            let size = match kind {
                EstimatorKind::Omp => cfg.omp.grid,
                EstimatorKind::Music => cfg.music.grid,
                _ => continue,
            };
            if let std::collections::btree_map::Entry::Vacant(e) = map.entry(size) {
                e.insert(build_dictionaries(&AngleGrid::new(size)?, &link.tx, &link.rx)?);
            }
        }
        Ok(Self(map))
    }

    fn get(&self, size: usize) -> Result<&Dictionary> {
        self.0
            .get(&size)
            .ok_or_else(|| Error::Config(format!("no dictionary was built for grid size {size}")))
    }
}

/// Runs one estimator on `meas`.
pub fn run_estimator(
    kind: EstimatorKind,
    meas: &MeasurementSet,
    link: &Link,
    cfg: &ExperimentConfig,
    dicts: &Dictionaries,
) -> Result<(ChannelMatrix, Diagnostics)> {
    run_estimator_traced(kind, meas, link, cfg, dicts).map(|(h, d, _)| (h, d))
}

/// [`run_estimator`] plus the per-iteration trace CSV of the iterative
/// estimators (`anm` and `gd`).
pub fn run_estimator_traced(
    kind: EstimatorKind,
    meas: &MeasurementSet,
    link: &Link,
    cfg: &ExperimentConfig,
    dicts: &Dictionaries,
) -> Result<(ChannelMatrix, Diagnostics, Option<String>)> {
    let sc = meas.config();
    let (m, n) = (link.rx.len(), link.tx.len());
    match kind {
        EstimatorKind::Anm => {
            let (Some(rx), Some(tx)) = (link.rx.as_upa(), link.tx.as_upa()) else {
                return Err(Error::Config("the ANM estimator needs UPA geometries on both sides".into()));
            };
            let admm = cfg.anm.resolve(m, n, sc.noise_var(), sc.pilot_power());
            let (est, d) = admm_estimate(meas, rx, tx, &admm)?;
            let diag = Diagnostics {
                iterations: Some(d.iterations),
                converged: Some(d.converged),
                ..Diagnostics::default()
            };
            Ok((est, diag, Some(d.trace_csv())))
        }
        EstimatorKind::Gd => {
            let gd = cfg.gd.resolve(m, n, sc.noise_var(), sc.pilot_power());
            let (est, st) = gd_estimate(meas, &link.tx, &link.rx, &gd)?;
            let diag = Diagnostics {
                iterations: Some(st.iteration),
                converged: Some(st.converged),
                paths: Some(st.active()),
                note: st.empty.then(|| "all atoms pruned".to_string()),
            };
            Ok((est, diag, Some(st.trace_csv())))
        }
        EstimatorKind::Omp => {
            let dict = dicts.get(cfg.omp.grid)?;
            let (est, rep) = omp_estimate(meas, dict, &link.tx, &link.rx, cfg.paths, cfg.omp.residual_tol)?;
            let diag = Diagnostics { paths: Some(rep.support.len()), ..Diagnostics::default() };
            Ok((est, diag, None))
        }
        EstimatorKind::Music => {
            let dict = dicts.get(cfg.music.grid)?;
            let (est, rep) = music_estimate(meas, dict, &link.tx, &link.rx, cfg.paths)?;
            let diag = Diagnostics {
                paths: Some(rep.pairing.len()),
                note: rep.degenerate.then(|| "signal subspace not above the noise floor".to_string()),
                ..Diagnostics::default()
            };
            Ok((est, diag, None))
        }
    }
}

/// Paths, channel and measurements of one trial, drawn from its derived seed.
pub fn draw_trial(
    cfg: &ExperimentConfig,
    link: &Link,
    snr_index: usize,
    trial: usize,
) -> Result<(PathSet, ChannelMatrix, MeasurementSet)> {
    let snr_db = *cfg
        .snr_db
        .get(snr_index)
        .ok_or_else(|| Error::Config(format!("SNR index {snr_index} is out of range")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(super::seed::trial_seed(cfg.seed, snr_index, trial));
    let set = draw_paths(&mut rng, cfg.paths, cfg.min_separation, &link.tx, &link.rx, cfg.gains)?;
    let h = assemble_channel(&set, &link.tx, &link.rx)?;
    let sc = SoundingConfig::new(link.codebook.clone(), cfg.pilot_power(snr_db), cfg.noise_var)?;
    let meas = sound(&h, &sc, &mut rng)?;
    Ok((set, h, meas))
}

/// Draws, sounds and estimates one trial.
pub fn run_trial(
    cfg: &ExperimentConfig,
    link: &Link,
    dicts: &Dictionaries,
    snr_index: usize,
    trial: usize,
) -> TrialRecord {
    let snr_db = cfg.snr_db[snr_index];
    let seed = super::seed::trial_seed(cfg.seed, snr_index, trial);
    let setup = draw_trial(cfg, link, snr_index, trial);
    let outcomes = cfg
        .estimators
        .iter()
        .map(|&kind| {
            let (h, meas) = match &setup {
                Ok((_, h, meas)) => (h, meas),
                Err(e) => {
                    return EstimatorOutcome {
                        estimator: kind,
                        nmse: None,
                        error: Some(format!("trial setup failed: {e}")),
                        diagnostics: Diagnostics::default(),
                        wall_time_s: 0.0,
                    }
                }
            };
            let start = Instant::now();
            let result = run_estimator(kind, meas, link, cfg, dicts).and_then(|(est, d)| Ok((nmse(&est, h)?, d)));
            let wall_time_s = start.elapsed().as_secs_f64();
            match result {
                Ok((v, diagnostics)) if v.is_finite() => EstimatorOutcome {
                    estimator: kind,
                    nmse: Some(v),
                    error: None,
                    diagnostics,
                    wall_time_s,
                },
                Ok((v, diagnostics)) => EstimatorOutcome {
                    estimator: kind,
                    nmse: None,
                    error: Some(format!("non-finite NMSE {v}")),
                    diagnostics,
                    wall_time_s,
                },
                Err(e) => EstimatorOutcome {
                    estimator: kind,
                    nmse: None,
                    error: Some(e.to_string()),
                    diagnostics: Diagnostics::default(),
                    wall_time_s,
                },
            }
        })
        .collect();
    TrialRecord { trial, snr_index, snr_db, seed, outcomes }
}

/// Runs every SNR and trial of `cfg` on `threads` workers (all cores when
/// `None`). Results are identical for any thread count.
pub fn run_bench(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<BenchReport> {
    cfg.validate()?;
    let link = cfg.link()?;
    let dicts = Dictionaries::for_config(cfg, &link)?;
    let jobs: Vec<(usize, usize)> = (0..cfg.snr_db.len())
        .flat_map(|s| (0..cfg.trials).map(move |t| (s, t)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("thread count must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let trials: Vec<TrialRecord> =
        pool.install(|| jobs.par_iter().map(|&(s, t)| run_trial(cfg, &link, &dicts, s, t)).collect());
    let rows = aggregate(cfg, &trials);
    Ok(BenchReport { trials, rows })
}

/// Per SNR and estimator means in trial order.
pub fn aggregate(cfg: &ExperimentConfig, trials: &[TrialRecord]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for (s, &snr_db) in cfg.snr_db.iter().enumerate() {
        for (e, &kind) in cfg.estimators.iter().enumerate() {
            let outcomes: Vec<&EstimatorOutcome> =
                trials.iter().filter(|t| t.snr_index == s).map(|t| &t.outcomes[e]).collect();
            let values: Vec<f64> = outcomes.iter().filter_map(|o| o.nmse).collect();
            let n = values.len();
            let mean = if n == 0 { f64::NAN } else { values.iter().sum::<f64>() / n as f64 };
            let std_err = if n < 2 {
                f64::NAN
            } else {
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            };
            rows.push(AggregateRow {
                snr_db,
                estimator: kind,
                trials: n,
                failures: outcomes.len() - n,
                mean_nmse: mean,
                std_err,
                mean_nmse_db: 10.0 * mean.log10(),
            });
        }
    }
    rows
}

impl BenchReport {
    /// The aggregate table; contains no timing data, so it is reproducible byte for byte.
    pub fn csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.snr_db, r.estimator, r.trials, r.failures, r.mean_nmse, r.std_err, r.mean_nmse_db
            );
        }
        out
    }

    pub fn trials_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.trials)?)
    }

    pub fn timings_csv(&self) -> String {
        let mut out = String::from("snr_db,trial,estimator,wall_time_s\n");
        for t in &self.trials {
            for o in &t.outcomes {
                let _ = writeln!(out, "{},{},{},{}", t.snr_db, t.trial, o.estimator, o.wall_time_s);
            }
        }
        out
    }

    pub fn row(&self, snr_db: f64, kind: EstimatorKind) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| r.snr_db == snr_db && r.estimator == kind)
    }

    /// Writes `bench.csv`, `trials.json` and `timings.csv` into `dir`.
    pub fn write(&self, dir: &FsPath) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("bench.csv"), self.csv())?;
        std::fs::write(dir.join("trials.json"), self.trials_json()?)?;
        std::fs::write(dir.join("timings.csv"), self.timings_csv())?;
        Ok(())
    }
}
