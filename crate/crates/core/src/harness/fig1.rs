//! Accuracy of the decoupled Toeplitz relaxation and of the MMV atomic norm
//! against the true `sum_l |sigma_l|`, as a function of path separation.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anm::{mmv_value, sdp_value, AdmmConfig};
use crate::array::ArrayGeometry;
use crate::channel::{assemble_channel, draw_paths, GainLaw};
use crate::{Error, Result};

use super::config::Fig1Settings;

pub const FIG1_CSV_HEADER: &str =
    "delta,draws,sdp_mean_rel_err,sdp_ci95,mmv_mean_rel_err,mmv_ci95,sdp_nonconverged,mmv_nonconverged,failures";

/// Relative errors of one draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fig1Sample {
    pub sdp_rel_err: f64,
    pub mmv_rel_err: f64,
    pub sdp_converged: bool,
    pub mmv_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1Row {
    pub delta: f64,
    /// Draws that produced a sample.
    pub draws: usize,
    pub sdp_mean_rel_err: f64,
    pub sdp_ci95: f64,
    pub mmv_mean_rel_err: f64,
    pub mmv_ci95: f64,
    pub sdp_nonconverged: usize,
    pub mmv_nonconverged: usize,
    /// Draws lost to sampling or solver errors.
    pub failures: usize,
}

/// Seed of draw `draw` at separation index `delta_index`.
pub fn draw_seed(master: u64, delta_index: usize, draw: usize) -> u64 {
    super::seed::trial_seed(master ^ 0x0f19_0f19, delta_index, draw)
}

/// One unit-gain draw with separation factor `delta`, evaluated by both norms.
pub fn fig1_sample(settings: &Fig1Settings, delta: f64, seed: u64) -> Result<Fig1Sample> {
    let tx: ArrayGeometry = settings.tx.into();
    let rx: ArrayGeometry = settings.rx.into();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let set = draw_paths(&mut rng, settings.paths, Some(delta), &tx, &rx, GainLaw::UnitModulus)?;
    let h = assemble_channel(&set, &tx, &rx)?;
    let truth = set.gain_l1();
    let sdp = sdp_value(&h, &settings.admm)?;
    let mmv = mmv_value(&h, &settings.admm)?;
    Ok(Fig1Sample {
        sdp_rel_err: (sdp.value - truth).abs() / truth,
        mmv_rel_err: (mmv.value - truth).abs() / truth,
        sdp_converged: sdp.converged,
        mmv_converged: mmv.converged,
    })
}

fn mean_ci(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}

/// Sweeps every separation factor of `settings`.
pub fn run_fig1(settings: &Fig1Settings, threads: Option<usize>) -> Result<Vec<Fig1Row>> {
    settings.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("thread count must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let jobs: Vec<(usize, usize)> = (0..settings.deltas.len())
        .flat_map(|d| (0..settings.draws).map(move |k| (d, k)))
        .collect();
    let samples: Vec<(usize, Result<Fig1Sample>)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(d, k)| (d, fig1_sample(settings, settings.deltas[d], draw_seed(settings.seed, d, k))))
            .collect()
    });
    let rows = settings
        .deltas
        .iter()
        .enumerate()
        .map(|(d, &delta)| {
            let ok: Vec<Fig1Sample> = samples
                .iter()
                .filter(|(i, _)| *i == d)
                .filter_map(|(_, s)| s.as_ref().ok().copied())
                .collect();
            let (sdp_mean, sdp_ci) = mean_ci(&ok.iter().map(|s| s.sdp_rel_err).collect::<Vec<_>>());
            let (mmv_mean, mmv_ci) = mean_ci(&ok.iter().map(|s| s.mmv_rel_err).collect::<Vec<_>>());
            Fig1Row {
                delta,
                draws: ok.len(),
                sdp_mean_rel_err: sdp_mean,
                sdp_ci95: sdp_ci,
                mmv_mean_rel_err: mmv_mean,
                mmv_ci95: mmv_ci,
                sdp_nonconverged: ok.iter().filter(|s| !s.sdp_converged).count(),
                mmv_nonconverged: ok.iter().filter(|s| !s.mmv_converged).count(),
                failures: settings.draws - ok.len(),
            }
        })
        .collect();
    Ok(rows)
}

pub fn fig1_csv(rows: &[Fig1Row]) -> String {
    let mut out = String::from(FIG1_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.delta,
            r.draws,
            r.sdp_mean_rel_err,
            r.sdp_ci95,
            r.mmv_mean_rel_err,
            r.mmv_ci95,
            r.sdp_nonconverged,
            r.mmv_nonconverged,
            r.failures
        );
    }
    out
}

/// Small settings for quick runs: 8 by 8 arrays per side and one path.
pub fn quick_settings() -> Fig1Settings {
    Fig1Settings {
        draws: 3,
        deltas: vec![1.0, 4.0],
        paths: 1,
        rx: crate::array::UpaGeometry { n1: 8, n2: 8 },
        tx: crate::array::UpaGeometry { n1: 8, n2: 8 },
        admm: AdmmConfig::for_values(),
        ..Fig1Settings::default()
    }
}
