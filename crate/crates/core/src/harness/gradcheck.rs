//! Finite-difference check of the atomic-objective gradients on random
//! non-uniform arrays.

use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::array::{ArrayGeometry, FrequencyPair, NupaGeometry};
use crate::nupa_gd::{finite_difference_error, Atom, AtomicProblem};
use crate::sounding::{dft_codebook, Codebook, SoundingConfig};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradcheckSettings {
    pub instances: usize,
    pub seed: u64,
    /// Central-difference step.
    pub step: f64,
    /// Largest accepted relative error.
    pub tolerance: f64,
}

impl Default for GradcheckSettings {
    fn default() -> Self {
        Self { instances: 100, seed: 1, step: 1e-6, tolerance: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub instances: usize,
    pub max_rel_error: f64,
    pub mean_rel_error: f64,
    /// Instances above the tolerance.
    pub failures: Vec<usize>,
    pub tolerance: f64,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn random_array(rng: &mut ChaCha8Rng) -> Result<ArrayGeometry> {
    let n = rng.random_range(3..10);
    let g = if rng.random_bool(0.5) {
        NupaGeometry::circular(n, rng.random_range(0.25..2.0), 1.0)?
    } else {
        let coords = (0..n)
            .map(|_| (rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)))
            .collect();
        NupaGeometry::new(coords, 1.0)?
    };
    Ok(g.into())
}

/// A random problem with random data and a few random atoms.
pub fn random_instance(rng: &mut ChaCha8Rng) -> Result<(AtomicProblem, Vec<Atom>, f64)> {
    let tx = random_array(rng)?;
    let rx = random_array(rng)?;
    let p = rng.random_range(1..=tx.len());
    let cb = Codebook::new(dft_codebook(tx.len(), p)?)?;
    let cfg = SoundingConfig::new(cb, rng.random_range(0.5..10.0), 0.0)?;
    let y = Mat::from_fn(rx.len(), p, |_, _| c64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)));
    let problem = AtomicProblem::from_parts(y, cfg.effective().clone(), &tx, &rx)?;
    let count = rng.random_range(1..5);
    let atoms = (0..count)
        .map(|_| Atom {
            g: FrequencyPair::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)),
            f: FrequencyPair::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)),
            sigma: c64::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)),
        })
        .collect();
    let mu = rng.random_range(0.0..2.0);
    Ok((problem, atoms, mu))
}

pub fn run_gradcheck(settings: &GradcheckSettings) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut errors = Vec::with_capacity(settings.instances);
    for _ in 0..settings.instances {
        let (problem, atoms, mu) = random_instance(&mut rng)?;
        errors.push(finite_difference_error(&atoms, &problem, mu, settings.step));
    }
    let failures = errors
        .iter()
        .enumerate()
        .filter(|(_, e)| !(**e < settings.tolerance))
        .map(|(i, _)| i)
        .collect();
    let n = errors.len().max(1) as f64;
    Ok(GradcheckReport {
        instances: errors.len(),
        max_rel_error: errors.iter().copied().fold(0.0, f64::max),
        mean_rel_error: errors.iter().sum::<f64>() / n,
        failures,
        tolerance: settings.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes() {
        let rep = run_gradcheck(&GradcheckSettings { instances: 10, ..GradcheckSettings::default() }).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(rep.instances, 10);
    }

    #[test]
    fn a_wrong_gradient_would_be_caught() {
        // a huge step turns the central difference into a poor estimate
        let rep = run_gradcheck(&GradcheckSettings { instances: 5, step: 0.2, ..GradcheckSettings::default() }).unwrap();
        assert!(!rep.passed());
    }
}
