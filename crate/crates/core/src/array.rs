//! Steering vectors for uniform and non-uniform planar arrays.
//!
//! A planar response is parameterized by a [`FrequencyPair`] on the torus
//! `[-1/2, 1/2)^2`. For a uniform planar array the response is the
//! Kronecker product of two uniformly sampled complex sinusoids, with the
//! element index running fastest over the second factor. Non-uniform arrays
//! use physical element coordinates scaled by `2 / wavelength`.

use std::f64::consts::PI;

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::linalg::{kron, tone};
use crate::{Error, Result};

/// Spatial frequency pair, e.g. `(1/2 sin(theta) cos(phi), 1/2 cos(theta))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPair {
    pub x1: f64,
    pub x2: f64,
}

impl FrequencyPair {
    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    /// Both components reduced into `[-1/2, 1/2)`.
    pub fn wrapped(self) -> Self {
        Self::new(wrap(self.x1), wrap(self.x2))
    }

    pub fn is_canonical(&self) -> bool {
        (-0.5..0.5).contains(&self.x1) && (-0.5..0.5).contains(&self.x2)
    }

    pub fn component(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X1 => self.x1,
            Axis::X2 => self.x2,
        }
    }

    pub fn with_component(mut self, axis: Axis, value: f64) -> Self {
        match axis {
            Axis::X1 => self.x1 = value,
            Axis::X2 => self.x2 = value,
        }
        self
    }
}

/// Reduces `x` modulo 1 into `[-1/2, 1/2)`.
pub fn wrap(x: f64) -> f64 {
    let r = x - (x + 0.5).floor();
    // (x + 0.5).floor() can round so that r lands exactly on 1/2
    if r >= 0.5 {
        r - 1.0
    } else {
        r
    }
}

/// Selects one component of a [`FrequencyPair`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X1,
    X2,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::X1, Axis::X2];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpaGeometry {
    /// Elements along the first (elevation) axis.
    pub n1: usize,
    /// Elements along the second (azimuth) axis.
    pub n2: usize,
}

impl UpaGeometry {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::Domain(format!("UPA dimensions must be positive, got {n1}x{n2}")));
        }
        Ok(Self { n1, n2 })
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Non-uniform planar array given by physical coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NupaGeometry {
    pub coords: Vec<(f64, f64)>,
    pub wavelength: f64,
}

impl NupaGeometry {
    pub fn new(coords: Vec<(f64, f64)>, wavelength: f64) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Domain("NUPA geometry needs at least one element".into()));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::Domain(format!("wavelength must be positive, got {wavelength}")));
        }
        if coords.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::Domain("NUPA coordinates must be finite".into()));
        }
        Ok(Self { coords, wavelength })
    }

    /// `n` elements evenly spaced on a circle, element `i` at angle `2 pi i / n`
    /// for `i = 1..=n`.
    pub fn circular(n: usize, radius: f64, wavelength: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(Error::Domain(format!("radius must be non-negative, got {radius}")));
        }
        let coords = (1..=n)
            .map(|i| {
                let chi = 2.0 * PI * i as f64 / n as f64;
                (radius * chi.cos(), radius * chi.sin())
            })
            .collect();
        Self::new(coords, wavelength)
    }

    /// A half-wavelength grid laid out in the UPA element order.
    pub fn from_upa(geom: UpaGeometry, wavelength: f64) -> Result<Self> {
        let half = wavelength / 2.0;
        let coords = (0..geom.n1)
            .flat_map(|k1| (0..geom.n2).map(move |k2| (half * k1 as f64, half * k2 as f64)))
            .collect();
        Self::new(coords, wavelength)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Coordinate of element `i` along `axis`, scaled by `2 / wavelength`.
    fn normalized(&self, i: usize, axis: Axis) -> f64 {
        let (d1, d2) = self.coords[i];
        let d = match axis {
            Axis::X1 => d1,
            Axis::X2 => d2,
        };
        2.0 * d / self.wavelength
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ArrayGeometry {
    Upa(UpaGeometry),
    Nupa(NupaGeometry),
}

impl ArrayGeometry {
    pub fn len(&self) -> usize {
        match self {
            ArrayGeometry::Upa(g) => g.len(),
            ArrayGeometry::Nupa(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_upa(&self) -> Option<UpaGeometry> {
        match self {
            ArrayGeometry::Upa(g) => Some(*g),
            ArrayGeometry::Nupa(_) => None,
        }
    }

    pub fn response(&self, p: FrequencyPair) -> Vec<c64> {
        match self {
            ArrayGeometry::Upa(g) => upa_response(*g, p),
            ArrayGeometry::Nupa(g) => nupa_response(g, p),
        }
    }

    /// Derivative of [`ArrayGeometry::response`] with respect to one frequency component.
    pub fn response_partial(&self, p: FrequencyPair, axis: Axis) -> Vec<c64> {
        match self {
            ArrayGeometry::Upa(g) => {
                let mut v = upa_response(*g, p);
                for k1 in 0..g.n1 {
                    for k2 in 0..g.n2 {
                        let k = match axis {
                            Axis::X1 => k1,
                            Axis::X2 => k2,
                        };
                        v[k1 * g.n2 + k2] *= c64::new(0.0, 2.0 * PI * k as f64);
                    }
                }
                v
            }
            ArrayGeometry::Nupa(g) => nupa_response_partial(g, p, axis),
        }
    }
}

impl From<UpaGeometry> for ArrayGeometry {
    fn from(g: UpaGeometry) -> Self {
        ArrayGeometry::Upa(g)
    }
}

impl From<NupaGeometry> for ArrayGeometry {
    fn from(g: NupaGeometry) -> Self {
        ArrayGeometry::Nupa(g)
    }
}

/// Unit-norm uniformly sampled sinusoid `[1, e^{j2pi x}, ..., e^{j2pi(n-1)x}] / sqrt(n)`.
pub fn uls_response(n: usize, x: f64) -> Result<Vec<c64>> {
    if n == 0 {
        return Err(Error::Domain("uniform linear response needs n >= 1".into()));
    }
    Ok(uls(n, x))
}

fn uls(n: usize, x: f64) -> Vec<c64> {
    let scale = 1.0 / (n as f64).sqrt();
    // reduce the argument so large k*x stays accurate
    let x = wrap(x);
    (0..n).map(|k| tone(wrap(k as f64 * x)) * scale).collect()
}

pub fn upa_response(geom: UpaGeometry, p: FrequencyPair) -> Vec<c64> {
    kron(&uls(geom.n1, p.x1), &uls(geom.n2, p.x2))
}

pub fn nupa_response(geom: &NupaGeometry, p: FrequencyPair) -> Vec<c64> {
    let scale = 1.0 / (geom.len() as f64).sqrt();
    (0..geom.len())
        .map(|i| {
            let phase = geom.normalized(i, Axis::X1) * p.x1 + geom.normalized(i, Axis::X2) * p.x2;
            tone(phase) * scale
        })
        .collect()
}

/// Elementwise derivative of [`nupa_response`] with respect to `p.x_axis`:
/// entry `i` is scaled by `j 2 pi (2 d_axis(i) / wavelength)`.
pub fn nupa_response_partial(geom: &NupaGeometry, p: FrequencyPair, axis: Axis) -> Vec<c64> {
    let mut v = nupa_response(geom, p);
    for (i, e) in v.iter_mut().enumerate() {
        *e *= c64::new(0.0, 2.0 * PI * geom.normalized(i, axis));
    }
    v
}
