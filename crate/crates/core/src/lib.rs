//! Channel estimation for beamformed full-dimensional MIMO links with planar
//! arrays.
//!
//! The crate synthesizes sparse multipath channels, sounds them with DFT
//! codebook pilots and recovers the channel matrix with
//!
//! * an ADMM solver for the decoupled two-level Toeplitz semidefinite
//!   relaxation of the four-dimensional atomic norm ([`anm`]),
//! * a gradient-descent atomic estimator for arbitrary planar geometries
//!   ([`nupa_gd`]),
//! * on-grid OMP and subspace (MUSIC) baselines ([`baselines`]).
//!
//! Matrices are [`faer::Mat`] values of [`c64`]; vectorization is always
//! column-major, so `vec(H)` is the column-stacked storage order of `H`.

pub mod anm;
pub mod array;
pub mod baselines;
pub mod channel;
mod error;
pub mod harness;
mod linalg;
pub mod nupa_gd;
pub mod sounding;
pub mod toeplitz;

pub use error::{Error, Result};
pub use faer::c64;
pub use faer::Mat;

pub use array::{ArrayGeometry, FrequencyPair, NupaGeometry, UpaGeometry};
pub use channel::{ChannelMatrix, Path, PathSet};
pub use sounding::{Codebook, MeasurementSet, SoundingConfig};
pub use toeplitz::ToeplitzGenerator2;
