//! Random-matrix statistics of many-body scattering amplitudes.
//!
//! Interference of bosons and fermions scattered by chaotic cavities:
//! ensemble sampling, exact amplitudes, averaged moments, the effect of
//! finite wave-packet widths and dwell times, and resummed diagram series.

pub mod amplitudes;
pub mod diagrams;
pub mod ensembles;
pub mod error;
pub mod moments;
pub mod montecarlo;
pub mod quadrature;
pub mod symmetric;
pub mod table;
pub mod wavepackets;

pub use error::{Error, Result};
