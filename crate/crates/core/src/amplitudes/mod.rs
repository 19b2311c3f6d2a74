//! Exact many-body amplitudes and probabilities for a fixed scattering matrix.
//!
//! Particle `i` enters through channel `a_i` and the outgoing configuration is
//! `b`. The symmetrised amplitude is the permanent (bosons) or determinant
//! (fermions) of the n×n matrix `M_{ij} = σ_{b_j, a_i}`.
//!
//! Channel indices are zero-based throughout the library.

mod permanent;

pub use permanent::{determinant, permanent, MAX_PERMANENT_ORDER};

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensembles::ScatteringMatrix;
use crate::error::{Error, Result};
use crate::symmetric::{factorial, for_each_permutation, parity};
use crate::wavepackets::WavepacketConfig;

/// Exchange statistics of the particles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistics {
    Boson,
    Fermion,
}

impl Statistics {
    /// ε = +1 for bosons, −1 for fermions.
    pub fn epsilon(self) -> i32 {
        match self {
            Statistics::Boson => 1,
            Statistics::Fermion => -1,
        }
    }

    pub fn from_epsilon(eps: i32) -> Result<Self> {
        match eps {
            1 => Ok(Statistics::Boson),
            -1 => Ok(Statistics::Fermion),
            other => Err(Error::Domain(format!("epsilon must be +1 or -1, got {other}"))),
        }
    }
}

/// Incoming and outgoing channels of an n-particle process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelAssignment {
    incoming: Vec<usize>,
    outgoing: Vec<usize>,
    statistics: Statistics,
}

fn multiplicity_factorial(channels: &[usize]) -> u128 {
    let mut counts: HashMap<usize, u32> = HashMap::new();
    for &c in channels {
        *counts.entry(c).or_default() += 1;
    }
    counts.values().map(|&m| factorial(m)).product()
}

fn has_repeats(channels: &[usize]) -> bool {
    let mut sorted = channels.to_vec();
    sorted.sort_unstable();
    sorted.windows(2).any(|w| w[0] == w[1])
}

impl ChannelAssignment {
    pub fn new(incoming: Vec<usize>, outgoing: Vec<usize>, statistics: Statistics) -> Result<Self> {
        if incoming.is_empty() {
            return Err(Error::Domain("at least one particle is required".into()));
        }
        if incoming.len() != outgoing.len() {
            return Err(Error::Shape(format!(
                "{} incoming but {} outgoing channels",
                incoming.len(),
                outgoing.len()
            )));
        }
        Ok(Self {
            incoming,
            outgoing,
            statistics,
        })
    }

    pub fn particles(&self) -> usize {
        self.incoming.len()
    }

    pub fn incoming(&self) -> &[usize] {
        &self.incoming
    }

    pub fn outgoing(&self) -> &[usize] {
        &self.outgoing
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    /// **a**! = Π mul(a_i)!
    pub fn incoming_multiplicity_factorial(&self) -> u128 {
        multiplicity_factorial(&self.incoming)
    }

    /// **b**! = Π mul(b_i)!
    pub fn outgoing_multiplicity_factorial(&self) -> u128 {
        multiplicity_factorial(&self.outgoing)
    }

    pub fn outgoing_singly_occupied(&self) -> bool {
        !has_repeats(&self.outgoing)
    }

    pub fn incoming_distinct(&self) -> bool {
        !has_repeats(&self.incoming)
    }

    /// True if any incoming channel is also an outgoing one.
    pub fn overlaps(&self) -> bool {
        self.incoming.iter().any(|a| self.outgoing.contains(a))
    }

    /// Fermions with a repeated channel have identically vanishing amplitude.
    pub fn pauli_blocked(&self) -> bool {
        self.statistics == Statistics::Fermion
            && (has_repeats(&self.incoming) || has_repeats(&self.outgoing))
    }

    pub fn check_range(&self, dim: usize) -> Result<()> {
        for &c in self.incoming.iter().chain(&self.outgoing) {
            if c >= dim {
                return Err(Error::ChannelOutOfRange { channel: c, dim });
            }
        }
        Ok(())
    }

    fn normalisation(&self) -> f64 {
        (self.incoming_multiplicity_factorial() * self.outgoing_multiplicity_factorial()) as f64
    }
}

/// Longitudinal offsets z_i of the incoming wavepackets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayVector {
    z: Vec<f64>,
}

impl DelayVector {
    pub fn new(z: Vec<f64>) -> Self {
        Self { z }
    }

    /// All particles injected simultaneously.
    pub fn zeros(n: usize) -> Self {
        Self { z: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.z
    }

    /// z_ij = z_i − z_j
    pub fn diff(&self, i: usize, j: usize) -> f64 {
        self.z[i] - self.z[j]
    }
}

/// `M_{ij} = σ_{b_j, a_i}`.
pub fn transition_submatrix(sigma: &ScatteringMatrix, ch: &ChannelAssignment) -> Result<DMatrix<Complex64>> {
    ch.check_range(sigma.dim())?;
    let n = ch.particles();
    Ok(DMatrix::from_fn(n, n, |i, j| sigma.get(ch.outgoing[j], ch.incoming[i])))
}

fn symmetrised_sum(m: &DMatrix<Complex64>, statistics: Statistics) -> Result<Complex64> {
    match statistics {
        Statistics::Boson => permanent(m),
        Statistics::Fermion => determinant(m),
    }
}

/// Energy-degenerate symmetrised amplitude `Σ_P ε^P Π_i σ_{b_P(i), a_i} / √n!`.
pub fn mb_amplitude(sigma: &ScatteringMatrix, ch: &ChannelAssignment) -> Result<Complex64> {
    let m = transition_submatrix(sigma, ch)?;
    if ch.pauli_blocked() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let sum = symmetrised_sum(&m, ch.statistics)?;
    Ok(sum / (factorial(ch.particles() as u32) as f64).sqrt())
}

/// Probability of the outgoing configuration for simultaneously injected
/// particles: `|Σ_P ε^P Π σ|² / (a! b!)`.
pub fn mb_probability_equal_times(sigma: &ScatteringMatrix, ch: &ChannelAssignment) -> Result<f64> {
    let m = transition_submatrix(sigma, ch)?;
    if ch.pauli_blocked() {
        return Ok(0.0);
    }
    let sum = symmetrised_sum(&m, ch.statistics)?;
    Ok(sum.norm_sqr() / ch.normalisation())
}

/// Probability for fully distinguishable particles (all pairwise delays infinite).
pub fn distinguishable_probability(sigma: &ScatteringMatrix, ch: &ChannelAssignment) -> Result<f64> {
    let m = transition_submatrix(sigma, ch)?;
    let weights = m.map(|z| Complex64::new(z.norm_sqr(), 0.0));
    Ok(permanent(&weights)?.re / ch.normalisation())
}

/// Probability with delayed, partially distinguishable wavepackets and an
/// energy-independent σ.
///
/// Integrating the energies of the two amplitude copies leaves, for each pair
/// of permutations (P, P'), one wavepacket overlap per outgoing slot. Writing
/// ρ = P'⁻¹P, the energy carried to slot P(i) pairs particle i with particle
/// ρ(i), so the (P, P') term carries `Π_i F(z_i − z_ρ(i))`. Summing over P at
/// fixed ρ gives a permanent:
///
/// `P = (1/a!b!) Σ_ρ ε^ρ Π_i F(z_i − z_ρ(i)) · perm(W^ρ)`,
/// `W^ρ_{ik} = M_{ik} · conj(M_{ρ(i),k})`.
pub fn mb_probability_delayed(
    sigma: &ScatteringMatrix,
    ch: &ChannelAssignment,
    delays: &DelayVector,
    wp: &WavepacketConfig,
) -> Result<f64> {
    let n = ch.particles();
    if delays.len() != n {
        return Err(Error::Shape(format!("{} delays for {n} particles", delays.len())));
    }
    let m = transition_submatrix(sigma, ch)?;
    if ch.pauli_blocked() {
        return Ok(0.0);
    }
    let overlaps = DMatrix::from_fn(n, n, |i, j| wp.overlap(delays.diff(i, j)));
    let eps = ch.statistics.epsilon() as f64;
    let mut total = Complex64::new(0.0, 0.0);
    let mut failure = None;
    for_each_permutation(n, |rho| {
        if failure.is_some() {
            return;
        }
        let weight: f64 = (0..n).map(|i| overlaps[(i, rho[i])]).product();
        if weight == 0.0 {
            return;
        }
        let w = DMatrix::from_fn(n, n, |i, k| m[(i, k)] * m[(rho[i], k)].conj());
        let sign = if parity(rho) == 1 { 1.0 } else { eps };
        match permanent(&w) {
            Ok(p) => total += p * (sign * weight),
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(total.re / ch.normalisation())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{sample_cue, SeedSpec, SymmetryClass};

    fn beamsplitter() -> ScatteringMatrix {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(h, 0.0),
                Complex64::new(h, 0.0),
                Complex64::new(h, 0.0),
                Complex64::new(-h, 0.0),
            ],
        );
        ScatteringMatrix::new(m, SymmetryClass::Unitary).unwrap()
    }

    #[test]
    fn hom_dip_and_antibunching() {
        let bs = beamsplitter();
        let bos = ChannelAssignment::new(vec![0, 1], vec![0, 1], Statistics::Boson).unwrap();
        let fer = ChannelAssignment::new(vec![0, 1], vec![0, 1], Statistics::Fermion).unwrap();
        assert!(mb_probability_equal_times(&bs, &bos).unwrap().abs() < 1e-12);
        assert!((mb_probability_equal_times(&bs, &fer).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_particle() {
        let s = sample_cue(5, SeedSpec::new(3, 0)).unwrap();
        let ch = ChannelAssignment::new(vec![1], vec![4], Statistics::Boson).unwrap();
        assert!((mb_amplitude(&s, &ch).unwrap() - s.get(4, 1)).norm() < 1e-15);
        assert!((mb_probability_equal_times(&s, &ch).unwrap() - s.get(4, 1).norm_sqr()).abs() < 1e-15);
    }

    #[test]
    fn pauli_exact_zero() {
        let s = sample_cue(5, SeedSpec::new(3, 1)).unwrap();
        let ch = ChannelAssignment::new(vec![0, 1], vec![3, 3], Statistics::Fermion).unwrap();
        assert_eq!(mb_amplitude(&s, &ch).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(mb_probability_equal_times(&s, &ch).unwrap(), 0.0);
        let ch = ChannelAssignment::new(vec![2, 2], vec![0, 1], Statistics::Fermion).unwrap();
        assert_eq!(mb_probability_equal_times(&s, &ch).unwrap(), 0.0);
    }

    #[test]
    fn channel_range_is_checked() {
        let s = sample_cue(3, SeedSpec::new(3, 2)).unwrap();
        let ch = ChannelAssignment::new(vec![0, 1], vec![1, 3], Statistics::Boson).unwrap();
        assert!(matches!(
            mb_probability_equal_times(&s, &ch),
            Err(Error::ChannelOutOfRange { channel: 3, dim: 3 })
        ));
    }

    #[test]
    fn multiplicity_factorials() {
        let ch = ChannelAssignment::new(vec![0, 0, 0, 1], vec![2, 2, 3, 3], Statistics::Boson).unwrap();
        assert_eq!(ch.incoming_multiplicity_factorial(), 6);
        assert_eq!(ch.outgoing_multiplicity_factorial(), 4);
        assert!(!ch.outgoing_singly_occupied());
        assert!(!ch.overlaps());
    }

    #[test]
    fn mismatched_lengths() {
        assert!(ChannelAssignment::new(vec![0, 1], vec![1], Statistics::Boson).is_err());
        assert!(ChannelAssignment::new(vec![], vec![], Statistics::Boson).is_err());
    }

    #[test]
    fn delayed_limits_on_beamsplitter() {
        let bs = beamsplitter();
        let wp = WavepacketConfig::gaussian(1.0, 50.0, 1.0, 0.0).unwrap();
        let ch = ChannelAssignment::new(vec![0, 1], vec![0, 1], Statistics::Boson).unwrap();
        let far = mb_probability_delayed(&bs, &ch, &DelayVector::new(vec![0.0, 1e3]), &wp).unwrap();
        assert!((far - 0.5).abs() < 1e-6);
        let same = mb_probability_delayed(&bs, &ch, &DelayVector::zeros(2), &wp).unwrap();
        assert!((same - mb_probability_equal_times(&bs, &ch).unwrap()).abs() < 1e-12);
    }
}
