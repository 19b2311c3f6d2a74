//! Ensemble averages in closed form: first moments for both symmetry classes
//! and statistics, unitary Weingarten class coefficients, exact second
//! moments by Weingarten summation, and leading-order variances.
//!
//! Conventions: `P̃` is the average of |Ã|² for one fixed ordering of distinct
//! channels, where Ã is the symmetrised amplitude divided by √n!. With
//! coinciding channels the amplitude moment becomes `P̂ = a! b! P̃` (bosons),
//! and the probability average is `⟨P⟩ = n! P̃` in every case.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::amplitudes::{ChannelAssignment, Statistics};
use crate::ensembles::SymmetryClass;
use crate::error::{Error, Result};
use crate::symmetric::{character, cycle_type, factorial, for_each_permutation, partitions, Partition};

/// Largest n accepted by [`weingarten_unitary`].
pub const MAX_WEINGARTEN_ORDER: u32 = 8;

/// Largest n accepted by [`second_moment_exact`].
pub const MAX_SECOND_MOMENT_ORDER: u32 = 3;

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn big_factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// Converts an exact rational to the nearest double, also for huge
/// numerators and denominators.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    let shift = r.numer().bits() as i64 - r.denom().bits() as i64;
    let target = 60i64;
    let scaled = if shift > target {
        r / BigRational::from_integer(BigInt::one() << (shift - target) as usize)
    } else {
        r * BigRational::from_integer(BigInt::one() << (target - shift) as usize)
    };
    let v = scaled.to_integer().to_f64().unwrap_or(f64::NAN);
    v * 2f64.powi((shift - target) as i32)
}

/// Rising product Π_{l=0}^{n−1} (N + step·l) as an exact integer.
fn product(n_channels: i64, n: u32, step: i64) -> BigInt {
    (0..n as i64).fold(BigInt::one(), |acc, l| acc * BigInt::from(n_channels + step * l))
}

/// P̃ for one ordering of distinct channels, with coinciding-channel rules
/// left to the caller. Zero where the Γ-form has a pole in the denominator's
/// reciprocal (too many fermions).
///
/// - unitary bosons: Γ(N)/Γ(N+n)
/// - unitary fermions: Γ(N−n+1)/Γ(N+1)
/// - orthogonal bosons: Γ(N)/Γ(N+n) · (N+n−1)/(N+2n−1)
/// - orthogonal fermions: Γ(N−n+2)/Γ(N+2)
pub fn per_ordering_moment(n: u32, n_channels: u32, symmetry: SymmetryClass, statistics: Statistics) -> BigRational {
    let nn = n_channels as i64;
    let ni = n as i64;
    match (symmetry, statistics) {
        (SymmetryClass::Unitary, Statistics::Boson) => {
            BigRational::new(BigInt::one(), product(nn, n, 1))
        }
        (SymmetryClass::Unitary, Statistics::Fermion) => {
            let d = product(nn, n, -1);
            if d.is_zero() {
                BigRational::zero()
            } else {
                BigRational::new(BigInt::one(), d)
            }
        }
        (SymmetryClass::Orthogonal, Statistics::Boson) => {
            if n == 0 {
                return BigRational::one();
            }
            BigRational::new(BigInt::one(), product(nn, n, 1)) * rat(nn + ni - 1) / rat(nn + 2 * ni - 1)
        }
        (SymmetryClass::Orthogonal, Statistics::Fermion) => {
            let d = product(nn + 1, n, -1);
            if d.is_zero() {
                BigRational::zero()
            } else {
                BigRational::new(BigInt::one(), d)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentFormulaResult {
    /// P̃, per ordering of distinct channels.
    pub per_ordering: BigRational,
    /// P̂ = ⟨|Ã|²⟩ including coinciding-channel factors.
    pub amplitude_moment: BigRational,
    /// ⟨P⟩, the averaged probability of the outgoing configuration.
    pub probability: BigRational,
    pub beta: u8,
    pub epsilon: i32,
    pub n: u32,
    pub n_channels: u32,
}

impl MomentFormulaResult {
    pub fn probability_f64(&self) -> f64 {
        rational_to_f64(&self.probability)
    }
}

/// Channel-occupation data needed by [`first_moment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Occupation {
    /// **a**! = Π mul(a_i)!
    pub a_mult_factorial: u128,
    /// **b**! = Π mul(b_i)!
    pub b_mult_factorial: u128,
    /// Whether any incoming channel is also an outgoing one.
    pub overlapping: bool,
}

impl Occupation {
    pub fn distinct() -> Self {
        Self {
            a_mult_factorial: 1,
            b_mult_factorial: 1,
            overlapping: false,
        }
    }

    pub fn of(ch: &ChannelAssignment) -> Self {
        Self {
            a_mult_factorial: ch.incoming_multiplicity_factorial(),
            b_mult_factorial: ch.outgoing_multiplicity_factorial(),
            overlapping: ch.overlaps(),
        }
    }
}

/// Ensemble average of the probability at equal times and zero dwell time.
///
/// Bosons with coinciding channels pick up **a**!**b**! in the amplitude
/// moment, fermions vanish. The orthogonal class is only available for
/// disjoint incoming and outgoing channels.
pub fn first_moment(
    n: u32,
    n_channels: u32,
    symmetry: SymmetryClass,
    statistics: Statistics,
    occupation: Occupation,
) -> Result<MomentFormulaResult> {
    if n == 0 || n_channels == 0 {
        return Err(Error::Domain(format!(
            "first moment needs n ≥ 1 and N ≥ 1, got n={n}, N={n_channels}"
        )));
    }
    if symmetry == SymmetryClass::Orthogonal && occupation.overlapping {
        return Err(Error::UnsupportedRegime(
            "orthogonal class requires disjoint incoming and outgoing channels".into(),
        ));
    }
    let coinciding = occupation.a_mult_factorial > 1 || occupation.b_mult_factorial > 1;
    let per_ordering = per_ordering_moment(n, n_channels, symmetry, statistics);
    let (amplitude_moment, probability) = match statistics {
        Statistics::Fermion if coinciding => (BigRational::zero(), BigRational::zero()),
        _ => {
            let mult = BigInt::from(occupation.a_mult_factorial) * BigInt::from(occupation.b_mult_factorial);
            (
                &per_ordering * BigRational::from_integer(mult),
                &per_ordering * BigRational::from_integer(big_factorial(n)),
            )
        }
    };
    Ok(MomentFormulaResult {
        per_ordering,
        amplitude_moment,
        probability,
        beta: symmetry.beta(),
        epsilon: statistics.epsilon(),
        n,
        n_channels,
    })
}

/// Single-particle weak-localisation factor ⟨P_SP⟩/⟨P_cl⟩ = (1 − (1 − 2/β)/N)^(−n).
pub fn sp_weak_localization_ratio(n: u32, n_channels: u32, symmetry: SymmetryClass) -> Result<f64> {
    if n_channels <= 1 {
        return Err(Error::Domain(format!("weak-localisation factor needs N > 1, got {n_channels}")));
    }
    Ok(match symmetry {
        SymmetryClass::Unitary => 1.0,
        SymmetryClass::Orthogonal => (1.0 + 1.0 / n_channels as f64).powi(-(n as i32)),
    })
}

/// Classical probability (n!/**b**!) N^(−n).
pub fn classical_probability(n: u32, n_channels: u32, b_mult_factorial: u128) -> f64 {
    factorial(n) as f64 / b_mult_factorial as f64 * (n_channels as f64).powi(-(n as i32))
}

fn weingarten_sum(mu: &Partition, n_channels: u32, skip_singular: bool) -> Result<BigRational> {
    let n = mu.size();
    let mut total = BigRational::zero();
    for lambda in partitions(n) {
        let content = lambda.content_product(n_channels as i64);
        if content.is_zero() {
            if skip_singular {
                continue;
            }
            return Err(Error::Domain(format!(
                "Weingarten function is singular at N={n_channels} for |μ|={n}"
            )));
        }
        let chi = character(&lambda, mu)?;
        let f = BigInt::from(lambda.dimension());
        total += BigRational::new(f * BigInt::from(chi), content);
    }
    Ok(total / BigRational::from_integer(big_factorial(n)))
}

/// Unitary Weingarten class coefficient
/// `V_N(μ) = (1/n!) Σ_λ f^λ χ^λ(μ) / C_λ(N)` for N ≥ n.
pub fn weingarten_unitary(mu: &Partition, n_channels: u32) -> Result<BigRational> {
    let n = mu.size();
    if n > MAX_WEINGARTEN_ORDER {
        return Err(Error::Resource(format!(
            "Weingarten order {n} exceeds the limit {MAX_WEINGARTEN_ORDER}"
        )));
    }
    if n_channels < n {
        return Err(Error::Domain(format!(
            "Weingarten coefficient requires N ≥ n, got N={n_channels}, n={n}"
        )));
    }
    weingarten_sum(mu, n_channels, false)
}

/// Weingarten coefficient valid for any N ≥ 1: representations with more
/// than N rows are dropped, which is the correct moment formula for N < n.
pub fn weingarten_unitary_general(mu: &Partition, n_channels: u32) -> Result<BigRational> {
    if n_channels == 0 {
        return Err(Error::InvalidDimension("N must be at least 1".into()));
    }
    weingarten_sum(mu, n_channels, true)
}

/// `L_n = ⟨|Ã_n|⁴⟩` for distinct channels in the unitary class, from the
/// Weingarten expansion of the 2n-fold moment in which every channel appears
/// twice.
pub fn second_moment_exact(n: u32, n_channels: u32, statistics: Statistics) -> Result<BigRational> {
    if n > MAX_SECOND_MOMENT_ORDER {
        return Err(Error::Resource(format!(
            "exact second moment limited to n ≤ {MAX_SECOND_MOMENT_ORDER}, got {n}"
        )));
    }
    if n_channels == 0 {
        return Err(Error::InvalidDimension("N must be at least 1".into()));
    }
    if n == 0 {
        return Ok(BigRational::one());
    }
    let nu = n as usize;
    let two_n = 2 * nu;
    let eps = statistics.epsilon();

    let mut perms: Vec<(Vec<usize>, i32)> = Vec::new();
    for_each_permutation(nu, |p| perms.push((p.to_vec(), crate::symmetric::parity(p))));

    // σ permutes the 2n incoming slots; slot k and k+n carry the same channel.
    let mut sigmas: Vec<Vec<usize>> = Vec::new();
    for mask in 0..(1usize << nu) {
        let mut s: Vec<usize> = (0..two_n).collect();
        for k in 0..nu {
            if mask & (1 << k) != 0 {
                s.swap(k, k + nu);
            }
        }
        sigmas.push(s);
    }

    let mut wg_cache: HashMap<Partition, BigRational> = HashMap::new();
    let mut total = BigRational::zero();
    // outgoing labels of the 2n unconjugated and conjugated factors
    let mut b = vec![0usize; two_n];
    let mut beta = vec![0usize; two_n];
    for (p, sp) in &perms {
        for (r, sr) in &perms {
            b[..nu].copy_from_slice(&p[..nu]);
            b[nu..].copy_from_slice(&r[..nu]);
            for (pp, spp) in &perms {
                for (rp, srp) in &perms {
                    beta[..nu].copy_from_slice(&pp[..nu]);
                    beta[nu..].copy_from_slice(&rp[..nu]);
                    let sign = if eps == 1 { 1 } else { sp * sr * spp * srp };
                    // every π with b_k = β_π(k): each label occurs twice in β
                    let mut positions = vec![[usize::MAX; 2]; nu];
                    for (j, &label) in beta.iter().enumerate() {
                        let slot = &mut positions[label];
                        if slot[0] == usize::MAX {
                            slot[0] = j;
                        } else {
                            slot[1] = j;
                        }
                    }
                    let mut term = BigRational::zero();
                    for choice in 0..(1usize << nu) {
                        let mut pi = vec![0usize; two_n];
                        let mut used = vec![0u8; nu];
                        for k in 0..two_n {
                            let label = b[k];
                            let first = used[label] == 0;
                            let flip = choice & (1 << label) != 0;
                            pi[k] = positions[label][if first != flip { 0 } else { 1 }];
                            used[label] += 1;
                        }
                        for s in &sigmas {
                            // σ is an involution, so σ⁻¹π = σ∘π
                            let comp: Vec<usize> = pi.iter().map(|&x| s[x]).collect();
                            let ct = cycle_type(&comp);
                            let wg = match wg_cache.get(&ct) {
                                Some(w) => w.clone(),
                                None => {
                                    let w = weingarten_unitary_general(&ct, n_channels)?;
                                    wg_cache.insert(ct, w.clone());
                                    w
                                }
                            };
                            term += wg;
                        }
                    }
                    if sign == 1 {
                        total += term;
                    } else {
                        total -= term;
                    }
                }
            }
        }
    }
    let nf = BigRational::from_integer(big_factorial(n));
    Ok(total / (&nf * &nf))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeadingOrder {
    /// n / N^{2n}
    pub variance: f64,
    /// (n + 1) / N^{2n}
    pub second_moment: f64,
}

/// Leading large-N behaviour of the variance and second moment of |Ã_n|².
pub fn variance_leading_order(n: u32, n_channels: u32) -> LeadingOrder {
    let scale = (n_channels as f64).powi(-2 * n as i32);
    LeadingOrder {
        variance: n as f64 * scale,
        second_moment: (n as f64 + 1.0) * scale,
    }
}

/// Exact n=2 second moment for the orthogonal class,
/// (3N² + 5N − 16) / (N(N² − 4)(N + 1)(N + 3)(N + 7)).
pub fn second_moment_orthogonal_n2(n_channels: u32) -> Result<BigRational> {
    let nn = n_channels as i64;
    let den = nn * (nn * nn - 4) * (nn + 1) * (nn + 3) * (nn + 7);
    if den == 0 {
        return Err(Error::Domain(format!("formula is singular at N={n_channels}")));
    }
    Ok(BigRational::new(BigInt::from(3 * nn * nn + 5 * nn - 16), BigInt::from(den)))
}

/// Exact n=1 second moment for the orthogonal class, 2/(N(N+3)).
pub fn second_moment_orthogonal_n1(n_channels: u32) -> BigRational {
    let nn = n_channels as i64;
    BigRational::new(BigInt::from(2), BigInt::from(nn * (nn + 3)))
}

/// The unitary boson moment 1/(N(N+1)…(N+n−1)) continued to any integer N,
/// `None` at its poles. Fermions follow from P̃⁻_n(N) = (−1)ⁿ P̃⁺_n(−N).
pub fn unitary_boson_at(n: u32, n_channels: i64) -> Option<BigRational> {
    let d = product(n_channels, n, 1);
    if d.is_zero() {
        None
    } else {
        Some(BigRational::new(BigInt::one(), d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn p(v: &[u32]) -> Partition {
        Partition::new(v.to_vec())
    }

    #[test]
    fn first_moment_examples() {
        let m = first_moment(2, 4, SymmetryClass::Unitary, Statistics::Boson, Occupation::distinct()).unwrap();
        assert_eq!(m.per_ordering, r(1, 20));
        assert_eq!(m.probability, r(1, 10));
        let m = first_moment(3, 5, SymmetryClass::Orthogonal, Statistics::Fermion, Occupation::distinct()).unwrap();
        assert_eq!(m.per_ordering, r(1, 120));
        let occ = Occupation {
            a_mult_factorial: 1,
            b_mult_factorial: 2,
            overlapping: false,
        };
        let m = first_moment(2, 4, SymmetryClass::Unitary, Statistics::Fermion, occ).unwrap();
        assert!(m.probability.is_zero() && m.amplitude_moment.is_zero());
        let m = first_moment(2, 4, SymmetryClass::Unitary, Statistics::Boson, occ).unwrap();
        assert_eq!(m.amplitude_moment, r(1, 10));
        assert_eq!(m.probability, r(1, 10));
    }

    #[test]
    fn orthogonal_overlap_is_unsupported() {
        let occ = Occupation {
            overlapping: true,
            ..Occupation::distinct()
        };
        assert!(matches!(
            first_moment(2, 6, SymmetryClass::Orthogonal, Statistics::Boson, occ),
            Err(Error::UnsupportedRegime(_))
        ));
        assert!(first_moment(2, 6, SymmetryClass::Unitary, Statistics::Boson, occ).is_ok());
    }

    #[test]
    fn low_order_tables() {
        for nn in 5..12i64 {
            let n = nn as u32;
            let u = |k| per_ordering_moment(k, n, SymmetryClass::Unitary, Statistics::Boson);
            let o = |k| per_ordering_moment(k, n, SymmetryClass::Orthogonal, Statistics::Boson);
            let of = |k| per_ordering_moment(k, n, SymmetryClass::Orthogonal, Statistics::Fermion);
            assert_eq!(u(3), r(1, nn * (nn + 1) * (nn + 2)));
            assert_eq!(o(1), r(1, nn + 1));
            assert_eq!(o(2), r(1, nn * (nn + 3)));
            assert_eq!(o(3), r(1, nn * (nn + 1) * (nn + 5)));
            assert_eq!(o(4), r(1, nn * (nn + 1) * (nn + 2) * (nn + 7)));
            assert_eq!(o(5), r(1, nn * (nn + 1) * (nn + 2) * (nn + 3) * (nn + 9)));
            assert_eq!(of(2), r(1, (nn + 1) * nn));
            assert_eq!(of(4), r(1, (nn + 1) * nn * (nn - 1) * (nn - 2)));
        }
    }

    #[test]
    fn too_many_fermions_vanish() {
        assert!(per_ordering_moment(4, 3, SymmetryClass::Unitary, Statistics::Fermion).is_zero());
        assert!(!per_ordering_moment(3, 3, SymmetryClass::Unitary, Statistics::Fermion).is_zero());
    }

    #[test]
    fn weak_localisation() {
        assert_eq!(sp_weak_localization_ratio(3, 7, SymmetryClass::Unitary).unwrap(), 1.0);
        assert!((sp_weak_localization_ratio(1, 9, SymmetryClass::Orthogonal).unwrap() - 0.9).abs() < 1e-15);
        assert!(sp_weak_localization_ratio(1, 1, SymmetryClass::Orthogonal).is_err());
    }

    #[test]
    fn classical_values() {
        assert_eq!(classical_probability(2, 4, 1), 0.125);
        assert_eq!(classical_probability(2, 4, 2), 0.0625);
        assert!((classical_probability(3, 10, 1) - 6e-3).abs() < 1e-18);
    }

    #[test]
    fn weingarten_small_cases() {
        for nn in 3..10i64 {
            let n = nn as u32;
            assert_eq!(weingarten_unitary(&p(&[1]), n).unwrap(), r(1, nn));
            let two = weingarten_unitary(&p(&[1, 1]), n).unwrap() + weingarten_unitary(&p(&[2]), n).unwrap();
            assert_eq!(two, r(1, nn * (nn + 1)));
            let three = weingarten_unitary(&p(&[1, 1, 1]), n).unwrap()
                + rat(3) * weingarten_unitary(&p(&[2, 1]), n).unwrap()
                + rat(2) * weingarten_unitary(&p(&[3]), n).unwrap();
            assert_eq!(three, r(1, nn * (nn + 1) * (nn + 2)));
        }
        // Wg(2) = −1/(N(N²−1))
        assert_eq!(weingarten_unitary(&p(&[2]), 4).unwrap(), r(-1, 60));
    }

    #[test]
    fn weingarten_domain() {
        assert!(matches!(weingarten_unitary(&p(&[1, 1, 1]), 2), Err(Error::Domain(_))));
        assert!(matches!(weingarten_unitary(&p(&[1; 9]), 20), Err(Error::Resource(_))));
        // restricted form at N=1: only the trivial representation survives, and
        // E|u|⁴ = 1 = 2·Wg(e) + 2·Wg((12))
        assert_eq!(weingarten_unitary_general(&p(&[2]), 1).unwrap(), r(1, 4));
        assert_eq!(weingarten_unitary_general(&p(&[1, 1]), 1).unwrap(), r(1, 4));
    }

    #[test]
    fn second_moment_n1_and_n2() {
        for nn in [2i64, 3, 5, 9] {
            let n = nn as u32;
            assert_eq!(second_moment_exact(1, n, Statistics::Boson).unwrap(), r(2, nn * (nn + 1)));
            assert_eq!(
                second_moment_exact(2, n, Statistics::Boson).unwrap(),
                r(3 * nn * nn - nn + 2, nn * nn * (nn * nn - 1) * (nn + 2) * (nn + 3))
            );
        }
        assert!(matches!(second_moment_exact(4, 10, Statistics::Boson), Err(Error::Resource(_))));
    }

    #[test]
    fn fermion_second_moment_two_channels() {
        // N=2, n=2: |det σ|⁴ = 1 for any unitary, so L = 1/2!² · 1
        assert_eq!(second_moment_exact(2, 2, Statistics::Fermion).unwrap(), r(1, 4));
    }

    #[test]
    fn leading_order_values() {
        let l = variance_leading_order(1, 100);
        assert!((l.second_moment - 2e-4).abs() < 1e-18);
        assert_eq!(variance_leading_order(0, 7).second_moment, 1.0);
    }

    #[test]
    fn rational_conversion_of_huge_values() {
        let big = BigRational::new(BigInt::from(3) * (BigInt::one() << 2000usize), BigInt::one() << 2001usize);
        assert!((rational_to_f64(&big) - 1.5).abs() < 1e-15);
    }
}
