//! Generating functions of the semiclassical diagram classes as exact
//! truncated power series in s, and the scaling-limit sums built on the
//! pairwise (two-particle) correlations.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::amplitudes::{DelayVector, Statistics};
use crate::ensembles::SymmetryClass;
use crate::error::{Error, Result};
use crate::moments::rational_to_f64;
use crate::wavepackets::{q2_kernel, WavepacketConfig};

/// Largest truncation order of the named series constructors.
pub const MAX_SERIES_ORDER: usize = 30;

/// Largest n accepted by [`pairwise_exact_coefficient`].
pub const MAX_PAIRWISE_N: u32 = 400;

/// Largest n accepted by [`two_condensate_finite_n`].
pub const MAX_TWO_CONDENSATE_N: u32 = 60;

/// Largest n accepted by [`contraction_sum_bruteforce`].
pub const MAX_BRUTEFORCE_N: usize = 12;

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Truncated power series Σ_{m ≤ order} c_m s^m with exact rational
/// coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PowerSeries {
    coeffs: Vec<BigRational>,
}

impl PowerSeries {
    /// Pads with zeros or truncates to `order`.
    pub fn new(mut coeffs: Vec<BigRational>, order: usize) -> Self {
        coeffs.resize(order + 1, BigRational::zero());
        Self { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        Self::new(Vec::new(), order)
    }

    pub fn one(order: usize) -> Self {
        Self::new(vec![BigRational::one()], order)
    }

    /// c·s^power
    pub fn monomial(c: BigRational, power: usize, order: usize) -> Self {
        let mut s = Self::zero(order);
        if power <= order {
            s.coeffs[power] = c;
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coefficients(&self) -> &[BigRational] {
        &self.coeffs
    }

    /// Coefficient of s^m; zero beyond the truncation order would be a lie,
    /// so that is an error.
    pub fn coefficient(&self, m: usize) -> Result<&BigRational> {
        self.coeffs.get(m).ok_or(Error::Order {
            requested: m,
            available: self.order(),
        })
    }

    pub fn truncate(&self, order: usize) -> Self {
        Self::new(self.coeffs[..=order.min(self.order())].to_vec(), order)
    }

    fn common_order(&self, other: &Self) -> usize {
        self.order().min(other.order())
    }

    pub fn add(&self, other: &Self) -> Self {
        let order = self.common_order(other);
        Self::new((0..=order).map(|m| &self.coeffs[m] + &other.coeffs[m]).collect(), order)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let order = self.common_order(other);
        Self::new((0..=order).map(|m| &self.coeffs[m] - &other.coeffs[m]).collect(), order)
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|x| x * c).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(&rat(-1))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let order = self.common_order(other);
        let mut out = vec![BigRational::zero(); order + 1];
        for (i, a) in self.coeffs.iter().enumerate().take(order + 1) {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate().take(order + 1 - i) {
                out[i + j] += a * b;
            }
        }
        Self { coeffs: out }
    }

    /// exp(g) for g(0) = 0, via m·e_m = Σ_k k g_k e_{m−k}.
    pub fn exp(&self) -> Result<Self> {
        if !self.coeffs[0].is_zero() {
            return Err(Error::Domain("exp needs a series without constant term".into()));
        }
        let order = self.order();
        let mut e = vec![BigRational::zero(); order + 1];
        e[0] = BigRational::one();
        for m in 1..=order {
            let mut acc = BigRational::zero();
            for k in 1..=m {
                if !self.coeffs[k].is_zero() {
                    acc += &self.coeffs[k] * &e[m - k] * rat(k as i64);
                }
            }
            e[m] = acc / rat(m as i64);
        }
        Ok(Self { coeffs: e })
    }

    /// log(f) for f(0) = 1, via m·l_m = m f_m − Σ_{k<m} k l_k f_{m−k}.
    pub fn log(&self) -> Result<Self> {
        if !self.coeffs[0].is_one() {
            return Err(Error::Domain("log needs a series with constant term 1".into()));
        }
        let order = self.order();
        let mut l = vec![BigRational::zero(); order + 1];
        for m in 1..=order {
            let mut acc = &self.coeffs[m] * rat(m as i64);
            for k in 1..m {
                if !l[k].is_zero() {
                    acc -= &l[k] * &self.coeffs[m - k] * rat(k as i64);
                }
            }
            l[m] = acc / rat(m as i64);
        }
        Ok(Self { coeffs: l })
    }

    /// f^r for f(0) = 1.
    pub fn pow(&self, r: &BigRational) -> Result<Self> {
        self.log()?.scale(r).exp()
    }

    /// f(g(s)) for g(0) = 0, by Horner's scheme.
    pub fn compose(&self, inner: &Self) -> Result<Self> {
        if !inner.coeffs[0].is_zero() {
            return Err(Error::Domain("composition needs an inner series without constant term".into()));
        }
        let order = self.common_order(inner);
        let mut acc = Self::zero(order);
        for c in self.coeffs[..=order].iter().rev() {
            acc = acc.mul(inner);
            acc.coeffs[0] += c;
        }
        Ok(acc)
    }

    /// f(−s)
    pub fn reflect(&self) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(m, c)| if m % 2 == 1 { -c } else { c.clone() })
                .collect(),
        }
    }

    /// f(s)/s for f(0) = 0; the order drops by one.
    pub fn divide_by_s(&self) -> Result<Self> {
        if !self.coeffs[0].is_zero() {
            return Err(Error::Domain("series has a constant term".into()));
        }
        if self.order() == 0 {
            return Err(Error::Order {
                requested: 1,
                available: 0,
            });
        }
        Ok(Self {
            coeffs: self.coeffs[1..].to_vec(),
        })
    }

    pub fn evaluate(&self, s: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * s + rational_to_f64(c))
    }

    /// Coefficients as `[numerator, denominator]` string pairs, the layout
    /// used by golden files.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.coeffs
                .iter()
                .map(|c| serde_json::json!([c.numer().to_string(), c.denom().to_string()]))
                .collect(),
        )
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let arr = value
            .as_array()
            .ok_or_else(|| Error::Parse("series JSON must be an array".into()))?;
        if arr.is_empty() {
            return Err(Error::Parse("series JSON must not be empty".into()));
        }
        let mut coeffs = Vec::with_capacity(arr.len());
        for item in arr {
            let pair = item
                .as_array()
                .filter(|p| p.len() == 2)
                .ok_or_else(|| Error::Parse("each coefficient must be a [num, den] pair".into()))?;
            let part = |v: &serde_json::Value| -> Result<BigInt> {
                let s = match v {
                    serde_json::Value::String(s) => s.clone(),
                    serde_json::Value::Number(n) => n.to_string(),
                    _ => return Err(Error::Parse(format!("bad coefficient entry {v}"))),
                };
                s.parse::<BigInt>().map_err(|e| Error::Parse(format!("{s:?}: {e}")))
            };
            let den = part(&pair[1])?;
            if den.is_zero() {
                return Err(Error::Parse("zero denominator".into()));
            }
            coeffs.push(BigRational::new(part(&pair[0])?, den));
        }
        let order = coeffs.len() - 1;
        Ok(Self::new(coeffs, order))
    }
}

impl fmt::Display for PowerSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (m, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match m {
                0 => write!(f, "{c}")?,
                1 => write!(f, "({c})s")?,
                _ => write!(f, "({c})s^{m}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O(s^{})", self.order() + 1)
    }
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_SERIES_ORDER {
        return Err(Error::Resource(format!(
            "series order {order} exceeds the limit {MAX_SERIES_ORDER}"
        )));
    }
    Ok(())
}

fn check_channels(n_channels: u32) -> Result<BigRational> {
    if n_channels == 0 {
        return Err(Error::InvalidDimension("N must be at least 1".into()));
    }
    Ok(rat(n_channels as i64))
}

fn tree_series_unchecked(nn: &BigRational, order: usize) -> PowerSeries {
    // fixed point of F = (s − F²)/N; each pass fixes one more coefficient
    let s = PowerSeries::monomial(BigRational::one(), 1, order);
    let inv_n = nn.recip();
    let mut f = PowerSeries::zero(order);
    for _ in 0..order {
        f = s.sub(&f.mul(&f)).scale(&inv_n);
    }
    f
}

/// Tree generating function F(s) = s/N − s²/N³ + 2s³/N⁵ − …, the solution of
/// N F + F² = s.
pub fn tree_series(n_channels: u32, order: usize) -> Result<PowerSeries> {
    check_order(order)?;
    let nn = check_channels(n_channels)?;
    Ok(tree_series_unchecked(&nn, order))
}

/// K₀(s) = ∫₀ˢ F(t)/t dt.
pub fn k0_series(n_channels: u32, order: usize) -> Result<PowerSeries> {
    let f = tree_series(n_channels, order)?;
    let coeffs = f
        .coefficients()
        .iter()
        .enumerate()
        .map(|(m, c)| if m == 0 { BigRational::zero() } else { c / rat(m as i64) })
        .collect();
    Ok(PowerSeries::new(coeffs, order))
}

pub fn exp_k0_series(n_channels: u32, order: usize) -> Result<PowerSeries> {
    k0_series(n_channels, order)?.exp()
}

/// κ₁(s) = −½ ln(1 − F⁴/s²).
pub fn kappa1_series(n_channels: u32, order: usize) -> Result<PowerSeries> {
    check_order(order)?;
    let nn = check_channels(n_channels)?;
    let f = tree_series_unchecked(&nn, order + 1);
    let g = f.divide_by_s()?; // F/s, order `order`
    let g2 = g.mul(&g);
    let f4_over_s2 = g2.mul(&g2).mul(&PowerSeries::monomial(BigRational::one(), 2, order));
    let inner = PowerSeries::one(order).sub(&f4_over_s2);
    Ok(inner.log()?.scale(&BigRational::new((-1).into(), 2.into())))
}

/// K₁(s) = −¼ ln(1 + 4s/N²).
pub fn k1_series(n_channels: u32, order: usize) -> Result<PowerSeries> {
    check_order(order)?;
    let nn = check_channels(n_channels)?;
    let x = PowerSeries::monomial(rat(4) / (&nn * &nn), 1, order);
    Ok(PowerSeries::one(order)
        .add(&x)
        .log()?
        .scale(&BigRational::new((-1).into(), 4.into())))
}

/// K₂(s) = [(1 + 6x)(1 + 4x)^(−3/2) − 1] / (12N) with x = s/N².
pub fn k2_series(n_channels: u32, order: usize) -> Result<PowerSeries> {
    check_order(order)?;
    let nn = check_channels(n_channels)?;
    let x = PowerSeries::monomial((&nn * &nn).recip(), 1, order);
    let one = PowerSeries::one(order);
    let num = one.add(&x.scale(&rat(6)));
    let den = one.add(&x.scale(&rat(4))).pow(&BigRational::new((-3).into(), 2.into()))?;
    Ok(num.mul(&den).sub(&one).scale(&(rat(12) * &nn).recip()))
}

/// Diagram classes that can enter the exponent of [`ratio_from_series`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SeriesTerm {
    K0,
    Kappa1,
    K1,
    K2,
}

impl SeriesTerm {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "k0" => Ok(SeriesTerm::K0),
            "kappa1" => Ok(SeriesTerm::Kappa1),
            "k1" => Ok(SeriesTerm::K1),
            "k2" => Ok(SeriesTerm::K2),
            other => Err(Error::Config(format!("unknown series term {other:?}"))),
        }
    }
}

/// Exponent of the generating function for the chosen statistics.
///
/// Orthogonal class: K₀ + 2κ₁ + K₁ + K₂; unitary: K₀ + κ₁ + K₂ (K₁ is a
/// time-reversal correction and is ignored). Fermions use
/// K(s) → −K(−s) for K₀, K₁, K₂ and κ₁(s) → κ₁(−s).
pub fn generating_exponent(
    n_channels: u32,
    order: usize,
    symmetry: SymmetryClass,
    statistics: Statistics,
    include: &BTreeSet<SeriesTerm>,
) -> Result<PowerSeries> {
    let fermion = statistics == Statistics::Fermion;
    let odd = |k: PowerSeries| if fermion { k.reflect().neg() } else { k };
    let even = |k: PowerSeries| if fermion { k.reflect() } else { k };
    let mut exponent = PowerSeries::zero(order);
    for term in include {
        let piece = match term {
            SeriesTerm::K0 => odd(k0_series(n_channels, order)?),
            SeriesTerm::Kappa1 => {
                let k = even(kappa1_series(n_channels, order)?);
                match symmetry {
                    SymmetryClass::Orthogonal => k.scale(&rat(2)),
                    SymmetryClass::Unitary => k,
                }
            }
            SeriesTerm::K1 => match symmetry {
                SymmetryClass::Orthogonal => odd(k1_series(n_channels, order)?),
                SymmetryClass::Unitary => continue,
            },
            SeriesTerm::K2 => odd(k2_series(n_channels, order)?),
        };
        exponent = exponent.add(&piece);
    }
    Ok(exponent)
}

/// ⟨P⟩/⟨P_cl⟩ predicted by the included diagram classes:
/// Nⁿ n! [sⁿ] exp(exponent).
pub fn ratio_from_series(
    n: u32,
    n_channels: u32,
    symmetry: SymmetryClass,
    statistics: Statistics,
    include: &BTreeSet<SeriesTerm>,
) -> Result<BigRational> {
    if n as usize > MAX_SERIES_ORDER {
        return Err(Error::Order {
            requested: n as usize,
            available: MAX_SERIES_ORDER,
        });
    }
    let order = n as usize;
    let g = generating_exponent(n_channels, order, symmetry, statistics, include)?.exp()?;
    let nn = BigInt::from(n_channels);
    let scale = num_traits::pow(nn, n as usize) * (1..=n).fold(BigInt::one(), |a, k| a * BigInt::from(k));
    Ok(g.coefficient(order)? * BigRational::from_integer(scale))
}

/// n! [sⁿ] exp(s − ε s²/(2N)) = Σ_l n!/((n − 2l)! l!) (−ε/2N)^l, the ratio
/// when only pairwise correlations are kept.
pub fn pairwise_exact_coefficient(n: u32, n_channels: u64, epsilon: i32) -> Result<BigRational> {
    if n > MAX_PAIRWISE_N {
        return Err(Error::Resource(format!(
            "pairwise coefficient limited to n ≤ {MAX_PAIRWISE_N}, got {n}"
        )));
    }
    if n_channels == 0 {
        return Err(Error::InvalidDimension("N must be at least 1".into()));
    }
    let step = BigRational::new(BigInt::from(-epsilon), BigInt::from(2 * n_channels));
    let mut total = BigRational::zero();
    // n!/((n−2l)! l!) built incrementally
    let mut comb = BigInt::one();
    let mut power = BigRational::one();
    for l in 0..=(n / 2) {
        if l > 0 {
            let a = BigInt::from(n - 2 * l + 2);
            let b = BigInt::from(n - 2 * l + 1);
            comb = comb * a * b / BigInt::from(l);
            power *= &step;
        }
        total += BigRational::from_integer(comb.clone()) * &power;
    }
    Ok(total)
}

/// Channel scaling N = α n^η with statistics ε and condensate imbalance x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub alpha: f64,
    pub eta: f64,
    pub epsilon: i32,
    pub x: f64,
}

impl ScalingSpec {
    pub fn new(alpha: f64, eta: f64, epsilon: i32, x: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Domain(format!("eta must be positive, got {eta}")));
        }
        if epsilon != 1 && epsilon != -1 {
            return Err(Error::Domain(format!("epsilon must be ±1, got {epsilon}")));
        }
        if !(-1.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("imbalance x must lie in [−1, 1], got {x}")));
        }
        Ok(Self { alpha, eta, epsilon, x })
    }

    pub fn channels(&self, n: u32) -> f64 {
        self.alpha * (n as f64).powf(self.eta)
    }

    /// N rounded to the nearest integer, at least 1.
    pub fn channels_rounded(&self, n: u32) -> u64 {
        self.channels(n).round().max(1.0) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BbpRegime {
    /// η < 2: pairwise interference dominates, ratio^ε → 0.
    Saturated,
    /// η = 2: ratio^ε → e^{−1/(2α)}.
    Critical,
    /// η > 2: ratio → 1.
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BbpLimit {
    pub regime: BbpRegime,
    /// Limit of ⟨P⟩/⟨P_cl⟩ itself (infinite for saturated fermions).
    pub value: f64,
    /// False for η ≤ 1, where pairwise dominance is not established.
    pub trusted: bool,
}

/// Large-n limit of ⟨P⟩/⟨P_cl⟩ under N = α n^η.
pub fn bbp_limit(scaling: &ScalingSpec) -> BbpLimit {
    let eps = scaling.epsilon as f64;
    let (regime, value) = if (scaling.eta - 2.0).abs() < 1e-12 {
        (BbpRegime::Critical, (-eps / (2.0 * scaling.alpha)).exp())
    } else if scaling.eta < 2.0 {
        (BbpRegime::Saturated, if scaling.epsilon == 1 { 0.0 } else { f64::INFINITY })
    } else {
        (BbpRegime::Classical, 1.0)
    };
    BbpLimit {
        regime,
        value,
        trusted: scaling.eta > 1.0,
    }
}

fn q2_or_zero(z: f64, wp: &WavepacketConfig) -> Result<f64> {
    if z.is_finite() {
        q2_kernel(z, wp)
    } else {
        Ok(0.0)
    }
}

/// Two macroscopic condensates separated by z under N = α n²:
/// exp[−(ε/4α)((1 + x²)Q⁽²⁾(0) + (1 − x²)Q⁽²⁾(z))]. Infinite z is allowed.
pub fn exponentiated_hom(z: f64, scaling: &ScalingSpec, wp: &WavepacketConfig) -> Result<f64> {
    let x = scaling.x;
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("imbalance x must lie in [−1, 1], got {x}")));
    }
    let q0 = q2_kernel(0.0, wp)?;
    let qz = q2_or_zero(z, wp)?;
    let eps = scaling.epsilon as f64;
    Ok((-eps / (4.0 * scaling.alpha) * ((1.0 + x * x) * q0 + (1.0 - x * x) * qz)).exp())
}

fn binom(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn double_factorial_odd(m: i64) -> BigInt {
    // (2j − 1)!! with (−1)!! = 1
    let mut acc = BigInt::one();
    let mut k = m;
    while k > 1 {
        acc *= BigInt::from(k);
        k -= 2;
    }
    acc
}

/// Number of pairings of n₀ + n₁ indices with l₁ pairs inside block 1, k
/// pairs across, and l − l₁ − k pairs inside block 0.
pub fn contraction_count(n0: u64, n1: u64, l: u64, l1: u64, k: u64) -> BigInt {
    if l1 + k > l || 2 * l1 > n1 || k > n1 - 2 * l1 || k > n0 {
        return BigInt::zero();
    }
    let inner0 = l - l1 - k;
    if 2 * inner0 > n0 - k {
        return BigInt::zero();
    }
    binom(n1, 2 * l1)
        * double_factorial_odd(2 * l1 as i64 - 1)
        * binom(n1 - 2 * l1, k)
        * binom(n0, k)
        * (1..=k).fold(BigInt::one(), |a, i| a * BigInt::from(i))
        * binom(n0 - k, 2 * inner0)
        * double_factorial_odd(2 * inner0 as i64 - 1)
}

/// Block sizes (n₀, n₁) for a fraction of the particles in the delayed
/// condensate; n₁ = round(fraction · n).
pub fn condensate_split(n: u32, n1_fraction: f64) -> Result<(u32, u32)> {
    if !(0.0..=1.0).contains(&n1_fraction) {
        return Err(Error::Domain(format!(
            "condensate fraction must lie in [0, 1], got {n1_fraction}"
        )));
    }
    let n1 = (n1_fraction * n as f64).round() as u32;
    Ok((n - n1, n1))
}

/// Exact pairwise sum for n particles in two wavepackets: n₀ at offset 0 and
/// n₁ at offset z. Each pair contributes −ε/N times Q⁽²⁾ of its separation.
pub fn two_condensate_finite_n(
    n: u32,
    n1_fraction: f64,
    z: f64,
    n_channels: u64,
    epsilon: i32,
    wp: &WavepacketConfig,
) -> Result<f64> {
    if n > MAX_TWO_CONDENSATE_N {
        return Err(Error::Resource(format!(
            "two-condensate sum limited to n ≤ {MAX_TWO_CONDENSATE_N}, got {n}"
        )));
    }
    if n_channels == 0 {
        return Err(Error::InvalidDimension("N must be at least 1".into()));
    }
    let (n0, n1) = condensate_split(n, n1_fraction)?;
    let q0 = q2_kernel(0.0, wp)?;
    let q1 = q2_or_zero(z, wp)?;
    let weight = BigRational::new(BigInt::from(-epsilon), BigInt::from(n_channels));
    let mut total = 0.0;
    let mut w_pow = BigRational::one();
    for l in 0..=(n as u64 / 2) {
        if l > 0 {
            w_pow *= &weight;
        }
        for l1 in 0..=l {
            for k in 0..=(l - l1) {
                let c = contraction_count(n0 as u64, n1 as u64, l, l1, k);
                if c.is_zero() {
                    continue;
                }
                let coeff = rational_to_f64(&(BigRational::from_integer(c) * &w_pow));
                total += coeff * q0.powi((l - k) as i32) * q1.powi(k as i32);
            }
        }
    }
    Ok(total)
}

/// Σ over all partial pairings of the particles of Π_pairs (−ε/N) Q⁽²⁾(z_ij),
/// by explicit enumeration.
pub fn contraction_sum_bruteforce(
    delays: &DelayVector,
    n_channels: u64,
    epsilon: i32,
    wp: &WavepacketConfig,
) -> Result<f64> {
    let n = delays.len();
    if n > MAX_BRUTEFORCE_N {
        return Err(Error::Resource(format!(
            "brute-force contraction sum limited to n ≤ {MAX_BRUTEFORCE_N}, got {n}"
        )));
    }
    if n_channels == 0 {
        return Err(Error::InvalidDimension("N must be at least 1".into()));
    }
    let w = -(epsilon as f64) / n_channels as f64;
    let mut pair = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let q = q2_kernel(delays.diff(i, j), wp)?;
            pair[i][j] = w * q;
            pair[j][i] = w * q;
        }
    }
    fn walk(free: &mut Vec<usize>, pair: &[Vec<f64>]) -> f64 {
        let Some(first) = free.pop() else {
            return 1.0;
        };
        // `first` stays unpaired
        let mut total = walk(free, pair);
        for idx in 0..free.len() {
            let partner = free.remove(idx);
            total += pair[first][partner] * walk(free, pair);
            free.insert(idx, partner);
        }
        free.push(first);
        total
    }
    let mut free: Vec<usize> = (0..n).collect();
    Ok(walk(&mut free, &pair))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn catalan(m: u64) -> i64 {
        (binom(2 * m, m) / BigInt::from(m + 1)).try_into().unwrap()
    }

    #[test]
    fn tree_is_catalan() {
        let f = tree_series(1, 5).unwrap();
        let expect: Vec<BigRational> = [0, 1, -1, 2, -5, 14].iter().map(|&c| r(c, 1)).collect();
        assert_eq!(f.coefficients(), &expect[..]);
        let f = tree_series(3, 12).unwrap();
        for m in 1..=12u64 {
            let sign = if m % 2 == 1 { 1 } else { -1 };
            let den = 3i64.pow(2 * m as u32 - 1);
            assert_eq!(f.coefficient(m as usize).unwrap(), &r(sign * catalan(m - 1), den));
        }
        let f2 = tree_series(2, 3).unwrap();
        assert_eq!(f2.coefficients(), &[r(0, 1), r(1, 2), r(-1, 8), r(1, 16)]);
    }

    #[test]
    fn exp_log_roundtrip() {
        let g = PowerSeries::new(vec![r(0, 1), r(3, 7), r(-2, 5), r(1, 9), r(11, 3)], 4);
        let one_plus = PowerSeries::one(4).add(&g);
        assert_eq!(one_plus.log().unwrap().exp().unwrap(), one_plus);
        assert_eq!(g.exp().unwrap().log().unwrap(), g);
    }

    #[test]
    fn exp_and_log_domains() {
        let c = PowerSeries::new(vec![r(1, 1), r(1, 1)], 3);
        assert!(c.exp().is_err());
        assert!(c.add(&PowerSeries::one(3)).log().is_err());
    }

    #[test]
    fn compose_and_reflect() {
        // 1/(1 − u) ∘ (s + s²) up to s³ = 1 + s + 2s² + 3s³
        let geo = PowerSeries::new(vec![r(1, 1); 4], 3);
        let inner = PowerSeries::new(vec![r(0, 1), r(1, 1), r(1, 1)], 3);
        let c = geo.compose(&inner).unwrap();
        assert_eq!(c.coefficients(), &[r(1, 1), r(1, 1), r(2, 1), r(3, 1)]);
        assert_eq!(inner.reflect().coefficients(), &[r(0, 1), r(-1, 1), r(1, 1), r(0, 1)]);
    }

    #[test]
    fn coefficient_beyond_order_is_an_error() {
        let s = PowerSeries::one(2);
        assert!(matches!(s.coefficient(3), Err(Error::Order { requested: 3, available: 2 })));
    }

    #[test]
    fn kappa1_and_k1_coefficients() {
        let n = 3i64;
        let k = kappa1_series(3, 5).unwrap();
        assert_eq!(k.coefficient(2).unwrap(), &r(1, 2 * n.pow(4)));
        assert_eq!(k.coefficient(3).unwrap(), &r(-2, n.pow(6)));
        assert_eq!(k.coefficient(4).unwrap(), &r(29, 4 * n.pow(8)));
        assert_eq!(k.coefficient(5).unwrap(), &r(-26, n.pow(10)));
        let k1 = k1_series(3, 5).unwrap();
        assert_eq!(k1.coefficient(1).unwrap(), &r(-1, n.pow(2)));
        assert_eq!(k1.coefficient(2).unwrap(), &r(2, n.pow(4)));
        assert_eq!(k1.coefficient(3).unwrap(), &r(-16, 3 * n.pow(6)));
        assert_eq!(k1.coefficient(5).unwrap(), &r(-256, 5 * n.pow(10)));
    }

    #[test]
    fn k2_leading_terms() {
        let n = 2u32;
        let k2 = k2_series(n, 4).unwrap();
        assert!(k2.coefficient(0).unwrap().is_zero());
        assert!(k2.coefficient(1).unwrap().is_zero());
        // x² coefficient: (−3/2·4)·6 + (−3/2)(−5/2)/2·16 = −36 + 30 = −6 → −6/(12N) · N^{-4}
        assert_eq!(k2.coefficient(2).unwrap(), &r(-6, 12 * 2 * 16));
    }

    #[test]
    fn json_roundtrip() {
        let s = exp_k0_series(10, 6).unwrap();
        let back = PowerSeries::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn pairwise_small_cases() {
        assert_eq!(pairwise_exact_coefficient(2, 7, 1).unwrap(), r(6, 7));
        assert_eq!(pairwise_exact_coefficient(2, 7, -1).unwrap(), r(8, 7));
        let v = pairwise_exact_coefficient(4, 8, 1).unwrap();
        // pairings of 4 objects: 6 with one pair, 3 with two, each pair weighted −1/8
        assert_eq!(v, r(1, 1) - r(6, 8) + r(3, 64));
        assert!(matches!(pairwise_exact_coefficient(401, 10, 1), Err(Error::Resource(_))));
    }

    #[test]
    fn bbp_classification() {
        let l = bbp_limit(&ScalingSpec::new(1.0, 2.0, 1, 0.0).unwrap());
        assert_eq!(l.regime, BbpRegime::Critical);
        assert!((l.value - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(bbp_limit(&ScalingSpec::new(3.0, 3.0, 1, 0.0).unwrap()).value, 1.0);
        assert_eq!(bbp_limit(&ScalingSpec::new(1.0, 1.5, 1, 0.0).unwrap()).value, 0.0);
        assert!(!bbp_limit(&ScalingSpec::new(1.0, 0.8, 1, 0.0).unwrap()).trusted);
        assert!(ScalingSpec::new(1.0, 2.0, 1, 1.5).is_err());
    }

    #[test]
    fn contraction_count_factored_form() {
        // product-of-binomials form equals the factorial form
        for (n0, n1) in [(5u64, 4u64), (3, 7), (0, 6), (6, 0), (8, 8)] {
            let n = n0 + n1;
            for l in 0..=n / 2 {
                for l1 in 0..=l {
                    for k in 0..=(l - l1) {
                        let c = contraction_count(n0, n1, l, l1, k);
                        let valid = 2 * l1 + k <= n1 && 2 * l - 2 * l1 - k <= n0;
                        let expect = if valid {
                            let fact = |m: u64| (1..=m).fold(BigInt::one(), |a, i| a * BigInt::from(i));
                            let num = fact(n1) * fact(n0) * binom(l - l1, k);
                            let den = (BigInt::one() << (l - k) as usize)
                                * fact(l1)
                                * fact(l - l1)
                                * fact(n1 - 2 * l1 - k)
                                * fact(n0 + 2 * l1 + k - 2 * l);
                            num / den
                        } else {
                            BigInt::zero()
                        };
                        assert_eq!(c, expect, "n0={n0} n1={n1} l={l} l1={l1} k={k}");
                    }
                }
            }
        }
    }

    #[test]
    fn fraction_out_of_range() {
        let wp = WavepacketConfig::gaussian(1.0, 50.0, 1.0, 0.0).unwrap();
        assert!(matches!(two_condensate_finite_n(4, 1.2, 0.0, 16, 1, &wp), Err(Error::Domain(_))));
    }

    #[test]
    fn bruteforce_resource_limit() {
        let wp = WavepacketConfig::gaussian(1.0, 50.0, 1.0, 0.0).unwrap();
        let d = DelayVector::zeros(13);
        assert!(matches!(contraction_sum_bruteforce(&d, 100, 1, &wp), Err(Error::Resource(_))));
    }
}
