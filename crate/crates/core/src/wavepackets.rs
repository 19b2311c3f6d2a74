//! Wavepacket overlaps and the dwell-time dephasing kernels built from them.
//!
//! A packet is described by its real longitudinal envelope X(x), with |X|²
//! normalised to one. Everything is expressed in length units: a time t enters
//! as the distance v·t travelled at the group velocity.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use libm::erfc;

use crate::amplitudes::DelayVector;
use crate::ensembles::SymmetryClass;
use crate::error::{Error, Result};
use crate::moments::sp_weak_localization_ratio;
use crate::quadrature::{integrate_real_line, integrate_with_points, Tolerance};

/// Below this value of k·s a warning is logged: the narrow-packet reduction
/// of the energy integrals is no longer reliable.
pub const KS_WARNING_THRESHOLD: f64 = 10.0;

/// Minimum k·s accepted by [`q2_energy_integral`].
pub const KS_ENERGY_INTEGRAL_MIN: f64 = 50.0;

const NORMALISATION_TOL: f64 = 1e-8;

/// Envelope sampled on a grid and interpolated linearly, zero outside.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedShape {
    x: Vec<f64>,
    amp: Vec<f64>,
}

impl TabulatedShape {
    /// Requires strictly increasing `x` and ∫X² dx = 1 within 1e-8.
    pub fn new(x: Vec<f64>, amp: Vec<f64>) -> Result<Self> {
        let shape = Self::unchecked(x, amp)?;
        let norm = shape.norm_sqr();
        if (norm - 1.0).abs() > NORMALISATION_TOL {
            return Err(Error::Validation(format!(
                "tabulated packet has ∫|X|² = {norm:.12}, expected 1"
            )));
        }
        Ok(shape)
    }

    /// Rescales the amplitudes so that ∫X² dx = 1.
    pub fn normalized(x: Vec<f64>, amp: Vec<f64>) -> Result<Self> {
        let mut shape = Self::unchecked(x, amp)?;
        let norm = shape.norm_sqr();
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::Validation("tabulated packet has zero norm".into()));
        }
        let scale = norm.sqrt().recip();
        shape.amp.iter_mut().for_each(|a| *a *= scale);
        Ok(shape)
    }

    fn unchecked(x: Vec<f64>, amp: Vec<f64>) -> Result<Self> {
        if x.len() != amp.len() {
            return Err(Error::Shape(format!("{} abscissae but {} values", x.len(), amp.len())));
        }
        if x.len() < 2 {
            return Err(Error::Validation("a tabulated packet needs at least two points".into()));
        }
        if x.iter().chain(&amp).any(|v| !v.is_finite()) {
            return Err(Error::Validation("tabulated packet contains non-finite values".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("abscissae must be strictly increasing".into()));
        }
        Ok(Self { x, amp })
    }

    /// Reads whitespace-separated `x X(x)` pairs; lines starting with `#` are
    /// comments.
    pub fn from_file(path: impl AsRef<Path>, normalize: bool) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            rows_written: 0,
            source: e,
        })?;
        let mut x = Vec::new();
        let mut amp = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(Error::Parse(format!(
                    "{}:{}: expected two columns, found {}",
                    path.display(),
                    lineno + 1,
                    cols.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| {
                    Error::Parse(format!("{}:{}: {s:?}: {e}", path.display(), lineno + 1))
                })
            };
            x.push(parse(cols[0])?);
            amp.push(parse(cols[1])?);
        }
        if normalize {
            Self::normalized(x, amp)
        } else {
            Self::new(x, amp)
        }
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.amp
    }

    fn support(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().expect("at least two points"))
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        let i = match self.x.partition_point(|&xi| xi <= x) {
            0 => 0,
            k if k >= self.x.len() => self.x.len() - 2,
            k => k - 1,
        };
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let t = (x - x0) / (x1 - x0);
        self.amp[i] * (1.0 - t) + self.amp[i + 1] * t
    }

    /// ∫X², exact for the linear interpolant (Simpson on each piece).
    fn norm_sqr(&self) -> f64 {
        self.x
            .windows(2)
            .zip(self.amp.windows(2))
            .map(|(xs, a)| {
                let m = 0.5 * (a[0] + a[1]);
                (xs[1] - xs[0]) / 6.0 * (a[0] * a[0] + 4.0 * m * m + a[1] * a[1])
            })
            .sum()
    }

    /// Mean and variance of |X|², exact for the interpolant.
    fn moments(&self) -> (f64, f64) {
        // 3-point Gauss–Legendre is exact up to degree 5
        let nodes = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
        let weights = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for (xs, a) in self.x.windows(2).zip(self.amp.windows(2)) {
            let half = 0.5 * (xs[1] - xs[0]);
            let mid = 0.5 * (xs[1] + xs[0]);
            for (u, w) in nodes.iter().zip(weights) {
                let x = mid + half * u;
                let t = (u + 1.0) * 0.5;
                let val = a[0] * (1.0 - t) + a[1] * t;
                let d = val * val * w * half;
                m0 += d;
                m1 += d * x;
                m2 += d * x * x;
            }
        }
        let mean = m1 / m0;
        (mean, m2 / m0 - mean * mean)
    }

    /// F(z) = ∫X(x)X(x−z)dx. The product of two linear pieces is quadratic,
    /// so 2-point Gauss–Legendre on the merged grid is exact.
    fn overlap(&self, z: f64) -> f64 {
        let (lo, hi) = self.support();
        let a = lo.max(lo + z);
        let b = hi.min(hi + z);
        if a >= b {
            return 0.0;
        }
        let mut cuts: Vec<f64> = self
            .x
            .iter()
            .flat_map(|&xi| [xi, xi + z])
            .filter(|&c| c > a && c < b)
            .collect();
        cuts.push(a);
        cuts.push(b);
        cuts.sort_by(f64::total_cmp);
        let g = 0.5 / 3f64.sqrt();
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (x0, x1) = (w[0], w[1]);
            let h = x1 - x0;
            if h <= 0.0 {
                continue;
            }
            let mid = 0.5 * (x0 + x1);
            for u in [mid - g * h, mid + g * h] {
                total += 0.5 * h * self.eval(u) * self.eval(u - z);
            }
        }
        total
    }

    /// X̃(p) = ∫X(x)e^{−ipx}dx, exact for the interpolant.
    fn fourier(&self, p: f64) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for (xs, a) in self.x.windows(2).zip(self.amp.windows(2)) {
            let h = xs[1] - xs[0];
            let slope = (a[1] - a[0]) / h;
            let u = p * h;
            // I0 = ∫_0^h e^{−ipt}dt, I1 = ∫_0^h t e^{−ipt}dt
            let (i0, i1) = if u.abs() < 1e-3 {
                let iu = Complex64::new(0.0, -u);
                let i0 = h * (1.0 + iu / 2.0 + iu * iu / 6.0 + iu * iu * iu / 24.0);
                let i1 = h * h * (0.5 + iu / 3.0 + iu * iu / 8.0 + iu * iu * iu / 30.0);
                (i0, i1)
            } else {
                let e = Complex64::from_polar(1.0, -u);
                let ip = Complex64::new(0.0, p);
                let i0 = (1.0 - e) / ip;
                let i1 = (i0 - h * e) / ip;
                (i0, i1)
            };
            total += Complex64::from_polar(1.0, -p * xs[0]) * (a[0] * i0 + slope * i1);
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PacketShape {
    /// X(x) ∝ exp(−x²/4s²), so that |X|² has variance s².
    Gaussian,
    Tabulated(TabulatedShape),
}

/// Packet shape together with the kinematic scales of the scattering setup.
#[derive(Debug, Clone, PartialEq)]
pub struct WavepacketConfig {
    shape: PacketShape,
    s: f64,
    k: f64,
    v: f64,
    tau_d: f64,
}

fn check_kinematics(s: f64, k: f64, v: f64, tau_d: f64) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Domain(format!("packet width must be positive, got {s}")));
    }
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Domain(format!("velocity must be positive, got {v}")));
    }
    if !(tau_d >= 0.0 && tau_d.is_finite()) {
        return Err(Error::Domain(format!("dwell time must be non-negative, got {tau_d}")));
    }
    if !k.is_finite() {
        return Err(Error::Domain(format!("wavenumber must be finite, got {k}")));
    }
    if k * s < KS_WARNING_THRESHOLD {
        log::warn!("k·s = {:.3} is below {KS_WARNING_THRESHOLD}; narrow-packet results are unreliable", k * s);
    }
    Ok(())
}

impl WavepacketConfig {
    pub fn gaussian(s: f64, k: f64, v: f64, tau_d: f64) -> Result<Self> {
        check_kinematics(s, k, v, tau_d)?;
        Ok(Self {
            shape: PacketShape::Gaussian,
            s,
            k,
            v,
            tau_d,
        })
    }

    /// The width s is taken as the standard deviation of |X|².
    pub fn tabulated(shape: TabulatedShape, k: f64, v: f64, tau_d: f64) -> Result<Self> {
        let (_, var) = shape.moments();
        let s = var.sqrt();
        check_kinematics(s, k, v, tau_d)?;
        Ok(Self {
            shape: PacketShape::Tabulated(shape),
            s,
            k,
            v,
            tau_d,
        })
    }

    /// Same packet with a different dwell time.
    pub fn with_dwell_time(&self, tau_d: f64) -> Result<Self> {
        check_kinematics(self.s, self.k, self.v, tau_d)?;
        Ok(Self {
            tau_d,
            ..self.clone()
        })
    }

    pub fn shape(&self) -> &PacketShape {
        &self.shape
    }

    pub fn width(&self) -> f64 {
        self.s
    }

    pub fn wavenumber(&self) -> f64 {
        self.k
    }

    pub fn velocity(&self) -> f64 {
        self.v
    }

    pub fn dwell_time(&self) -> f64 {
        self.tau_d
    }

    /// τ_s = s / v
    pub fn packet_time(&self) -> f64 {
        self.s / self.v
    }

    /// v·τ_d, the dwell length.
    pub fn dwell_length(&self) -> f64 {
        self.v * self.tau_d
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.shape, PacketShape::Gaussian)
    }

    /// Envelope X(x).
    pub fn envelope(&self, x: f64) -> f64 {
        match &self.shape {
            PacketShape::Gaussian => {
                (2.0 * PI * self.s * self.s).powf(-0.25) * (-x * x / (4.0 * self.s * self.s)).exp()
            }
            PacketShape::Tabulated(t) => t.eval(x),
        }
    }

    /// F(z) = ∫X(x)X(x−z)dx
    pub fn overlap(&self, z: f64) -> f64 {
        match &self.shape {
            PacketShape::Gaussian => (-z * z / (8.0 * self.s * self.s)).exp(),
            PacketShape::Tabulated(t) => t.overlap(z),
        }
    }

    /// |X̃(p)|², normalised so that ∫|X̃|²dp = 2π.
    pub fn momentum_density(&self, p: f64) -> f64 {
        match &self.shape {
            PacketShape::Gaussian => {
                (8.0 * PI).sqrt() * self.s * (-2.0 * self.s * self.s * p * p).exp()
            }
            PacketShape::Tabulated(t) => t.fourier(p).norm_sqr(),
        }
    }

    /// Half-width of the region where F is non-negligible.
    fn overlap_reach(&self) -> f64 {
        match &self.shape {
            PacketShape::Gaussian => 2.0 * self.s * 12.0,
            PacketShape::Tabulated(t) => {
                let (lo, hi) = t.support();
                hi - lo
            }
        }
    }
}

pub fn overlap_f(z: f64, wp: &WavepacketConfig) -> f64 {
    wp.overlap(z)
}

/// exp(x²)·erfc(x), stable for large positive x.
fn erfcx(x: f64) -> f64 {
    if x < 3.0 {
        (x * x).exp() * erfc(x)
    } else {
        // continued fraction, converged to rounding for x ≥ 3
        let mut t = x;
        for k in (1..=60).rev() {
            t = x + 0.5 * k as f64 / t;
        }
        1.0 / (PI.sqrt() * t)
    }
}

/// ∫_0^∞ exp(c0 − a q² − b q) dq for a > 0.
fn gaussian_half_line(a: f64, b: f64, c0: f64) -> f64 {
    let sa = a.sqrt();
    let x = b / (2.0 * sa);
    let pre = 0.5 * (PI / a).sqrt();
    if x >= 0.0 {
        pre * c0.exp() * erfcx(x)
    } else {
        pre * (c0 + x * x).exp() * erfc(x)
    }
}

fn q2_gaussian(z: f64, s: f64, lambda: f64) -> f64 {
    // F² is a Gaussian of variance σ² = 2s²; convolve with a Laplace kernel.
    let sigma2 = 2.0 * s * s;
    let sigma = sigma2.sqrt();
    let pre = sigma * (PI / 2.0).sqrt() / (2.0 * lambda);
    let base = -z * z / (2.0 * sigma2);
    let term = |zz: f64| {
        let w = (sigma2 / lambda - zz) / (sigma * 2f64.sqrt());
        if w >= 0.0 {
            (base).exp() * erfcx(w)
        } else {
            (sigma2 / (2.0 * lambda * lambda) - zz / lambda).exp() * erfc(w)
        }
    };
    pre * (term(z) + term(-z))
}

/// Q⁽²⁾(z) = ∫F²(z − vt) e^{−|t|/τ_d}/(2τ_d) dt. For τ_d = 0 this is F²(z).
pub fn q2_kernel(z: f64, wp: &WavepacketConfig) -> Result<f64> {
    let f = wp.overlap(z);
    if wp.tau_d == 0.0 {
        return Ok(f * f);
    }
    let lambda = wp.dwell_length();
    match wp.shape {
        PacketShape::Gaussian => Ok(q2_gaussian(z, wp.s, lambda)),
        PacketShape::Tabulated(_) => {
            // F vanishes outside [−reach, reach]
            let reach = wp.overlap_reach();
            let g = |u: f64| {
                let fu = wp.overlap(z - u);
                fu * fu * (-u.abs() / lambda).exp() / (2.0 * lambda)
            };
            let est = integrate_with_points(g, z - reach, z + reach, &[0.0, z], Tolerance::new(1e-12, 1e-10))?;
            Ok(est.value)
        }
    }
}

/// Q⁽²⁾ evaluated from the momentum-space form
/// `(1/4π²) ∫dQ ∫dq cos(qz)/(1 + v²τ_d²q²) |X̃(Q − q/2)|² |X̃(Q + q/2)|²`,
/// obtained from the energy integrals after linearising in the momentum
/// difference. Valid for k·s ≫ 1 and used to cross-check [`q2_kernel`].
pub fn q2_energy_integral(z: f64, wp: &WavepacketConfig, tol: Tolerance) -> Result<f64> {
    let ks = wp.k * wp.s;
    if ks < KS_ENERGY_INTEGRAL_MIN {
        return Err(Error::Domain(format!(
            "energy-integral form needs k·s ≥ {KS_ENERGY_INTEGRAL_MIN}, got {ks}"
        )));
    }
    let lambda = wp.dwell_length();
    let scale = 1.0 / wp.s;
    let inner_tol = Tolerance {
        abs: tol.abs * 1e-3 * wp.s,
        rel: tol.rel * 0.1,
        ..tol
    };
    let inner = |q: f64| -> Result<f64> {
        let g = |big_q: f64| wp.momentum_density(big_q - 0.5 * q) * wp.momentum_density(big_q + 0.5 * q);
        Ok(integrate_real_line(g, scale, inner_tol)?.value)
    };
    let failure = std::cell::RefCell::new(None);
    let outer = |q: f64| match inner(q) {
        Ok(v) => (q * z).cos() / (1.0 + lambda * lambda * q * q) * v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    // the q-integrand is even
    let est = crate::quadrature::integrate_half_line(outer, scale, tol)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(2.0 * est.value / (4.0 * PI * PI))
}

/// C⁽³⁾ = s⁻² ∫∫ F(z)F(z′)F(z − z′) dz dz′.
pub fn c3_constant(wp: &WavepacketConfig) -> Result<f64> {
    match wp.shape {
        PacketShape::Gaussian => Ok(8.0 * PI / 3f64.sqrt()),
        PacketShape::Tabulated(_) => {
            let reach = wp.overlap_reach();
            let tol = Tolerance::new(1e-11, 1e-9);
            let failure = std::cell::RefCell::new(None);
            let outer = |z: f64| {
                let inner = |zp: f64| wp.overlap(zp) * wp.overlap(z - zp);
                match integrate_with_points(inner, -reach, reach, &[0.0, z], tol) {
                    Ok(e) => wp.overlap(z) * e.value,
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        0.0
                    }
                }
            };
            let est = integrate_with_points(outer, -2.0 * reach, 2.0 * reach, &[0.0], tol)?;
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            Ok(est.value / (wp.s * wp.s))
        }
    }
}

const SECTOR_CUTOFF: f64 = 45.0;

/// The three linear F-arguments `α + β p + γ q` of each integration sector.
fn sector_arguments(z: f64, zp: f64, l: f64) -> [[(f64, f64, f64); 3]; 3] {
    let d = z - zp;
    [
        // t = τp, t′ = τq
        [(z, l, 0.0), (zp, 0.0, l), (d, l, -l)],
        // t = −τp, t′ = τ(q − p)
        [(z, -l, 0.0), (zp, -l, l), (d, 0.0, -l)],
        // t = τ(q − p), t′ = −τp
        [(z, -l, l), (zp, -l, 0.0), (d, 0.0, l)],
    ]
}

fn sector_breakpoints(z: f64, zp: f64, l: f64, width: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for c in [z, zp, z - zp] {
        for sgn in [-1.0, 1.0] {
            let centre = sgn * c / l;
            for off in [0.0, 2.0, 5.0] {
                out.push(centre + off * width / l);
                out.push(centre - off * width / l);
            }
        }
    }
    out
}

/// Three-particle dephasing kernel
/// `Q⁽³⁾(z, z′) = ∫∫ F(z + vt) F(z′ + vt′) F(z − z′ + v(t − t′)) ρ(t, t′) dt dt′`,
/// where (t, t′) are the dwell-time differences of particles (1, 2) and
/// (3, 2), each particle spending an independent exponentially distributed
/// time (mean τ_d) in the cavity. The pair marginals are the Laplace kernel
/// of [`q2_kernel`].
///
/// Limits: τ_d → 0 gives F(z)F(z′)F(z − z′); for τ_d ≫ τ_s
/// `Q⁽³⁾ → (C⁽³⁾/3) (τ_s/τ_d)² exp(−(3 max(z, z′, 0) − z − z′)/vτ_d)`.
pub fn q3_kernel(z: f64, zp: f64, wp: &WavepacketConfig) -> Result<f64> {
    if wp.tau_d == 0.0 {
        return Ok(wp.overlap(z) * wp.overlap(zp) * wp.overlap(z - zp));
    }
    match wp.shape {
        PacketShape::Gaussian => q3_gaussian(z, zp, wp),
        PacketShape::Tabulated(_) => q3_kernel_quadrature(z, zp, wp, Tolerance::new(1e-10, 1e-8)),
    }
}

/// Gaussian packets: the inner integral over q is done in closed form.
fn q3_gaussian(z: f64, zp: f64, wp: &WavepacketConfig) -> Result<f64> {
    let l = wp.dwell_length();
    let c = 1.0 / (8.0 * wp.s * wp.s);
    let points = sector_breakpoints(z, zp, l, 2.0 * wp.s);
    let tol = Tolerance::new(1e-12, 1e-10);
    let mut total = 0.0;
    for args in sector_arguments(z, zp, l) {
        let f = |p: f64| {
            let mut a = 0.0;
            let mut b = 1.0;
            let mut c0 = -p;
            for &(alpha, beta, gamma) in &args {
                let lin = alpha + beta * p;
                a += c * gamma * gamma;
                b += 2.0 * c * lin * gamma;
                c0 -= c * lin * lin;
            }
            gaussian_half_line(a, b, c0)
        };
        total += integrate_with_points(f, 0.0, SECTOR_CUTOFF, &points, tol)?.value;
    }
    Ok(total / 3.0)
}

/// Direct two-dimensional quadrature of the three-particle kernel, valid for
/// any packet shape.
pub fn q3_kernel_quadrature(z: f64, zp: f64, wp: &WavepacketConfig, tol: Tolerance) -> Result<f64> {
    if wp.tau_d == 0.0 {
        return Ok(wp.overlap(z) * wp.overlap(zp) * wp.overlap(z - zp));
    }
    let l = wp.dwell_length();
    let width = match wp.shape {
        PacketShape::Gaussian => 2.0 * wp.s,
        PacketShape::Tabulated(_) => wp.s,
    };
    let outer_points = sector_breakpoints(z, zp, l, width);
    let inner_tol = Tolerance {
        abs: tol.abs * 0.01,
        ..tol
    };
    let mut total = 0.0;
    let failure = std::cell::RefCell::new(None);
    for args in sector_arguments(z, zp, l) {
        let outer = |p: f64| {
            let inner = |q: f64| {
                let mut v = (-p - q).exp();
                for &(alpha, beta, gamma) in &args {
                    v *= wp.overlap(alpha + beta * p + gamma * q);
                }
                v
            };
            let mut pts = outer_points.clone();
            pts.extend(outer_points.iter().map(|c| c + p));
            pts.extend(outer_points.iter().map(|c| p - c));
            match integrate_with_points(inner, 0.0, SECTOR_CUTOFF, &pts, inner_tol) {
                Ok(e) => e.value,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        };
        total += integrate_with_points(outer, 0.0, SECTOR_CUTOFF, &outer_points, tol)?.value;
    }
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(total / 3.0)
}

/// Pairwise truncation of the averaged ratio ⟨P⟩/⟨P_cl⟩:
/// weak-localisation factor minus (ε/N) Σ_{i<j} Q⁽²⁾(z_ij).
pub fn pairwise_ratio(
    n: usize,
    n_channels: usize,
    symmetry: SymmetryClass,
    epsilon: i32,
    delays: &DelayVector,
    wp: &WavepacketConfig,
) -> Result<f64> {
    if delays.len() != n {
        return Err(Error::Shape(format!("{} delays for {n} particles", delays.len())));
    }
    let base = sp_weak_localization_ratio(n as u32, n_channels as u32, symmetry)?;
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += q2_kernel(delays.diff(i, j), wp)?;
        }
    }
    Ok(base - epsilon as f64 / n_channels as f64 * sum)
}

/// Three-body correction (2ε/N²) Σ_{i<j<k} Q⁽³⁾(z_ij, z_kj); zero for n < 3.
pub fn triplet_term(
    n: usize,
    n_channels: usize,
    epsilon: i32,
    delays: &DelayVector,
    wp: &WavepacketConfig,
) -> Result<f64> {
    if delays.len() != n {
        return Err(Error::Shape(format!("{} delays for {n} particles", delays.len())));
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                sum += q3_kernel(delays.diff(i, j), delays.diff(k, j), wp)?;
            }
        }
    }
    let nn = n_channels as f64;
    Ok(2.0 * epsilon as f64 / (nn * nn) * sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(tau_ratio: f64) -> WavepacketConfig {
        WavepacketConfig::gaussian(1.0, 50.0, 1.0, tau_ratio).unwrap()
    }

    fn boxcar(half: f64) -> TabulatedShape {
        let h = (1.0 / (2.0 * half)).sqrt();
        TabulatedShape::new(vec![-half, half], vec![h, h]).unwrap()
    }

    #[test]
    fn gaussian_overlap_values() {
        let wp = gauss(0.0);
        assert_eq!(wp.overlap(0.0), 1.0);
        assert!((wp.overlap(2.0) - (-0.5f64).exp()).abs() < 1e-15);
        assert!(wp.overlap(200.0) < 1e-300);
    }

    #[test]
    fn gaussian_overlap_matches_quadrature() {
        let wp = gauss(0.0);
        for z in [0.0, 0.7, 2.0, 5.0] {
            let r = integrate_real_line(|x| wp.envelope(x) * wp.envelope(x - z), 1.0, Tolerance::new(1e-14, 1e-13))
                .unwrap();
            assert!((r.value - wp.overlap(z)).abs() < 1e-12, "z={z}");
        }
    }

    #[test]
    fn boxcar_overlap_is_triangle() {
        let wp = WavepacketConfig::tabulated(boxcar(1.0), 100.0, 1.0, 0.0).unwrap();
        for z in [0.0, 0.3, 1.0, 1.9, 2.5] {
            let expect = (1.0 - z / 2.0f64).max(0.0);
            assert!((wp.overlap(z) - expect).abs() < 1e-14);
            assert!((wp.overlap(-z) - expect).abs() < 1e-14);
        }
        // variance of a uniform density on [−1, 1]
        assert!((wp.width() - (1.0f64 / 3.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn unnormalised_table_is_rejected() {
        let r = TabulatedShape::new(vec![0.0, 1.0], vec![2.0, 2.0]);
        assert!(matches!(r, Err(Error::Validation(_))));
        let t = TabulatedShape::normalized(vec![0.0, 1.0], vec![2.0, 2.0]).unwrap();
        assert!((t.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tabulated_fourier_matches_quadrature() {
        let t = TabulatedShape::normalized(vec![-1.0, -0.2, 0.5, 1.5], vec![0.0, 1.0, 0.7, 0.0]).unwrap();
        for p in [0.0, 1e-4, 0.8, 3.0, 11.0] {
            let re = integrate_with_points(|x| t.eval(x) * (p * x).cos(), -1.0, 1.5, &[-0.2, 0.5], Tolerance::new(1e-14, 1e-14))
                .unwrap()
                .value;
            let im = integrate_with_points(|x| -t.eval(x) * (p * x).sin(), -1.0, 1.5, &[-0.2, 0.5], Tolerance::new(1e-14, 1e-14))
                .unwrap()
                .value;
            let ft = t.fourier(p);
            assert!((ft.re - re).abs() < 1e-12 && (ft.im - im).abs() < 1e-12, "p={p}");
        }
    }

    #[test]
    fn q2_zero_dwell_is_f_squared() {
        let wp = gauss(0.0);
        for z in [0.0, 1.0, 3.0] {
            assert_eq!(q2_kernel(z, &wp).unwrap(), wp.overlap(z).powi(2));
        }
    }

    #[test]
    fn q2_closed_form_matches_convolution() {
        for tau in [0.1, 1.0, 5.0, 40.0] {
            let wp = gauss(tau);
            for z in [0.0, 1.0, 3.0, 25.0] {
                let lam = wp.dwell_length();
                let direct = integrate_with_points(
                    |u: f64| wp.overlap(z - u).powi(2) * (-u.abs() / lam).exp() / (2.0 * lam),
                    -400.0,
                    400.0,
                    &[0.0, z],
                    Tolerance::new(1e-15, 1e-13),
                )
                .unwrap()
                .value;
                let closed = q2_kernel(z, &wp).unwrap();
                assert!((closed - direct).abs() <= 1e-11 * direct.max(1e-300) + 1e-15, "tau={tau} z={z}: {closed} vs {direct}");
            }
        }
    }

    #[test]
    fn q2_large_dwell_limit() {
        // Q2(0) → ∫F²/(2vτ_d) = √π s/(vτ_d), corrections O(s/vτ_d)
        let wp = gauss(400.0);
        let v = q2_kernel(0.0, &wp).unwrap();
        assert!((v / (PI.sqrt() / 400.0) - 1.0).abs() < 0.01, "{v}");
    }

    #[test]
    fn erfcx_reference_values() {
        // 20-digit reference values
        for (x, want) in [
            (0.5, 0.61569034419292587487),
            (2.9, 0.18460182595559081956),
            (3.0, 0.17900115118138995042),
            (10.0, 0.056140992743822585858),
            (40.0, 0.014100335983377813625),
        ] {
            assert!((erfcx(x) / want - 1.0).abs() < 1e-15, "x={x}");
        }
    }

    #[test]
    fn tabulated_q2_runs_and_is_bounded() {
        let wp = WavepacketConfig::tabulated(boxcar(1.0), 100.0, 1.0, 0.5).unwrap();
        let q0 = q2_kernel(0.0, &wp).unwrap();
        let q1 = q2_kernel(1.0, &wp).unwrap();
        assert!(q0 < 1.0 && q1 < q0 && q1 > 0.0);
    }

    #[test]
    fn energy_integral_requires_narrow_packets() {
        let wp = WavepacketConfig::gaussian(1.0, 20.0, 1.0, 1.0).unwrap();
        assert!(matches!(q2_energy_integral(0.0, &wp, Tolerance::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn q3_zero_dwell_values() {
        let wp = gauss(0.0);
        assert_eq!(q3_kernel(0.0, 0.0, &wp).unwrap(), 1.0);
        let v = q3_kernel(2.0, -2.0, &wp).unwrap();
        assert!((v - (-3.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn q3_closed_inner_matches_quadrature() {
        for tau in [0.1, 2.0] {
            let wp = gauss(tau);
            for (z, zp) in [(0.0, 0.0), (1.0, -0.5), (3.0, 2.0)] {
                let a = q3_kernel(z, zp, &wp).unwrap();
                let b = q3_kernel_quadrature(z, zp, &wp, Tolerance::new(1e-11, 1e-9)).unwrap();
                assert!((a - b).abs() < 1e-8, "tau={tau} z={z} zp={zp}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn q3_symmetric() {
        let wp = gauss(2.0);
        let a = q3_kernel(1.3, -0.4, &wp).unwrap();
        let b = q3_kernel(-0.4, 1.3, &wp).unwrap();
        assert!((a - b).abs() < 1e-10 * a, "{a} vs {b}");
    }

    #[test]
    fn triplet_counts() {
        let wp = gauss(0.0);
        let d = DelayVector::zeros(4);
        let t = triplet_term(4, 10, 1, &d, &wp).unwrap();
        assert!((t - 4.0 * 2.0 / 100.0).abs() < 1e-15);
        assert_eq!(triplet_term(2, 10, 1, &DelayVector::zeros(2), &wp).unwrap(), 0.0);
    }

    #[test]
    fn loader_reads_comments_and_columns() {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# boxcar").unwrap();
        writeln!(f, "-1 1\n\n1 1").unwrap();
        let t = TabulatedShape::from_file(f.path(), true).unwrap();
        assert_eq!(t.abscissae(), &[-1.0, 1.0]);
        assert!((t.values()[0] - 0.5f64.sqrt()).abs() < 1e-15);

        let mut g = tempfile::NamedTempFile::new().unwrap();
        writeln!(g, "0 1 2").unwrap();
        assert!(matches!(TabulatedShape::from_file(g.path(), true), Err(Error::Parse(_))));
    }
}
