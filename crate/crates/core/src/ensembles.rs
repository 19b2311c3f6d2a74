//! Random single-particle scattering matrices from the circular ensembles.
//!
//! The unitary ensemble (CUE, β = 2) is sampled by QR-factorising a complex
//! Ginibre matrix and absorbing the phases of `diag(R)` into `Q`, which makes
//! the result exactly Haar distributed. The orthogonal ensemble (COE, β = 1)
//! is built as `UᵀU` from a CUE sample.
//!
//! Every draw is a pure function of `(N, SeedSpec)`: the generator is a
//! ChaCha20 keystream keyed by the master seed and positioned on the stream
//! given by `stream_index`, so independent workers can draw any sample
//! without coordination.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Dyson symmetry class of the cavity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SymmetryClass {
    /// Time-reversal invariant cavity, β = 1 (COE).
    Orthogonal,
    /// Broken time-reversal symmetry, β = 2 (CUE).
    Unitary,
}

impl SymmetryClass {
    pub fn beta(self) -> u8 {
        match self {
            SymmetryClass::Orthogonal => 1,
            SymmetryClass::Unitary => 2,
        }
    }

    pub fn from_beta(beta: u8) -> Result<Self> {
        match beta {
            1 => Ok(SymmetryClass::Orthogonal),
            2 => Ok(SymmetryClass::Unitary),
            other => Err(Error::Domain(format!("beta must be 1 or 2, got {other}"))),
        }
    }
}

/// Reproducible address of one random draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// Derive an independent master seed for a sub-task (SplitMix64 finaliser).
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Single-particle scattering matrix σ with its symmetry class.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix {
    entries: DMatrix<Complex64>,
    symmetry: SymmetryClass,
}

impl ScatteringMatrix {
    /// Wrap an explicit matrix, checking unitarity (and symmetry for β = 1)
    /// to within `1e-10`.
    pub fn new(entries: DMatrix<Complex64>, symmetry: SymmetryClass) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Shape(format!(
                "scattering matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.nrows() == 0 {
            return Err(Error::InvalidDimension("N must be at least 1".into()));
        }
        let m = Self { entries, symmetry };
        let u = m.unitarity_defect();
        if u >= 1e-10 {
            return Err(Error::Validation(format!("matrix is not unitary (defect {u:.3e})")));
        }
        if symmetry == SymmetryClass::Orthogonal {
            let t = m.symmetry_defect();
            if t >= 1e-10 {
                return Err(Error::Validation(format!(
                    "orthogonal-class matrix is not symmetric (defect {t:.3e})"
                )));
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn symmetry(&self) -> SymmetryClass {
        self.symmetry
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    /// σ_{out, in}, zero-based.
    #[inline]
    pub fn get(&self, out: usize, inc: usize) -> Complex64 {
        self.entries[(out, inc)]
    }

    /// Max-norm of σ†σ − I.
    pub fn unitarity_defect(&self) -> f64 {
        let prod = self.entries.adjoint() * &self.entries;
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[(i, j)] - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    /// Max-norm of σ − σᵀ.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)]).norm());
            }
        }
        worst
    }
}

// Debug layout: {"dim": N, "beta": 1|2, "entries": [[[re, im], ...], ...]}, row-major.
impl Serialize for ScatteringMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.dim();
        let rows: Vec<Vec<[f64; 2]>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let z = self.entries[(i, j)];
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect();
        let mut st = serializer.serialize_struct("ScatteringMatrix", 3)?;
        st.serialize_field("dim", &n)?;
        st.serialize_field("beta", &self.symmetry.beta())?;
        st.serialize_field("entries", &rows)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for ScatteringMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            dim: usize,
            beta: u8,
            entries: Vec<Vec<[f64; 2]>>,
        }
        use serde::de::Error as _;
        let raw = Raw::deserialize(deserializer)?;
        if raw.entries.len() != raw.dim || raw.entries.iter().any(|r| r.len() != raw.dim) {
            return Err(D::Error::custom("entries do not match dim"));
        }
        let symmetry = SymmetryClass::from_beta(raw.beta).map_err(D::Error::custom)?;
        let m = DMatrix::from_fn(raw.dim, raw.dim, |i, j| {
            let [re, im] = raw.entries[i][j];
            Complex64::new(re, im)
        });
        ScatteringMatrix::new(m, symmetry).map_err(D::Error::custom)
    }
}

fn haar_unitary(n: usize, seed: SeedSpec) -> DMatrix<Complex64> {
    let mut rng = seed.rng();
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    // Column-major fill so the draw order is fixed independently of nalgebra internals.
    let mut z = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            z[(i, j)] = Complex64::new(re * scale, im * scale);
        }
    }
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let norm = d.norm();
        let phase = if norm > 0.0 { d / norm } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Haar-random unitary from the circular unitary ensemble.
pub fn sample_cue(n: usize, seed: SeedSpec) -> Result<ScatteringMatrix> {
    if n == 0 {
        return Err(Error::InvalidDimension("N must be at least 1".into()));
    }
    Ok(ScatteringMatrix {
        entries: haar_unitary(n, seed),
        symmetry: SymmetryClass::Unitary,
    })
}

/// Symmetric unitary `UᵀU` from the circular orthogonal ensemble.
pub fn sample_coe(n: usize, seed: SeedSpec) -> Result<ScatteringMatrix> {
    if n == 0 {
        return Err(Error::InvalidDimension("N must be at least 1".into()));
    }
    let u = haar_unitary(n, seed);
    let mut s = u.transpose() * &u;
    // Floating point leaves an asymmetry of order 1e-16; make it exact.
    for i in 0..n {
        for j in 0..i {
            let avg = (s[(i, j)] + s[(j, i)]) * 0.5;
            s[(i, j)] = avg;
            s[(j, i)] = avg;
        }
    }
    Ok(ScatteringMatrix {
        entries: s,
        symmetry: SymmetryClass::Orthogonal,
    })
}

/// Draw from the ensemble matching `symmetry`.
pub fn sample(symmetry: SymmetryClass, n: usize, seed: SeedSpec) -> Result<ScatteringMatrix> {
    match symmetry {
        SymmetryClass::Unitary => sample_cue(n, seed),
        SymmetryClass::Orthogonal => sample_coe(n, seed),
    }
}
