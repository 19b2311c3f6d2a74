//! One module per subcommand. Each takes a resolved [`RunConfig`] and returns
//! a table plus a pass flag for verify-style commands.

use mbscatter::ensembles::SymmetryClass;
use mbscatter::table::Table;
use mbscatter::wavepackets::{TabulatedShape, WavepacketConfig};
use mbscatter::Result;
use serde_json::{json, Value};

use crate::config::RunConfig;

pub mod bbp;
pub mod hom_profile;
pub mod mc;
pub mod rmt_verify;
pub mod series;
pub mod three_body;
pub mod variance;

pub struct Outcome {
    pub table: Table,
    /// False when a verify-style command found a tolerance violation.
    pub passed: bool,
}

impl Outcome {
    pub fn ok(table: Table) -> Self {
        Self { table, passed: true }
    }
}

/// Packet keys shared by the wavepacket-based commands.
pub fn packet_defaults() -> Vec<(&'static str, Value)> {
    vec![
        ("s", json!(1.0)),
        ("k", json!(50.0)),
        ("v", json!(1.0)),
        ("shape_file", json!("")),
    ]
}

/// Packet with τ_d = ratio·τ_s.
pub fn wavepacket(cfg: &RunConfig, tau_ratio: f64) -> Result<WavepacketConfig> {
    let k = cfg.f64("k")?;
    let v = cfg.positive("v")?;
    let file = cfg.params.get("shape_file").and_then(Value::as_str).unwrap_or("");
    let base = if file.is_empty() {
        WavepacketConfig::gaussian(cfg.positive("s")?, k, v, 0.0)?
    } else {
        WavepacketConfig::tabulated(TabulatedShape::from_file(file, true)?, k, v, 0.0)?
    };
    if !(tau_ratio >= 0.0 && tau_ratio.is_finite()) {
        return Err(mbscatter::Error::Config(format!(
            "dwell-time ratio must be non-negative, got {tau_ratio}"
        )));
    }
    base.with_dwell_time(tau_ratio * base.packet_time())
}

pub fn symmetry(beta: u8) -> SymmetryClass {
    if beta == 1 {
        SymmetryClass::Orthogonal
    } else {
        SymmetryClass::Unitary
    }
}

/// `n` evenly spaced points on [a, b].
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}
