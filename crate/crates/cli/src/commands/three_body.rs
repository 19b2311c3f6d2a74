//! Q⁽³⁾(τ₁₂, τ₃₂) heat maps for several dwell times.

use mbscatter::table::Table;
use mbscatter::wavepackets::q3_kernel;
use mbscatter::{Error, Result};
use serde_json::{json, Value};

use super::{linspace, packet_defaults, wavepacket, Outcome};
use crate::config::RunConfig;

pub fn defaults() -> Vec<(&'static str, Value)> {
    let mut d = vec![
        ("tau_ratios", json!([0.1, 2.0])),
        ("z_min", json!(-8.0)),
        ("z_max", json!(8.0)),
        ("z_points", json!(41)),
    ];
    d.extend(packet_defaults());
    d
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let (z_min, z_max) = (cfg.f64("z_min")?, cfg.f64("z_max")?);
    let points = cfg.u64("z_points")? as usize;
    if points < 2 || z_max <= z_min {
        return Err(Error::Config("z_points: need at least 2 points on z_min < z_max".into()));
    }
    let grid = linspace(z_min, z_max, points);
    let mut table = Table::new(["tau_ratio", "z12", "z32", "q3"]);
    for &tau in &cfg.f64_list("tau_ratios")? {
        let wp = wavepacket(cfg, tau)?;
        for &z in &grid {
            for &zp in &grid {
                table.push_row(vec![tau.into(), z.into(), zp.into(), q3_kernel(z, zp, &wp)?.into()])?;
            }
        }
    }
    Ok(Outcome::ok(table))
}
