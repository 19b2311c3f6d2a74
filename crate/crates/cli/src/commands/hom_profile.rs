//! Two-particle HOM-type profile ⟨P⟩/⟨P_cl⟩ versus delay for several dwell times.

use mbscatter::amplitudes::{DelayVector, Statistics};
use mbscatter::moments::{first_moment, rational_to_f64, Occupation};
use mbscatter::table::{Cell, Table};
use mbscatter::wavepackets::{overlap_f, pairwise_ratio, q2_energy_integral, q2_kernel};
use mbscatter::quadrature::Tolerance;
use mbscatter::{Error, Result};
use serde_json::{json, Value};

use super::{linspace, packet_defaults, symmetry, wavepacket, Outcome};
use crate::config::RunConfig;

pub fn defaults() -> Vec<(&'static str, Value)> {
    let mut d = vec![
        ("channels", json!(10)),
        ("beta", json!(2)),
        ("epsilon", json!(1)),
        ("tau_ratios", json!([0.1, 2.5, 5.0])),
        ("z_min", json!(0.0)),
        ("z_max", json!(20.0)),
        ("z_points", json!(201)),
        ("energy_integral", json!(false)),
        ("tol_abs", json!(1e-12)),
        ("tol_rel", json!(1e-10)),
    ];
    d.extend(packet_defaults());
    d
}

/// Exact n = 2 ratio with distinct channels. Both classes share the
/// structure ⟨P⟩ = D + ε C Q⁽²⁾(z); D and C follow from the equal-time
/// boson and fermion moments.
pub fn exact_two_particle_ratio(n_channels: u32, beta: u8, epsilon: i32, q2: f64) -> Result<f64> {
    let sym = symmetry(beta);
    let p = |stat| -> Result<f64> {
        Ok(rational_to_f64(&first_moment(2, n_channels, sym, stat, Occupation::distinct())?.probability))
    };
    let (pb, pf) = (p(Statistics::Boson)?, p(Statistics::Fermion)?);
    let dist = 0.5 * (pb + pf);
    let cross = 0.5 * (pb - pf);
    let classical = 2.0 / (n_channels as f64).powi(2);
    Ok((dist + epsilon as f64 * cross * q2) / classical)
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let n_channels = cfg.u32("channels")?;
    if n_channels < 4 {
        return Err(Error::Config(format!("channels: need N ≥ 4 for two distinct in/out pairs, got {n_channels}")));
    }
    let beta = cfg.beta("beta")?;
    let eps = cfg.epsilon("epsilon")?;
    let taus = cfg.f64_list("tau_ratios")?;
    let (z_min, z_max) = (cfg.f64("z_min")?, cfg.f64("z_max")?);
    let points = cfg.u64("z_points")? as usize;
    if points < 2 || z_max <= z_min {
        return Err(Error::Config("z_points: need at least 2 points on z_min < z_max".into()));
    }
    let energy = cfg.bool("energy_integral")?;
    let tol = Tolerance::new(cfg.positive("tol_abs")?, cfg.positive("tol_rel")?);

    let mut columns = vec!["tau_ratio", "z", "ratio_pairwise", "ratio_exact_n2", "q2", "f2", "log_slope"];
    if energy {
        columns.push("q2_energy_integral");
    }
    let mut table = Table::new(columns);
    table.push_meta("statistics", if eps == 1 { "bosons" } else { "fermions" });
    table.push_meta("beta", beta.to_string());
    table.push_meta("channels", n_channels.to_string());
    for &tau in &taus {
        let wp = wavepacket(cfg, tau)?;
        let h = 1e-3 * wp.width();
        for z in linspace(z_min, z_max, points) {
            let q2 = q2_kernel(z, &wp)?;
            let delays = DelayVector::new(vec![0.0, z]);
            let pair = pairwise_ratio(2, n_channels as usize, symmetry(beta), eps, &delays, &wp)?;
            let exact = exact_two_particle_ratio(n_channels, beta, eps, q2)?;
            let slope = (q2_kernel(z + h, &wp)?.ln() - q2_kernel(z - h, &wp)?.ln()) / (2.0 * h);
            let mut row: Vec<Cell> = vec![
                tau.into(),
                z.into(),
                pair.into(),
                exact.into(),
                q2.into(),
                overlap_f(z, &wp).powi(2).into(),
                slope.into(),
            ];
            if energy {
                row.push(q2_energy_integral(z, &wp, tol)?.into());
            }
            table.push_row(row)?;
        }
    }
    Ok(Outcome::ok(table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Overrides;

    #[test]
    fn exact_ratio_matches_closed_forms() {
        // unitary: N²/(N²−1)·(1 − εQ/N)
        for nn in [4u32, 10] {
            let n = nn as f64;
            for q in [0.0, 0.3, 1.0] {
                let want = n * n / (n * n - 1.0) * (1.0 - q / n);
                assert!((exact_two_particle_ratio(nn, 2, 1, q).unwrap() - want).abs() < 1e-14);
            }
        }
        // N/(N+1) at z = 0
        assert!((exact_two_particle_ratio(4, 2, 1, 1.0).unwrap() - 0.8).abs() < 1e-14);
    }

    #[test]
    fn zero_delay_column() {
        let ov = Overrides {
            set: vec!["z_points=3".into(), "z_max=2".into(), "tau_ratios=[0.0]".into()],
            ..Default::default()
        };
        let cfg = RunConfig::resolve("hom-profile", &defaults(), &ov).unwrap();
        let out = run(&cfg).unwrap();
        let Cell::Float(r) = out.table.rows[0][2] else { panic!() };
        assert!((r - 0.9).abs() < 1e-14);
    }
}
