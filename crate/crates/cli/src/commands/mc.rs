//! Generic Monte Carlo moment estimate for one channel assignment over a grid of N.

use mbscatter::amplitudes::{ChannelAssignment, Statistics};
use mbscatter::moments::{first_moment, rational_to_f64, Occupation};
use mbscatter::montecarlo::{estimate_first_moment, estimate_second_moment, sweep, RunConfig as McConfig};
use mbscatter::table::{Format, Table};
use mbscatter::{Error, Result};
use serde_json::{json, Value};

use super::{symmetry, variance, Outcome};
use crate::config::RunConfig;

pub fn defaults() -> Vec<(&'static str, Value)> {
    vec![
        ("beta", json!(2)),
        ("epsilon", json!(1)),
        ("incoming", json!([0, 1])),
        ("outgoing", json!([2, 3])),
        ("channels", json!([6])),
        ("samples", json!(200_000)),
        ("moment", json!(1)),
    ]
}

/// Closed-form value when one is implemented, NaN otherwise.
fn formula(beta: u8, ch: &ChannelAssignment, nn: u32, moment: u32) -> Result<f64> {
    let n = ch.particles() as u32;
    let value = match moment {
        1 => match first_moment(n, nn, symmetry(beta), ch.statistics(), Occupation::of(ch)) {
            Ok(fm) => Some(fm.probability),
            Err(Error::UnsupportedRegime(_)) => None,
            Err(e) => return Err(e),
        },
        _ if ch.overlaps() || !ch.outgoing_singly_occupied() || !ch.incoming_distinct() => None,
        _ => variance::exact(beta, n, nn, ch.statistics())?,
    };
    Ok(value.as_ref().map_or(f64::NAN, rational_to_f64))
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let beta = cfg.beta("beta")?;
    let stat = Statistics::from_epsilon(cfg.epsilon("epsilon")?)?;
    let ch = ChannelAssignment::new(cfg.usize_list("incoming")?, cfg.usize_list("outgoing")?, stat)?;
    let moment = cfg.u32("moment")?;
    if moment != 1 && moment != 2 {
        return Err(Error::Config(format!("moment: expected 1 or 2, got {moment}")));
    }
    let mc = McConfig::new(cfg.u64("samples")?, cfg.master_seed).with_workers(cfg.workers);
    let grid: Vec<Vec<(String, f64)>> = cfg
        .u32_list("channels")?
        .into_iter()
        .map(|nn| vec![("N".to_string(), nn as f64)])
        .collect();
    let rows = sweep(
        &grid,
        |p| {
            let nn = p[0].1 as usize;
            if moment == 1 {
                estimate_first_moment(symmetry(beta), &ch, nn, mc)
            } else {
                estimate_second_moment(symmetry(beta), &ch, nn, mc)
            }
        },
        &mut std::io::sink(),
        Format::Csv,
    )?;

    let mut table = Table::new(["N", "mean", "std_error", "samples", "formula", "z_score"]);
    table.push_meta(
        "quantity",
        if moment == 1 { "<P>" } else { "<|A|^4> with |A|^2 = P a!b!/n!" },
    );
    for row in rows {
        let nn = row.params[0].1 as u32;
        let f = formula(beta, &ch, nn, moment)?;
        let e = row.estimate;
        let z = if f.is_nan() { f64::NAN } else { e.z_score(f) };
        table.push_row(vec![nn.into(), e.mean.into(), e.std_error.into(), e.samples.into(), f.into(), z.into()])?;
    }
    Ok(Outcome::ok(table))
}
