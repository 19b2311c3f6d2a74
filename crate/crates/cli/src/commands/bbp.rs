//! Convergence of the pairwise-truncated ratio towards its large-n limit
//! under N = α nᵉᵗᵃ.

use mbscatter::amplitudes::{mb_probability_equal_times, ChannelAssignment, Statistics};
use mbscatter::diagrams::{bbp_limit, pairwise_exact_coefficient, BbpRegime, ScalingSpec};
use mbscatter::ensembles::SymmetryClass;
use mbscatter::moments::rational_to_f64;
use mbscatter::montecarlo::{estimate_observables, RunConfig as McConfig};
use mbscatter::symmetric::factorial;
use mbscatter::table::{Cell, Table};
use mbscatter::Result;
use serde_json::{json, Value};

use super::Outcome;
use crate::config::RunConfig;

pub fn defaults() -> Vec<(&'static str, Value)> {
    vec![
        ("alpha", json!(1.0)),
        ("etas", json!([1.5, 2.0, 3.0])),
        ("epsilon", json!(1)),
        ("n_values", json!([5, 10, 25, 50, 100, 200])),
        ("mc_samples", json!(0)),
        ("mc_max_n", json!(4)),
    ]
}

fn regime_name(r: BbpRegime) -> &'static str {
    match r {
        BbpRegime::Saturated => "saturated",
        BbpRegime::Critical => "critical",
        BbpRegime::Classical => "classical",
    }
}

/// ⟨P⟩/⟨P_cl⟩ over CUE for n particles in distinct channels.
fn mc_ratio(n: u32, n_channels: u64, eps: i32, cfg: &RunConfig) -> Result<(f64, f64)> {
    let stat = Statistics::from_epsilon(eps)?;
    let n = n as usize;
    let ch = ChannelAssignment::new((0..n).collect(), (n..2 * n).collect(), stat)?;
    let scale = (n_channels as f64).powi(n as i32) / factorial(n as u32) as f64;
    let mc = McConfig::new(cfg.u64("mc_samples")?, cfg.master_seed).with_workers(cfg.workers);
    let est = estimate_observables(SymmetryClass::Unitary, n_channels as usize, mc, 1, |s, out| {
        out[0] = mb_probability_equal_times(s, &ch)? * scale;
        Ok(())
    })?;
    Ok((est[0].mean, est[0].std_error))
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let alpha = cfg.positive("alpha")?;
    let etas = cfg.f64_list("etas")?;
    let eps = cfg.epsilon("epsilon")?;
    let ns = cfg.u32_list("n_values")?;
    let mc_samples = cfg.u64("mc_samples")?;
    let mc_max_n = cfg.u32("mc_max_n")?;

    let mut table = Table::new([
        "eta", "n", "N", "exact_coeff", "limit", "rel_deviation", "regime", "mc_estimate", "mc_se",
    ]);
    for &eta in &etas {
        let spec = ScalingSpec::new(alpha, eta, eps, 0.0)?;
        let limit = bbp_limit(&spec);
        if !limit.trusted {
            table.push_meta(
                "warning",
                format!("eta={eta} <= 1: pairwise dominance not established, limit column is indicative only"),
            );
        }
        for &n in &ns {
            let nn = spec.channels_rounded(n);
            let coeff = rational_to_f64(&pairwise_exact_coefficient(n, nn, eps)?);
            let dev = if limit.value.is_finite() && limit.value != 0.0 {
                (coeff - limit.value).abs() / limit.value
            } else {
                f64::NAN
            };
            let (mc, se) = if mc_samples > 0 && n <= mc_max_n && nn >= 2 * n as u64 {
                mc_ratio(n, nn, eps, cfg)?
            } else {
                (f64::NAN, f64::NAN)
            };
            table.push_row(vec![
                eta.into(),
                n.into(),
                nn.into(),
                coeff.into(),
                limit.value.into(),
                dev.into(),
                Cell::Text(regime_name(limit.regime).into()),
                mc.into(),
                se.into(),
            ])?;
        }
    }
    Ok(Outcome::ok(table))
}
