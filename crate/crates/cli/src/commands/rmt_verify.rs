//! Monte Carlo check of the exact first moments over CUE/COE.

use mbscatter::amplitudes::{mb_probability_equal_times, ChannelAssignment, Statistics};
use mbscatter::moments::{first_moment, rational_to_f64, Occupation};
use mbscatter::montecarlo::{amplitude_weight, estimate_observables, RunConfig as McConfig};
use mbscatter::table::{Cell, Table};
use mbscatter::Result;
use num_rational::BigRational;
use serde_json::{json, Value};

use super::{symmetry, Outcome};
use crate::config::RunConfig;

pub fn defaults() -> Vec<(&'static str, Value)> {
    vec![
        ("betas", json!([1, 2])),
        ("epsilons", json!([1, -1])),
        ("n_values", json!([1, 2, 3])),
        ("channels", json!([6, 12])),
        ("samples", json!(200_000)),
        ("z_threshold", json!(3.0)),
        ("extra_cases", json!(true)),
    ]
}

#[derive(Debug, Clone)]
struct Case {
    label: String,
    channels: ChannelAssignment,
    /// Compare |Ã|² = P·a!b!/n! instead of P.
    amplitude: bool,
    expected: BigRational,
}

fn cases(beta: u8, n_channels: u32, cfg: &RunConfig) -> Result<Vec<Case>> {
    let sym = symmetry(beta);
    let mut out = Vec::new();
    for &eps in &cfg.i32_list("epsilons")? {
        let stat = Statistics::from_epsilon(eps)?;
        for &n in &cfg.usize_list("n_values")? {
            if n == 0 || 2 * n > n_channels as usize || (n == 1 && eps == -1) {
                continue;
            }
            let ch = ChannelAssignment::new((0..n).collect(), (n..2 * n).collect(), stat)?;
            let fm = first_moment(n as u32, n_channels, sym, stat, Occupation::of(&ch))?;
            out.push(Case {
                label: format!("distinct b={beta} eps={eps:+} n={n} N={n_channels}"),
                channels: ch,
                amplitude: false,
                expected: fm.probability,
            });
        }
    }
    if cfg.bool("extra_cases")? && n_channels >= 4 {
        let pauli = ChannelAssignment::new(vec![0, 1], vec![2, 2], Statistics::Fermion)?;
        let fm = first_moment(2, n_channels, sym, Statistics::Fermion, Occupation::of(&pauli))?;
        out.push(Case {
            label: format!("pauli b={beta} eps=-1 n=2 N={n_channels}"),
            channels: pauli,
            amplitude: false,
            expected: fm.probability,
        });
        let double = ChannelAssignment::new(vec![0, 1], vec![2, 2], Statistics::Boson)?;
        let fm = first_moment(2, n_channels, sym, Statistics::Boson, Occupation::of(&double))?;
        out.push(Case {
            label: format!("doubly-occupied b={beta} eps=+1 n=2 N={n_channels}"),
            channels: double,
            amplitude: true,
            expected: fm.amplitude_moment,
        });
    }
    Ok(out)
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let threshold = cfg.positive("z_threshold")?;
    let samples = cfg.u64("samples")?;
    let mut table = Table::new([
        "case",
        "beta",
        "epsilon",
        "n",
        "N",
        "quantity",
        "formula",
        "formula_exact",
        "mc_mean",
        "mc_se",
        "z_score",
    ]);
    let mut passed = true;
    for &beta in &cfg.u32_list("betas")? {
        let beta = u8::try_from(beta).ok().filter(|b| *b == 1 || *b == 2).ok_or_else(|| {
            mbscatter::Error::Config(format!("betas: expected 1 or 2, got {beta}"))
        })?;
        for &nn in &cfg.u32_list("channels")? {
            let cases = cases(beta, nn, cfg)?;
            if cases.is_empty() {
                continue;
            }
            let weights: Vec<f64> = cases
                .iter()
                .map(|c| if c.amplitude { amplitude_weight(&c.channels) } else { 1.0 })
                .collect();
            let mc = McConfig::new(samples, cfg.master_seed).with_workers(cfg.workers);
            let est = estimate_observables(symmetry(beta), nn as usize, mc, cases.len(), |s, out| {
                for ((slot, c), w) in out.iter_mut().zip(&cases).zip(&weights) {
                    *slot = mb_probability_equal_times(s, &c.channels)? * w;
                }
                Ok(())
            })?;
            for (c, e) in cases.iter().zip(&est) {
                let formula = rational_to_f64(&c.expected);
                let z = e.z_score(formula);
                if z.is_nan() || z.abs() >= threshold {
                    log::warn!("{}: z = {z:.2}", c.label);
                    passed = false;
                }
                table.push_row(vec![
                    Cell::Text(c.label.clone()),
                    (beta as u32).into(),
                    (c.channels.statistics().epsilon() as i64).into(),
                    (c.channels.particles() as u32).into(),
                    nn.into(),
                    Cell::Text(if c.amplitude { "amplitude" } else { "probability" }.into()),
                    formula.into(),
                    Cell::Rational(c.expected.clone()),
                    e.mean.into(),
                    e.std_error.into(),
                    z.into(),
                ])?;
            }
        }
    }
    table.push_meta("z_threshold", threshold.to_string());
    table.push_meta("status", if passed { "pass" } else { "fail" });
    Ok(Outcome { table, passed })
}
