//! Second moments ⟨|Ã_n|⁴⟩: exact, leading order (n + 1)/N²ⁿ, the same with
//! the exact squared mean in place of 1/N²ⁿ, and optional MC.

use mbscatter::amplitudes::{ChannelAssignment, Statistics};
use mbscatter::moments::{
    first_moment, rational_to_f64, Occupation, second_moment_exact, second_moment_orthogonal_n1, second_moment_orthogonal_n2,
    variance_leading_order,
};
use mbscatter::montecarlo::{estimate_second_moment, RunConfig as McConfig};
use mbscatter::table::{Cell, Table};
use mbscatter::{Error, Result};
use num_rational::BigRational;
use serde_json::{json, Value};

use super::{symmetry, Outcome};
use crate::config::RunConfig;

pub fn defaults() -> Vec<(&'static str, Value)> {
    vec![
        ("beta", json!(2)),
        ("epsilon", json!(1)),
        ("n_values", json!([1, 2, 3])),
        ("channels", json!([6, 12, 100])),
        ("mc_samples", json!(0)),
    ]
}

pub(crate) fn exact(beta: u8, n: u32, nn: u32, stat: Statistics) -> Result<Option<BigRational>> {
    match (beta, n, stat) {
        (2, _, _) => second_moment_exact(n, nn, stat).map(Some),
        (1, 1, _) => Ok(Some(second_moment_orthogonal_n1(nn))),
        (1, 2, Statistics::Boson) => second_moment_orthogonal_n2(nn).map(Some),
        _ => Ok(None),
    }
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let beta = cfg.beta("beta")?;
    let stat = Statistics::from_epsilon(cfg.epsilon("epsilon")?)?;
    let samples = cfg.u64("mc_samples")?;
    let mut table = Table::new([
        "n",
        "N",
        "exact",
        "exact_value",
        "leading_order",
        "ratio_exact_leading",
        "leading_corrected",
        "ratio_exact_corrected",
        "mc_mean",
        "mc_se",
        "z_score",
    ]);
    for &n in &cfg.u32_list("n_values")? {
        if n == 0 {
            return Err(Error::Config("n_values: particle numbers start at 1".into()));
        }
        for &nn in &cfg.u32_list("channels")? {
            let ex = exact(beta, n, nn, stat)?;
            let value = ex.as_ref().map_or(f64::NAN, rational_to_f64);
            let lo = variance_leading_order(n, nn);
            let lead = lo.second_moment;
            // n/N²ⁿ plus the squared exact first moment
            let pt = rational_to_f64(&first_moment(n, nn, symmetry(beta), stat, Occupation::distinct())?.per_ordering);
            let corrected = lo.variance + pt * pt;
            let (mean, se, z) = if samples > 0 && 2 * n <= nn {
                let k = n as usize;
                let ch = ChannelAssignment::new((0..k).collect(), (k..2 * k).collect(), stat)?;
                let mc = McConfig::new(samples, cfg.master_seed).with_workers(cfg.workers);
                let e = estimate_second_moment(symmetry(beta), &ch, nn as usize, mc)?;
                let z = if value.is_nan() { f64::NAN } else { e.z_score(value) };
                (e.mean, e.std_error, z)
            } else {
                (f64::NAN, f64::NAN, f64::NAN)
            };
            table.push_row(vec![
                n.into(),
                nn.into(),
                ex.map_or(Cell::Text(String::new()), Cell::Rational),
                value.into(),
                lead.into(),
                (value / lead).into(),
                corrected.into(),
                (value / corrected).into(),
                mean.into(),
                se.into(),
                z.into(),
            ])?;
        }
    }
    Ok(Outcome::ok(table))
}
