//! Exact coefficient tables of the generating-function series.

use mbscatter::diagrams::{exp_k0_series, k0_series, k1_series, k2_series, kappa1_series, tree_series};
use mbscatter::table::{Cell, Table};
use mbscatter::Result;
use serde_json::{json, Value};

use super::Outcome;
use crate::config::RunConfig;

pub fn defaults() -> Vec<(&'static str, Value)> {
    vec![("channels", json!(10)), ("order", json!(4))]
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let nn = cfg.u32("channels")?;
    let order = cfg.u64("order")? as usize;
    let series = [
        tree_series(nn, order)?,
        k0_series(nn, order)?,
        exp_k0_series(nn, order)?,
        kappa1_series(nn, order)?,
        k1_series(nn, order)?,
        k2_series(nn, order)?,
    ];
    let mut table = Table::new(["power", "tree_F", "K0", "exp_K0", "kappa1", "K1", "K2"]);
    table.push_meta("channels", nn.to_string());
    for m in 0..=order {
        let mut row = vec![Cell::Int(m as i64)];
        for s in &series {
            row.push(Cell::Rational(s.coefficient(m)?.clone()));
        }
        table.push_row(row)?;
    }
    Ok(Outcome::ok(table))
}
