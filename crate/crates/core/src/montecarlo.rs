//! Monte Carlo averages over sampled scattering matrices.
//!
//! Sample i always uses the stream (master_seed, i), and samples are reduced
//! in fixed-size chunks merged in chunk order, so results do not depend on
//! the number of worker threads.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitudes::{mb_probability_equal_times, ChannelAssignment};
use crate::ensembles::{sample, ScatteringMatrix, SeedSpec, SymmetryClass};
use crate::error::{Error, Result};
use crate::symmetric::factorial;
use crate::table::{Cell, Format, Table};

/// Samples per reduction chunk.
pub const CHUNK_SIZE: u64 = 1024;

/// One-pass mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Combine with the statistics of a later block of samples.
    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / count as f64;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / count as f64;
        self.count = count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
    pub master_seed: u64,
    pub elapsed: f64,
}

impl MomentEstimate {
    /// (mean − expected) / standard error; zero when both agree exactly.
    pub fn z_score(&self, expected: f64) -> f64 {
        let diff = self.mean - expected;
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }

    pub fn within(&self, expected: f64, n_se: f64) -> bool {
        self.z_score(expected).abs() <= n_se
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub samples: u64,
    pub master_seed: u64,
    /// Worker threads; 0 uses the global rayon pool.
    pub workers: usize,
}

impl RunConfig {
    pub fn new(samples: u64, master_seed: u64) -> Self {
        Self {
            samples,
            master_seed,
            workers: 0,
        }
    }

    pub fn with_workers(self, workers: usize) -> Self {
        Self { workers, ..self }
    }
}

/// Averages `k` observables evaluated on the same sampled matrices.
pub fn estimate_observables<F>(
    symmetry: SymmetryClass,
    n_channels: usize,
    cfg: RunConfig,
    k: usize,
    observe: F,
) -> Result<Vec<MomentEstimate>>
where
    F: Fn(&ScatteringMatrix, &mut [f64]) -> Result<()> + Sync,
{
    if cfg.samples < 2 {
        return Err(Error::Config(format!("need at least 2 samples, got {}", cfg.samples)));
    }
    if n_channels == 0 {
        return Err(Error::InvalidDimension("N must be at least 1".into()));
    }
    let start = Instant::now();
    let chunks = cfg.samples.div_ceil(CHUNK_SIZE);
    let run_chunk = |c: u64| -> Result<Vec<Welford>> {
        let mut acc = vec![Welford::new(); k];
        let mut values = vec![0.0; k];
        let lo = c * CHUNK_SIZE;
        let hi = ((c + 1) * CHUNK_SIZE).min(cfg.samples);
        for i in lo..hi {
            let s = sample(symmetry, n_channels, SeedSpec::new(cfg.master_seed, i))?;
            observe(&s, &mut values)?;
            for (a, &v) in acc.iter_mut().zip(&values) {
                a.push(v);
            }
        }
        Ok(acc)
    };
    let partials: Vec<Result<Vec<Welford>>> = if cfg.workers == 0 {
        (0..chunks).into_par_iter().map(run_chunk).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Resource(format!("cannot start worker pool: {e}")))?;
        pool.install(|| (0..chunks).into_par_iter().map(run_chunk).collect())
    };
    let mut total = vec![Welford::new(); k];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part?) {
            t.merge(&p);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    Ok(total
        .into_iter()
        .map(|w| MomentEstimate {
            mean: w.mean(),
            std_error: w.std_error(),
            samples: w.count(),
            master_seed: cfg.master_seed,
            elapsed,
        })
        .collect())
}

fn check_channels(ch: &ChannelAssignment, n_channels: usize) -> Result<()> {
    ch.check_range(n_channels)
}

/// ⟨P⟩ with per-sample values from [`mb_probability_equal_times`].
pub fn estimate_first_moment(
    symmetry: SymmetryClass,
    ch: &ChannelAssignment,
    n_channels: usize,
    cfg: RunConfig,
) -> Result<MomentEstimate> {
    check_channels(ch, n_channels)?;
    let est = estimate_observables(symmetry, n_channels, cfg, 1, |s, out| {
        out[0] = mb_probability_equal_times(s, ch)?;
        Ok(())
    })?;
    Ok(est[0])
}

/// Converts a probability into |Ã|² = P·a!b!/n!, the squared symmetrised
/// amplitude normalised by √n!.
pub fn amplitude_weight(ch: &ChannelAssignment) -> f64 {
    (ch.incoming_multiplicity_factorial() * ch.outgoing_multiplicity_factorial()) as f64
        / factorial(ch.particles() as u32) as f64
}

/// ⟨|Ã|⁴⟩, the second moment in the amplitude normalisation.
pub fn estimate_second_moment(
    symmetry: SymmetryClass,
    ch: &ChannelAssignment,
    n_channels: usize,
    cfg: RunConfig,
) -> Result<MomentEstimate> {
    check_channels(ch, n_channels)?;
    let w = amplitude_weight(ch);
    let est = estimate_observables(symmetry, n_channels, cfg, 1, |s, out| {
        let a2 = mb_probability_equal_times(s, ch)? * w;
        out[0] = a2 * a2;
        Ok(())
    })?;
    Ok(est[0])
}

/// One estimate per grid point, labelled by named parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub params: Vec<(String, f64)>,
    pub estimate: MomentEstimate,
}

/// Runs `estimator` over every grid point and streams the rows to `sink`.
/// A failing sink yields an I/O error carrying the number of rows written.
pub fn sweep<F>(
    grid: &[Vec<(String, f64)>],
    estimator: F,
    sink: &mut dyn Write,
    format: Format,
) -> Result<Vec<SweepRow>>
where
    F: Fn(&[(String, f64)]) -> Result<MomentEstimate>,
{
    let Some(first) = grid.first() else {
        return Err(Error::Config("sweep grid is empty".into()));
    };
    let mut columns: Vec<String> = first.iter().map(|(k, _)| k.clone()).collect();
    columns.extend(["mean", "std_error", "samples", "master_seed"].map(String::from));
    let mut table = Table::new(columns);
    if format == Format::Csv {
        table.write_csv_header(sink)?;
    }
    let mut rows = Vec::with_capacity(grid.len());
    for (i, point) in grid.iter().enumerate() {
        if point.len() != first.len() {
            return Err(Error::Config(format!("grid point {i} has a different parameter set")));
        }
        let est = estimator(point)?;
        let mut cells: Vec<Cell> = point.iter().map(|(_, v)| Cell::Float(*v)).collect();
        cells.extend([
            Cell::Float(est.mean),
            Cell::Float(est.std_error),
            Cell::Int(est.samples as i64),
            Cell::Text(est.master_seed.to_string()),
        ]);
        if format == Format::Csv {
            Table::write_csv_row(&cells, sink, i)?;
        }
        table.push_row(cells)?;
        rows.push(SweepRow {
            params: point.clone(),
            estimate: est,
        });
    }
    if format == Format::Json {
        table.write_json(sink)?;
    }
    sink.flush().map_err(|source| Error::Io {
        rows_written: rows.len(),
        source,
    })?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitudes::Statistics;

    #[test]
    fn welford_matches_two_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1 + 1e6).collect();
        let mut w = Welford::new();
        xs.iter().for_each(|&x| w.push(x));
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((w.mean() - mean).abs() < 1e-9);
        assert!((w.variance() - var).abs() < 1e-9 * var);
    }

    #[test]
    fn merge_equals_sequential() {
        let xs: Vec<f64> = (0..500).map(|i| (i as f64).sin()).collect();
        let mut all = Welford::new();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Welford::new();
        let mut b = Welford::new();
        xs[..123].iter().for_each(|&x| a.push(x));
        xs[123..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert_eq!(a.count(), all.count());
        assert!((a.mean() - all.mean()).abs() < 1e-14);
        assert!((a.variance() - all.variance()).abs() < 1e-13);
    }

    #[test]
    fn too_few_samples() {
        let ch = ChannelAssignment::new(vec![0], vec![1], Statistics::Boson).unwrap();
        let r = estimate_first_moment(SymmetryClass::Unitary, &ch, 4, RunConfig::new(0, 1));
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let ch = ChannelAssignment::new(vec![0, 1], vec![2, 3], Statistics::Boson).unwrap();
        let cfg = RunConfig::new(3000, 42);
        let a = estimate_first_moment(SymmetryClass::Unitary, &ch, 5, cfg.with_workers(1)).unwrap();
        let b = estimate_first_moment(SymmetryClass::Unitary, &ch, 5, cfg.with_workers(3)).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn empty_grid_is_config_error() {
        let mut out = Vec::new();
        let r = sweep(&[], |_| unreachable!(), &mut out, Format::Csv);
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
