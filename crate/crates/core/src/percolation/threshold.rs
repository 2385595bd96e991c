//! Site-percolation threshold by Newman–Ziff sweeps.
//!
//! Each trial occupies the sites of a `L^D` box in a uniformly random order
//! and records the occupied fraction at which the occupied sites first connect
//! the two faces normal to axis 0. The spanning probability at occupation `p`
//! is the fraction of trials whose first-spanning fraction is at most `p`, so
//! the 1/2 crossing is the median of those fractions.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::clusters::spans_axis0;
use super::grid::Grid;
use super::union_find::UnionFind;
use crate::error::{Result, SimError};
use crate::rng::{domain, substream};

pub const BOOTSTRAP_RESAMPLES: usize = 1000;
pub const MIN_TRIALS: usize = 20;

/// Occupied fraction at which the occupied sites first span axis 0.
pub fn first_spanning_fraction<R: Rng + ?Sized>(grid: &Grid, rng: &mut R) -> f64 {
    let n = grid.len();
    let (top, bottom) = (n, n + 1);
    let last = grid.dims()[0] - 1;
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.shuffle(rng);
    let mut occupied = vec![false; n];
    let mut uf = UnionFind::new(n + 2);
    for (k, &v) in order.iter().enumerate() {
        let v = v as usize;
        occupied[v] = true;
        let layer = grid.coord(v, 0);
        if layer == 0 {
            uf.union(v, top);
        }
        if layer == last {
            uf.union(v, bottom);
        }
        grid.for_each_neighbour(v, |u| {
            if occupied[u] {
                uf.union(u, v);
            }
        });
        if uf.connected(top, bottom) {
            return (k + 1) as f64 / n as f64;
        }
    }
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeEstimate {
    pub size: usize,
    pub median: f64,
    pub mean: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdEstimate {
    /// Median first-spanning fraction at the largest size.
    pub p_c: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub per_size: Vec<SizeEstimate>,
}

impl ThresholdEstimate {
    pub fn ci_width(&self) -> f64 {
        self.ci_high - self.ci_low
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Percentile bootstrap (95%) of the median.
pub fn bootstrap_median_ci(values: &[f64], resamples: usize, seed: u64) -> (f64, f64) {
    let mut rng = substream(seed, domain::BOOTSTRAP, 0);
    let mut medians: Vec<f64> = (0..resamples)
        .map(|_| {
            let sample: Vec<f64> = (0..values.len()).map(|_| values[rng.random_range(0..values.len())]).collect();
            median(&sample)
        })
        .collect();
    medians.sort_by(f64::total_cmp);
    let at = |q: f64| medians[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    (at(0.025), at(0.975))
}

/// Estimates the site threshold of `Z^{d_plus_1}` from `trials` sweeps at each
/// box size. With `max_ci_width`, too few trials to reach that 95% interval
/// width at the largest size is an error.
pub fn estimate_threshold(
    d_plus_1: usize,
    sizes: &[usize],
    trials: usize,
    seed: u64,
    max_ci_width: Option<f64>,
) -> Result<ThresholdEstimate> {
    if d_plus_1 == 0 || sizes.is_empty() || sizes.iter().any(|&s| s < 2) {
        return Err(SimError::Config(format!(
            "threshold estimation needs a positive dimension and extents >= 2 (got {d_plus_1}, {sizes:?})"
        )));
    }
    if trials < MIN_TRIALS {
        return Err(SimError::InsufficientTrials(format!("{trials} trials, at least {MIN_TRIALS} needed")));
    }
    let mut per_size = Vec::new();
    let mut last = Vec::new();
    for (si, &size) in sizes.iter().enumerate() {
        let grid = Grid::open_box(vec![size; d_plus_1])?;
        let fractions: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let mut rng = substream(seed, domain::PERCOLATION, ((si as u64) << 32) | trial as u64);
                first_spanning_fraction(&grid, &mut rng)
            })
            .collect();
        per_size.push(SizeEstimate {
            size,
            median: median(&fractions),
            mean: fractions.iter().sum::<f64>() / trials as f64,
            trials,
        });
        last = fractions;
    }
    let (ci_low, ci_high) = bootstrap_median_ci(&last, BOOTSTRAP_RESAMPLES, seed);
    let est = ThresholdEstimate { p_c: median(&last), ci_low, ci_high, per_size };
    if let Some(w) = max_ci_width {
        if est.ci_width() > w {
            return Err(SimError::InsufficientTrials(format!(
                "bootstrap interval width {:.4} exceeds {w} with {trials} trials",
                est.ci_width()
            )));
        }
    }
    Ok(est)
}

/// Samples an independent field: each vertex open with probability `p_open`.
pub fn independent_field<R: Rng + ?Sized>(grid: &Grid, p_open: f64, rng: &mut R) -> Vec<bool> {
    (0..grid.len()).map(|_| rng.random::<f64>() < p_open).collect()
}

/// Fraction of independent fields in which vertices of state `state`
/// (true = open) span axis 0.
pub fn spanning_probability(grid: &Grid, p_open: f64, state: bool, trials: usize, seed: u64) -> f64 {
    let hits: usize = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = substream(seed, domain::PERCOLATION, trial as u64);
            usize::from(spans_axis0(grid, &independent_field(grid, p_open, &mut rng), state))
        })
        .sum();
    hits as f64 / trials as f64
}
