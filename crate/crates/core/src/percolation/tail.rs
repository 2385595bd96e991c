use rayon::prelude::*;
use serde::Serialize;

use super::clusters::max_closed_cluster;
use super::grid::Grid;
use super::threshold::independent_field;
use crate::error::{Result, SimError};
use crate::rng::{domain, substream};

pub const MIN_TAIL_CONFIGS: usize = 100;
/// Fit points need at least this many configurations reaching the size.
pub const MIN_TAIL_SUPPORT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit { slope, intercept: my - slope * mx, r2, points: n })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailStats {
    pub configs: usize,
    /// `(s, Prob(max >= s))` for `s = 1..=largest observed maximum`.
    pub ccdf: Vec<(usize, f64)>,
    /// Fit of `ln Prob(max >= s)` against `s` over the tail region.
    pub fit: Option<LinearFit>,
}

impl TailStats {
    pub fn prob_at_least(&self, s: usize) -> f64 {
        self.ccdf.iter().find(|(k, _)| *k == s).map_or(0.0, |&(_, p)| p)
    }
}

/// Empirical tail of the maximum closed-cluster size. The exponential fit uses
/// the sizes where the tail probability is at most 1/2 and at least
/// `MIN_TAIL_SUPPORT` configurations reach the size.
pub fn cluster_tail_stats(max_sizes: &[usize]) -> Result<TailStats> {
    let configs = max_sizes.len();
    if configs < MIN_TAIL_CONFIGS {
        return Err(SimError::InsufficientTrials(format!(
            "{configs} configurations, at least {MIN_TAIL_CONFIGS} needed for a tail"
        )));
    }
    let largest = max_sizes.iter().copied().max().unwrap_or(0);
    let mut at_least = vec![0usize; largest + 2];
    for &m in max_sizes {
        at_least[m] += 1;
    }
    for s in (0..=largest).rev() {
        at_least[s] += at_least[s + 1];
    }
    let ccdf: Vec<(usize, f64)> = (1..=largest).map(|s| (s, at_least[s] as f64 / configs as f64)).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = (1..=largest)
        .filter(|&s| at_least[s] >= MIN_TAIL_SUPPORT && at_least[s] * 2 <= configs)
        .map(|s| (s as f64, (at_least[s] as f64 / configs as f64).ln()))
        .unzip();
    let fit = if xs.len() >= 3 { linear_fit(&xs, &ys) } else { None };
    Ok(TailStats { configs, ccdf, fit })
}

/// Maximum closed-cluster sizes of `configs` independent fields.
pub fn independent_max_clusters(grid: &Grid, p_open: f64, configs: usize, seed: u64) -> Vec<usize> {
    (0..configs)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, domain::PERCOLATION, i as u64);
            max_closed_cluster(grid, &independent_field(grid, p_open, &mut rng))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_a_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| -0.5 * x + 2.0).collect();
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12 && (f.intercept - 2.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_open_has_empty_tail() {
        let stats = cluster_tail_stats(&[0; 150]).unwrap();
        assert_eq!(stats.prob_at_least(1), 0.0);
        assert!(stats.fit.is_none());
        assert!(cluster_tail_stats(&[1; 10]).is_err());
    }

    #[test]
    fn ccdf_counts() {
        let mut sizes = vec![1; 50];
        sizes.extend(vec![3; 50]);
        let stats = cluster_tail_stats(&sizes).unwrap();
        assert_eq!(stats.ccdf, vec![(1, 1.0), (2, 0.5), (3, 0.5)]);
    }
}
