//! Coupling of a dependent site field with an independent one it dominates.
//!
//! Every vertex `v` has open probabilities `p_v(x)` indexed by the state `x` of
//! its neighbours, and `x_v` is the pattern with the smallest one. Vertices are
//! swept in index order (time-major, then lexicographic sites). At each vertex
//! an independent `Z_v ~ Bernoulli(p_v(x_v))` is drawn; `Z_v = 1` forces
//! `X_v = 1`, otherwise `X_v = 1` with probability
//! `(p_v(x) - p_v(x_v)) / (1 - p_v(x_v))` for the realized pattern `x`. So
//! `X_v` is open with probability exactly `p_v(x)` given `x`, and every open
//! vertex of `Z` is open in `X`. Neighbours later in the sweep have no value
//! yet and read as closed.

use rand::Rng;

use super::grid::Grid;
use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTable {
    grid: Grid,
    neighbours: Vec<Vec<usize>>,
    /// `probs[v][x]` where bit `j` of `x` is the state of `neighbours[v][j]`.
    probs: Vec<Vec<f64>>,
}

impl ConditionalTable {
    pub fn new(grid: Grid, probs: Vec<Vec<f64>>) -> Result<Self> {
        let neighbours: Vec<Vec<usize>> = (0..grid.len()).map(|v| grid.neighbours(v)).collect();
        if probs.len() != grid.len() {
            return Err(SimError::DimensionMismatch(format!(
                "{} probability rows for {} vertices",
                probs.len(),
                grid.len()
            )));
        }
        for (v, row) in probs.iter().enumerate() {
            if row.len() != 1 << neighbours[v].len() {
                return Err(SimError::DimensionMismatch(format!(
                    "vertex {v} has {} neighbours but {} table entries",
                    neighbours[v].len(),
                    row.len()
                )));
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(SimError::DimensionMismatch(format!("vertex {v} has probabilities outside [0, 1]")));
            }
        }
        Ok(Self { grid, neighbours, probs })
    }

    /// Table from a rule `f(vertex, neighbours, pattern)`.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(usize, &[usize], usize) -> f64) -> Result<Self> {
        let probs = (0..grid.len())
            .map(|v| {
                let nb = grid.neighbours(v);
                (0..1usize << nb.len()).map(|x| f(v, &nb, x)).collect()
            })
            .collect();
        Self::new(grid, probs)
    }

    pub fn constant(grid: Grid, p: f64) -> Result<Self> {
        Self::from_fn(grid, |_, _, _| p)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn neighbours(&self, v: usize) -> &[usize] {
        &self.neighbours[v]
    }

    pub fn prob(&self, v: usize, pattern: usize) -> f64 {
        self.probs[v][pattern]
    }

    /// Index and value of the least favourable pattern `x_v` (first on ties).
    pub fn worst_pattern(&self, v: usize) -> (usize, f64) {
        self.probs[v]
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (x, &p)| if p < best.1 { (x, p) } else { best })
    }

    pub fn min_probability(&self) -> f64 {
        (0..self.grid.len()).map(|v| self.worst_pattern(v).1).fold(f64::INFINITY, f64::min)
    }

    /// Pattern seen by `v` when vertices before it in the sweep are set by `x`
    /// and later ones read as closed.
    pub fn sweep_pattern(&self, v: usize, x: &[bool]) -> usize {
        self.neighbours[v]
            .iter()
            .enumerate()
            .filter(|&(_, &u)| u < v && x[u])
            .fold(0, |acc, (j, _)| acc | (1 << j))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoupledSample {
    /// Dependent field (true = open).
    pub x: Vec<bool>,
    /// Independent field `Z_{v, x_v}`.
    pub z: Vec<bool>,
}

pub fn coupled_dependent_sample<R: Rng + ?Sized>(table: &ConditionalTable, rng: &mut R) -> CoupledSample {
    let n = table.grid.len();
    let mut x = vec![false; n];
    let mut z = vec![false; n];
    for v in 0..n {
        let (_, p_min) = table.worst_pattern(v);
        z[v] = rng.random::<f64>() < p_min;
        x[v] = if z[v] {
            true
        } else {
            let p = table.prob(v, table.sweep_pattern(v, &x));
            let lift = if p_min < 1.0 { ((p - p_min) / (1.0 - p_min)).clamp(0.0, 1.0) } else { 0.0 };
            rng.random::<f64>() < lift
        };
    }
    CoupledSample { x, z }
}
