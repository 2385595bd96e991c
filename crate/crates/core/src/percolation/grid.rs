use crate::error::{Result, SimError};

/// Box of `Z^D` with row-major numbering (last axis fastest) and
/// nearest-neighbour (von Neumann) adjacency. Axis 0 is time for
/// percolation configurations built from a circuit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    dims: Vec<usize>,
    periodic: Vec<bool>,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(dims: Vec<usize>, periodic: Vec<bool>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) || periodic.len() != dims.len() {
            return Err(SimError::DimensionMismatch(format!(
                "grid extents {dims:?} with periodic flags {periodic:?}"
            )));
        }
        let mut strides = vec![1; dims.len()];
        for a in (0..dims.len() - 1).rev() {
            strides[a] = strides[a + 1] * dims[a + 1];
        }
        Ok(Self { dims, periodic, strides })
    }

    pub fn open_box(dims: Vec<usize>) -> Result<Self> {
        let periodic = vec![false; dims.len()];
        Self::new(dims, periodic)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coord(&self, v: usize, axis: usize) -> usize {
        (v / self.strides[axis]) % self.dims[axis]
    }

    /// Calls `f` on each distinct neighbour of `v`. Wrapping is applied only on
    /// periodic axes longer than two, so no edge is duplicated.
    pub fn for_each_neighbour(&self, v: usize, mut f: impl FnMut(usize)) {
        for a in 0..self.dims.len() {
            let x = self.coord(v, a);
            let (len, s) = (self.dims[a], self.strides[a]);
            let wrap = self.periodic[a] && len > 2;
            if x > 0 {
                f(v - s);
            } else if wrap {
                f(v + (len - 1) * s);
            }
            if x + 1 < len {
                f(v + s);
            } else if wrap {
                f(v - (len - 1) * s);
            }
        }
    }

    /// Neighbours with a larger index, so each edge is visited once.
    pub fn for_each_forward_edge(&self, mut f: impl FnMut(usize, usize)) {
        for v in 0..self.len() {
            self.for_each_neighbour(v, |u| {
                if u > v {
                    f(v, u)
                }
            });
        }
    }

    pub fn neighbours(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(2 * self.rank());
        self.for_each_neighbour(v, |u| out.push(u));
        out
    }
}
