//! Lattice geometry, layer partitions of the interaction set and model descriptions.

use std::collections::BTreeSet;

use crate::channel::{DenseOperator, EntanglementBreakingChannel, LindbladTerm};
use crate::error::{Result, SimError};

/// Maximum number of disjoint layers a local model may need.
pub const MAX_LAYERS: usize = 16;

/// A finite box of `Z^d` with row-major site numbering (last axis fastest).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    dims: Vec<usize>,
    periodic: bool,
}

impl Lattice {
    pub fn new(dims: Vec<usize>, periodic: bool) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(SimError::InvalidModel(format!("lattice extents {dims:?}")));
        }
        Ok(Self { dims, periodic })
    }

    pub fn chain(n: usize) -> Self {
        Self::new(vec![n], false).expect("nonzero chain length")
    }

    pub fn d(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn periodic(&self) -> bool {
        self.periodic
    }

    pub fn n(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn index(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.d() || coords.iter().zip(&self.dims).any(|(c, d)| c >= d) {
            return Err(SimError::SiteOutOfRange(coords.to_vec()));
        }
        Ok(coords.iter().zip(&self.dims).fold(0, |acc, (c, d)| acc * d + c))
    }

    pub fn coords(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.d()];
        for (slot, d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = index % d;
            index /= d;
        }
        out
    }

    /// Graph distance on the lattice (wrapping on periodic axes).
    pub fn distance(&self, a: usize, b: usize) -> usize {
        let (ca, cb) = (self.coords(a), self.coords(b));
        ca.iter()
            .zip(&cb)
            .zip(&self.dims)
            .map(|((x, y), d)| {
                let diff = x.abs_diff(*y);
                if self.periodic {
                    diff.min(d - diff)
                } else {
                    diff
                }
            })
            .sum()
    }

    pub fn diameter(&self, sites: &[usize]) -> usize {
        let mut best = 0;
        for (i, &a) in sites.iter().enumerate() {
            for &b in &sites[i + 1..] {
                best = best.max(self.distance(a, b));
            }
        }
        best
    }

    /// Nearest-neighbour bonds `(a, b)` with `a` the lower coordinate along the bond axis.
    /// Periodic wrap bonds are only added on axes longer than two.
    pub fn nn_bonds(&self) -> Vec<(usize, usize)> {
        let mut bonds = Vec::new();
        for site in 0..self.n() {
            let coords = self.coords(site);
            for axis in 0..self.d() {
                let d = self.dims[axis];
                let mut next = coords.clone();
                if coords[axis] + 1 < d {
                    next[axis] += 1;
                } else if self.periodic && d > 2 {
                    next[axis] = 0;
                } else {
                    continue;
                }
                bonds.push((site, self.index(&next).unwrap()));
            }
        }
        bonds
    }
}

/// Terms grouped into layers of pairwise disjoint supports; stores term indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerPartition {
    pub layers: Vec<Vec<usize>>,
}

impl LayerPartition {
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

/// Greedy colouring of the support-overlap graph, visiting terms in
/// lexicographic order of their sorted supports.
pub fn partition_layers(terms: &[LindbladTerm]) -> Result<LayerPartition> {
    let sorted_support = |i: usize| {
        let mut s = terms[i].support.clone();
        s.sort_unstable();
        s
    };
    let mut order: Vec<usize> = (0..terms.len()).collect();
    order.sort_by_key(|&i| (sorted_support(i), i));

    let mut layers: Vec<Vec<usize>> = Vec::new();
    let mut occupied: Vec<BTreeSet<usize>> = Vec::new();
    for i in order {
        let support = &terms[i].support;
        let slot = occupied
            .iter()
            .position(|used| support.iter().all(|s| !used.contains(s)));
        let slot = match slot {
            Some(s) => s,
            None => {
                layers.push(Vec::new());
                occupied.push(BTreeSet::new());
                layers.len() - 1
            }
        };
        layers[slot].push(i);
        occupied[slot].extend(support.iter().copied());
    }
    if layers.len() > MAX_LAYERS {
        return Err(SimError::TooManyLayers { layers: layers.len(), limit: MAX_LAYERS });
    }
    Ok(LayerPartition { layers })
}

/// Full continuous-time model: `d rho/dt = sum_Λ L_Λ rho + kappa sum_i (N_i - Id) rho`.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub lattice: Lattice,
    pub terms: Vec<LindbladTerm>,
    pub kappa: f64,
    pub noise: EntanglementBreakingChannel,
    /// Per-site single-qubit initial states of the product input.
    pub initial: Vec<DenseOperator>,
    pub t: f64,
    /// Maximum allowed term diameter; unconstrained when `None`.
    pub interaction_range: Option<usize>,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.lattice.n();
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return Err(SimError::InvalidModel(format!("noise rate {}", self.kappa)));
        }
        if !(self.t >= 0.0) || !self.t.is_finite() {
            return Err(SimError::InvalidModel(format!("evolution time {}", self.t)));
        }
        for term in &self.terms {
            term.validate()?;
            if let Some(&bad) = term.support.iter().find(|&&s| s >= n) {
                return Err(SimError::SiteOutOfRange(vec![bad]));
            }
            if let Some(r) = self.interaction_range {
                let diam = self.lattice.diameter(&term.support);
                if diam > r {
                    return Err(SimError::InvalidModel(format!(
                        "term on {:?} has diameter {diam} > range {r}",
                        term.support
                    )));
                }
            }
        }
        self.noise.validate(1e-9)?;
        if self.initial.len() != n {
            return Err(SimError::InvalidModel(format!(
                "{} initial states for {n} sites",
                self.initial.len()
            )));
        }
        if let Some(i) = self.initial.iter().position(|s| s.dim() != 2 || !s.is_density_matrix(1e-9)) {
            return Err(SimError::InvalidModel(format!("initial state of site {i} is not a qubit density matrix")));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.lattice.n()
    }
}

/// Deleted neighbourhood of a site together with its term multiplicity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighbourhood {
    pub sites: BTreeSet<usize>,
    /// Number of terms whose support contains the site.
    pub l_v: usize,
}

/// `N_v = { j != i : some term contains both i and j }`.
pub fn deleted_neighbourhood(model: &ModelSpec, coords: &[usize]) -> Result<Neighbourhood> {
    let site = model.lattice.index(coords)?;
    Ok(neighbourhood_of(&model.terms, site))
}

pub fn neighbourhood_of(terms: &[LindbladTerm], site: usize) -> Neighbourhood {
    let mut sites = BTreeSet::new();
    let mut l_v = 0;
    for term in terms.iter().filter(|t| t.support.contains(&site)) {
        l_v += 1;
        sites.extend(term.support.iter().copied().filter(|&j| j != site));
    }
    Neighbourhood { sites, l_v }
}

/// Number of terms touching at least one site of `set` (the `r` count of a neighbourhood).
pub fn terms_touching(terms: &[LindbladTerm], set: &BTreeSet<usize>) -> usize {
    terms
        .iter()
        .filter(|t| t.support.iter().any(|s| set.contains(s)))
        .count()
}
