//! JSON model documents.
//!
//! Matrices are row-major arrays of rows, each entry a `[re, im]` pair.
//! A model document looks like
//!
//! ```json
//! {
//!   "lattice": { "dims": [4], "periodic": false },
//!   "terms": [ { "preset": "heisenberg_nn", "strength": 1.0 } ],
//!   "kappa": 20.0,
//!   "noise": "z_measure",
//!   "initial": "zero",
//!   "t": 1.0
//! }
//! ```
//!
//! Explicit terms use `{ "sites": [[0], [1]], "hamiltonian": M, "jump_ops": [M, ...] }`
//! with lattice coordinates; explicit noise uses `{ "povm": [M, ...], "states": [M, ...] }`
//! and explicit initial states are a list of one matrix per site.

use serde::{Deserialize, Serialize};

use crate::channel::{DenseOperator, EntanglementBreakingChannel, LindbladTerm};
use crate::error::{Result, SimError};
use crate::lattice::{Lattice, ModelSpec};
use crate::linalg::{c, CMat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixRepr(pub Vec<Vec<[f64; 2]>>);

impl TryFrom<MatrixRepr> for DenseOperator {
    type Error = SimError;

    fn try_from(m: MatrixRepr) -> Result<Self> {
        let rows = m.0.len();
        if m.0.iter().any(|r| r.len() != rows) {
            return Err(SimError::Config("matrix rows must all have the matrix dimension".into()));
        }
        DenseOperator::new(CMat::from_fn(rows, rows, |i, j| c(m.0[i][j][0], m.0[i][j][1])))
    }
}

impl From<DenseOperator> for MatrixRepr {
    fn from(op: DenseOperator) -> Self {
        let m = op.matrix();
        MatrixRepr(
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub dims: Vec<usize>,
    #[serde(default)]
    pub periodic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TermConfig {
    Preset {
        preset: String,
        #[serde(default = "one")]
        strength: f64,
    },
    Explicit {
        sites: Vec<Vec<usize>>,
        #[serde(default)]
        hamiltonian: Option<DenseOperator>,
        #[serde(default)]
        jump_ops: Vec<DenseOperator>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseConfig {
    Preset(String),
    Explicit { povm: Vec<DenseOperator>, states: Vec<DenseOperator> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialConfig {
    Preset(String),
    PerSite(Vec<DenseOperator>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub terms: Vec<TermConfig>,
    pub kappa: f64,
    pub noise: NoiseConfig,
    pub initial: InitialConfig,
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction_range: Option<usize>,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn build(&self) -> Result<ModelSpec> {
        let lattice = Lattice::new(self.lattice.dims.clone(), self.lattice.periodic)?;
        let mut terms = Vec::new();
        for tc in &self.terms {
            match tc {
                TermConfig::Preset { preset, strength } => {
                    terms.extend(preset_terms(&lattice, preset, *strength)?)
                }
                TermConfig::Explicit { sites, hamiltonian, jump_ops } => {
                    let support = sites
                        .iter()
                        .map(|coords| lattice.index(coords))
                        .collect::<Result<Vec<_>>>()?;
                    terms.push(LindbladTerm::new(support, hamiltonian.clone(), jump_ops.clone())?);
                }
            }
        }
        let noise = match &self.noise {
            NoiseConfig::Preset(name) => noise_preset(name)?,
            NoiseConfig::Explicit { povm, states } => {
                EntanglementBreakingChannel::new(povm.clone(), states.clone())?
            }
        };
        let n = lattice.n();
        let initial = match &self.initial {
            InitialConfig::Preset(name) => vec![state_preset(name)?; n],
            InitialConfig::PerSite(states) => states.clone(),
        };
        let model = ModelSpec {
            lattice,
            terms,
            kappa: self.kappa,
            noise,
            initial,
            t: self.t,
            interaction_range: self.interaction_range,
        };
        model.validate()?;
        Ok(model)
    }
}

fn pauli_pair(p: &DenseOperator) -> DenseOperator {
    p.kron(p)
}

/// Unit two-qubit term for a named nearest-neighbour preset.
pub fn two_site_preset(name: &str) -> Result<LindbladTerm> {
    let (x, y, z) = (DenseOperator::pauli_x(), DenseOperator::pauli_y(), DenseOperator::pauli_z());
    let term = match name {
        "heisenberg_nn" => {
            let h = pauli_pair(&x).into_matrix() + pauli_pair(&y).into_matrix() + pauli_pair(&z).into_matrix();
            LindbladTerm::new(vec![0, 1], Some(DenseOperator::new(h)?), vec![])?
        }
        "ising_x_nn" => LindbladTerm::new(vec![0, 1], Some(pauli_pair(&x)), vec![])?,
        "exchange_nn" => LindbladTerm::new(vec![0, 1], None, vec![DenseOperator::swap()])?,
        "zz_dephasing_nn" => LindbladTerm::new(vec![0, 1], None, vec![pauli_pair(&z)])?,
        other => return Err(SimError::Config(format!("unknown term preset '{other}'"))),
    };
    Ok(term)
}

/// Expands a preset into terms on the lattice, each normalized to interaction
/// strength `strength`. Single-site presets: `dephasing`, `decay`.
pub fn preset_terms(lattice: &Lattice, name: &str, strength: f64) -> Result<Vec<LindbladTerm>> {
    if !(strength >= 0.0) {
        return Err(SimError::Config(format!("preset strength {strength}")));
    }
    let single = match name {
        "dephasing" => Some(LindbladTerm::new(vec![0], None, vec![DenseOperator::pauli_z()])?),
        "decay" => {
            let lower = DenseOperator::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]])?;
            Some(LindbladTerm::new(vec![0], None, vec![lower])?)
        }
        _ => None,
    };
    if let Some(unit) = single {
        let unit = unit.normalized(strength);
        return Ok((0..lattice.n()).map(|s| unit.with_support(vec![s])).collect());
    }
    let unit = two_site_preset(name)?.normalized(strength);
    Ok(lattice
        .nn_bonds()
        .into_iter()
        .map(|(a, b)| unit.with_support(vec![a, b]))
        .collect())
}

pub fn noise_preset(name: &str) -> Result<EntanglementBreakingChannel> {
    match name {
        "z_measure" => Ok(EntanglementBreakingChannel::z_measure()),
        "x_measure" => Ok(EntanglementBreakingChannel::x_measure()),
        "depolarizing" => Ok(EntanglementBreakingChannel::depolarizing()),
        "reset0" => Ok(EntanglementBreakingChannel::replacement(DenseOperator::ket0())),
        other => Err(SimError::Config(format!("unknown noise preset '{other}'"))),
    }
}

pub fn state_preset(name: &str) -> Result<DenseOperator> {
    match name {
        "zero" => Ok(DenseOperator::ket0()),
        "one" => Ok(DenseOperator::ket1()),
        "plus" => Ok(DenseOperator::plus()),
        "mixed" => Ok(DenseOperator::maximally_mixed(1)),
        other => Err(SimError::Config(format!("unknown state preset '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::interaction_strength;

    #[test]
    fn parses_preset_model() {
        let text = r#"{
            "lattice": {"dims": [4]},
            "terms": [{"preset": "heisenberg_nn", "strength": 1.0}],
            "kappa": 20.0, "noise": "z_measure", "initial": "zero", "t": 1.0
        }"#;
        let model = ModelConfig::from_json(text).unwrap().build().unwrap();
        assert_eq!(model.terms.len(), 3);
        assert!((interaction_strength(&model.terms).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(model.terms[1].support, vec![1, 2]);
    }

    #[test]
    fn parses_explicit_matrices() {
        let text = r#"{
            "lattice": {"dims": [2, 1]},
            "terms": [{"sites": [[0, 0], [1, 0]], "jump_ops": [[
                [[1,0],[0,0],[0,0],[0,0]],
                [[0,0],[0,0],[1,0],[0,0]],
                [[0,0],[1,0],[0,0],[0,0]],
                [[0,0],[0,0],[0,0],[1,0]]]]}],
            "kappa": 1.0,
            "noise": {"povm": [[[[1,0],[0,0]],[[0,0],[1,0]]]], "states": [[[[0.5,0],[0,0]],[[0,0],[0.5,0]]]]},
            "initial": [[[[1,0],[0,0]],[[0,0],[0,0]]], [[[0,0],[0,0]],[[0,0],[1,0]]]],
            "t": 0.5
        }"#;
        let model = ModelConfig::from_json(text).unwrap().build().unwrap();
        assert_eq!(model.terms[0].jump_ops[0], DenseOperator::swap());
        assert_eq!(model.noise, EntanglementBreakingChannel::depolarizing());
        assert_eq!(model.initial[1], DenseOperator::ket1());
    }

    #[test]
    fn matrix_repr_round_trips() {
        let op = DenseOperator::pauli_y();
        let json = serde_json::to_string(&op).unwrap();
        assert_eq!(json, "[[[0.0,0.0],[0.0,-1.0]],[[0.0,1.0],[0.0,0.0]]]");
        let back: DenseOperator = serde_json::from_str(&json).unwrap();
        assert_eq!(back, op);
    }

    #[test]
    fn rejects_unknown_presets_and_ragged_matrices() {
        let lat = Lattice::chain(3);
        assert!(preset_terms(&lat, "nope", 1.0).is_err());
        assert!(noise_preset("nope").is_err());
        assert!(serde_json::from_str::<DenseOperator>("[[[1,0],[0,0]],[[0,0]]]").is_err());
    }
}
