use std::path::Path;

use pqsim::config::ModelConfig;
use pqsim::sampler::DEFAULT_C_PRIME;
use pqsim::trotter::{TrotterOptions, DEFAULT_G_FACTOR, DEFAULT_TAU_C};
use pqsim::SimError;
use serde::{Deserialize, Serialize};

pub const DEFAULT_PRESET: &str = "chain3";
pub const DEFAULT_EPS: f64 = 0.05;
pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_MC_ASSIGNMENTS: u64 = 1_000_000;

const PRESETS: &[(&str, &str)] = &[
    ("chain3", include_str!("../presets/chain3.json")),
    ("chain4", include_str!("../presets/chain4.json")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Preset(String),
    Inline(ModelConfig),
}

/// Run parameters as read from a file; every field may be overridden on the
/// command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelSource>,
    pub steps: Option<usize>,
    pub eps: Option<f64>,
    pub samples: Option<usize>,
    pub c_prime: Option<f64>,
    pub tau_c: Option<f64>,
    pub g: Option<f64>,
    pub allow_non_cp: Option<bool>,
    pub mc_assignments: Option<u64>,
}

/// Fully resolved parameters, echoed into every output. The worker count is
/// left out on purpose: it never changes results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveConfig {
    pub preset: Option<String>,
    pub model: ModelConfig,
    pub steps: Option<usize>,
    pub eps: f64,
    pub samples: usize,
    pub c_prime: f64,
    pub tau_c: f64,
    pub g: Option<f64>,
    pub g_factor: f64,
    pub allow_non_cp: bool,
    pub mc_assignments: u64,
}

impl EffectiveConfig {
    pub fn trotter_options(&self) -> TrotterOptions {
        TrotterOptions { g_factor: self.g_factor, g: self.g, allow_non_cp: self.allow_non_cp, tau_c: self.tau_c }
    }
}

pub fn preset(name: &str) -> Result<RunConfig, SimError> {
    let text = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| SimError::Config(format!("unknown model preset '{name}'")))?;
    parse_run_config(text)
}

/// Accepts either a run config or a bare model config.
pub fn parse_run_config(text: &str) -> Result<RunConfig, SimError> {
    match serde_json::from_str::<RunConfig>(text) {
        Ok(rc) => Ok(rc),
        Err(run_err) => match ModelConfig::from_json(text) {
            Ok(model) => Ok(RunConfig { model: Some(ModelSource::Inline(model)), ..Default::default() }),
            Err(model_err) => Err(SimError::Config(format!(
                "neither a run config ({run_err}) nor a model document ({model_err})"
            ))),
        },
    }
}

pub fn load(path: Option<&Path>) -> Result<RunConfig, SimError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| SimError::Config(format!("cannot read {}: {e}", p.display())))?;
            parse_run_config(&text)
        }
    }
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub steps: Option<usize>,
    pub eps: Option<f64>,
    pub samples: Option<usize>,
    pub c_prime: Option<f64>,
    pub tau_c: Option<f64>,
    pub g: Option<f64>,
    pub allow_non_cp: bool,
    pub mc_assignments: Option<u64>,
}

pub fn resolve(file: RunConfig, cli: &Overrides) -> Result<EffectiveConfig, SimError> {
    let source = file.model.clone().unwrap_or_else(|| ModelSource::Preset(DEFAULT_PRESET.into()));
    let (preset_name, model, defaults) = match source {
        ModelSource::Preset(name) => {
            let p = preset(&name)?;
            let Some(ModelSource::Inline(m)) = p.model.clone() else {
                return Err(SimError::Config(format!("preset '{name}' has no inline model")));
            };
            (Some(name), m, p)
        }
        ModelSource::Inline(m) => (None, m, RunConfig::default()),
    };
    // Precedence: command line, then the file, then the preset, then built-ins.
    let pick = |a: Option<f64>, b: Option<f64>, c: Option<f64>| a.or(b).or(c);
    let eff = EffectiveConfig {
        preset: preset_name,
        model,
        steps: cli.steps.or(file.steps).or(defaults.steps),
        eps: pick(cli.eps, file.eps, defaults.eps).unwrap_or(DEFAULT_EPS),
        samples: cli.samples.or(file.samples).or(defaults.samples).unwrap_or(DEFAULT_SAMPLES),
        c_prime: pick(cli.c_prime, file.c_prime, defaults.c_prime).unwrap_or(DEFAULT_C_PRIME),
        tau_c: pick(cli.tau_c, file.tau_c, defaults.tau_c).unwrap_or(DEFAULT_TAU_C),
        g: pick(cli.g, file.g, defaults.g),
        g_factor: DEFAULT_G_FACTOR,
        allow_non_cp: cli.allow_non_cp || file.allow_non_cp.or(defaults.allow_non_cp).unwrap_or(false),
        mc_assignments: cli
            .mc_assignments
            .or(file.mc_assignments)
            .or(defaults.mc_assignments)
            .unwrap_or(DEFAULT_MC_ASSIGNMENTS),
    };
    validate(&eff)?;
    Ok(eff)
}

fn validate(c: &EffectiveConfig) -> Result<(), SimError> {
    if c.steps == Some(0) {
        return Err(SimError::Config("steps must be positive".into()));
    }
    if !(c.eps > 0.0 && c.eps < 1.0) {
        return Err(SimError::Config(format!("eps = {} must lie in (0, 1)", c.eps)));
    }
    if c.samples == 0 {
        return Err(SimError::Config("samples must be positive".into()));
    }
    if !(c.c_prime > 0.0) {
        return Err(SimError::Config(format!("c' = {} must be positive", c.c_prime)));
    }
    if !(c.tau_c > 0.0 && c.tau_c < 1.0) {
        return Err(SimError::Config(format!("tau constant {} must lie in (0, 1)", c.tau_c)));
    }
    c.model.build()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve() {
        for (name, _) in PRESETS {
            let rc = RunConfig { model: Some(ModelSource::Preset(name.to_string())), ..Default::default() };
            let eff = resolve(rc, &Overrides::default()).unwrap();
            assert_eq!(eff.preset.as_deref(), Some(*name));
        }
    }

    #[test]
    fn command_line_wins() {
        let rc = RunConfig { samples: Some(7), ..Default::default() };
        let eff = resolve(rc.clone(), &Overrides { samples: Some(9), ..Default::default() }).unwrap();
        assert_eq!(eff.samples, 9);
        assert_eq!(resolve(rc, &Overrides::default()).unwrap().samples, 7);
    }

    #[test]
    fn bad_values_are_config_errors() {
        let rc = RunConfig { eps: Some(2.0), ..Default::default() };
        assert!(matches!(resolve(rc, &Overrides::default()), Err(SimError::Config(_))));
        assert!(parse_run_config("{\"bogus\": 1}").is_err());
    }
}
