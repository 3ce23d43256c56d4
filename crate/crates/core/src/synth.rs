//! Synthetic measurements from known-parameter models, and the shipped
//! three-area reference example.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::io::{parse_config_str, ProjectConfig};
use crate::lti::{mimo_to_ss, MeasurementTrace};
use crate::plant::{BaseQuantities, UnitModel};
use crate::system::{simulate_scenario, Scenario, SystemModel};

pub const REFERENCE_CONFIG: &str = include_str!("../data/ieee39_three_area.toml");

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub model: SystemModel,
    pub scenario: Scenario,
    /// Standard deviation (pu) of white noise added to output channels.
    pub noise_std: f64,
    pub seed: u64,
    /// Channels to keep; `None` keeps all.
    pub channels: Option<Vec<String>>,
}

/// Wraps a single unit as a system with its own input names and output `dP`.
pub fn unit_system(model: &UnitModel, base: &BaseQuantities) -> Result<SystemModel> {
    let tf = model.transfer(base)?;
    Ok(SystemModel {
        ss: mimo_to_ss(&tf)?,
        inputs: tf.input_names().to_vec(),
        outputs: tf.output_names().to_vec(),
    })
}

pub fn generate(spec: &SynthSpec) -> Result<MeasurementTrace> {
    if !(spec.noise_std >= 0.0 && spec.noise_std.is_finite()) {
        return Err(Error::invalid(
            "noise_std",
            format!("must be non-negative, got {}", spec.noise_std),
        ));
    }
    let mut tr = simulate_scenario(&spec.model, &spec.scenario)?;
    if spec.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_std)
            .map_err(|e| Error::invalid("noise_std", e.to_string()))?;
        for name in &spec.model.outputs {
            if let Some(c) = tr.channels.get_mut(name) {
                for v in c.iter_mut() {
                    *v += normal.sample(&mut rng);
                }
            }
        }
    }
    if let Some(keep) = &spec.channels {
        for name in keep {
            tr.get(name)?;
        }
        tr.channels.retain(|k, _| keep.contains(k));
    }
    Ok(tr)
}

pub fn reference_config() -> Result<ProjectConfig> {
    parse_config_str(REFERENCE_CONFIG)
}

/// `(name, config, scenario)` for the four shipped scenarios `a` to `d`.
pub fn reference_scenarios() -> Vec<(String, ProjectConfig, Scenario)> {
    let cfg = reference_config().expect("shipped example is valid");
    cfg.scenarios
        .iter()
        .map(|s| (s.name.clone(), cfg.clone(), s.clone()))
        .collect()
}
