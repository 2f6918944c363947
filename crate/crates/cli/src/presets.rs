//! Built-in scenarios: a two-cluster block network, a spatially decaying
//! kernel and Erdos-Renyi graphs.

use sto_core::fibered::ProfileSpec;

use crate::config::{validated, AlphaSpec, ExperimentConfig, GraphonSpec};

pub const PRESET_NAMES: &[&str] = &["clustered", "decay", "er"];

pub fn describe(name: &str) -> Option<&'static str> {
    Some(match name {
        "clustered" => "two groups, block graphon [[1, 0.2], [0.2, 0.5]] split at 1/2",
        "decay" => "translation kernel W(z, z') = 1 - |z - z'|",
        "er" => "Bernoulli(1/2) graphs, constant limit 1/2",
        _ => return None,
    })
}

fn von_mises(kappa: f64, center: f64) -> ProfileSpec {
    ProfileSpec::VonMises { kappa, center }
}

/// Resolve a preset into a validated configuration.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let base = ExperimentConfig {
        name: name.to_string(),
        alpha: AlphaSpec::Fraction(0.5),
        ..ExperimentConfig::default()
    };
    let cfg = match name {
        "clustered" => ExperimentConfig {
            graphon: GraphonSpec::Block {
                cuts: vec![0.5],
                values: vec![1.0, 0.2, 0.2, 0.5],
            },
            initial: ProfileSpec::TwoCluster {
                split: 0.5,
                left: Box::new(von_mises(2.0, 0.2)),
                right: Box::new(von_mises(1.0, 0.7)),
            },
            alternate: ProfileSpec::TwoCluster {
                split: 0.5,
                left: Box::new(ProfileSpec::Sinusoid {
                    amplitude: 0.6,
                    phase: 0.5,
                }),
                right: Box::new(von_mises(2.0, 0.9)),
            },
            sweep: crate::config::SweepSettings {
                z_star: vec![0.25, 0.75],
                ..Default::default()
            },
            ..base
        },
        "decay" => ExperimentConfig {
            graphon: GraphonSpec::Translation {
                shape: "linear".into(),
                amplitude: 1.0,
                rate: 1.0,
            },
            initial: ProfileSpec::LinearInZ { amplitude: 0.9 },
            alternate: von_mises(1.0, 0.7),
            ..base
        },
        "er" => ExperimentConfig {
            graphon: GraphonSpec::Er { p: 0.5 },
            initial: von_mises(2.0, 0.3),
            alternate: ProfileSpec::Sinusoid {
                amplitude: 0.6,
                phase: 0.5,
            },
            ..base
        },
        _ => return None,
    };
    Some(validated(cfg).expect("built-in presets are valid"))
}
