//! Experiment configuration files: strict JSON with full-preset defaults.
//!
//! Every field is optional; omitted sections fall back to the standard
//! forward experiment (1x20 network, 5000 epochs, weights 10/1/10, 1600
//! collocation points, broad Gaussian load). Unknown keys are rejected so a
//! typo cannot silently change the physics.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::beam::{BeamConfig, DeltaModel};
use crate::error::{Error, Result};
use crate::net::Architecture;

/// Top-level config document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfigFile {
    pub beam: BeamConfig,
    pub train: TrainSettings,
    pub delta: DeltaModel,
    pub sensors: SensorSettings,
    pub output: OutputSettings,
}

impl Default for ExperimentConfigFile {
    fn default() -> Self {
        ExperimentConfigFile {
            beam: BeamConfig::default(),
            train: TrainSettings::default(),
            delta: DeltaModel::default(),
            sensors: SensorSettings::default(),
            output: OutputSettings::default(),
        }
    }
}

/// Network and optimization settings. `lambda1`/`lambda2`/`lambda3` are
/// accepted as aliases for the PDE/IC/BC weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub hidden_layers: usize,
    pub neurons_per_layer: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    #[serde(alias = "lambda1")]
    pub lambda_pde: f64,
    #[serde(alias = "lambda2")]
    pub lambda_ic: f64,
    #[serde(alias = "lambda3")]
    pub lambda_bc: f64,
    pub seed: u64,
    #[serde(alias = "n_int")]
    pub n_interior: usize,
    #[serde(alias = "n_b")]
    pub n_boundary: usize,
    #[serde(alias = "n_in")]
    pub n_initial: usize,
    /// Initial guess for the trainable load magnitude in inverse runs.
    pub p_init: f64,
    /// Include the bending-moment term in the boundary loss and the velocity
    /// term in the initial loss (the full condition set) rather than
    /// displacement only.
    pub augmented_conditions: bool,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            hidden_layers: 1,
            neurons_per_layer: 20,
            epochs: 5000,
            learning_rate: 1e-3,
            lambda_pde: 10.0,
            lambda_ic: 1.0,
            lambda_bc: 10.0,
            seed: 0,
            n_interior: 1200,
            n_boundary: 200,
            n_initial: 200,
            p_init: 0.1,
            augmented_conditions: true,
        }
    }
}

/// Sensor layout for inverse runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSettings {
    pub locations: Vec<f64>,
    pub n_data: usize,
}

impl Default for SensorSettings {
    fn default() -> Self {
        SensorSettings {
            locations: vec![
                std::f64::consts::FRAC_PI_8,
                std::f64::consts::FRAC_PI_4,
                std::f64::consts::FRAC_PI_2,
            ],
            n_data: 5000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSettings {
    /// Directory receiving field CSVs, reports, and checkpoints.
    pub dir: String,
}

impl Default for OutputSettings {
    fn default() -> Self {
        OutputSettings { dir: ".".into() }
    }
}

impl ExperimentConfigFile {
    pub fn validate(&self) -> Result<()> {
        self.beam.validate()?;
        self.delta.validate()?;
        let t = &self.train;
        Architecture::new(t.hidden_layers, t.neurons_per_layer)?;
        if !(t.learning_rate > 0.0) || !t.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                t.learning_rate
            )));
        }
        for (name, v) in [
            ("lambda_pde", t.lambda_pde),
            ("lambda_ic", t.lambda_ic),
            ("lambda_bc", t.lambda_bc),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !t.p_init.is_finite() {
            return Err(Error::Config(format!("p_init must be finite, got {}", t.p_init)));
        }
        if t.n_boundary % 2 != 0 {
            return Err(Error::Config(format!(
                "n_boundary must be even to cover both ends, got {}",
                t.n_boundary
            )));
        }
        for &x in &self.sensors.locations {
            if !(0.0..=self.beam.length).contains(&x) {
                return Err(Error::Config(format!(
                    "sensor location {x} outside the beam [0, {}]",
                    self.beam.length
                )));
            }
        }
        Ok(())
    }
}

/// Load and validate a config document; parse problems (including unknown
/// keys) surface as configuration errors naming the offender.
pub fn load_config(path: &Path) -> Result<ExperimentConfigFile> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let cfg: ExperimentConfigFile = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_yields_the_forward_preset() {
        let cfg: ExperimentConfigFile = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, ExperimentConfigFile::default());
        assert_eq!(cfg.train.hidden_layers, 1);
        assert_eq!(cfg.train.neurons_per_layer, 20);
        assert_eq!(cfg.train.epochs, 5000);
        assert_eq!(cfg.train.lambda_pde, 10.0);
        assert_eq!(cfg.train.lambda_ic, 1.0);
        assert_eq!(cfg.train.lambda_bc, 10.0);
        assert_eq!(cfg.train.n_interior + cfg.train.n_boundary + cfg.train.n_initial, 1600);
        assert_eq!(cfg.sensors.n_data, 5000);
        assert_eq!(cfg.sensors.locations.len(), 3);
        assert!(matches!(cfg.delta, DeltaModel::Gaussian { mu, sigma }
            if mu == 0.0 && (sigma - 0.3989422804014327).abs() < 1e-15));
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn partial_overrides_keep_other_defaults() {
        let cfg: ExperimentConfigFile = serde_json::from_str(
            r#"{"train": {"epochs": 7, "lambda1": 2.5}, "beam": {"p": 4.0}}"#,
        )
        .unwrap();
        assert_eq!(cfg.train.epochs, 7);
        assert_eq!(cfg.train.lambda_pde, 2.5);
        assert_eq!(cfg.train.lambda_bc, 10.0);
        assert_eq!(cfg.beam.p, 4.0);
        assert_eq!(cfg.beam.length, std::f64::consts::PI);
    }

    #[test]
    fn weight_aliases_map_to_pde_ic_bc() {
        let cfg: ExperimentConfigFile = serde_json::from_str(
            r#"{"train": {"lambda1": 1.0, "lambda2": 2.0, "lambda3": 3.0}}"#,
        )
        .unwrap();
        assert_eq!(cfg.train.lambda_pde, 1.0);
        assert_eq!(cfg.train.lambda_ic, 2.0);
        assert_eq!(cfg.train.lambda_bc, 3.0);
    }

    #[test]
    fn unknown_keys_are_named_in_the_error() {
        let err = serde_json::from_str::<ExperimentConfigFile>(r#"{"lr": 0.1}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("lr"), "message was {err}");
        let err = serde_json::from_str::<ExperimentConfigFile>(
            r#"{"train": {"neuron_count": 9}}"#,
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("neuron_count"), "message was {err}");
    }

    #[test]
    fn discrete_delta_parses_with_default_tolerance() {
        let cfg: ExperimentConfigFile =
            serde_json::from_str(r#"{"delta": {"kind": "discrete"}}"#).unwrap();
        assert_eq!(cfg.delta, DeltaModel::Discrete { tol: 1e-12 });
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut cfg = ExperimentConfigFile::default();
        cfg.train.learning_rate = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfigFile::default();
        cfg.train.lambda_bc = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfigFile::default();
        cfg.train.n_boundary = 11;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfigFile::default();
        cfg.beam.c_i = 0.5;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfigFile::default();
        cfg.sensors.locations = vec![5.0];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn load_config_maps_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        let p = path.as_path();
        std::fs::write(&path, r#"{"train": {"epochs": 3}}"#).unwrap();
        assert_eq!(load_config(p).unwrap().train.epochs, 3);
        std::fs::write(&path, r#"{"nope": 1}"#).unwrap();
        match load_config(p) {
            Err(Error::Config(msg)) => assert!(msg.contains("nope")),
            other => panic!("expected config error, got {other:?}"),
        }
        assert!(matches!(
            load_config(&dir.path().join("missing.json")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn round_trips_through_json() {
        let mut cfg = ExperimentConfigFile::default();
        cfg.train.epochs = 123;
        cfg.train.seed = 9;
        cfg.delta = DeltaModel::Discrete { tol: 1e-9 };
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfigFile = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
