//! TOML run configuration. Every section and key is optional; unknown keys
//! are rejected. Command-line flags override the file.

use std::path::{Path, PathBuf};

use equin::encoder::{Activation, EncoderConfig};
use equin::evaluation::HitRateConfig;
use equin::synthetic::{Dataset, DatasetName, DatasetSpec};
use equin::training::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub output: Option<PathBuf>,
    pub dataset: DatasetSection,
    pub encoder: EncoderSection,
    pub training: TrainingSection,
    pub evaluation: EvaluationSection,
    pub sweep: SweepSection,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub preset: String,
    pub seed: u64,
    /// Existing dataset file; when set, the generation keys are ignored.
    pub file: Option<PathBuf>,
    pub triplets_per_orbit: Option<usize>,
    pub noise_sigma: Option<f64>,
    pub feature_dim: Option<usize>,
    /// Keep only orbits whose stabilizer has one of these orders.
    pub stabilizer_orders: Option<Vec<usize>>,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            preset: DatasetName::RotatingArrows.tag().into(),
            seed: 0,
            file: None,
            triplets_per_orbit: None,
            noise_sigma: None,
            feature_dim: None,
            stabilizer_orders: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderSection {
    pub heads: usize,
    pub trunk_layers: Vec<usize>,
    pub activation: String,
    pub orbit_dim: usize,
    pub shared_trunk: bool,
    /// Defaults to the training seed.
    pub init_seed: Option<u64>,
}

impl Default for EncoderSection {
    fn default() -> Self {
        Self {
            heads: 5,
            trunk_layers: vec![64, 64],
            activation: "tanh".into(),
            orbit_dim: 3,
            shared_trunk: false,
            init_seed: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub lambda: f64,
    pub seed: u64,
    pub checkpoint_every: Option<usize>,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            weight_decay: t.weight_decay,
            lambda: t.lambda,
            seed: t.seed,
            checkpoint_every: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub batch_size: usize,
    pub trials: usize,
    pub seed: u64,
    pub export_embeddings: bool,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        let h = HitRateConfig::default();
        Self {
            batch_size: h.batch_size,
            trials: h.trials,
            seed: h.seed,
            export_embeddings: true,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Defaults to `[encoder.heads]`.
    pub heads: Option<Vec<usize>>,
    /// Defaults to `[training.lambda]`.
    pub lambda: Option<Vec<f64>>,
    /// Defaults to `[0, 1, 2, 3, 4]`.
    pub seeds: Option<Vec<u64>>,
}

pub const DEFAULT_SWEEP_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self, CliError> {
        path.map(Self::load)
            .transpose()
            .map(Option::unwrap_or_default)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn dataset_spec(&self) -> Result<DatasetSpec, CliError> {
        let d = &self.dataset;
        let name: DatasetName = d
            .preset
            .parse()
            .map_err(|e| CliError::Config(format!("{e}")))?;
        let mut spec = DatasetSpec::preset(name, d.seed);
        if let Some(orders) = &d.stabilizer_orders {
            spec = spec.retain_orbits(|o| orders.contains(&o.stabilizer.order()));
        }
        if let Some(n) = d.triplets_per_orbit {
            spec = spec.with_triplets_per_orbit(n);
        }
        if let Some(s) = d.noise_sigma {
            spec = spec.with_noise(s);
        }
        if let Some(f) = d.feature_dim {
            spec = spec.with_feature_dim(f);
        }
        spec.validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(spec)
    }

    /// Loads `dataset.file` if set, otherwise generates from the preset.
    pub fn dataset(&self) -> Result<Dataset, CliError> {
        match &self.dataset.file {
            Some(path) => crate::commands::load_dataset(path),
            None => Dataset::generate(&self.dataset_spec()?).map_err(CliError::from),
        }
    }

    pub fn encoder_config(
        &self,
        input_dim: usize,
        group: equin::group::GroupSpec,
    ) -> Result<EncoderConfig, CliError> {
        let e = &self.encoder;
        let activation: Activation = e
            .activation
            .parse()
            .map_err(|e| CliError::Config(format!("{e}")))?;
        let config = EncoderConfig {
            trunk_layers: e.trunk_layers.clone(),
            activation,
            orbit_dim: e.orbit_dim,
            shared_trunk: e.shared_trunk,
            ..EncoderConfig::new(input_dim, e.heads, group)
                .with_seed(e.init_seed.unwrap_or(self.training.seed))
        };
        config
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(config)
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let t = &self.training;
        let config = TrainConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            weight_decay: t.weight_decay,
            lambda: t.lambda,
            seed: t.seed,
        };
        config
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if t.checkpoint_every == Some(0) {
            return Err(CliError::Config("checkpoint_every must be positive".into()));
        }
        Ok(config)
    }

    pub fn hit_rate_config(&self) -> Result<HitRateConfig, CliError> {
        let e = &self.evaluation;
        if e.batch_size < 2 || e.trials == 0 {
            return Err(CliError::Config(
                "evaluation needs batch_size >= 2 and trials >= 1".into(),
            ));
        }
        Ok(HitRateConfig {
            batch_size: e.batch_size,
            trials: e.trials,
            seed: e.seed,
        })
    }

    /// Checks every section that does not depend on the dataset.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.dataset.file.is_none() {
            self.dataset_spec()?;
        }
        self.train_config()?;
        self.hit_rate_config()?;
        self.encoder_config(1, equin::group::GroupSpec::So2)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse("[training]\nepoch = 3\n").is_err());
        assert!(RunConfig::parse("[nonsense]\n").is_err());
        assert!(RunConfig::parse("colour = 1\n").is_err());
    }

    #[test]
    fn round_trip() {
        let mut c =
            RunConfig::parse("[encoder]\nheads = 3\n[sweep]\nlambda = [0.001, 1.0]\n").unwrap();
        c.output = Some("runs/x".into());
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn validation() {
        assert!(RunConfig::parse("[dataset]\npreset = \"mnist\"\n")
            .unwrap()
            .validate()
            .is_err());
        assert!(RunConfig::parse("[training]\nlambda = -1.0\n")
            .unwrap()
            .validate()
            .is_err());
        assert!(RunConfig::parse("[encoder]\nactivation = \"gelu\"\n")
            .unwrap()
            .validate()
            .is_err());
        assert!(RunConfig::parse("[encoder]\nheads = 0\n")
            .unwrap()
            .validate()
            .is_err());
        assert!(RunConfig::default().validate().is_ok());
    }
}
