//! Experiment configuration (TOML).
//!
//! One file may hold sections for several subcommands; each subcommand reads
//! only its own section and fails if it is missing. Unknown keys anywhere are
//! rejected, and `seed` is mandatory. Relative paths resolve against the
//! `--out` directory (the working directory when `--out` is absent).
//!
//! ```toml
//! seed = 7
//!
//! [generate]
//! pde = { name = "poisson1d" }
//! covariance = { family = "squared-exponential", length_scale = 0.05 }
//! [[generate.datasets]]
//! output = "train.oplab"
//! pairs = 100
//! resolution = 100
//!
//! [fit]
//! dataset = "train.oplab"
//! model = "model.oplab"
//! metrics = "fit.json"
//! train_fraction = 0.8
//! variant = { kind = "dense" }
//!
//! [eval]
//! model = "model.oplab"
//! datasets = ["train.oplab"]
//! output = "eval.csv"
//! ```

use std::path::{Path, PathBuf};

use oplab_core::opfit::LossKind;
use oplab_core::pdelab::Pde;
use oplab_core::probes::CovarianceSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub generate: Option<GenerateConfig>,
    pub recover: Option<RecoverConfig>,
    pub fit: Option<FitConfig>,
    pub eval: Option<EvalConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub pde: Pde,
    pub covariance: CovarianceConfig,
    /// Cap on KL modes per input; a shared cap keeps inputs identical across resolutions.
    pub max_modes: Option<usize>,
    pub datasets: Vec<DatasetEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub output: PathBuf,
    pub pairs: usize,
    pub resolution: usize,
    /// Added to the run seed; entries with equal offsets share their draws.
    #[serde(default)]
    pub seed_offset: u64,
}

/// Covariance as written in configs. SE and Matérn live on `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CovarianceConfig {
    SquaredExponential {
        length_scale: f64,
    },
    Matern {
        length_scale: f64,
        nu: f64,
    },
    HelmholtzPower {
        scale: f64,
        nu: f64,
        shift: f64,
        length: f64,
    },
}

impl CovarianceConfig {
    pub fn spec(&self) -> CovarianceSpec {
        match *self {
            CovarianceConfig::SquaredExponential { length_scale } => CovarianceSpec::squared_exponential(length_scale),
            CovarianceConfig::Matern { length_scale, nu } => CovarianceSpec::matern(length_scale, nu),
            CovarianceConfig::HelmholtzPower {
                scale,
                nu,
                shift,
                length,
            } => CovarianceSpec::helmholtz_power(scale, nu, shift, length),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverConfig {
    pub report: PathBuf,
    #[serde(default)]
    pub operator: OperatorSource,
    pub instance: RecoverInstance,
}

/// Where the black-box operator comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorSource {
    /// Random instance of the requested structure.
    #[default]
    Random,
    /// The discrete 1D Poisson solution operator on `n` nodes of `[0, 1]`.
    Poisson1d,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "structure", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RecoverInstance {
    LowRank {
        n: usize,
        rank: usize,
        #[serde(default = "default_oversampling")]
        oversampling: usize,
    },
    Circulant {
        n: usize,
    },
    Banded {
        n: usize,
        bandwidth: usize,
    },
    Hodlr {
        n: usize,
        rank: usize,
        levels: usize,
        #[serde(default = "default_oversampling")]
        oversampling: usize,
    },
}

fn default_oversampling() -> usize {
    oplab_core::recovery::DEFAULT_OVERSAMPLING
}

impl RecoverInstance {
    pub fn n(&self) -> usize {
        match *self {
            RecoverInstance::LowRank { n, .. }
            | RecoverInstance::Circulant { n }
            | RecoverInstance::Banded { n, .. }
            | RecoverInstance::Hodlr { n, .. } => n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub dataset: PathBuf,
    pub model: PathBuf,
    pub metrics: PathBuf,
    /// Leading fraction of the pairs used for training; the rest is the test split.
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "all_losses")]
    pub losses: Vec<LossKind>,
    pub variant: VariantConfig,
}

fn default_train_fraction() -> f64 {
    0.8
}

fn all_losses() -> Vec<LossKind> {
    LossKind::ALL.to_vec()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VariantConfig {
    Dense {
        ridge: Option<f64>,
    },
    LowRank {
        rank: usize,
        ridge: Option<f64>,
    },
    FourierMultiplier {
        k_max: usize,
        #[serde(default)]
        ridge: f64,
    },
    Banded {
        radius: f64,
        ridge: Option<f64>,
    },
    Hierarchical {
        levels: usize,
        rank: usize,
        ridge: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub model: PathBuf,
    pub datasets: Vec<PathBuf>,
    pub output: PathBuf,
    #[serde(default = "all_losses")]
    pub losses: Vec<LossKind>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Cross-field checks that the schema alone cannot express.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if let Some(g) = &self.generate {
            let helmholtz = matches!(g.covariance, CovarianceConfig::HelmholtzPower { .. });
            match g.pde {
                Pde::Darcy2d if !helmholtz => {
                    return bad(
                        "generate: darcy2d draws its coefficient from a helmholtz-power covariance; \
                         length_scale is not a darcy parameter"
                            .into(),
                    )
                }
                Pde::Burgers1d { .. } | Pde::ScreenedPoisson1d { .. } if !helmholtz => {
                    return bad(format!(
                        "generate: {} needs a periodic helmholtz-power covariance",
                        g.pde.name()
                    ))
                }
                Pde::Poisson1d if helmholtz => {
                    return bad("generate: poisson1d needs a squared-exponential or matern covariance".into())
                }
                _ => {}
            }
            if g.datasets.is_empty() {
                return bad("generate: at least one [[generate.datasets]] entry is required".into());
            }
            g.covariance
                .spec()
                .validate()
                .map_err(|e| CliError::Config(format!("generate.covariance: {e}")))?;
        }
        if let Some(f) = &self.fit {
            if !(f.train_fraction > 0.0 && f.train_fraction <= 1.0) {
                return bad(format!(
                    "fit.train_fraction must lie in (0, 1], got {}",
                    f.train_fraction
                ));
            }
            if f.losses.is_empty() {
                return bad("fit.losses must name at least one loss".into());
            }
        }
        if let Some(e) = &self.eval {
            if e.datasets.is_empty() {
                return bad("eval.datasets must list at least one dataset".into());
            }
            if e.losses.is_empty() {
                return bad("eval.losses must name at least one loss".into());
            }
        }
        Ok(())
    }
}
