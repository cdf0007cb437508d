//! Run configuration: a JSON document, unknown keys rejected.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use paralens::arch::{build_stack, LayerSpec};
use paralens::autodiff::prims::Activation;
use paralens::learner::{LearnMode, Learner};
use paralens::loss::{constant_rate, identity_rate, proportional_rate, LearningRate, LossKind};
use paralens::optim::{self, Optimiser};
use paralens::{ComposeMode, ParaMorph, Port, Rig};

use crate::sexpr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RigName {
    #[default]
    Real,
    Z2,
}

impl From<RigName> for Rig {
    fn from(r: RigName) -> Rig {
        match r {
            RigName::Real => Rig::Real,
            RigName::Z2 => Rig::Z2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    #[default]
    Memoised,
    Checkpointed,
}

impl From<ModeName> for ComposeMode {
    fn from(m: ModeName) -> ComposeMode {
        match m {
            ModeName::Memoised => ComposeMode::Memoised,
            ModeName::Checkpointed => ComposeMode::Checkpointed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossName {
    Mse,
    Sce,
    Dot,
    Xor,
}

impl From<LossName> for LossKind {
    fn from(l: LossName) -> LossKind {
        match l {
            LossName::Mse => LossKind::Mse,
            LossName::Sce => LossKind::SoftargmaxCrossEntropy,
            LossName::Dot => LossKind::Dot,
            LossName::Xor => LossKind::Xor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RateConfig {
    Constant { value: f64 },
    Identity,
    Proportional { value: f64 },
}

impl RateConfig {
    pub fn build(self, rig: Rig) -> LearningRate {
        match self {
            RateConfig::Constant { value } => constant_rate(value),
            RateConfig::Identity => identity_rate(rig),
            RateConfig::Proportional { value } => proportional_rate(value),
        }
    }
}

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

/// Momentum-style optimisers are written in ascent form; `descend` (the
/// default) flips them to minimise the loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
#[derive(Default)]
pub enum OptimiserConfig {
    #[serde(alias = "gd")]
    #[default]
    Descent,
    #[serde(alias = "ga")]
    Ascent,
    Momentum {
        gamma: f64,
        #[serde(default = "yes", skip_serializing_if = "is_true")]
        descend: bool,
    },
    Nesterov {
        gamma: f64,
        #[serde(default = "yes", skip_serializing_if = "is_true")]
        descend: bool,
    },
    Adagrad {
        eps: f64,
        delta: f64,
        #[serde(default = "yes", skip_serializing_if = "is_true")]
        descend: bool,
    },
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
        delta: f64,
        #[serde(default = "yes", skip_serializing_if = "is_true")]
        descend: bool,
    },
}

impl OptimiserConfig {
    pub fn build(self, param: &Port) -> Result<Optimiser> {
        let flip = |o: Optimiser, descend: bool| if descend { o.descending() } else { o };
        Ok(match self {
            OptimiserConfig::Descent => optim::gradient_descent(param),
            OptimiserConfig::Ascent => optim::gradient_ascent(param),
            OptimiserConfig::Momentum { gamma, descend } => {
                flip(optim::momentum(param, gamma)?, descend)
            }
            OptimiserConfig::Nesterov { gamma, descend } => {
                flip(optim::nesterov(param, gamma)?, descend)
            }
            OptimiserConfig::Adagrad {
                eps,
                delta,
                descend,
            } => flip(optim::adagrad(param, eps, delta)?, descend),
            OptimiserConfig::Adam {
                beta1,
                beta2,
                eps,
                delta,
                descend,
            } => flip(optim::adam(param, beta1, beta2, eps, delta)?, descend),
        })
    }
}

fn identity_name() -> String {
    "identity".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum LayerConfig {
    Linear {
        input: usize,
        output: usize,
    },
    Bias {
        n: usize,
    },
    Activation {
        activation: String,
        n: usize,
    },
    Dense {
        input: usize,
        output: usize,
        #[serde(default = "identity_name")]
        activation: String,
    },
    Gcnn {
        nodes: usize,
        input: usize,
        output: usize,
        activation: String,
    },
    Attention {
        seq: usize,
        key: usize,
        val: usize,
    },
}

fn act(name: &str) -> Result<Activation> {
    name.parse::<Activation>().map_err(|e| anyhow!(e))
}

impl LayerConfig {
    pub fn to_spec(&self) -> Result<LayerSpec> {
        Ok(match self {
            &LayerConfig::Linear { input, output } => LayerSpec::Linear { input, output },
            &LayerConfig::Bias { n } => LayerSpec::Bias { n },
            LayerConfig::Activation { activation, n } => LayerSpec::Activation {
                act: act(activation)?,
                n: *n,
            },
            LayerConfig::Dense {
                input,
                output,
                activation,
            } => LayerSpec::Dense {
                input: *input,
                output: *output,
                act: act(activation)?,
            },
            LayerConfig::Gcnn {
                nodes,
                input,
                output,
                activation,
            } => LayerSpec::Gcnn {
                nodes: *nodes,
                input: *input,
                output: *output,
                act: act(activation)?,
            },
            &LayerConfig::Attention { seq, key, val } => LayerSpec::Attention { seq, key, val },
        })
    }
}

/// A layer list, or the same as s-expression text such as
/// `(chain (dense 3 4 tanh) (dense 4 1))`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Architecture {
    Layers(Vec<LayerConfig>),
    Text(String),
}

impl Architecture {
    pub fn layers(&self) -> Result<Vec<LayerConfig>> {
        match self {
            Architecture::Layers(l) => Ok(l.clone()),
            Architecture::Text(t) => sexpr::parse_layers(t),
        }
    }

    pub fn build(&self, rig: Rig) -> Result<ParaMorph> {
        let layers = self.layers()?;
        if layers.is_empty() {
            bail!("architecture has no layers");
        }
        let specs = layers
            .iter()
            .enumerate()
            .map(|(i, l)| l.to_spec().with_context(|| format!("layer {i}")))
            .collect::<Result<Vec<_>>>()?;
        Ok(build_stack(&specs, rig)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DreamConfig {
    /// Trained parameters, as written by `train`.
    pub params: PathBuf,
    pub input: Vec<f64>,
    /// Index of the output unit whose activation is driven up.
    pub target: usize,
    pub steps: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GanConfig {
    pub generator: Architecture,
    pub discriminator: Architecture,
    /// Generator noise, uniform per component.
    pub noise: [f64; 2],
    /// Real samples, uniform per component.
    pub real: [f64; 2],
    pub alpha: f64,
    pub steps: usize,
    #[serde(default = "default_eval")]
    pub eval_samples: usize,
    /// Labels for the generated and the real score.
    #[serde(default = "default_labels")]
    pub labels: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_init: Option<Vec<crate::io::TensorJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discriminator_init: Option<Vec<crate::io::TensorJson>>,
}

fn default_eval() -> usize {
    256
}

fn default_labels() -> [f64; 2] {
    [1.0, -1.0]
}

fn default_epochs() -> usize {
    1
}

fn default_log_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub rig: RigName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub architecture: Option<Architecture>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateConfig>,
    #[serde(default)]
    pub optimiser: OptimiserConfig,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Absent means full batch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub shuffle: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub compose_mode: ModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Write a metrics record every this many steps (and after the last).
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dream: Option<DreamConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gan: Option<GanConfig>,
}

/// Parses a configuration; errors name the offending field path.
pub fn parse(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        anyhow!("config.{path}: {}", e.into_inner())
    })
}

pub fn to_json(cfg: &RunConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serialises")
}

/// A configuration together with the directory relative paths resolve
/// against.
pub struct Loaded {
    pub config: RunConfig,
    pub base: PathBuf,
}

impl Loaded {
    pub fn read(path: &Path) -> Result<Loaded> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config = parse(&text).with_context(|| format!("in {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Loaded { config, base })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }
}

impl RunConfig {
    pub fn require<'a, T>(field: &str, v: &'a Option<T>) -> Result<&'a T> {
        v.as_ref()
            .ok_or_else(|| anyhow!("config.{field}: required for this command"))
    }

    pub fn model(&self) -> Result<ParaMorph> {
        Self::require("architecture", &self.architecture)?
            .build(self.rig.into())
            .context("config.architecture")
    }

    pub fn learner(&self, model: &ParaMorph) -> Result<Learner> {
        let rig: Rig = self.rig.into();
        let loss = LossKind::from(*Self::require("loss", &self.loss)?)
            .build(model.output())
            .context("config.loss")?;
        let rate = Self::require("rate", &self.rate)?.build(rig);
        let opt = self
            .optimiser
            .build(model.param())
            .context("config.optimiser")?;
        Ok(Learner::new(
            model.clone(),
            loss,
            rate,
            opt,
            LearnMode::ParamLearning,
            self.compose_mode.into(),
        )?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected_with_a_path() {
        let err = parse(r#"{"optimiser": {"kind": "adam", "beta1": 0.9, "beta2": 0.999, "eps": 0.01, "delta": 1e-8, "beta3": 1}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.starts_with("config.optimiser"), "{err}");
        let err = parse(r#"{"epochz": 3}"#).unwrap_err().to_string();
        assert!(err.contains("epochz"), "{err}");
        let err = parse(r#"{"loss": "hinge"}"#).unwrap_err().to_string();
        assert!(err.starts_with("config.loss"), "{err}");
    }

    #[test]
    fn defaults_fill_in() {
        let c = parse("{}").unwrap();
        assert_eq!(c.rig, RigName::Real);
        assert_eq!(c.optimiser, OptimiserConfig::Descent);
        assert_eq!((c.epochs, c.batch_size, c.log_every), (1, None, 1));
        let m = parse(r#"{"optimiser": {"kind": "momentum", "gamma": 0.9}}"#).unwrap();
        assert_eq!(
            m.optimiser,
            OptimiserConfig::Momentum {
                gamma: 0.9,
                descend: true
            }
        );
    }

    #[test]
    fn missing_sections_name_the_field() {
        let c = parse(r#"{"architecture": "(dense 2 1)"}"#).unwrap();
        let err = c.learner(&c.model().unwrap()).unwrap_err().to_string();
        assert_eq!(err, "config.loss: required for this command");
    }
}
