//! Experiment configuration: a TOML file and command-line flags share one
//! flat key set, and flags override file values key by key.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use nondecomp_core::data::SyntheticSpec;
use nondecomp_core::measures::EvalMetric;
use nondecomp_core::netcore::{Activation, NetworkConfig, StepperKind};
use nondecomp_core::optimizers::TrainConfig;
use nondecomp_core::rewards::RewardKind;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Dspade,
    Dnemsis,
    Damp,
    Ce,
    Plugin,
    Structann,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dspade => "dspade",
            Algorithm::Dnemsis => "dnemsis",
            Algorithm::Damp => "damp",
            Algorithm::Ce => "ce",
            Algorithm::Plugin => "plugin",
            Algorithm::Structann => "structann",
        }
    }
}

/// Performance measure being optimised and reported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasureId {
    MinTprTnr,
    QMean,
    FBeta(f64),
    Kld,
}

impl MeasureId {
    pub fn metric(self) -> EvalMetric {
        match self {
            MeasureId::MinTprTnr => EvalMetric::MinTprTnr,
            MeasureId::QMean => EvalMetric::QMean,
            MeasureId::FBeta(beta) => EvalMetric::FBeta { beta },
            MeasureId::Kld => EvalMetric::Kld,
        }
    }

    fn is_concave(self) -> bool {
        matches!(self, MeasureId::MinTprTnr | MeasureId::QMean)
    }
}

impl FromStr for MeasureId {
    type Err = String;

    /// Accepts `min_tpr_tnr` (or `min`), `q_mean`, `f1`, `fbeta:<beta>`
    /// (also `fbeta(<beta>)`) and `kld`.
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim().to_ascii_lowercase();
        let beta = s
            .strip_prefix("fbeta:")
            .or_else(|| s.strip_prefix("fbeta(").and_then(|r| r.strip_suffix(')')));
        if let Some(b) = beta {
            let beta: f64 = b.parse().map_err(|_| format!("bad beta in measure {s:?}"))?;
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(format!("beta must be positive, got {beta}"));
            }
            return Ok(MeasureId::FBeta(beta));
        }
        match s.as_str() {
            "min" | "min_tpr_tnr" | "mintprtnr" => Ok(MeasureId::MinTprTnr),
            "q_mean" | "qmean" => Ok(MeasureId::QMean),
            "f1" | "fbeta" => Ok(MeasureId::FBeta(1.0)),
            "kld" => Ok(MeasureId::Kld),
            _ => Err(format!(
                "unknown measure {s:?} (expected min_tpr_tnr, q_mean, f1, fbeta:<beta> or kld)"
            )),
        }
    }
}

impl fmt::Display for MeasureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureId::MinTprTnr => f.write_str("min_tpr_tnr"),
            MeasureId::QMean => f.write_str("q_mean"),
            MeasureId::FBeta(b) if *b == 1.0 => f.write_str("f1"),
            MeasureId::FBeta(b) => write!(f, "fbeta:{b}"),
            MeasureId::Kld => f.write_str("kld"),
        }
    }
}

impl Serialize for MeasureId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MeasureId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Checks the algorithm/measure compatibility matrix.
pub fn check_compatible(algo: Algorithm, measure: MeasureId) -> Result<(), HarnessError> {
    let ok = match algo {
        Algorithm::Dspade => measure.is_concave(),
        Algorithm::Dnemsis => measure == MeasureId::Kld,
        Algorithm::Damp | Algorithm::Plugin => matches!(measure, MeasureId::FBeta(_)),
        Algorithm::Ce | Algorithm::Structann => true,
    };
    if ok {
        Ok(())
    } else {
        let need = match algo {
            Algorithm::Dspade => "a concave measure (min_tpr_tnr or q_mean)",
            Algorithm::Dnemsis => "the nested measure kld",
            _ => "a pseudolinear measure (f1 or fbeta:<beta>)",
        };
        Err(HarnessError::Usage(format!(
            "algorithm {} cannot optimise {measure}; it needs {need}",
            algo.name()
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum StepperId {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RewardId {
    Sigmoid,
    ZeroOne,
}

impl From<RewardId> for RewardKind {
    fn from(r: RewardId) -> Self {
        match r {
            RewardId::Sigmoid => RewardKind::Sigmoid,
            RewardId::ZeroOne => RewardKind::ZeroOne,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ActivationId {
    Relu,
    Tanh,
    Sigmoid,
}

impl From<ActivationId> for Activation {
    fn from(a: ActivationId) -> Self {
        match a {
            ActivationId::Relu => Activation::Relu,
            ActivationId::Tanh => Activation::Tanh,
            ActivationId::Sigmoid => Activation::Sigmoid,
        }
    }
}

/// One layer of settings. Every key may be absent; the file layer is
/// overridden by the flag layer and the result is resolved against defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    /// Master seed: data generation, split, initialisation and batch order
    #[arg(long)]
    pub seed: Option<u64>,
    /// dspade | dnemsis | damp | ce | plugin | structann
    #[arg(long, value_enum)]
    pub algo: Option<Algorithm>,
    /// min_tpr_tnr | q_mean | f1 | fbeta:<beta> | kld
    #[arg(long)]
    pub measure: Option<MeasureId>,
    /// LIBSVM file (relative paths also tried under NONDECOMP_DATA_DIR);
    /// the synthetic generator is used when absent
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Held-out LIBSVM file; the training file is split when absent
    #[arg(long)]
    pub test_data: Option<PathBuf>,
    /// Feature dimension of the LIBSVM files
    #[arg(long)]
    pub dim: Option<usize>,
    /// Label mapped to the positive class in multi-class files
    #[arg(long)]
    pub positive_class: Option<String>,
    #[arg(long)]
    pub synthetic_n: Option<usize>,
    #[arg(long)]
    pub synthetic_d: Option<usize>,
    /// Positive fraction of the synthetic data
    #[arg(long)]
    pub synthetic_p: Option<f64>,
    /// Distance of each class mean from the origin
    #[arg(long)]
    pub synthetic_separation: Option<f64>,
    #[arg(long)]
    pub synthetic_sigma: Option<f64>,
    /// Training share when splitting one file or synthetic set
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub stratified_split: Option<bool>,
    /// Standardise features with training-set statistics
    #[arg(long)]
    pub normalize: Option<bool>,
    /// Hidden layer widths, comma separated (empty for a linear model)
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub hidden: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub activation: Option<ActivationId>,
    #[arg(long, value_enum)]
    pub stepper: Option<StepperId>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub iters: Option<u64>,
    /// DAMP inner iterations per level
    #[arg(long)]
    pub inner_iters: Option<u64>,
    #[arg(long, value_enum)]
    pub dual_reward: Option<RewardId>,
    #[arg(long)]
    pub eval_every: Option<u64>,
    /// Class-stratified minibatches
    #[arg(long)]
    pub stratified_batches: Option<bool>,
    #[arg(long)]
    pub pretrain_epochs: Option<usize>,
    #[arg(long)]
    pub warm_start_epochs: Option<usize>,
    #[arg(long)]
    pub damp_split: Option<usize>,
    #[arg(long)]
    pub struct_c: Option<f64>,
    /// Positive prior; the empirical training prior when absent
    #[arg(long)]
    pub prior: Option<f64>,
    /// Gradient-norm threshold for the stability summary
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also fill the wall_ms column of trace.csv
    #[arg(long)]
    pub inline_timing: Option<bool>,
    /// Target priors for the drift study, comma separated
    #[arg(long, value_delimiter = ',')]
    pub drift_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub drift_seed: Option<u64>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),* $(,)?) => {
        ConfigLayer { $($f: $top.$f.or($base.$f)),* }
    };
}

impl ConfigLayer {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Usage(format!("config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Usage(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            HarnessError::Usage(m) => HarnessError::Usage(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Keys set in `top` win.
    pub fn overlay(self, top: ConfigLayer) -> ConfigLayer {
        let base = self;
        overlay!(base, top;
            seed, algo, measure, data, test_data, dim, positive_class,
            synthetic_n, synthetic_d, synthetic_p, synthetic_separation, synthetic_sigma,
            train_fraction, stratified_split, normalize, hidden, activation,
            stepper, eta, batch, iters, inner_iters, dual_reward, eval_every,
            stratified_batches, pretrain_epochs, warm_start_epochs, damp_split, struct_c,
            prior, epsilon, out, inline_timing, drift_grid, drift_seed,
        )
    }

    pub fn resolve(&self) -> Result<ExperimentConfig, HarnessError> {
        let usage = |m: String| HarnessError::Usage(m);
        let seed = self.seed.ok_or_else(|| usage("a seed is required (seed = ... or --seed)".into()))?;
        let algo = self.algo.ok_or_else(|| usage("an algorithm is required (algo / --algo)".into()))?;
        let measure = self
            .measure
            .ok_or_else(|| usage("a measure is required (measure / --measure)".into()))?;
        check_compatible(algo, measure)?;

        let data = match &self.data {
            Some(path) => DataSource::Libsvm {
                path: path.clone(),
                test_path: self.test_data.clone(),
                dim: self.dim,
                positive_class: self.positive_class.clone(),
            },
            None => {
                if self.test_data.is_some() {
                    return Err(usage("test_data given without data".into()));
                }
                DataSource::Synthetic(SyntheticSpec {
                    n: self.synthetic_n.unwrap_or(4000),
                    d: self.synthetic_d.unwrap_or(2),
                    positive_fraction: self.synthetic_p.unwrap_or(0.05),
                    separation: self.synthetic_separation.unwrap_or(3.0),
                    sigma: self.synthetic_sigma.unwrap_or(1.0),
                    seed,
                })
            }
        };

        let d = TrainConfig::default();
        let train = TrainConfig {
            stepper: match self.stepper.unwrap_or(StepperId::Sgd) {
                StepperId::Sgd => StepperKind::ConstantSgd,
                StepperId::Adam => StepperKind::adam(),
            },
            eta: self.eta.unwrap_or(d.eta),
            batch_size: self.batch.unwrap_or(d.batch_size),
            iterations: self.iters.unwrap_or(d.iterations),
            inner_iterations: self.inner_iters.unwrap_or(d.inner_iterations),
            primal_reward: RewardKind::Sigmoid,
            dual_reward: self.dual_reward.map(Into::into).unwrap_or(d.dual_reward),
            seed,
            eval_every: self.eval_every.unwrap_or(d.eval_every),
            stratified: self.stratified_batches.unwrap_or(d.stratified),
            pretrain_epochs: self.pretrain_epochs.unwrap_or(d.pretrain_epochs),
            warm_start_epochs: self.warm_start_epochs.unwrap_or(d.warm_start_epochs),
            damp_split: self.damp_split.or(d.damp_split),
            struct_c: self.struct_c.unwrap_or(d.struct_c),
            prior: self.prior.or(d.prior),
        };
        train.validate().map_err(|e| usage(e.to_string()))?;

        let train_fraction = self.train_fraction.unwrap_or(0.75);
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(usage(format!("train_fraction {train_fraction} outside (0, 1)")));
        }
        let epsilon = self.epsilon.unwrap_or(1e-3);
        if !(epsilon > 0.0) {
            return Err(usage(format!("epsilon must be positive, got {epsilon}")));
        }
        let drift_grid = self
            .drift_grid
            .clone()
            .unwrap_or_else(|| (1..=9).map(|k| k as f64 / 10.0).collect());
        if let Some(p) = drift_grid.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(usage(format!("drift prior {p} outside (0, 1)")));
        }
        Ok(ExperimentConfig {
            seed,
            algo,
            measure,
            data,
            train_fraction,
            stratified_split: self.stratified_split.unwrap_or(true),
            normalize: self.normalize.unwrap_or(true),
            hidden: self.hidden.clone().unwrap_or_else(|| vec![16]),
            activation: self.activation.unwrap_or(ActivationId::Relu),
            train,
            epsilon,
            out: self.out.clone().unwrap_or_else(|| PathBuf::from("out")),
            inline_timing: self.inline_timing.unwrap_or(false),
            drift_grid,
            drift_seed: self.drift_seed.unwrap_or(seed),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Libsvm {
        path: PathBuf,
        test_path: Option<PathBuf>,
        dim: Option<usize>,
        positive_class: Option<String>,
    },
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub algo: Algorithm,
    pub measure: MeasureId,
    pub data: DataSource,
    pub train_fraction: f64,
    pub stratified_split: bool,
    pub normalize: bool,
    pub hidden: Vec<usize>,
    pub activation: ActivationId,
    pub train: TrainConfig,
    pub epsilon: f64,
    pub out: PathBuf,
    pub inline_timing: bool,
    pub drift_grid: Vec<f64>,
    pub drift_seed: u64,
}

impl ExperimentConfig {
    pub fn network(&self, input_dim: usize) -> NetworkConfig {
        let mut sizes = self.hidden.clone();
        sizes.push(1);
        NetworkConfig::new(input_dim, sizes)
            .with_seed(self.seed)
            .with_activation(self.activation.into())
    }

    /// Dataset and split settings; runs that agree here see the same data.
    pub fn data_key(&self) -> String {
        format!(
            "{:?}|{}|{}|{}|{}",
            self.data, self.train_fraction, self.stratified_split, self.normalize, self.seed
        )
    }
}
