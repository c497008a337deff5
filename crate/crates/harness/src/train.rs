use nondecomp_core::data::{split, Dataset};
use nondecomp_core::measures::{fbeta_coeffs, ConcaveLink, EvalMetric, NestedMeasure};
use nondecomp_core::netcore::Scorer;
use nondecomp_core::optimizers::{
    ce_train, damp_train, dnemsis_train, dspade_train, plugin_tune, struct_ann_train, Problem,
    TrainFailure, TrainTrace,
};
use nondecomp_core::rewards::confusion;
use nondecomp_core::Error;
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, ExperimentConfig, MeasureId};
use crate::data::Prepared;
use crate::{HarnessError, Result};

/// Share of the training set the plug-in baseline fits on; the rest tunes
/// the threshold.
pub const PLUGIN_FIT_FRACTION: f64 = 0.8;

/// Threshold chosen by the plug-in baseline and the measure it attains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PluginResult {
    pub threshold: f64,
    pub train_metric: Option<f64>,
    pub test_metric: Option<f64>,
}

pub struct Trained {
    pub scorer: Box<dyn Scorer + Send + Sync>,
    /// Decision threshold on the score (0 except for the plug-in baseline).
    pub threshold: f64,
    pub trace: TrainTrace,
    pub plugin: Option<PluginResult>,
}

impl std::fmt::Debug for Trained {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Trained")
            .field("threshold", &self.threshold)
            .field("trace", &self.trace.algorithm)
            .finish()
    }
}

fn failure(f: TrainFailure) -> HarnessError {
    match f.error {
        Error::Numeric { .. } => HarnessError::Diverged {
            message: f.error.to_string(),
            partial: f.partial,
        },
        Error::Config(m) => HarnessError::Usage(m),
        other => HarnessError::Core(other),
    }
}

fn prior(cfg: &ExperimentConfig, train: &Dataset) -> f64 {
    cfg.train.prior.unwrap_or_else(|| train.positive_fraction())
}

fn thresholded(scorer: &dyn Scorer, data: &Dataset, metric: &EvalMetric, t: f64) -> Result<Option<f64>> {
    let c = confusion(scorer, data, t)?;
    Ok(match metric.evaluate(&c) {
        Ok(v) => Some(v),
        Err(Error::UndefinedRate(_)) => None,
        Err(e) => return Err(e.into()),
    })
}

/// Trains the configured algorithm on `data.train`, tracing against
/// `data.test`.
pub fn train(cfg: &ExperimentConfig, data: &Prepared) -> Result<Trained> {
    let metric = cfg.measure.metric();
    let problem = Problem {
        train: &data.train,
        test: Some(&data.test),
        metric,
    };
    let net = cfg.network(data.train.dim());
    let tc = &cfg.train;
    let boxed = |(m, t): (nondecomp_core::netcore::Model, TrainTrace)| Trained {
        scorer: Box::new(m),
        threshold: 0.0,
        trace: t,
        plugin: None,
    };
    let out = match (cfg.algo, cfg.measure) {
        (Algorithm::Dspade, MeasureId::MinTprTnr) => {
            boxed(dspade_train(&problem, &net, &ConcaveLink::min_tpr_tnr(), tc).map_err(failure)?)
        }
        (Algorithm::Dspade, MeasureId::QMean) => {
            boxed(dspade_train(&problem, &net, &ConcaveLink::q_mean(), tc).map_err(failure)?)
        }
        (Algorithm::Dnemsis, MeasureId::Kld) => {
            let m = NestedMeasure::neg_kld(prior(cfg, &data.train))?;
            boxed(dnemsis_train(&problem, &net, &m, tc).map_err(failure)?)
        }
        (Algorithm::Damp, MeasureId::FBeta(beta)) => {
            let coeffs = fbeta_coeffs(beta, prior(cfg, &data.train))?;
            let (split, trace) = damp_train(&problem, &net, &coeffs, tc).map_err(failure)?;
            Trained {
                scorer: Box::new(split),
                threshold: 0.0,
                trace,
                plugin: None,
            }
        }
        (Algorithm::Plugin, MeasureId::FBeta(_)) => {
            let (fit, val) = split(&data.train, PLUGIN_FIT_FRACTION, cfg.seed, true)?;
            if !fit.has_both_classes() || !val.has_both_classes() {
                return Err(HarnessError::Usage(
                    "training set too small to hold out a validation part with both classes".into(),
                ));
            }
            let fit_problem = Problem {
                train: &fit,
                ..problem
            };
            let (model, mut trace) = ce_train(&fit_problem, &net, tc).map_err(failure)?;
            trace.algorithm = "plugin".into();
            let threshold = plugin_tune(&model, &val, &metric)?;
            let plugin = PluginResult {
                threshold,
                train_metric: thresholded(&model, &data.train, &metric, threshold)?,
                test_metric: thresholded(&model, &data.test, &metric, threshold)?,
            };
            Trained {
                scorer: Box::new(model),
                threshold,
                trace,
                plugin: Some(plugin),
            }
        }
        (Algorithm::Ce, _) => boxed(ce_train(&problem, &net, tc).map_err(failure)?),
        (Algorithm::Structann, _) => {
            boxed(struct_ann_train(&problem, &net, &metric, tc).map_err(failure)?)
        }
        (algo, measure) => {
            // resolve() already rejects these
            crate::config::check_compatible(algo, measure)?;
            unreachable!("compatible pair {algo:?}/{measure:?} without a trainer")
        }
    };
    Ok(out)
}

/// Fraction of `data` predicted positive at `threshold`.
pub fn predicted_prior(trained: &Trained, data: &Dataset) -> Result<f64> {
    let c = confusion(trained.scorer.as_ref(), data, trained.threshold)?;
    Ok(c.predicted_positive_fraction()?)
}
