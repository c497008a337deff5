//! Trainers: DSPADE (concave links), DNEMSIS (nested measures), DAMP
//! (pseudolinear measures) and the cross-entropy, plug-in and structured
//! hinge baselines, plus stabilisation diagnostics.
//!
//! Every trainer draws minibatches from a seeded [`MinibatchStream`], so a
//! run is a deterministic function of its inputs.

mod baselines;
mod config;
mod damp;
mod dnemsis;
mod dspade;
mod objectives;
mod structured;
mod trace;

pub use baselines::{ce_train, plugin_tune};
pub use config::TrainConfig;
pub use damp::{damp_train, DampSplit};
pub use dnemsis::{dnemsis_train, dnemsis_train_from};
pub use dspade::{dspade_train, dspade_train_fixed_duals};
pub use objectives::{CrossEntropyObjective, StructuredObjective, WeightedRewardObjective};
pub use structured::{labeling_objective, most_violated_labeling, struct_ann_train};
pub use trace::{evaluate, stability_report, StabilityReport, TraceRecord, TrainTrace};

use crate::data::{Dataset, MinibatchStream};
use crate::error::{Error, Result};
use crate::measures::EvalMetric;
use crate::netcore::{Direction, Model, Objective, OptStepper, Scorer};
use crate::rewards::Label;

/// Training data, optional held-out data and the metric reported in traces.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub train: &'a Dataset,
    pub test: Option<&'a Dataset>,
    pub metric: EvalMetric,
}

/// A run that stopped early, with everything recorded before the failure.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{error}")]
pub struct TrainFailure {
    #[source]
    pub error: Error,
    pub partial: Box<TrainTrace>,
}

/// Runs `body` against a fresh trace, attaching the partial trace to any error.
pub(crate) fn guarded<T>(
    mut trace: TrainTrace,
    body: impl FnOnce(&mut TrainTrace) -> Result<T>,
) -> std::result::Result<(T, TrainTrace), TrainFailure> {
    match body(&mut trace) {
        Ok(v) => Ok((v, trace)),
        Err(error) => {
            log::error!("{} aborted: {error}", trace.algorithm);
            Err(TrainFailure {
                error,
                partial: Box::new(trace),
            })
        }
    }
}

pub(crate) fn check_problem(problem: &Problem<'_>, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    let train = problem.train;
    if train.num_positives() == 0 {
        return Err(Error::UndefinedRate("positive"));
    }
    if train.num_negatives() == 0 {
        return Err(Error::UndefinedRate("negative"));
    }
    Ok(())
}

/// Re-labels numeric errors with the training iteration they occurred at.
pub(crate) fn at_iteration(t: u64) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Numeric { what, .. } => Error::Numeric { iteration: t, what },
        other => other,
    }
}

pub(crate) fn batch_scores<S: Scorer + ?Sized>(model: &S, data: &Dataset, batch: &[usize]) -> Result<Vec<f64>> {
    batch.iter().map(|&i| model.score(data.row(i))).collect()
}

pub(crate) fn batch_labels(data: &Dataset, batch: &[usize]) -> Vec<Label> {
    batch.iter().map(|&i| data.label(i)).collect()
}

/// Fixed stream-seed offsets so that phases of one run never share batches.
pub(crate) const PRETRAIN_STREAM: u64 = 0x5eed_0001;
pub(crate) const FINETUNE_STREAM: u64 = 0x5eed_0002;

/// `epochs` passes of minibatch cross-entropy descent; returns the number of
/// steps taken.
pub(crate) fn ce_epochs(model: &mut Model, data: &Dataset, cfg: &TrainConfig, epochs: usize) -> Result<u64> {
    if epochs == 0 {
        return Ok(0);
    }
    let mut stream = MinibatchStream::new(data, cfg.batch_size, cfg.seed ^ PRETRAIN_STREAM, cfg.stratified)?;
    let steps = (epochs * stream.batches_per_epoch()) as u64;
    let mut stepper = OptStepper::new(cfg.stepper, cfg.eta)?;
    for t in 1..=steps {
        let batch = stream.next().expect("minibatch stream is endless");
        let grad = CrossEntropyObjective::new(data, &batch)?
            .gradient(model)
            .map_err(at_iteration(t))?;
        stepper
            .step(model, &grad, Direction::Descent)
            .map_err(at_iteration(t))?;
    }
    Ok(steps)
}
