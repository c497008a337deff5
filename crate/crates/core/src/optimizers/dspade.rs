use super::{
    at_iteration, batch_labels, batch_scores, check_problem, guarded, Problem, TrainConfig, TrainFailure,
};
use super::objectives::WeightedRewardObjective;
use super::trace::{Recorder, TraceRecord, TrainTrace};
use crate::data::MinibatchStream;
use crate::error::Result;
use crate::measures::ConcaveLink;
use crate::netcore::{Direction, Model, NetworkConfig, Objective, OptStepper};
use crate::rewards::{BatchStats, RewardStats};

/// Primal-dual training for a concave link of (TPR, TNR).
///
/// Each iteration takes an ascent step on `g(w; S_t, α, β) = α P̂ + β N̂`
/// with the previous duals, accumulates reward statistics of the updated
/// model on the same batch, and sets `(α, β)` to the link's supergradient
/// at the running rate estimates. The duals start at zero.
pub fn dspade_train(
    problem: &Problem<'_>,
    net: &NetworkConfig,
    link: &ConcaveLink,
    cfg: &TrainConfig,
) -> std::result::Result<(Model, TrainTrace), TrainFailure> {
    let trace = TrainTrace::new("dspade", &problem.metric, cfg.batch_size);
    guarded(trace, |tr| run(problem, net, Duals::Adaptive(link), cfg, tr))
}

/// Same loop with the duals pinned at `(alpha, beta)`; an ablation that
/// reduces to plain ascent on a fixed weighting of the two rates.
pub fn dspade_train_fixed_duals(
    problem: &Problem<'_>,
    net: &NetworkConfig,
    alpha: f64,
    beta: f64,
    cfg: &TrainConfig,
) -> std::result::Result<(Model, TrainTrace), TrainFailure> {
    let trace = TrainTrace::new("dspade_fixed", &problem.metric, cfg.batch_size);
    guarded(trace, |tr| run(problem, net, Duals::Fixed(alpha, beta), cfg, tr))
}

#[derive(Clone, Copy)]
enum Duals<'a> {
    Adaptive(&'a ConcaveLink),
    Fixed(f64, f64),
}

fn run(
    problem: &Problem<'_>,
    net: &NetworkConfig,
    duals: Duals<'_>,
    cfg: &TrainConfig,
    trace: &mut TrainTrace,
) -> Result<Model> {
    check_problem(problem, cfg)?;
    let train = problem.train;
    let priors = cfg.priors(train)?;
    let mut model = Model::new(net.clone())?;
    let mut stepper = OptStepper::new(cfg.stepper, cfg.eta)?;
    let mut stream = MinibatchStream::new(train, cfg.batch_size, cfg.seed, cfg.stratified)?;
    let rec = Recorder::new(train, problem.test, problem.metric, cfg.eval_every, cfg.iterations, cfg.batch_size);

    let all: Vec<usize> = (0..train.len()).collect();
    let mut stats = RewardStats::new();
    let (mut alpha, mut beta) = match duals {
        Duals::Adaptive(_) => (0.0, 0.0),
        Duals::Fixed(a, b) => (a, b),
    };
    for t in 1..=cfg.iterations {
        let batch = stream.next().expect("minibatch stream is endless");
        let grad = WeightedRewardObjective::augmented(train, &batch, priors, alpha, beta)?
            .gradient(&model)
            .map_err(at_iteration(t))?;
        stepper
            .step(&mut model, &grad, Direction::Ascent)
            .map_err(at_iteration(t))?;

        let scores = batch_scores(&model, train, &batch)?;
        stats.accumulate(&BatchStats::from_scores(cfg.dual_reward, &scores, &batch_labels(train, &batch))?);
        if let Duals::Adaptive(link) = duals {
            match (stats.positive_rate(), stats.negative_rate()) {
                (Some(u), Some(v)) => (alpha, beta) = link.dual_step(u, v)?,
                _ => log::debug!("t = {t}: a class is still unseen, duals kept"),
            }
        }

        // Stationarity diagnostic: full-training-set gradient at the new
        // model and duals (a minibatch without positives would report 0).
        let norm = WeightedRewardObjective::augmented(train, &all, priors, alpha, beta)?
            .gradient(&model)
            .map_err(at_iteration(t))?
            .norm();
        trace.grad_norms.push(norm);
        if rec.due(t) {
            let r = TraceRecord {
                iter: t,
                grad_norm: Some(norm),
                alpha: Some(alpha),
                beta: Some(beta),
                ..Default::default()
            };
            rec.push(trace, r, &model)?;
        }
    }
    Ok(model)
}
