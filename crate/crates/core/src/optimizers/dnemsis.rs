use super::{
    at_iteration, batch_labels, batch_scores, ce_epochs, check_problem, guarded, Problem, TrainConfig,
    TrainFailure,
};
use super::objectives::WeightedRewardObjective;
use super::trace::{Recorder, TraceRecord, TrainTrace};
use crate::data::MinibatchStream;
use crate::error::{Error, Result};
use crate::measures::{nested_dual_steps, NestedDuals, NestedMeasure};
use crate::netcore::{Direction, Model, NetworkConfig, Objective, OptStepper};
use crate::rewards::sample_averages_from_scores;

/// Nested primal-dual training for `Ψ(ζ1, ζ2)`.
///
/// Each iteration ascends `h = (γ1 α1 + γ2 β1) P̂ + (γ1 α2 + γ2 β2) N̂` with
/// the previous duals, then updates the running rate estimate `r` (mean of
/// the batch `(P̂, N̂)` of the updated model) and the running inner-value
/// estimate `q`, and takes the inner and outer dual steps. Batch sums are
/// divided by the batch size. With `warm_start_epochs > 0` the network is
/// first fitted with cross-entropy.
pub fn dnemsis_train(
    problem: &Problem<'_>,
    net: &NetworkConfig,
    measure: &NestedMeasure,
    cfg: &TrainConfig,
) -> std::result::Result<(Model, TrainTrace), TrainFailure> {
    let trace = TrainTrace::new("dnemsis", &problem.metric, cfg.batch_size);
    guarded(trace, |tr| {
        check_problem(problem, cfg)?;
        let mut model = Model::new(net.clone())?;
        tr.pretrain_iterations = ce_epochs(&mut model, problem.train, cfg, cfg.warm_start_epochs)?;
        run(problem, model, measure, cfg, tr)
    })
}

/// [`dnemsis_train`] starting from an existing model (no warm start).
pub fn dnemsis_train_from(
    problem: &Problem<'_>,
    init: Model,
    measure: &NestedMeasure,
    cfg: &TrainConfig,
) -> std::result::Result<(Model, TrainTrace), TrainFailure> {
    let trace = TrainTrace::new("dnemsis", &problem.metric, cfg.batch_size);
    guarded(trace, |tr| {
        check_problem(problem, cfg)?;
        run(problem, init, measure, cfg, tr)
    })
}

fn run(
    problem: &Problem<'_>,
    mut model: Model,
    measure: &NestedMeasure,
    cfg: &TrainConfig,
    trace: &mut TrainTrace,
) -> Result<Model> {
    let train = problem.train;
    if model.input_dim() != train.dim() {
        return Err(Error::Shape {
            expected: train.dim(),
            got: model.input_dim(),
        });
    }
    let priors = cfg.priors(train)?;
    let mut stepper = OptStepper::new(cfg.stepper, cfg.eta)?;
    let mut stream = MinibatchStream::new(train, cfg.batch_size, cfg.seed, cfg.stratified)?;
    let rec = Recorder::new(train, problem.test, problem.metric, cfg.eval_every, cfg.iterations, cfg.batch_size);

    let all: Vec<usize> = (0..train.len()).collect();
    let mut duals = NestedDuals::default();
    let (mut r, mut q) = ([0.0f64; 2], [0.0f64; 2]);
    // Point at which the current inner duals are supergradients.
    let mut anchor: Option<[f64; 2]> = None;
    for t in 1..=cfg.iterations {
        let batch = stream.next().expect("minibatch stream is endless");
        let grad = WeightedRewardObjective::nested(train, &batch, priors, &duals)?
            .gradient(&model)
            .map_err(at_iteration(t))?;
        stepper
            .step(&mut model, &grad, Direction::Ascent)
            .map_err(at_iteration(t))?;

        let scores = batch_scores(&model, train, &batch)?;
        let (p_hat, n_hat) =
            sample_averages_from_scores(cfg.dual_reward, &priors, &scores, &batch_labels(train, &batch))?;
        let conj = match anchor {
            Some(a) => [
                measure.zeta1_conjugate_at(duals.alpha, a),
                measure.zeta2_conjugate_at(duals.beta, a),
            ],
            None => {
                let s = measure.zeta_sup();
                [-s[0], -s[1]]
            }
        };
        let tf = t as f64;
        let inner = [
            duals.alpha[0] * p_hat + duals.alpha[1] * n_hat - conj[0],
            duals.beta[0] * p_hat + duals.beta[1] * n_hat - conj[1],
        ];
        for k in 0..2 {
            q[k] = ((tf - 1.0) * q[k] + inner[k]) / tf;
        }
        r[0] = ((tf - 1.0) * r[0] + p_hat) / tf;
        r[1] = ((tf - 1.0) * r[1] + n_hat) / tf;
        duals = nested_dual_steps(measure, r, q).map_err(at_iteration(t))?;
        anchor = Some([r[0].clamp(0.0, 1.0), r[1].clamp(0.0, 1.0)]);

        let norm = WeightedRewardObjective::nested(train, &all, priors, &duals)?
            .gradient(&model)
            .map_err(at_iteration(t))?
            .norm();
        trace.grad_norms.push(norm);
        if rec.due(t) {
            let (wp, wn) = duals.reward_weights();
            let rec_t = TraceRecord {
                iter: t,
                grad_norm: Some(norm),
                alpha: Some(wp),
                beta: Some(wn),
                gamma1: Some(duals.gamma[0]),
                gamma2: Some(duals.gamma[1]),
                ..Default::default()
            };
            rec.push(trace, rec_t, &model)?;
        }
    }
    Ok(model)
}
