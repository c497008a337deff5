use super::{
    at_iteration, batch_labels, batch_scores, check_problem, guarded, Problem, TrainConfig, TrainFailure,
};
use super::objectives::StructuredObjective;
use super::trace::{Recorder, TraceRecord, TrainTrace};
use crate::data::MinibatchStream;
use crate::measures::EvalMetric;
use crate::netcore::{Direction, Model, NetworkConfig, Objective, OptStepper};
use crate::rewards::{ConfusionCounts, Label};

fn counts_of(labels: &[Label], labeling: &[Label]) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for (&y, &yt) in labels.iter().zip(labeling) {
        match (y, yt) {
            (Label::Pos, Label::Pos) => c.tp += 1,
            (Label::Pos, Label::Neg) => c.fn_ += 1,
            (Label::Neg, Label::Pos) => c.fp += 1,
            (Label::Neg, Label::Neg) => c.tn += 1,
        }
    }
    c
}

/// `Δ(counts(ỹ, y)) + Σ_i (ỹ_i - y_i) s_i` with labels read as `{0, 1}`.
pub fn labeling_objective(
    scores: &[f64],
    labels: &[Label],
    labeling: &[Label],
    delta: &dyn Fn(&ConfusionCounts) -> f64,
) -> f64 {
    let ind = |y: Label| if y.is_pos() { 1.0 } else { 0.0 };
    let lin: f64 = scores
        .iter()
        .zip(labels.iter().zip(labeling))
        .map(|(s, (&y, &yt))| (ind(yt) - ind(y)) * s)
        .sum();
    delta(&counts_of(labels, labeling)) + lin
}

/// Exact maximiser of [`labeling_objective`].
///
/// For fixed numbers `i` of predicted positives among the true positives and
/// `j` among the negatives, `Δ` is fixed and the score term is maximised by
/// the top-`i` positives and top-`j` negatives, so sorting each class once
/// and enumerating all `(i, j)` with prefix sums is exact, in
/// `O(n log n + n₊ n₋)`. Among equal maxima the labeling with fewer
/// predicted positives wins, then the one with fewer among true positives.
pub fn most_violated_labeling(
    scores: &[f64],
    labels: &[Label],
    delta: &dyn Fn(&ConfusionCounts) -> f64,
) -> Vec<Label> {
    assert_eq!(scores.len(), labels.len(), "one score per label");
    let by_score_desc = |want: bool| {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_pos() == want).collect();
        idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        idx
    };
    let pos = by_score_desc(true);
    let neg = by_score_desc(false);
    let prefix = |idx: &[usize]| {
        let mut acc = vec![0.0; idx.len() + 1];
        for (k, &i) in idx.iter().enumerate() {
            acc[k + 1] = acc[k] + scores[i];
        }
        acc
    };
    let (sp, sn) = (prefix(&pos), prefix(&neg));
    let (np, nn) = (pos.len() as u64, neg.len() as u64);

    let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
    for (i, &a) in sp.iter().enumerate() {
        for (j, &b) in sn.iter().enumerate() {
            let c = ConfusionCounts::new(i as u64, np - i as u64, j as u64, nn - j as u64);
            let val = delta(&c) + a + b;
            let fewer = i + j < best.1 + best.2;
            if val > best.0 || (val == best.0 && fewer) {
                best = (val, i, j);
            }
        }
    }
    let mut out = vec![Label::Neg; labels.len()];
    for &k in pos[..best.1].iter().chain(&neg[..best.2]) {
        out[k] = Label::Pos;
    }
    out
}

/// Structured hinge training with `Δ = loss(metric)`: on each minibatch,
/// find the most violated labeling `ỹ` and descend on
/// `½‖w‖² + C [Δ(ỹ) + Σ (ỹ_i - y_i) f(x_i; w)]`.
pub fn struct_ann_train(
    problem: &Problem<'_>,
    net: &NetworkConfig,
    delta_metric: &EvalMetric,
    cfg: &TrainConfig,
) -> std::result::Result<(Model, TrainTrace), TrainFailure> {
    let trace = TrainTrace::new("structann", &problem.metric, cfg.batch_size);
    guarded(trace, |tr| {
        check_problem(problem, cfg)?;
        let train = problem.train;
        let mut model = Model::new(net.clone())?;
        let mut stepper = OptStepper::new(cfg.stepper, cfg.eta)?;
        let mut stream = MinibatchStream::new(train, cfg.batch_size, cfg.seed, cfg.stratified)?;
        let rec = Recorder::new(train, problem.test, problem.metric, cfg.eval_every, cfg.iterations, cfg.batch_size);
        let delta = |c: &ConfusionCounts| delta_metric.loss(c);
        for t in 1..=cfg.iterations {
            let batch = stream.next().expect("minibatch stream is endless");
            let scores = batch_scores(&model, train, &batch)?;
            let labels = batch_labels(train, &batch);
            let labeling = most_violated_labeling(&scores, &labels, &delta);
            let d = delta(&counts_of(&labels, &labeling));
            let grad = StructuredObjective::new(train, &batch, &labeling, d, cfg.struct_c)?
                .gradient(&model)
                .map_err(at_iteration(t))?;
            let norm = grad.norm();
            tr.grad_norms.push(norm);
            stepper
                .step(&mut model, &grad, Direction::Descent)
                .map_err(at_iteration(t))?;
            if rec.due(t) {
                let r = TraceRecord {
                    iter: t,
                    grad_norm: Some(norm),
                    ..Default::default()
                };
                rec.push(tr, r, &model)?;
            }
        }
        Ok(model)
    })
}
