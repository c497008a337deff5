use super::{at_iteration, check_problem, guarded, Problem, TrainConfig, TrainFailure};
use super::objectives::CrossEntropyObjective;
use super::trace::{Recorder, TraceRecord, TrainTrace};
use crate::data::{Dataset, MinibatchStream};
use crate::error::{Error, Result};
use crate::measures::EvalMetric;
use crate::netcore::{Direction, Model, NetworkConfig, Objective, OptStepper, Scorer};
use crate::rewards::ConfusionCounts;

/// Minibatch descent on the mean logistic loss of the score.
pub fn ce_train(
    problem: &Problem<'_>,
    net: &NetworkConfig,
    cfg: &TrainConfig,
) -> std::result::Result<(Model, TrainTrace), TrainFailure> {
    let trace = TrainTrace::new("ce", &problem.metric, cfg.batch_size);
    guarded(trace, |tr| {
        check_problem(problem, cfg)?;
        let train = problem.train;
        let mut model = Model::new(net.clone())?;
        let mut stepper = OptStepper::new(cfg.stepper, cfg.eta)?;
        let mut stream = MinibatchStream::new(train, cfg.batch_size, cfg.seed, cfg.stratified)?;
        let rec = Recorder::new(train, problem.test, problem.metric, cfg.eval_every, cfg.iterations, cfg.batch_size);
        for t in 1..=cfg.iterations {
            let batch = stream.next().expect("minibatch stream is endless");
            let grad = CrossEntropyObjective::new(train, &batch)?
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

/// Threshold maximising `metric` on `validation` (minimising it for
/// lower-is-better metrics).
///
/// Candidates are the midpoints between consecutive distinct scores plus one
/// below the smallest and one above the largest score; a point is predicted
/// positive when its score exceeds the threshold. Ties go to the smallest
/// threshold; thresholds where the metric is undefined are skipped.
pub fn plugin_tune<S: Scorer + ?Sized>(model: &S, validation: &Dataset, metric: &EvalMetric) -> Result<f64> {
    if validation.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    let scores = model.score_all(validation)?;
    let mut distinct = scores.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut candidates = Vec::with_capacity(distinct.len() + 1);
    candidates.push(distinct[0] - 1.0);
    candidates.extend(distinct.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    candidates.push(distinct[distinct.len() - 1] + 1.0);

    let sign = if metric.higher_is_better() { 1.0 } else { -1.0 };
    let mut best: Option<(f64, f64)> = None;
    for thr in candidates {
        let counts = ConfusionCounts::from_scores(&scores, validation.labels(), thr);
        let Ok(val) = metric.evaluate(&counts) else {
            continue;
        };
        if best.is_none_or(|(_, b)| sign * val > sign * b) {
            best = Some((thr, val));
        }
    }
    best.map(|(t, _)| t).ok_or(Error::UndefinedRate("metric undefined at every threshold"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewards::Label;

    /// Scores the single feature.
    struct Identity;
    impl Scorer for Identity {
        fn score(&self, x: &[f64]) -> Result<f64> {
            Ok(x[0])
        }
    }

    fn scored(scores: &[f64], labels: &[Label]) -> Dataset {
        Dataset::new("s", 1, scores.to_vec(), labels.to_vec()).unwrap()
    }

    #[test]
    fn two_points_pick_the_midpoint() {
        let d = scored(&[-1.0, 1.0], &[Label::Neg, Label::Pos]);
        for m in [EvalMetric::FBeta { beta: 1.0 }, EvalMetric::Accuracy, EvalMetric::MinTprTnr] {
            assert_eq!(plugin_tune(&Identity, &d, &m).unwrap(), 0.0);
        }
    }

    #[test]
    fn matches_brute_force_on_six_points() {
        use Label::*;
        let s = [-2.0, -0.5, 0.1, 0.4, 1.3, 2.0];
        let y = [Neg, Pos, Neg, Pos, Neg, Pos];
        let d = scored(&s, &y);
        let f1 = EvalMetric::FBeta { beta: 1.0 };
        let thr = plugin_tune(&Identity, &d, &f1).unwrap();
        // all 7 cut positions: predict the top k as positive
        let mut best = (f64::NEG_INFINITY, 0usize);
        for k in 0..=6 {
            let mut c = ConfusionCounts::default();
            for (i, &yi) in y.iter().enumerate() {
                let pred = i >= 6 - k;
                match (yi, pred) {
                    (Pos, true) => c.tp += 1,
                    (Pos, false) => c.fn_ += 1,
                    (Neg, true) => c.fp += 1,
                    (Neg, false) => c.tn += 1,
                }
            }
            let v = f1.evaluate(&c).unwrap();
            if v > best.0 {
                best = (v, k);
            }
        }
        let got = f1.evaluate(&ConfusionCounts::from_scores(&s, &y, thr)).unwrap();
        assert!((got - best.0).abs() < 1e-15);
        assert_eq!(s.iter().filter(|&&v| v > thr).count(), best.1);
    }

    #[test]
    fn separable_accuracy_threshold_lies_in_margin() {
        use Label::*;
        let d = scored(&[-3.0, -2.0, -1.5, 1.0, 2.5], &[Neg, Neg, Neg, Pos, Pos]);
        let thr = plugin_tune(&Identity, &d, &EvalMetric::Accuracy).unwrap();
        assert!(thr > -1.5 && thr < 1.0);
        let empty = Dataset::new("e", 1, vec![], vec![]).unwrap();
        assert!(plugin_tune(&Identity, &empty, &EvalMetric::Accuracy).is_err());
    }
}
