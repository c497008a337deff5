use super::{
    at_iteration, batch_labels, batch_scores, ce_epochs, check_problem, guarded, Problem, TrainConfig,
    TrainFailure, FINETUNE_STREAM,
};
use super::objectives::WeightedRewardObjective;
use super::trace::{Recorder, TraceRecord, TrainTrace};
use crate::data::{Dataset, MinibatchStream};
use crate::error::{Error, Result};
use crate::measures::PseudolinearCoeffs;
use crate::netcore::{Direction, Model, NetworkConfig, Objective, OptStepper, Scorer};
use crate::rewards::sample_averages_from_scores;

/// A network cut into a frozen feature extractor and a trainable head.
#[derive(Debug, Clone, PartialEq)]
pub struct DampSplit {
    /// `d_in -> d_int`; its output goes through the hidden activation.
    pub lower: Model,
    /// `d_int -> 1`
    pub upper: Model,
    pub d_int: usize,
}

impl DampSplit {
    /// Splits `model` after layer `k`.
    pub fn from_model(model: &Model, k: usize) -> Result<Self> {
        let (lower, upper) = model.split_at(k)?;
        let d_int = lower.output_dim();
        Ok(Self { lower, upper, d_int })
    }

    /// Intermediate features `f(x; w2)`.
    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        let act = self.lower.hidden_activation();
        Ok(self.lower.forward(x)?.into_iter().map(|z| act.apply(z)).collect())
    }

    /// The dataset re-expressed in intermediate features.
    pub fn transform(&self, data: &Dataset) -> Result<Dataset> {
        let mut feats = Vec::with_capacity(data.len() * self.d_int);
        for i in 0..data.len() {
            feats.extend(self.features(data.row(i))?);
        }
        data.with_features(self.d_int, feats)
    }
}

impl Scorer for DampSplit {
    fn score(&self, x: &[f64]) -> Result<f64> {
        self.upper.score(&self.features(x)?)
    }
}

/// Alternating maximisation for a pseudolinear measure `P_a / P_b`.
///
/// Phase one fits the whole network with `pretrain_epochs` of cross-entropy.
/// Phase two freezes the lower part, maps the data to its features, and for
/// each of `iterations` rounds sets the level `v` to the measure of the head
/// on a fresh batch (rewards of kind `dual_reward` in place of the rates),
/// then takes `inner_iterations` ascent steps on the valuation
/// `V = P_a - v P_b` on further batches. A batch whose denominator falls
/// below `m` keeps the previous level (0 initially).
///
/// Trace iterations count the minibatches drawn after pretraining, level
/// batches included.
pub fn damp_train(
    problem: &Problem<'_>,
    net: &NetworkConfig,
    coeffs: &PseudolinearCoeffs,
    cfg: &TrainConfig,
) -> std::result::Result<(DampSplit, TrainTrace), TrainFailure> {
    let trace = TrainTrace::new("damp", &problem.metric, cfg.batch_size);
    guarded(trace, |tr| run(problem, net, coeffs, cfg, tr))
}

fn run(
    problem: &Problem<'_>,
    net: &NetworkConfig,
    coeffs: &PseudolinearCoeffs,
    cfg: &TrainConfig,
    trace: &mut TrainTrace,
) -> Result<DampSplit> {
    check_problem(problem, cfg)?;
    let layers = net.layer_sizes.len();
    if layers < 2 {
        return Err(Error::Config("the network needs a hidden layer to split".into()));
    }
    let k = cfg.damp_split.unwrap_or(layers - 1);
    let train = problem.train;
    let mut full = Model::new(net.clone())?;
    trace.pretrain_iterations = ce_epochs(&mut full, train, cfg, cfg.pretrain_epochs)?;
    let mut split = DampSplit::from_model(&full, k)?;

    let feats = split.transform(train)?;
    let test_feats = problem.test.map(|d| split.transform(d)).transpose()?;
    let priors = cfg.priors(train)?;
    let mut stream =
        MinibatchStream::new(&feats, cfg.batch_size, cfg.seed ^ FINETUNE_STREAM, cfg.stratified)?;
    let total = cfg.iterations * (1 + cfg.inner_iterations);
    let rec = Recorder::new(&feats, test_feats.as_ref(), problem.metric, cfg.eval_every, total, cfg.batch_size);
    let mut stepper = OptStepper::new(cfg.stepper, cfg.eta)?;
    let all: Vec<usize> = (0..feats.len()).collect();
    let head = &mut split.upper;

    let mut level = 0.0;
    let mut iter = 0u64;
    for _ in 0..cfg.iterations {
        let batch = stream.next().expect("minibatch stream is endless");
        iter += 1;
        let scores = batch_scores(head, &feats, &batch)?;
        let (u, v) = sample_averages_from_scores(cfg.dual_reward, &priors, &scores, &batch_labels(&feats, &batch))?;
        match coeffs.value(u, v) {
            Ok(val) => level = val,
            Err(Error::Degeneracy { denominator, bound }) => {
                log::warn!("iteration {iter}: denominator {denominator} below {bound}, level kept at {level}")
            }
            Err(e) => return Err(e),
        }
        trace.levels.push(level);
        if rec.due(iter) {
            let r = TraceRecord {
                iter,
                level_v: Some(level),
                ..Default::default()
            };
            rec.push(trace, r, &*head)?;
        }

        for _ in 0..cfg.inner_iterations {
            let batch = stream.next().expect("minibatch stream is endless");
            iter += 1;
            let grad = WeightedRewardObjective::valuation(&feats, &batch, priors, coeffs, level)?
                .gradient(head)
                .map_err(at_iteration(iter))?;
            stepper
                .step(head, &grad, Direction::Ascent)
                .map_err(at_iteration(iter))?;
            let norm = WeightedRewardObjective::valuation(&feats, &all, priors, coeffs, level)?
                .gradient(head)
                .map_err(at_iteration(iter))?
                .norm();
            trace.grad_norms.push(norm);
            if rec.due(iter) {
                let r = TraceRecord {
                    iter,
                    grad_norm: Some(norm),
                    level_v: Some(level),
                    ..Default::default()
                };
                rec.push(trace, r, &*head)?;
            }
        }
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_two_gaussians, SyntheticSpec};
    use crate::netcore::Activation;

    #[test]
    fn split_scores_like_the_stacked_network() {
        let net = NetworkConfig::new(3, vec![5, 4, 1]).with_seed(2).with_activation(Activation::Tanh);
        let m = Model::new(net).unwrap();
        let s = DampSplit::from_model(&m, 2).unwrap();
        assert_eq!(s.d_int, 4);
        let x = [0.3, -0.7, 1.1];
        assert!((s.score(&x).unwrap() - m.score(&x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn level_identity_on_a_batch() {
        let data = gen_two_gaussians(&SyntheticSpec {
            n: 200,
            d: 2,
            positive_fraction: 0.3,
            separation: 2.0,
            sigma: 1.0,
            seed: 4,
        })
        .unwrap();
        let m = Model::new(NetworkConfig::new(2, vec![1]).with_seed(1)).unwrap();
        let pr = crate::rewards::ClassPriors::empirical(data.labels()).unwrap();
        let coeffs = crate::measures::fbeta_coeffs(1.0, pr.p()).unwrap();
        let batch: Vec<usize> = (0..64).collect();
        let scores = batch_scores(&m, &data, &batch).unwrap();
        let (u, v) = sample_averages_from_scores(
            crate::rewards::RewardKind::Sigmoid,
            &pr,
            &scores,
            &batch_labels(&data, &batch),
        )
        .unwrap();
        let level = coeffs.value(u, v).unwrap();
        let val = WeightedRewardObjective::valuation(&data, &batch, pr, &coeffs, level)
            .unwrap()
            .value(&m)
            .unwrap();
        assert!(val.abs() <= 1e-12, "{val}");
    }
}
