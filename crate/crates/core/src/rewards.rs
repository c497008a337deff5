//! Reward surrogates, class-normalised rewards and confusion statistics.
//!
//! A reward `r(score, y)` lies in `[0, 1]`. The sigmoid reward is the smooth
//! surrogate used in every primal gradient; the zero-one reward is the
//! indicator of a correct sign and is used for evaluation and for the
//! count-based ("-NS") dual statistics.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::netcore::Scorer;

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Pos,
    Neg,
}

impl Label {
    /// `+1.0` for positives, `-1.0` for negatives.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }

    #[inline]
    pub fn is_pos(self) -> bool {
        self == Label::Pos
    }

    pub fn from_sign(s: f64) -> Label {
        if s > 0.0 {
            Label::Pos
        } else {
            Label::Neg
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    Sigmoid,
    ZeroOne,
}

impl RewardKind {
    pub fn name(self) -> &'static str {
        match self {
            RewardKind::Sigmoid => "sigmoid",
            RewardKind::ZeroOne => "zero_one",
        }
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Reward of predicting `score` when the true label is `y`.
///
/// A score of exactly zero earns no zero-one reward for either label.
#[inline]
pub fn reward(kind: RewardKind, score: f64, y: Label) -> f64 {
    let margin = y.sign() * score;
    match kind {
        RewardKind::Sigmoid => sigmoid(margin),
        RewardKind::ZeroOne => {
            if margin > 0.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Derivative of the sigmoid reward with respect to the score.
#[inline]
pub fn sigmoid_reward_slope(score: f64, y: Label) -> f64 {
    let s = sigmoid(y.sign() * score);
    y.sign() * s * (1.0 - s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorSource {
    EmpiricalTrain,
    UserSupplied,
}

/// Proportion of positives `p` used to normalise class rewards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassPriors {
    p: f64,
    source: PriorSource,
}

impl ClassPriors {
    pub fn new(p: f64, source: PriorSource) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::DegeneratePrior(p));
        }
        Ok(Self { p, source })
    }

    pub fn user(p: f64) -> Result<Self> {
        Self::new(p, PriorSource::UserSupplied)
    }

    /// Positive fraction of `labels`; fails when a class is absent.
    pub fn empirical(labels: &[Label]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("labels"));
        }
        let pos = labels.iter().filter(|y| y.is_pos()).count();
        Self::new(pos as f64 / labels.len() as f64, PriorSource::EmpiricalTrain)
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.p
    }

    #[inline]
    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    pub fn source(&self) -> PriorSource {
        self.source
    }
}

/// `(r+, r-)` contributions of a single point: `r/p` on positives and
/// `r/(1-p)` on negatives; exactly one component is non-zero unless `r = 0`.
pub fn class_normalized_reward(
    kind: RewardKind,
    priors: &ClassPriors,
    score: f64,
    y: Label,
) -> (f64, f64) {
    let r = reward(kind, score, y);
    match y {
        Label::Pos => (r / priors.p(), 0.0),
        Label::Neg => (0.0, r / priors.q()),
    }
}

/// Batch means `(P̂_S, N̂_S)` of the class-normalised rewards.
pub fn sample_averages_from_scores(
    kind: RewardKind,
    priors: &ClassPriors,
    scores: &[f64],
    labels: &[Label],
) -> Result<(f64, f64)> {
    if scores.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if scores.len() != labels.len() {
        return Err(Error::Shape {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let (mut sp, mut sn) = (0.0, 0.0);
    for (&s, &y) in scores.iter().zip(labels) {
        let (rp, rn) = class_normalized_reward(kind, priors, s, y);
        sp += rp;
        sn += rn;
    }
    let b = scores.len() as f64;
    Ok((sp / b, sn / b))
}

/// `(P̂_S, N̂_S)` of `model` on the points `indices` of `data`.
pub fn sample_averages<S: Scorer + ?Sized>(
    kind: RewardKind,
    priors: &ClassPriors,
    model: &S,
    data: &Dataset,
    indices: &[usize],
) -> Result<(f64, f64)> {
    let scores = indices
        .iter()
        .map(|&i| model.score(data.row(i)))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<Label> = indices.iter().map(|&i| data.label(i)).collect();
    sample_averages_from_scores(kind, priors, &scores, &labels)
}

/// Per-batch increments for [`RewardStats`].
///
/// `r_plus` is the batch mean of `r * I{y = +1}`, i.e. `p * P̂_S`, and
/// `n_plus` the batch mean of `I{y = +1}`; negatives likewise. The ratio of
/// the running sums is then a conditional-mean (TPR/TNR) estimate whatever
/// prior was used inside `P̂_S`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BatchStats {
    pub r_plus: f64,
    pub r_minus: f64,
    pub n_plus: f64,
    pub n_minus: f64,
}

impl BatchStats {
    pub fn from_scores(kind: RewardKind, scores: &[f64], labels: &[Label]) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::Empty("batch"));
        }
        if scores.len() != labels.len() {
            return Err(Error::Shape {
                expected: scores.len(),
                got: labels.len(),
            });
        }
        let mut st = BatchStats::default();
        for (&s, &y) in scores.iter().zip(labels) {
            let r = reward(kind, s, y);
            match y {
                Label::Pos => {
                    st.r_plus += r;
                    st.n_plus += 1.0;
                }
                Label::Neg => {
                    st.r_minus += r;
                    st.n_minus += 1.0;
                }
            }
        }
        let b = scores.len() as f64;
        st.r_plus /= b;
        st.r_minus /= b;
        st.n_plus /= b;
        st.n_minus /= b;
        Ok(st)
    }
}

/// Running reward accumulators `r+, r-, n+, n-` feeding the dual step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RewardStats {
    pub r_plus: f64,
    pub r_minus: f64,
    pub n_plus: f64,
    pub n_minus: f64,
    pub t: u64,
}

impl RewardStats {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one batch. A class absent from the batch leaves its two
    /// accumulators untouched.
    pub fn accumulate(&mut self, batch: &BatchStats) {
        if batch.n_plus > 0.0 {
            self.r_plus += batch.r_plus;
            self.n_plus += batch.n_plus;
        } else {
            log::debug!("batch without positives at t = {}; r+/n+ unchanged", self.t + 1);
        }
        if batch.n_minus > 0.0 {
            self.r_minus += batch.r_minus;
            self.n_minus += batch.n_minus;
        } else {
            log::debug!("batch without negatives at t = {}; r-/n- unchanged", self.t + 1);
        }
        self.t += 1;
    }

    /// `r+ / n+`, or `None` before any positive has been seen.
    pub fn positive_rate(&self) -> Option<f64> {
        (self.n_plus > 0.0).then(|| self.r_plus / self.n_plus)
    }

    pub fn negative_rate(&self) -> Option<f64> {
        (self.n_minus > 0.0).then(|| self.r_minus / self.n_minus)
    }
}

/// Binary confusion matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fn_: u64, fp: u64, tn: u64) -> Self {
        Self { tp, fn_, fp, tn }
    }

    /// Counts for predicted scores at a threshold: a point counts as
    /// predicted positive iff `score - threshold > 0` for positives and
    /// `score - threshold >= 0` for negatives, so a score exactly at the
    /// threshold is an error for either label.
    pub fn from_scores(scores: &[f64], labels: &[Label], threshold: f64) -> Self {
        let mut c = Self::default();
        for (&s, &y) in scores.iter().zip(labels) {
            let correct = reward(RewardKind::ZeroOne, s - threshold, y) > 0.0;
            match (y, correct) {
                (Label::Pos, true) => c.tp += 1,
                (Label::Pos, false) => c.fn_ += 1,
                (Label::Neg, true) => c.tn += 1,
                (Label::Neg, false) => c.fp += 1,
            }
        }
        c
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.fp + self.tn
    }

    pub fn total(&self) -> u64 {
        self.positives() + self.negatives()
    }

    pub fn tpr(&self) -> Result<f64> {
        match self.positives() {
            0 => Err(Error::UndefinedRate("positive")),
            n => Ok(self.tp as f64 / n as f64),
        }
    }

    pub fn tnr(&self) -> Result<f64> {
        match self.negatives() {
            0 => Err(Error::UndefinedRate("negative")),
            n => Ok(self.tn as f64 / n as f64),
        }
    }

    /// Fraction of points predicted positive.
    pub fn predicted_positive_fraction(&self) -> Result<f64> {
        match self.total() {
            0 => Err(Error::Empty("confusion counts")),
            n => Ok((self.tp + self.fp) as f64 / n as f64),
        }
    }

    pub fn true_positive_fraction(&self) -> Result<f64> {
        match self.total() {
            0 => Err(Error::Empty("confusion counts")),
            n => Ok(self.positives() as f64 / n as f64),
        }
    }
}

/// Confusion matrix of `model` on the whole of `data` at `threshold`.
pub fn confusion<S: Scorer + ?Sized>(
    model: &S,
    data: &Dataset,
    threshold: f64,
) -> Result<ConfusionCounts> {
    let scores = model.score_all(data)?;
    Ok(ConfusionCounts::from_scores(&scores, data.labels(), threshold))
}
