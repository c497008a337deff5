use serde::{Deserialize, Serialize};

use super::link::ConcaveLink;
use super::nested::kld_floored;
use super::pseudolinear::fbeta_coeffs;
use crate::error::{Error, Result};
use crate::rewards::ConfusionCounts;

/// A measure evaluated on a confusion matrix (zero-one predictions).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EvalMetric {
    MinTprTnr,
    QMean,
    FBeta { beta: f64 },
    /// KL divergence between the true and the predicted positive fraction.
    Kld,
    Accuracy,
}

impl EvalMetric {
    pub fn name(&self) -> String {
        match self {
            EvalMetric::MinTprTnr => "min_tpr_tnr".into(),
            EvalMetric::QMean => "q_mean".into(),
            EvalMetric::FBeta { beta } => format!("f{beta}"),
            EvalMetric::Kld => "kld".into(),
            EvalMetric::Accuracy => "accuracy".into(),
        }
    }

    pub fn higher_is_better(&self) -> bool {
        !matches!(self, EvalMetric::Kld)
    }

    pub fn evaluate(&self, c: &ConfusionCounts) -> Result<f64> {
        match *self {
            EvalMetric::MinTprTnr => ConcaveLink::min_tpr_tnr().value(c.tpr()?, c.tnr()?),
            EvalMetric::QMean => ConcaveLink::q_mean().value(c.tpr()?, c.tnr()?),
            EvalMetric::FBeta { beta } => {
                let b2 = beta * beta;
                let (tp, fn_, fp) = (c.tp as f64, c.fn_ as f64, c.fp as f64);
                let den = (1.0 + b2) * tp + b2 * fn_ + fp;
                if den == 0.0 {
                    // no positives and none predicted
                    Ok(1.0)
                } else {
                    Ok((1.0 + b2) * tp / den)
                }
            }
            EvalMetric::Kld => {
                let p = c.true_positive_fraction()?;
                let phat = c.predicted_positive_fraction()?;
                kld_floored([p, 1.0 - p], [phat, 1.0 - phat], 1e-12)
            }
            EvalMetric::Accuracy => match c.total() {
                0 => Err(Error::Empty("confusion counts")),
                n => Ok((c.tp + c.tn) as f64 / n as f64),
            },
        }
    }

    /// `1 - measure` for higher-is-better metrics, the measure itself
    /// otherwise. Defined on every confusion matrix: a rate whose class is
    /// absent counts as perfect.
    pub fn loss(&self, c: &ConfusionCounts) -> f64 {
        let rate = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        let u = rate(c.tp, c.positives());
        let v = rate(c.tn, c.negatives());
        match *self {
            EvalMetric::MinTprTnr => 1.0 - ConcaveLink::min_tpr_tnr().value_unchecked(u, v),
            EvalMetric::QMean => 1.0 - ConcaveLink::q_mean().value_unchecked(u, v),
            EvalMetric::FBeta { .. } | EvalMetric::Accuracy | EvalMetric::Kld => {
                if c.total() == 0 {
                    0.0
                } else {
                    let v = self.evaluate(c).expect("non-empty counts");
                    if self.higher_is_better() {
                        1.0 - v
                    } else {
                        v
                    }
                }
            }
        }
    }

    /// Measure value from the class rates directly, for a positive prior `p`.
    pub fn from_rates(&self, u: f64, v: f64, p: f64) -> Result<f64> {
        match *self {
            EvalMetric::MinTprTnr => ConcaveLink::min_tpr_tnr().value(u, v),
            EvalMetric::QMean => ConcaveLink::q_mean().value(u, v),
            EvalMetric::FBeta { beta } => fbeta_coeffs(beta, p)?.value(u, v),
            EvalMetric::Kld => {
                let phat = p * u + (1.0 - p) * (1.0 - v);
                kld_floored([p, 1.0 - p], [phat, 1.0 - phat], 1e-12)
            }
            EvalMetric::Accuracy => Ok(p * u + (1.0 - p) * v),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn metrics_on_counts() {
        let c = ConfusionCounts::new(8, 2, 3, 87);
        assert_abs_diff_eq!(EvalMetric::MinTprTnr.evaluate(&c).unwrap(), 0.8);
        assert_abs_diff_eq!(EvalMetric::FBeta { beta: 1.0 }.evaluate(&c).unwrap(), 16.0 / 21.0);
        assert_abs_diff_eq!(EvalMetric::Accuracy.evaluate(&c).unwrap(), 0.95);
        let k = EvalMetric::Kld.evaluate(&c).unwrap();
        assert_abs_diff_eq!(k, kld_floored([0.1, 0.9], [0.11, 0.89], 0.0).unwrap(), epsilon = 1e-15);
        assert!(EvalMetric::MinTprTnr.evaluate(&ConfusionCounts::new(0, 0, 1, 1)).is_err());
    }

    #[test]
    fn losses_are_total() {
        let none = ConfusionCounts::new(0, 0, 0, 5);
        assert_eq!(EvalMetric::FBeta { beta: 1.0 }.loss(&none), 0.0);
        assert_eq!(EvalMetric::MinTprTnr.loss(&none), 0.0);
        assert_eq!(EvalMetric::MinTprTnr.loss(&ConfusionCounts::new(0, 2, 0, 5)), 1.0);
        assert_eq!(EvalMetric::Accuracy.loss(&ConfusionCounts::default()), 0.0);
    }

    #[test]
    fn exhaustive_fbeta_coefficients_agree_with_counts() {
        // Every confusion matrix with 1..=50 points, both classes present and tp + fp + fn > 0.
        let mut checked = 0usize;
        for n in 2u64..=50 {
            for pos in 1..n {
                let neg = n - pos;
                let p = pos as f64 / n as f64;
                let c = fbeta_coeffs(1.0, p).unwrap();
                for tp in 0..=pos {
                    for tn in 0..=neg {
                        let counts = ConfusionCounts::new(tp, pos - tp, neg - tn, tn);
                        let u = tp as f64 / pos as f64;
                        let v = tn as f64 / neg as f64;
                        let direct = EvalMetric::FBeta { beta: 1.0 }.evaluate(&counts).unwrap();
                        assert!((c.value(u, v).unwrap() - direct).abs() <= 1e-9);
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 20_000);
    }
}
