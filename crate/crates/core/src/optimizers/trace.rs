use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::measures::EvalMetric;
use crate::netcore::Scorer;
use crate::rewards::ConfusionCounts;

/// One evaluation point of a training run. Columns that do not apply to
/// an algorithm stay `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: u64,
    pub samples: u64,
    pub wall_ms: f64,
    pub train_metric: Option<f64>,
    pub test_metric: Option<f64>,
    pub grad_norm: Option<f64>,
    /// DSPADE: α. DNEMSIS: the effective weight on P̂.
    pub alpha: Option<f64>,
    /// DSPADE: β. DNEMSIS: the effective weight on N̂.
    pub beta: Option<f64>,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    pub level_v: Option<f64>,
}

/// Everything a trainer reports besides the model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub algorithm: String,
    pub metric: String,
    pub batch_size: usize,
    pub records: Vec<TraceRecord>,
    /// Primal gradient norm at every iteration, in order.
    pub grad_norms: Vec<f64>,
    /// DAMP levels `v^t`, one per outer iteration.
    pub levels: Vec<f64>,
    /// Cross-entropy iterations run before the main phase.
    pub pretrain_iterations: u64,
}

impl TrainTrace {
    pub fn new(algorithm: &str, metric: &EvalMetric, batch_size: usize) -> Self {
        Self {
            algorithm: algorithm.into(),
            metric: metric.name(),
            batch_size,
            ..Default::default()
        }
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Iterations strictly increasing and every recorded number finite.
    pub fn check(&self) -> Result<()> {
        for w in self.records.windows(2) {
            if w[1].iter <= w[0].iter {
                return Err(Error::Config(format!(
                    "trace iterations not increasing: {} then {}",
                    w[0].iter, w[1].iter
                )));
            }
        }
        for r in &self.records {
            let opts = [
                r.train_metric,
                r.test_metric,
                r.grad_norm,
                r.alpha,
                r.beta,
                r.gamma1,
                r.gamma2,
                r.level_v,
            ];
            if !r.wall_ms.is_finite() || opts.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Numeric {
                    iteration: r.iter,
                    what: "trace record".into(),
                });
            }
        }
        if self.grad_norms.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric {
                iteration: 0,
                what: "gradient norm trace".into(),
            });
        }
        Ok(())
    }
}

/// Metric of `scorer` on `data` at threshold 0; `None` when undefined.
pub fn evaluate<S: Scorer + ?Sized>(scorer: &S, data: &Dataset, metric: &EvalMetric) -> Result<Option<f64>> {
    let scores = scorer.score_all(data)?;
    let counts = ConfusionCounts::from_scores(&scores, data.labels(), 0.0);
    match metric.evaluate(&counts) {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedRate(_)) | Err(Error::Empty(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Fills in metrics, sample counts and timing at the eval cadence.
pub(crate) struct Recorder<'a> {
    train: &'a Dataset,
    test: Option<&'a Dataset>,
    metric: EvalMetric,
    every: u64,
    total: u64,
    batch: u64,
    start: Instant,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(
        train: &'a Dataset,
        test: Option<&'a Dataset>,
        metric: EvalMetric,
        every: u64,
        total: u64,
        batch: usize,
    ) -> Self {
        Self {
            train,
            test,
            metric,
            every,
            total,
            batch: batch as u64,
            start: Instant::now(),
        }
    }

    pub(crate) fn due(&self, t: u64) -> bool {
        t.is_multiple_of(self.every) || t == self.total
    }

    /// Completes `rec` (whose `iter` and dual columns are set) and appends it.
    pub(crate) fn push<S: Scorer + ?Sized>(
        &self,
        trace: &mut TrainTrace,
        mut rec: TraceRecord,
        scorer: &S,
    ) -> Result<()> {
        rec.samples = rec.iter * self.batch;
        rec.train_metric = evaluate(scorer, self.train, &self.metric)?;
        rec.test_metric = match self.test {
            Some(d) => evaluate(scorer, d, &self.metric)?,
            None => None,
        };
        rec.wall_ms = self.start.elapsed().as_secs_f64() * 1e3;
        trace.records.push(rec);
        Ok(())
    }
}

/// ε-stability summary of a gradient-norm sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub epsilon: f64,
    /// First iteration (1-based) with `‖∇‖ ≤ ε`.
    pub first_hit: Option<u64>,
    pub running_min: Vec<f64>,
    pub first_decile_min: Option<f64>,
    pub last_decile_min: Option<f64>,
    /// `last_decile_min / first_decile_min` (0 when both are 0).
    pub decile_ratio: Option<f64>,
    /// Whether the last decile gets below the first one.
    pub stabilizing: bool,
}

pub fn stability_report(trace: &TrainTrace, epsilon: f64) -> StabilityReport {
    let g = &trace.grad_norms;
    let first_hit = g.iter().position(|&x| x <= epsilon).map(|k| k as u64 + 1);
    let mut running_min = Vec::with_capacity(g.len());
    let mut m = f64::INFINITY;
    for &x in g {
        m = m.min(x);
        running_min.push(m);
    }
    let decile = g.len().div_ceil(10);
    let min_of = |s: &[f64]| s.iter().copied().fold(f64::INFINITY, f64::min);
    let (first, last) = if g.is_empty() {
        (None, None)
    } else {
        (Some(min_of(&g[..decile])), Some(min_of(&g[g.len() - decile..])))
    };
    let decile_ratio = match (first, last) {
        (Some(f), Some(l)) if f > 0.0 => Some(l / f),
        (Some(_), Some(0.0)) => Some(0.0),
        (Some(_), Some(_)) => Some(f64::INFINITY),
        _ => None,
    };
    let stabilizing = match (first, last) {
        (Some(f), Some(l)) => l < f || l == 0.0,
        _ => false,
    };
    StabilityReport {
        epsilon,
        first_hit,
        running_min,
        first_decile_min: first,
        last_decile_min: last,
        decile_ratio,
        stabilizing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_norms(g: Vec<f64>) -> TrainTrace {
        TrainTrace {
            grad_norms: g,
            ..Default::default()
        }
    }

    #[test]
    fn zero_gradients_hit_immediately() {
        let r = stability_report(&with_norms(vec![0.0; 20]), 1e-3);
        assert_eq!(r.first_hit, Some(1));
        assert!(r.stabilizing);
        assert_eq!(r.decile_ratio, Some(0.0));
    }

    #[test]
    fn increasing_norms_are_flagged() {
        let r = stability_report(&with_norms((1..=100).map(f64::from).collect()), 0.5);
        assert_eq!(r.first_hit, None);
        assert!(!r.stabilizing);
        assert_eq!(r.first_decile_min, Some(1.0));
        assert_eq!(r.last_decile_min, Some(91.0));
    }

    #[test]
    fn decreasing_norms() {
        let g: Vec<f64> = (1..=50).map(|k| 1.0 / k as f64).collect();
        let r = stability_report(&with_norms(g), 0.1);
        assert_eq!(r.first_hit, Some(10));
        assert!(r.stabilizing);
        assert!(r.running_min.windows(2).all(|w| w[1] <= w[0]));
        assert!((r.decile_ratio.unwrap() - 0.02 / 0.2).abs() < 1e-12);
        let empty = stability_report(&with_norms(vec![]), 0.1);
        assert!(empty.first_hit.is_none() && !empty.stabilizing);
    }

    #[test]
    fn trace_check_rejects_bad_records() {
        let mut t = TrainTrace::default();
        t.records.push(TraceRecord { iter: 10, ..Default::default() });
        t.records.push(TraceRecord { iter: 20, ..Default::default() });
        assert!(t.check().is_ok());
        t.records.push(TraceRecord { iter: 20, ..Default::default() });
        assert!(t.check().is_err());
        t.records.pop();
        t.records[1].alpha = Some(f64::NAN);
        assert!(t.check().is_err());
    }
}
