//! Batch objectives behind every trainer, exposed for gradient checking.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::measures::{NestedDuals, PseudolinearCoeffs};
use crate::netcore::{backward_weighted_rewards, GradientBuffer, Model, Objective, Scorer, WeightedPoint};
use crate::rewards::{sample_averages, sigmoid, ClassPriors, Label, RewardKind};

/// `c0 + w_pos P̂_S(w) + w_neg N̂_S(w)` with sigmoid rewards on a fixed batch.
///
/// The augmented objectives `g` (DSPADE), `h` (DNEMSIS) and the surrogate
/// valuation `V` (DAMP) are all of this form.
#[derive(Debug, Clone)]
pub struct WeightedRewardObjective<'a> {
    data: &'a Dataset,
    batch: &'a [usize],
    priors: ClassPriors,
    pub constant: f64,
    pub weight_pos: f64,
    pub weight_neg: f64,
}

impl<'a> WeightedRewardObjective<'a> {
    pub fn new(
        data: &'a Dataset,
        batch: &'a [usize],
        priors: ClassPriors,
        constant: f64,
        weight_pos: f64,
        weight_neg: f64,
    ) -> Result<Self> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        Ok(Self {
            data,
            batch,
            priors,
            constant,
            weight_pos,
            weight_neg,
        })
    }

    /// `g(w; S, α, β) = α P̂_S + β N̂_S`
    pub fn augmented(data: &'a Dataset, batch: &'a [usize], priors: ClassPriors, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(data, batch, priors, 0.0, alpha, beta)
    }

    /// `h(w; S, α, β, γ) = (γ1 α1 + γ2 β1) P̂_S + (γ1 α2 + γ2 β2) N̂_S`
    pub fn nested(data: &'a Dataset, batch: &'a [usize], priors: ClassPriors, duals: &NestedDuals) -> Result<Self> {
        let (wp, wn) = duals.reward_weights();
        Self::new(data, batch, priors, 0.0, wp, wn)
    }

    /// `V_S(w, v) = P_a - v P_b` with rewards in place of the rates.
    pub fn valuation(
        data: &'a Dataset,
        batch: &'a [usize],
        priors: ClassPriors,
        coeffs: &PseudolinearCoeffs,
        level: f64,
    ) -> Result<Self> {
        let [c0, c1, c2] = coeffs.valuation_weights(level);
        Self::new(data, batch, priors, c0, c1, c2)
    }
}

impl Objective for WeightedRewardObjective<'_> {
    fn value(&self, model: &Model) -> Result<f64> {
        let (p_hat, n_hat) = sample_averages(RewardKind::Sigmoid, &self.priors, model, self.data, self.batch)?;
        Ok(self.constant + self.weight_pos * p_hat + self.weight_neg * n_hat)
    }

    fn gradient(&self, model: &Model) -> Result<GradientBuffer> {
        let b = self.batch.len() as f64;
        let cp = self.weight_pos / (self.priors.p() * b);
        let cn = self.weight_neg / (self.priors.q() * b);
        let points: Vec<WeightedPoint> = self
            .batch
            .iter()
            .map(|&i| {
                let y = self.data.label(i);
                WeightedPoint {
                    x: self.data.row(i),
                    y,
                    coeff: if y.is_pos() { cp } else { cn },
                }
            })
            .collect();
        backward_weighted_rewards(model, &points, RewardKind::Sigmoid)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean logistic loss `(1/b) Σ log(1 + exp(-y f(x)))` on a fixed batch.
#[derive(Debug, Clone)]
pub struct CrossEntropyObjective<'a> {
    data: &'a Dataset,
    batch: &'a [usize],
}

impl<'a> CrossEntropyObjective<'a> {
    pub fn new(data: &'a Dataset, batch: &'a [usize]) -> Result<Self> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        Ok(Self { data, batch })
    }
}

impl Objective for CrossEntropyObjective<'_> {
    fn value(&self, model: &Model) -> Result<f64> {
        let mut total = 0.0;
        for &i in self.batch {
            let s = model.score(self.data.row(i))?;
            total += softplus(-self.data.label(i).sign() * s);
        }
        Ok(total / self.batch.len() as f64)
    }

    fn gradient(&self, model: &Model) -> Result<GradientBuffer> {
        let b = self.batch.len() as f64;
        let mut grad = GradientBuffer::zeros_like(model);
        for &i in self.batch {
            let x = self.data.row(i);
            let y = self.data.label(i).sign();
            let s = model.score(x)?;
            model.accumulate_gradient(x, &[-y * sigmoid(-y * s) / b], &mut grad)?;
        }
        Ok(grad)
    }
}

/// Loss-augmented structured objective at a fixed labeling `ỹ`:
/// `½‖w‖² + C [Δ(ỹ) + Σ_i (ỹ_i - y_i) f(x_i; w)]` with labels in `{0, 1}`.
#[derive(Debug, Clone)]
pub struct StructuredObjective<'a> {
    data: &'a Dataset,
    batch: &'a [usize],
    labeling: &'a [Label],
    delta: f64,
    c: f64,
}

fn indicator(y: Label) -> f64 {
    if y.is_pos() {
        1.0
    } else {
        0.0
    }
}

impl<'a> StructuredObjective<'a> {
    /// `delta` is `Δ` evaluated at `labeling`.
    pub fn new(data: &'a Dataset, batch: &'a [usize], labeling: &'a [Label], delta: f64, c: f64) -> Result<Self> {
        if labeling.len() != batch.len() {
            return Err(Error::Shape {
                expected: batch.len(),
                got: labeling.len(),
            });
        }
        Ok(Self {
            data,
            batch,
            labeling,
            delta,
            c,
        })
    }
}

impl Objective for StructuredObjective<'_> {
    fn value(&self, model: &Model) -> Result<f64> {
        let reg = 0.5 * model.params().iter().map(|w| w * w).sum::<f64>();
        let mut lin = 0.0;
        for (&i, &yt) in self.batch.iter().zip(self.labeling) {
            let d = indicator(yt) - indicator(self.data.label(i));
            if d != 0.0 {
                lin += d * model.score(self.data.row(i))?;
            }
        }
        Ok(reg + self.c * (self.delta + lin))
    }

    fn gradient(&self, model: &Model) -> Result<GradientBuffer> {
        let mut grad = GradientBuffer::from_vec(model.params().to_vec());
        for (&i, &yt) in self.batch.iter().zip(self.labeling) {
            let d = indicator(yt) - indicator(self.data.label(i));
            if d != 0.0 {
                model.accumulate_gradient(self.data.row(i), &[self.c * d], &mut grad)?;
            }
        }
        Ok(grad)
    }
}
