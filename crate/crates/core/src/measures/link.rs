use serde::{Deserialize, Serialize};

use super::unit_interval;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    /// `min(P, N)`
    MinTprTnr,
    /// `1 - sqrt(((1 - P)^2 + (1 - N)^2) / 2)`
    QMean,
}

/// Concave link function `Ψ(P, N)` of the two class rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcaveLink {
    pub kind: LinkKind,
    /// Floor on `sqrt(S / 2)` in the Q-mean supergradient.
    pub epsilon_clamp: f64,
}

impl ConcaveLink {
    pub fn new(kind: LinkKind) -> Self {
        Self {
            kind,
            epsilon_clamp: 1e-8,
        }
    }

    pub fn min_tpr_tnr() -> Self {
        Self::new(LinkKind::MinTprTnr)
    }

    pub fn q_mean() -> Self {
        Self::new(LinkKind::QMean)
    }

    /// `Ψ(u, v)`; arguments within 1e-9 of `[0, 1]` are clamped, anything
    /// further out is a domain error.
    pub fn value(&self, u: f64, v: f64) -> Result<f64> {
        let u = unit_interval("TPR argument", u)?;
        let v = unit_interval("TNR argument", v)?;
        Ok(self.value_unchecked(u, v))
    }

    pub(crate) fn value_unchecked(&self, u: f64, v: f64) -> f64 {
        match self.kind {
            LinkKind::MinTprTnr => u.min(v),
            LinkKind::QMean => {
                1.0 - (((1.0 - u).powi(2) + (1.0 - v).powi(2)) / 2.0).sqrt()
            }
        }
    }

    /// Closed-form dual step: the minimiser of `α u + β v - Ψ*(α, β)` is a
    /// supergradient of `Ψ` at `(u, v)`.
    ///
    /// Min picks the smaller rate (`(½, ½)` on a tie). Q-mean returns
    /// `(1 - u, 1 - v) / (2 sqrt(S / 2))` with `S = (1-u)² + (1-v)²`, the root
    /// floored at `epsilon_clamp`.
    pub fn dual_step(&self, u: f64, v: f64) -> Result<(f64, f64)> {
        let u = unit_interval("TPR argument", u)?;
        let v = unit_interval("TNR argument", v)?;
        Ok(match self.kind {
            LinkKind::MinTprTnr => {
                if u < v {
                    (1.0, 0.0)
                } else if u > v {
                    (0.0, 1.0)
                } else {
                    (0.5, 0.5)
                }
            }
            LinkKind::QMean => {
                let s = (1.0 - u).powi(2) + (1.0 - v).powi(2);
                let root = (s / 2.0).sqrt().max(self.epsilon_clamp);
                ((1.0 - u) / (2.0 * root), (1.0 - v) / (2.0 * root))
            }
        })
    }
}
