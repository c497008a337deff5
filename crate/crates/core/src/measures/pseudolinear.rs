use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ratio of two affine functions of the class rates,
/// `(a0 + a1 u + a2 v) / (b0 + b1 u + b2 v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudolinearCoeffs {
    pub a: [f64; 3],
    pub b: [f64; 3],
    /// Minimum of the denominator over `[0, 1]²`.
    pub lower_bound_m: f64,
    /// Maximum of the numerator over `[0, 1]²`.
    pub upper_bound_m: f64,
}

/// Relative slack when comparing a denominator with `m`, so that the exact
/// minimiser is not rejected over a rounding error.
const BOUND_SLACK: f64 = 1e-12;

impl PseudolinearCoeffs {
    /// Computes `m` and `M` from the corners of the unit square; `m` must be
    /// positive.
    pub fn new(a: [f64; 3], b: [f64; 3]) -> Result<Self> {
        let m = b[0] + b[1].min(0.0) + b[2].min(0.0);
        let big_m = a[0] + a[1].max(0.0) + a[2].max(0.0);
        if !(m > 0.0) {
            return Err(Error::Degeneracy {
                denominator: m,
                bound: 0.0,
            });
        }
        Ok(Self {
            a,
            b,
            lower_bound_m: m,
            upper_bound_m: big_m,
        })
    }

    /// `κ = 1 + M / m`
    pub fn kappa(&self) -> f64 {
        1.0 + self.upper_bound_m / self.lower_bound_m
    }

    pub fn numerator(&self, u: f64, v: f64) -> f64 {
        self.a[0] + self.a[1] * u + self.a[2] * v
    }

    pub fn denominator(&self, u: f64, v: f64) -> f64 {
        self.b[0] + self.b[1] * u + self.b[2] * v
    }

    /// Measure value; a denominator below `m` is a degeneracy error.
    pub fn value(&self, u: f64, v: f64) -> Result<f64> {
        let den = self.denominator(u, v);
        if !(den >= self.lower_bound_m * (1.0 - BOUND_SLACK)) {
            return Err(Error::Degeneracy {
                denominator: den,
                bound: self.lower_bound_m,
            });
        }
        Ok(self.numerator(u, v) / den)
    }

    /// Valuation `V = P_a - level * P_b`, linear in `(u, v)`.
    pub fn valuation(&self, u: f64, v: f64, level: f64) -> f64 {
        let [c0, c1, c2] = self.valuation_weights(level);
        c0 + c1 * u + c2 * v
    }

    /// `(a0 - level b0, a1 - level b1, a2 - level b2)`: the constant and the
    /// weights on the two rates of the cost-weighted problem at `level`.
    pub fn valuation_weights(&self, level: f64) -> [f64; 3] {
        [
            self.a[0] - level * self.b[0],
            self.a[1] - level * self.b[1],
            self.a[2] - level * self.b[2],
        ]
    }
}

/// F-beta in rate form for a positive prior `p`:
/// `a = (0, 1 + β², 0)`, `b = (β² + (1-p)/p, 1, -(1-p)/p)`.
pub fn fbeta_coeffs(beta: f64, p: f64) -> Result<PseudolinearCoeffs> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::DegeneratePrior(p));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Config(format!("beta must be positive, got {beta}")));
    }
    let b2 = beta * beta;
    let odds = (1.0 - p) / p;
    // m = β² (at u = 0, v = 1), M = 1 + β²
    PseudolinearCoeffs::new([0.0, 1.0 + b2, 0.0], [b2 + odds, 1.0, -odds])
}
