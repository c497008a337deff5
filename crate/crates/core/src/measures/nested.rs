use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `KLD(p, q) = Σ_y p(y) ln(p(y) / q(y))` on the 2-simplex; fails when
/// `q` puts zero mass where `p` does not.
pub fn kld(p_true: [f64; 2], p_est: [f64; 2]) -> Result<f64> {
    let mut total = 0.0;
    for (&p, &q) in p_true.iter().zip(&p_est) {
        if p < 0.0 || q < 0.0 {
            return Err(Error::Domain {
                what: "probability",
                value: p.min(q),
            });
        }
        if p == 0.0 {
            continue;
        }
        if q == 0.0 {
            return Err(Error::Domain {
                what: "estimated prior (zero without flooring)",
                value: q,
            });
        }
        total += p * (p / q).ln();
    }
    Ok(total.max(0.0))
}

/// [`kld`] with every estimated component floored at `epsilon`.
pub fn kld_floored(p_true: [f64; 2], p_est: [f64; 2], epsilon: f64) -> Result<f64> {
    kld(p_true, [p_est[0].max(epsilon), p_est[1].max(epsilon)])
}

/// Negative KL divergence written as `Ψ(ζ1, ζ2) = ζ1 + ζ2` with
/// `ζ1 = p ln(p̂1 / p)`, `ζ2 = (1-p) ln(p̂0 / (1-p))`,
/// `p̂1 = p u + (1-p)(1-v)` and `p̂0 = p (1-u) + (1-p) v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NestedMeasure {
    pub p: f64,
    pub epsilon_log: f64,
}

/// Dual variables of the nested measure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NestedDuals {
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub gamma: [f64; 2],
}

impl NestedDuals {
    /// Weights `(γ1 α1 + γ2 β1, γ1 α2 + γ2 β2)` on `(P̂, N̂)`.
    pub fn reward_weights(&self) -> (f64, f64) {
        let [g1, g2] = self.gamma;
        (
            g1 * self.alpha[0] + g2 * self.beta[0],
            g1 * self.alpha[1] + g2 * self.beta[1],
        )
    }
}

impl NestedMeasure {
    /// The −KLD decomposition for true positive prior `p`.
    pub fn neg_kld(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::DegeneratePrior(p));
        }
        Ok(Self {
            p,
            epsilon_log: 1e-12,
        })
    }

    /// Estimated priors `(p̂1, p̂0)` implied by the rates, unfloored.
    pub fn estimated_priors(&self, u: f64, v: f64) -> (f64, f64) {
        let p = self.p;
        (p * u + (1.0 - p) * (1.0 - v), p * (1.0 - u) + (1.0 - p) * v)
    }

    fn floored(&self, x: f64, which: &str) -> f64 {
        if x < self.epsilon_log {
            log::debug!("{which} = {x} floored at {}", self.epsilon_log);
            self.epsilon_log
        } else {
            x
        }
    }

    pub fn zeta1(&self, u: f64, v: f64) -> f64 {
        let (p1, _) = self.estimated_priors(u, v);
        self.p * (self.floored(p1, "p̂1") / self.p).ln()
    }

    pub fn zeta2(&self, u: f64, v: f64) -> f64 {
        let q = 1.0 - self.p;
        let (_, p0) = self.estimated_priors(u, v);
        q * (self.floored(p0, "p̂0") / q).ln()
    }

    /// `Ψ(ζ1, ζ2) = ζ1 + ζ2 = -KLD(p, p̂)`.
    pub fn value(&self, u: f64, v: f64) -> f64 {
        self.outer(self.zeta1(u, v), self.zeta2(u, v))
    }

    pub fn outer(&self, z1: f64, z2: f64) -> f64 {
        z1 + z2
    }

    /// `∇ζ1 = p (p, -(1-p)) / p̂1`
    pub fn zeta1_supergradient(&self, u: f64, v: f64) -> [f64; 2] {
        let p = self.p;
        let (p1, _) = self.estimated_priors(u, v);
        let p1 = self.floored(p1, "p̂1");
        [p * p / p1, -p * (1.0 - p) / p1]
    }

    /// `∇ζ2 = (1-p) (-p, 1-p) / p̂0`
    pub fn zeta2_supergradient(&self, u: f64, v: f64) -> [f64; 2] {
        let p = self.p;
        let q = 1.0 - p;
        let (_, p0) = self.estimated_priors(u, v);
        let p0 = self.floored(p0, "p̂0");
        [-q * p / p0, q * q / p0]
    }

    /// The outer link is a plain sum, so its supergradient is `(1, 1)`.
    pub fn outer_supergradient(&self, _q: [f64; 2]) -> [f64; 2] {
        [1.0, 1.0]
    }

    /// `ζ1*(α)` at `α = ∇ζ1(r)`: by Fenchel-Young, `α·r - ζ1(r)`.
    pub fn zeta1_conjugate_at(&self, alpha: [f64; 2], r: [f64; 2]) -> f64 {
        alpha[0] * r[0] + alpha[1] * r[1] - self.zeta1(r[0], r[1])
    }

    /// `(sup ζ1, sup ζ2)` over `[0, 1]²`, reached when the estimated prior of
    /// the class is 1; the conjugates at zero are their negatives.
    pub fn zeta_sup(&self) -> [f64; 2] {
        let q = 1.0 - self.p;
        [-self.p * self.p.ln(), -q * q.ln()]
    }

    pub fn zeta2_conjugate_at(&self, beta: [f64; 2], r: [f64; 2]) -> f64 {
        beta[0] * r[0] + beta[1] * r[1] - self.zeta2(r[0], r[1])
    }
}

/// Inner dual steps at the rate estimate `r` (clamped into `[0, 1]²`) and
/// outer dual step at `q`.
pub fn nested_dual_steps(m: &NestedMeasure, r: [f64; 2], q: [f64; 2]) -> Result<NestedDuals> {
    if !(r.iter().chain(&q).all(|x| x.is_finite())) {
        return Err(Error::Numeric {
            iteration: 0,
            what: "nested dual statistics".into(),
        });
    }
    // r is a running mean of class-normalised rewards and may leave [0, 1]
    // on early skewed batches.
    let u = r[0].clamp(0.0, 1.0);
    let v = r[1].clamp(0.0, 1.0);
    Ok(NestedDuals {
        alpha: m.zeta1_supergradient(u, v),
        beta: m.zeta2_supergradient(u, v),
        gamma: m.outer_supergradient(q),
    })
}
