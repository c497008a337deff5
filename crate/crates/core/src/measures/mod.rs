//! Performance measures on (TPR, TNR) and their dual machinery.

mod fenchel;
mod link;
mod metric;
mod nested;
mod pseudolinear;

pub use fenchel::{fenchel_conjugate_value, fenchel_oracle, DualObjectiveTable};
pub use link::{ConcaveLink, LinkKind};
pub use metric::EvalMetric;
pub use nested::{kld, kld_floored, nested_dual_steps, NestedDuals, NestedMeasure};
pub use pseudolinear::{fbeta_coeffs, PseudolinearCoeffs};

use crate::error::{Error, Result};

/// Tolerance for rate arguments slightly outside `[0, 1]`.
pub(crate) const DOMAIN_SLACK: f64 = 1e-9;

/// Clamps `x` into `[0, 1]` when it is within [`DOMAIN_SLACK`] of it.
pub(crate) fn unit_interval(what: &'static str, x: f64) -> Result<f64> {
    if !(-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&x) {
        return Err(Error::Domain { what, value: x });
    }
    if !(0.0..=1.0).contains(&x) {
        log::warn!("{what} = {x} clamped into [0, 1]");
    }
    Ok(x.clamp(0.0, 1.0))
}
