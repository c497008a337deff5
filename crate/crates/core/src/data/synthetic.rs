use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rewards::Label;

/// Two isotropic Gaussian classes centred at `±separation / sqrt(d) * 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub positive_fraction: f64,
    /// Distance from each class mean to the origin.
    pub separation: f64,
    /// Per-class standard deviation.
    pub sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn num_positives(&self) -> usize {
        (self.n as f64 * self.positive_fraction).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::DegenerateSpec(format!("n = {} < 10", self.n)));
        }
        if self.d == 0 {
            return Err(Error::DegenerateSpec("d = 0".into()));
        }
        if !(self.positive_fraction > 0.0 && self.positive_fraction < 1.0) {
            return Err(Error::DegenerateSpec(format!(
                "positive fraction {} outside (0, 1)",
                self.positive_fraction
            )));
        }
        let pos = self.num_positives();
        if pos == 0 || pos == self.n {
            return Err(Error::DegenerateSpec(format!(
                "round(n * p) = {pos} leaves a class empty"
            )));
        }
        if !(self.sigma > 0.0) || !self.separation.is_finite() {
            return Err(Error::DegenerateSpec("sigma must be positive".into()));
        }
        Ok(())
    }
}

/// Draws exactly `round(n * p)` positives; rows are shuffled.
pub fn gen_two_gaussians(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.sigma).map_err(|e| Error::DegenerateSpec(e.to_string()))?;
    let shift = spec.separation / (spec.d as f64).sqrt();
    let pos = spec.num_positives();
    let mut labels: Vec<Label> = (0..spec.n)
        .map(|i| if i < pos { Label::Pos } else { Label::Neg })
        .collect();
    labels.shuffle(&mut rng);
    let mut features = Vec::with_capacity(spec.n * spec.d);
    for y in &labels {
        let mu = y.sign() * shift;
        for _ in 0..spec.d {
            features.push(mu + noise.sample(&mut rng));
        }
    }
    Dataset::new(format!("two_gaussians_p{}", spec.positive_fraction), spec.d, features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, p: f64, sep: f64) -> SyntheticSpec {
        SyntheticSpec {
            n,
            d: 3,
            positive_fraction: p,
            separation: sep,
            sigma: 1.0,
            seed: 5,
        }
    }

    #[test]
    fn exact_positive_count() {
        let ds = gen_two_gaussians(&spec(1000, 0.05, 2.0)).unwrap();
        assert_eq!(ds.num_positives(), 50);
        assert_eq!(ds.len(), 1000);
    }

    #[test]
    fn deterministic_under_seed() {
        let a = gen_two_gaussians(&spec(200, 0.3, 1.0)).unwrap();
        let b = gen_two_gaussians(&spec(200, 0.3, 1.0)).unwrap();
        assert_eq!(a, b);
        let c = gen_two_gaussians(&SyntheticSpec { seed: 6, ..spec(200, 0.3, 1.0) }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_specs() {
        assert!(gen_two_gaussians(&spec(10, 0.01, 1.0)).is_err());
        assert!(gen_two_gaussians(&spec(5, 0.5, 1.0)).is_err());
        assert!(gen_two_gaussians(&spec(100, 1.0, 1.0)).is_err());
    }

    #[test]
    fn well_separated_classes_are_linearly_separable() {
        // Projection onto 1/sqrt(d) puts the classes at ±4 with unit noise;
        // the Bayes error at threshold 0 is Phi(-4) ≈ 3.2e-5.
        let s = SyntheticSpec {
            n: 20_000,
            positive_fraction: 0.5,
            separation: 4.0,
            ..spec(0, 0.5, 0.0)
        };
        let ds = gen_two_gaussians(&s).unwrap();
        let correct = (0..ds.len())
            .filter(|&i| {
                let proj: f64 = ds.row(i).iter().sum::<f64>() / (s.d as f64).sqrt();
                (proj > 0.0) == ds.label(i).is_pos()
            })
            .count();
        assert!(correct as f64 / ds.len() as f64 > 0.99);
    }
}
