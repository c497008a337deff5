use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Target class prior for a resampled test set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub target_positive_fraction: f64,
    pub seed: u64,
}

/// Resamples `test` with replacement to `round(n * p')` positives and
/// `n - round(n * p')` negatives; rows within each class keep their
/// distribution.
pub fn drift_resample(test: &Dataset, spec: &DriftSpec) -> Result<Dataset> {
    let p = spec.target_positive_fraction;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Config(format!("drift prior {p} outside (0, 1)")));
    }
    if !test.has_both_classes() {
        return Err(Error::UndefinedRate(if test.num_positives() == 0 {
            "positive"
        } else {
            "negative"
        }));
    }
    let n = test.len();
    let want_pos = (n as f64 * p).round() as usize;
    let pos = test.positive_indices();
    let neg = test.negative_indices();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut picked = Vec::with_capacity(n);
    for k in 0..n {
        let pool = if k < want_pos { &pos } else { &neg };
        picked.push(pool[rng.random_range(0..pool.len())]);
    }
    picked.shuffle(&mut rng);
    Ok(test.subset(&picked, format!("{}/drift{p}", test.name())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewards::Label;

    fn half() -> Dataset {
        let labels = (0..100)
            .map(|i| if i % 2 == 0 { Label::Pos } else { Label::Neg })
            .collect();
        Dataset::new("h", 1, (0..100).map(|i| i as f64).collect(), labels).unwrap()
    }

    #[test]
    fn hits_requested_prior() {
        let d = drift_resample(&half(), &DriftSpec { target_positive_fraction: 0.9, seed: 1 }).unwrap();
        assert_eq!(d.len(), 100);
        assert_eq!(d.num_positives(), 90);
        // rows come from the right class
        for i in 0..d.len() {
            assert_eq!((d.row(i)[0] as usize).is_multiple_of(2), d.label(i).is_pos());
        }
    }

    #[test]
    fn same_prior_is_a_bootstrap() {
        let d = drift_resample(&half(), &DriftSpec { target_positive_fraction: 0.5, seed: 2 }).unwrap();
        assert_eq!(d.num_positives(), 50);
    }

    #[test]
    fn needs_both_classes() {
        let one = Dataset::new("o", 1, vec![0.0; 3], vec![Label::Neg; 3]).unwrap();
        assert!(drift_resample(&one, &DriftSpec { target_positive_fraction: 0.5, seed: 0 }).is_err());
    }
}
