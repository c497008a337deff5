use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::Result;

/// Per-feature affine map fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    /// Population standard deviation; zero marks a constant feature.
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn fit(data: &Dataset) -> Self {
        let d = data.dim();
        let n = data.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for i in 0..data.len() {
            mean.iter_mut().zip(data.row(i)).for_each(|(m, x)| *m += x);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for i in 0..data.len() {
            for (j, x) in data.row(i).iter().enumerate() {
                var[j] += (x - mean[j]).powi(2);
            }
        }
        let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
        Self { mean, std }
    }

    /// Maps each feature to `(x - mean) / std`, or to 0 when `std` is zero.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        let d = data.dim();
        let mut out = Vec::with_capacity(data.features().len());
        for i in 0..data.len() {
            for (j, x) in data.row(i).iter().enumerate() {
                out.push(if self.std[j] > 0.0 {
                    (x - self.mean[j]) / self.std[j]
                } else {
                    0.0
                });
            }
        }
        data.with_features(d, out)
    }
}

/// Fits on `train` only and applies the same map to both sets.
pub fn normalize(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset, NormStats)> {
    let stats = NormStats::fit(train);
    Ok((stats.apply(train)?, stats.apply(test)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewards::Label;

    fn ds(rows: &[[f64; 2]]) -> Dataset {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        Dataset::from_rows("n", &rows, vec![Label::Pos; rows.len()]).unwrap()
    }

    #[test]
    fn constant_feature_becomes_zero() {
        let tr = ds(&[[1.0, 3.0], [2.0, 3.0], [6.0, 3.0]]);
        let (a, b, _) = normalize(&tr, &ds(&[[0.0, 9.0]])).unwrap();
        assert!((0..3).all(|i| a.row(i)[1] == 0.0));
        assert_eq!(b.row(0)[1], 0.0);
        let m: f64 = (0..3).map(|i| a.row(i)[0]).sum::<f64>() / 3.0;
        assert!(m.abs() < 1e-12);
    }

    #[test]
    fn not_idempotent_on_test_side() {
        let tr = ds(&[[1.0, 0.0], [3.0, 1.0]]);
        let te = ds(&[[5.0, 2.0]]);
        let stats = NormStats::fit(&tr);
        let once = stats.apply(&te).unwrap();
        let twice = stats.apply(&once).unwrap();
        assert_ne!(once, twice);
    }
}
