use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Seeded train/test split. Stratified splits take `round(n_c * fraction)`
/// points of each class into the training part.
pub fn split(
    data: &Dataset,
    train_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train_idx, mut test_idx) = (Vec::new(), Vec::new());
    if stratified {
        for mut class in [data.positive_indices(), data.negative_indices()] {
            class.shuffle(&mut rng);
            let k = (class.len() as f64 * train_fraction).round() as usize;
            train_idx.extend_from_slice(&class[..k]);
            test_idx.extend_from_slice(&class[k..]);
        }
        train_idx.shuffle(&mut rng);
        test_idx.shuffle(&mut rng);
    } else {
        let mut all: Vec<usize> = (0..data.len()).collect();
        all.shuffle(&mut rng);
        let k = (data.len() as f64 * train_fraction).round() as usize;
        train_idx = all[..k].to_vec();
        test_idx = all[k..].to_vec();
    }
    let train = data.subset(&train_idx, format!("{}/train", data.name()));
    let test = data.subset(&test_idx, format!("{}/test", data.name()));
    for part in [&train, &test] {
        if !part.has_both_classes() {
            log::warn!("split {} lost a class ({} points)", part.name(), part.len());
        }
    }
    Ok((train, test))
}

/// Endless sequence of minibatches of point indices.
///
/// Each epoch draws a fresh seeded permutation and cuts it into
/// `floor(n / b)` consecutive batches; the short remainder is dropped. In
/// stratified mode batch `k` receives `round((k+1) b p) - round(k b p)`
/// positives from a class-wise permutation, so every batch holds `b p ± 1`
/// positives.
#[derive(Debug, Clone)]
pub struct MinibatchStream {
    batch: usize,
    rng: ChaCha8Rng,
    mode: Mode,
    queue: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
enum Mode {
    Plain(Vec<usize>),
    Stratified { pos: Vec<usize>, neg: Vec<usize> },
}

impl MinibatchStream {
    pub fn new(data: &Dataset, batch: usize, seed: u64, stratified: bool) -> Result<Self> {
        if batch == 0 || batch > data.len() {
            return Err(Error::Config(format!(
                "batch size {batch} must lie in 1..={}",
                data.len()
            )));
        }
        let mode = if stratified {
            Mode::Stratified {
                pos: data.positive_indices(),
                neg: data.negative_indices(),
            }
        } else {
            Mode::Plain((0..data.len()).collect())
        };
        Ok(Self {
            batch,
            rng: ChaCha8Rng::seed_from_u64(seed),
            mode,
            queue: Vec::new(),
        })
    }

    pub fn batches_per_epoch(&self) -> usize {
        let n = match &self.mode {
            Mode::Plain(all) => all.len(),
            Mode::Stratified { pos, neg } => pos.len() + neg.len(),
        };
        n / self.batch
    }

    fn refill(&mut self) {
        let b = self.batch;
        let per_epoch = self.batches_per_epoch();
        let mut epoch = Vec::with_capacity(per_epoch);
        match &mut self.mode {
            Mode::Plain(all) => {
                all.shuffle(&mut self.rng);
                for chunk in all.chunks_exact(b) {
                    epoch.push(chunk.to_vec());
                }
            }
            Mode::Stratified { pos, neg } => {
                pos.shuffle(&mut self.rng);
                neg.shuffle(&mut self.rng);
                let n = pos.len() + neg.len();
                let rate = pos.len() as f64 / n as f64;
                let (mut ip, mut ineg) = (0usize, 0usize);
                for k in 0..per_epoch {
                    let want = ((k + 1) as f64 * b as f64 * rate).round() as usize
                        - (k as f64 * b as f64 * rate).round() as usize;
                    let want = want.min(pos.len() - ip).max(b.saturating_sub(neg.len() - ineg));
                    let mut chunk = Vec::with_capacity(b);
                    chunk.extend_from_slice(&pos[ip..ip + want]);
                    chunk.extend_from_slice(&neg[ineg..ineg + (b - want)]);
                    ip += want;
                    ineg += b - want;
                    chunk.shuffle(&mut self.rng);
                    epoch.push(chunk);
                }
            }
        }
        epoch.reverse();
        self.queue = epoch;
    }
}

impl Iterator for MinibatchStream {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.queue.is_empty() {
            self.refill();
        }
        self.queue.pop()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewards::Label;

    fn toy(n: usize, pos: usize) -> Dataset {
        let labels = (0..n)
            .map(|i| if i < pos { Label::Pos } else { Label::Neg })
            .collect();
        Dataset::new("toy", 1, (0..n).map(|i| i as f64).collect(), labels).unwrap()
    }

    #[test]
    fn split_sizes() {
        let (tr, te) = split(&toy(10, 5), 0.8, 1, false).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        let (tr, te) = split(&toy(100, 30), 0.5, 1, true).unwrap();
        assert_eq!((tr.num_positives(), te.num_positives()), (15, 15));
        assert_eq!((tr.len(), te.len()), (50, 50));
    }

    #[test]
    fn split_is_a_partition() {
        let ds = toy(37, 9);
        for strat in [false, true] {
            let (tr, te) = split(&ds, 0.7, 3, strat).unwrap();
            let mut all: Vec<f64> = tr.features().iter().chain(te.features()).copied().collect();
            all.sort_by(f64::total_cmp);
            assert_eq!(all, ds.features());
        }
    }

    #[test]
    fn batch_counts() {
        let ds = toy(100, 10);
        let s = MinibatchStream::new(&ds, 32, 0, false).unwrap();
        assert_eq!(s.batches_per_epoch(), 3);
        let batches: Vec<_> = s.take(3).collect();
        let mut seen: Vec<usize> = batches.concat();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 96);
        assert!(MinibatchStream::new(&ds, 101, 0, false).is_err());
    }

    #[test]
    fn stratified_batches_hold_expected_positives() {
        let ds = toy(200, 20);
        let s = MinibatchStream::new(&ds, 20, 4, true).unwrap();
        for batch in s.take(40) {
            let pos = batch.iter().filter(|&&i| ds.label(i).is_pos()).count();
            assert!((1..=3).contains(&pos), "{pos}");
            assert_eq!(batch.len(), 20);
        }
    }

    #[test]
    fn epochs_differ_but_replay() {
        let ds = toy(50, 10);
        let a: Vec<_> = MinibatchStream::new(&ds, 50, 9, false).unwrap().take(2).collect();
        let b: Vec<_> = MinibatchStream::new(&ds, 50, 9, false).unwrap().take(2).collect();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
    }
}
