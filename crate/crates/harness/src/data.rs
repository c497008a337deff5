use std::path::{Path, PathBuf};

use nondecomp_core::data::{
    gen_two_gaussians, normalize, read_libsvm_file, split, Dataset, LibsvmOptions,
};

use crate::config::{DataSource, ExperimentConfig};
use crate::{HarnessError, Result};

pub const DATA_DIR_VAR: &str = "NONDECOMP_DATA_DIR";

/// Training and held-out data of one experiment.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
}

/// `path` as given if it exists, else under `$NONDECOMP_DATA_DIR`.
pub fn resolve_path(path: &Path) -> Result<PathBuf> {
    if path.exists() {
        return Ok(path.to_path_buf());
    }
    if path.is_relative() {
        if let Some(dir) = std::env::var_os(DATA_DIR_VAR) {
            let alt = Path::new(&dir).join(path);
            if alt.exists() {
                return Ok(alt);
            }
        }
    }
    Err(HarnessError::Usage(format!(
        "dataset {} not found (also looked under ${DATA_DIR_VAR})",
        path.display()
    )))
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let (train, test) = match &cfg.data {
        DataSource::Synthetic(spec) => {
            let all = gen_two_gaussians(spec)?;
            split(&all, cfg.train_fraction, cfg.seed, cfg.stratified_split)?
        }
        DataSource::Libsvm {
            path,
            test_path,
            dim,
            positive_class,
        } => {
            let read = |p: &Path, dim: Option<usize>| {
                let opts = LibsvmOptions {
                    expected_dim: dim,
                    positive_class: positive_class.clone(),
                };
                read_libsvm_file(&resolve_path(p)?, &opts).map_err(HarnessError::from)
            };
            let train = read(path, *dim)?;
            match test_path {
                Some(tp) => {
                    let test = read(tp, *dim)?;
                    // inferred dimensions differ when trailing features are
                    // all zero in one file
                    match train.dim().cmp(&test.dim()) {
                        std::cmp::Ordering::Less => (read(path, Some(test.dim()))?, test),
                        std::cmp::Ordering::Greater => {
                            let d = train.dim();
                            (train, read(tp, Some(d))?)
                        }
                        std::cmp::Ordering::Equal => (train, test),
                    }
                }
                None => split(&train, cfg.train_fraction, cfg.seed, cfg.stratified_split)?,
            }
        }
    };
    let (train, test) = if cfg.normalize {
        let (tr, te, _) = normalize(&train, &test)?;
        (tr, te)
    } else {
        (train, test)
    };
    if !train.has_both_classes() {
        return Err(HarnessError::Usage(format!(
            "training data {} lacks one of the classes",
            train.name()
        )));
    }
    Ok(Prepared { train, test })
}
