use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nondecomp_core::data::{drift_resample, DriftSpec};
use nondecomp_core::measures::kld_floored;
use nondecomp_core::optimizers::TraceRecord;
use serde::Serialize;

use crate::artifacts::{timing_csv, trace_csv, write_atomic, RunSummary};
use crate::config::{ExperimentConfig, MeasureId};
use crate::data::{prepare, Prepared};
use crate::plot::{LineChart, Series};
use crate::train::{predicted_prior, train, Trained};
use crate::{HarnessError, Result};

/// Horizontal axis of convergence plots.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum XAxis {
    /// Minibatch iterations
    #[default]
    Iters,
    /// Training samples consumed
    Samples,
}

impl XAxis {
    fn of(self, r: &TraceRecord) -> f64 {
        match self {
            XAxis::Iters => r.iter as f64,
            XAxis::Samples => r.samples as f64,
        }
    }

    fn label(self) -> &'static str {
        match self {
            XAxis::Iters => "iter",
            XAxis::Samples => "samples",
        }
    }
}

/// Result of one `run`.
#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub summary: RunSummary,
    pub trained: Trained,
}

fn run_chart(cfg: &ExperimentConfig, records: &[TraceRecord], x: XAxis, title: String) -> LineChart {
    let pts = |f: fn(&TraceRecord) -> Option<f64>| {
        records
            .iter()
            .filter_map(|r| f(r).map(|v| (x.of(r), v)))
            .collect::<Vec<_>>()
    };
    LineChart {
        title,
        x_label: x.label().into(),
        y_label: cfg.measure.to_string(),
        series: vec![
            Series::new("test", pts(|r| r.test_metric)),
            Series::new("train", pts(|r| r.train_metric)).dashed(),
        ],
    }
}

fn write_run_files(
    cfg: &ExperimentConfig,
    dir: &Path,
    trace: &nondecomp_core::optimizers::TrainTrace,
    summary: &RunSummary,
    x: XAxis,
) -> Result<()> {
    write_atomic(&dir.join("trace.csv"), &trace_csv(trace, cfg.inline_timing)?)?;
    write_atomic(&dir.join("timing.csv"), &timing_csv(trace))?;
    write_atomic(&dir.join("summary.json"), &summary.to_json())?;
    let title = format!("{} on {}", trace.algorithm, cfg.measure);
    write_atomic(&dir.join("plot.svg"), run_chart(cfg, &trace.records, x, title).render().as_bytes())?;
    Ok(())
}

/// Trains on already prepared data and writes the run artifacts to `dir`.
pub fn run_prepared(cfg: &ExperimentConfig, data: &Prepared, dir: &Path, x: XAxis) -> Result<RunOutcome> {
    let metric = cfg.measure.metric();
    let name = cfg.algo.name();
    match train(cfg, data) {
        Ok(trained) => {
            let t = &trained.trace;
            let summary = RunSummary::from_records(
                &t.records,
                &metric,
                name,
                "ok",
                t.pretrain_iterations,
                cfg,
                trained.plugin,
            );
            write_run_files(cfg, dir, t, &summary, x)?;
            log::info!(
                "{name}: {} rows, final test {} = {:?}",
                summary.rows,
                cfg.measure,
                summary.final_test_metric
            );
            Ok(RunOutcome {
                dir: dir.to_path_buf(),
                summary,
                trained,
            })
        }
        Err(HarnessError::Diverged { message, partial }) => {
            let summary = RunSummary::from_records(
                &partial.records,
                &metric,
                name,
                "diverged",
                partial.pretrain_iterations,
                cfg,
                None,
            );
            write_run_files(cfg, dir, &partial, &summary, x)?;
            log::error!("{name} diverged; partial trace in {}", dir.display());
            Err(HarnessError::Diverged { message, partial })
        }
        Err(e) => Err(e),
    }
}

/// Full pipeline for one configuration: `trace.csv`, `timing.csv`,
/// `summary.json` and `plot.svg` in `cfg.out`.
pub fn run(cfg: &ExperimentConfig, x: XAxis) -> Result<RunOutcome> {
    let data = prepare(cfg)?;
    run_prepared(cfg, &data, &cfg.out, x)
}

/// Distinct, filesystem-safe labels for a list of runs.
fn labels(cfgs: &[ExperimentConfig]) -> Vec<String> {
    let base: Vec<String> = cfgs
        .iter()
        .map(|c| {
            let m = c.measure.to_string().replace(':', "_");
            if cfgs.iter().all(|o| o.measure == c.measure) {
                c.algo.name().to_string()
            } else {
                format!("{}_{m}", c.algo.name())
            }
        })
        .collect();
    base.iter()
        .enumerate()
        .map(|(i, b)| {
            let dup = base.iter().filter(|o| *o == b).count() > 1;
            if dup {
                let k = base[..i].iter().filter(|o| *o == b).count() + 1;
                format!("{b}-{k}")
            } else {
                b.clone()
            }
        })
        .collect()
}

fn shared_data(cfgs: &[ExperimentConfig]) -> Result<()> {
    let first = cfgs
        .first()
        .ok_or_else(|| HarnessError::Usage("no configurations given".into()))?;
    if let Some(c) = cfgs.iter().find(|c| c.data_key() != first.data_key()) {
        return Err(HarnessError::Usage(format!(
            "{} and {} do not share the dataset, split and seed",
            first.algo.name(),
            c.algo.name()
        )));
    }
    Ok(())
}

/// Trains every configuration on the shared data, one thread each.
fn run_all(cfgs: &[ExperimentConfig], data: &Prepared, out: &Path, x: XAxis) -> Result<Vec<(String, RunOutcome)>> {
    let names = labels(cfgs);
    let results: Vec<Result<RunOutcome>> = std::thread::scope(|s| {
        let handles: Vec<_> = cfgs
            .iter()
            .zip(&names)
            .map(|(cfg, name)| {
                let dir = out.join(name);
                s.spawn(move || run_prepared(cfg, data, &dir, x))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("run thread panicked"))
            .collect()
    });
    names
        .into_iter()
        .zip(results)
        .map(|(n, r)| r.map(|o| (n, o)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct CompareOptions {
    pub out: PathBuf,
    pub x: XAxis,
}

/// Aligned series of the test metric, keyed by x value.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareTable {
    pub x: XAxis,
    pub names: Vec<String>,
    pub rows: Vec<(f64, Vec<Option<f64>>)>,
}

impl CompareTable {
    pub fn to_csv(&self) -> Vec<u8> {
        let mut s = String::from(self.x.label());
        for n in &self.names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for (x, vals) in &self.rows {
            s.push_str(&x.to_string());
            for v in vals {
                s.push(',');
                if let Some(v) = v {
                    s.push_str(&v.to_string());
                }
            }
            s.push('\n');
        }
        s.into_bytes()
    }
}

/// Runs every configuration on one dataset and writes a combined
/// `plot.svg` (one polyline per run) and `table.csv`.
pub fn compare(cfgs: &[ExperimentConfig], opts: &CompareOptions) -> Result<CompareTable> {
    shared_data(cfgs)?;
    let cadence = cfgs[0].train.eval_every;
    if let Some(c) = cfgs.iter().find(|c| c.train.eval_every != cadence) {
        return Err(HarnessError::Usage(format!(
            "eval cadence mismatch: {} records every {} iterations, {} every {cadence}",
            c.algo.name(),
            c.train.eval_every,
            cfgs[0].algo.name()
        )));
    }
    let data = prepare(&cfgs[0])?;
    let runs = run_all(cfgs, &data, &opts.out, opts.x)?;

    let names: Vec<String> = runs.iter().map(|(n, _)| n.clone()).collect();
    let mut grid: BTreeMap<u64, Vec<Option<f64>>> = BTreeMap::new();
    for (k, (_, o)) in runs.iter().enumerate() {
        for r in &o.trained.trace.records {
            let key = opts.x.of(r).to_bits();
            grid.entry(key).or_insert_with(|| vec![None; runs.len()])[k] = r.test_metric;
        }
    }
    let mut rows: Vec<(f64, Vec<Option<f64>>)> =
        grid.into_iter().map(|(k, v)| (f64::from_bits(k), v)).collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let table = CompareTable {
        x: opts.x,
        names: names.clone(),
        rows,
    };

    let chart = LineChart {
        title: format!("test {} by algorithm", cfgs[0].measure),
        x_label: opts.x.label().into(),
        y_label: cfgs[0].measure.to_string(),
        series: runs
            .iter()
            .map(|(n, o)| {
                Series::new(
                    n.clone(),
                    o.trained
                        .trace
                        .records
                        .iter()
                        .filter_map(|r| r.test_metric.map(|v| (opts.x.of(r), v)))
                        .collect(),
                )
            })
            .collect(),
    };
    write_atomic(&opts.out.join("table.csv"), &table.to_csv())?;
    write_atomic(&opts.out.join("plot.svg"), chart.render().as_bytes())?;
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftRow {
    pub model: String,
    pub target_prior: f64,
    pub true_prior: f64,
    pub estimated_prior: f64,
    pub kld: f64,
}

/// KLD of the predicted against the true class prior on `test` resampled to
/// each prior in the grid.
pub fn drift_rows(name: &str, trained: &Trained, data: &Prepared, grid: &[f64], seed: u64) -> Result<Vec<DriftRow>> {
    grid.iter()
        .map(|&p| {
            let shifted = drift_resample(
                &data.test,
                &DriftSpec {
                    target_positive_fraction: p,
                    seed,
                },
            )?;
            let t = shifted.positive_fraction();
            let e = predicted_prior(trained, &shifted)?;
            let kld = kld_floored([t, 1.0 - t], [e, 1.0 - e], 1e-12)?;
            Ok(DriftRow {
                model: name.to_string(),
                target_prior: p,
                true_prior: t,
                estimated_prior: e,
                kld,
            })
        })
        .collect()
}

pub fn drift_csv(rows: &[DriftRow]) -> Vec<u8> {
    let mut s = String::from("model,target_prior,true_prior,estimated_prior,kld\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.model, r.target_prior, r.true_prior, r.estimated_prior, r.kld
        ));
    }
    s.into_bytes()
}

/// Trains each configuration (all on the kld measure and the same data),
/// then writes `drift.csv` and `drift.svg` to `out`.
pub fn drift_study(cfgs: &[ExperimentConfig], out: &Path) -> Result<Vec<DriftRow>> {
    shared_data(cfgs)?;
    if let Some(c) = cfgs.iter().find(|c| c.measure != MeasureId::Kld) {
        return Err(HarnessError::Usage(format!(
            "the drift study needs measure kld, {} was configured with {}",
            c.algo.name(),
            c.measure
        )));
    }
    let grid = &cfgs[0].drift_grid;
    if cfgs.iter().any(|c| &c.drift_grid != grid || c.drift_seed != cfgs[0].drift_seed) {
        return Err(HarnessError::Usage("configurations disagree on the drift grid or seed".into()));
    }
    let data = prepare(&cfgs[0])?;
    let runs = run_all(cfgs, &data, out, XAxis::Iters)?;
    let mut rows = Vec::new();
    for (name, o) in &runs {
        rows.extend(drift_rows(name, &o.trained, &data, grid, cfgs[0].drift_seed)?);
    }
    let chart = LineChart {
        title: "quantification under prior drift".into(),
        x_label: "test positive prior".into(),
        y_label: "KLD".into(),
        series: runs
            .iter()
            .map(|(n, _)| {
                Series::new(
                    n.clone(),
                    rows.iter()
                        .filter(|r| &r.model == n)
                        .map(|r| (r.target_prior, r.kld))
                        .collect(),
                )
            })
            .collect(),
    };
    write_atomic(&out.join("drift.csv"), &drift_csv(&rows))?;
    write_atomic(&out.join("drift.svg"), chart.render().as_bytes())?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigLayer;

    fn cfg(text: &str) -> ExperimentConfig {
        ConfigLayer::from_toml(text).unwrap().resolve().unwrap()
    }

    #[test]
    fn labels_are_unique() {
        let a = cfg("seed = 1\nalgo = \"ce\"\nmeasure = \"f1\"\n");
        let b = cfg("seed = 1\nalgo = \"damp\"\nmeasure = \"f1\"\n");
        assert_eq!(labels(&[a.clone(), b.clone(), a.clone()]), vec!["ce-1", "damp", "ce-2"]);
        let c = cfg("seed = 1\nalgo = \"ce\"\nmeasure = \"kld\"\n");
        assert_eq!(labels(&[a, c]), vec!["ce_f1", "ce_kld"]);
    }

    #[test]
    fn compare_usage_errors() {
        let opts = CompareOptions {
            out: PathBuf::from("/nonexistent"),
            x: XAxis::Iters,
        };
        assert_eq!(compare(&[], &opts).unwrap_err().exit_code(), 2);
        let a = cfg("seed = 1\nalgo = \"ce\"\nmeasure = \"f1\"\neval_every = 10\n");
        let b = cfg("seed = 1\nalgo = \"damp\"\nmeasure = \"f1\"\neval_every = 5\n");
        let e = compare(&[a.clone(), b], &opts).unwrap_err();
        assert!(e.to_string().contains("cadence"), "{e}");
        let c = cfg("seed = 2\nalgo = \"damp\"\nmeasure = \"f1\"\n");
        assert_eq!(compare(&[a, c], &opts).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn drift_needs_kld() {
        let a = cfg("seed = 1\nalgo = \"ce\"\nmeasure = \"f1\"\n");
        assert_eq!(drift_study(&[a], Path::new("/nonexistent")).unwrap_err().exit_code(), 2);
    }
}
