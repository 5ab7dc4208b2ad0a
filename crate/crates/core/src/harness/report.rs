use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{ExperimentConfig, TrialOutcome};
use crate::error::Result;
use crate::estimators::EstimatorKind;
use crate::measurement::TrialDumpWriter;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorReport {
    pub kind: EstimatorKind,
    pub rmse_3d: f64,
    pub rmse_z: f64,
    /// Errors of successful trials, in trial order.
    pub error_samples_3d: Vec<f64>,
    pub error_samples_z: Vec<f64>,
    /// Fraction of all trials with the correct floor.
    pub floor_accuracy: f64,
    pub failures: usize,
    /// Empirical CDF over all trials; failures sit at `+inf`.
    pub cdf_3d: Vec<(f64, f64)>,
    pub cdf_z: Vec<(f64, f64)>,
}

fn rmse(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    (samples.iter().map(|e| e * e).sum::<f64>() / samples.len() as f64).sqrt()
}

fn empirical_cdf(samples: &[f64], failures: usize) -> Vec<(f64, f64)> {
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.extend(std::iter::repeat_n(f64::INFINITY, failures));
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, e)| (e, (i + 1) as f64 / n))
        .collect()
}

fn quantile(cdf: &[(f64, f64)], q: f64) -> f64 {
    cdf.iter()
        .find(|(_, f)| *f >= q)
        .map(|(e, _)| *e)
        .unwrap_or(f64::NAN)
}

impl EstimatorReport {
    fn from_trials(kind: EstimatorKind, trials: &[TrialOutcome]) -> Self {
        let mut e3 = Vec::with_capacity(trials.len());
        let mut ez = Vec::with_capacity(trials.len());
        let mut hits = 0usize;
        let mut failures = 0usize;
        for t in trials {
            let Some(o) = t.outcomes.iter().find(|o| o.kind == kind) else {
                failures += 1;
                continue;
            };
            if o.estimate.is_some() {
                e3.push(o.error_3d);
                ez.push(o.error_z);
                hits += o.floor_hit as usize;
            } else {
                failures += 1;
            }
        }
        Self {
            kind,
            rmse_3d: rmse(&e3),
            rmse_z: rmse(&ez),
            floor_accuracy: hits as f64 / trials.len().max(1) as f64,
            failures,
            cdf_3d: empirical_cdf(&e3, failures),
            cdf_z: empirical_cdf(&ez, failures),
            error_samples_3d: e3,
            error_samples_z: ez,
        }
    }

    pub fn successes(&self) -> usize {
        self.error_samples_3d.len()
    }

    pub fn median_3d(&self) -> f64 {
        quantile(&self.cdf_3d, 0.5)
    }

    pub fn median_z(&self) -> f64 {
        quantile(&self.cdf_z, 0.5)
    }

    pub fn quantile_3d(&self, q: f64) -> f64 {
        quantile(&self.cdf_3d, q)
    }

    /// Fraction of all trials whose 3D error is below `threshold`.
    pub fn fraction_3d_below(&self, threshold: f64) -> f64 {
        let n = self.cdf_3d.len().max(1) as f64;
        self.error_samples_3d
            .iter()
            .filter(|&&e| e < threshold)
            .count() as f64
            / n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmseReport {
    pub n_trials: usize,
    pub estimators: Vec<EstimatorReport>,
    pub trials: Vec<TrialOutcome>,
}

impl RmseReport {
    pub fn from_trials(kinds: &[EstimatorKind], trials: Vec<TrialOutcome>) -> Self {
        let estimators = kinds
            .iter()
            .map(|&k| EstimatorReport::from_trials(k, &trials))
            .collect();
        Self {
            n_trials: trials.len(),
            estimators,
            trials,
        }
    }

    pub fn get(&self, kind: EstimatorKind) -> Option<&EstimatorReport> {
        self.estimators.iter().find(|e| e.kind == kind)
    }

    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "estimator",
            "rmse_3d_m",
            "rmse_z_m",
            "floor_accuracy",
            "failure_count",
        ])?;
        for e in &self.estimators {
            w.write_record([
                e.kind.name().to_string(),
                e.rmse_3d.to_string(),
                e.rmse_z.to_string(),
                e.floor_accuracy.to_string(),
                e.failures.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn write_cdf<W: Write>(cdf: &[(f64, f64)], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["error_m", "cumulative_fraction"])?;
    for (e, f) in cdf {
        w.write_record([e.to_string(), f.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `trial_id,estimator,floor_candidate,residual,iterations,converged`.
pub fn write_diagnostics_csv<W: Write>(report: &RmseReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "trial_id",
        "estimator",
        "floor_candidate",
        "residual",
        "iterations",
        "converged",
    ])?;
    for t in &report.trials {
        for o in &t.outcomes {
            let Some(est) = &o.estimate else { continue };
            if est.candidates.is_empty() {
                w.write_record([
                    t.trial_id.to_string(),
                    o.kind.name().to_string(),
                    est.floor.to_string(),
                    est.residual.to_string(),
                    est.iterations.to_string(),
                    est.converged.to_string(),
                ])?;
            }
            for c in &est.candidates {
                w.write_record([
                    t.trial_id.to_string(),
                    o.kind.name().to_string(),
                    c.floor.to_string(),
                    c.residual.to_string(),
                    c.iterations.to_string(),
                    c.converged.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_trial_dump_csv<W: Write>(report: &RmseReport, writer: W) -> Result<()> {
    let mut w = TrialDumpWriter::new(writer)?;
    for t in &report.trials {
        if let Some(rv) = &t.measurements {
            w.write(t.trial_id, rv)?;
        }
    }
    w.finish()
}

/// Writes `summary.csv`, `cdf_<estimator>_3d.csv`, `cdf_<estimator>_z.csv`
/// and the resolved `config.toml` into `output_dir`. Files are staged in a
/// temporary directory and moved into place once all of them are written.
pub fn export_report(
    report: &RmseReport,
    config: &ExperimentConfig,
    output_dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(output_dir)?;
    let staging = tempfile::Builder::new()
        .prefix(".export-")
        .tempdir_in(output_dir)?;

    let mut names = vec!["summary.csv".to_string()];
    report.write_summary_csv(fs::File::create(staging.path().join("summary.csv"))?)?;
    for e in &report.estimators {
        for (suffix, cdf) in [("3d", &e.cdf_3d), ("z", &e.cdf_z)] {
            let name = format!("cdf_{}_{}.csv", e.kind.name(), suffix);
            write_cdf(cdf, fs::File::create(staging.path().join(&name))?)?;
            names.push(name);
        }
    }
    fs::write(
        staging.path().join("config.toml"),
        config.to_scenario().to_toml_string()?,
    )?;
    names.push("config.toml".to_string());

    let mut written = Vec::with_capacity(names.len());
    for name in names {
        let dest = output_dir.join(&name);
        fs::rename(staging.path().join(&name), &dest)?;
        written.push(dest);
    }
    Ok(written)
}
