//! Monte-Carlo evaluation: sample a node, simulate ranges, run every enabled
//! estimator on the same range vector and score the results.

mod report;

pub use report::{
    export_report, write_diagnostics_csv, write_trial_dump_csv, EstimatorReport, RmseReport,
};

use std::path::PathBuf;

use rayon::prelude::*;

use crate::bias::{build_bias_table, BiasMode, BiasTable, DEFAULT_BIAS_SAMPLES};
use crate::config::{ExperimentSection, ScenarioFile};
use crate::error::{Error, Result};
use crate::estimators::{
    ippa_estimate, lls_estimate, nls_estimate, EstimatorKind, PositionEstimate, SolverSettings,
};
use crate::geometry::{AnchorConfig, BuildingModel, Point3};
use crate::measurement::{generate_measurements, sample_node, NoiseModel, RangeVector};
use crate::rng;

const TRIAL_STREAM: u64 = 1;
const BIAS_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub building: BuildingModel,
    pub anchors: AnchorConfig,
    pub noise: NoiseModel,
    pub n_trials: usize,
    /// Probability that a range follows the upper edge.
    pub edge_prob: f64,
    pub bias_mode: BiasMode,
    pub bias_samples: usize,
    pub estimators: Vec<EstimatorKind>,
    pub seed: u64,
    pub settings: SolverSettings,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            building: BuildingModel::default(),
            anchors: AnchorConfig::default(),
            noise: NoiseModel::default(),
            n_trials: 10_000,
            edge_prob: 0.5,
            bias_mode: BiasMode::Floorwise,
            bias_samples: DEFAULT_BIAS_SAMPLES,
            estimators: EstimatorKind::ALL.to_vec(),
            seed: 1,
            settings: SolverSettings::default(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    /// Builds a config from a scenario file, taking experiment values from
    /// its optional `[experiment]` table.
    pub fn from_scenario(scenario: &ScenarioFile) -> Result<Self> {
        let mut cfg = Self {
            building: scenario.building()?,
            anchors: scenario.anchors()?,
            ..Default::default()
        };
        if let Some(e) = &scenario.experiment {
            if let Some(n) = e.n_trials {
                cfg.n_trials = n;
            }
            if let Some(s) = e.sigma_m {
                cfg.noise = NoiseModel::gaussian(s)?;
            }
            if let Some(p) = e.edge_prob {
                cfg.edge_prob = p;
            }
            if let Some(m) = &e.bias_mode {
                cfg.bias_mode = m.parse()?;
            }
            if let Some(n) = e.bias_samples {
                cfg.bias_samples = n;
            }
            if let Some(list) = &e.estimators {
                cfg.estimators = list.iter().map(|s| s.parse()).collect::<Result<Vec<_>>>()?;
            }
            if let Some(seed) = e.seed {
                cfg.seed = seed;
            }
        }
        Ok(cfg)
    }

    /// Scenario file that reproduces this config.
    pub fn to_scenario(&self) -> ScenarioFile {
        let mut s = ScenarioFile::from_parts(&self.building, &self.anchors);
        s.experiment = Some(ExperimentSection {
            n_trials: Some(self.n_trials),
            sigma_m: Some(self.noise.sigma()),
            edge_prob: Some(self.edge_prob),
            bias_mode: Some(self.bias_mode.to_string()),
            bias_samples: Some(self.bias_samples),
            estimators: Some(
                self.estimators
                    .iter()
                    .map(|k| k.name().to_string())
                    .collect(),
            ),
            seed: Some(self.seed),
        });
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials < 1 {
            return Err(Error::InvalidConfig("n_trials must be at least 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidConfig("no estimators enabled".into()));
        }
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return Err(Error::InvalidConfig(format!(
                "edge_prob must be in [0, 1], got {}",
                self.edge_prob
            )));
        }
        self.settings.validate()?;
        if self.needs_bias_table() && self.bias_samples < crate::bias::MIN_BIAS_SAMPLES {
            return Err(Error::InvalidConfig(format!(
                "bias_samples must be at least {}",
                crate::bias::MIN_BIAS_SAMPLES
            )));
        }
        Ok(())
    }

    pub fn needs_bias_table(&self) -> bool {
        self.estimators.iter().any(|k| k.ippa_variant().is_some())
    }

    pub fn bias_seed(&self) -> u64 {
        rng::derive_seed(self.seed, &[BIAS_STREAM])
    }

    pub fn build_bias_table(&self) -> Result<BiasTable> {
        build_bias_table(
            &self.building,
            &self.anchors,
            self.bias_mode,
            self.bias_samples,
            self.bias_seed(),
        )
    }
}

/// Score of one estimator on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorOutcome {
    pub kind: EstimatorKind,
    /// `None` when the estimator failed.
    pub estimate: Option<PositionEstimate>,
    pub error_3d: f64,
    pub error_z: f64,
    pub floor_hit: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial_id: u64,
    /// `None` when no range vector could be simulated.
    pub measurements: Option<RangeVector>,
    pub outcomes: Vec<EstimatorOutcome>,
}

pub fn run_estimator(
    kind: EstimatorKind,
    ranges: &[f64],
    config: &ExperimentConfig,
    bias_table: Option<&BiasTable>,
) -> Result<PositionEstimate> {
    let (b, a, s) = (&config.building, &config.anchors, &config.settings);
    match kind {
        EstimatorKind::Lls => lls_estimate(ranges, a, b),
        EstimatorKind::Nls => nls_estimate(ranges, a, b, s),
        _ => {
            let variant = kind.ippa_variant().expect("IPPA kind");
            let table = bias_table
                .ok_or_else(|| Error::InvalidConfig(format!("{kind} requires a bias table")))?;
            ippa_estimate(ranges, a, b, table, variant, s)
        }
    }
}

fn failed(kind: EstimatorKind) -> EstimatorOutcome {
    EstimatorOutcome {
        kind,
        estimate: None,
        error_3d: f64::INFINITY,
        error_z: f64::INFINITY,
        floor_hit: false,
    }
}

/// Runs a single trial. `(seed, trial_id)` alone determines the node, the
/// edge choices and the noise.
pub fn run_trial(
    config: &ExperimentConfig,
    bias_table: Option<&BiasTable>,
    trial_id: u64,
) -> TrialOutcome {
    let mut r = rng::stream(config.seed, &[TRIAL_STREAM, trial_id]);
    let node = sample_node(&config.building, &mut r);
    let rv = match generate_measurements(
        &node,
        &config.anchors,
        &config.building,
        &config.noise,
        config.edge_prob,
        &mut r,
    ) {
        Ok(rv) => rv,
        Err(_) => {
            return TrialOutcome {
                trial_id,
                measurements: None,
                outcomes: config.estimators.iter().map(|&k| failed(k)).collect(),
            }
        }
    };
    let truth = node.to_point(&config.building);
    let outcomes = config
        .estimators
        .iter()
        .map(
            |&kind| match run_estimator(kind, rv.ranges(), config, bias_table) {
                Ok(est) => {
                    let p = Point3::new(est.x, est.y, est.z);
                    EstimatorOutcome {
                        kind,
                        error_3d: p.distance(&truth),
                        error_z: (est.z - truth.z).abs(),
                        floor_hit: est.floor == node.floor,
                        estimate: Some(est),
                    }
                }
                Err(_) => failed(kind),
            },
        )
        .collect();
    TrialOutcome {
        trial_id,
        measurements: Some(rv),
        outcomes,
    }
}

/// Runs all trials (in parallel) with a prepared bias table.
pub fn run_experiment_with_table(
    config: &ExperimentConfig,
    bias_table: Option<&BiasTable>,
) -> Result<RmseReport> {
    config.validate()?;
    if config.needs_bias_table() {
        let table = bias_table.ok_or_else(|| {
            Error::InvalidConfig("IPPA estimators enabled but no bias table supplied".into())
        })?;
        table.check_covers(&config.building, &config.anchors)?;
    }
    let trials: Vec<TrialOutcome> = (0..config.n_trials as u64)
        .into_par_iter()
        .map(|t| run_trial(config, bias_table, t))
        .collect();
    Ok(RmseReport::from_trials(&config.estimators, trials))
}

/// Builds the bias table when needed and runs the experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RmseReport> {
    config.validate()?;
    let table = if config.needs_bias_table() {
        Some(config.build_bias_table()?)
    } else {
        None
    };
    run_experiment_with_table(config, table.as_ref())
}
