use std::fs;

use diffpos::estimators::EstimatorKind;
use diffpos::harness::{export_report, run_experiment, run_trial, ExperimentConfig};
use diffpos::measurement::NoiseModel;

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        n_trials: 200,
        bias_samples: 2000,
        seed: 5,
        ..Default::default()
    }
}

#[test]
fn single_noiseless_trial_is_exact() {
    let cfg = ExperimentConfig {
        n_trials: 1,
        noise: NoiseModel::noiseless(),
        edge_prob: 1.0,
        estimators: vec![EstimatorKind::Nls],
        ..Default::default()
    };
    let report = run_experiment(&cfg).unwrap();
    let e = report.get(EstimatorKind::Nls).unwrap();
    assert_eq!(e.failures, 0);
    assert!(e.error_samples_3d[0] < 1e-4);
}

#[test]
fn report_is_internally_consistent() {
    let cfg = small_config();
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.n_trials, cfg.n_trials);
    for e in &report.estimators {
        assert_eq!(e.successes() + e.failures, cfg.n_trials);
        let rmse = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
        assert!((e.rmse_3d - rmse(&e.error_samples_3d)).abs() < 1e-9);
        assert!((e.rmse_z - rmse(&e.error_samples_z)).abs() < 1e-9);
        assert!(e.rmse_3d >= 0.0 && e.rmse_z >= 0.0);
        for cdf in [&e.cdf_3d, &e.cdf_z] {
            assert_eq!(cdf.len(), cfg.n_trials);
            assert!(cdf.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
            assert_eq!(cdf.last().unwrap().1, 1.0);
        }
    }
}

#[test]
fn every_estimator_sees_the_same_ranges() {
    let cfg = small_config();
    let table = cfg.build_bias_table().unwrap();
    let t = run_trial(&cfg, Some(&table), 17);
    let rv = t.measurements.as_ref().unwrap();
    for o in &t.outcomes {
        let direct = diffpos::harness::run_estimator(o.kind, rv.ranges(), &cfg, Some(&table)).ok();
        assert_eq!(direct, o.estimate);
    }
}

#[test]
fn export_writes_expected_files_reproducibly() {
    let cfg = small_config();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    export_report(&run_experiment(&cfg).unwrap(), &cfg, &a).unwrap();
    export_report(&run_experiment(&cfg).unwrap(), &cfg, &b).unwrap();

    let mut names: Vec<String> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 2 + 2 * cfg.estimators.len());
    assert!(names.contains(&"summary.csv".to_string()));
    assert!(names.contains(&"config.toml".to_string()));
    for n in &names {
        assert_eq!(
            fs::read(a.join(n)).unwrap(),
            fs::read(b.join(n)).unwrap(),
            "{n}"
        );
    }
    let cdf = fs::read_to_string(a.join("cdf_nls_3d.csv")).unwrap();
    assert_eq!(cdf.lines().count(), cfg.n_trials + 1);
    assert_eq!(cdf.lines().next().unwrap(), "error_m,cumulative_fraction");
    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    assert_eq!(
        summary.lines().next().unwrap(),
        "estimator,rmse_3d_m,rmse_z_m,floor_accuracy,failure_count"
    );

    let scenario = diffpos::config::ScenarioFile::load(&a.join("config.toml")).unwrap();
    let echoed = ExperimentConfig::from_scenario(&scenario).unwrap();
    assert_eq!(echoed.n_trials, cfg.n_trials);
    assert_eq!(echoed.seed, cfg.seed);
    assert_eq!(echoed.building, cfg.building);
}

#[test]
fn unwritable_output_leaves_nothing_behind() {
    let cfg = ExperimentConfig {
        n_trials: 5,
        estimators: vec![EstimatorKind::Lls],
        ..Default::default()
    };
    let report = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    assert!(export_report(&report, &cfg, &blocker.join("out")).is_err());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn invalid_configs_are_rejected_before_running() {
    for cfg in [
        ExperimentConfig {
            n_trials: 0,
            ..Default::default()
        },
        ExperimentConfig {
            estimators: vec![],
            ..Default::default()
        },
        ExperimentConfig {
            edge_prob: 1.5,
            ..Default::default()
        },
        ExperimentConfig {
            bias_samples: 10,
            ..Default::default()
        },
    ] {
        let err = run_experiment(&cfg).unwrap_err();
        assert!(err.is_config_error(), "{err}");
    }
}
