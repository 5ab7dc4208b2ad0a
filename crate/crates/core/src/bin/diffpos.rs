use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use diffpos::bias::{BiasMode, BiasTable};
use diffpos::config::ScenarioFile;
use diffpos::diffraction::{for_each_pathdiff_sample, path_difference_scan};
use diffpos::harness::{
    export_report, run_estimator, run_experiment_with_table, write_diagnostics_csv,
    write_trial_dump_csv, ExperimentConfig,
};
use diffpos::measurement::NoiseModel;
use diffpos::{Error, Result};

/// Window-edge diffraction positioning simulator.
#[derive(Parser)]
#[command(name = "diffpos", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Histogram of upper/lower path differences over a node grid.
    ScanPathdiff(ScanArgs),
    /// Build and serialise a bias table.
    BiasTable(BiasArgs),
    /// Monte-Carlo evaluation of the estimators.
    Run(RunArgs),
    /// Single-shot estimate from a ranges CSV (`anchor_index,range_m`).
    Solve(SolveArgs),
}

#[derive(Args)]
struct Common {
    /// Scenario TOML file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    common: Common,
    /// Grid spacing, meters.
    #[arg(long, default_value_t = 0.05)]
    spacing: f64,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Also write every grid sample to `pathdiff_rows.csv`.
    #[arg(long)]
    rows: bool,
}

#[derive(Args)]
struct BiasArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_parser = parse_mode)]
    bias_mode: Option<BiasMode>,
    /// Samples per (anchor, floor).
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Also write `bias_histograms.csv`.
    #[arg(long)]
    histograms: bool,
}

#[derive(Args)]
struct EstimatorArgs {
    /// Comma-separated list: lls,ippa-id,ippa-idmin,ippa-idmean,nls.
    #[arg(long)]
    estimators: Option<String>,
    #[arg(long, value_parser = parse_mode)]
    bias_mode: Option<BiasMode>,
    /// Pre-built bias table CSV; built from the seed when omitted.
    #[arg(long)]
    bias_table: Option<PathBuf>,
    #[arg(long)]
    bias_samples: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    est: EstimatorArgs,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    edge_prob: Option<f64>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Also write `diagnostics.csv`.
    #[arg(long)]
    diagnostics: bool,
    /// Also write `trials.csv` with every simulated range.
    #[arg(long)]
    trial_dump: bool,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    est: EstimatorArgs,
    /// CSV with `anchor_index,range_m` rows.
    #[arg(long)]
    ranges: PathBuf,
}

fn parse_mode(s: &str) -> std::result::Result<BiasMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn base_config(common: &Common) -> Result<ExperimentConfig> {
    let scenario = match &common.config {
        Some(path) => ScenarioFile::load(path)?,
        None => ScenarioFile::default(),
    };
    let mut cfg = ExperimentConfig::from_scenario(&scenario)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn apply_estimator_args(cfg: &mut ExperimentConfig, est: &EstimatorArgs) -> Result<()> {
    if let Some(list) = &est.estimators {
        cfg.estimators = list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
    }
    if let Some(mode) = est.bias_mode {
        cfg.bias_mode = mode;
    }
    if let Some(n) = est.bias_samples {
        cfg.bias_samples = n;
    }
    Ok(())
}

fn bias_table_for(cfg: &ExperimentConfig, est: &EstimatorArgs) -> Result<Option<BiasTable>> {
    if !cfg.needs_bias_table() {
        return Ok(None);
    }
    let table = match &est.bias_table {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| {
                Error::InvalidConfig(format!("cannot open {}: {e}", path.display()))
            })?;
            BiasTable::read_csv(file)?
        }
        None => cfg.build_bias_table()?,
    };
    table.check_covers(&cfg.building, &cfg.anchors)?;
    Ok(Some(table))
}

fn create(dir: &Path, name: &str) -> Result<fs::File> {
    fs::create_dir_all(dir)?;
    Ok(fs::File::create(dir.join(name))?)
}

fn scan(args: ScanArgs) -> Result<()> {
    let cfg = base_config(&args.common)?;
    let hist = path_difference_scan(&cfg.building, &cfg.anchors, args.spacing)?;

    let mut w = csv::Writer::from_writer(create(&args.out, "pathdiff_cdf.csv")?);
    w.write_record(["diff_upper_m", "count", "cumulative_fraction"])?;
    for ((edge, frac), count) in hist.cdf().into_iter().zip(&hist.counts) {
        w.write_record([edge.to_string(), count.to_string(), frac.to_string()])?;
    }
    w.flush()?;

    if args.rows {
        let mut w = csv::Writer::from_writer(create(&args.out, "pathdiff_rows.csv")?);
        w.write_record([
            "floor",
            "x_n",
            "y_n",
            "anchor_index",
            "upper_len_m",
            "lower_len_m",
            "diff_m",
        ])?;
        for_each_pathdiff_sample(&cfg.building, &cfg.anchors, args.spacing, |s| {
            w.write_record([
                s.floor.to_string(),
                s.x.to_string(),
                s.y.to_string(),
                s.anchor_index.to_string(),
                s.upper.to_string(),
                s.lower.to_string(),
                s.diff().to_string(),
            ])?;
            Ok(())
        })?;
        w.flush()?;
    }
    println!(
        "evaluated={} skipped={} max_diff_m={:.6}",
        hist.evaluated, hist.skipped, hist.max
    );
    Ok(())
}

fn bias(args: BiasArgs) -> Result<()> {
    let mut cfg = base_config(&args.common)?;
    if let Some(mode) = args.bias_mode {
        cfg.bias_mode = mode;
    }
    if let Some(n) = args.samples {
        cfg.bias_samples = n;
    }
    let table = cfg.build_bias_table()?;
    table.write_csv(create(&args.out, "bias_table.csv")?)?;
    if args.histograms {
        table.write_histogram_csv(create(&args.out, "bias_histograms.csv")?)?;
    }
    let discarded: usize = table.entries().map(|(_, d)| d.discarded).sum();
    println!(
        "mode={} entries={} discarded={}",
        table.mode(),
        table.len(),
        discarded
    );
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = base_config(&args.common)?;
    apply_estimator_args(&mut cfg, &args.est)?;
    if let Some(n) = args.trials {
        cfg.n_trials = n;
    }
    if let Some(s) = args.sigma {
        cfg.noise = NoiseModel::gaussian(s)?;
    }
    if let Some(p) = args.edge_prob {
        cfg.edge_prob = p;
    }
    cfg.output_dir = Some(args.out.clone());
    cfg.validate()?;

    let table = bias_table_for(&cfg, &args.est)?;
    let report = run_experiment_with_table(&cfg, table.as_ref())?;
    export_report(&report, &cfg, &args.out)?;
    if args.diagnostics {
        write_diagnostics_csv(&report, create(&args.out, "diagnostics.csv")?)?;
    }
    if args.trial_dump {
        write_trial_dump_csv(&report, create(&args.out, "trials.csv")?)?;
    }

    let stdout = io::stdout();
    let mut out = stdout.lock();
    report.write_summary_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn read_ranges(path: &Path, n_anchors: usize) -> Result<Vec<f64>> {
    let file = fs::File::open(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot open {}: {e}", path.display())))?;
    let mut ranges = vec![f64::NAN; n_anchors];
    let mut r = csv::Reader::from_reader(file);
    for rec in r.records() {
        let rec = rec?;
        let bad = || Error::Parse(format!("bad ranges row: {rec:?}"));
        if rec.len() != 2 {
            return Err(bad());
        }
        let j: usize = rec[0].trim().parse().map_err(|_| bad())?;
        let range: f64 = rec[1].trim().parse().map_err(|_| bad())?;
        if j >= n_anchors || !range.is_finite() || range < 0.0 {
            return Err(bad());
        }
        ranges[j] = range;
    }
    if let Some(j) = ranges.iter().position(|r| r.is_nan()) {
        return Err(Error::Parse(format!("no range for anchor {j}")));
    }
    Ok(ranges)
}

fn solve(args: SolveArgs) -> Result<()> {
    let mut cfg = base_config(&args.common)?;
    apply_estimator_args(&mut cfg, &args.est)?;
    cfg.validate()?;
    let ranges = read_ranges(&args.ranges, cfg.anchors.len())?;
    let table = bias_table_for(&cfg, &args.est)?;

    let stdout = io::stdout();
    let mut w = csv::Writer::from_writer(stdout.lock());
    w.write_record([
        "estimator",
        "x_m",
        "y_m",
        "floor",
        "z_m",
        "residual",
        "iterations",
        "converged",
        "clamped",
    ])?;
    let mut failed = None;
    for &kind in &cfg.estimators {
        match run_estimator(kind, &ranges, &cfg, table.as_ref()) {
            Ok(e) => w.write_record([
                kind.name().to_string(),
                e.x.to_string(),
                e.y.to_string(),
                e.floor.to_string(),
                e.z.to_string(),
                e.residual.to_string(),
                e.iterations.to_string(),
                e.converged.to_string(),
                e.clamped.to_string(),
            ])?,
            Err(err) => {
                eprintln!("{kind}: {err}");
                failed.get_or_insert(err);
            }
        }
    }
    w.flush()?;
    match failed {
        Some(err) if cfg.estimators.len() == 1 => Err(err),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::ScanPathdiff(a) => scan(a),
        Command::BiasTable(a) => bias(a),
        Command::Run(a) => run(a),
        Command::Solve(a) => solve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
