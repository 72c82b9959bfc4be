use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tricoin::analytic::AnalyticModel;
use tricoin::config::{BackendKind, RunConfig};
use tricoin::montecarlo::{
    estimate_with_log, log_trials, sample_initial, trial_rng, trial_seed, InitialConditions,
    LogHeader, SimModel,
};
use tricoin::sim2d::{simulate_toss_2d_recorded, Recording, TossConfig2D, TossReport2D};
use tricoin::sim3d::{simulate_toss_3d_logged, TossLog3D};
use tricoin::sweep::{audit_monotone, find_fair_ratio, run_sweep, write_sweep_csv};
use tricoin::{Error, Outcome};

#[derive(Parser)]
#[command(
    name = "tricoin",
    version,
    about = "Will a thick coin land on its side?"
)]
struct Cli {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trial count; overrides the config file.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; overrides the config file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form P(side) for an inelastic landing.
    Analytic {
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Aspect ratio H/R.
        #[arg(long, allow_negative_numbers = true)]
        ratio: f64,
    },
    /// One trial with its trajectory, written to toss.json.
    Toss {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Trial index whose release conditions are used.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Monte Carlo estimate; writes report.json and trials.jsonl.
    Estimate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Sweep from the config's [sweep] table; writes sweep.csv.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
    },
    /// Aspect ratio with P(side) = 1/3; writes fair.json.
    Fair {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
        #[arg(long)]
        tolerance: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Flat,
    Volumetric,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    AnalyticFlat,
    AnalyticVolumetric,
    Sim,
}

impl From<BackendArg> for BackendKind {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::AnalyticFlat => BackendKind::AnalyticFlat,
            BackendArg::AnalyticVolumetric => BackendKind::AnalyticVolumetric,
            BackendArg::Sim => BackendKind::Sim,
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 3,
        Error::NoiseFloor { .. } | Error::BracketFailure { .. } | Error::NonTermination { .. } => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> tricoin::Result<()> {
    if let Command::Analytic { model, ratio } = cli.command {
        let model = match model {
            ModelArg::Flat => AnalyticModel::Flat,
            ModelArg::Volumetric => AnalyticModel::Volumetric,
        };
        println!("{}", model.probability(ratio)?);
        return Ok(());
    }

    let config_path = match &cli.command {
        Command::Toss { config, .. }
        | Command::Estimate { config }
        | Command::Sweep { config, .. }
        | Command::Fair { config, .. } => config.clone(),
        Command::Analytic { .. } => unreachable!(),
    };
    let mut config = match &config_path {
        Some(path) => RunConfig::load(path).map_err(|e| match e {
            Error::Io(io) => Error::Io(std::io::Error::new(
                io.kind(),
                format!("{}: {io}", path.display()),
            )),
            other => other,
        })?,
        None => RunConfig::for_model(SimModel::Sim2d),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(trials) = cli.trials {
        if trials == 0 {
            return Err(Error::InvalidParameter {
                field: "trials",
                reason: "must be >= 1".into(),
            });
        }
        config.trials = trials;
    }
    if let Some(threads) = cli.threads {
        config.threads = Some(threads);
    }
    if let Some(out) = cli.out {
        config.output_dir = out;
    }
    if let Some(n) = config.threads {
        if n == 0 {
            return Err(Error::InvalidParameter {
                field: "threads",
                reason: "must be >= 1".into(),
            });
        }
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }

    match cli.command {
        Command::Toss { index, .. } => cmd_toss(&config, index),
        Command::Estimate { .. } => cmd_estimate(&config),
        Command::Sweep { backend, .. } => cmd_sweep(&config, backend.map(Into::into)),
        Command::Fair {
            backend, tolerance, ..
        } => {
            if let Some(t) = tolerance {
                config.fair.options.tolerance = t;
                config.fair.options.validate()?;
            }
            cmd_fair(&config, backend.map(Into::into))
        }
        Command::Analytic { .. } => unreachable!(),
    }
}

fn create(dir: &Path, name: &str) -> tricoin::Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let file = File::create(&path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> tricoin::Result<()> {
    let mut out = create(dir, name)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(std::io::Error::from)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
#[serde(untagged)]
enum TossDetail {
    Planar(TossReport2D),
    Volumetric { duration: f64, log: TossLog3D },
}

#[derive(Serialize)]
struct TossDump {
    index: u64,
    seed: u64,
    initial: InitialConditions,
    outcome: Outcome,
    impacts: usize,
    detail: TossDetail,
}

fn cmd_toss(config: &RunConfig, index: u64) -> tricoin::Result<()> {
    let s = &config.scenario;
    let mut rng = trial_rng(config.seed, index);
    let initial = sample_initial(&s.sampler, &mut rng);
    let (outcome, impacts, detail) = match initial {
        InitialConditions::Planar {
            phi0,
            omega0,
            height,
            v_vertical0,
        } => {
            let toss = TossConfig2D {
                initial_height: height,
                phi0,
                omega0,
                v_vertical0,
                ..s.sim2d
            };
            let recording = Recording {
                impacts: true,
                trajectory: true,
            };
            let r = simulate_toss_2d_recorded(&s.spec, &s.material, &toss, recording)?;
            (r.outcome, r.impacts, TossDetail::Planar(r))
        }
        InitialConditions::Volumetric { .. } => {
            let launch = initial.launch_3d().expect("volumetric conditions");
            let r = simulate_toss_3d_logged(&s.spec, &s.material, &s.sim3d, &launch, true)?;
            let detail = TossDetail::Volumetric {
                duration: r.duration,
                log: r.log.unwrap_or_default(),
            };
            (r.outcome, r.impacts, detail)
        }
    };
    let dump = TossDump {
        index,
        seed: trial_seed(config.seed, index),
        initial,
        outcome,
        impacts,
        detail,
    };
    write_json(&config.output_dir, "toss.json", &dump)?;
    println!("{} after {impacts} impacts", outcome.label());
    Ok(())
}

fn cmd_estimate(config: &RunConfig) -> tricoin::Result<()> {
    let started = Instant::now();
    let (mut report, records) = estimate_with_log(&config.scenario, config.trials, config.seed)?;
    report.wall_time = started.elapsed().as_secs_f64();
    let header = LogHeader::new(config.seed, config.trials, config.scenario.model);
    log_trials(
        create(&config.output_dir, "trials.jsonl")?,
        &header,
        &records,
    )?;
    write_json(&config.output_dir, "report.json", &report)?;
    println!(
        "p_side = {:.4} ± {:.4} (binomial), ± {:.4} (1/sqrt N); N = {}, discarded {}",
        report.p_side, report.stderr, report.abs_error, report.n_total, report.n_discarded
    );
    Ok(())
}

fn cmd_sweep(config: &RunConfig, backend: Option<BackendKind>) -> tricoin::Result<()> {
    let section = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter {
            field: "sweep",
            reason: "the config has no [sweep] table".into(),
        })?;
    let plan = section.plan(config.trials)?;
    let backend = config.backend(backend.unwrap_or(section.backend));
    let rows = run_sweep(&plan, &backend, config.seed)?;
    write_sweep_csv(create(&config.output_dir, "sweep.csv")?, &rows)?;
    for row in &rows {
        match &row.estimate {
            Ok(e) => println!("{:>8.4}  {:.4} ± {:.4}", row.value, e.p_side, e.stderr),
            Err(msg) => println!("{:>8.4}  failed: {msg}", row.value),
        }
    }
    for i in audit_monotone(&rows) {
        eprintln!(
            "warning: P(side) drops by more than 3 sigma between {} and {}",
            rows[i].value,
            rows[i + 1].value
        );
    }
    Ok(())
}

fn cmd_fair(config: &RunConfig, backend: Option<BackendKind>) -> tricoin::Result<()> {
    let backend = config.backend(backend.unwrap_or(config.fair.backend));
    let result = find_fair_ratio(&backend, &config.fair.options, config.seed)?;
    write_json(&config.output_dir, "fair.json", &result)?;
    println!(
        "H/R = {:.4} ± {:.4} after {} iterations",
        result.ratio, result.half_width, result.iterations
    );
    Ok(())
}
