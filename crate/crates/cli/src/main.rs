use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;

use ppg2ecg::evaluation::sweep_lx;
use ppg2ecg::io::{self, write_cycles, write_reconstruction};
use ppg2ecg::report::{profile_block, Report, SessionEntry};
use ppg2ecg::{
    apply_model, generate, preprocess_session_detailed, run_subject_dependent, Error, PipelineConfig, Scheme,
    SessionMetrics, SynthConfig, TransformModel,
};

/// Reconstruct ECG cycles from PPG cycles.
#[derive(Parser, Debug)]
#[command(name = "ppg2ecg", version)]
struct Cli {
    /// Seed for synthetic data; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Segmentation scheme (SR or R2R); overrides the config file.
    #[arg(long, global = true)]
    scheme: Option<Scheme>,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Emit synthetic session directories.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write normalized cycle pairs as CSV matrices.
    Preprocess {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the coefficient map on the first part of a session.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
    },
    /// Reconstruct the held-out cycles of a session with a trained model.
    Reconstruct {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Supplies peak source, search radius and train fraction.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Per-session and aggregate metrics.
    Evaluate {
        #[arg(long = "in", num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Metrics as a function of the number of PPG coefficients.
    Sweep {
        #[arg(long = "in", num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        /// `start:step:end` or a comma-separated list.
        #[arg(long, default_value = "2:2:40", value_parser = parse_grid)]
        grid: Grid,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Regress metrics on age and weight over an evaluation report.
    ProfileTest {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone)]
struct Grid(Vec<usize>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("not a count: '{t}'"));
    let grid: Vec<usize> = match s.split(':').collect::<Vec<_>>()[..] {
        [a, b, c] => {
            let (start, step, end) = (num(a)?, num(b)?, num(c)?);
            if step == 0 {
                return Err("grid step must be positive".into());
            }
            (start..=end).step_by(step).collect()
        }
        [_] => s.split(',').map(num).collect::<Result<_, _>>()?,
        _ => return Err("expected start:step:end or a comma-separated list".into()),
    };
    if grid.is_empty() || grid.contains(&0) {
        return Err("grid must be nonempty and positive".into());
    }
    Ok(Grid(grid))
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(m) => Failure::Usage(format!("invalid configuration: {m}")),
            other => Failure::Data(other),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn read_json<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn pipeline_config(cli: &Cli, path: Option<&Path>) -> CliResult<PipelineConfig> {
    let mut cfg: PipelineConfig = read_json(path)?;
    if let Some(s) = cli.scheme {
        cfg.scheme = s;
    }
    Ok(cfg)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Data(Error::Io { path: dir.into(), source: e }))?;
    }
    fs::write(path, text).map_err(|e| Failure::Data(Error::Io { path: path.into(), source: e }))
}

fn session_id(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

fn with_session<T>(dir: &Path, r: ppg2ecg::Result<T>) -> CliResult<T> {
    r.map_err(|e| {
        warn!("session {}: {e}", dir.display());
        Failure::from(e)
    })
}

fn synth(cli: &Cli, config: Option<&Path>, out: &Path) -> CliResult<()> {
    let mut cfg: SynthConfig = read_json(config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let dirs: Vec<(u64, PathBuf)> = if cfg.count == 1 {
        vec![(cfg.seed, out.to_path_buf())]
    } else {
        (0..cfg.count)
            .map(|i| (cfg.seed + i as u64, out.join(format!("session_{i:03}"))))
            .collect()
    };
    dirs.par_iter().try_for_each(|(seed, dir)| -> CliResult<()> {
        let (session, truth) = generate(&SynthConfig { seed: *seed, ..cfg.clone() })?;
        io::write_session(dir, &session)?;
        write_text(&dir.join("ground_truth.json"), &(truth.to_json()? + "\n"))?;
        info!("wrote {} ({} cycles)", dir.display(), truth.cycle_count);
        Ok(())
    })
}

fn evaluate_one(dir: &Path, cfg: &PipelineConfig) -> CliResult<SessionEntry> {
    let s = with_session(dir, io::ingest(dir))?;
    let run = with_session(dir, run_subject_dependent(&s, cfg))?;
    let m = with_session(dir, SessionMetrics::from_run(&run))?;
    Ok(SessionEntry::new(&session_id(dir), &m, s.age, s.weight))
}

fn sweep_one(dir: &Path, grid: &[usize], cfg: &PipelineConfig) -> CliResult<Vec<SessionEntry>> {
    let s = with_session(dir, io::ingest(dir))?;
    let curve = with_session(dir, sweep_lx(&s, grid, cfg))?;
    let id = session_id(dir);
    Ok(curve
        .iter()
        .map(|(_, m)| SessionEntry::new(&id, m, s.age, s.weight))
        .collect())
}

fn check_unique_ids(dirs: &[PathBuf]) -> CliResult<()> {
    let mut ids: Vec<String> = dirs.iter().map(|d| session_id(d)).collect();
    ids.sort();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Failure::Usage(format!("duplicate session id '{}'", w[0])));
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Synth { config, out } => synth(cli, config.as_deref(), out),
        Command::Preprocess { input, config, out } => {
            let cfg = pipeline_config(cli, config.as_deref())?;
            cfg.validate()?;
            let s = io::ingest(input)?;
            let p = preprocess_session_detailed(&s, &cfg)?;
            write_cycles(out, &p)?;
            info!(
                "{} cycles, cycle delay {}, sample shift {}",
                p.cycles.n_cycles(),
                p.cycle_delay,
                p.sample_shift
            );
            Ok(())
        }
        Command::Train { input, config, model } => {
            let cfg = pipeline_config(cli, config.as_deref())?;
            cfg.validate()?;
            let s = io::ingest(input)?;
            let run = run_subject_dependent(&s, &cfg)?;
            write_text(model, &(run.model.to_json()? + "\n"))?;
            info!("trained on {} cycles, {} held out", run.n_train, run.n_test);
            Ok(())
        }
        Command::Reconstruct { input, model, out, config } => {
            let cfg = pipeline_config(cli, config.as_deref())?;
            let model = TransformModel::load(model)?;
            if let Some(s) = cli.scheme.filter(|s| *s != model.scheme) {
                return Err(Failure::Usage(format!("model was trained with {}, not {s}", model.scheme)));
            }
            let s = io::ingest(input)?;
            let run = apply_model(&s, &model, &cfg)?;
            write_reconstruction(out, &run)?;
            let m = SessionMetrics::from_run(&run)?;
            info!("{} test cycles: rho {:.6}, rRMSE {:.6}", m.n_test_cycles, m.rho, m.rrmse);
            Ok(())
        }
        Command::Evaluate { input, config, report } => {
            let cfg = pipeline_config(cli, config.as_deref())?;
            cfg.validate()?;
            check_unique_ids(input)?;
            let entries = input
                .par_iter()
                .map(|d| evaluate_one(d, &cfg))
                .collect::<CliResult<Vec<_>>>()?;
            let r = Report::evaluation(cfg, entries);
            write_text(report, &r.to_json()?)?;
            write_text(&report.with_extension("csv"), &r.to_csv())?;
            if let Some(a) = &r.aggregate {
                info!("{} sessions: rho {:.4} +/- {:.4}, rRMSE {:.4} +/- {:.4}", a.n, a.rho_mean, a.rho_std, a.rrmse_mean, a.rrmse_std);
            }
            Ok(())
        }
        Command::Sweep { input, grid, config, report } => {
            let cfg = pipeline_config(cli, config.as_deref())?;
            cfg.validate_ranges()?;
            check_unique_ids(input)?;
            let entries: Vec<SessionEntry> = input
                .par_iter()
                .map(|d| sweep_one(d, &grid.0, &cfg))
                .collect::<CliResult<Vec<_>>>()?
                .into_iter()
                .flatten()
                .collect();
            let r = Report::sweep(cfg, entries);
            write_text(report, &r.to_json()?)?;
            write_text(&report.with_extension("csv"), &r.to_csv())?;
            Ok(())
        }
        Command::ProfileTest { report, out } => {
            let r = Report::load(report)?;
            let block = profile_block(&r.sessions)?;
            let text = serde_json::to_string_pretty(&block).map_err(Error::from)? + "\n";
            write_text(out, &text)?;
            info!(
                "rRMSE: F = {:.4}, p = {:.4}; rho: F = {:.4}, p = {:.4}",
                block.rrmse.f_statistic, block.rrmse.p_value, block.rho.f_statistic, block.rho.p_value
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.quiet { log::LevelFilter::Error } else { log::LevelFilter::Info })
        .parse_env("RUST_LOG")
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            log::error!("{m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            log::error!("{e}");
            ExitCode::from(2)
        }
    }
}
