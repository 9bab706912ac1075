use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use tiltlab_cli::config::{parse_list, ConstraintKind, Method};
use tiltlab_cli::{execute, CliError, CliResult, Experiment, ExperimentConfig, Format};

/// Exponential tilts, I-projections and Gibbs conditioning experiments.
#[derive(Debug, Parser)]
#[command(name = "tiltlab", version, about)]
struct Args {
    /// dice, dice-concentration, bernoulli, theorem1, windows, gsm or cf-check
    /// (optional when the config file names one).
    experiment: Option<String>,
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Baseline law: uniform(k), bernoulli(q) or weights "w1,w2,..."; for
    /// gsm/cf-check a mixing law point(v), atoms(v1:w1,...) or inverse-gamma(a,b).
    #[arg(long)]
    baseline: Option<String>,
    /// Moment target(s), comma-separated.
    #[arg(long)]
    target: Option<String>,
    #[arg(long, value_enum)]
    constraint: Option<ConstraintKind>,
    /// Window half-width (or schedule amplitude for windows).
    #[arg(long)]
    half_width: Option<f64>,
    /// Window schedule exponent γ in ε_n = c n^{-γ}.
    #[arg(long)]
    exponent: Option<f64>,
    /// Sample sizes, comma-separated.
    #[arg(long)]
    n_grid: Option<String>,
    /// Block length.
    #[arg(long)]
    m: Option<usize>,
    /// Characteristic-function arguments, comma-separated.
    #[arg(long)]
    t_grid: Option<String>,
    /// Monte Carlo samples or proposals.
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Embed the wall-clock time in the report (breaks byte-identical output).
    #[arg(long)]
    timing: bool,
}

fn build_config(args: &Args) -> CliResult<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::from_toml(&std::fs::read_to_string(path)?)?,
        None => {
            let name = args.experiment.as_deref().ok_or_else(|| CliError::Config("no experiment given".into()))?;
            ExperimentConfig::new(name.parse()?)
        }
    };
    if let Some(name) = &args.experiment {
        config.experiment = name.parse::<Experiment>()?;
    }
    if let Some(b) = &args.baseline {
        config.baseline = Some(b.clone());
    }
    if let Some(t) = &args.target {
        config.target = Some(parse_list(t)?);
    }
    if let Some(g) = &args.n_grid {
        config.n_grid = Some(parse_list(g)?);
    }
    if let Some(g) = &args.t_grid {
        config.t_grid = Some(parse_list(g)?);
    }
    config.constraint = args.constraint.or(config.constraint);
    config.half_width = args.half_width.or(config.half_width);
    config.exponent = args.exponent.or(config.exponent);
    config.m = args.m.or(config.m);
    config.samples = args.samples.or(config.samples);
    config.method = args.method.or(config.method);
    config.seed = args.seed.unwrap_or(config.seed);
    config.format = args.format.unwrap_or(config.format);
    if args.out.is_some() {
        config.out = args.out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    if let Some(t) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = build_config(&args).and_then(|c| execute(&c, args.timing));
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::UnknownExperiment(_) | CliError::Config(_)) {
                eprintln!("\n{}", Args::command().render_usage());
                let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
                eprintln!("experiments: {}", names.join(", "));
            }
            ExitCode::from(2)
        }
    }
}
