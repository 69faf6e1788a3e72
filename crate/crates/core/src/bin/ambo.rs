use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ambo::harness::config::{load_config, Experiment, RunConfig};
use ambo::harness::experiments::execute;
use ambo::harness::HarnessError;

#[derive(Parser)]
#[command(name = "ambo", version, about = "Threshold dynamics for wetting on a rigid substrate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the initial particle with the thresholding scheme.
    Run(Args),
    /// E_h and the sharp energy of the initial particle.
    Energy(Args),
    /// E_h along a sequence of h against the sharp energy.
    Converge(Args),
    /// Compare E_{N^2 h} with E_h on random fields.
    Monotonic(Args),
    /// The inequality suite on random fields.
    Inequalities(Args),
    /// Stationary contact angle of a cap on a flat substrate.
    Angle(Args),
    /// Kernel, anisotropy and tension checks.
    Validate(Args),
}

#[derive(clap::Args)]
struct Args {
    /// TOML configuration file.
    config: PathBuf,
    #[arg(long, env = "AMBO_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    #[arg(long, env = "AMBO_THREADS")]
    threads: Option<usize>,
    /// Cells per axis.
    #[arg(long)]
    n: Option<usize>,
    /// Scheme time step.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Ratio (gamma_SP - gamma_SV) / (gamma_PV gamma) for `angle`.
    #[arg(long, allow_hyphen_values = true)]
    sigma_ratio: Option<f64>,
}

fn apply(args: &Args, experiment: Experiment) -> Result<RunConfig, HarnessError> {
    let mut c = load_config(&args.config)?;
    c.experiment = experiment;
    if let Some(n) = args.n {
        c.grid.n = n;
    }
    if let Some(seed) = args.seed {
        c.seed = seed;
    }
    if let Some(r) = args.sigma_ratio {
        c.angle.sigma_ratio = r;
    }
    if args.h.is_some() || args.max_steps.is_some() {
        let s = c.scheme.as_mut().ok_or_else(|| HarnessError::Config("--h/--max-steps need a `scheme` table".into()))?;
        if let Some(h) = args.h {
            s.h = h;
        }
        if let Some(m) = args.max_steps {
            s.max_steps = m;
        }
    }
    if let Some(dir) = &args.output_dir {
        c.output_dir = Some(dir.clone());
    }
    Ok(c)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (experiment, args) = match &cli.command {
        Command::Run(a) => (Experiment::Run, a),
        Command::Energy(a) => (Experiment::Energy, a),
        Command::Converge(a) => (Experiment::Converge, a),
        Command::Monotonic(a) => (Experiment::Monotonic, a),
        Command::Inequalities(a) => (Experiment::Inequalities, a),
        Command::Angle(a) => (Experiment::Angle, a),
        Command::Validate(a) => (Experiment::Validate, a),
    };
    if let Some(t) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("ambo: thread pool: {e}");
        }
    }
    let result = apply(args, experiment).and_then(|config| {
        let dir = config.output_dir.clone().unwrap_or_else(|| PathBuf::from("ambo-output"));
        execute(&config, &dir).map(|(outcome, files)| (outcome, files, dir))
    });
    match result {
        Ok((outcome, _files, dir)) => {
            println!("{experiment}: {:?}, outputs in {}", outcome.status, dir.display());
            ExitCode::from(outcome.status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("ambo: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
