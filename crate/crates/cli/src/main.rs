//! `aubry`: experiment driver for Tonelli Lagrangians on the two-torus.

use std::path::PathBuf;
use std::process::ExitCode;

use aubry_core::config::ExperimentConfig;
use aubry_core::error::Error;
use aubry_core::pipeline::{self, ExitStatus, Outcome, RunOptions};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "aubry",
    version,
    about = "Minimizing orbits, critical values and entropy on the two-torus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// experiment configuration (TOML)
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// output directory; overrides `output.dir`
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// experiment seed; overrides `seed`
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// worker threads (defaults to the available parallelism)
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// reuse cached stage results from an earlier run
    #[arg(long)]
    resume: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check convexity, superlinearity and derivative consistency
    Validate(Common),
    /// Run every stage from validation to entropy
    Pipeline(Common),
    /// Run the pipeline once per parameter value
    Sweep {
        #[command(flatten)]
        common: Common,
        /// dotted config path to vary (repeatable); defaults to `sweep.parameters`
        #[arg(long = "param", value_name = "PATH")]
        params: Vec<String>,
        /// comma-separated values; defaults to `sweep.values`
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        values: Option<Vec<f64>>,
    },
    /// Sample the beta function on a rational grid
    Beta(Common),
    /// Sample the alpha function on the configured cohomology grid
    Alpha(Common),
    /// Covering and Lyapunov entropy estimates on the energy level
    Entropy(Common),
}

struct Loaded {
    cfg: ExperimentConfig,
    opts: RunOptions,
}

fn load(c: &Common) -> Result<Loaded, Error> {
    let mut cfg = ExperimentConfig::from_file(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output.dir = o.clone();
    }
    let workers = c
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if workers == 0 {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    let opts = RunOptions {
        out: cfg.output.dir.clone(),
        workers,
        resume: c.resume,
    };
    Ok(Loaded { cfg, opts })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_else(|| "n/a".into())
}

fn run(cmd: Command) -> Result<ExitStatus, Error> {
    match cmd {
        Command::Validate(c) => {
            let Loaded { cfg, opts } = load(&c)?;
            let (status, report) = pipeline::run_validate(&cfg, &opts.out)?;
            match report {
                Some(r) => println!(
                    "Tonelli checks passed: min fiber eigenvalue {:.6e}, max condition {:.3e}",
                    r.min_hessian_eigenvalue, r.max_hessian_condition
                ),
                None => println!("validation failed; see {}", opts.out.join("validation.json").display()),
            }
            Ok(status)
        }
        Command::Pipeline(c) => {
            let Loaded { cfg, opts } = load(&c)?;
            let r = pipeline::run_pipeline(&cfg, &opts)?;
            for s in &r.manifest.stages {
                println!("{:<15} {:<8} {}", s.name, format!("{:?}", s.status).to_lowercase(), s.detail);
            }
            for f in &r.manifest.hypothesis_failures {
                println!("hypothesis not met: {f}");
            }
            println!("certificate: {}", r.manifest.certificate);
            println!("manifest: {}", opts.out.join(pipeline::MANIFEST).display());
            Ok(r.status)
        }
        Command::Sweep { common, params, values } => {
            let Loaded { cfg, opts } = load(&common)?;
            let params = if params.is_empty() {
                cfg.sweep.as_ref().map(|s| s.parameters.clone()).unwrap_or_default()
            } else {
                params
            };
            let values = values
                .or_else(|| cfg.sweep.as_ref().map(|s| s.values.clone()))
                .unwrap_or_default();
            let rows = pipeline::run_sweep(&cfg, &params, &values, &opts)?;
            println!("value       exit  c0          certificate  covering    lyapunov    horseshoe");
            for r in &rows {
                println!(
                    "{:<11} {:<5} {:<11} {:<12} {:<11} {:<11} {}",
                    r.value,
                    r.exit_code,
                    fmt_opt(r.critical_value),
                    r.certificate,
                    fmt_opt(r.covering),
                    fmt_opt(r.lyapunov),
                    fmt_opt(r.horseshoe)
                );
            }
            println!("summary: {}", opts.out.join("sweep_summary.csv").display());
            Ok(ExitStatus::Success)
        }
        Command::Beta(c) => {
            let Loaded { cfg, opts } = load(&c)?;
            let samples = pipeline::run_beta(&cfg, &opts)?;
            println!(
                "{} beta samples written to {}",
                samples.len(),
                opts.out.join("beta.csv").display()
            );
            Ok(ExitStatus::Success)
        }
        Command::Alpha(c) => {
            let Loaded { cfg, opts } = load(&c)?;
            let samples = pipeline::run_alpha(&cfg, &opts)?;
            println!(
                "{} alpha samples written to {}",
                samples.len(),
                opts.out.join("alpha.csv").display()
            );
            Ok(ExitStatus::Success)
        }
        Command::Entropy(c) => {
            let Loaded { cfg, opts } = load(&c)?;
            let e = pipeline::run_entropy(&cfg, &opts)?;
            for (name, o) in [("covering", &e.covering), ("lyapunov", &e.lyapunov)] {
                match o {
                    Outcome::Value(r) => println!("{name:<9} {:.6} ({})", r.estimate, r.status),
                    Outcome::Failed(m) => println!("{name:<9} failed: {m}"),
                }
            }
            Ok(ExitStatus::Success)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let status = match run(cli.command) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            ExitStatus::from_error(&e)
        }
    };
    ExitCode::from(status.code() as u8)
}
