use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mb4nls::harness::{compare_methods, convergence_study, parallel_bench, run, RunConfig};
use mb4nls::methods::MethodId;
use mb4nls::{Mb4Error, Result};

#[derive(Parser, Debug)]
#[command(name = "mb4nls", version, about = "Discrete NLS time integration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// key=value overrides applied after the file, e.g. nx=100 method=avf4
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one method and write trajectory.csv and snapshots
    Run(Common),
    /// Run several methods on the same configuration
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated method names
        #[arg(long, default_value = "RK4,GAUSS2,GAUSS4,AVF2,AVF4,MB4")]
        methods: String,
    },
    /// Time MB4 with one worker against several
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        workers: usize,
    },
    /// Fit the convergence order against a finer reference run
    Converge {
        #[command(flatten)]
        common: Common,
        /// Descending comma-separated step sizes
        #[arg(long, default_value = "0.02,0.01,0.005")]
        steps: String,
    },
}

fn load(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(&c.overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

fn write_report(dir: &Path, text: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.txt"), text)?;
    print!("{text}");
    Ok(())
}

fn list<T>(s: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(f).collect()
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run(c) => {
            let cfg = load(&c)?;
            let tr = run(&cfg)?;
            let files = tr.write_outputs(&c.out)?;
            println!(
                "{} {}x{} steps={} energy drift={:.3e} probability drift={:.3e}",
                cfg.method,
                cfg.nx,
                cfg.ny,
                tr.steps(),
                tr.max_energy_drift(),
                tr.max_probability_drift()
            );
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Compare { common, methods } => {
            let cfg = load(&common)?;
            let ms = list(&methods, |s| s.parse::<MethodId>())?;
            write_report(&common.out, &compare_methods(&cfg, &ms)?.to_string())?;
        }
        Command::Bench { common, workers } => {
            let cfg = load(&common)?;
            if !(2..=3).contains(&workers) {
                return Err(Mb4Error::Config(format!("bench workers must be 2 or 3, got {workers}")));
            }
            write_report(&common.out, &parallel_bench(&cfg, workers)?.to_string())?;
        }
        Command::Converge { common, steps } => {
            let cfg = load(&common)?;
            let hs = list(&steps, |s| {
                s.parse::<f64>()
                    .map_err(|_| Mb4Error::Config(format!("bad step size '{s}'")))
            })?;
            write_report(&common.out, &convergence_study(&cfg, &hs)?.to_string())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_non_convergence() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
