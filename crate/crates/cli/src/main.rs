//! `hamsim`: run configured simulation experiments and write CSV.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hamsim::experiments::{self, ExperimentConfig, Output, Resolved};
use hamsim::Error;

/// Default directory for CSV output when neither `--out` nor the config's
/// `output` key is given. Without it, CSV goes to stdout.
const OUTPUT_DIR_ENV: &str = "HAMSIM_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "hamsim", version, about = "Hamiltonian simulation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its records as CSV.
    Run {
        config: PathBuf,
        /// Override a config key, e.g. `--set n_instances=3`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Fit lognormal and Pareto-II models to a term-list file.
    Fit {
        term_list: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fit the Pareto shape only to magnitudes above this quantile.
        #[arg(long, value_name = "Q")]
        tail_quantile: Option<f64>,
    },
    /// Check a config and print the resolved settings.
    Validate {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse { .. } | Error::InvalidTerm(_) | Error::DuplicateString(_) => {
                Failure::Config(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn resolve(config: &Path, set: &[String]) -> Result<Resolved, Failure> {
    let cfg = ExperimentConfig::load(config, set)?;
    Ok(cfg.resolve()?)
}

fn output_path(cli_out: Option<PathBuf>, cfg_out: Option<&Path>, default_name: &str) -> Option<PathBuf> {
    cli_out.or_else(|| cfg_out.map(Path::to_path_buf)).or_else(|| {
        std::env::var_os(OUTPUT_DIR_ENV)
            .filter(|d| !d.is_empty())
            .map(|d| PathBuf::from(d).join(default_name))
    })
}

fn emit(output: &Output, meta: &[(&str, String)], path: Option<&Path>) -> Result<(), Failure> {
    let runtime = |e: io::Error| Failure::Runtime(e.to_string());
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(runtime)?;
            }
            let mut w = BufWriter::new(File::create(p).map_err(runtime)?);
            output.write(&mut w, meta)?;
            w.flush().map_err(runtime)?;
            eprintln!("wrote {} records to {}", output.len(), p.display());
        }
        None => output.write(io::stdout().lock(), meta)?,
    }
    Ok(())
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run {
            config,
            set,
            out,
            jobs,
        } => {
            if jobs == Some(0) {
                return Err(Failure::Config("--jobs must be >= 1".into()));
            }
            let cfg = resolve(&config, &set)?;
            let name = format!("{}-seed{}.csv", cfg.kind.name(), cfg.base_seed);
            let path = output_path(out, cfg.output.as_deref(), &name);
            let output = experiments::run(&cfg, jobs)?;
            emit(&output, &cfg.metadata(), path.as_deref())
        }
        Command::Fit {
            term_list,
            out,
            tail_quantile,
        } => {
            if tail_quantile.is_some_and(|q| !(0.0..1.0).contains(&q)) {
                return Err(Failure::Config("--tail-quantile must lie in [0, 1)".into()));
            }
            let rec = experiments::fit_term_list(&term_list, tail_quantile).map_err(|e| match e {
                Error::Io(io) => Failure::Config(format!("cannot read {}: {io}", term_list.display())),
                other => other.into(),
            })?;
            let stem = term_list.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let path = output_path(out, None, &format!("fit-{stem}.csv"));
            emit(&Output::Fit(vec![rec]), &[], path.as_deref())
        }
        Command::Validate { config, set } => {
            let cfg = resolve(&config, &set)?;
            for (k, v) in cfg.metadata() {
                println!("{k} = {v}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(m) => eprintln!("config error: {m}"),
                Failure::Runtime(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
