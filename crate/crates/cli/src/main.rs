use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hfmm_cli::checks::{check_names, Fault};
use hfmm_cli::commands;
use hfmm_cli::config::{Command, FileConfig, Format, Settings};
use hfmm_cli::CliError;

#[derive(Parser)]
#[command(name = "hfmm", version, about = "Heterogeneous FMM for the 2-D Helmholtz layered-media Green's function")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Error of each expansion order against a high-order reference run.
    Accuracy(Common),
    /// Wall time per phase over a sweep of particle counts.
    Bench(Common),
    /// Run the validation checks; exits with 1 if any fails.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Print the check names and exit.
        #[arg(long)]
        list: bool,
        /// Run only this check (repeatable).
        #[arg(long = "check")]
        checks: Vec<String>,
        /// Inject a deliberate fault (wrong-sign-alpha).
        #[arg(long)]
        inject_fault: Option<Fault>,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// free, two-layer or three-layer.
    #[arg(long)]
    media: Option<String>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    k1: Option<f64>,
    #[arg(long)]
    k2: Option<f64>,
    #[arg(long)]
    k3: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    /// Expansion orders, comma separated.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<usize>>,
    /// Reference order for accuracy runs.
    #[arg(long)]
    p_ref: Option<usize>,
    /// Particle counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    leaf_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// precompute, on-the-fly or cache=PATH.
    #[arg(long)]
    tables: Option<String>,
    /// Targets entering the error metric (leading subset).
    #[arg(long)]
    eval_subset: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long, default_value = "csv")]
    format: Format,
    /// Omit wall-clock values so repeated runs give identical output.
    #[arg(long)]
    no_timings: bool,
}

impl Common {
    fn overrides(&self) -> FileConfig {
        let mut f = FileConfig::default();
        f.media.kind = self.media.clone();
        f.media.k = self.k;
        f.media.alpha = self.alpha;
        f.media.k1 = self.k1;
        f.media.k2 = self.k2;
        f.media.k3 = self.k3;
        f.media.d = self.d;
        f.sweep.p = self.p.clone();
        f.sweep.p_ref = self.p_ref;
        f.sweep.n = self.n.clone();
        f.run.leaf_size = self.leaf_size;
        f.run.seed = self.seed;
        f.run.threads = self.threads;
        f.run.tables = self.tables.clone();
        f.run.eval_subset = self.eval_subset;
        f
    }

    fn settings(&self, command: Command) -> Result<Settings, CliError> {
        let base = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        Settings::resolve(command, &base.merge(self.overrides()))
    }
}

fn emit(common: &Common, report: &mut hfmm_cli::report::Report) -> Result<(), CliError> {
    if common.no_timings {
        report.strip_timings();
    }
    match &common.out {
        Some(path) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            report.write(common.format, &mut f)?;
            f.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            report.write(common.format, &mut lock)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Cmd::Accuracy(c) => {
            let mut r = commands::accuracy(&c.settings(Command::Accuracy)?)?;
            emit(&c, &mut r)?;
            Ok(true)
        }
        Cmd::Bench(c) => {
            let mut r = commands::bench(&c.settings(Command::Bench)?)?;
            emit(&c, &mut r)?;
            Ok(true)
        }
        Cmd::Validate {
            common,
            list,
            checks,
            inject_fault,
        } => {
            if list {
                for name in check_names() {
                    println!("{name}");
                }
                return Ok(true);
            }
            let mut r = commands::validate(&common.settings(Command::Validate)?, &checks, inject_fault)?;
            emit(&common, &mut r)?;
            for f in &r.failures {
                eprintln!("FAIL {f}");
            }
            eprintln!("{} of {} checks passed", r.rows.len() - r.failures.len(), r.rows.len());
            Ok(r.passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
