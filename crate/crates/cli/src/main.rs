use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod config;
mod run;

use config::{Command, DataSpec, DomainKind, OutputFormat, RunConfig, StudyArg};

/// Environment variable naming the default report directory.
pub const OUTPUT_ENV: &str = "PDOUGLAS_OUTPUT_DIR";
const DEFAULT_OUTPUT: &str = "pdouglas-reports";

#[derive(Parser, Debug)]
#[command(name = "pdouglas", version, about = "Check p-Douglas, Hardy–Stein and related identities numerically")]
#[command(args_conflicts_with_subcommands = true, allow_negative_numbers = true)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Interior energy of the harmonic extension against the boundary form.
    CheckDouglas(RunArgs),
    /// Hardy–Stein identity at an interior point of the disk.
    CheckHardyStein(RunArgs),
    /// Both p-variance displays at an interior point.
    CheckPvariance(RunArgs),
    /// Four-term identity for a smooth non-harmonic field (p >= 2).
    CheckRemainder(RunArgs),
    /// Identity for a field vanishing on the boundary.
    CheckVanishing(RunArgs),
    /// Energy of the signed-power minimizer against the harmonic extension.
    CheckMinimizer(RunArgs),
    /// Observed quasiminimality constant on concentric subdisks.
    CheckQuasimin(RunArgs),
    /// Ratio envelopes of the four comparable Bregman-type expressions.
    CheckFpequiv(RunArgs),
    /// Monte Carlo exit sampling against kernel quadrature.
    McValidate(RunArgs),
    /// Grid-refinement table against a closed-form reference.
    Convergence(RunArgs),
    /// Every applicable check with default settings.
    Suite(RunArgs),
    /// Print the JSON schema of report files.
    Schema,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Read the whole configuration from a JSON file written by --dry-run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long)]
    dry_run: bool,

    #[arg(long, value_enum, default_value = "disk")]
    domain: DomainKind,
    /// Left end of the interval.
    #[arg(long, default_value_t = 0.0)]
    a: f64,
    /// Right end of the interval.
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Boundary data preset, e.g. cos, shifted-cos:0.5, linear:1,0.
    #[arg(long, visible_alias = "u")]
    g: Option<String>,
    /// Fourier coefficient table with columns n,a_n,b_n (disk only).
    #[arg(long, conflicts_with = "g")]
    fourier_csv: Option<PathBuf>,
    /// Smooth field for check-remainder / check-vanishing.
    #[arg(long)]
    field: Option<String>,
    /// Exponents, comma separated or repeated.
    #[arg(long = "p", value_delimiter = ',', default_value = "2")]
    p: Vec<f64>,
    /// Grid levels, comma separated or repeated.
    #[arg(long, value_delimiter = ',', default_value = "3")]
    levels: Vec<u32>,
    /// Override the checker's default tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Fourier truncation order of the extension.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long, default_value_t = 20240501)]
    seed: u64,
    /// Interior point, comma separated.
    #[arg(long, value_delimiter = ',')]
    x: Option<Vec<f64>>,
    /// Boundary base point of the shifted p-variance display.
    #[arg(long, value_delimiter = ',')]
    w: Option<Vec<f64>>,
    /// Subdisk radii for check-quasimin.
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.7,0.9")]
    rho: Vec<f64>,
    /// Random pairs for check-fpequiv.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Monte Carlo sample count.
    #[arg(long, default_value_t = 100_000)]
    n: u64,
    /// Walk-on-spheres shell thickness.
    #[arg(long, default_value_t = 1e-3)]
    wos_eps: f64,
    /// Seeds in the Monte Carlo envelope test (0 skips it).
    #[arg(long, default_value_t = 0)]
    envelope: u64,
    /// Identity studied by `convergence`.
    #[arg(long, value_enum, default_value = "douglas")]
    study: StudyArg,
    /// Report directory; defaults to $PDOUGLAS_OUTPUT_DIR or ./pdouglas-reports.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: OutputFormat,
}

impl RunArgs {
    fn resolve(&self, command: Command) -> anyhow::Result<RunConfig> {
        let output = self.output.clone().unwrap_or_else(|| {
            std::env::var_os(OUTPUT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
        });
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| pdouglas_core::Error::Config(format!("{}: {e}", path.display())))?;
            let mut cfg = RunConfig::from_json(&text)?;
            cfg.command = command;
            if self.output.is_some() {
                cfg.output = output;
            }
            return Ok(cfg);
        }
        let domain = RunConfig::build_domain(self.domain, self.a, self.b)?;
        let data = match (&self.fourier_csv, &self.g) {
            (Some(path), _) => DataSpec::FourierCsv(path.clone()),
            (None, Some(s)) => DataSpec::Preset(s.clone()),
            (None, None) => DataSpec::Preset(RunConfig::default_data(&domain).into()),
        };
        let field = self.field.clone().unwrap_or_else(|| {
            if command == Command::CheckVanishing { "bubble" } else { "x1sq" }.into()
        });
        let cfg = RunConfig {
            command,
            domain,
            data,
            field,
            p: self.p.clone(),
            levels: self.levels.clone(),
            tol: self.tol,
            order: self.order,
            seed: self.seed,
            x: self.x.clone(),
            w: self.w.clone(),
            rho: self.rho.clone(),
            samples: self.samples,
            n: self.n,
            wos_eps: self.wos_eps,
            envelope: self.envelope,
            study: self.study,
            output,
            format: self.format,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Configuration and input problems exit with 2, failed checks with 1.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    use pdouglas_core::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::Config(_) | E::InvalidArgument(_) | E::Domain { .. } | E::Unsupported(_) | E::Precondition(_) | E::NotAnchored(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.cmd {
        Cmd::Schema => {
            println!("{}", run::REPORT_SCHEMA);
            return ExitCode::SUCCESS;
        }
        Cmd::CheckDouglas(a) => (Command::CheckDouglas, a),
        Cmd::CheckHardyStein(a) => (Command::CheckHardyStein, a),
        Cmd::CheckPvariance(a) => (Command::CheckPvariance, a),
        Cmd::CheckRemainder(a) => (Command::CheckRemainder, a),
        Cmd::CheckVanishing(a) => (Command::CheckVanishing, a),
        Cmd::CheckMinimizer(a) => (Command::CheckMinimizer, a),
        Cmd::CheckQuasimin(a) => (Command::CheckQuasimin, a),
        Cmd::CheckFpequiv(a) => (Command::CheckFpequiv, a),
        Cmd::McValidate(a) => (Command::McValidate, a),
        Cmd::Convergence(a) => (Command::Convergence, a),
        Cmd::Suite(a) => (Command::Suite, a),
    };
    let cfg = match args.resolve(command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("pdouglas: {e:#}");
            return ExitCode::from(2);
        }
    };
    if args.dry_run {
        println!("{}", cfg.to_json());
        return ExitCode::SUCCESS;
    }
    match run::run(&cfg) {
        Ok(outcome) => {
            for line in outcome.summary() {
                println!("{line}");
            }
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("pdouglas: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
