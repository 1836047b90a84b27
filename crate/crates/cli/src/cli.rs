//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use psd_extract::SpectrumKind;

use crate::commands;
use crate::config::{ExperimentConfig, MethodChoice, Overrides, ShiftSetting, SubspaceKind};
use crate::error::{CliError, CliResult, EXIT_OK};
use crate::experiment::{self, Preset};
use crate::output;
use crate::verify::{self, Suite, VerifyOptions};

#[derive(Debug, Parser)]
#[command(
    name = "psd-extract",
    version,
    about = "Rayleigh-Ritz, SVD-extract and Nyström eigenpair extraction for PSD matrices"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct GlobalArgs {
    /// Base seed for matrices and bases.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output file or directory (default: $PSD_EXTRACT_OUT).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true)]
    pub n: Option<usize>,

    #[arg(long, global = true)]
    pub k: Option<usize>,

    /// Subspace error for the epsilon and trailing bases.
    #[arg(long, global = true)]
    pub eps: Option<f64>,

    /// rr, svd-qv, svd-u, nys or all; repeat or comma-separate.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_method)]
    pub method: Option<Vec<MethodChoice>>,

    /// rangefinder, epsilon, trailing, canonical or file.
    #[arg(long, global = true, value_parser = parse_subspace)]
    pub subspace: Option<SubspaceKind>,

    /// off, auto or a fixed gamma.
    #[arg(long, global = true, value_parser = parse_shift, allow_hyphen_values = true)]
    pub shift: Option<ShiftSetting>,

    #[arg(long = "chol-tol", global = true)]
    pub chol_tol: Option<f64>,

    #[arg(long, global = true)]
    pub trials: Option<usize>,

    /// TOML file with an experiment configuration; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct MatrixArgs {
    /// exponential, algebraic, linear or explicit.
    #[arg(long, value_parser = parse_spectrum)]
    pub spectrum: Option<SpectrumKind>,

    #[arg(long = "lambda-min")]
    pub lambda_min: Option<f64>,

    /// Operator file instead of a generated spectrum.
    #[arg(long)]
    pub matrix: Option<PathBuf>,

    /// Basis file; implies `--subspace file`.
    #[arg(long)]
    pub basis: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic PSD operator file and print its spectrum landmarks.
    Gen {
        #[command(flatten)]
        matrix: MatrixArgs,

        /// Also write the configured basis to this file.
        #[arg(long = "basis-out")]
        basis_out: Option<PathBuf>,
    },
    /// Run the extractors and write the per-index CSV report.
    Extract {
        #[command(flatten)]
        matrix: MatrixArgs,
    },
    /// Reproduce a figure preset as annotated CSVs.
    Experiment {
        /// fig1 .. fig7, or all.
        preset: String,
    },
    /// Run a property suite and write a JSON summary.
    Verify {
        /// all, chain, bounds, identities, angles, trailing or shift.
        #[arg(default_value = "all")]
        suite: String,
    },
}

fn parse_method(s: &str) -> Result<MethodChoice, String> {
    s.parse().map_err(|e: CliError| e.to_string())
}

fn parse_subspace(s: &str) -> Result<SubspaceKind, String> {
    s.parse().map_err(|e: CliError| e.to_string())
}

fn parse_shift(s: &str) -> Result<ShiftSetting, String> {
    s.parse().map_err(|e: CliError| e.to_string())
}

fn parse_spectrum(s: &str) -> Result<SpectrumKind, String> {
    s.parse().map_err(|e: psd_extract::Error| e.to_string())
}

impl GlobalArgs {
    fn overrides(&self, m: Option<&MatrixArgs>) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            n: self.n,
            k: self.k,
            eps: self.eps,
            methods: self.method.clone(),
            subspace: self.subspace,
            shift: self.shift,
            chol_tol: self.chol_tol,
            trials: self.trials,
            spectrum: m.and_then(|m| m.spectrum),
            lambda_min: m.and_then(|m| m.lambda_min),
            matrix: m.and_then(|m| m.matrix.clone()),
            basis: m.and_then(|m| m.basis.clone()),
        }
    }

    fn config(&self, m: Option<&MatrixArgs>) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.apply(&self.overrides(m));
        Ok(cfg)
    }
}

/// Execute a parsed command, writing human-readable output to `stdout`.
pub fn execute(cli: Cli, stdout: &mut dyn Write) -> CliResult<()> {
    let g = &cli.global;
    let say =
        |w: &mut dyn Write, s: String| writeln!(w, "{s}").map_err(|e| CliError::io("<stdout>", e));
    match &cli.command {
        Command::Gen { matrix, basis_out } => {
            let cfg = g.config(Some(matrix))?;
            let s = commands::cmd_gen(&cfg, basis_out.as_deref())?;
            say(stdout, format!("wrote {}", s.matrix_path.display()))?;
            if let Some(p) = &s.basis_path {
                say(stdout, format!("wrote {}", p.display()))?;
            }
            say(
                stdout,
                format!("lambda_1     = {}", output::fmt_real(s.lambda_1)),
            )?;
            say(
                stdout,
                format!("lambda_k     = {}", output::fmt_real(s.lambda_k)),
            )?;
            say(
                stdout,
                format!("lambda_(k+1) = {}", output::fmt_real(s.lambda_k1)),
            )?;
            say(
                stdout,
                format!("lambda_n     = {}", output::fmt_real(s.lambda_n)),
            )?;
        }
        Command::Extract { matrix } => {
            let cfg = g.config(Some(matrix))?;
            for p in commands::cmd_extract(&cfg, stdout)? {
                eprintln!("wrote {}", p.display());
            }
        }
        Command::Experiment { preset } => {
            let cfg = g.config(None)?;
            let presets = if preset.eq_ignore_ascii_case("all") {
                experiment::ALL_PRESETS.to_vec()
            } else {
                vec![preset.parse::<Preset>()?]
            };
            let dir = cfg.out_path("psd-extract-out");
            for p in presets {
                for f in experiment::cmd_experiment(p, &cfg, &dir)? {
                    say(stdout, format!("wrote {}", f.display()))?;
                }
            }
        }
        Command::Verify { suite } => {
            let suite: Suite = suite.parse()?;
            let cfg = g.config(None)?;
            let opts = VerifyOptions {
                seed: cfg.seed,
                trials: g.trials.or(g.config.as_ref().map(|_| cfg.trials)),
                n: g.n,
                k: g.k,
            };
            let summary = verify::run_suite(suite, &opts)?;
            for p in &summary.properties {
                say(stdout, p.to_string())?;
            }
            let dir = cfg.out_path("psd-extract-out");
            std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            let json = dir.join(format!("verify_{}.json", suite.name()));
            output::write_json(&json, &summary)?;
            say(
                stdout,
                format!(
                    "{}: {} properties, {} failed; summary in {}",
                    suite.name(),
                    summary.properties.len(),
                    summary.failed,
                    json.display()
                ),
            )?;
            if !summary.passed {
                return Err(CliError::PropertyFailure {
                    failed: summary.failed,
                });
            }
        }
    }
    Ok(())
}

/// Parse `args`, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                crate::error::EXIT_CONFIG
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(cli, &mut lock) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
