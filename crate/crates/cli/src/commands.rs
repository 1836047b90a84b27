//! `gen` and `extract`.

use std::io::Write;
use std::path::{Path, PathBuf};

use psd_extract::{matfile, ExtractionReport, MethodSet, PsdOperator};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output;

/// What `gen` wrote and the spectrum landmarks it prints.
#[derive(Debug, Clone, PartialEq)]
pub struct GenSummary {
    pub matrix_path: PathBuf,
    pub basis_path: Option<PathBuf>,
    pub lambda_1: f64,
    pub lambda_k: f64,
    pub lambda_k1: f64,
    pub lambda_n: f64,
}

fn is_dir_like(p: &Path) -> bool {
    p.is_dir() || p.extension().is_none()
}

fn ensure_dir(p: &Path) -> CliResult<()> {
    std::fs::create_dir_all(p).map_err(|e| CliError::io(p, e))
}

fn ensure_parent(p: &Path) -> CliResult<()> {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => ensure_dir(d),
        _ => Ok(()),
    }
}

/// Write the configured operator (and optionally its basis) to disk.
pub fn cmd_gen(cfg: &ExperimentConfig, basis_out: Option<&Path>) -> CliResult<GenSummary> {
    cfg.validate()?;
    let a = cfg.build_operator(cfg.seed)?;
    let out = cfg.out_path(".");
    let matrix_path = if is_dir_like(&out) {
        ensure_dir(&out)?;
        out.join(format!(
            "psd_{}_n{}_s{}.psdm",
            cfg.spectrum.kind.name(),
            a.dim(),
            cfg.seed
        ))
    } else {
        ensure_parent(&out)?;
        out
    };
    matfile::save_operator(&matrix_path, &a)?;
    let basis_path = match basis_out {
        Some(p) => {
            let q = cfg.build_basis(&a, cfg.seed)?;
            ensure_parent(p)?;
            matfile::save_basis(p, &q)?;
            Some(p.to_path_buf())
        }
        None => None,
    };
    let lambda = a.eigenvalues();
    let n = lambda.len();
    let k = cfg.k.min(n - 1).max(1);
    Ok(GenSummary {
        matrix_path,
        basis_path,
        lambda_1: lambda[0],
        lambda_k: lambda[k - 1],
        lambda_k1: lambda[k],
        lambda_n: lambda[n - 1],
    })
}

/// Operator, basis and report for one trial of `cfg`.
pub fn run_trial(
    cfg: &ExperimentConfig,
    trial: usize,
) -> CliResult<(PsdOperator, ExtractionReport)> {
    let seed = cfg.trial_seed(trial);
    let a = cfg.build_operator(seed)?;
    let q = cfg.build_basis(&a, seed)?;
    let set = MethodSet::run(&a, &q, cfg.shift.as_run_arg(), cfg.chol_tol)?;
    let report = ExtractionReport::assemble(&a, &q, &set, cfg.resolved_mode(), cfg.chol_tol)?;
    Ok((a, report))
}

/// Run the extractors and write one plain CSV per trial.
///
/// Without an output location the first trial goes to `stdout`. A file path
/// takes a single trial; a directory receives `extract.csv` (or
/// `extract_t{t}.csv` per trial) plus a `.meta.json` sidecar for each.
pub fn cmd_extract(cfg: &ExperimentConfig, stdout: &mut dyn Write) -> CliResult<Vec<PathBuf>> {
    cfg.validate()?;
    let target = cfg
        .out
        .clone()
        .or_else(|| std::env::var_os(crate::config::OUT_DIR_ENV).map(PathBuf::from));
    let Some(target) = target else {
        let (_, report) = run_trial(cfg, 0)?;
        output::write_table(stdout, &report, cfg.mask())?;
        return Ok(Vec::new());
    };
    let to_dir = is_dir_like(&target);
    if !to_dir && cfg.trials > 1 {
        return Err(CliError::Config(
            "several trials need a directory as output".into(),
        ));
    }
    let mut written = Vec::new();
    for t in 0..cfg.trials {
        let (_, report) = run_trial(cfg, t)?;
        let path = if to_dir {
            ensure_dir(&target)?;
            let name = if cfg.trials == 1 {
                "extract.csv".to_string()
            } else {
                format!("extract_t{t}.csv")
            };
            target.join(name)
        } else {
            ensure_parent(&target)?;
            target.clone()
        };
        output::write_plain(&path, &report, cfg.mask())?;
        output::write_json(&path.with_extension("meta.json"), &report.meta)?;
        written.push(path);
    }
    Ok(written)
}
