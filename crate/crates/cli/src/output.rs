//! CSV and JSON writers for extraction reports.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use psd_extract::{ExtractionReport, ReportRecord};

use crate::config::MethodMask;
use crate::error::{CliError, CliResult};

/// Fixed column order of every report CSV.
pub const COLUMNS: [&str; 16] = [
    "i",
    "exact",
    "rr",
    "svd",
    "nys",
    "err_rr",
    "err_svd",
    "err_nys",
    "bound_rr",
    "bound_svd",
    "bound_nys",
    "alpha_i",
    "sin_rr",
    "sin_svd_qv",
    "sin_svd_u",
    "sin_nys",
];

/// Scientific notation with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>, on: bool) -> String {
    match x {
        Some(v) if on => fmt_real(v),
        _ => String::new(),
    }
}

fn row(r: &ReportRecord, m: MethodMask) -> Vec<String> {
    let val = |x: f64, on: bool| opt(Some(x), on);
    vec![
        r.i.to_string(),
        fmt_real(r.exact),
        val(r.rr, m.rr),
        val(r.svd, m.svd()),
        val(r.nys, m.nys),
        val(r.err_rr, m.rr),
        val(r.err_svd, m.svd()),
        val(r.err_nys, m.nys),
        opt(r.bound_rr, m.rr),
        opt(r.bound_svd, m.svd()),
        opt(r.bound_nys, m.nys),
        opt(r.alpha_i, m.nys),
        val(r.sin_rr, m.rr),
        val(r.sin_svd_qv, m.svd_qv),
        val(r.sin_svd_u, m.svd_u),
        val(r.sin_nys, m.nys),
    ]
}

/// Header row plus one row per index.
pub fn write_table(w: impl Write, report: &ExtractionReport, mask: MethodMask) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(COLUMNS)?;
    for r in &report.records {
        out.write_record(row(r, mask))?;
    }
    out.flush().map_err(|e| CliError::io("<csv>", e))?;
    Ok(())
}

/// `# key: value` lines describing how a report was produced.
pub fn metadata_lines(report: &ExtractionReport, extra: &[(String, String)]) -> Vec<String> {
    let m = &report.meta;
    let none = || "none".to_string();
    let mut lines: Vec<(String, String)> = extra.to_vec();
    lines.extend([
        ("n".into(), m.n.to_string()),
        ("k".into(), m.k.to_string()),
        (
            "spectrum".into(),
            m.spectrum_kind.clone().unwrap_or_else(|| "unknown".into()),
        ),
        ("matrix_seed".into(), m.matrix_seed.to_string()),
        ("subspace".into(), m.subspace.clone()),
        ("subspace_seed".into(), m.subspace_seed.to_string()),
        ("eps".into(), m.eps.map_or_else(none, fmt_real)),
        ("mode".into(), m.mode.name().to_string()),
        (
            "shift_gamma".into(),
            m.shift_gamma.map_or_else(none, fmt_real),
        ),
        ("chol_tol".into(), fmt_real(m.chol_tol)),
        ("nys_core_rank".into(), m.nys_core_rank.to_string()),
    ]);
    for (tag, s) in &m.timings {
        lines.push((format!("seconds_{tag}"), format!("{s:.6}")));
    }
    for (tag, r) in &m.residuals {
        lines.push((format!("residual_{tag}"), fmt_real(*r)));
    }
    lines
        .into_iter()
        .map(|(k, v)| format!("# {k}: {v}"))
        .collect()
}

/// Metadata comment block followed by the table.
pub fn write_annotated(
    path: &Path,
    report: &ExtractionReport,
    mask: MethodMask,
    extra: &[(String, String)],
) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for line in metadata_lines(report, extra) {
        writeln!(w, "{line}").map_err(|e| CliError::io(path, e))?;
    }
    write_table(&mut w, report, mask)?;
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn write_plain(path: &Path, report: &ExtractionReport, mask: MethodMask) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_table(BufWriter::new(file), report, mask)
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).map_err(|e| CliError::io(path, e))?;
    Ok(())
}
