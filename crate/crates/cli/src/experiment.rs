//! Figure presets: each writes one annotated CSV per panel and trial.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use psd_extract::{ErrorMode, SpectrumKind};

use crate::commands::run_trial;
use crate::config::{ExperimentConfig, ShiftSetting, SubspaceKind, DEFAULT_EPS};
use crate::error::{CliError, CliResult};
use crate::output;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
}

pub const ALL_PRESETS: [Preset; 7] = [
    Preset::Fig1,
    Preset::Fig2,
    Preset::Fig3,
    Preset::Fig4,
    Preset::Fig5,
    Preset::Fig6,
    Preset::Fig7,
];

impl FromStr for Preset {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fig1" => Ok(Preset::Fig1),
            "fig2" => Ok(Preset::Fig2),
            "fig3" => Ok(Preset::Fig3),
            "fig4" => Ok(Preset::Fig4),
            "fig5" => Ok(Preset::Fig5),
            "fig6" => Ok(Preset::Fig6),
            "fig7" => Ok(Preset::Fig7),
            other => Err(CliError::Config(format!(
                "unknown preset '{other}' (expected fig1 .. fig7)"
            ))),
        }
    }
}

/// One CSV of a preset.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub stem: String,
    pub spectrum: SpectrumKind,
    pub subspace: SubspaceKind,
    pub mode: ErrorMode,
    pub shifted: bool,
    pub title: &'static str,
    pub y_axis: &'static str,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
            Preset::Fig7 => "fig7",
        }
    }

    pub fn panels(self) -> Vec<Panel> {
        use SpectrumKind::{Algebraic, Exponential, Linear};
        use SubspaceKind::{Epsilon, Rangefinder, Trailing};
        const VALUES: &str = "log10 of err_rr, err_svd, err_nys (and rr, svd, nys against exact)";
        const VECTORS: &str = "log10 of sin_rr, sin_svd_qv, sin_svd_u, sin_nys";
        let panel = |spectrum: SpectrumKind, subspace, mode, shifted, title, y_axis| Panel {
            stem: format!("{}_{}", self.name(), spectrum.name()),
            spectrum,
            subspace,
            mode,
            shifted,
            title,
            y_axis,
        };
        let lead = ErrorMode::Leading;
        let trail = ErrorMode::Trailing;
        match self {
            Preset::Fig1 => vec![panel(
                Exponential,
                Rangefinder,
                lead,
                false,
                "leading eigenvalue accuracy",
                VALUES,
            )],
            Preset::Fig2 => vec![panel(
                Exponential,
                Epsilon,
                lead,
                false,
                "leading eigenvalue errors against a priori bounds",
                "log10 of err_* and bound_* columns; bound_nys present where alpha_i > 0",
            )],
            Preset::Fig3 => vec![panel(
                Linear,
                Rangefinder,
                lead,
                false,
                "leading eigenvalue accuracy, slow decay",
                VALUES,
            )],
            Preset::Fig4 => vec![
                panel(
                    Exponential,
                    Rangefinder,
                    lead,
                    false,
                    "leading eigenvector accuracy",
                    VECTORS,
                ),
                panel(
                    Algebraic,
                    Rangefinder,
                    lead,
                    false,
                    "leading eigenvector accuracy",
                    VECTORS,
                ),
            ],
            Preset::Fig5 => vec![
                panel(
                    Algebraic,
                    Trailing,
                    trail,
                    false,
                    "trailing eigenvalue and eigenvector accuracy",
                    VALUES,
                ),
                panel(
                    Linear,
                    Trailing,
                    trail,
                    false,
                    "trailing eigenvalue and eigenvector accuracy",
                    VALUES,
                ),
            ],
            Preset::Fig6 => vec![
                panel(
                    Algebraic,
                    Trailing,
                    trail,
                    true,
                    "shifted trailing eigenvalue accuracy",
                    VALUES,
                ),
                panel(
                    Linear,
                    Trailing,
                    trail,
                    true,
                    "shifted trailing eigenvalue accuracy",
                    VALUES,
                ),
            ],
            Preset::Fig7 => vec![
                panel(
                    Algebraic,
                    Trailing,
                    trail,
                    true,
                    "shifted trailing eigenvector accuracy",
                    VECTORS,
                ),
                panel(
                    Linear,
                    Trailing,
                    trail,
                    true,
                    "shifted trailing eigenvector accuracy",
                    VECTORS,
                ),
            ],
        }
    }

    /// `base` with the panel's spectrum, basis, mode and shift filled in.
    pub fn panel_config(self, base: &ExperimentConfig, panel: &Panel) -> ExperimentConfig {
        let mut cfg = base.clone();
        cfg.matrix = None;
        cfg.spectrum.kind = panel.spectrum;
        cfg.spectrum.values = None;
        cfg.subspace.kind = panel.subspace;
        cfg.subspace.path = None;
        if matches!(
            panel.subspace,
            SubspaceKind::Epsilon | SubspaceKind::Trailing
        ) {
            cfg.subspace.eps = Some(base.subspace.eps.unwrap_or(DEFAULT_EPS));
        }
        cfg.mode = Some(panel.mode);
        cfg.shift = match (panel.shifted, base.shift) {
            (false, _) => ShiftSetting::Off,
            (true, ShiftSetting::Fixed(g)) => ShiftSetting::Fixed(g),
            (true, _) => ShiftSetting::Auto,
        };
        cfg
    }
}

/// Run every panel of `preset` for every trial; returns the files written.
pub fn cmd_experiment(
    preset: Preset,
    base: &ExperimentConfig,
    out_dir: &Path,
) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut written = Vec::new();
    for panel in preset.panels() {
        let cfg = preset.panel_config(base, &panel);
        cfg.validate()?;
        for t in 0..cfg.trials {
            let (_, report) = run_trial(&cfg, t)?;
            let name = if cfg.trials == 1 {
                format!("{}.csv", panel.stem)
            } else {
                format!("{}_t{t}.csv", panel.stem)
            };
            let extra = vec![
                ("preset".to_string(), preset.name().to_string()),
                ("title".to_string(), panel.title.to_string()),
                ("x_axis".to_string(), "i".to_string()),
                ("y_axis".to_string(), panel.y_axis.to_string()),
                ("trial".to_string(), t.to_string()),
                (
                    "lambda_range".to_string(),
                    format!(
                        "{} .. {}",
                        output::fmt_real(cfg.spectrum.lambda_max),
                        output::fmt_real(cfg.spectrum.lambda_min)
                    ),
                ),
                (
                    "power_iters".to_string(),
                    cfg.subspace.power_iters.to_string(),
                ),
            ];
            let path = out_dir.join(name);
            output::write_annotated(&path, &report, cfg.mask(), &extra)?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_names_round_trip() {
        for p in ALL_PRESETS {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("fig8".parse::<Preset>().is_err());
    }

    #[test]
    fn shifted_panels_reuse_the_trailing_basis() {
        let base = ExperimentConfig::default();
        let p5 = Preset::Fig5.panels();
        let p6 = Preset::Fig6.panels();
        let c5 = Preset::Fig5.panel_config(&base, &p5[0]);
        let c6 = Preset::Fig6.panel_config(&base, &p6[0]);
        assert_eq!(c5.subspace, c6.subspace);
        assert_eq!(c6.shift, ShiftSetting::Auto);
        assert_eq!(c5.shift, ShiftSetting::Off);
        assert_eq!(c5.eps(), 0.01);
    }

    #[test]
    fn fig4_algebraic_panel_uses_rangefinder() {
        let panels = Preset::Fig4.panels();
        assert_eq!(panels.len(), 2);
        assert_eq!(panels[1].spectrum, SpectrumKind::Algebraic);
        assert_eq!(panels[1].subspace, SubspaceKind::Rangefinder);
    }
}
