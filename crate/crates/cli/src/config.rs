//! Experiment configuration: TOML file, CLI overrides, and the resolved
//! operator and basis it describes.
//!
//! ```toml
//! n = 1000
//! k = 200
//! seed = 7
//! methods = ["all"]          # rr | svd-qv | svd-u | nys | all
//! shift = "off"              # "off" | "auto" | a number (gamma)
//! chol_tol = 2.220446049250313e-16
//! mode = "leading"           # optional; "leading" | "trailing"
//! trials = 1
//! # matrix = "a.psdm"        # optional operator file instead of [spectrum]
//! # out = "results"
//!
//! [spectrum]
//! kind = "exponential"       # exponential | algebraic | linear | explicit
//! lambda_max = 1.0
//! lambda_min = 1e-20
//! # values = [3.0, 2.0, 1.0] # explicit only
//!
//! [subspace]
//! kind = "epsilon"           # rangefinder | epsilon | trailing | canonical | file
//! eps = 0.01
//! # seed = 11
//! power_iters = 0
//! # path = "q.psdm"          # file only
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use psd_extract::extract::DEFAULT_CHOL_TOL;
use psd_extract::{
    make_psd, matfile, random, subspaces, ErrorMode, Method, OrthonormalBasis, PsdOperator, Side,
    SpectrumKind, SpectrumSpec,
};

use crate::error::{CliError, CliResult};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "PSD_EXTRACT_OUT";

/// `eps` used by the `epsilon` and `trailing` subspaces when none is given.
pub const DEFAULT_EPS: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodChoice {
    Rr,
    SvdQv,
    SvdU,
    Nys,
    All,
}

impl FromStr for MethodChoice {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rr" => Ok(MethodChoice::Rr),
            "svd-qv" | "svd_qv" | "svd" => Ok(MethodChoice::SvdQv),
            "svd-u" | "svd_u" => Ok(MethodChoice::SvdU),
            "nys" | "nystrom" => Ok(MethodChoice::Nys),
            "all" => Ok(MethodChoice::All),
            other => Err(CliError::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// Which extractor columns of a report are filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MethodMask {
    pub rr: bool,
    pub svd_qv: bool,
    pub svd_u: bool,
    pub nys: bool,
}

impl MethodMask {
    pub const ALL: MethodMask = MethodMask {
        rr: true,
        svd_qv: true,
        svd_u: true,
        nys: true,
    };

    pub fn from_choices(choices: &[MethodChoice]) -> MethodMask {
        let has = |m| choices.contains(&MethodChoice::All) || choices.contains(&m);
        MethodMask {
            rr: has(MethodChoice::Rr),
            svd_qv: has(MethodChoice::SvdQv),
            svd_u: has(MethodChoice::SvdU),
            nys: has(MethodChoice::Nys),
        }
    }

    pub fn svd(&self) -> bool {
        self.svd_qv || self.svd_u
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut out = Vec::new();
        if self.rr {
            out.push(Method::Rr);
        }
        if self.svd_qv {
            out.push(Method::SvdQv);
        }
        if self.svd_u {
            out.push(Method::SvdU);
        }
        if self.nys {
            out.push(Method::Nys);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubspaceKind {
    Rangefinder,
    Epsilon,
    Trailing,
    Canonical,
    File,
}

impl FromStr for SubspaceKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rangefinder" => Ok(SubspaceKind::Rangefinder),
            "epsilon" | "epsilon-aligned" | "epsilon_aligned" => Ok(SubspaceKind::Epsilon),
            "trailing" | "perturbed-trailing" | "perturbed_trailing" => Ok(SubspaceKind::Trailing),
            "canonical" => Ok(SubspaceKind::Canonical),
            "file" => Ok(SubspaceKind::File),
            other => Err(CliError::Config(format!("unknown subspace kind '{other}'"))),
        }
    }
}

/// `off`, `auto` (estimate gamma) or a fixed gamma.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ShiftSetting {
    #[default]
    Off,
    Auto,
    Fixed(f64),
}

impl ShiftSetting {
    /// The form [`psd_extract::MethodSet::run`] takes.
    pub fn as_run_arg(self) -> Option<Option<f64>> {
        match self {
            ShiftSetting::Off => None,
            ShiftSetting::Auto => Some(None),
            ShiftSetting::Fixed(g) => Some(Some(g)),
        }
    }

    pub fn is_on(self) -> bool {
        self != ShiftSetting::Off
    }
}

impl FromStr for ShiftSetting {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s.to_ascii_lowercase().as_str() {
            "off" | "none" => Ok(ShiftSetting::Off),
            "auto" => Ok(ShiftSetting::Auto),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|g| g.is_finite())
                .map(ShiftSetting::Fixed)
                .ok_or_else(|| {
                    CliError::Config(format!("shift must be off, auto or a number, got '{s}'"))
                }),
        }
    }
}

impl fmt::Display for ShiftSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShiftSetting::Off => f.write_str("off"),
            ShiftSetting::Auto => f.write_str("auto"),
            ShiftSetting::Fixed(g) => write!(f, "{g:e}"),
        }
    }
}

impl Serialize for ShiftSetting {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ShiftSetting::Fixed(g) => s.serialize_f64(*g),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for ShiftSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(g) => Ok(ShiftSetting::Fixed(g)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub kind: SpectrumKind,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub values: Option<Vec<f64>>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            kind: SpectrumKind::Exponential,
            lambda_max: 1.0,
            lambda_min: 1e-20,
            values: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubspaceConfig {
    pub kind: SubspaceKind,
    pub eps: Option<f64>,
    pub seed: Option<u64>,
    pub power_iters: usize,
    pub path: Option<PathBuf>,
}

impl Default for SubspaceConfig {
    fn default() -> Self {
        SubspaceConfig {
            kind: SubspaceKind::Rangefinder,
            eps: None,
            seed: None,
            power_iters: 0,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub spectrum: SpectrumConfig,
    pub subspace: SubspaceConfig,
    pub methods: Vec<MethodChoice>,
    pub shift: ShiftSetting,
    pub chol_tol: f64,
    pub mode: Option<ErrorMode>,
    pub matrix: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub trials: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 1000,
            k: 200,
            seed: 0,
            spectrum: SpectrumConfig::default(),
            subspace: SubspaceConfig::default(),
            methods: vec![MethodChoice::All],
            shift: ShiftSetting::Off,
            chol_tol: DEFAULT_CHOL_TOL,
            mode: None,
            matrix: None,
            out: None,
            trials: 1,
        }
    }
}

/// Values given on the command line; each `Some` replaces the config value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub eps: Option<f64>,
    pub methods: Option<Vec<MethodChoice>>,
    pub subspace: Option<SubspaceKind>,
    pub shift: Option<ShiftSetting>,
    pub chol_tol: Option<f64>,
    pub trials: Option<usize>,
    pub spectrum: Option<SpectrumKind>,
    pub lambda_min: Option<f64>,
    pub matrix: Option<PathBuf>,
    pub basis: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.out {
            self.out = Some(v.clone());
        }
        if let Some(v) = o.n {
            self.n = v;
        }
        if let Some(v) = o.k {
            self.k = v;
        }
        if let Some(v) = o.eps {
            self.subspace.eps = Some(v);
        }
        if let Some(v) = &o.methods {
            self.methods = v.clone();
        }
        if let Some(v) = o.subspace {
            self.subspace.kind = v;
        }
        if let Some(v) = o.shift {
            self.shift = v;
        }
        if let Some(v) = o.chol_tol {
            self.chol_tol = v;
        }
        if let Some(v) = o.trials {
            self.trials = v;
        }
        if let Some(v) = o.spectrum {
            self.spectrum.kind = v;
        }
        if let Some(v) = o.lambda_min {
            self.spectrum.lambda_min = v;
        }
        if let Some(v) = &o.matrix {
            self.matrix = Some(v.clone());
        }
        if let Some(v) = &o.basis {
            self.subspace.path = Some(v.clone());
            self.subspace.kind = SubspaceKind::File;
        }
    }

    /// Check everything that does not need the operator itself.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.matrix.is_none() && !(1 <= self.k && self.k < self.n) {
            return bad(format!(
                "need 1 <= k < n, got n = {}, k = {}",
                self.n, self.k
            ));
        }
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if !(self.chol_tol.is_finite() && self.chol_tol >= 0.0) {
            return bad(format!(
                "chol_tol must be finite and >= 0, got {}",
                self.chol_tol
            ));
        }
        if let ShiftSetting::Fixed(g) = self.shift {
            if !g.is_finite() {
                return bad("shift must be finite".into());
            }
        }
        match self.subspace.kind {
            SubspaceKind::Epsilon | SubspaceKind::Trailing => {
                let eps = self.eps();
                if !(eps > 0.0 && eps < 1.0) {
                    return bad(format!("eps must lie in (0, 1), got {eps}"));
                }
            }
            SubspaceKind::File if self.subspace.path.is_none() => {
                return bad("subspace kind 'file' needs subspace.path".into());
            }
            _ => {}
        }
        if self.matrix.is_none() {
            self.spectrum_spec().validate()?;
        }
        Ok(())
    }

    pub fn eps(&self) -> f64 {
        self.subspace.eps.unwrap_or(DEFAULT_EPS)
    }

    pub fn mask(&self) -> MethodMask {
        MethodMask::from_choices(&self.methods)
    }

    /// Explicit `mode`, else trailing for trailing bases and shifted runs.
    pub fn resolved_mode(&self) -> ErrorMode {
        self.mode.unwrap_or(
            if self.shift.is_on() || self.subspace.kind == SubspaceKind::Trailing {
                ErrorMode::Trailing
            } else {
                ErrorMode::Leading
            },
        )
    }

    pub fn spectrum_spec(&self) -> SpectrumSpec {
        match (&self.spectrum.kind, &self.spectrum.values) {
            (SpectrumKind::Explicit, Some(v)) => SpectrumSpec::explicit(v.clone()),
            (kind, _) => SpectrumSpec::new(
                self.n,
                *kind,
                self.spectrum.lambda_max,
                self.spectrum.lambda_min,
            ),
        }
    }

    /// Seed of trial `t`; trial 0 uses the configured seed.
    pub fn trial_seed(&self, t: usize) -> u64 {
        self.seed.wrapping_add(t as u64)
    }

    /// Subspace seed for a given matrix seed.
    pub fn subspace_seed(&self, matrix_seed: u64) -> u64 {
        self.subspace
            .seed
            .unwrap_or_else(|| random::derive_seed(matrix_seed, 1))
    }

    pub fn build_operator(&self, seed: u64) -> CliResult<PsdOperator> {
        match &self.matrix {
            Some(path) => Ok(matfile::load_operator(path)?),
            None => Ok(make_psd(&self.spectrum_spec(), seed)?),
        }
    }

    pub fn build_basis(&self, a: &PsdOperator, matrix_seed: u64) -> CliResult<OrthonormalBasis> {
        let (n, k) = (a.dim(), self.k);
        if self.subspace.kind != SubspaceKind::File && !(1 <= k && k < n) {
            return Err(CliError::Config(format!(
                "need 1 <= k < n, got n = {n}, k = {k}"
            )));
        }
        let seed = self.subspace_seed(matrix_seed);
        let q = match self.subspace.kind {
            SubspaceKind::Rangefinder => {
                subspaces::randomized_rangefinder(a, k, seed, self.subspace.power_iters)?
            }
            SubspaceKind::Epsilon => subspaces::epsilon_aligned_basis(a, k, self.eps(), seed)?,
            SubspaceKind::Trailing => subspaces::perturbed_trailing_basis(a, k, self.eps(), seed)?,
            SubspaceKind::Canonical => {
                let side = match self.resolved_mode() {
                    ErrorMode::Leading => Side::Leading,
                    ErrorMode::Trailing => Side::Trailing,
                };
                subspaces::canonical_basis(a, k, side)?
            }
            SubspaceKind::File => {
                let path = self.subspace.path.as_ref().expect("validated");
                let q = matfile::load_basis(path)?;
                if q.n() != n {
                    return Err(CliError::Config(format!(
                        "basis file has {} rows, operator is {n}x{n}",
                        q.n()
                    )));
                }
                q
            }
        };
        Ok(q)
    }

    /// Output location: config/flag, then the environment, then `fallback`.
    pub fn out_path(&self, fallback: &str) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(fallback))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut cfg = ExperimentConfig {
            n: 40,
            k: 5,
            shift: ShiftSetting::Fixed(1.5),
            ..Default::default()
        };
        cfg.subspace.kind = SubspaceKind::Epsilon;
        cfg.subspace.eps = Some(0.1);
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            "n = 50\nk = 5\nshift = \"auto\"\n[subspace]\nkind = \"trailing\"\n",
        )
        .unwrap();
        assert_eq!(cfg.n, 50);
        assert_eq!(cfg.shift, ShiftSetting::Auto);
        assert_eq!(cfg.spectrum.lambda_min, 1e-20);
        assert_eq!(cfg.resolved_mode(), ErrorMode::Trailing);
        assert_eq!(cfg.eps(), DEFAULT_EPS);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("n = 5\nbogus = 1\n").is_err());
    }

    #[test]
    fn overrides_win() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply(&Overrides {
            n: Some(30),
            k: Some(4),
            eps: Some(0.2),
            subspace: Some(SubspaceKind::Epsilon),
            methods: Some(vec![MethodChoice::Nys]),
            ..Default::default()
        });
        assert_eq!((cfg.n, cfg.k), (30, 4));
        assert_eq!(cfg.eps(), 0.2);
        assert_eq!(cfg.mask().methods(), vec![Method::Nys]);
    }

    #[test]
    fn validation_errors() {
        let mut cfg = ExperimentConfig {
            n: 10,
            k: 10,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        cfg.k = 3;
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        cfg.trials = 1;
        cfg.subspace.kind = SubspaceKind::Epsilon;
        cfg.subspace.eps = Some(1.0);
        assert!(cfg.validate().is_err());
        cfg.subspace.eps = Some(0.5);
        cfg.validate().unwrap();
    }

    #[test]
    fn shift_parsing() {
        assert_eq!("off".parse::<ShiftSetting>().unwrap(), ShiftSetting::Off);
        assert_eq!("AUTO".parse::<ShiftSetting>().unwrap(), ShiftSetting::Auto);
        assert_eq!(
            "2.5".parse::<ShiftSetting>().unwrap(),
            ShiftSetting::Fixed(2.5)
        );
        assert!("nan".parse::<ShiftSetting>().is_err());
        assert!("soon".parse::<ShiftSetting>().is_err());
    }

    #[test]
    fn method_mask() {
        let m = MethodMask::from_choices(&[MethodChoice::All]);
        assert_eq!(m, MethodMask::ALL);
        let m = MethodMask::from_choices(&[MethodChoice::SvdU]);
        assert!(m.svd() && !m.svd_qv && !m.rr);
    }
}
