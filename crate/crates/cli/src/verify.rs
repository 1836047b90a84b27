//! Seeded property checks over the extractors, generators and bounds.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use psd_extract::extract::{self, DEFAULT_CHOL_TOL};
use psd_extract::model::operator_power;
use psd_extract::{
    dense, make_psd, random, subspaces, DenseMatrix, DenseOperator, ErrorMode, ExtractionReport,
    Method, MethodSet, OrthonormalBasis, PsdOperator, Side, SpectrumKind, SpectrumSpec,
};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    All,
    Chain,
    Bounds,
    Identities,
    Angles,
    Trailing,
    Shift,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::All => "all",
            Suite::Chain => "chain",
            Suite::Bounds => "bounds",
            Suite::Identities => "identities",
            Suite::Angles => "angles",
            Suite::Trailing => "trailing",
            Suite::Shift => "shift",
        }
    }

    fn members(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![
                Suite::Chain,
                Suite::Bounds,
                Suite::Identities,
                Suite::Angles,
                Suite::Trailing,
                Suite::Shift,
            ],
            s => vec![s],
        }
    }
}

impl FromStr for Suite {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "all" => Suite::All,
            "chain" => Suite::Chain,
            "bounds" => Suite::Bounds,
            "identities" => Suite::Identities,
            "angles" => Suite::Angles,
            "trailing" => Suite::Trailing,
            "shift" => Suite::Shift,
            other => return Err(CliError::Config(format!("unknown verify suite '{other}'"))),
        })
    }
}

/// Knobs shared by all suites; `None` keeps each property's default.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub trials: Option<usize>,
    pub n: Option<usize>,
    pub k: Option<usize>,
}

impl VerifyOptions {
    fn trials(&self, default: usize) -> usize {
        self.trials.unwrap_or(default).max(1)
    }

    fn size(&self, n: usize, k: usize) -> (usize, usize) {
        let n = self.n.unwrap_or(n);
        let k = self
            .k
            .unwrap_or_else(|| if self.n.is_some() { (n / 5).max(1) } else { k });
        (n, k)
    }

    fn trial_seed(&self, family: u64, t: usize) -> u64 {
        random::derive_seed(self.seed ^ family.wrapping_mul(0x9e37_79b9), t as u64)
    }
}

/// Outcome of one property: pass iff `max_violation <= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub suite: String,
    pub property: String,
    pub trials: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub failing_seed: Option<u64>,
    pub note: Option<String>,
}

impl fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}/{} trials={} max_violation={:.3e} tolerance={:.3e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.property,
            self.trials,
            self.max_violation,
            self.tolerance
        )?;
        if let Some(seed) = self.failing_seed {
            write!(f, " failing_seed={seed}")?;
        }
        if let Some(note) = &self.note {
            write!(f, " ({note})")?;
        }
        Ok(())
    }
}

struct Tracker {
    suite: &'static str,
    property: &'static str,
    tolerance: f64,
    trials: usize,
    worst: f64,
    worst_seed: u64,
    note: Option<String>,
}

impl Tracker {
    fn new(suite: Suite, property: &'static str, tolerance: f64) -> Self {
        Tracker {
            suite: suite.name(),
            property,
            tolerance,
            trials: 0,
            worst: f64::NEG_INFINITY,
            worst_seed: 0,
            note: None,
        }
    }

    fn trial(&mut self) {
        self.trials += 1;
    }

    fn observe(&mut self, seed: u64, violation: f64) {
        let v = if violation.is_nan() {
            f64::INFINITY
        } else {
            violation
        };
        if v > self.worst {
            self.worst = v;
            self.worst_seed = seed;
        }
    }

    fn finish(self) -> PropertyResult {
        let max_violation = if self.worst == f64::NEG_INFINITY {
            0.0
        } else {
            self.worst
        };
        let passed = max_violation <= self.tolerance;
        PropertyResult {
            suite: self.suite.to_string(),
            property: self.property.to_string(),
            trials: self.trials,
            max_violation,
            tolerance: self.tolerance,
            passed,
            failing_seed: (!passed).then_some(self.worst_seed),
            note: self.note,
        }
    }
}

/// Summary written next to the console output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifySummary {
    pub suite: String,
    pub seed: u64,
    pub passed: bool,
    pub failed: usize,
    pub properties: Vec<PropertyResult>,
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> CliResult<VerifySummary> {
    let mut properties = Vec::new();
    for s in suite.members() {
        properties.extend(match s {
            Suite::Chain => chain(opts)?,
            Suite::Bounds => bounds(opts)?,
            Suite::Identities => identities(opts)?,
            Suite::Angles => angles(opts)?,
            Suite::Trailing => trailing(opts)?,
            Suite::Shift => shift(opts)?,
            Suite::All => unreachable!(),
        });
    }
    let failed = properties.iter().filter(|p| !p.passed).count();
    Ok(VerifySummary {
        suite: suite.name().to_string(),
        seed: opts.seed,
        passed: failed == 0,
        failed,
        properties,
    })
}

const KINDS: [SpectrumKind; 4] = [
    SpectrumKind::Exponential,
    SpectrumKind::Algebraic,
    SpectrumKind::Linear,
    SpectrumKind::Explicit,
];

/// Spectrum of the given kind from 1 down to `lambda_min`; explicit spectra
/// are seeded uniform draws on `[lambda_min, 1]` with the top pinned at 1.
pub fn trial_spectrum(kind: SpectrumKind, n: usize, lambda_min: f64, seed: u64) -> SpectrumSpec {
    match kind {
        SpectrumKind::Explicit => {
            let mut v = random::uniform_values(n, lambda_min, 1.0, random::derive_seed(seed, 3));
            v.sort_by(|a, b| b.total_cmp(a));
            v[0] = 1.0;
            SpectrumSpec::explicit(v)
        }
        kind => SpectrumSpec::new(n, kind, 1.0, lambda_min),
    }
}

/// Haar-like random orthonormal `n x k` basis.
pub fn random_basis(n: usize, k: usize, seed: u64) -> CliResult<OrthonormalBasis> {
    let (q, _) = dense::thin_qr(&random::gaussian_matrix(n, k, seed))?;
    Ok(OrthonormalBasis::external(q)?)
}

fn values(a: &PsdOperator, q: &OrthonormalBasis, m: Method) -> CliResult<Vec<f64>> {
    Ok(extract::extract(a, q, m, DEFAULT_CHOL_TOL)?.values)
}

fn chain(o: &VerifyOptions) -> CliResult<Vec<PropertyResult>> {
    let s = Suite::Chain;
    let tol = 1e-10;
    let mut nys_le = Tracker::new(s, "lambda_ge_nys", tol);
    let mut svd_le = Tracker::new(s, "nys_ge_svd", tol);
    let mut rr_le = Tracker::new(s, "svd_ge_rr", tol);
    for t in 0..o.trials(200) {
        let seed = o.trial_seed(1, t);
        let n = if t % 2 == 0 { 50 } else { 200 };
        let k = if (t / 2) % 2 == 0 { 5 } else { 20 };
        let kind = KINDS[(t / 4) % 4];
        let a = make_psd(&trial_spectrum(kind, n, 1e-20, seed), seed)?;
        let qs = random::derive_seed(seed, 7);
        let q = match (t / 16) % 4 {
            0 => subspaces::randomized_rangefinder(&a, k, qs, 0)?,
            1 => subspaces::epsilon_aligned_basis(&a, k, 0.1, qs)?,
            2 => subspaces::perturbed_trailing_basis(&a, k, 0.01, qs)?,
            _ => random_basis(n, k, qs)?,
        };
        let l1 = a.lambda_max();
        let rr = values(&a, &q, Method::Rr)?;
        let sv = values(&a, &q, Method::SvdQv)?;
        let ny = values(&a, &q, Method::Nys)?;
        for tr in [&mut nys_le, &mut svd_le, &mut rr_le] {
            tr.trial();
        }
        for i in 0..k {
            nys_le.observe(seed, (ny[i] - a.eigenvalues()[i]) / l1);
            svd_le.observe(seed, (sv[i] - ny[i]) / l1);
            rr_le.observe(seed, (rr[i] - sv[i]) / l1);
        }
    }
    Ok(vec![nys_le.finish(), svd_le.finish(), rr_le.finish()])
}

fn leading_report(a: &PsdOperator, q: &OrthonormalBasis) -> CliResult<ExtractionReport> {
    let set = MethodSet::run(a, q, None, DEFAULT_CHOL_TOL)?;
    Ok(ExtractionReport::assemble(
        a,
        q,
        &set,
        ErrorMode::Leading,
        DEFAULT_CHOL_TOL,
    )?)
}

fn bounds(o: &VerifyOptions) -> CliResult<Vec<PropertyResult>> {
    let s = Suite::Bounds;
    let (n, k) = o.size(200, 40);
    let mut rr = Tracker::new(s, "rr_error_within_bound", 1e-12);
    let mut sv = Tracker::new(s, "svd_error_within_bound", 1e-12);
    let mut ny = Tracker::new(s, "nys_error_within_bound", 0.0);
    let mut order = Tracker::new(s, "leading_error_order", 1e-10);
    let mut with_nys = 0usize;
    for eps in [0.1, 0.01] {
        for t in 0..o.trials(5) {
            let seed = o.trial_seed(2, t);
            let a = make_psd(&SpectrumSpec::exponential(n, 1.0, 1e-20), seed)?;
            let q = subspaces::epsilon_aligned_basis(&a, k, eps, random::derive_seed(seed, 1))?;
            let r = leading_report(&a, &q)?;
            let l1 = a.lambda_max();
            for tr in [&mut rr, &mut sv, &mut ny, &mut order] {
                tr.trial();
            }
            for rec in &r.records {
                rr.observe(seed, (rec.err_rr - rec.bound_rr.unwrap_or(f64::NAN)) / l1);
                sv.observe(seed, (rec.err_svd - rec.bound_svd.unwrap_or(f64::NAN)) / l1);
                if let Some(b) = rec.bound_nys {
                    with_nys += 1;
                    ny.observe(seed, (rec.err_nys - b) / l1);
                }
                order.observe(
                    seed,
                    (rec.err_svd - rec.err_rr).max(rec.err_nys - rec.err_svd) / l1,
                );
            }
        }
    }
    ny.note = Some(format!("{with_nys} indices with alpha_i > 0"));
    Ok(vec![rr.finish(), sv.finish(), ny.finish(), order.finish()])
}

fn identities(o: &VerifyOptions) -> CliResult<Vec<PropertyResult>> {
    let s = Suite::Identities;
    let mut sqrt_id = Tracker::new(s, "rr_equals_svd_of_sqrt_squared", 1e-10);
    let mut sq_id = Tracker::new(s, "svd_equals_sqrt_rr_of_square", 1e-10);
    let mut inv = Tracker::new(s, "basis_invariance", 1e-10);
    let mut oracle = Tracker::new(s, "dense_nystrom_oracle", 1e-9);
    let mut loewner = Tracker::new(s, "a_minus_nystrom_psd", 1e-9);
    let mut dense_shift = Tracker::new(s, "shift_dense_matches_operator", 1e-10);
    for t in 0..o.trials(50) {
        let seed = o.trial_seed(3, t);
        let n = 30 + (t % 5) * 14;
        let k = 3 + t % 8;
        let kind = KINDS[t % 4];
        let lambda_min = [1e-2, 1e-3, 1e-4][t % 3];
        let a = make_psd(&trial_spectrum(kind, n, lambda_min, seed), seed)?;
        let q = if t % 2 == 0 {
            subspaces::randomized_rangefinder(&a, k, random::derive_seed(seed, 1), 0)?
        } else {
            random_basis(n, k, random::derive_seed(seed, 1))?
        };
        let l1 = a.lambda_max();
        for tr in [
            &mut sqrt_id,
            &mut sq_id,
            &mut inv,
            &mut oracle,
            &mut loewner,
            &mut dense_shift,
        ] {
            tr.trial();
        }

        let rr = values(&a, &q, Method::Rr)?;
        let sv = values(&a, &q, Method::SvdQv)?;
        let ny = values(&a, &q, Method::Nys)?;
        let half = operator_power(&a, 0.5)?;
        let square = operator_power(&a, 2.0)?;
        let sv_half = values(&half, &q, Method::SvdQv)?;
        let rr_square = values(&square, &q, Method::Rr)?;
        for i in 0..k {
            sqrt_id.observe(seed, (rr[i] - sv_half[i] * sv_half[i]).abs() / l1);
            sq_id.observe(seed, (sv[i] - rr_square[i].max(0.0).sqrt()).abs() / l1);
        }

        let (rot, _) =
            dense::thin_qr(&random::gaussian_matrix(k, k, random::derive_seed(seed, 2)))?;
        let qr = q.rotated(&rot)?;
        for (m, before) in [(Method::Rr, &rr), (Method::SvdQv, &sv), (Method::Nys, &ny)] {
            let after = values(&a, &qr, m)?;
            for i in 0..k {
                inv.observe(seed, (after[i] - before[i]).abs() / l1);
            }
        }

        let am = a.dense()?;
        let nys_dense = extract::nystrom_approximation_dense(&am, &q)?;
        let (ev, _) = dense::sym_eig(&nys_dense)?;
        for i in 0..k {
            oracle.observe(seed, (ev[i] - ny[i]).abs() / l1);
        }
        let (gap, _) = dense::sym_eig(&(&am - &nys_dense))?;
        loewner.observe(seed, -gap[n - 1] / l1);

        let gamma = 1.25 * l1;
        let op =
            extract::shifted_trailing_extract(&a, &q, Method::Nys, Some(gamma), DEFAULT_CHOL_TOL)?;
        let dn = extract::shifted_trailing_extract_dense(
            &DenseOperator::new(am)?,
            &q,
            Method::Nys,
            Some(gamma),
            DEFAULT_CHOL_TOL,
        )?;
        for i in 0..k {
            dense_shift.observe(seed, (op.values[i] - dn.values[i]).abs() / l1);
        }
    }
    sq_id.note = Some("spectra bounded below by 1e-4".into());
    Ok(vec![
        sqrt_id.finish(),
        sq_id.finish(),
        inv.finish(),
        oracle.finish(),
        loewner.finish(),
        dense_shift.finish(),
    ])
}

/// Largest principal-angle sine between two spans.
pub fn max_sine(x: &DenseMatrix, y: &DenseMatrix) -> CliResult<f64> {
    Ok(subspaces::principal_angles(x, y)?
        .first()
        .copied()
        .unwrap_or(0.0))
}

/// `(sin(Q, U1), sin(AQ, U1), sin(Q, U2), sin(AQ, U2))`, largest angles.
pub fn angle_pairs(a: &PsdOperator, q: &OrthonormalBasis) -> CliResult<[f64; 4]> {
    let k = q.k();
    let (aq, _) = dense::thin_qr(&a.apply_block(q.matrix())?)?;
    let u1 = a.leading_vectors(k);
    let u2 = a.complement_vectors(k);
    Ok([
        max_sine(q.matrix(), &u1)?,
        max_sine(&aq, &u1)?,
        max_sine(q.matrix(), &u2)?,
        max_sine(&aq, &u2)?,
    ])
}

fn angles(o: &VerifyOptions) -> CliResult<Vec<PropertyResult>> {
    let s = Suite::Angles;
    let mut exact = Tracker::new(s, "epsilon_aligned_max_sine", 1e-10);
    let mut ortho = Tracker::new(s, "basis_orthonormal", 1e-10);
    let mut mono1 = Tracker::new(s, "span_aq_closer_to_u1", 1e-10);
    let mut mono2 = Tracker::new(s, "span_aq_farther_from_u2", 1e-10);
    let (n, k) = (60, 10);
    for eps in [0.3, 0.1, 0.01, 0.001] {
        for t in 0..o.trials(20) {
            let seed = o.trial_seed(4, t);
            let a = make_psd(&SpectrumSpec::exponential(n, 1.0, 1e-8), seed)?;
            let q = subspaces::epsilon_aligned_basis(&a, k, eps, random::derive_seed(seed, 1))?;
            exact.trial();
            ortho.trial();
            let u1 = a.leading_vectors(k);
            exact.observe(seed, (max_sine(q.matrix(), &u1)? - eps).abs());
            ortho.observe(seed, dense::orthonormality_defect(q.matrix()));
        }
    }
    for t in 0..o.trials(50) {
        let seed = o.trial_seed(5, t);
        let kind = KINDS[t % 3];
        let a = make_psd(&trial_spectrum(kind, n, 1e-6, seed), seed)?;
        let qs = random::derive_seed(seed, 1);
        let q = match t % 3 {
            0 => random_basis(n, k, qs)?,
            1 => subspaces::epsilon_aligned_basis(&a, k, 0.5, qs)?,
            _ => subspaces::randomized_rangefinder(&a, k, qs, 0)?,
        };
        let [q1, aq1, q2, aq2] = angle_pairs(&a, &q)?;
        mono1.trial();
        mono2.trial();
        mono1.observe(seed, aq1 - q1);
        mono2.observe(seed, q2 - aq2);
    }
    Ok(vec![
        exact.finish(),
        ortho.finish(),
        mono1.finish(),
        mono2.finish(),
    ])
}

fn trailing_report(
    a: &PsdOperator,
    q: &OrthonormalBasis,
    shift: Option<Option<f64>>,
) -> CliResult<ExtractionReport> {
    let set = MethodSet::run(a, q, shift, DEFAULT_CHOL_TOL)?;
    Ok(ExtractionReport::assemble(
        a,
        q,
        &set,
        ErrorMode::Trailing,
        DEFAULT_CHOL_TOL,
    )?)
}

fn trailing(o: &VerifyOptions) -> CliResult<Vec<PropertyResult>> {
    let s = Suite::Trailing;
    let mut floor = Tracker::new(s, "rr_above_trailing_floor", 1e-10);
    let mut reverse = Tracker::new(s, "reverse_error_order", 1e-10);
    for t in 0..o.trials(100) {
        let seed = o.trial_seed(6, t);
        let n = 20 + (t % 4) * 20;
        let k = 2 + t % 9;
        let a = make_psd(&trial_spectrum(KINDS[t % 4], n, 1e-20, seed), seed)?;
        let q = random_basis(n, k, random::derive_seed(seed, 1))?;
        let rr = values(&a, &q, Method::Rr)?;
        let l1 = a.lambda_max();
        floor.trial();
        for (i, v) in rr.iter().enumerate() {
            floor.observe(seed, (a.eigenvalues()[n - k + i] - v) / l1);
        }
    }
    let (n, k) = o.size(400, 80);
    for t in 0..o.trials(5) {
        let seed = o.trial_seed(7, t);
        let a = make_psd(&SpectrumSpec::algebraic(n, 1.0, 1e-20), seed)?;
        let q = subspaces::perturbed_trailing_basis(&a, k, 0.01, random::derive_seed(seed, 1))?;
        let r = trailing_report(&a, &q, None)?;
        reverse.trial();
        for rec in &r.records {
            reverse.observe(
                seed,
                (rec.err_rr - rec.err_svd).max(rec.err_svd - rec.err_nys) / a.lambda_max(),
            );
        }
    }
    Ok(vec![floor.finish(), reverse.finish()])
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn shift(o: &VerifyOptions) -> CliResult<Vec<PropertyResult>> {
    let s = Suite::Shift;
    let mut exact = Tracker::new(s, "exact_trailing_basis_zero_error", 1e-10);
    let mut frac = Tracker::new(s, "shifted_nys_not_worse_fraction_deficit", 0.0);
    let mut factor = Tracker::new(s, "median_improvement_deficit", 0.0);
    for t in 0..o.trials(10) {
        let seed = o.trial_seed(8, t);
        let a = make_psd(&trial_spectrum(KINDS[t % 4], 50, 1e-20, seed), seed)?;
        let q = subspaces::canonical_basis(&a, 8, Side::Trailing)?;
        let r = trailing_report(&a, &q, Some(None))?;
        exact.trial();
        for rec in &r.records {
            exact.observe(
                seed,
                rec.err_rr.max(rec.err_svd).max(rec.err_nys) / a.lambda_max(),
            );
        }
    }
    let (n, k) = o.size(400, 80);
    let (mut better, mut total, mut ratios) = (0usize, 0usize, Vec::new());
    let mut unresolvable = 0usize;
    let mut last_seed = 0;
    for t in 0..o.trials(5) {
        let seed = o.trial_seed(9, t);
        last_seed = seed;
        let a = make_psd(&SpectrumSpec::algebraic(n, 1.0, 1e-20), seed)?;
        let q = subspaces::perturbed_trailing_basis(&a, k, 0.01, random::derive_seed(seed, 1))?;
        let plain = trailing_report(&a, &q, None)?;
        let shifted = trailing_report(&a, &q, Some(None))?;
        frac.trial();
        factor.trial();
        let floor = f64::EPSILON * a.lambda_max();
        for (u, v) in plain.records.iter().zip(&shifted.records) {
            total += 1;
            if u.exact < floor {
                unresolvable += 1;
            }
            if v.err_nys <= u.err_nys {
                better += 1;
            }
            ratios.push(u.err_nys / v.err_nys.max(f64::MIN_POSITIVE));
        }
    }
    let fraction = better as f64 / total as f64;
    let med = median(ratios);
    frac.observe(last_seed, 0.95 - fraction);
    frac.note = Some(format!(
        "fraction not worse = {fraction:.4}, required >= 0.95; \
         {unresolvable}/{total} trailing eigenvalues below u*lambda_1"
    ));
    factor.observe(last_seed, 2.0 - med);
    factor.note = Some(format!("median improvement = {med:.3e}, required >= 2"));
    Ok(vec![exact.finish(), frac.finish(), factor.finish()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_parse() {
        for s in [
            "all",
            "chain",
            "bounds",
            "identities",
            "angles",
            "trailing",
            "shift",
        ] {
            assert_eq!(s.parse::<Suite>().unwrap().name(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn tracker_reports_failing_seed() {
        let mut t = Tracker::new(Suite::Chain, "p", 1e-10);
        t.trial();
        t.observe(1, 1e-12);
        t.trial();
        t.observe(2, 1e-3);
        let r = t.finish();
        assert!(!r.passed);
        assert_eq!(r.failing_seed, Some(2));
        assert!(r.to_string().starts_with("[FAIL] chain/p trials=2"));
    }

    #[test]
    fn nan_counts_as_violation() {
        let mut t = Tracker::new(Suite::Bounds, "p", 1.0);
        t.observe(4, f64::NAN);
        assert!(!t.finish().passed);
    }

    #[test]
    fn explicit_trial_spectrum_is_valid() {
        let spec = trial_spectrum(SpectrumKind::Explicit, 20, 1e-3, 9);
        spec.validate().unwrap();
        let v = psd_extract::model::spectrum(&spec).unwrap();
        assert_eq!(v[0], 1.0);
        assert!(v.iter().all(|x| *x >= 1e-3));
    }

    #[test]
    fn small_chain_suite_passes() {
        let s = run_suite(
            Suite::Chain,
            &VerifyOptions {
                seed: 3,
                trials: Some(8),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(s.passed, "{:?}", s.properties);
    }
}
