//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints exactly one PASS/FAIL line; the process exits
//! nonzero when any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use psd_extract::extract::{self, DEFAULT_CHOL_TOL};
use psd_extract::model::operator_power;
use psd_extract::{
    bounds, dense, make_psd, matfile, random, subspaces, DenseMatrix, ErrorMode, ExtractionReport,
    Method, MethodSet, OrthonormalBasis, PsdOperator, SpectrumKind, SpectrumSpec,
};
use psd_extract_cli::verify::{angle_pairs, random_basis, trial_spectrum};

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

/// Seed, lambda_1, Nyström values, dense oracle eigenvalues, eigenvalues of `A - A<Q>`.
type OracleTrial = (u64, f64, Vec<f64>, Vec<f64>, Vec<f64>);

const KINDS: [SpectrumKind; 4] = [
    SpectrumKind::Exponential,
    SpectrumKind::Algebraic,
    SpectrumKind::Linear,
    SpectrumKind::Explicit,
];

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn values(a: &PsdOperator, q: &OrthonormalBasis, m: Method) -> Result<Vec<f64>, String> {
    Ok(extract::extract(a, q, m, DEFAULT_CHOL_TOL)
        .map_err(fail)?
        .values)
}

fn report(
    a: &PsdOperator,
    q: &OrthonormalBasis,
    shift: Option<Option<f64>>,
    mode: ErrorMode,
) -> Result<ExtractionReport, String> {
    let set = MethodSet::run(a, q, shift, DEFAULT_CHOL_TOL).map_err(fail)?;
    ExtractionReport::assemble(a, q, &set, mode, DEFAULT_CHOL_TOL).map_err(fail)
}

/// Largest observed violation together with the seed that produced it.
#[derive(Default)]
struct Worst {
    value: f64,
    seed: u64,
}

impl Worst {
    fn see(&mut self, seed: u64, v: f64) {
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v > self.value {
            self.value = v;
            self.seed = seed;
        }
    }

    fn check(&self, what: &str, tol: f64) -> Result<String, String> {
        let msg = format!(
            "{what} worst excess {:.3e} (seed {})",
            self.value, self.seed
        );
        if self.value <= tol {
            Ok(msg)
        } else {
            Err(msg)
        }
    }
}

fn generator_basis(
    a: &PsdOperator,
    k: usize,
    which: usize,
    seed: u64,
) -> Result<OrthonormalBasis, String> {
    match which % 4 {
        0 => subspaces::randomized_rangefinder(a, k, seed, 0).map_err(fail),
        1 => subspaces::epsilon_aligned_basis(a, k, 0.1, seed).map_err(fail),
        2 => subspaces::perturbed_trailing_basis(a, k, 0.01, seed).map_err(fail),
        _ => random_basis(a.dim(), k, seed).map_err(fail),
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut w = Worst::default();
    for t in 0..200u64 {
        let c = t as usize;
        let kind = KINDS[c % 4];
        let g = (c / 4) % 4;
        let n = if (c / 16).is_multiple_of(2) { 50 } else { 200 };
        let k = if (c / 32).is_multiple_of(2) { 5 } else { 20 };
        let seed = random::derive_seed(101, t);
        let a = make_psd(&trial_spectrum(kind, n, 1e-20, seed), seed).map_err(fail)?;
        let q = generator_basis(&a, k, g, random::derive_seed(seed, 1))?;
        let (rr, sv, ny) = (
            values(&a, &q, Method::Rr)?,
            values(&a, &q, Method::SvdQv)?,
            values(&a, &q, Method::Nys)?,
        );
        let l1 = a.lambda_max();
        for i in 0..k {
            let lam = a.eigenvalues()[i];
            w.see(seed, ny[i] - (lam + 1e-10 * l1));
            w.see(seed, (sv[i] - 1e-10 * l1) - ny[i]);
            w.see(seed, (rr[i] - 2e-10 * l1) - (sv[i] - 1e-10 * l1));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let msg = w.check("200 pairs, chain", 0.0)?;
    if secs < 60.0 {
        Ok(format!("{msg}, {secs:.1} s"))
    } else {
        Err(format!("{msg}, runtime {secs:.1} s exceeds 60 s"))
    }
}

fn oracle_trial(t: u64, lambda_min: f64) -> Result<OracleTrial, String> {
    let c = t as usize;
    let seed = random::derive_seed(202, t);
    let n = 20 + (c % 5) * 20;
    let k = 2 + c % 9;
    let a = make_psd(&trial_spectrum(KINDS[c % 4], n, lambda_min, seed), seed).map_err(fail)?;
    let q = generator_basis(&a, k, c / 4, random::derive_seed(seed, 1))?;
    let ny = values(&a, &q, Method::Nys)?;
    let am = a.dense().map_err(fail)?;
    let an = extract::nystrom_approximation_dense(&am, &q).map_err(fail)?;
    let (ev, _) = dense::sym_eig(&an).map_err(fail)?;
    let (gap, _) = dense::sym_eig(&(&am - &an)).map_err(fail)?;
    Ok((seed, a.lambda_max(), ny, ev, gap))
}

fn criterion_2() -> Outcome {
    let mut eig = Worst::default();
    let mut loewner = Worst::default();
    for t in 0..50u64 {
        let lambda_min = [1e-4, 1e-6, 1e-8][t as usize % 3];
        let (seed, l1, ny, ev, gap) = oracle_trial(t, lambda_min)?;
        for (x, y) in ny.iter().zip(&ev) {
            eig.see(seed, (x - y).abs() / l1);
        }
        loewner.see(seed, -gap[gap.len() - 1] / l1);
    }
    let mut oracle_breakdowns = 0;
    for t in 0..50u64 {
        let (_, l1, _, ev, _) = oracle_trial(t, 1e-20)?;
        if ev[0] > l1 * (1.0 + 1e-9) {
            oracle_breakdowns += 1;
        }
    }
    let a = eig.check("eigenvalues vs dense oracle", 1e-9)?;
    let b = loewner.check("min eig of A - A<Q> below zero", 1e-9)?;
    Ok(format!(
        "50 trials, lambda_min in [1e-8, 1e-4]; {a}; {b}; at lambda_min 1e-20 the \
         pseudoinverse oracle exceeds lambda_1 in {oracle_breakdowns}/50 trials"
    ))
}

fn criterion_3() -> Outcome {
    let mut sqrt_id = Worst::default();
    let mut sq_id = Worst::default();
    for t in 0..50u64 {
        let c = t as usize;
        let seed = random::derive_seed(303, t);
        let n = 30 + (c % 5) * 14;
        let k = 3 + c % 8;
        let lambda_min = [1e-2, 1e-3, 1e-4][c % 3];
        let a = make_psd(&trial_spectrum(KINDS[c % 4], n, lambda_min, seed), seed).map_err(fail)?;
        let qs = random::derive_seed(seed, 1);
        let q = if c.is_multiple_of(2) {
            subspaces::randomized_rangefinder(&a, k, qs, 0).map_err(fail)?
        } else {
            random_basis(n, k, qs).map_err(fail)?
        };
        let l1 = a.lambda_max();
        let rr = values(&a, &q, Method::Rr)?;
        let sv = values(&a, &q, Method::SvdQv)?;
        let half = operator_power(&a, 0.5).map_err(fail)?;
        let square = operator_power(&a, 2.0).map_err(fail)?;
        let sv_half = values(&half, &q, Method::SvdQv)?;
        let rr_square = values(&square, &q, Method::Rr)?;
        for i in 0..k {
            sqrt_id.see(seed, (rr[i] - sv_half[i] * sv_half[i]).abs() / l1);
            sq_id.see(seed, (sv[i] - rr_square[i].max(0.0).sqrt()).abs() / l1);
        }
    }
    let a = sqrt_id.check("rr(A) vs svd(A^1/2)^2", 1e-10)?;
    let b = sq_id.check("svd(A) vs sqrt(rr(A^2))", 1e-10)?;
    Ok(format!("50 trials, lambda_min in [1e-4, 1e-2]; {a}; {b}"))
}

struct BoundSetting {
    seed: u64,
    a: PsdOperator,
    report: ExtractionReport,
}

fn bound_settings() -> Result<Vec<BoundSetting>, String> {
    (0..5u64)
        .map(|t| {
            let seed = random::derive_seed(404, t);
            let a = make_psd(&SpectrumSpec::exponential(400, 1.0, 1e-20), seed).map_err(fail)?;
            let q = subspaces::epsilon_aligned_basis(&a, 80, 0.01, random::derive_seed(seed, 1))
                .map_err(fail)?;
            let report = report(&a, &q, None, ErrorMode::Leading)?;
            Ok(BoundSetting { seed, a, report })
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let settings = bound_settings()?;
    let (c_rr, _) = bounds::rr_bound(settings[0].a.eigenvalues(), 80, 0.01).map_err(fail)?;
    let expected = 2.0002e-4;
    let formula_gap = (c_rr * 1e-4 - expected).abs();
    let mut rr = Worst::default();
    let mut ny = Worst::default();
    let mut covered = 0usize;
    for s in &settings {
        let l1 = s.a.lambda_max();
        for rec in &s.report.records {
            let b = rec.bound_rr.ok_or("missing RR bound")?;
            rr.see(s.seed, (rec.err_rr - b) / l1);
            if let Some(b) = rec.bound_nys {
                covered += 1;
                ny.see(s.seed, (rec.err_nys - b) / l1);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let a = rr.check("RR error vs bound", 0.0)?;
    let b = ny.check("Nystrom error vs bound", 0.0)?;
    if formula_gap > 1e-8 {
        return Err(format!(
            "C_RR eps^2 lambda_1 = {:.6e}, expected about {expected:.4e}",
            c_rr * 1e-4
        ));
    }
    if covered == 0 {
        return Err("no index has alpha_i > 0".into());
    }
    if secs >= 120.0 {
        return Err(format!("runtime {secs:.1} s exceeds 120 s"));
    }
    Ok(format!(
        "5 seeds; RR bound {:.6e}; {a}; {b} on {covered} indices; {secs:.1} s",
        c_rr * 1e-4
    ))
}

fn nys_rr_ratio(seed: u64) -> Result<f64, String> {
    let a = make_psd(&SpectrumSpec::exponential(400, 1.0, 1e-20), seed).map_err(fail)?;
    let q = subspaces::epsilon_aligned_basis(&a, 80, 0.01, random::derive_seed(seed, 1))
        .map_err(fail)?;
    let (oracle, _) = dense::sym_eig(&a.dense().map_err(fail)?).map_err(fail)?;
    let rr = values(&a, &q, Method::Rr)?;
    let ny = values(&a, &q, Method::Nys)?;
    let err_rr = (oracle[0] - rr[0]).abs();
    let err_ny = (oracle[0] - ny[0]).abs();
    Ok(err_rr / err_ny.max(f64::MIN_POSITIVE))
}

fn criterion_5() -> Outcome {
    let mut lines = Vec::new();
    for t in 0..5u64 {
        let seed = random::derive_seed(404, t);
        let ratio = nys_rr_ratio(seed)?;
        if ratio >= 10.0 {
            lines.push(format!("{ratio:.2e}"));
            continue;
        }
        let reseed = random::derive_seed(seed, 99);
        let again = nys_rr_ratio(reseed)?;
        if again < 10.0 {
            return Err(format!(
                "ratio {ratio:.3e} at seed {seed}, {again:.3e} after re-seed {reseed}"
            ));
        }
        lines.push(format!("{again:.2e} (re-seeded {seed} -> {reseed})"));
    }
    Ok(format!(
        "err_rr/err_nys at i = 1 against dense eigensolve: {}",
        lines.join(", ")
    ))
}

fn criterion_6() -> Outcome {
    let mut w = Worst::default();
    for t in 0..100u64 {
        let c = t as usize;
        let seed = random::derive_seed(606, t);
        let n = 20 + (c % 4) * 20;
        let k = 2 + c % 9;
        let a = make_psd(&trial_spectrum(KINDS[c % 4], n, 1e-20, seed), seed).map_err(fail)?;
        let q = generator_basis(&a, k, c / 4, random::derive_seed(seed, 1))?;
        let rr = values(&a, &q, Method::Rr)?;
        let l1 = a.lambda_max();
        for (i, v) in rr.iter().enumerate() {
            w.see(seed, (a.eigenvalues()[n - k + i] - 1e-10 * l1) - v);
        }
    }
    w.check("100 trials, floor", 0.0)
}

fn trailing_setting(t: u64) -> Result<(u64, PsdOperator, OrthonormalBasis), String> {
    let seed = random::derive_seed(707, t);
    let a = make_psd(&SpectrumSpec::algebraic(400, 1.0, 1e-20), seed).map_err(fail)?;
    let q = subspaces::perturbed_trailing_basis(&a, 80, 0.01, random::derive_seed(seed, 1))
        .map_err(fail)?;
    Ok((seed, a, q))
}

fn criterion_7() -> Outcome {
    let mut w = Worst::default();
    for t in 0..5 {
        let (seed, a, q) = trailing_setting(t)?;
        let r = report(&a, &q, None, ErrorMode::Trailing)?;
        let l1 = a.lambda_max();
        for rec in &r.records {
            w.see(seed, rec.err_rr - (rec.err_svd + 1e-10 * l1));
            w.see(
                seed,
                (rec.err_svd + 1e-10 * l1) - (rec.err_nys + 2e-10 * l1),
            );
        }
    }
    w.check("5 seeds, reverse order", 0.0)
}

fn criterion_8() -> Outcome {
    let (mut not_worse, mut total) = (0usize, 0usize);
    let mut ratios = Vec::new();
    let mut unresolvable = 0usize;
    for t in 0..5 {
        let (_, a, q) = trailing_setting(t)?;
        let plain = report(&a, &q, None, ErrorMode::Trailing)?;
        let shifted = report(&a, &q, Some(None), ErrorMode::Trailing)?;
        let floor = f64::EPSILON * a.lambda_max();
        for (u, v) in plain.records.iter().zip(&shifted.records) {
            total += 1;
            if v.err_nys <= u.err_nys {
                not_worse += 1;
            }
            if u.exact < floor {
                unresolvable += 1;
            }
            ratios.push(u.err_nys / v.err_nys.max(f64::MIN_POSITIVE));
        }
    }
    ratios.sort_by(f64::total_cmp);
    let m = ratios.len() / 2;
    let median = if ratios.len() % 2 == 1 {
        ratios[m]
    } else {
        0.5 * (ratios[m - 1] + ratios[m])
    };
    let fraction = not_worse as f64 / total as f64;
    let msg = format!(
        "shifted Nystrom not worse on {not_worse}/{total} = {fraction:.3} (need >= 0.95), \
         median improvement {median:.3e} (need >= 2); {unresolvable}/{total} trailing \
         eigenvalues lie below u*lambda_1"
    );
    if fraction >= 0.95 && median >= 2.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_9() -> Outcome {
    let mut u1 = Worst::default();
    let mut u2 = Worst::default();
    for t in 0..50u64 {
        let c = t as usize;
        let seed = random::derive_seed(909, t);
        let n = 40 + (c % 3) * 30;
        let k = 3 + c % 10;
        let a = make_psd(&trial_spectrum(KINDS[c % 4], n, 1e-20, seed), seed).map_err(fail)?;
        let q = random_basis(n, k, random::derive_seed(seed, 1)).map_err(fail)?;
        let [q1, aq1, q2, aq2] = angle_pairs(&a, &q).map_err(fail)?;
        u1.see(seed, aq1 - (q1 + 1e-10));
        u2.see(seed, q2 - (aq2 + 1e-10));
    }
    let a = u1.check("sin(AQ, U1) vs sin(Q, U1)", 0.0)?;
    let b = u2.check("sin(Q, U2) vs sin(AQ, U2)", 0.0)?;
    Ok(format!("50 random bases; {a}; {b}"))
}

fn criterion_10() -> Outcome {
    let mut w = Worst::default();
    for t in 0..50u64 {
        let c = t as usize;
        let seed = random::derive_seed(1010, t);
        let n = 30 + (c % 4) * 30;
        let k = 2 + c % 12;
        let a = make_psd(&trial_spectrum(KINDS[c % 4], n, 1e-20, seed), seed).map_err(fail)?;
        let q = generator_basis(&a, k, c / 4, random::derive_seed(seed, 1))?;
        let g = random::gaussian_matrix(k, k, random::derive_seed(seed, 2));
        let (rot, _) = dense::thin_qr(&g).map_err(fail)?;
        let qr = q.rotated(&rot).map_err(fail)?;
        let l1 = a.lambda_max();
        for m in [Method::Rr, Method::SvdQv, Method::SvdU, Method::Nys] {
            let before = values(&a, &q, m)?;
            let after = values(&a, &qr, m)?;
            for (x, y) in before.iter().zip(&after) {
                w.see(seed, (x - y).abs() / l1);
            }
        }
    }
    w.check("50 rotations, value change", 1e-10)
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_psd-extract"))
}

fn run_ok(cmd: &mut Command) -> Result<Vec<u8>, String> {
    let out = cmd.env_remove("PSD_EXTRACT_OUT").output().map_err(fail)?;
    if !out.status.success() {
        return Err(format!(
            "{:?} exited with {}: {}",
            cmd,
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn data_rows(text: &str) -> Vec<String> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

/// Same header, same blank fields, numbers within `tol` absolute.
fn golden_match(actual: &str, golden: &str, tol: f64) -> Result<(), String> {
    let (a, g) = (data_rows(actual), data_rows(golden));
    if a.len() != g.len() {
        return Err(format!("{} rows, golden has {}", a.len(), g.len()));
    }
    if a[0] != g[0] {
        return Err(format!("header '{}' differs from golden", a[0]));
    }
    for (r, (x, y)) in a.iter().zip(&g).enumerate().skip(1) {
        let (fx, fy): (Vec<&str>, Vec<&str>) = (x.split(',').collect(), y.split(',').collect());
        if fx.len() != fy.len() {
            return Err(format!(
                "row {r} has {} fields, golden {}",
                fx.len(),
                fy.len()
            ));
        }
        for (c, (p, q)) in fx.iter().zip(&fy).enumerate() {
            if p.is_empty() != q.is_empty() {
                return Err(format!("row {r} column {c}: '{p}' vs golden '{q}'"));
            }
            if p.is_empty() {
                continue;
            }
            let (p, q): (f64, f64) = (p.parse().map_err(fail)?, q.parse().map_err(fail)?);
            if (p - q).abs() > tol {
                return Err(format!("row {r} column {c}: {p:e} vs golden {q:e}"));
            }
        }
    }
    Ok(())
}

fn write_diag_inputs(dir: &Path) -> Result<(), String> {
    let a = PsdOperator::from_parts(DenseMatrix::identity(3, 3), vec![4.0, 1.0, 0.25], 0, None)
        .map_err(fail)?;
    let q = DenseMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.8, 0.0, 0.6]);
    let q = OrthonormalBasis::external(q).map_err(fail)?;
    matfile::save_operator(dir.join("diag.psdm"), &a).map_err(fail)?;
    matfile::save_basis(dir.join("q.psdm"), &q).map_err(fail)
}

fn criterion_11() -> Outcome {
    let tmp = tempfile::tempdir().map_err(fail)?;
    let dir = tmp.path();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let read = |p: &Path| std::fs::read_to_string(p).map_err(fail);

    let small = [
        "extract",
        "--n",
        "12",
        "--k",
        "3",
        "--seed",
        "42",
        "--subspace",
        "epsilon",
        "--eps",
        "0.1",
        "--spectrum",
        "exponential",
        "--lambda-min",
        "1e-8",
    ];
    let first = run_ok(bin().args(small))?;
    let second = run_ok(bin().args(small))?;
    if first != second {
        return Err("two seeded extract runs differ".into());
    }
    let first = String::from_utf8(first).map_err(fail)?;
    golden_match(&first, &read(&golden.join("seeded_small.csv"))?, 1e-12)
        .map_err(|e| format!("seeded golden: {e}"))?;

    for run in ["a", "b"] {
        run_ok(
            bin()
                .args([
                    "experiment",
                    "fig1",
                    "--n",
                    "60",
                    "--k",
                    "12",
                    "--seed",
                    "5",
                    "--out",
                ])
                .arg(dir.join(run)),
        )?;
    }
    let mut compared = 0;
    for entry in std::fs::read_dir(dir.join("a")).map_err(fail)? {
        let name = entry.map_err(fail)?.file_name();
        let (x, y) = (
            read(&dir.join("a").join(&name))?,
            read(&dir.join("b").join(&name))?,
        );
        if data_rows(&x) != data_rows(&y) {
            return Err(format!("experiment output {name:?} differs between runs"));
        }
        compared += 1;
    }
    if compared == 0 {
        return Err("experiment wrote no files".into());
    }

    write_diag_inputs(dir)?;
    let oracle = run_ok(
        bin()
            .args(["extract", "--k", "2", "--matrix"])
            .arg(dir.join("diag.psdm"))
            .arg("--basis")
            .arg(dir.join("q.psdm")),
    )?;
    golden_match(
        &String::from_utf8(oracle).map_err(fail)?,
        &read(&golden.join("diag_oracle.csv"))?,
        1e-12,
    )
    .map_err(|e| format!("oracle golden: {e}"))?;
    Ok(format!(
        "repeat runs identical (extract, {compared} experiment files); seeded and oracle goldens match"
    ))
}

fn main() {
    let criteria: [(&str, Check); 11] = [
        ("chain inequality", criterion_1),
        ("dense Nystrom oracle and Loewner order", criterion_2),
        ("square-root and square identities", criterion_3),
        ("leading error bounds", criterion_4),
        ("Nystrom beats RR at i = 1", criterion_5),
        ("RR trailing floor", criterion_6),
        ("trailing reversal", criterion_7),
        ("shift remedy", criterion_8),
        ("angle monotonicity", criterion_9),
        ("basis invariance", criterion_10),
        ("reproducibility and schema", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {:>2} PASS  {name}: {msg} [{secs:.1} s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {msg} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
