//! Subcommand implementations behind the `gls` binary.
//!
//! Each `cmd_*` function takes a [`RunConfig`], validates it, writes its
//! artifacts and returns the process exit status. Errors go to standard error
//! as a single line of the form `error[<kind>]: <message>`.

pub mod config;

use std::fs;
use std::path::Path;

use gls_core::ggkb::ggkb_run;
use gls_core::glsqr::{certify_solution, glsqr_solve_with, operator_norm, GlsqrOptions};
use gls_core::gsvd::gsvd_pair;
use gls_core::io::{
    dump_bidiag, export_gsvd, export_problem, read_dense, read_vector, write_dense, write_vector,
    GsvdSidecar,
};
use gls_core::linalg::vector;
use gls_core::problems::{generate, sprandn_like};
use gls_core::wpinv::{check_gmpe, wpinv_matrix, GlsProblem, WpinvMethod};
use gls_core::{DenseMatrix, GlsError, Result};
use serde_json::{json, Value};

pub use config::{Command, GdagSpec, RunConfig};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
/// A certification check ran and failed.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Bad input: missing or malformed files, invalid configuration.
pub const EXIT_INPUT: i32 = 2;
/// A numerical routine failed on valid input.
pub const EXIT_NUMERICAL: i32 = 3;

pub fn error_kind(e: &GlsError) -> &'static str {
    match e {
        GlsError::Io { .. } => "io",
        GlsError::Parse { .. } => "parse",
        GlsError::Config(_) => "config",
        GlsError::DimensionMismatch(_) => "dimension",
        GlsError::NonFinite { .. } => "non_finite",
        GlsError::InvalidArgument(_) => "invalid_argument",
        GlsError::MethodUnsupported(_) => "unsupported",
        GlsError::ValidationFailure { .. } => "validation",
        GlsError::FactorizationFailure { .. }
        | GlsError::IndefiniteMatrix { .. }
        | GlsError::NegativeEigenvalue { .. }
        | GlsError::NumericalBreakdown { .. } => "numerical",
    }
}

pub fn exit_code(e: &GlsError) -> i32 {
    match error_kind(e) {
        "numerical" | "validation" => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    }
}

/// The single-line error report written to standard error.
pub fn error_line(e: &GlsError) -> String {
    let msg = e.to_string().replace(['\n', '\r'], " ");
    format!("error[{}]: {msg}", error_kind(e))
}

fn finish(result: Result<i32>) -> i32 {
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            exit_code(&e)
        }
    }
}

pub fn run(cmd: Command, cfg: &RunConfig) -> i32 {
    match cmd {
        Command::Solve => cmd_solve(cfg),
        Command::Wpinv => cmd_wpinv(cfg),
        Command::Gsvd => cmd_gsvd(cfg),
        Command::CheckMpe => cmd_check_mpe(cfg),
        Command::GenProblem => cmd_gen_problem(cfg),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| GlsError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_summary(dir: &Path, name: &str, summary: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(summary).expect("json values serialize") + "\n";
    let path = dir.join(name);
    fs::write(&path, &text).map_err(|source| GlsError::Io { path, source })?;
    print!("{text}");
    Ok(())
}

/// Reads A, optional M, optional L (identity when absent) and optional b
/// (zero when absent).
fn load_problem(cfg: &RunConfig) -> Result<GlsProblem> {
    let a = read_dense(cfg.a.as_deref().expect("validated"))?;
    let (m, n) = a.shape();
    let l = match &cfg.l {
        Some(p) => read_dense(p)?,
        None => DenseMatrix::identity(n),
    };
    let w = cfg.m.as_deref().map(read_dense).transpose()?;
    let b = match &cfg.b {
        Some(p) => read_vector(p)?,
        None => vec![0.0; m],
    };
    Ok(GlsProblem::new(a, w, l, b)?.with_rank_tolerance(cfg.rank_tolerance()?))
}

fn method_name(m: WpinvMethod) -> String {
    match m {
        WpinvMethod::Elden => "elden".into(),
        WpinvMethod::Gsvd => "gsvd".into(),
        WpinvMethod::Limit(d) => format!("limit:{d:e}"),
    }
}

/// Runs gLSQR; writes `x.mtx`, `history.csv`, `summary.json` and, on request,
/// a `bidiag/` dump.
pub fn cmd_solve(cfg: &RunConfig) -> i32 {
    finish(solve(cfg))
}

fn solve(cfg: &RunConfig) -> Result<i32> {
    cfg.validate(Command::Solve)?;
    let prob = load_problem(cfg)?;
    let x_true = match &cfg.x_true {
        Some(p) => {
            let v = read_vector(p)?;
            if v.len() != prob.ncols() {
                return Err(GlsError::DimensionMismatch(format!(
                    "x_true has length {}, A has {} columns",
                    v.len(),
                    prob.ncols()
                )));
            }
            Some(v)
        }
        None => None,
    };
    let spec = cfg.gdag_spec()?;
    let strategy = spec.build(&prob)?;
    let norm = operator_norm(&prob, &strategy, cfg.norm_method()?)?;
    let opts = GlsqrOptions {
        tol: cfg.stop_tol()?,
        max_iter: cfg.max_iter,
        true_residual: cfg.true_residual.unwrap_or(false),
        ..GlsqrOptions::default()
    };
    let report = glsqr_solve_with(&prob, &strategy, &opts, norm)?;
    let certify_tol = cfg.certify_tol.unwrap_or(config::DEFAULT_TOL_CERTIFY);
    let certified = certify_solution(&prob, &report, certify_tol)?;

    let out = cfg.out_dir();
    create_dir(&out)?;
    write_vector(&out.join("x.mtx"), &report.x)?;
    report.write_history_csv(&out.join("history.csv"))?;
    if cfg.dump_bidiag.unwrap_or(false) {
        let state = ggkb_run(&prob, &strategy, report.iterations, opts.reorthogonalize)?;
        dump_bidiag(&out.join("bidiag"), &state)?;
    }

    let rel_error = x_true.as_ref().map(|xt| {
        let nt = vector::norm2(xt);
        let err = vector::norm2(&vector::sub(&report.x, xt));
        if nt > 0.0 {
            err / nt
        } else {
            err
        }
    });
    let summary = json!({
        "schema": SCHEMA_VERSION,
        "command": "solve",
        "m": prob.nrows(),
        "n": prob.ncols(),
        "gdag": strategy.name(),
        "inner_tau": strategy.inner_tau(),
        "inner_cap_hits": report.inner_cap_hits,
        "tol": opts.tol,
        "iterations": report.iterations,
        "stop_reason": report.stop_reason.as_str(),
        "final_estimate": report.final_estimate(),
        "operator_norm": serde_json::to_value(report.operator_norm).expect("serializes"),
        "k_t": report.k_t,
        "certified": certified,
        "certify_tol": certify_tol,
        "rel_error": rel_error,
    });
    write_summary(&out, "summary.json", &summary)?;
    Ok(EXIT_OK)
}

/// Forms `A_ML†` directly; writes `X.mtx`, `x.mtx` (when b is given) and
/// `summary.json`.
pub fn cmd_wpinv(cfg: &RunConfig) -> i32 {
    finish(wpinv(cfg))
}

fn wpinv(cfg: &RunConfig) -> Result<i32> {
    cfg.validate(Command::Wpinv)?;
    let prob = load_problem(cfg)?;
    let method = cfg.wpinv_method()?;
    let x_mat = wpinv_matrix(&prob, method)?;
    let out = cfg.out_dir();
    create_dir(&out)?;
    write_dense(&out.join("X.mtx"), &x_mat)?;
    let x_norm = if cfg.b.is_some() {
        let x = x_mat.matvec(prob.b());
        write_vector(&out.join("x.mtx"), &x)?;
        Some(vector::norm2(&x))
    } else {
        None
    };
    let summary = json!({
        "schema": SCHEMA_VERSION,
        "command": "wpinv",
        "m": prob.nrows(),
        "n": prob.ncols(),
        "method": method_name(method),
        "weighted": !prob.weight_is_identity(),
        "x_norm": x_norm,
        "X_norm_fro": x_mat.norm_fro(),
    });
    write_summary(&out, "summary.json", &summary)?;
    Ok(EXIT_OK)
}

/// Exports the GSVD factors of `{A, L}` plus `gsvd.json`.
pub fn cmd_gsvd(cfg: &RunConfig) -> i32 {
    finish(gsvd(cfg))
}

fn gsvd(cfg: &RunConfig) -> Result<i32> {
    cfg.validate(Command::Gsvd)?;
    let a = read_dense(cfg.a.as_deref().expect("validated"))?;
    let l = match &cfg.l {
        Some(p) => read_dense(p)?,
        None => DenseMatrix::identity(a.cols()),
    };
    if l.cols() != a.cols() {
        return Err(GlsError::DimensionMismatch(format!(
            "L has {} columns, A has {}",
            l.cols(),
            a.cols()
        )));
    }
    let f = gsvd_pair(&a, &l)?;
    let out = cfg.out_dir();
    export_gsvd(&out, &f)?;
    let (res_a, res_l) = f.residuals(&a, &l);
    let side = GsvdSidecar::from(&f);
    let summary = json!({
        "schema": SCHEMA_VERSION,
        "command": "gsvd",
        "r": side.r,
        "q1": side.q1,
        "q2": side.q2,
        "q3": side.q3,
        "residual_a": res_a,
        "residual_l": res_l,
    });
    write_summary(&out, "summary.json", &summary)?;
    Ok(EXIT_OK)
}

const IDENTITY_LABELS: [&str; 5] = [
    "XAX = X",
    "MAXA = MA",
    "(M'MAX)' = M'MAX",
    "(GXAG+)' = XA",
    "XM+M = X",
];

/// Prints one line per identity and exits with [`EXIT_CHECK_FAILED`] unless
/// all five pass. With `--out`, the report is also written as `mpe.json`.
pub fn cmd_check_mpe(cfg: &RunConfig) -> i32 {
    finish(check_mpe(cfg))
}

fn check_mpe(cfg: &RunConfig) -> Result<i32> {
    cfg.validate(Command::CheckMpe)?;
    let prob = load_problem(cfg)?;
    let x = read_dense(cfg.x.as_deref().expect("validated"))?;
    let tol = cfg.tol.unwrap_or(config::DEFAULT_TOL_MPE);
    let report = check_gmpe(&prob, &x, tol)?;
    if let Some(dir) = &cfg.out {
        create_dir(dir)?;
        let path = dir.join("mpe.json");
        fs::write(&path, report.to_json() + "\n").map_err(|source| GlsError::Io { path, source })?;
    }
    for (i, (r, label)) in report.identities.iter().zip(IDENTITY_LABELS).enumerate() {
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        println!("{} {label:<18} {:>10.3e} {verdict}", i + 1, r.residual);
    }
    Ok(if report.all_passed() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}

/// Builds a planted-solution problem and writes it as a directory. The
/// synthetic A is drawn from `seed + 1`, the noise from `seed`.
pub fn cmd_gen_problem(cfg: &RunConfig) -> i32 {
    finish(gen_problem(cfg))
}

fn gen_problem(cfg: &RunConfig) -> Result<i32> {
    cfg.validate(Command::GenProblem)?;
    let seed = cfg.seed.unwrap_or(0);
    let a = match &cfg.a {
        Some(p) => read_dense(p)?,
        None => {
            let n = cfg.n.expect("validated");
            let m = cfg.rows.unwrap_or(n);
            let rank = cfg.rank.unwrap_or(m.min(n));
            sprandn_like(m, n, cfg.density.unwrap_or(0.5), rank, seed.wrapping_add(1))
                .map_err(|e| GlsError::Config(e.to_string()))?
        }
    };
    let lkind = cfg.regularizer()?;
    let func = cfg.function()?;
    let gp = generate(a, &lkind, func, seed)?;
    let out = cfg.out.clone().unwrap_or_else(|| "problem".into());
    export_problem(&out, &gp)?;
    let summary = json!({
        "schema": SCHEMA_VERSION,
        "command": "gen-problem",
        "m": gp.problem.nrows(),
        "n": gp.problem.ncols(),
        "seed": seed,
        "func": func.name(),
        "Lkind": gp.l_kind,
        "x_true_norm": vector::norm2(&gp.x_true),
        "z_norm": vector::norm2(&gp.z),
        "validated": true,
    });
    write_summary(&out, "summary.json", &summary)?;
    Ok(EXIT_OK)
}
