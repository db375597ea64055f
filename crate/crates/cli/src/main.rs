use std::path::PathBuf;
use std::process::exit;

use clap::{Args, Parser, Subcommand};
use gls_cli::{error_line, exit_code, run, Command, RunConfig};

#[derive(Parser)]
#[command(name = "gls", version, about = "Weighted pseudoinverse and gLSQR toolkit")]
struct Cli {
    /// JSON file with default settings; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args, Default)]
struct ProblemArgs {
    #[arg(long = "A", value_name = "A.mtx")]
    a: Option<PathBuf>,
    /// Weight matrix; identity when omitted.
    #[arg(long = "M", value_name = "M.mtx")]
    m: Option<PathBuf>,
    /// Regularization matrix; identity when omitted.
    #[arg(long = "L", value_name = "L.mtx")]
    l: Option<PathBuf>,
    #[arg(long, value_name = "b.mtx")]
    b: Option<PathBuf>,
    /// Relative rank cutoff (overrides WPINV_TOL_RANK).
    #[arg(long)]
    rank_tol: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Sub {
    /// Solve the generalized least-squares problem with gLSQR.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Stopping tolerance (overrides WPINV_TOL_STOP).
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// G† back-end: dense, chol or lsqr:TAU.
        #[arg(long)]
        gdag: Option<String>,
        /// Operator norm source: auto, gsvd or power.
        #[arg(long)]
        norm: Option<String>,
        /// Reference solution; the summary then reports the relative error.
        #[arg(long, value_name = "x_true.mtx")]
        x_true: Option<PathBuf>,
        #[arg(long)]
        certify_tol: Option<f64>,
        /// Also record the directly evaluated residual in the history.
        #[arg(long)]
        true_residual: bool,
        /// Dump alphas, betas, V and U~ into OUT/bidiag.
        #[arg(long)]
        dump_bidiag: bool,
    },
    /// Form A_ML† directly.
    Wpinv {
        #[command(flatten)]
        problem: ProblemArgs,
        /// elden, gsvd or limit:DELTA.
        #[arg(long)]
        method: Option<String>,
    },
    /// Export the GSVD of {A, L}.
    Gsvd {
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Check a candidate X against the generalized Moore-Penrose equations.
    CheckMpe {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long = "X", value_name = "X.mtx")]
        x: Option<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Generate a test problem with a planted minimum-norm solution.
    GenProblem {
        /// Existing A; a seeded sparse matrix is drawn when omitted.
        #[arg(long = "A", value_name = "A.mtx")]
        a: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        /// Row count of the synthetic A (default n).
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        density: Option<f64>,
        /// l1, l2 or identity.
        #[arg(long = "L")]
        lkind: Option<String>,
        /// ramp, cubic or trig.
        #[arg(long)]
        func: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn problem_config(p: ProblemArgs) -> RunConfig {
    RunConfig {
        a: p.a,
        m: p.m,
        l: p.l,
        b: p.b,
        rank_tol: p.rank_tol,
        out: p.out,
        ..RunConfig::default()
    }
}

fn flag(set: bool) -> Option<bool> {
    set.then_some(true)
}

fn main() {
    let cli = Cli::parse();
    let (cmd, flags) = match cli.command {
        Sub::Solve {
            problem,
            tol,
            max_iter,
            gdag,
            norm,
            x_true,
            certify_tol,
            true_residual,
            dump_bidiag,
        } => (
            Command::Solve,
            RunConfig {
                tol,
                max_iter,
                gdag,
                norm,
                x_true,
                certify_tol,
                true_residual: flag(true_residual),
                dump_bidiag: flag(dump_bidiag),
                ..problem_config(problem)
            },
        ),
        Sub::Wpinv { problem, method } => (
            Command::Wpinv,
            RunConfig {
                method,
                ..problem_config(problem)
            },
        ),
        Sub::Gsvd { problem } => (Command::Gsvd, problem_config(problem)),
        Sub::CheckMpe { problem, x, tol } => (
            Command::CheckMpe,
            RunConfig {
                x,
                tol,
                ..problem_config(problem)
            },
        ),
        Sub::GenProblem {
            a,
            n,
            m,
            rank,
            density,
            lkind,
            func,
            seed,
            out,
        } => (
            Command::GenProblem,
            RunConfig {
                a,
                n,
                rows: m,
                rank,
                density,
                lkind,
                func,
                seed,
                out,
                ..RunConfig::default()
            },
        ),
    };
    let cfg = match cli.config {
        Some(path) => match RunConfig::load(&path) {
            Ok(file) => flags.over(file),
            Err(e) => {
                eprintln!("{}", error_line(&e));
                exit(exit_code(&e));
            }
        },
        None => flags,
    };
    exit(run(cmd, &cfg));
}
