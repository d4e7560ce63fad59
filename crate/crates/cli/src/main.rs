//! `rws`: solve, sweep, verify and inspect forced resonant wave problems.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rws_core::error::{EXIT_NONCONVERGENCE, EXIT_VERIFICATION};
use rws_core::harness::{self, Problem, RunConfig, DEFAULTS_HELP};
use rws_core::Error;

#[derive(Parser)]
#[command(name = "rws", version, about = "Time-periodic solutions of u_tt - u_xx = eps f(t, x, u) on T x (0, pi)")]
#[command(after_help = concat!(
    "Exit codes: 0 success, 2 configuration error, 3 solver non-convergence, 4 verification failure.\n",
    "Outputs go to <outdir>/<run-id>/; RWS_OUT overrides the output directory."
))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve at one epsilon and persist u, v, w (and H) with a report.
    #[command(after_help = DEFAULTS_HELP)]
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        eps: f64,
    },
    /// Solve at every configured epsilon and fit the scaling slopes.
    #[command(after_help = DEFAULTS_HELP)]
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Construct H with box H = h for a resonant forcing and re-verify it.
    #[command(name = "build-h", after_help = DEFAULTS_HELP)]
    BuildH {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the verification suites (identities, operators, hbuilder, holder) or one named check.
    #[command(after_help = DEFAULTS_HELP)]
    Verify {
        #[arg(long)]
        suite: Option<String>,
        /// Configuration to verify against; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the truncation, the inverse bound cbar and the contraction constants C0 and eps0.
    #[command(after_help = DEFAULTS_HELP)]
    Info {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load(path: Option<&Path>) -> Result<RunConfig, Error> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

/// Print the error, record it in `dir` when given, and return its exit code.
fn fail(err: Error, cfg: Option<&RunConfig>, dir: Option<&Path>) -> ExitCode {
    eprintln!("error: {err}");
    if let (Some(cfg), Some(dir)) = (cfg, dir) {
        match harness::persist_error(cfg, &err, dir) {
            Ok(()) => eprintln!("error record: {}", dir.join("error.json").display()),
            Err(e) => eprintln!("could not write error record: {e}"),
        }
    }
    code(err.exit_code())
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn solve(config: &Path, eps: f64) -> ExitCode {
    let cfg = match RunConfig::load(config) {
        Ok(c) => c,
        Err(e) => return fail(e, None, None),
    };
    let dir = harness::run_dir(&cfg, "solve", Some(eps));
    let (problem, out) = match Problem::new(&cfg).and_then(|p| p.solve(&cfg, eps).map(|o| (p, o))) {
        Ok(v) => v,
        Err(e) => return fail(e, Some(&cfg), Some(&dir)),
    };
    if let Err(e) = harness::persist_solve(&cfg, &out, &problem.disc, &dir) {
        return fail(e, None, None);
    }
    let r = &out.report;
    println!("run: {}", dir.display());
    println!(
        "eps = {:e} ({} frame, inner eps = {:e}): |u|_Linf = {:.6e}, weak residual = {:.3e}, interior = {}, converged = {}",
        r.epsilon, r.frame, r.eps_inner, r.u_norms.linf, r.weak_residual, r.interior, r.converged
    );
    if r.beyond_proven_bound {
        println!("note: |inner eps| exceeds the sampled contraction threshold eps0 = {:.3e}", r.eps0);
    }
    if r.converged {
        ExitCode::SUCCESS
    } else {
        eprintln!("minimisation did not converge (gradient norm {:.3e})", r.grad_h1_norm);
        code(EXIT_NONCONVERGENCE)
    }
}

fn sweep(config: &Path) -> ExitCode {
    let cfg = match RunConfig::load(config) {
        Ok(c) => c,
        Err(e) => return fail(e, None, None),
    };
    let dir = harness::run_dir(&cfg, "sweep", None);
    let out = match harness::run_sweep(&cfg) {
        Ok(o) => o,
        Err(e) => return fail(e, Some(&cfg), Some(&dir)),
    };
    if let Err(e) = harness::persist_sweep(&cfg, &out, &dir) {
        return fail(e, None, None);
    }
    println!("run: {}", dir.display());
    for r in &out.rows {
        println!(
            "eps = {:>12.5e}  |u|_Linf = {:.6e}  |w|_L2 = {:.6e}  residual = {:.3e}  {}",
            r.epsilon, r.u_linf, r.w_l2, r.weak_residual, r.status
        );
    }
    let show = |s: Option<f64>| s.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    println!(
        "slope log|u|_Linf vs log|eps| = {}, slope log|w|_L2 vs log|{}| = {}",
        show(out.fit.slope_u_linf),
        out.fit.w_abscissa,
        show(out.fit.slope_w_l2)
    );
    if let Some(note) = &out.fit.note {
        println!("note: {note}");
    }
    if let Some((eps, err)) = out.failures.first() {
        eprintln!("error at eps = {eps:e}: {err}");
        return code(err.exit_code());
    }
    if out.all_converged() {
        ExitCode::SUCCESS
    } else {
        code(EXIT_NONCONVERGENCE)
    }
}

fn build_h(config: &Path) -> ExitCode {
    let cfg = match RunConfig::load(config) {
        Ok(c) => c,
        Err(e) => return fail(e, None, None),
    };
    let dir = harness::run_dir(&cfg, "build-h", None);
    let (res, report) = match harness::run_build_h(&cfg) {
        Ok(v) => v,
        Err(e) => return fail(e, Some(&cfg), Some(&dir)),
    };
    if let Err(e) = harness::persist_build_h(&cfg, &res, &report, &dir) {
        return fail(e, None, None);
    }
    println!("run: {}", dir.display());
    println!("kappa = {:.12}, c = {:.12e}, weak residual = {:.3e}", res.kappa, res.c_value, res.weak_residual);
    for c in &report.checks {
        println!("{:<14} {:.3e} (tol {:.1e}) {}", c.name, c.value, c.tolerance, if c.pass { "PASS" } else { "FAIL" });
    }
    if report.pass() {
        ExitCode::SUCCESS
    } else {
        code(EXIT_VERIFICATION)
    }
}

fn verify(suite: Option<&str>, config: Option<&Path>) -> ExitCode {
    let cfg = match load(config) {
        Ok(c) => c,
        Err(e) => return fail(e, None, None),
    };
    let dir = harness::run_dir(&cfg, "verify", None);
    let out = match harness::run_verify(&cfg, suite) {
        Ok(o) => o,
        Err(e) => return fail(e, None, None),
    };
    if let Err(e) = harness::persist_verify(&cfg, &out, &dir) {
        return fail(e, None, None);
    }
    print!("{}", out.summary());
    println!("table: {}", dir.join("verify.csv").display());
    if out.pass() {
        ExitCode::SUCCESS
    } else {
        code(EXIT_VERIFICATION)
    }
}

fn info(config: Option<&Path>) -> ExitCode {
    let r = match load(config).and_then(|cfg| harness::run_info(&cfg)) {
        Ok(r) => r,
        Err(e) => return fail(e, None, None),
    };
    println!("grid: nt = {}, nx = {}", r.nt, r.nx);
    println!("truncation: L = {}, J = {} ({} kernel modes)", r.l, r.j, r.kernel_modes);
    println!("cbar estimate: {:.6e}", r.cbar);
    println!("forcing: {} ({} frame)", r.forcing, r.frame);
    println!("C0(R = {}) = {:.6e}, eps0 = {:.6e}", r.r_ball, r.c0, r.eps0);
    if let Some(k) = r.kappa {
        println!("kappa = {k:.12}");
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Solve { config, eps } => solve(config, *eps),
        Command::Sweep { config } => sweep(config),
        Command::BuildH { config } => build_h(config),
        Command::Verify { suite, config } => verify(suite.as_deref(), config.as_deref()),
        Command::Info { config } => info(config.as_deref()),
    }
}
