//! Experiment orchestration: single solves, epsilon sweeps, the verification suite and
//! persistence of run directories `<outdir>/<run-id>/`.

pub mod config;

use std::f64::consts::PI;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{Discretization, Grid, GridField, KernelElement, NormKind, SpectralField, TorusProfile};
use crate::forcing::{contraction_constants, evaluate_f, rescale_resonant, Forcing, ForcingSpec, RescaledProblem};
use crate::hbuilder::{build_h, random_positive_h, verify_h, HBuilder, HReport, HResult, C_SPREAD_TOL};
use crate::identities::{run_identity_suite, IdentityCheck, IDENTITY_NAMES};
use crate::identities::{SymmetricWeight, SymmetryClass};
use crate::operators::{project_kernel, weak_residual, OperatorWorkspace, ProjectionMethod};
use crate::quadrature::ls_slope;
use crate::range::{range_residual, RangeConfig, SolverContext};
use crate::reducer::{minimize_in_ball, minimize_multistart, MinimizerConfig, ReducedState};

pub use config::{Basis, FieldExpr, ForcingConfig, InitKind, RunConfig, SolverSettings, WeightKind, DEFAULTS_HELP};

/// Environment variable overriding `[output] directory`.
pub const OUT_ENV: &str = "RWS_OUT";

/// Build the nonlinearity of `cfg` on `disc`; the multiplicity family also returns `v0`.
pub fn build_forcing(cfg: &RunConfig, disc: &Discretization) -> Result<(ForcingSpec, Option<KernelElement>)> {
    let grid = disc.grid();
    match &cfg.forcing {
        ForcingConfig::Theorem1 { k, beta, h } => Ok((ForcingSpec::theorem1(*k, *beta, h.sample(grid)?, disc)?, None)),
        ForcingConfig::Theorem2 { k, beta, remainder_coef, remainder_power, h } => {
            let b = beta.clone();
            let beta_fn = Arc::new(move |x: f64| b.eval(0.0, x).unwrap_or(f64::NAN));
            let (c, p) = (*remainder_coef, *remainder_power as i32);
            let spec = ForcingSpec::theorem2(
                *k,
                beta_fn,
                Arc::new(move |_, _, u| c * u.powi(p)),
                Arc::new(move |_, _, u| c * p as f64 * u.powi(p - 1)),
                h.sample(grid)?,
                disc,
            )?;
            Ok((spec, None))
        }
        ForcingConfig::Theorem3 { linear, cubic, weight, weight_coef, g } => {
            let g = field_fn(g, grid)?;
            let (a1, a3, wc) = (*linear, *cubic, *weight_coef);
            let a = match weight {
                WeightKind::Zero => SymmetricWeight::new(SymmetryClass::Even, Arc::new(|_, _| 0.0), Arc::new(|_, _| 0.0))?,
                WeightKind::Square => SymmetricWeight::new(
                    SymmetryClass::Even,
                    Arc::new(move |_, u| wc * u * u),
                    Arc::new(move |_, u| 2.0 * wc * u),
                )?,
                WeightKind::OddCubic => SymmetricWeight::new(
                    SymmetryClass::Odd,
                    Arc::new(move |x, u| wc * u.powi(3) * x.cos()),
                    Arc::new(move |x, u| 3.0 * wc * u * u * x.cos()),
                )?,
            };
            let spec = ForcingSpec::theorem3(
                Arc::new(move |t, x, u| a1 * u + a3 * u.powi(3) + g(t, x)),
                Arc::new(move |_, _, u| a1 + 3.0 * a3 * u * u),
                a,
                a1,
                3.0 * cfg.solver.r_ball + 1.0,
            )?;
            Ok((spec, None))
        }
        ForcingConfig::Multiplicity { mode, amplitude } => {
            let modes = disc.kernel_modes();
            if *mode > modes {
                return Err(Error::Config(format!("[forcing] mode {mode} exceeds the {modes} kernel modes")));
            }
            let v0 = KernelElement::new(TorusProfile::cosine(*mode, modes)).scale(*amplitude);
            Ok((ForcingSpec::multiplicity(v0.clone()), Some(v0)))
        }
    }
}

/// `(t, x) -> value` for a field expression; file-backed fields use the nearest grid node.
fn field_fn(e: &FieldExpr, grid: Grid) -> Result<Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>> {
    match e {
        FieldExpr::Terms(_) => {
            let e = e.clone();
            Ok(Arc::new(move |t, x| e.eval(t, x).unwrap_or(0.0)))
        }
        FieldExpr::File(_) => {
            let g = e.sample(grid)?;
            Ok(Arc::new(move |t, x| {
                let i = (t / grid.dt()).round().rem_euclid(grid.nt as f64) as usize;
                let q = ((x / grid.dx()).round().max(0.0) as usize).min(grid.nx);
                g.get(i % grid.nt, q)
            }))
        }
    }
}

/// A configured problem: discretization, forcing and, for the resonant families, `H`.
pub struct Problem {
    pub disc: Discretization,
    pub ws: OperatorWorkspace,
    pub spec: ForcingSpec,
    pub h: Option<HResult>,
    pub v0: Option<KernelElement>,
}

impl Problem {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let disc = Discretization::new(cfg.grid, cfg.trunc)?.with_holder_cap(cfg.verify.holder_cap);
        let ws = OperatorWorkspace::new(cfg.trunc);
        let (spec, v0) = build_forcing(cfg, &disc)?;
        let h = match spec.h() {
            Some(h) => Some(build_h(&disc, h)?),
            None => None,
        };
        Ok(Self { disc, ws, spec, h, v0 })
    }

    fn rescaled(&self, eps: f64) -> Result<Option<RescaledProblem>> {
        match &self.h {
            Some(h) => Ok(Some(rescale_resonant(&self.spec, &h.big_h)?.with_eps_sign(eps))),
            None => Ok(None),
        }
    }

    /// Solve at `eps`: through the rescaling around `H` for the resonant families, directly otherwise.
    pub fn solve(&self, cfg: &RunConfig, eps: f64) -> Result<SolveOutcome> {
        let start = Instant::now();
        cfg.check_eps(eps)?;
        let s = &cfg.solver;
        let mcfg = MinimizerConfig {
            tol_grad: s.tol_grad,
            max_iter: s.max_iter_min,
            margin: s.margin,
            max_doublings: s.max_doublings,
            n_restarts: s.n_restarts,
            seed: cfg.seed,
            range: RangeConfig { tol: s.tol_range, max_iter: s.max_iter_range },
            ..MinimizerConfig::default()
        };
        let modes = self.disc.kernel_modes();
        let zero = KernelElement::zero(modes);
        let init = match (s.init, &self.v0) {
            (InitKind::V0, Some(v0)) => v0.clone(),
            _ => zero.clone(),
        };
        let rescaled = self.rescaled(eps)?;
        let (forcing, inner): (&dyn Forcing, f64) = match &rescaled {
            Some(rp) => (rp, rp.inner_eps(eps)),
            None => (&self.spec, eps),
        };
        let ctx = SolverContext::new(&self.disc, &self.ws, forcing);
        let mut states = minimize_multistart(&ctx, s.r_ball, inner, &init, &mcfg)?.states;
        let best = states[0].clone();
        // the multiplicity family has two exact branches; start from the other one as well
        if let Some(v0) = &self.v0 {
            let other = if s.init == InitKind::V0 { zero } else { v0.clone() };
            if other.h1_norm() <= s.r_ball {
                match minimize_in_ball(&ctx, s.r_ball, inner, &other, &mcfg) {
                    Ok(st) if !states.iter().any(|d| same_state(d, &st)) => states.push(st),
                    Ok(_) => {}
                    Err(e) => log::warn!("second multiplicity branch failed: {e}"),
                }
            } else {
                log::warn!("v0 lies outside the ball of radius {}; second branch not explored", s.r_ball);
            }
        }

        let u = match &rescaled {
            Some(rp) => rp.map_back(&best.u, eps),
            None => best.u.clone(),
        };
        let v_grid = self.disc.kernel_embed(&best.v);
        let w_grid = self.disc.synthesize(&best.w)?;
        let residual = self.weak_residual(&u, eps)?;
        let range_res = range_residual(&ctx, &best.v, &best.w, inner)?;
        let constants = contraction_constants(forcing, best.r_ball, &self.ws, self.disc.grid());
        let h1 = self.disc.norm(&u, NormKind::H1)?;
        let (e_proxy, e_proxy_note) = match self.disc.norm(&u, NormKind::Holder12) {
            Ok(h) => (Some(h1 + h), None),
            Err(e @ Error::GridTooLarge { .. }) => (None, Some(e.to_string())),
            Err(e) => return Err(e),
        };
        let minima = states
            .iter()
            .map(|st| MinimumSummary {
                phi_value: st.phi_value,
                v_l2: st.v.l2_norm(),
                v_h1: st.v_h1,
                interior: st.interior,
                converged: st.converged,
            })
            .collect();
        let report = SolveReport {
            kind: cfg.forcing.kind_name().into(),
            forcing: self.spec.name.clone(),
            frame: if rescaled.is_some() { "rescaled" } else { "direct" },
            epsilon: eps,
            eps_inner: inner,
            phi_value: best.phi_value,
            v_h1: best.v_h1,
            v_linf: v_grid.max_abs(),
            w_l2: w_grid.l2_norm(),
            u_norms: UNorms { l2: u.l2_norm(), h1, linf: u.max_abs(), e_proxy, e_proxy_note },
            weak_residual: residual,
            range_residual: range_res,
            grad_h1_norm: best.grad_h1_norm,
            iterations: Iterations { range_total: best.range_iterations, minimizer: best.iterations },
            interior: best.interior,
            converged: best.converged,
            r_ball: best.r_ball,
            c0: constants.c0,
            eps0: constants.eps0,
            beyond_proven_bound: inner.abs() > constants.eps0,
            distinct_minima: states.len(),
            minima,
            kappa: self.h.as_ref().map(|h| h.kappa),
            seed: cfg.seed,
            wall_time: start.elapsed().as_secs_f64(),
        };
        Ok(SolveOutcome { report, u, v: v_grid, w: w_grid, big_h: self.h.as_ref().map(|h| h.big_h.clone()) })
    }

    /// `|| box u - eps f(u) ||_{L2}` on the truncation, for the original nonlinearity.
    pub fn weak_residual(&self, u: &GridField, eps: f64) -> Result<f64> {
        let f = evaluate_f(&self.spec, u, eps)?;
        weak_residual(&self.disc, &self.ws, u, &f.scale(eps))
    }
}

fn same_state(a: &ReducedState, b: &ReducedState) -> bool {
    a.v.axpy(-1.0, &b.v).l2_norm() <= 1e-6 * (1.0 + a.v.l2_norm())
}

#[derive(Debug, Clone, Serialize)]
pub struct UNorms {
    #[serde(rename = "L2")]
    pub l2: f64,
    #[serde(rename = "H1")]
    pub h1: f64,
    #[serde(rename = "Linf")]
    pub linf: f64,
    /// `H1 + Holder12` on the grid; absent when the grid exceeds the Hoelder cap.
    #[serde(rename = "E_proxy")]
    pub e_proxy: Option<f64>,
    #[serde(rename = "E_proxy_note", skip_serializing_if = "Option::is_none")]
    pub e_proxy_note: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Iterations {
    pub range_total: usize,
    pub minimizer: usize,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MinimumSummary {
    pub phi_value: f64,
    pub v_l2: f64,
    pub v_h1: f64,
    pub interior: bool,
    pub converged: bool,
}

/// Summary of one solve. In the rescaled frame `v`, `w`, `phi_value` and the iteration
/// counts refer to the inner unknowns `v~`, `w~` at `eps_inner`; `u` is always the original field.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub kind: String,
    pub forcing: String,
    pub frame: &'static str,
    pub epsilon: f64,
    pub eps_inner: f64,
    pub phi_value: f64,
    pub v_h1: f64,
    pub v_linf: f64,
    pub w_l2: f64,
    pub u_norms: UNorms,
    /// `|| box u - eps f(u) ||_{L2}` on the truncation.
    pub weak_residual: f64,
    pub range_residual: f64,
    pub grad_h1_norm: f64,
    pub iterations: Iterations,
    pub interior: bool,
    pub converged: bool,
    pub r_ball: f64,
    pub c0: f64,
    pub eps0: f64,
    /// `|eps_inner|` exceeds the sampled contraction threshold `eps0`.
    #[serde(rename = "beyond_paper_bound")]
    pub beyond_proven_bound: bool,
    pub distinct_minima: usize,
    pub minima: Vec<MinimumSummary>,
    pub kappa: Option<f64>,
    pub seed: u64,
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub report: SolveReport,
    pub u: GridField,
    /// Kernel part of the solver unknown on the grid.
    pub v: GridField,
    /// Range part of the solver unknown on the grid.
    pub w: GridField,
    pub big_h: Option<GridField>,
}

/// Build the problem of `cfg` and solve at `eps`.
pub fn run_solve(cfg: &RunConfig, eps: f64) -> Result<SolveOutcome> {
    Problem::new(cfg)?.solve(cfg, eps)
}

/// Output root: `RWS_OUT` when set, `[output] directory` otherwise.
pub fn output_root(cfg: &RunConfig) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => cfg.output.directory.clone(),
    }
}

/// `<root>/<run-id>`: `[output] run_id` if given, else `<config stem>-<command>[-eps<value>]`.
pub fn run_dir(cfg: &RunConfig, command: &str, eps: Option<f64>) -> PathBuf {
    let id = match (&cfg.output.run_id, eps) {
        (Some(id), _) => id.clone(),
        (None, Some(e)) => format!("{}-{command}-eps{e:e}", cfg.name),
        (None, None) => format!("{}-{command}", cfg.name),
    };
    output_root(cfg).join(id)
}

fn create_run_dir(cfg: &RunConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.copy"), &cfg.source)?;
    let stale = dir.join("error.json");
    if stale.exists() {
        fs::remove_file(stale)?;
    }
    Ok(())
}

fn write_field(path: &Path, g: &GridField) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    g.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Write `{config.copy, report.json, u.csv, v.csv, w.csv, H.csv}` (and spectral JSON when asked).
pub fn persist_solve(cfg: &RunConfig, outcome: &SolveOutcome, disc: &Discretization, dir: &Path) -> Result<()> {
    create_run_dir(cfg, dir)?;
    write_json(&dir.join("report.json"), &outcome.report)?;
    let fields = [("u", Some(&outcome.u)), ("v", Some(&outcome.v)), ("w", Some(&outcome.w)), ("H", outcome.big_h.as_ref())];
    for (name, field) in fields {
        let Some(g) = field else { continue };
        if cfg.output.csv {
            write_field(&dir.join(format!("{name}.csv")), g)?;
        }
        if cfg.output.json {
            write_json(&dir.join(format!("{name}.json")), &disc.analyze_interior(g).to_json())?;
        }
    }
    Ok(())
}

/// Record a failed run as `error.json` in `dir`.
pub fn persist_error(cfg: &RunConfig, err: &Error, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.copy"), &cfg.source)?;
    write_json(&dir.join("error.json"), &err.to_json())
}

/// Reload `u.csv` and `report.json` from a run directory and recompute the weak residual.
/// Returns `(stored, recomputed)`.
pub fn recheck_weak_residual(cfg: &RunConfig, dir: &Path) -> Result<(f64, f64)> {
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json"))?)?;
    let field = |key: &str| {
        report[key].as_f64().ok_or_else(|| Error::Config(format!("report.json lacks a numeric {key}")))
    };
    let (eps, stored) = (field("epsilon")?, field("weak_residual")?);
    let u = GridField::read_csv(BufReader::new(fs::File::open(dir.join("u.csv"))?))?;
    let disc = Discretization::new(cfg.grid, cfg.trunc)?;
    let ws = OperatorWorkspace::new(cfg.trunc);
    let (spec, _) = build_forcing(cfg, &disc)?;
    let f = evaluate_f(&spec, &u, eps)?;
    Ok((stored, weak_residual(&disc, &ws, &u, &f.scale(eps))?))
}

/// One line of `sweep.csv`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub eps_inner: f64,
    pub u_linf: f64,
    pub u_l2: f64,
    pub u_h1: f64,
    pub v_h1: f64,
    pub w_l2: f64,
    pub weak_residual: f64,
    pub phi_value: f64,
    pub interior: bool,
    pub converged: bool,
    pub minimizer_iterations: usize,
    pub range_iterations: usize,
    pub status: String,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "epsilon,eps_inner,u_linf,u_l2,u_h1,v_h1,w_l2,weak_residual,phi_value,\
                                          interior,converged,minimizer_iterations,range_iterations,status";

    fn from_report(r: &SolveReport) -> Self {
        Self {
            epsilon: r.epsilon,
            eps_inner: r.eps_inner,
            u_linf: r.u_norms.linf,
            u_l2: r.u_norms.l2,
            u_h1: r.u_norms.h1,
            v_h1: r.v_h1,
            w_l2: r.w_l2,
            weak_residual: r.weak_residual,
            phi_value: r.phi_value,
            interior: r.interior,
            converged: r.converged,
            minimizer_iterations: r.iterations.minimizer,
            range_iterations: r.iterations.range_total,
            status: if r.converged { "ok".into() } else { "not_converged".into() },
        }
    }

    fn failed(epsilon: f64, err: &Error) -> Self {
        Self {
            epsilon,
            eps_inner: f64::NAN,
            u_linf: f64::NAN,
            u_l2: f64::NAN,
            u_h1: f64::NAN,
            v_h1: f64::NAN,
            w_l2: f64::NAN,
            weak_residual: f64::NAN,
            phi_value: f64::NAN,
            interior: false,
            converged: false,
            minimizer_iterations: 0,
            range_iterations: 0,
            status: format!("error:{}", err.kind()),
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{},{},{}",
            self.epsilon,
            self.eps_inner,
            self.u_linf,
            self.u_l2,
            self.u_h1,
            self.v_h1,
            self.w_l2,
            self.weak_residual,
            self.phi_value,
            self.interior,
            self.converged,
            self.minimizer_iterations,
            self.range_iterations,
            self.status
        )
    }
}

/// Least-squares slopes of `log ||u||_Linf` against `log |eps|` and of `log ||w||_L2` against
/// `log |eps_inner|` (the rescaled parameter for the resonant families, `eps` otherwise).
#[derive(Debug, Clone, Serialize)]
pub struct SweepFit {
    pub slope_u_linf: Option<f64>,
    pub slope_w_l2: Option<f64>,
    pub w_abscissa: &'static str,
    pub points: usize,
    pub decades: f64,
    pub note: Option<String>,
}

/// Points and decades a slope fit needs.
pub const FIT_MIN_POINTS: usize = 4;
pub const FIT_MIN_DECADES: f64 = 2.0;

fn fit_slopes(rows: &[SweepRow], rescaled: bool) -> SweepFit {
    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.converged && r.epsilon != 0.0).collect();
    let (lo, hi) = ok
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.epsilon.abs()), hi.max(r.epsilon.abs())));
    let decades = if ok.is_empty() { 0.0 } else { (hi / lo).log10() };
    let w_abscissa = if rescaled { "eps_inner" } else { "epsilon" };
    if ok.len() < FIT_MIN_POINTS || decades < FIT_MIN_DECADES - 1e-9 {
        return SweepFit {
            slope_u_linf: None,
            slope_w_l2: None,
            w_abscissa,
            points: ok.len(),
            decades,
            note: Some(format!(
                "slope fit needs at least {FIT_MIN_POINTS} converged points spanning {FIT_MIN_DECADES} decades"
            )),
        };
    }
    let slope = |x: &dyn Fn(&SweepRow) -> f64, y: &dyn Fn(&SweepRow) -> f64| {
        let pts: Vec<(f64, f64)> = ok
            .iter()
            .filter(|r| y(r) > 0.0 && x(r) != 0.0)
            .map(|r| (x(r).abs().ln(), y(r).ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        Some(ls_slope(&xs, &ys))
    };
    SweepFit {
        slope_u_linf: slope(&|r| r.epsilon, &|r| r.u_linf),
        slope_w_l2: slope(&|r| if rescaled { r.eps_inner } else { r.epsilon }, &|r| r.w_l2),
        w_abscissa,
        points: ok.len(),
        decades,
        note: None,
    }
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub fit: SweepFit,
    /// Points that failed, in sweep order.
    pub failures: Vec<(f64, Error)>,
    pub big_h: Option<GridField>,
    pub wall_time: f64,
}

impl SweepOutcome {
    pub fn all_converged(&self) -> bool {
        self.failures.is_empty() && self.rows.iter().all(|r| r.converged)
    }
}

fn worker_pool(cfg: &RunConfig) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.workers {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Solve at every configured epsilon in a worker pool of `[run] workers` threads.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepOutcome> {
    let start = Instant::now();
    let problem = Problem::new(cfg)?;
    let pool = worker_pool(cfg)?;
    let results: Vec<Result<SolveOutcome>> =
        pool.install(|| cfg.epsilon.par_iter().map(|&e| problem.solve(cfg, e)).collect());
    let mut rows = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (&eps, res) in cfg.epsilon.iter().zip(results) {
        match res {
            Ok(o) => rows.push(SweepRow::from_report(&o.report)),
            Err(e) => {
                rows.push(SweepRow::failed(eps, &e));
                failures.push((eps, e));
            }
        }
    }
    let fit = fit_slopes(&rows, problem.h.is_some());
    Ok(SweepOutcome {
        rows,
        fit,
        failures,
        big_h: problem.h.map(|h| h.big_h),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Write `{config.copy, sweep.csv, report.json, H.csv}`; failed points appear as rows with an `error:` status.
pub fn persist_sweep(cfg: &RunConfig, outcome: &SweepOutcome, dir: &Path) -> Result<()> {
    create_run_dir(cfg, dir)?;
    let mut w = BufWriter::new(fs::File::create(dir.join("sweep.csv"))?);
    writeln!(w, "{}", SweepRow::CSV_HEADER)?;
    for r in &outcome.rows {
        writeln!(w, "{}", r.csv_row())?;
    }
    w.flush()?;
    let failures: Vec<serde_json::Value> = outcome
        .failures
        .iter()
        .map(|(e, err)| serde_json::json!({ "epsilon": e, "error": err.to_json() }))
        .collect();
    let report = serde_json::json!({
        "kind": cfg.forcing.kind_name(),
        "points": outcome.rows.len(),
        "fit": outcome.fit,
        "failures": failures,
        "seed": cfg.seed,
        "wall_time": outcome.wall_time,
    });
    write_json(&dir.join("report.json"), &report)?;
    if let (Some(h), true) = (&outcome.big_h, cfg.output.csv) {
        write_field(&dir.join("H.csv"), h)?;
    }
    Ok(())
}

/// Construct `H` for the configured resonant forcing and re-verify it.
pub fn run_build_h(cfg: &RunConfig) -> Result<(HResult, HReport)> {
    let disc = Discretization::new(cfg.grid, cfg.trunc)?;
    let (spec, _) = build_forcing(cfg, &disc)?;
    let h = spec
        .h()
        .ok_or_else(|| Error::Config(format!("build-h needs a resonant forcing kind, got {}", cfg.forcing.kind_name())))?;
    let res = build_h(&disc, h)?;
    let report = verify_h(&disc, &res.big_h, h)?;
    Ok((res, report))
}

/// Write `{config.copy, H.csv, report.json}` for a constructed `H`.
pub fn persist_build_h(cfg: &RunConfig, res: &HResult, report: &HReport, dir: &Path) -> Result<()> {
    create_run_dir(cfg, dir)?;
    write_field(&dir.join("H.csv"), &res.big_h)?;
    let json = serde_json::json!({ "construction": res.to_json(), "checks": report.checks, "pass": report.pass() });
    write_json(&dir.join("report.json"), &json)
}

/// Truncation, `cbar` and contraction constants of the configured problem.
#[derive(Debug, Clone, Serialize)]
pub struct InfoReport {
    pub nt: usize,
    pub nx: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "J")]
    pub j: usize,
    pub kernel_modes: usize,
    pub cbar: f64,
    pub forcing: String,
    pub frame: &'static str,
    pub r_ball: f64,
    pub c0: f64,
    pub eps0: f64,
    pub kappa: Option<f64>,
}

/// Constants of the configured problem; for the resonant families they refer to the rescaled forcing.
pub fn run_info(cfg: &RunConfig) -> Result<InfoReport> {
    let p = Problem::new(cfg)?;
    let rescaled = p.rescaled(1.0)?;
    let forcing: &dyn Forcing = match &rescaled {
        Some(rp) => rp,
        None => &p.spec,
    };
    let c = contraction_constants(forcing, cfg.solver.r_ball, &p.ws, cfg.grid);
    Ok(InfoReport {
        nt: cfg.grid.nt,
        nx: cfg.grid.nx,
        l: cfg.trunc.l,
        j: cfg.trunc.j,
        kernel_modes: cfg.trunc.kernel_modes(),
        cbar: c.cbar,
        forcing: p.spec.name.clone(),
        frame: if rescaled.is_some() { "rescaled" } else { "direct" },
        r_ball: cfg.solver.r_ball,
        c0: c.c0,
        eps0: c.eps0,
        kappa: p.h.as_ref().map(|h| h.kappa),
    })
}

/// Names accepted by `verify --suite`, besides individual identity names.
pub const SUITES: &[&str] = &["identities", "operators", "hbuilder", "holder"];

/// One line of the verification table; `skipped` carries the reason when a diagnostic could not run.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyRow {
    pub suite: &'static str,
    #[serde(flatten)]
    pub check: IdentityCheck,
    pub skipped: Option<String>,
}

impl VerifyRow {
    fn new(suite: &'static str, check: IdentityCheck) -> Self {
        Self { suite, check, skipped: None }
    }

    pub fn passed(&self) -> bool {
        self.skipped.is_some() || self.check.pass
    }

    pub fn csv_row(&self) -> String {
        match &self.skipped {
            None => self.check.csv_row(),
            Some(_) => format!("{},{},,{:.1e},skipped", self.check.identity, self.check.samples, self.check.tolerance),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOutcome {
    pub rows: Vec<VerifyRow>,
    pub wall_time: f64,
}

impl VerifyOutcome {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(VerifyRow::passed)
    }

    /// Human-readable summary, one line per check.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let status = match (&r.skipped, r.check.pass) {
                (Some(reason), _) => format!("SKIP ({reason})"),
                (None, true) => "PASS".into(),
                (None, false) => "FAIL".into(),
            };
            s.push_str(&format!(
                "{:<10} {:<40} {:>5} samples  margin {:>11.3e}  tol {:.1e}  {status}\n",
                r.suite, r.check.identity, r.check.samples, r.check.worst_margin, r.check.tolerance
            ));
        }
        let failed = self.rows.iter().filter(|r| !r.passed()).count();
        s.push_str(&format!("{} checks, {failed} failed, {:.1} s\n", self.rows.len(), self.wall_time));
        s
    }
}

/// Run the verification suites (all, one suite, or one identity by name).
pub fn run_verify(cfg: &RunConfig, suite: Option<&str>) -> Result<VerifyOutcome> {
    let start = Instant::now();
    let (suites, only): (Vec<&str>, Vec<&str>) = match suite {
        None => (SUITES.to_vec(), Vec::new()),
        Some(s) if SUITES.contains(&s) => (vec![s], Vec::new()),
        Some(s) if IDENTITY_NAMES.contains(&s) => (vec!["identities"], vec![s]),
        Some(s) => {
            return Err(Error::Config(format!(
                "unknown suite {s:?}; expected one of {} or an identity name",
                SUITES.join(", ")
            )))
        }
    };
    let disc = Discretization::new(cfg.grid, cfg.trunc)?.with_holder_cap(cfg.verify.holder_cap);
    let samples = cfg.verify.samples;
    let mut rows = Vec::new();
    for s in suites {
        match s {
            "identities" => rows.extend(
                run_identity_suite(cfg.seed, samples, &only).into_iter().map(|c| VerifyRow::new("identities", c)),
            ),
            "operators" => rows.extend(operator_checks(&disc, cfg.seed, samples)),
            "hbuilder" => rows.extend(hbuilder_checks(cfg, &disc)),
            "holder" => rows.push(holder_check(&disc)),
            _ => unreachable!("suite names are validated above"),
        }
    }
    Ok(VerifyOutcome { rows, wall_time: start.elapsed().as_secs_f64() })
}

/// Write `{config.copy, verify.csv, report.json}`.
pub fn persist_verify(cfg: &RunConfig, outcome: &VerifyOutcome, dir: &Path) -> Result<()> {
    create_run_dir(cfg, dir)?;
    let mut w = BufWriter::new(fs::File::create(dir.join("verify.csv"))?);
    writeln!(w, "{}", IdentityCheck::CSV_HEADER)?;
    for r in &outcome.rows {
        writeln!(w, "{}", r.csv_row())?;
    }
    w.flush()?;
    let json = serde_json::json!({ "pass": outcome.pass(), "rows": outcome.rows, "wall_time": outcome.wall_time });
    write_json(&dir.join("report.json"), &json)
}

fn random_spectral(disc: &Discretization, rng: &mut ChaCha8Rng) -> SpectralField {
    let t = disc.truncation();
    let mut s = SpectralField::zeros(t);
    for l in 0..=t.l as i64 {
        for j in 1..=t.j {
            let decay = 1.0 / (1.0 + (l * l) as f64 + (j * j) as f64);
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * decay;
            s.set_real_mode(l, j, c);
        }
    }
    s
}

fn relative(err: f64, scale: f64) -> f64 {
    err / scale.max(f64::MIN_POSITIVE)
}

/// Operator cross-checks on random band-limited data.
fn operator_checks(disc: &Discretization, seed: u64, samples: usize) -> Vec<VerifyRow> {
    let ws = OperatorWorkspace::new(disc.truncation());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6f70_6572);
    let (mut inv, mut proj, mut round) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..samples {
        let s = random_spectral(disc, &mut rng);
        let f = s.range_part();
        let back = ws.dalembert_inverse(&f).and_then(|g| ws.dalembert_apply(&g));
        inv = inv.max(match back {
            Ok(b) => relative((&b - &f).l2_norm(), f.l2_norm()),
            Err(_) => f64::INFINITY,
        });
        let g = disc.synthesize_unchecked(&s);
        let pk = (
            project_kernel(disc, &g, ProjectionMethod::Spectral),
            project_kernel(disc, &g, ProjectionMethod::Integral),
        );
        proj = proj.max(match pk {
            (Ok(a), Ok(b)) => relative(a.axpy(-1.0, &b).l2_norm(), 1.0 + a.l2_norm()),
            _ => f64::INFINITY,
        });
        round = round.max(relative((&disc.analyze_interior(&g) - &s).l2_norm(), s.l2_norm()));
    }
    vec![
        VerifyRow::new("operators", IdentityCheck::new("dalembert_inverse_roundtrip", samples, -inv, 1e-12)),
        VerifyRow::new("operators", IdentityCheck::new("kernel_projection_agreement", samples, -proj, 1e-8)),
        VerifyRow::new("operators", IdentityCheck::new("transform_roundtrip", samples, -round, 1e-12)),
    ]
}

fn failed_check(name: &str, samples: usize, tolerance: f64, err: &Error) -> IdentityCheck {
    log::warn!("{name}: {err}");
    IdentityCheck::new(name, samples, f64::NEG_INFINITY, tolerance)
}

/// Sup distance of the constructed `H` to a known profile, and `|kappa - pi/2|`.
fn known_h(disc: &Discretization, h: &GridField, exact: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    let res = build_h(disc, h)?;
    let err = (&res.big_h - &GridField::from_fn(disc.grid(), |_, x| exact(x))).max_abs();
    Ok(((res.kappa - PI / 2.0).abs(), err))
}

/// Construction of `H` on known cases, a random positive family and the configured `h`.
fn hbuilder_checks(cfg: &RunConfig, disc: &Discretization) -> Vec<VerifyRow> {
    let grid = disc.grid();
    let mut out = Vec::new();
    let mut push = |c: IdentityCheck| out.push(VerifyRow::new("hbuilder", c));
    match known_h(disc, &GridField::from_fn(grid, |_, _| 1.0), |x| x * (PI - x) / 2.0) {
        Ok((dk, dh)) => {
            push(IdentityCheck::new("hbuilder_constant_kappa", 1, -dk, 1e-8));
            push(IdentityCheck::new("hbuilder_constant_profile", 1, -dh, 1e-5));
        }
        Err(e) => push(failed_check("hbuilder_constant_profile", 1, 1e-5, &e)),
    }
    match known_h(disc, &GridField::from_fn(grid, |_, x| x.sin()), f64::sin) {
        Ok((dk, dh)) => push(IdentityCheck::new("hbuilder_sine_profile", 1, -dh.max(dk), 1e-5)),
        Err(e) => push(failed_check("hbuilder_sine_profile", 1, 1e-5, &e)),
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6862);
    let family = 3;
    let mut worst = f64::INFINITY;
    for _ in 0..family {
        let h = random_positive_h(grid, &mut rng);
        let margin = build_h(disc, &h).and_then(|res| {
            let r = verify_h(disc, &res.big_h, &h)?;
            let margin_of = |name: &str| r.check(name).map_or(f64::NEG_INFINITY, |c| c.tolerance - c.value);
            Ok(margin_of("boundary").min(margin_of("weak_residual")).min(res.interior_min))
        });
        worst = worst.min(margin.unwrap_or(f64::NEG_INFINITY));
    }
    push(IdentityCheck::new("hbuilder_random_family", family, worst, 0.0));

    // the configured h must be t-independent after integration along characteristics
    if let ForcingConfig::Theorem1 { h, .. } | ForcingConfig::Theorem2 { h, .. } = &cfg.forcing {
        match h.sample(grid) {
            Ok(h) => {
                let margin = match HBuilder::new(&h).compute_c() {
                    Ok((c, spread)) => C_SPREAD_TOL * (1.0 + c.abs()) - spread,
                    Err(Error::NotInRangeSpace { spread }) => -spread,
                    Err(e) => {
                        log::warn!("hbuilder_t_independence: {e}");
                        f64::NEG_INFINITY
                    }
                };
                push(IdentityCheck::new("hbuilder_t_independence", 1, margin, 0.0));
            }
            Err(e) => push(failed_check("hbuilder_t_independence", 1, 0.0, &e)),
        }
    }
    out
}

/// The Hoelder proxy must dominate the sup norm; skipped beyond the grid cap.
fn holder_check(disc: &Discretization) -> VerifyRow {
    let g = GridField::from_fn(disc.grid(), |t, x| t.sin() * x.sin() + 0.5 * (2.0 * t).cos() * (3.0 * x).sin());
    match disc.holder12(&g) {
        Ok(h) => VerifyRow::new("holder", IdentityCheck::new("holder12_dominates_sup", 1, h - g.max_abs(), 0.0)),
        Err(e) => VerifyRow {
            suite: "holder",
            check: IdentityCheck::new("holder12_dominates_sup", 1, 0.0, 0.0),
            skipped: Some(e.to_string()),
        },
    }
}
