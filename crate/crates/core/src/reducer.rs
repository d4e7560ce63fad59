//! The reduced functional `Phi(v) = Psi(v + w(v))` on the kernel, its gradient, and
//! its constrained minimisation over the H1 ball.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{GridField, KernelElement, SpectralField, TorusProfile};
use crate::forcing::{evaluate_f, evaluate_primitive};
use crate::range::{solve_range_grid, RangeConfig, RangeSolution, SolverContext};

/// Upper bound on trial steps proposed by the step-size heuristic.
const MAX_STEP: f64 = 1e8;

/// Everything known about `v` after one range solve.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub v: KernelElement,
    pub range: RangeSolution,
    /// `u = v + w` on the grid.
    pub u: GridField,
    /// `f(u)` on the grid.
    pub f: GridField,
    pub phi: f64,
    /// L2 gradient `eps P_N f(u)` as a profile.
    pub grad: KernelElement,
}

/// Solve the range equation at `v` and evaluate `Phi` and its gradient.
pub fn evaluate(
    ctx: &SolverContext<'_>,
    v: &KernelElement,
    eps: f64,
    cfg: &RangeConfig,
    w0: Option<&SpectralField>,
) -> Result<Evaluation> {
    let vg = ctx.disc.kernel_embed(v);
    let range = solve_range_grid(ctx, &vg, v.l2_norm(), eps, cfg, w0)?;
    let u = &vg + &range.w_grid;
    let f = evaluate_f(ctx.forcing, &u, eps)?;
    let big_f = evaluate_primitive(ctx.forcing, &u, eps)?;
    let integrand = big_f.zip_map(&f.zip_map(&range.w_grid, |a, b| a * b), |a, b| a - 0.5 * b);
    let phi = eps * integrand.integrate();
    let grad = kernel_gradient(ctx, &f, eps, v.profile.modes());
    Ok(Evaluation { v: v.clone(), range, u, f, phi, grad })
}

/// `eps P_N f` as a profile with `modes` modes.
fn kernel_gradient(ctx: &SolverContext<'_>, f: &GridField, eps: f64, modes: usize) -> KernelElement {
    let s = ctx.disc.analyze_interior(f);
    let g = KernelElement::from_spectral(&s).scale(eps);
    KernelElement::new(g.profile.resized(modes.max(ctx.disc.kernel_modes())))
}

/// `Phi(v) = eps int [F(v + w) - f(v + w) w / 2]`.
pub fn reduced_functional(ctx: &SolverContext<'_>, v: &KernelElement, eps: f64, cfg: &RangeConfig) -> Result<f64> {
    Ok(evaluate(ctx, v, eps, cfg, None)?.phi)
}

/// L2 gradient of `Phi`: the kernel element `eps P_N f(v + w(v))`.
pub fn reduced_gradient(
    ctx: &SolverContext<'_>,
    v: &KernelElement,
    eps: f64,
    cfg: &RangeConfig,
) -> Result<KernelElement> {
    Ok(evaluate(ctx, v, eps, cfg, None)?.grad)
}

/// The action `Psi(v + w) = int (u_t^2 - u_x^2) / 2 + eps int F(u)`; the quadratic part is
/// computed spectrally, where the kernel modes drop out.
pub fn action(ctx: &SolverContext<'_>, v: &KernelElement, w: &SpectralField, eps: f64) -> Result<f64> {
    let quad: f64 = w
        .modes()
        .map(|(l, j, c)| -0.5 * ctx.ws.lambda(l, j) * c.norm_sqr())
        .sum::<f64>()
        * std::f64::consts::PI.powi(2);
    let u = &ctx.disc.kernel_embed(v) + &ctx.disc.synthesize(w)?;
    Ok(quad + eps * evaluate_primitive(ctx.forcing, &u, eps)?.integrate())
}

/// H1 Riesz representative of the functional `phi -> <g, phi>_{L2}` on the kernel.
pub fn h1_riesz(g: &KernelElement) -> KernelElement {
    let coeffs = g
        .profile
        .coeffs()
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let m = (k + 1) as f64;
            c / (1.0 + 2.0 * m * m)
        })
        .collect();
    KernelElement::new(TorusProfile::new(coeffs))
}

/// `DPhi(v)[phi] / eps = int f(v + w) phi` together with the admissibility indicator `<v, phi>_{H1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionalDerivative {
    pub value: f64,
    pub admissibility: f64,
}

pub fn directional_derivative(
    ctx: &SolverContext<'_>,
    v: &KernelElement,
    phi: &KernelElement,
    eps: f64,
    cfg: &RangeConfig,
) -> Result<DirectionalDerivative> {
    let e = evaluate(ctx, v, eps, cfg, None)?;
    let value = e.f.inner(&ctx.disc.kernel_embed(phi));
    Ok(DirectionalDerivative { value, admissibility: v.h1_inner(phi) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizerConfig {
    /// Stop when the H1 norm of the gradient of `Phi / eps` drops below this.
    pub tol_grad: f64,
    pub max_iter: usize,
    /// `v` counts as interior when `||v||_{H1} < R - margin`.
    pub margin: f64,
    /// How often the ball radius may double when the minimiser sits on the boundary.
    pub max_doublings: usize,
    pub armijo_c: f64,
    pub initial_step: f64,
    pub n_restarts: usize,
    pub seed: u64,
    pub range: RangeConfig,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        Self {
            tol_grad: 1e-9,
            max_iter: 500,
            margin: 1e-6,
            max_doublings: 3,
            armijo_c: 1e-4,
            initial_step: 1.0,
            n_restarts: 0,
            seed: 0,
            range: RangeConfig::default(),
        }
    }
}

/// Result of a constrained minimisation.
#[derive(Debug, Clone)]
pub struct ReducedState {
    pub v: KernelElement,
    pub w: SpectralField,
    pub u: GridField,
    pub phi_value: f64,
    /// L2 gradient `eps P_N f(v + w)` of `Phi`.
    pub grad: KernelElement,
    /// H1 norm of the (projected, on the boundary) gradient of `Phi`.
    pub grad_h1_norm: f64,
    pub v_h1: f64,
    pub r_ball: f64,
    pub interior: bool,
    pub converged: bool,
    pub iterations: usize,
    pub range_iterations: usize,
    /// `Phi / eps` after every accepted step, starting with the initial value.
    pub objective_history: Vec<f64>,
}

/// Gradient of `J = Phi / eps` in the H1 geometry, with the outward radial part removed on the sphere.
fn descent_direction(e: &Evaluation, eps: f64, r: f64, margin: f64) -> KernelElement {
    let d = h1_riesz(&e.grad).scale(-1.0 / eps);
    let vn2 = e.v.h1_inner(&e.v);
    let outward = d.h1_inner(&e.v);
    if vn2.sqrt() >= r - margin && outward > 0.0 {
        d.axpy(-outward / vn2, &e.v)
    } else {
        d
    }
}

fn retract(v: KernelElement, r: f64) -> KernelElement {
    let n = v.h1_norm();
    if n > r {
        v.scale(r / n)
    } else {
        v
    }
}

/// Projected steepest descent of `J = Phi / eps` in the H1 ball of radius `r_ball`: minimises `Phi`
/// for `eps > 0` and maximises it for `eps < 0`. Armijo backtracking halves the step; the first line
/// search starts at `cfg.initial_step` and later ones at the Barzilai-Borwein step. The radius
/// doubles (at most `cfg.max_doublings` times) while the minimiser sits on the boundary.
///
/// A run that exhausts `cfg.max_iter` returns its last iterate with `converged = false`.
pub fn minimize_in_ball(
    ctx: &SolverContext<'_>,
    r_ball: f64,
    eps: f64,
    init: &KernelElement,
    cfg: &MinimizerConfig,
) -> Result<ReducedState> {
    if !(r_ball > 0.0) {
        return Err(Error::Config(format!("ball radius must be positive, got {r_ball}")));
    }
    if init.h1_norm() > r_ball * (1.0 + 1e-12) {
        return Err(Error::Config(format!("initial point has H1 norm {} > R = {r_ball}", init.h1_norm())));
    }
    let modes = ctx.disc.kernel_modes();
    let init = KernelElement::new(init.profile.resized(modes));
    let mut e = evaluate(ctx, &init, eps, &cfg.range, None)?;
    let mut range_iterations = e.range.iterations;
    let mut r = r_ball;
    let mut iterations = 0;
    let mut history = Vec::new();

    if eps == 0.0 {
        return Ok(finish(e, 0.0, r, cfg, true, 0, range_iterations, history));
    }
    history.push(e.phi / eps);
    let mut doublings = 0;
    loop {
        let mut step = cfg.initial_step;
        let mut converged = false;
        let mut grad_norm;
        loop {
            let d = descent_direction(&e, eps, r, cfg.margin);
            grad_norm = d.h1_norm();
            if grad_norm < cfg.tol_grad {
                converged = true;
                break;
            }
            if iterations >= cfg.max_iter {
                break;
            }
            iterations += 1;
            let j0 = e.phi / eps;
            let g_over_eps = e.grad.scale(1.0 / eps);
            let mut accepted = None;
            while step > 1e-16 {
                let cand = retract(e.v.axpy(step, &d), r);
                let delta = cand.axpy(-1.0, &e.v);
                let slope = g_over_eps.l2_inner(&delta);
                match evaluate(ctx, &cand, eps, &cfg.range, Some(&e.range.w)) {
                    Ok(next) => {
                        range_iterations += next.range.iterations;
                        if next.phi / eps <= j0 + cfg.armijo_c * slope {
                            accepted = Some(next);
                            break;
                        }
                    }
                    // far steps may leave the contraction regime of the range map
                    Err(Error::Diverged { .. } | Error::MaxIterations { .. } | Error::EvaluationDomain(_)) => {}
                    Err(err) => return Err(err),
                }
                step *= 0.5;
            }
            match accepted {
                Some(next) => {
                    // Barzilai-Borwein guess for the next trial step, in the H1 metric
                    let dv = next.v.axpy(-1.0, &e.v);
                    let curvature = next.grad.axpy(-1.0, &e.grad).l2_inner(&dv) / eps;
                    step = if curvature > 0.0 { (dv.h1_inner(&dv) / curvature).min(MAX_STEP) } else { 2.0 * step };
                    e = next;
                    history.push(e.phi / eps);
                }
                None => break,
            }
        }
        let on_boundary = e.v.h1_norm() >= r - cfg.margin;
        if !on_boundary || doublings >= cfg.max_doublings {
            return Ok(finish(e, grad_norm * eps.abs(), r, cfg, converged, iterations, range_iterations, history));
        }
        doublings += 1;
        r *= 2.0;
        log::info!("minimiser on the boundary of the ball; doubling the radius to {r}");
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    e: Evaluation,
    grad_h1_norm: f64,
    r: f64,
    cfg: &MinimizerConfig,
    converged: bool,
    iterations: usize,
    range_iterations: usize,
    objective_history: Vec<f64>,
) -> ReducedState {
    let v_h1 = e.v.h1_norm();
    ReducedState {
        interior: v_h1 < r - cfg.margin,
        v: e.v,
        w: e.range.w,
        u: e.u,
        phi_value: e.phi,
        grad: e.grad,
        grad_h1_norm,
        v_h1,
        r_ball: r,
        converged,
        iterations,
        range_iterations,
        objective_history,
    }
}

/// Converged states from `init` and `cfg.n_restarts` random starts, best first, duplicates removed.
#[derive(Debug, Clone)]
pub struct MultiStart {
    pub states: Vec<ReducedState>,
}

impl MultiStart {
    pub fn best(&self) -> &ReducedState {
        &self.states[0]
    }
}

/// Random starting profiles: three active modes, scaled into the inner half of the ball.
pub fn random_starts(n: usize, r_ball: f64, modes: usize, seed: u64) -> Vec<KernelElement> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let v = KernelElement::new(TorusProfile::random(&mut rng, 3.min(modes), 1.0).resized(modes));
            let s = 0.5 * r_ball / v.h1_norm().max(f64::MIN_POSITIVE);
            v.scale(s.min(1.0))
        })
        .collect()
}

pub fn minimize_multistart(
    ctx: &SolverContext<'_>,
    r_ball: f64,
    eps: f64,
    init: &KernelElement,
    cfg: &MinimizerConfig,
) -> Result<MultiStart> {
    let mut starts = vec![init.clone()];
    starts.extend(random_starts(cfg.n_restarts, r_ball, ctx.disc.kernel_modes(), cfg.seed));
    let runs: Vec<Result<ReducedState>> =
        starts.par_iter().map(|s| minimize_in_ball(ctx, r_ball, eps, s, cfg)).collect();
    let mut states = Vec::new();
    for run in runs {
        match run {
            Ok(s) => states.push(s),
            // a failed random start does not invalidate the others
            Err(err) if states.is_empty() && starts.len() == 1 => return Err(err),
            Err(err) => log::warn!("multistart run failed: {err}"),
        }
    }
    if states.is_empty() {
        return Err(Error::NotConverged { iterations: 0, grad_norm: f64::NAN });
    }
    // order by J = Phi / eps, smallest first
    let key = |s: &ReducedState| if eps == 0.0 { 0.0 } else { s.phi_value / eps };
    states.sort_by(|a, b| key(a).total_cmp(&key(b)));
    let mut distinct: Vec<ReducedState> = Vec::new();
    for s in states {
        let dup = distinct.iter().any(|d| {
            let diff = d.v.axpy(-1.0, &s.v).l2_norm();
            diff <= 1e-6 * (1.0 + d.v.l2_norm())
        });
        if !dup {
            distinct.push(s);
        }
    }
    Ok(MultiStart { states: distinct })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Discretization;
    use crate::forcing::ForcingSpec;
    use crate::operators::OperatorWorkspace;
    use std::sync::Arc;

    fn cubic() -> ForcingSpec {
        ForcingSpec::custom(
            "u^3 + u^2 + sin 2x",
            Arc::new(|_, x, u, _| u.powi(3) + u * u + (2.0 * x).sin()),
            Arc::new(|_, _, u, _| 3.0 * u * u + 2.0 * u),
            Some(Arc::new(|_, x, u, _| u.powi(4) / 4.0 + u.powi(3) / 3.0 + (2.0 * x).sin() * u)),
        )
    }

    fn random_v(seed: u64, modes: usize, amp: f64) -> KernelElement {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        KernelElement::new(TorusProfile::random(&mut rng, 3, amp).resized(modes))
    }

    #[test]
    fn zero_eps_is_stationary() {
        let d = Discretization::default();
        let ws = OperatorWorkspace::new(d.truncation());
        let f = cubic();
        let ctx = SolverContext::new(&d, &ws, &f);
        let v = random_v(1, d.kernel_modes(), 0.3);
        let cfg = RangeConfig::default();
        assert_eq!(reduced_functional(&ctx, &v, 0.0, &cfg).unwrap(), 0.0);
        assert_eq!(reduced_gradient(&ctx, &v, 0.0, &cfg).unwrap().h1_norm(), 0.0);
        let s = minimize_in_ball(&ctx, 10.0, 0.0, &v, &MinimizerConfig::default()).unwrap();
        assert_eq!(s.v, v);
        assert!(s.converged && s.iterations == 0);
    }

    #[test]
    fn two_formulas_for_phi_agree() {
        let d = Discretization::default();
        let ws = OperatorWorkspace::new(d.truncation());
        let f = cubic();
        let ctx = SolverContext::new(&d, &ws, &f);
        let cfg = RangeConfig::default();
        for seed in 0..3 {
            let v = random_v(seed, d.kernel_modes(), 0.3);
            let e = evaluate(&ctx, &v, 0.02, &cfg, None).unwrap();
            let psi = action(&ctx, &v, &e.range.w, 0.02).unwrap();
            assert!((e.phi - psi).abs() < 1e-9 * (1.0 + psi.abs()), "{} {}", e.phi, psi);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let d = Discretization::default();
        let ws = OperatorWorkspace::new(d.truncation());
        let f = cubic();
        let ctx = SolverContext::new(&d, &ws, &f);
        let cfg = RangeConfig { tol: 1e-13, max_iter: 200 };
        let eps = 0.05;
        let v = random_v(7, d.kernel_modes(), 0.3);
        let phi = random_v(8, d.kernel_modes(), 0.3);
        let g = reduced_gradient(&ctx, &v, eps, &cfg).unwrap().l2_inner(&phi);
        let err = |delta: f64| {
            let p = reduced_functional(&ctx, &v.axpy(delta, &phi), eps, &cfg).unwrap();
            let m = reduced_functional(&ctx, &v.axpy(-delta, &phi), eps, &cfg).unwrap();
            ((p - m) / (2.0 * delta) - g).abs()
        };
        let (e1, e2) = (err(1e-2), err(5e-3));
        assert!((e1 / e2).log2() > 1.9, "{e1:e} {e2:e}");
        let dd = directional_derivative(&ctx, &v, &phi, eps, &cfg).unwrap();
        assert!((eps * dd.value - g).abs() < 1e-12 * (1.0 + g.abs()));
        assert!((dd.admissibility - v.h1_inner(&phi)).abs() == 0.0);
    }

    #[test]
    fn descent_is_monotone_and_stays_in_ball() {
        let d = Discretization::default();
        let ws = OperatorWorkspace::new(d.truncation());
        // J is coercive for u + u^3 forcing, so descent from any start converges
        let f = ForcingSpec::custom(
            "u + u^3 + sin t sin x",
            Arc::new(|t, x, u, _| u + u.powi(3) + t.sin() * x.sin()),
            Arc::new(|_, _, u, _| 1.0 + 3.0 * u * u),
            None,
        );
        let ctx = SolverContext::new(&d, &ws, &f);
        let init = random_v(3, d.kernel_modes(), 0.5);
        let cfg = MinimizerConfig { tol_grad: 1e-8, ..Default::default() };
        let r = init.h1_norm() * 1.01;
        let s = minimize_in_ball(&ctx, r, 0.01, &init, &cfg).unwrap();
        assert!(s.converged, "{} {} {} {}", s.iterations, s.grad_h1_norm, s.v_h1, s.r_ball);
        for w in s.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(s.v_h1 <= s.r_ball + 1e-12);
        assert!(s.interior);
        let dd = directional_derivative(&ctx, &s.v, &h1_riesz(&s.grad), 0.01, &cfg.range).unwrap();
        assert!(dd.value.abs() <= 1e-6, "{dd:?}");
    }

    #[test]
    fn negative_eps_maximises() {
        let d = Discretization::default();
        let ws = OperatorWorkspace::new(d.truncation());
        let f = ForcingSpec::custom(
            "u + u^3 + sin t sin x",
            Arc::new(|t, x, u, _| u + u.powi(3) + t.sin() * x.sin()),
            Arc::new(|_, _, u, _| 1.0 + 3.0 * u * u),
            None,
        );
        let ctx = SolverContext::new(&d, &ws, &f);
        let cfg = MinimizerConfig { tol_grad: 1e-8, ..Default::default() };
        let init = KernelElement::zero(d.kernel_modes());
        let s = minimize_in_ball(&ctx, 5.0, -0.01, &init, &cfg).unwrap();
        assert!(s.converged && s.interior);
        for w in s.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        let phi0 = reduced_functional(&ctx, &init, -0.01, &cfg.range).unwrap();
        assert!(s.phi_value >= phi0);
    }
}
