//! Picard iteration for the range equation `w = eps box^{-1} P_range f(v + w, eps)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Discretization, GridField, KernelElement, SpectralField};
use crate::forcing::{evaluate_f, Forcing};
use crate::operators::OperatorWorkspace;

/// Everything a solve needs besides the unknowns.
#[derive(Clone, Copy)]
pub struct SolverContext<'a> {
    pub disc: &'a Discretization,
    pub ws: &'a OperatorWorkspace,
    pub forcing: &'a dyn Forcing,
}

impl<'a> SolverContext<'a> {
    pub fn new(disc: &'a Discretization, ws: &'a OperatorWorkspace, forcing: &'a dyn Forcing) -> Self {
        Self { disc, ws, forcing }
    }

    /// `eps box^{-1} P_range f(u)` for the grid field `u`.
    pub fn range_map(&self, u: &GridField, eps: f64) -> Result<SpectralField> {
        let f = evaluate_f(self.forcing, u, eps)?;
        Ok(self.ws.inverse_on_range(&self.disc.analyze_interior(&f)).scale(eps))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RangeConfig {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct RangeSolution {
    /// Range-mode coefficients of `w`.
    pub w: SpectralField,
    /// `w` on the grid.
    pub w_grid: GridField,
    pub iterations: usize,
    /// `|| w - eps box^{-1} P_range f(v + w) ||_{L2}` at the returned `w`.
    pub residual: f64,
    /// Largest observed ratio of successive Picard steps (0 when too few steps to tell).
    pub contraction_estimate: f64,
}

/// Iterate from `w0` (default 0) until successive iterates differ by less than `cfg.tol` in L2.
pub fn solve_range(
    ctx: &SolverContext<'_>,
    v: &KernelElement,
    eps: f64,
    cfg: &RangeConfig,
    w0: Option<&SpectralField>,
) -> Result<RangeSolution> {
    if !(cfg.tol > 0.0) {
        return Err(Error::Config(format!("range tolerance must be positive, got {}", cfg.tol)));
    }
    let vg = ctx.disc.kernel_embed(v);
    solve_range_grid(ctx, &vg, v.l2_norm(), eps, cfg, w0)
}

/// [`solve_range`] for an already embedded kernel element `vg` with L2 norm `v_norm`.
pub fn solve_range_grid(
    ctx: &SolverContext<'_>,
    vg: &GridField,
    v_norm: f64,
    eps: f64,
    cfg: &RangeConfig,
    w0: Option<&SpectralField>,
) -> Result<RangeSolution> {
    let trunc = ctx.disc.truncation();
    let mut w = match w0 {
        Some(w0) if w0.truncation() == trunc => w0.range_part(),
        Some(_) => return Err(Error::DimensionMismatch("warm start has the wrong truncation".into())),
        None => SpectralField::zeros(trunc),
    };
    let bound = 10.0 * (v_norm + 1.0);
    let mut w_grid = ctx.disc.synthesize_unchecked(&w);
    let mut prev_step = f64::NAN;
    let mut contraction: f64 = 0.0;
    for it in 1..=cfg.max_iter {
        let next = ctx.range_map(&(vg + &w_grid), eps)?;
        let step = (&next - &w).l2_norm();
        let norm = next.l2_norm();
        if !norm.is_finite() || norm > bound {
            return Err(Error::Diverged { iterations: it, norm });
        }
        // ratios are only meaningful while both steps are above round-off
        let floor = 1e-13 * (1.0 + norm);
        if prev_step > floor && step > floor {
            contraction = contraction.max(step / prev_step);
        }
        prev_step = step;
        w = next;
        w_grid = ctx.disc.synthesize_unchecked(&w);
        if step < cfg.tol {
            let residual = (&ctx.range_map(&(vg + &w_grid), eps)? - &w).l2_norm();
            return Ok(RangeSolution { w, w_grid, iterations: it, residual, contraction_estimate: contraction });
        }
    }
    Err(Error::MaxIterations { iterations: cfg.max_iter, contraction, step: prev_step })
}

/// `|| w - eps box^{-1} P_range f(v + w) ||_{L2}`.
pub fn range_residual(ctx: &SolverContext<'_>, v: &KernelElement, w: &SpectralField, eps: f64) -> Result<f64> {
    let u = &ctx.disc.kernel_embed(v) + &ctx.disc.synthesize(w)?;
    Ok((&ctx.range_map(&u, eps)? - &w.range_part()).l2_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::TorusProfile;
    use crate::forcing::ForcingSpec;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn sin2x(disc: &Discretization) -> SpectralField {
        let mut s = SpectralField::zeros(disc.truncation());
        s.set(0, 2, Complex64::new(1.0, 0.0));
        s
    }

    #[test]
    fn zero_eps_gives_zero() {
        let d = Discretization::default();
        let ws = OperatorWorkspace::new(d.truncation());
        let f = ForcingSpec::custom("u^2+1", Arc::new(|_, _, u, _| u * u + 1.0), Arc::new(|_, _, u, _| 2.0 * u), None);
        let ctx = SolverContext::new(&d, &ws, &f);
        let v = KernelElement::new(TorusProfile::cosine(1, 2));
        let r = solve_range(&ctx, &v, 0.0, &RangeConfig::default(), None).unwrap();
        assert!(r.iterations <= 1);
        assert_eq!(r.w.energy(), 0.0);
    }

    #[test]
    fn constant_map_converges_after_one_step() {
        let d = Discretization::default();
        let ws = OperatorWorkspace::new(d.truncation());
        let f = ForcingSpec::custom("sin 2x", Arc::new(|_, x, _, _| (2.0 * x).sin()), Arc::new(|_, _, _, _| 0.0), None);
        let ctx = SolverContext::new(&d, &ws, &f);
        let r = solve_range(&ctx, &KernelElement::zero(1), 0.3, &RangeConfig::default(), None).unwrap();
        assert!(r.iterations <= 2);
        let exact = sin2x(&d).scale(0.3 / 4.0);
        assert!((&r.w - &exact).l2_norm() < 1e-15);
    }

    #[test]
    fn quadratic_forcing_small_eps() {
        let d = Discretization::default();
        let ws = OperatorWorkspace::new(d.truncation());
        let f = ForcingSpec::custom(
            "u^2 + sin 2x",
            Arc::new(|_, x, u, _| u * u + (2.0 * x).sin()),
            Arc::new(|_, _, u, _| 2.0 * u),
            None,
        );
        let ctx = SolverContext::new(&d, &ws, &f);
        let eps = 0.01;
        let r = solve_range(&ctx, &KernelElement::zero(1), eps, &RangeConfig::default(), None).unwrap();
        assert!(r.iterations <= 30 && r.residual <= 1e-12, "{} {}", r.iterations, r.residual);
        let first = sin2x(&d).scale(eps / 4.0);
        let dev = (&r.w - &first).l2_norm();
        assert!(dev < 10.0 * eps * eps * first.l2_norm() && dev > 0.0);
    }

    #[test]
    fn residual_is_linear_in_perturbation() {
        let d = Discretization::default();
        let ws = OperatorWorkspace::new(d.truncation());
        let f = ForcingSpec::custom(
            "u^2 + sin 2x",
            Arc::new(|_, x, u, _| u * u + (2.0 * x).sin()),
            Arc::new(|_, _, u, _| 2.0 * u),
            None,
        );
        let ctx = SolverContext::new(&d, &ws, &f);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = KernelElement::new(TorusProfile::random(&mut rng, 4, 0.5));
        let eps = 0.02;
        let sol = solve_range(&ctx, &v, eps, &RangeConfig::default(), None).unwrap();
        assert!(range_residual(&ctx, &v, &sol.w, eps).unwrap() < 1e-12);
        let r = |delta: f64| range_residual(&ctx, &v, &(&sol.w + &sin2x(&d).scale(delta)), eps).unwrap();
        let (a, b) = (r(1e-3), r(2e-3));
        assert!((b / a - 2.0).abs() < 1e-3, "{a} {b}");
        let zero = SpectralField::zeros(d.truncation());
        assert!(range_residual(&ctx, &v, &zero, eps).unwrap() > 0.0);
    }

    #[test]
    fn divergence_and_iteration_limit_are_reported() {
        let d = Discretization::default();
        let ws = OperatorWorkspace::new(d.truncation());
        let f = ForcingSpec::custom(
            "u^3 + sin x",
            Arc::new(|_, x, u, _| u.powi(3) + 50.0 * x.sin()),
            Arc::new(|_, _, u, _| 3.0 * u * u),
            None,
        );
        let ctx = SolverContext::new(&d, &ws, &f);
        let r = solve_range(&ctx, &KernelElement::zero(1), 1.0, &RangeConfig::default(), None);
        assert!(matches!(r, Err(Error::Diverged { .. })), "{r:?}");
        let cfg = RangeConfig { tol: 1e-14, max_iter: 2 };
        let r = solve_range(&ctx, &KernelElement::zero(1), 0.001, &cfg, None);
        assert!(matches!(r, Err(Error::MaxIterations { .. })), "{r:?}");
    }
}
