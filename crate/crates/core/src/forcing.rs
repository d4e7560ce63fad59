//! Nonlinearities `f(t, x, u; eps)`: the catalog families, custom closures and the
//! rescaled problem used near a positive solution `H` of `box H = h`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{Discretization, Grid, GridField, KernelElement};
use crate::identities::SymmetricWeight;
use crate::operators::OperatorWorkspace;
use crate::quadrature::GaussLegendre;

/// `(t, x, u) -> value`.
pub type Fn3 = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
/// `(t, x, u, eps) -> value`.
pub type Fn4 = Arc<dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync>;
/// `x -> value`.
pub type XFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Relative kernel energy above which a forcing term is not accepted as lying in the range.
pub const KERNEL_TOLERANCE: f64 = 1e-10;

const PRIMITIVE_NODES: usize = 16;

/// A grid node: indices and coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub i: usize,
    pub q: usize,
    pub t: f64,
    pub x: f64,
}

/// A pointwise nonlinearity with its `u`-derivative and primitive.
pub trait Forcing: Send + Sync {
    /// Grid the forcing is sampled on, if it carries grid data.
    fn grid(&self) -> Option<Grid> {
        None
    }

    fn f(&self, n: Node, u: f64, eps: f64) -> f64;

    fn f_u(&self, n: Node, u: f64, eps: f64) -> f64;

    /// `F = int_0^u f(xi) d xi`; Gauss-Legendre in `xi` unless overridden.
    fn primitive(&self, n: Node, u: f64, eps: f64) -> f64 {
        gauss_primitive(|xi| self.f(n, xi, eps), u)
    }
}

fn gauss_primitive<F: Fn(f64) -> f64>(f: F, u: f64) -> f64 {
    thread_local! {
        static RULE: GaussLegendre = GaussLegendre::new(PRIMITIVE_NODES);
    }
    RULE.with(|g| g.integrate(0.0, u, 1, f))
}

fn check_grid(forcing: &dyn Forcing, grid: Grid) -> Result<()> {
    match forcing.grid() {
        Some(g) if g != grid => Err(Error::DimensionMismatch(format!(
            "forcing sampled on {}x{} but field is {}x{}",
            g.nt, g.nx, grid.nt, grid.nx
        ))),
        _ => Ok(()),
    }
}

fn pointwise<F: Fn(Node, f64) -> f64>(forcing: &dyn Forcing, u: &GridField, op: F) -> Result<GridField> {
    let grid = u.grid();
    check_grid(forcing, grid)?;
    let cols = grid.cols();
    let mut values = Vec::with_capacity(grid.len());
    for (k, &uk) in u.values().iter().enumerate() {
        let (i, q) = (k / cols, k % cols);
        let v = op(Node { i, q, t: grid.t(i), x: grid.x(q) }, uk);
        if !v.is_finite() {
            return Err(Error::EvaluationDomain(format!("non-finite value at t={}, x={}, u={uk}", grid.t(i), grid.x(q))));
        }
        values.push(v);
    }
    GridField::from_values(grid, values)
}

/// Nemitskii operator `u -> f(t, x, u; eps)`.
pub fn evaluate_f(forcing: &dyn Forcing, u: &GridField, eps: f64) -> Result<GridField> {
    pointwise(forcing, u, |n, v| forcing.f(n, v, eps))
}

pub fn evaluate_f_u(forcing: &dyn Forcing, u: &GridField, eps: f64) -> Result<GridField> {
    pointwise(forcing, u, |n, v| forcing.f_u(n, v, eps))
}

pub fn evaluate_primitive(forcing: &dyn Forcing, u: &GridField, eps: f64) -> Result<GridField> {
    pointwise(forcing, u, |n, v| forcing.primitive(n, v, eps))
}

/// The catalog of nonlinearities.
#[derive(Clone)]
pub enum ForcingKind {
    /// `beta u^{2k} + h`.
    Theorem1 { k: u32, beta: f64, h: GridField },
    /// `beta(x) u^{2k} + R(t, x, u) + h`.
    Theorem2 { k: u32, beta: XFn, r: Fn3, r_u: Fn3, h: GridField },
    /// `f~(t, x, u) + a(x, u)` with `d_u f~ >= beta_min > 0` and `a` of definite parity.
    Theorem3 { f_tilde: Fn3, f_tilde_u: Fn3, a: SymmetricWeight, beta_min: f64 },
    /// Arbitrary `f(t, x, u, eps)`; the closures must be pure.
    Custom { f: Fn4, f_u: Fn4, primitive: Option<Fn4> },
}

/// A validated nonlinearity.
#[derive(Clone)]
pub struct ForcingSpec {
    pub name: String,
    pub kind: ForcingKind,
}

impl fmt::Debug for ForcingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ForcingSpec").field("name", &self.name).finish_non_exhaustive()
    }
}

/// Fails unless `h` is (numerically) orthogonal to the kernel.
pub fn check_in_range(disc: &Discretization, h: &GridField) -> Result<()> {
    let s = disc.analyze(h)?;
    let fraction = s.kernel_energy_fraction();
    if fraction > KERNEL_TOLERANCE {
        return Err(Error::KernelComponent { energy: fraction, tolerance: KERNEL_TOLERANCE });
    }
    Ok(())
}

impl ForcingSpec {
    pub fn theorem1(k: u32, beta: f64, h: GridField, disc: &Discretization) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidForcing("k must be positive".into()));
        }
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::InvalidForcing(format!("beta must be nonzero, got {beta}")));
        }
        check_in_range(disc, &h)?;
        Ok(Self { name: format!("theorem1(k={k}, beta={beta})"), kind: ForcingKind::Theorem1 { k, beta, h } })
    }

    pub fn theorem2(k: u32, beta: XFn, r: Fn3, r_u: Fn3, h: GridField, disc: &Discretization) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidForcing("k must be positive".into()));
        }
        let xs: Vec<f64> = (1..64).map(|q| PI * q as f64 / 64.0).collect();
        let sign = beta(PI / 2.0).signum();
        for &x in &xs {
            let b = beta(x);
            if b * sign <= 0.0 || !b.is_finite() {
                return Err(Error::InvalidForcing(format!("beta changes sign or vanishes at x={x}")));
            }
            if (beta(PI - x) - b).abs() > 1e-10 * (1.0 + b.abs()) {
                return Err(Error::InvalidForcing(format!("beta(pi - x) != beta(x) at x={x}")));
            }
        }
        // remainder must be o(u^{2k}); sampled ratios should shrink towards u = 0
        let ratio = |u: f64| {
            let mut m: f64 = 0.0;
            for &x in &[0.3, 1.1, 2.0] {
                for &t in &[0.0, 1.7, 4.1] {
                    m = m.max(r(t, x, u).abs().max(r(t, x, -u).abs()) / u.powi(2 * k as i32));
                }
            }
            m
        };
        let (r_big, r_small) = (ratio(1e-1), ratio(1e-4));
        if !(r_small <= r_big.max(1e-12) && r_small < 1e-2) {
            log::warn!("remainder does not look like o(u^{}): sampled ratios {r_big:.3e} at 1e-1, {r_small:.3e} at 1e-4", 2 * k);
        }
        check_in_range(disc, &h)?;
        Ok(Self { name: format!("theorem2(k={k})"), kind: ForcingKind::Theorem2 { k, beta, r, r_u, h } })
    }

    /// Checks `d_u f~ >= beta_min` on a sample of `T x [0, pi] x [-u_box, u_box]`.
    pub fn theorem3(f_tilde: Fn3, f_tilde_u: Fn3, a: SymmetricWeight, beta_min: f64, u_box: f64) -> Result<Self> {
        if !(beta_min > 0.0) {
            return Err(Error::InvalidForcing(format!("beta_min must be positive, got {beta_min}")));
        }
        for i in 0..16 {
            let t = 2.0 * PI * i as f64 / 16.0;
            for q in 0..=8 {
                let x = PI * q as f64 / 8.0;
                for s in -8..=8 {
                    let u = u_box * s as f64 / 8.0;
                    let d = f_tilde_u(t, x, u);
                    if !(d >= beta_min) {
                        return Err(Error::InvalidForcing(format!(
                            "d_u f~ = {d} < beta_min = {beta_min} at (t, x, u) = ({t:.3}, {x:.3}, {u:.3})"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            name: format!("theorem3({} weight)", a.class),
            kind: ForcingKind::Theorem3 { f_tilde, f_tilde_u, a, beta_min },
        })
    }

    pub fn custom(name: impl Into<String>, f: Fn4, f_u: Fn4, primitive: Option<Fn4>) -> Self {
        Self { name: name.into(), kind: ForcingKind::Custom { f, f_u, primitive } }
    }

    /// `u^2 - v0^2`: every `u = +-v0` solves the equation exactly, next to the small solution.
    pub fn multiplicity(v0: KernelElement) -> Self {
        let v1 = v0.clone();
        Self::custom(
            "multiplicity(u^2 - v0^2)",
            Arc::new(move |t, x, u, _| u * u - v0.eval(t, x).powi(2)),
            Arc::new(|_, _, u, _| 2.0 * u),
            Some(Arc::new(move |t, x, u, _| u.powi(3) / 3.0 - v1.eval(t, x).powi(2) * u)),
        )
    }

    /// The forcing term `h` of the resonant families.
    pub fn h(&self) -> Option<&GridField> {
        match &self.kind {
            ForcingKind::Theorem1 { h, .. } | ForcingKind::Theorem2 { h, .. } => Some(h),
            _ => None,
        }
    }

    pub fn k(&self) -> Option<u32> {
        match &self.kind {
            ForcingKind::Theorem1 { k, .. } | ForcingKind::Theorem2 { k, .. } => Some(*k),
            _ => None,
        }
    }

    /// `beta(x)` of the resonant families.
    pub fn beta_at(&self, x: f64) -> Option<f64> {
        match &self.kind {
            ForcingKind::Theorem1 { beta, .. } => Some(*beta),
            ForcingKind::Theorem2 { beta, .. } => Some(beta(x)),
            _ => None,
        }
    }

    /// Whether the solve goes through the rescaling around `H`.
    pub fn is_resonant(&self) -> bool {
        matches!(self.kind, ForcingKind::Theorem1 { .. } | ForcingKind::Theorem2 { .. })
    }
}

impl Forcing for ForcingSpec {
    fn grid(&self) -> Option<Grid> {
        self.h().map(GridField::grid)
    }

    fn f(&self, n: Node, u: f64, eps: f64) -> f64 {
        match &self.kind {
            ForcingKind::Theorem1 { k, beta, h } => beta * u.powi(2 * *k as i32) + h.get(n.i, n.q),
            ForcingKind::Theorem2 { k, beta, r, h, .. } => {
                beta(n.x) * u.powi(2 * *k as i32) + r(n.t, n.x, u) + h.get(n.i, n.q)
            }
            ForcingKind::Theorem3 { f_tilde, a, .. } => f_tilde(n.t, n.x, u) + (a.a)(n.x, u),
            ForcingKind::Custom { f, .. } => f(n.t, n.x, u, eps),
        }
    }

    fn f_u(&self, n: Node, u: f64, eps: f64) -> f64 {
        match &self.kind {
            ForcingKind::Theorem1 { k, beta, .. } => 2.0 * *k as f64 * beta * u.powi(2 * *k as i32 - 1),
            ForcingKind::Theorem2 { k, beta, r_u, .. } => {
                2.0 * *k as f64 * beta(n.x) * u.powi(2 * *k as i32 - 1) + r_u(n.t, n.x, u)
            }
            ForcingKind::Theorem3 { f_tilde_u, a, .. } => f_tilde_u(n.t, n.x, u) + (a.a_u)(n.x, u),
            ForcingKind::Custom { f_u, .. } => f_u(n.t, n.x, u, eps),
        }
    }

    fn primitive(&self, n: Node, u: f64, eps: f64) -> f64 {
        match &self.kind {
            ForcingKind::Theorem1 { k, beta, h } => {
                let p = 2 * *k as i32 + 1;
                beta * u.powi(p) / p as f64 + h.get(n.i, n.q) * u
            }
            ForcingKind::Theorem2 { k, beta, r, h, .. } => {
                let p = 2 * *k as i32 + 1;
                beta(n.x) * u.powi(p) / p as f64 + gauss_primitive(|xi| r(n.t, n.x, xi), u) + h.get(n.i, n.q) * u
            }
            ForcingKind::Custom { primitive: Some(pf), .. } => pf(n.t, n.x, u, eps),
            _ => gauss_primitive(|xi| self.f(n, xi, eps), u),
        }
    }
}

/// The problem for `u~` after substituting `u = eps (H + u~)` and `eps~ = eps^{2k}`:
/// `box u~ = eps~ f*(u~)` with `f* = beta (H + u~)^{2k} + eps~^{-1} R(eps (H + u~))`.
///
/// When `beta H < 0` the problem is flipped to `box u~ = (-eps~)(-f*)` so that the
/// inner solve always sees a positive leading coefficient; [`RescaledProblem::inner_eps`]
/// gives the inner parameter.
#[derive(Clone)]
pub struct RescaledProblem {
    pub original: ForcingSpec,
    pub big_h: GridField,
    /// Sign of the original `eps`, needed inside the remainder.
    pub eps_sign: f64,
    /// Whether `beta H < 0` forced the sign flip.
    pub flipped: bool,
    k: u32,
}

impl fmt::Debug for RescaledProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RescaledProblem")
            .field("original", &self.original)
            .field("eps_sign", &self.eps_sign)
            .field("flipped", &self.flipped)
            .finish_non_exhaustive()
    }
}

/// Substitute `u = eps (H + u~)` in a resonant forcing.
pub fn rescale_resonant(spec: &ForcingSpec, big_h: &GridField) -> Result<RescaledProblem> {
    let k = spec
        .k()
        .ok_or_else(|| Error::InvalidForcing(format!("{} has no resonant rescaling", spec.name)))?;
    let grid = big_h.grid();
    if spec.grid() != Some(grid) {
        return Err(Error::DimensionMismatch("H and h live on different grids".into()));
    }
    let (mut pos, mut neg) = (false, false);
    for i in 0..grid.nt {
        for q in 1..grid.nx {
            let bh = spec.beta_at(grid.x(q)).unwrap_or(1.0) * big_h.get(i, q);
            pos |= bh > 0.0;
            neg |= bh < 0.0;
        }
    }
    if pos == neg {
        return Err(Error::SignMismatch);
    }
    Ok(RescaledProblem { original: spec.clone(), big_h: big_h.clone(), eps_sign: 1.0, flipped: neg, k })
}

impl RescaledProblem {
    pub fn k(&self) -> u32 {
        self.k
    }

    /// Same problem for an original parameter of the given sign.
    pub fn with_eps_sign(mut self, eps: f64) -> Self {
        self.eps_sign = if eps < 0.0 { -1.0 } else { 1.0 };
        self
    }

    /// `eps~ = eps^{2k}`.
    pub fn eps_tilde(&self, eps: f64) -> f64 {
        eps.powi(2 * self.k as i32)
    }

    /// Parameter of the inner problem: `eps~`, negated when flipped.
    pub fn inner_eps(&self, eps: f64) -> f64 {
        let e = self.eps_tilde(eps);
        if self.flipped {
            -e
        } else {
            e
        }
    }

    fn flip(&self) -> f64 {
        if self.flipped {
            -1.0
        } else {
            1.0
        }
    }

    /// `R*(u~; eps~) = eps~^{-1} R(sign * eps~^{1/2k} (H + u~))`, zero at `eps~ = 0`.
    pub fn remainder(&self, n: Node, ut: f64, eps_tilde: f64) -> f64 {
        match &self.original.kind {
            ForcingKind::Theorem2 { r, .. } if eps_tilde != 0.0 => {
                let e = eps_tilde.abs();
                let scale = self.eps_sign * e.powf(1.0 / (2 * self.k) as f64);
                r(n.t, n.x, scale * (self.big_h.get(n.i, n.q) + ut)) / e
            }
            _ => 0.0,
        }
    }

    fn remainder_u(&self, n: Node, ut: f64, eps_tilde: f64) -> f64 {
        match &self.original.kind {
            ForcingKind::Theorem2 { r_u, .. } if eps_tilde != 0.0 => {
                let e = eps_tilde.abs();
                let scale = self.eps_sign * e.powf(1.0 / (2 * self.k) as f64);
                r_u(n.t, n.x, scale * (self.big_h.get(n.i, n.q) + ut)) * scale / e
            }
            _ => 0.0,
        }
    }

    /// `u = eps (H + u~)`.
    pub fn map_back(&self, u_tilde: &GridField, eps: f64) -> GridField {
        (&self.big_h + u_tilde).scale(eps)
    }
}

impl Forcing for RescaledProblem {
    fn grid(&self) -> Option<Grid> {
        Some(self.big_h.grid())
    }

    fn f(&self, n: Node, ut: f64, eps: f64) -> f64 {
        let b = self.original.beta_at(n.x).expect("resonant family");
        let base = self.big_h.get(n.i, n.q) + ut;
        self.flip() * (b * base.powi(2 * self.k as i32) + self.remainder(n, ut, eps))
    }

    fn f_u(&self, n: Node, ut: f64, eps: f64) -> f64 {
        let b = self.original.beta_at(n.x).expect("resonant family");
        let base = self.big_h.get(n.i, n.q) + ut;
        self.flip() * (2.0 * self.k as f64 * b * base.powi(2 * self.k as i32 - 1) + self.remainder_u(n, ut, eps))
    }

    fn primitive(&self, n: Node, ut: f64, eps: f64) -> f64 {
        let b = self.original.beta_at(n.x).expect("resonant family");
        let hh = self.big_h.get(n.i, n.q);
        let p = 2 * self.k as i32 + 1;
        let lead = b * ((hh + ut).powi(p) - hh.powi(p)) / p as f64;
        let rem = match self.original.kind {
            ForcingKind::Theorem2 { .. } => gauss_primitive(|xi| self.remainder(n, xi, eps), ut),
            _ => 0.0,
        };
        self.flip() * (lead + rem)
    }
}

/// Constants of the contraction argument for the range equation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ContractionConstants {
    pub c0: f64,
    pub eps0: f64,
    /// Sampled `max |f| + |f_u|`.
    pub max_f: f64,
    pub cbar: f64,
}

/// `C0 = 1 + sqrt(2) pi cbar max(|f| + |f_u|)` over the grid, `|u| <= 3R + 1` and `eps = +-1`;
/// `eps0 = 1 / (2 C0)`. The maximum is sampled, so `eps0` is an estimate.
pub fn contraction_constants(forcing: &dyn Forcing, r_ball: f64, ws: &OperatorWorkspace, grid: Grid) -> ContractionConstants {
    let grid = forcing.grid().unwrap_or(grid);
    let umax = 3.0 * r_ball + 1.0;
    let nu = 64;
    let mut m: f64 = 0.0;
    for i in 0..grid.nt {
        for q in 0..grid.cols() {
            let n = Node { i, q, t: grid.t(i), x: grid.x(q) };
            for s in 0..nu {
                let u = -umax + 2.0 * umax * s as f64 / (nu - 1) as f64;
                for eps in [-1.0, 1.0] {
                    m = m.max(forcing.f(n, u, eps).abs() + forcing.f_u(n, u, eps).abs());
                }
            }
        }
    }
    let c0 = 1.0 + 2f64.sqrt() * PI * ws.cbar() * m;
    ContractionConstants { c0, eps0: 1.0 / (2.0 * c0), max_f: m, cbar: ws.cbar() }
}
