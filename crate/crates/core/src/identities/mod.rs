//! Numerical checks of the kernel identities and inequalities that the reduction relies on.
//!
//! Integrals over the strips `Omega_alpha = T x (alpha pi, pi - alpha pi)` are computed
//! either directly (trapezoid in `t`, composite Gauss-Legendre in `x`) or in the rotated
//! coordinates `s_+ = t + x`, `s_- = t - x`. The two paths share no nodes.

mod suite;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{embed_on_grid, Grid, GridField, KernelElement, TorusProfile};
use crate::quadrature::{GaussLegendre, UniformLagrange};

pub use suite::{run_identity_suite, IdentityCheck, IDENTITY_NAMES};

/// A real function on the strip.
pub trait Integrand: Sync {
    fn eval(&self, t: f64, x: f64) -> f64;
}

impl<F: Fn(f64, f64) -> f64 + Sync> Integrand for F {
    fn eval(&self, t: f64, x: f64) -> f64 {
        self(t, x)
    }
}

/// Off-grid evaluation of a [`GridField`]: trigonometric interpolation in `t`,
/// local sixth-order Lagrange interpolation in `x`.
pub struct GridInterpolant<'a> {
    field: &'a GridField,
    /// `spectra[q][k]` for `k = 0..=nt/2`.
    spectra: Vec<Vec<Complex64>>,
    lagrange: UniformLagrange,
}

impl<'a> GridInterpolant<'a> {
    pub fn new(field: &'a GridField) -> Self {
        let grid = field.grid();
        let nt = grid.nt;
        let fft = FftPlanner::new().plan_fft_forward(nt);
        let spectra = (0..grid.cols())
            .map(|q| {
                let mut col: Vec<Complex64> = field.column(q).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
                fft.process(&mut col);
                col.truncate(nt / 2 + 1);
                col.iter_mut().for_each(|c| *c /= nt as f64);
                col
            })
            .collect();
        Self { field, spectra, lagrange: UniformLagrange::new(grid.dx(), grid.cols(), 6) }
    }

    fn column_at(&self, q: usize, t: f64) -> f64 {
        let grid = self.field.grid();
        let pos = t.rem_euclid(2.0 * PI) / grid.dt();
        let node = pos.round();
        if (pos - node).abs() < 1e-12 {
            return self.field.get(node as usize % grid.nt, q);
        }
        let nt = grid.nt;
        let c = &self.spectra[q];
        let z = Complex64::from_polar(1.0, t);
        let mut zk = z;
        let mut acc = c[0].re;
        let top = if nt % 2 == 0 { nt / 2 } else { nt / 2 + 1 };
        for ck in &c[1..top] {
            acc += 2.0 * (ck * zk).re;
            zk *= z;
        }
        if nt % 2 == 0 {
            acc += (c[nt / 2] * zk).re;
        }
        acc
    }
}

impl Integrand for GridInterpolant<'_> {
    fn eval(&self, t: f64, x: f64) -> f64 {
        let mut w = [0.0; 6];
        let start = self.lagrange.stencil(x, &mut w[..self.lagrange.width]);
        w[..self.lagrange.width].iter().enumerate().map(|(k, wk)| wk * self.column_at(start + k, t)).sum()
    }
}

/// The strip `T x (alpha pi, pi - alpha pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StripDomain {
    pub alpha: f64,
}

impl StripDomain {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&alpha) {
            return Err(Error::AlphaOutOfRange(alpha));
        }
        Ok(Self { alpha })
    }

    /// Strip whose edges are the grid lines nearest to this one.
    pub fn snapped(&self, nx: usize) -> Self {
        let q = (self.alpha * nx as f64).round();
        Self { alpha: (q / nx as f64).min(0.5 - 0.5 / nx as f64) }
    }

    pub fn lower(&self) -> f64 {
        self.alpha * PI
    }

    pub fn upper(&self) -> f64 {
        PI - self.alpha * PI
    }

    pub fn area(&self) -> f64 {
        2.0 * PI * PI * (1.0 - 2.0 * self.alpha)
    }
}

/// Threshold `alpha_1 = 1/8`, `alpha_k = 1/(4(1 + 2k))` for `k >= 2`.
pub fn alpha_k(k: u32) -> f64 {
    if k <= 1 {
        0.125
    } else {
        1.0 / (4.0 * (1.0 + 2.0 * k as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StripPath {
    Direct,
    Rotated,
}

/// Tensor quadrature on a strip.
#[derive(Debug, Clone)]
pub struct StripQuadrature {
    /// Trapezoid nodes in the periodic direction.
    pub nt: usize,
    /// Gauss panels in the bounded direction.
    pub panels: usize,
    gauss: GaussLegendre,
}

impl Default for StripQuadrature {
    fn default() -> Self {
        Self::new(256, 64, 10)
    }
}

impl StripQuadrature {
    pub fn new(nt: usize, panels: usize, order: usize) -> Self {
        Self { nt, panels, gauss: GaussLegendre::new(order) }
    }

    pub fn integrate<A: Integrand + ?Sized>(&self, a: &A, strip: StripDomain, path: StripPath) -> f64 {
        match path {
            StripPath::Direct => self.direct(a, strip),
            StripPath::Rotated => self.rotated(a, strip),
        }
    }

    fn direct<A: Integrand + ?Sized>(&self, a: &A, strip: StripDomain) -> f64 {
        let xs = self.gauss.mapped(strip.lower(), strip.upper(), self.panels);
        let dt = 2.0 * PI / self.nt as f64;
        (0..self.nt)
            .into_par_iter()
            .map(|i| {
                let t = dt * i as f64;
                xs.iter().map(|&(x, w)| w * a.eval(t, x)).sum::<f64>()
            })
            .sum::<f64>()
            * dt
    }

    fn rotated<A: Integrand + ?Sized>(&self, a: &A, strip: StripDomain) -> f64 {
        let ds = 2.0 * PI / self.nt as f64;
        let width = 2.0 * PI * (1.0 - 2.0 * strip.alpha);
        let offsets = self.gauss.mapped(0.0, width, self.panels);
        (0..self.nt)
            .into_par_iter()
            .map(|i| {
                let sp = ds * i as f64;
                let lo = sp - 2.0 * PI + 2.0 * strip.alpha * PI;
                offsets
                    .iter()
                    .map(|&(o, w)| {
                        let sm = lo + o;
                        w * a.eval(0.5 * (sp + sm), 0.5 * (sp - sm))
                    })
                    .sum::<f64>()
            })
            .sum::<f64>()
            * ds
            * 0.5
    }
}

/// Strip integral of a grid field together with the strip actually used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StripIntegral {
    pub value: f64,
    pub alpha_requested: f64,
    pub alpha: f64,
}

/// Integral of `a` over the strip, with the strip edges snapped to the grid lines of `a`.
pub fn strip_integral(a: &GridField, alpha: f64, path: StripPath) -> Result<StripIntegral> {
    let requested = StripDomain::new(alpha)?;
    let strip = requested.snapped(a.grid().nx);
    let interp = GridInterpolant::new(a);
    let quad = StripQuadrature::new(a.grid().nt.max(64), 2 * a.grid().nx, 8);
    Ok(StripIntegral { value: quad.integrate(&interp, strip, path), alpha_requested: alpha, alpha: strip.alpha })
}

/// Strip integral of a closure (no snapping).
pub fn strip_integral_fn<A: Integrand + ?Sized>(a: &A, alpha: f64, path: StripPath) -> Result<f64> {
    let strip = StripDomain::new(alpha)?;
    Ok(StripQuadrature::default().integrate(a, strip, path))
}

/// Integral over the strip of the product of an odd number of kernel elements.
pub fn odd_product_integral(profiles: &[TorusProfile], alpha: f64) -> Result<f64> {
    if profiles.len() % 2 == 0 {
        return Err(Error::EvenCount(profiles.len()));
    }
    let f = |t: f64, x: f64| profiles.iter().map(|p| p.eval(t + x) - p.eval(t - x)).product::<f64>();
    strip_integral_fn(&f, alpha, StripPath::Direct)
}

/// Parity class of a weight `a(x, u)` under `x -> pi - x` and `u -> -u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SymmetryClass {
    /// `a(pi - x, u) = a(x, u)` and `a(x, -u) = a(x, u)`.
    Even,
    /// `a(pi - x, u) = -a(x, u)` and `a(x, -u) = -a(x, u)`.
    Odd,
}

impl FromStr for SymmetryClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "i" | "even" => Ok(Self::Even),
            "ii" | "odd" => Ok(Self::Odd),
            other => Err(Error::UnknownSymmetryClass(other.to_string())),
        }
    }
}

impl fmt::Display for SymmetryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Even => "even",
            Self::Odd => "odd",
        })
    }
}

pub type WeightFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A weight `a(x, u)` with its `u`-derivative and declared parity class.
#[derive(Clone)]
pub struct SymmetricWeight {
    pub class: SymmetryClass,
    pub a: WeightFn,
    pub a_u: WeightFn,
}

impl fmt::Debug for SymmetricWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymmetricWeight").field("class", &self.class).finish_non_exhaustive()
    }
}

impl SymmetricWeight {
    /// Checks the declared class on a fixed sample of `(x, u)`.
    pub fn new(class: SymmetryClass, a: WeightFn, a_u: WeightFn) -> Result<Self> {
        let sign = match class {
            SymmetryClass::Even => 1.0,
            SymmetryClass::Odd => -1.0,
        };
        for &x in &[0.1, 0.7, 1.3, 2.2] {
            for &u in &[-1.7, -0.4, 0.3, 2.1] {
                let v = a(x, u);
                let scale = 1e-10 * (1.0 + v.abs());
                if (a(PI - x, u) - sign * v).abs() > scale || (a(x, -u) - sign * v).abs() > scale {
                    return Err(Error::UnknownSymmetryClass(format!(
                        "weight does not have the declared {class} symmetry at x={x}, u={u}"
                    )));
                }
            }
        }
        Ok(Self { class, a, a_u })
    }
}

/// Which symmetric integral to form.
#[derive(Debug, Clone, Copy)]
pub enum SymmetryTerm<'a> {
    /// `int a(x, v) phi`.
    Value(&'a KernelElement),
    /// `int (d_u a)(x, v) phi_1 phi_2`.
    Derivative(&'a KernelElement, &'a KernelElement),
}

/// Strip integral that vanishes by the parity of the weight.
pub fn symmetry_integral(a: &SymmetricWeight, v: &KernelElement, term: SymmetryTerm<'_>, alpha: f64) -> Result<f64> {
    match term {
        SymmetryTerm::Value(phi) => {
            strip_integral_fn(&|t: f64, x: f64| (a.a)(x, v.eval(t, x)) * phi.eval(t, x), alpha, StripPath::Direct)
        }
        SymmetryTerm::Derivative(p1, p2) => strip_integral_fn(
            &|t: f64, x: f64| (a.a_u)(x, v.eval(t, x)) * p1.eval(t, x) * p2.eval(t, x),
            alpha,
            StripPath::Direct,
        ),
    }
}

/// `4^{-k}` times the minimum of `B` over grid nodes in the closed strip at `alpha_k`.
pub fn coercivity_constant(b: &GridField, k: u32) -> Result<f64> {
    let min_all = b.min();
    if min_all < -1e-10 {
        return Err(Error::NegativeWeight(min_all));
    }
    let strip = StripDomain::new(alpha_k(k))?;
    let grid = b.grid();
    let mut m = f64::INFINITY;
    for q in 0..grid.cols() {
        let x = grid.x(q);
        if x >= strip.lower() - 1e-12 && x <= strip.upper() + 1e-12 {
            for i in 0..grid.nt {
                m = m.min(b.get(i, q));
            }
        }
    }
    Ok(m.max(0.0) / 4f64.powi(k as i32))
}

/// `int B v^{2k} - c_k(B) int v^{2k}` by grid quadrature.
pub fn coercivity_gap(b: &GridField, v: &KernelElement, k: u32) -> Result<f64> {
    let c = coercivity_constant(b, k)?;
    let vg = embed_on_grid(b.grid(), |s| v.profile.eval(s));
    let p = vg.map(|u| u.powi(2 * k as i32));
    Ok(b.inner(&p) - c * p.integrate())
}

/// The soft threshold `q_M`: zero on `[-M, M]`, shifted identity outside.
pub fn soft_threshold(lambda: f64, m: f64) -> f64 {
    if lambda > m {
        lambda - m
    } else if lambda < -m {
        lambda + m
    } else {
        0.0
    }
}

/// The variation `q(p(t + x)) - q(p(t - x))` built from a kernel element `v = p(t + x) - p(t - x)`.
///
/// `q(p)` keeps its mean; the mean cancels in the difference.
#[derive(Debug, Clone)]
pub struct CutoffVariation {
    pub profile: TorusProfile,
    pub m: f64,
}

pub fn cutoff_variation(v: &KernelElement, m: f64) -> Result<CutoffVariation> {
    if !(m > 0.0) {
        return Err(Error::NonpositiveM(m));
    }
    Ok(CutoffVariation { profile: v.profile.clone(), m })
}

impl CutoffVariation {
    /// The clipped profile `q(p(s))`.
    pub fn q(&self, s: f64) -> f64 {
        soft_threshold(self.profile.eval(s), self.m)
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.q(t + x) - self.q(t - x)
    }

    pub fn embed(&self, grid: Grid) -> GridField {
        embed_on_grid(grid, |s| self.q(s))
    }

    /// `<v, phi>_{H1} = 2 pi [<p, q(p)> + 2 <p', q(p)'>]`, by trapezoid on `n` profile samples.
    pub fn h1_pairing(&self, n: usize) -> f64 {
        let dp = self.profile.derivative();
        let ds = 2.0 * PI / n as f64;
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        for k in 0..n {
            let s = ds * k as f64;
            let p = self.profile.eval(s);
            s0 += p * soft_threshold(p, self.m);
            if p.abs() > self.m {
                s1 += dp.eval(s).powi(2);
            }
        }
        2.0 * PI * ds * (s0 + 2.0 * s1)
    }
}

/// Worst relative margins of the three elementary power inequalities.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InequalityReport {
    pub k: u32,
    pub samples: usize,
    /// `2^{2k-1}(a^{2k} + b^{2k}) - (a - b)^{2k}`.
    pub upper: f64,
    /// `(a - b)^{2k} - [a^{2k} + b^{2k} - 2k(a^{2k-1} b + a b^{2k-1})]`; `None` for `k = 1`.
    pub lower: Option<f64>,
    /// `(a + b)^{2k-1} - a^{2k-1} - 4^{1-k} b^{2k-1}` for `b > 0`.
    pub odd_increment: f64,
}

fn rel(margin: f64, scale: f64) -> f64 {
    margin / (1.0 + scale)
}

/// Margins of the three inequalities at one point; `b > 0` is assumed for the last one.
pub fn inequality_margins(k: u32, a: f64, b: f64) -> (f64, Option<f64>, f64) {
    let n = 2 * k as i32;
    let lhs = (a - b).powi(n);
    let sum = a.powi(n) + b.powi(n);
    let upper = rel(2f64.powi(n - 1) * sum - lhs, lhs.abs() + sum);
    let lower = (k >= 2).then(|| {
        let rhs = sum - 2.0 * k as f64 * (a.powi(n - 1) * b + a * b.powi(n - 1));
        rel(lhs - rhs, lhs.abs() + rhs.abs() + sum)
    });
    let inc = (a + b).powi(n - 1) - a.powi(n - 1);
    let bound = 4f64.powi(1 - k as i32) * b.powi(n - 1);
    let odd = rel(inc - bound, (a + b).powi(n - 1).abs() + a.powi(n - 1).abs() + bound.abs());
    (upper, lower, odd)
}

/// Random samples from `[-10, 10]^2` plus the known equality points.
pub fn elementary_inequalities<R: Rng>(k: u32, samples: usize, rng: &mut R) -> InequalityReport {
    let mut report = InequalityReport {
        k,
        samples: 0,
        upper: f64::INFINITY,
        lower: (k >= 2).then_some(f64::INFINITY),
        odd_increment: f64::INFINITY,
    };
    let mut points: Vec<(f64, f64)> = vec![(1.0, -1.0), (-0.5, 1.0), (0.0, 1.0), (2.0, 1e-3)];
    points.extend((0..samples).map(|_| (rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0))));
    for (a, b) in points {
        let (u, l, _) = inequality_margins(k, a, b);
        report.upper = report.upper.min(u);
        if let (Some(w), Some(l)) = (report.lower.as_mut(), l) {
            *w = w.min(l);
        }
        let bp = if b > 0.0 { b } else { -b + 1e-3 };
        let (_, _, o) = inequality_margins(k, a, bp);
        report.odd_increment = report.odd_increment.min(o);
        report.samples += 1;
    }
    report
}

/// The three quantities in the `L^{2k}` comparison between a kernel element and its profile.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct L2kReport {
    pub k: u32,
    pub alpha: f64,
    /// `int_Omega v^{2k}`.
    pub full: f64,
    /// `int_{Omega_alpha} v^{2k}` at `alpha = alpha_k`.
    pub strip: f64,
    /// `int_0^{2pi} p^{2k}`.
    pub profile: f64,
    /// `pi 4^k profile - full`.
    pub upper_margin: f64,
    /// `strip - pi profile`.
    pub lower_margin: f64,
}

pub fn l2k_strip_bounds(v: &KernelElement, k: u32) -> L2kReport {
    let n = 2 * k as i32;
    let alpha = alpha_k(k);
    let f = |t: f64, x: f64| v.eval(t, x).powi(n);
    let quad = StripQuadrature::default();
    let full = quad.integrate(&f, StripDomain { alpha: 0.0 }, StripPath::Direct);
    let strip = quad.integrate(&f, StripDomain { alpha }, StripPath::Direct);
    let ns = 2048;
    let profile = v.profile.samples(ns).iter().map(|p| p.powi(n)).sum::<f64>() * 2.0 * PI / ns as f64;
    L2kReport {
        k,
        alpha,
        full,
        strip,
        profile,
        upper_margin: PI * 4f64.powi(k as i32) * profile - full,
        lower_margin: strip - PI * profile,
    }
}

/// Supremum of `|p|`, located on a sample grid and polished by Newton on `p'`.
pub fn profile_sup(p: &TorusProfile) -> f64 {
    let (lo, hi) = profile_extrema(p);
    lo.abs().max(hi.abs())
}

/// `(min p, max p)`.
pub fn profile_extrema(p: &TorusProfile) -> (f64, f64) {
    let n = (64 * p.modes()).max(1024);
    let samples = p.samples(n);
    let (mut imin, mut imax) = (0, 0);
    for (k, &v) in samples.iter().enumerate() {
        if v < samples[imin] {
            imin = k;
        }
        if v > samples[imax] {
            imax = k;
        }
    }
    let ds = 2.0 * PI / n as f64;
    (polish_extremum(p, ds * imin as f64, ds), polish_extremum(p, ds * imax as f64, ds))
}

fn polish_extremum(p: &TorusProfile, s0: f64, ds: f64) -> f64 {
    let d1 = p.derivative();
    let d2 = d1.derivative();
    let mut s = s0;
    for _ in 0..20 {
        let h = d2.eval(s);
        if h == 0.0 {
            break;
        }
        let step = d1.eval(s) / h;
        if step.abs() > ds {
            break;
        }
        s -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    let v = p.eval(s);
    let v0 = p.eval(s0);
    // keep the refined point only if it improved the extremum
    if (v - v0) * v0.signum() >= 0.0 {
        v
    } else {
        v0
    }
}

/// Supremum of `|v|` over the strip, from a grid search polished at both characteristics.
pub fn kernel_sup(v: &KernelElement) -> f64 {
    let grid = Grid::new(256, 128);
    let g = embed_on_grid(grid, |s| v.profile.eval(s));
    let (mut best, mut at) = (0.0, (0, 0));
    for i in 0..grid.nt {
        for q in 0..grid.cols() {
            if g.get(i, q).abs() > best {
                best = g.get(i, q).abs();
                at = (i, q);
            }
        }
    }
    let (t, x) = (grid.t(at.0), grid.x(at.1));
    let ds = grid.dx();
    let a = polish_extremum(&v.profile, t + x, ds);
    let b = polish_extremum(&v.profile, t - x, ds);
    best.max((a - b).abs())
}
