//! Positive solutions `H` of `box H = h` for positive `h` in the range, built from the explicit
//! double-integral formula
//!
//! `H(t, x) = 1/2 int_0^kappa int_{t-x-xi}^{t-x+xi} h - 1/2 int_kappa^x int_{t-x+xi}^{t+x-xi} h`
//!
//! with `kappa` fixed by the boundary condition at `x = pi`.
//!
//! The inner `tau`-integrals are exact: each column of `h` is a trigonometric polynomial in `tau`
//! whose antiderivative is evaluated at shifted times through one inverse FFT per shift. The outer
//! `xi`-integrals integrate the local degree-7 interpolant of the integrand between grid columns.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Discretization, Grid, GridField};
use crate::operators::OperatorWorkspace;
use crate::quadrature::UniformLagrange;

/// Largest accepted spread of `c(t)` over the base times.
pub const C_SPREAD_TOL: f64 = 1e-6;
/// Largest accepted relative kernel energy of `h`.
pub const H_KERNEL_TOL: f64 = 1e-8;
/// Bisection stops once `|chi(kappa) - c| <= KAPPA_TOL (1 + |c|)`.
pub const KAPPA_TOL: f64 = 1e-10;
/// Tolerance of the derivative-formula and weak-residual checks.
pub const H_CHECK_TOL: f64 = 1e-5;
const BASE_TIMES: usize = 8;
const STENCIL: usize = 8;

/// Which function of `tau` a shifted column evaluation returns.
#[derive(Clone, Copy)]
enum Column {
    /// `h(tau, xi_p)`.
    Value,
    /// Periodic part of `int^tau h(s, xi_p) ds`; the linear part `mean * tau` is added separately.
    Primitive,
}

/// Precomputed column spectra of `h` and the quadrature pieces shared by all operations.
pub struct HBuilder {
    h: GridField,
    grid: Grid,
    /// `hat[p][bin]`: time-Fourier coefficients of column `p`.
    hat: Vec<Vec<Complex64>>,
    mean: Vec<f64>,
    interp: UniformLagrange,
    inverse: Arc<dyn Fft<f64>>,
}

impl HBuilder {
    pub fn new(h: &GridField) -> Self {
        let grid = h.grid();
        let Grid { nt, nx } = grid;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(nt);
        let inverse = planner.plan_fft_inverse(nt);
        let mut hat = Vec::with_capacity(nx + 1);
        let mut mean = Vec::with_capacity(nx + 1);
        for q in 0..=nx {
            let mut col: Vec<Complex64> = h.column(q).into_iter().map(|v| Complex64::new(v / nt as f64, 0.0)).collect();
            fwd.process(&mut col);
            mean.push(col[0].re);
            hat.push(col);
        }
        Self { h: h.clone(), grid, hat, mean, interp: UniformLagrange::new(grid.dx(), nx + 1, STENCIL), inverse }
    }

    pub fn h(&self) -> &GridField {
        &self.h
    }

    fn coefficient(&self, p: usize, bin: usize, what: Column) -> Complex64 {
        let nt = self.grid.nt;
        let c = self.hat[p][bin];
        match what {
            Column::Value => c,
            Column::Primitive if bin == 0 => Complex64::new(0.0, 0.0),
            Column::Primitive => {
                let l = if bin <= nt / 2 { bin as f64 } else { bin as f64 - nt as f64 };
                c / Complex64::new(0.0, l)
            }
        }
    }

    /// Column `p` at the arbitrary time `tau`, by direct summation.
    fn column_at(&self, p: usize, tau: f64, what: Column) -> f64 {
        let nt = self.grid.nt;
        let mut acc = 0.0;
        for bin in 0..nt {
            if 2 * bin == nt {
                acc += self.nyquist(p, tau, what);
                continue;
            }
            let l = if bin < nt / 2 + 1 { bin as f64 } else { bin as f64 - nt as f64 };
            acc += (self.coefficient(p, bin, what) * Complex64::from_polar(1.0, l * tau)).re;
        }
        acc
    }

    /// The Nyquist mode is the real cosine `c cos(n tau / 2)`.
    fn nyquist(&self, p: usize, tau: f64, what: Column) -> f64 {
        let half = (self.grid.nt / 2) as f64;
        let c = self.hat[p][self.grid.nt / 2].re;
        match what {
            Column::Value => c * (half * tau).cos(),
            Column::Primitive => c * (half * tau).sin() / half,
        }
    }

    /// Column `p` at all grid times shifted by `s`: `out[i] = F(t_i + s)`.
    fn column_shifted(&self, p: usize, s: f64, what: Column, buf: &mut [Complex64], out: &mut [f64]) {
        let nt = self.grid.nt;
        for (bin, b) in buf.iter_mut().enumerate() {
            if 2 * bin == nt {
                // cos(n (t_i + s) / 2) = (-1)^i cos(n s / 2), and (-1)^i is the Nyquist basis vector
                *b = Complex64::new(self.nyquist(p, s, what), 0.0);
                continue;
            }
            let l = if bin < nt / 2 + 1 { bin as f64 } else { bin as f64 - nt as f64 };
            *b = self.coefficient(p, bin, what) * Complex64::from_polar(1.0, l * s);
        }
        self.inverse.process(buf);
        for (o, b) in out.iter_mut().zip(buf.iter()) {
            *o = b.re;
        }
    }

    /// `c(t) = 1/2 int_0^pi int_{t-xi}^{t+xi} h(tau, xi) dtau dxi`.
    pub fn c_at(&self, t: f64) -> f64 {
        let w = self.interp.integration_weights(0.0, PI, 4, |_| 1.0);
        (0..=self.grid.nx)
            .map(|p| {
                let xi = self.grid.x(p);
                let g = self.column_at(p, t + xi, Column::Primitive) - self.column_at(p, t - xi, Column::Primitive)
                    + 2.0 * xi * self.mean[p];
                0.5 * w[p] * g
            })
            .sum()
    }

    /// Mean and spread of `c(t)` over eight base times; fails if `h` is not in the range.
    pub fn compute_c(&self) -> Result<(f64, f64)> {
        let values: Vec<f64> =
            (0..BASE_TIMES).map(|k| self.c_at(2.0 * PI * (k as f64 + 0.37) / BASE_TIMES as f64)).collect();
        let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let c = values.iter().sum::<f64>() / BASE_TIMES as f64;
        let spread = hi - lo;
        if spread > C_SPREAD_TOL * (1.0 + c.abs()) {
            return Err(Error::NotInRangeSpace { spread });
        }
        Ok((c, spread))
    }

    /// `chi(kappa) = 1/2 int_kappa^pi int_{-pi}^{pi} h = pi int_kappa^pi mean(xi) dxi`.
    pub fn chi(&self, kappa: f64) -> Result<f64> {
        if !(0.0..=PI).contains(&kappa) {
            return Err(Error::KappaOutOfRange(kappa));
        }
        let w = self.interp.integration_weights(kappa, PI, 4, |_| 1.0);
        Ok(PI * w.iter().zip(&self.mean).map(|(a, b)| a * b).sum::<f64>())
    }

    /// Bisection for `chi(kappa) = c` on `(0, pi)`.
    pub fn solve_kappa(&self, c: f64) -> Result<f64> {
        let chi0 = self.chi(0.0)?;
        if !(chi0 > c && c > 0.0) {
            return Err(Error::NoSignChange { chi0, c });
        }
        let (mut lo, mut hi) = (0.0, PI);
        let tol = KAPPA_TOL * (1.0 + c.abs());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let g = self.chi(mid)? - c;
            if g.abs() <= tol || hi - lo < 1e-15 {
                return Ok(mid);
            }
            // chi decreases for positive h
            if g > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Evaluate at every node
    /// `a * int_0^kappa G1(xi) dxi + b * int_kappa^x G2(xi) dxi`, where `G1` and `G2` are built by
    /// `combine` from the shifted columns `F(t-x+xi)`, `F(t-x-xi)`, `F(t+x-xi)` and the node data.
    fn node_integrals<C>(&self, kappa: f64, what: Column, combine: C) -> GridField
    where
        C: Fn(Shifted) -> (f64, f64) + Sync,
    {
        let Grid { nt, nx } = self.grid;
        let w0 = self.interp.integration_weights(0.0, kappa, 4, |_| 1.0);
        let columns: Vec<Vec<f64>> = (0..=nx)
            .into_par_iter()
            .map(|q| {
                let x = self.grid.x(q);
                let wq = self.interp.integration_weights(kappa, x, 4, |_| 1.0);
                let mut buf = vec![Complex64::new(0.0, 0.0); nt];
                let (mut a, mut b, mut c) = (vec![0.0; nt], vec![0.0; nt], vec![0.0; nt]);
                let mut acc = vec![0.0; nt];
                for p in 0..=nx {
                    if w0[p] == 0.0 && wq[p] == 0.0 {
                        continue;
                    }
                    let xi = self.grid.x(p);
                    self.column_shifted(p, -x + xi, what, &mut buf, &mut a);
                    self.column_shifted(p, -x - xi, what, &mut buf, &mut b);
                    self.column_shifted(p, x - xi, what, &mut buf, &mut c);
                    for i in 0..nt {
                        let (g1, g2) = combine(Shifted { a: a[i], b: b[i], c: c[i], x, xi, mean: self.mean[p] });
                        acc[i] += w0[p] * g1 + wq[p] * g2;
                    }
                }
                acc
            })
            .collect();
        let mut out = GridField::zeros(self.grid);
        for (q, col) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                out.set(i, q, *v);
            }
        }
        out
    }

    /// The double-integral formula at every grid node.
    pub fn h_field(&self, kappa: f64) -> GridField {
        self.node_integrals(kappa, Column::Primitive, |s| {
            let g1 = s.a - s.b + 2.0 * s.xi * s.mean;
            let g2 = s.c - s.a + 2.0 * (s.x - s.xi) * s.mean;
            (0.5 * g1, -0.5 * g2)
        })
    }

    /// `2 H_t` from the formula differentiated under the integral.
    pub fn dt_formula(&self, kappa: f64) -> GridField {
        self.node_integrals(kappa, Column::Value, |s| (s.a - s.b, -(s.c - s.a)))
    }

    /// `2 H_x` from the formula differentiated under the integral.
    pub fn dx_formula(&self, kappa: f64) -> GridField {
        self.node_integrals(kappa, Column::Value, |s| (-s.a + s.b, -(s.c + s.a)))
    }
}

/// Shifted column values and node data handed to the integrand combinators.
struct Shifted {
    a: f64,
    b: f64,
    c: f64,
    x: f64,
    xi: f64,
    mean: f64,
}

/// `c = 1/2 int_0^pi int_{-xi}^{xi} h`, with its spread over eight base times.
pub fn compute_c(h: &GridField) -> Result<f64> {
    let c = HBuilder::new(h).compute_c()?.0;
    check_kernel_energy(h)?;
    Ok(c)
}

fn check_kernel_energy(h: &GridField) -> Result<()> {
    let grid = h.grid();
    let trunc = crate::fields::Truncation::new((grid.nt - 2) / 2, grid.nx - 1);
    let disc = Discretization::new(grid, trunc)?;
    let s = disc.analyze_corrected(h)?;
    let fraction = s.kernel_energy_fraction();
    if fraction > H_KERNEL_TOL {
        return Err(Error::NotInRangeSpace { spread: f64::NAN });
    }
    Ok(())
}

/// `chi(kappa) = 1/2 int_kappa^pi int_{-pi}^{pi} h`.
pub fn chi(kappa: f64, h: &GridField) -> Result<f64> {
    HBuilder::new(h).chi(kappa)
}

pub fn solve_kappa(h: &GridField) -> Result<f64> {
    let b = HBuilder::new(h);
    let (c, _) = b.compute_c()?;
    b.solve_kappa(c)
}

/// The constructed `H` with its diagnostics.
#[derive(Debug, Clone)]
pub struct HResult {
    pub big_h: GridField,
    pub kappa: f64,
    pub c_value: f64,
    pub c_spread: f64,
    pub boundary_max: f64,
    pub interior_min: f64,
    /// `|| box H - h ||_{L2}` on the truncation.
    pub weak_residual: f64,
    /// `h` vanishes somewhere inside, so only `H >= 0` is expected.
    pub h_has_zeros: bool,
}

impl HResult {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kappa": self.kappa,
            "c_value": self.c_value,
            "c_spread": self.c_spread,
            "boundary_max": self.boundary_max,
            "interior_min": self.interior_min,
            "weak_residual": self.weak_residual,
            "h_has_zeros": self.h_has_zeros,
        })
    }
}

/// `|| box H - h ||_{L2}` on the truncation of `disc`, with boundary-corrected transforms.
pub fn h_weak_residual(disc: &Discretization, big_h: &GridField, h: &GridField) -> Result<f64> {
    let ws = OperatorWorkspace::new(disc.truncation());
    let bh = ws.dalembert_apply(&disc.analyze_corrected(big_h)?)?;
    Ok((&bh - &disc.analyze_corrected(h)?).l2_norm())
}

/// Build `H` for a positive `h` in the range; `disc` fixes the truncation of the weak residual.
pub fn build_h(disc: &Discretization, h: &GridField) -> Result<HResult> {
    if h.grid() != disc.grid() {
        return Err(Error::DimensionMismatch("h does not live on the discretization grid".into()));
    }
    let hmin = h.interior_min();
    if hmin < -1e-10 {
        log::warn!("h takes negative values (min {hmin:.3e}); H need not be positive");
    }
    let h_has_zeros = hmin <= 1e-12;
    if h_has_zeros && hmin >= -1e-10 {
        log::warn!("h vanishes inside the domain; only H >= 0 is expected");
    }
    let b = HBuilder::new(h);
    let (c, spread) = b.compute_c()?;
    check_kernel_energy(h)?;
    let kappa = b.solve_kappa(c)?;
    let big_h = b.h_field(kappa);
    let weak_residual = h_weak_residual(disc, &big_h, h)?;
    Ok(HResult {
        boundary_max: big_h.boundary_max(),
        interior_min: big_h.interior_min(),
        big_h,
        kappa,
        c_value: c,
        c_spread: spread,
        weak_residual,
        h_has_zeros,
    })
}

/// One line of a [`verify_h`] report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HCheck {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HReport {
    pub kappa: f64,
    pub checks: Vec<HCheck>,
}

impl HReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&HCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Re-check a candidate `H` for `h`: boundary values, positivity, weak residual, and the
/// derivative formulas for `H_t` and `H_x` against derivatives of the samples of `H`
/// (spectral in `t`, eight-point stencils in `x`).
pub fn verify_h(disc: &Discretization, big_h: &GridField, h: &GridField) -> Result<HReport> {
    let grid = h.grid();
    if big_h.grid() != grid || disc.grid() != grid {
        return Err(Error::DimensionMismatch("H, h and the discretization must share the grid".into()));
    }
    let scale = h.max_abs().max(1.0);
    let b = HBuilder::new(h);
    let (c, _) = b.compute_c()?;
    let kappa = b.solve_kappa(c)?;
    let mut checks = Vec::new();
    let mut push = |name: &str, value: f64, tolerance: f64, pass: bool| {
        checks.push(HCheck { name: name.into(), value, tolerance, pass });
    };

    let boundary = big_h.boundary_max();
    push("boundary", boundary, 1e-6 * scale, boundary <= 1e-6 * scale);
    let hmin = h.interior_min();
    let imin = big_h.interior_min();
    if hmin > 1e-12 {
        push("positivity", imin, 0.0, imin > 0.0);
    } else {
        push("positivity", imin, -1e-8, imin >= -1e-8);
    }
    let wr = h_weak_residual(disc, big_h, h)?;
    push("weak_residual", wr, H_CHECK_TOL * scale, wr <= H_CHECK_TOL * scale);

    let dt = time_derivative(big_h).scale(2.0);
    let err_t = (&dt - &b.dt_formula(kappa)).max_abs() / 2.0;
    push("dt_formula", err_t, H_CHECK_TOL * scale, err_t <= H_CHECK_TOL * scale);
    let dx = space_derivative(big_h).scale(2.0);
    let err_x = (&dx - &b.dx_formula(kappa)).max_abs() / 2.0;
    push("dx_formula", err_x, H_CHECK_TOL * scale, err_x <= H_CHECK_TOL * scale);
    Ok(HReport { kappa, checks })
}

/// `g_t` by FFT in time, column by column.
pub fn time_derivative(g: &GridField) -> GridField {
    let Grid { nt, .. } = g.grid();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(nt);
    let inv = planner.plan_fft_inverse(nt);
    let mut out = GridField::zeros(g.grid());
    for q in 0..g.grid().cols() {
        let mut col: Vec<Complex64> = g.column(q).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
        fwd.process(&mut col);
        for (bin, c) in col.iter_mut().enumerate() {
            let l = if 2 * bin == nt {
                0.0
            } else if bin < nt / 2 {
                bin as f64
            } else {
                bin as f64 - nt as f64
            };
            *c *= Complex64::new(0.0, l / nt as f64);
        }
        inv.process(&mut col);
        for (i, c) in col.iter().enumerate() {
            out.set(i, q, c.re);
        }
    }
    out
}

/// `g_x` by eight-point Lagrange stencils along each row.
pub fn space_derivative(g: &GridField) -> GridField {
    let grid = g.grid();
    let interp = UniformLagrange::new(grid.dx(), grid.cols(), STENCIL);
    let mut w = vec![0.0; STENCIL];
    let mut out = GridField::zeros(grid);
    for q in 0..grid.cols() {
        let s = interp.stencil_derivative(grid.x(q), &mut w);
        for i in 0..grid.nt {
            let v: f64 = w.iter().enumerate().map(|(k, wk)| wk * g.get(i, s + k)).sum();
            out.set(i, q, v);
        }
    }
    out
}

/// A random positive `h` in the range:
/// `sin x + sum a_j sin(j x) + d cos(l t + phase) sin(j' x)` with `j' != |l|` and
/// `sum j |a_j| + j' |d| < 1`, so `h >= c sin x > 0` inside because `|sin(j x)| <= j sin x`.
pub fn random_positive_h<R: Rng>(grid: Grid, rng: &mut R) -> GridField {
    let mut budget = 0.9;
    let mut terms = Vec::new();
    for j in [2usize, 3, 5] {
        let a = rng.gen_range(-1.0..1.0) * budget / (2.0 * j as f64);
        budget -= j as f64 * a.abs();
        terms.push((j, a));
    }
    let l = rng.gen_range(1..=3) as f64;
    let jp = if l as usize == 2 { 3 } else { 2 };
    let d = rng.gen_range(-1.0..1.0) * budget / jp as f64;
    let phase = rng.gen_range(0.0..2.0 * PI);
    GridField::from_fn(grid, move |t, x| {
        x.sin()
            + terms.iter().map(|(j, a)| a * (*j as f64 * x).sin()).sum::<f64>()
            + d * (l * t + phase).cos() * (jp as f64 * x).sin()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn disc() -> Discretization {
        Discretization::default()
    }

    #[test]
    fn constants_for_analytic_cases() {
        let g = disc().grid();
        let one = GridField::from_fn(g, |_, _| 1.0);
        assert!((compute_c(&one).unwrap() - PI * PI / 2.0).abs() < 1e-12);
        assert!((chi(PI / 2.0, &one).unwrap() - PI * PI / 2.0).abs() < 1e-12);
        let sin = GridField::from_fn(g, |_, x| x.sin());
        let c = compute_c(&sin).unwrap();
        assert!((c - PI).abs() < 1e-10, "{}", c - PI);
        for k in [0.3, 1.0, 2.5] {
            assert!((chi(k, &sin).unwrap() - PI * (1.0 + k.cos())).abs() < 1e-10);
        }
        let sin2 = GridField::from_fn(g, |_, x| (2.0 * x).sin());
        let c2 = compute_c(&sin2).unwrap();
        assert!((c2 + PI / 2.0).abs() < 1e-10, "{c2}");
        assert_eq!(chi(PI, &sin2).unwrap(), 0.0);
        assert!(matches!(chi(3.5, &sin2), Err(Error::KappaOutOfRange(_))));
        assert!(matches!(solve_kappa(&sin2), Err(Error::NoSignChange { .. })));
    }

    #[test]
    fn constant_h_gives_parabola() {
        let d = disc();
        let one = GridField::from_fn(d.grid(), |_, _| 1.0);
        let r = build_h(&d, &one).unwrap();
        assert!((r.kappa - PI / 2.0).abs() < 1e-8);
        let exact = GridField::from_fn(d.grid(), |_, x| x * (PI - x) / 2.0);
        assert!((&r.big_h - &exact).max_abs() < 1e-10);
        assert!(r.weak_residual < 1e-6, "{}", r.weak_residual);
        let rep = verify_h(&d, &exact, &one).unwrap();
        assert!(rep.pass(), "{rep:?}");
    }

    #[test]
    fn sine_h_is_its_own_solution() {
        let d = disc();
        let sin = GridField::from_fn(d.grid(), |_, x| x.sin());
        let r = build_h(&d, &sin).unwrap();
        assert!((r.kappa - PI / 2.0).abs() < 1e-8);
        assert!((&r.big_h - &sin).max_abs() < 1e-10, "{} {}", (&r.big_h - &sin).max_abs(), r.kappa - PI / 2.0);
        assert!(r.interior_min > 0.0 && r.boundary_max < 1e-10);
    }

    #[test]
    fn random_positive_family() {
        let d = disc();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..3 {
            let h = random_positive_h(d.grid(), &mut rng);
            assert!(h.interior_min() > 0.0);
            let r = build_h(&d, &h).unwrap();
            assert!(r.boundary_max <= 1e-6 && r.interior_min > 0.0 && r.weak_residual <= 1e-5, "{r:?}");
            let rep = verify_h(&d, &r.big_h, &h).unwrap();
            assert!(rep.pass(), "{rep:?}");
        }
    }

    #[test]
    fn perturbations_are_detected() {
        let d = disc();
        let one = GridField::from_fn(d.grid(), |_, _| 1.0);
        let bumped = GridField::from_fn(d.grid(), |t, x| x * (PI - x) / 2.0 + 0.1 * t.sin() * (2.0 * x).sin());
        let rep = verify_h(&d, &bumped, &one).unwrap();
        let wr = rep.check("weak_residual").unwrap();
        assert!(!wr.pass);
        assert!((wr.value - 0.3 * PI / 2f64.sqrt()).abs() < 1e-6, "{}", wr.value);
        let sin = GridField::from_fn(d.grid(), |_, x| x.sin());
        let lowered = sin.map(|v| v - 0.5);
        let rep = verify_h(&d, &lowered, &sin).unwrap();
        assert!(!rep.check("positivity").unwrap().pass);
    }

    #[test]
    fn kernel_component_breaks_t_independence() {
        let g = disc().grid();
        let h = GridField::from_fn(g, |t, x| x.sin() + 0.2 * t.cos() * x.sin());
        match compute_c(&h) {
            Err(Error::NotInRangeSpace { spread }) => assert!(spread > 0.5),
            other => panic!("{other:?}"),
        }
    }
}
