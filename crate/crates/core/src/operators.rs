//! The wave operator `box = d_tt - d_xx`, its inverse on the range, the kernel and
//! range projectors, and discrete difference quotients in `t`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Discretization, GridField, KernelElement, SpectralField, TorusProfile, Truncation};

/// Relative kernel energy above which [`OperatorWorkspace::dalembert_inverse`] refuses its input.
pub const TOL_KERNEL: f64 = 1e-12;

/// Eigenvalue table of the wave operator on a truncation, plus the bound `cbar`.
#[derive(Debug, Clone)]
pub struct OperatorWorkspace {
    trunc: Truncation,
    lambda: Vec<f64>,
    cbar: f64,
}

impl OperatorWorkspace {
    pub fn new(trunc: Truncation) -> Self {
        let mut lambda = Vec::with_capacity((2 * trunc.l + 1) * trunc.j);
        let mut cbar: f64 = 1.0;
        for l in -(trunc.l as i64)..=trunc.l as i64 {
            for j in 1..=trunc.j as i64 {
                let lam = (j * j - l * l) as f64;
                if lam != 0.0 {
                    cbar = cbar.max((1.0 + (l * l + j * j) as f64).sqrt() / lam.abs());
                }
                lambda.push(lam);
            }
        }
        Self { trunc, lambda, cbar }
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    /// Eigenvalue `j^2 - l^2` of `e^{i l t} sin(j x)`.
    pub fn lambda(&self, l: i64, j: usize) -> f64 {
        self.lambda[(l + self.trunc.l as i64) as usize * self.trunc.j + (j - 1)]
    }

    /// Largest `sqrt(1 + l^2 + j^2) / |j^2 - l^2|` over range modes: the H1 gain of the inverse.
    pub fn cbar(&self) -> f64 {
        self.cbar
    }

    fn check(&self, s: &SpectralField) -> Result<()> {
        if s.truncation() != self.trunc {
            return Err(Error::DimensionMismatch("spectral truncation differs from operator workspace".into()));
        }
        Ok(())
    }

    pub fn dalembert_apply(&self, s: &SpectralField) -> Result<SpectralField> {
        self.check(s)?;
        let mut out = s.clone();
        for (c, lam) in out.coeffs_mut().iter_mut().zip(&self.lambda) {
            *c *= *lam;
        }
        Ok(out)
    }

    /// Divide range modes by their eigenvalue; fails if `s` carries kernel energy.
    pub fn dalembert_inverse(&self, s: &SpectralField) -> Result<SpectralField> {
        self.check(s)?;
        let fraction = s.kernel_energy_fraction();
        if fraction > TOL_KERNEL {
            return Err(Error::NotInRange { fraction, tolerance: TOL_KERNEL });
        }
        Ok(self.inverse_on_range(s))
    }

    /// Inverse applied to the range part of `s`; kernel modes are dropped.
    pub fn inverse_on_range(&self, s: &SpectralField) -> SpectralField {
        let mut out = s.clone();
        for (c, lam) in out.coeffs_mut().iter_mut().zip(&self.lambda) {
            *c = if *lam == 0.0 { Complex64::new(0.0, 0.0) } else { *c / *lam };
        }
        out
    }
}

/// How [`project_kernel`] computes the kernel component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProjectionMethod {
    /// Read the modes `j = |l|` off the spectral coefficients.
    Spectral,
    /// Quadrature of `p(y) = (1/2pi) int_0^pi [u(y - s, s) - u(y + s, s)] ds` on the grid.
    Integral,
}

/// Kernel component of spectral coefficients.
pub fn project_kernel_spectral(s: &SpectralField) -> KernelElement {
    KernelElement::from_spectral(s)
}

/// Kernel component of a grid field, as a profile with `disc.kernel_modes()` modes.
pub fn project_kernel(disc: &Discretization, g: &GridField, method: ProjectionMethod) -> Result<KernelElement> {
    match method {
        ProjectionMethod::Spectral => Ok(project_kernel_spectral(&disc.analyze(g)?)),
        ProjectionMethod::Integral => project_kernel_integral(disc, g),
    }
}

/// Fourier coefficients of `p` follow from the time spectra of the columns:
/// `p_m = (1/2pi) int_0^pi u_m(s) (-2i sin(m s)) ds`, with trapezoid in `s`.
/// The mean `p_0` vanishes identically, so no re-centring is needed.
fn project_kernel_integral(disc: &Discretization, g: &GridField) -> Result<KernelElement> {
    let grid = disc.grid();
    if g.grid() != grid {
        return Err(Error::DimensionMismatch("field grid differs from discretization".into()));
    }
    let spectra = disc.column_spectra(g);
    let dx = grid.dx();
    let modes = disc.kernel_modes();
    let coeffs = (1..=modes)
        .map(|m| {
            let col = &spectra[m];
            let mut acc = Complex64::new(0.0, 0.0);
            for q in 1..grid.nx {
                acc += col[q] * (m as f64 * grid.x(q)).sin();
            }
            acc * Complex64::new(0.0, -2.0) * dx / (2.0 * PI)
        })
        .collect();
    Ok(KernelElement::new(TorusProfile::new(coeffs)))
}

/// Range component of spectral coefficients.
pub fn project_range(s: &SpectralField) -> SpectralField {
    s.range_part()
}

/// `g - embed(project_kernel(g))` on the grid.
pub fn project_range_grid(disc: &Discretization, g: &GridField, method: ProjectionMethod) -> Result<GridField> {
    let v = project_kernel(disc, g, method)?;
    Ok(g - &disc.kernel_embed(&v))
}

/// `|| box u - rhs ||_{L2}` on the truncation.
pub fn weak_residual(disc: &Discretization, ws: &OperatorWorkspace, u: &GridField, rhs: &GridField) -> Result<f64> {
    let bu = ws.dalembert_apply(&disc.analyze(u)?)?;
    let r = disc.analyze(rhs)?;
    Ok((&bu - &r).l2_norm())
}

/// `(T_h g)(t, x) = g(t + h dt, x)` with periodic wraparound.
pub fn translate(g: &GridField, h: i64) -> GridField {
    let grid = g.grid();
    let nt = grid.nt as i64;
    let mut out = GridField::zeros(grid);
    for i in 0..grid.nt {
        let src = (i as i64 + h).rem_euclid(nt) as usize;
        for q in 0..grid.cols() {
            out.set(i, q, g.get(src, q));
        }
    }
    out
}

/// `(D_h g)(t, x) = (g(t + h dt, x) - g(t, x)) / (h dt)`.
pub fn difference_quotient(g: &GridField, h: i64) -> Result<GridField> {
    if h == 0 {
        return Err(Error::ZeroShift);
    }
    let step = h as f64 * g.grid().dt();
    Ok(translate(g, h).zip_map(g, |a, b| (a - b) / step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Grid, NormKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (Discretization, OperatorWorkspace) {
        let d = Discretization::default();
        let ws = OperatorWorkspace::new(d.truncation());
        (d, ws)
    }

    fn mode(t: Truncation, l: i64, j: usize, v: Complex64) -> SpectralField {
        let mut s = SpectralField::zeros(t);
        s.set_real_mode(l, j, v);
        s
    }

    fn random_range(t: Truncation, rng: &mut ChaCha8Rng) -> SpectralField {
        let mut s = SpectralField::zeros(t);
        for l in 0..=t.l as i64 {
            for j in 1..=t.j {
                if !SpectralField::is_kernel_mode(l, j) {
                    s.set_real_mode(l, j, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                }
            }
        }
        s
    }

    fn close(a: &SpectralField, b: &SpectralField, tol: f64) -> bool {
        (a - b).coeffs().iter().all(|c| c.norm() <= tol)
    }

    #[test]
    fn eigenvalues_and_cbar() {
        let ws = OperatorWorkspace::new(Truncation::new(32, 32));
        assert_eq!(ws.lambda(0, 2), 4.0);
        assert_eq!(ws.lambda(1, 1), 0.0);
        assert_eq!(ws.lambda(-3, 3), 0.0);
        assert_eq!(ws.lambda(1, 2), 3.0);
        assert!((ws.cbar() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn apply_examples() {
        let (_, ws) = setup();
        let t = ws.truncation();
        let one = Complex64::new(1.0, 0.0);
        let s = mode(t, 0, 2, one);
        assert!(close(&ws.dalembert_apply(&s).unwrap(), &s.scale(4.0), 0.0));
        let s = mode(t, 1, 1, one);
        assert_eq!(ws.dalembert_apply(&s).unwrap().energy(), 0.0);
        let s = mode(t, 1, 2, Complex64::new(0.5, 0.0));
        assert!(close(&ws.dalembert_apply(&s).unwrap(), &s.scale(3.0), 1e-15));
    }

    #[test]
    fn inverse_examples() {
        let (_, ws) = setup();
        let t = ws.truncation();
        let s = mode(t, 0, 2, Complex64::new(1.0, 0.0));
        assert!(close(&ws.dalembert_inverse(&s).unwrap(), &s.scale(0.25), 1e-16));
        let s = mode(t, 1, 2, Complex64::new(0.5, 0.0));
        assert!(close(&ws.dalembert_inverse(&s).unwrap(), &s.scale(1.0 / 3.0), 1e-16));
        let s = mode(t, 1, 1, Complex64::new(1.0, 0.0));
        assert!(matches!(ws.dalembert_inverse(&s), Err(Error::NotInRange { .. })));
    }

    #[test]
    fn inverse_contracts_l2_on_range() {
        let (_, ws) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let f = random_range(ws.truncation(), &mut rng);
            let u = ws.dalembert_inverse(&f).unwrap();
            assert!(u.l2_norm() <= f.l2_norm());
            assert!(close(&ws.dalembert_apply(&u).unwrap(), &f, 1e-13));
            assert!(close(&ws.dalembert_inverse(&ws.dalembert_apply(&f).unwrap()).unwrap(), &f, 1e-13));
        }
    }

    #[test]
    fn projector_examples() {
        let (d, _) = setup();
        let g = GridField::from_fn(d.grid(), |t, x| t.cos() * x.sin());
        for method in [ProjectionMethod::Spectral, ProjectionMethod::Integral] {
            let v = project_kernel(&d, &g, method).unwrap();
            assert!((&d.kernel_embed(&v) - &g).max_abs() < 1e-13);
            let r = project_range_grid(&d, &g, method).unwrap();
            assert!(r.max_abs() < 1e-13);
        }
        let g = GridField::from_fn(d.grid(), |_, x| (2.0 * x).sin());
        for method in [ProjectionMethod::Spectral, ProjectionMethod::Integral] {
            let v = project_kernel(&d, &g, method).unwrap();
            assert!(v.h1_norm() < 1e-13);
            assert!((&project_range_grid(&d, &g, method).unwrap() - &g).max_abs() < 1e-13);
        }
    }

    #[test]
    fn projector_paths_agree_and_split_is_orthogonal() {
        let (d, _) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = d.truncation();
        for _ in 0..10 {
            let mut s = random_range(t, &mut rng);
            for m in 1..=t.kernel_modes() as i64 {
                s.set_real_mode(m, m as usize, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            }
            let g = d.synthesize(&s).unwrap();
            let a = project_kernel(&d, &g, ProjectionMethod::Spectral).unwrap();
            let b = project_kernel(&d, &g, ProjectionMethod::Integral).unwrap();
            let diff = d.kernel_embed(&a.axpy(-1.0, &b));
            assert!(d.norm(&diff, NormKind::L2).unwrap() < 1e-8);

            let kern = d.kernel_embed(&a);
            let range = d.synthesize(&project_range(&s)).unwrap();
            let recon = &(&kern + &range) - &g;
            assert!(recon.max_abs() < 1e-10);
            assert!(kern.inner(&range).abs() <= 1e-10 * g.inner(&g));
            let again = project_kernel(&d, &kern, ProjectionMethod::Spectral).unwrap();
            assert!(again.axpy(-1.0, &a).h1_norm() < 1e-10);
        }
    }

    #[test]
    fn square_of_kernel_element_is_in_range() {
        let (d, _) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = KernelElement::new(TorusProfile::random(&mut rng, 8, 1.0));
        let e = d.kernel_embed(&v);
        let g = e.map(|u| u * u);
        let r = project_range_grid(&d, &g, ProjectionMethod::Spectral).unwrap();
        assert!((&r - &g).max_abs() < 1e-9);
    }

    #[test]
    fn weak_residual_examples() {
        let (d, ws) = setup();
        let u = GridField::from_fn(d.grid(), |_, x| (2.0 * x).sin() / 4.0);
        let f = GridField::from_fn(d.grid(), |_, x| (2.0 * x).sin());
        assert!(weak_residual(&d, &ws, &u, &f).unwrap() < 1e-12);
        let z = GridField::zeros(d.grid());
        let f = GridField::from_fn(d.grid(), |_, x| x.sin());
        assert!((weak_residual(&d, &ws, &z, &f).unwrap() - PI).abs() < 1e-12);
    }

    #[test]
    fn difference_quotient_of_cosine() {
        let g = GridField::from_fn(Grid::default(), |t, _| t.cos());
        let dq = difference_quotient(&g, 1).unwrap();
        let dt = g.grid().dt();
        let err = dq.map_nodes(|t, _, v| v + t.sin()).max_abs();
        assert!(err <= dt, "{err}");
        assert!(matches!(difference_quotient(&g, 0), Err(Error::ZeroShift)));
    }

    #[test]
    fn translate_wraps_around() {
        let g = GridField::from_fn(Grid::new(8, 2), |t, _| t);
        let h = translate(&g, -3);
        assert_eq!(h.get(0, 1), g.get(5, 1));
        assert_eq!(translate(&h, 3), g);
    }
}
