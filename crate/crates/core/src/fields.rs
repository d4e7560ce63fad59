//! Field representations on the periodic strip `T x (0, pi)`.
//!
//! A [`GridField`] holds samples on the tensor grid `t_i = 2 pi i / nt`,
//! `x_q = pi q / nx` (boundary columns included). A [`SpectralField`] holds the
//! coefficients `u_{l,j}` of `e^{i l t} sin(j x)` for `|l| <= L`, `1 <= j <= J`.
//! Kernel elements of the wave operator are parametrised by a zero-mean
//! periodic profile `v(t, x) = p(t + x) - p(t - x)`, see [`TorusProfile`].
//!
//! [`Discretization`] owns the FFT plans and moves fields between the two
//! representations.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default cap on `nt * nx` for the pairwise Hoelder seminorm.
pub const DEFAULT_HOLDER_CAP: usize = 8192;

/// Uniform tensor grid, periodic in `t`, closed in `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub nt: usize,
    pub nx: usize,
}

impl Grid {
    pub fn new(nt: usize, nx: usize) -> Self {
        Self { nt, nx }
    }

    pub fn dt(&self) -> f64 {
        2.0 * PI / self.nt as f64
    }

    pub fn dx(&self) -> f64 {
        PI / self.nx as f64
    }

    pub fn t(&self, i: usize) -> f64 {
        self.dt() * i as f64
    }

    pub fn x(&self, q: usize) -> f64 {
        self.dx() * q as f64
    }

    /// Number of x nodes, boundaries included.
    pub fn cols(&self) -> usize {
        self.nx + 1
    }

    pub fn len(&self) -> usize {
        self.nt * self.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self { nt: 128, nx: 64 }
    }
}

/// Spectral truncation: `|l| <= l`, `1 <= j <= j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub l: usize,
    pub j: usize,
}

impl Truncation {
    pub fn new(l: usize, j: usize) -> Self {
        Self { l, j }
    }

    /// Highest profile mode whose kernel mode `(m, m)` fits in the truncation.
    pub fn kernel_modes(&self) -> usize {
        self.l.min(self.j)
    }

    fn len(&self) -> usize {
        (2 * self.l + 1) * self.j
    }
}

impl Default for Truncation {
    fn default() -> Self {
        Self { l: 32, j: 32 }
    }
}

/// Real samples on a [`Grid`], row-major in `t` then `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Grid,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.nt,
                grid.cols()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::DimensionMismatch(format!("non-finite sample {v}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid: Grid, f: F) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nt {
            let t = grid.t(i);
            for q in 0..grid.cols() {
                values.push(f(t, grid.x(q)));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, q: usize) -> f64 {
        self.values[i * self.grid.cols() + q]
    }

    #[inline]
    pub fn set(&mut self, i: usize, q: usize, v: f64) {
        let c = self.grid.cols();
        self.values[i * c + q] = v;
    }

    /// Samples of column `q` (all times).
    pub fn column(&self, q: usize) -> Vec<f64> {
        (0..self.grid.nt).map(|i| self.get(i, q)).collect()
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise map with access to `(t, x, value)`.
    pub fn map_nodes<F: Fn(f64, f64, f64) -> f64>(&self, f: F) -> Self {
        let g = self.grid;
        let cols = g.cols();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| f(g.t(k / cols), g.x(k % cols), v))
            .collect();
        Self { grid: g, values }
    }

    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &Self, f: F) -> Self {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest magnitude on the two boundary columns.
    pub fn boundary_max(&self) -> f64 {
        let nx = self.grid.nx;
        (0..self.grid.nt).fold(0.0, |m: f64, i| m.max(self.get(i, 0).abs()).max(self.get(i, nx).abs()))
    }

    /// Smallest value over the interior columns `0 < q < nx`.
    pub fn interior_min(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.grid.nt {
            for q in 1..self.grid.nx {
                m = m.min(self.get(i, q));
            }
        }
        m
    }

    /// Trapezoid quadrature over `T x (0, pi)`.
    pub fn integrate(&self) -> f64 {
        let g = self.grid;
        let mut s = 0.0;
        for i in 0..g.nt {
            let row = &self.values[i * g.cols()..(i + 1) * g.cols()];
            s += 0.5 * (row[0] + row[g.nx]) + row[1..g.nx].iter().sum::<f64>();
        }
        s * g.dt() * g.dx()
    }

    /// L2 inner product by trapezoid quadrature.
    pub fn inner(&self, other: &Self) -> f64 {
        self.zip_map(other, |a, b| a * b).integrate()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    /// Write as CSV with header `t,x,value`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x,value")?;
        let g = self.grid;
        for i in 0..g.nt {
            for q in 0..g.cols() {
                writeln!(w, "{:.16e},{:.16e},{:.16e}", g.t(i), g.x(q), self.get(i, q))?;
            }
        }
        Ok(())
    }

    /// Read a field written by [`GridField::write_csv`]; the grid is inferred from the `t` and `x` columns.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != "t,x,value" {
            return Err(Error::Config(format!("unexpected CSV header {header:?}")));
        }
        let mut ts = Vec::new();
        let mut values = Vec::new();
        let mut cols = None;
        let mut row_count = 0usize;
        let mut first_t = None;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 3 {
                return Err(Error::Config(format!("bad CSV row {line:?}")));
            }
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Config(format!("{s:?}: {e}")));
            let t = parse(parts[0])?;
            values.push(parse(parts[2])?);
            if first_t.is_none() {
                first_t = Some(t);
            }
            if Some(t) == first_t {
                row_count += 1;
            } else if cols.is_none() {
                cols = Some(row_count);
            }
            ts.push(t);
        }
        let cols = cols.unwrap_or(row_count);
        if cols < 2 || values.len() % cols != 0 {
            return Err(Error::Config("CSV does not describe a tensor grid".into()));
        }
        let grid = Grid::new(values.len() / cols, cols - 1);
        GridField::from_values(grid, values)
    }
}

impl Add for &GridField {
    type Output = GridField;
    fn add(self, rhs: &GridField) -> GridField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &GridField {
    type Output = GridField;
    fn sub(self, rhs: &GridField) -> GridField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

/// Coefficients `u_{l,j}` of `e^{i l t} sin(j x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    trunc: Truncation,
    coeffs: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct SpectralDump {
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "J")]
    j: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl SpectralField {
    pub fn zeros(trunc: Truncation) -> Self {
        Self { trunc, coeffs: vec![Complex64::new(0.0, 0.0); trunc.len()] }
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    #[inline]
    fn index(&self, l: i64, j: usize) -> usize {
        debug_assert!(l.unsigned_abs() as usize <= self.trunc.l && (1..=self.trunc.j).contains(&j));
        (l + self.trunc.l as i64) as usize * self.trunc.j + (j - 1)
    }

    #[inline]
    pub fn get(&self, l: i64, j: usize) -> Complex64 {
        self.coeffs[self.index(l, j)]
    }

    #[inline]
    pub fn set(&mut self, l: i64, j: usize, v: Complex64) {
        let k = self.index(l, j);
        self.coeffs[k] = v;
    }

    /// Set `u_{l,j} = v` and `u_{-l,j} = conj(v)` so the field stays real.
    pub fn set_real_mode(&mut self, l: i64, j: usize, v: Complex64) {
        if l == 0 {
            self.set(0, j, Complex64::new(v.re, 0.0));
        } else {
            self.set(l, j, v);
            self.set(-l, j, v.conj());
        }
    }

    /// Iterate over `(l, j, u_{l,j})`.
    pub fn modes(&self) -> impl Iterator<Item = (i64, usize, Complex64)> + '_ {
        let jmax = self.trunc.j;
        let lmax = self.trunc.l as i64;
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(k, &c)| ((k / jmax) as i64 - lmax, k % jmax + 1, c))
    }

    pub fn map_modes<F: Fn(i64, usize, Complex64) -> Complex64>(&self, f: F) -> Self {
        let coeffs = self.modes().map(|(l, j, c)| f(l, j, c)).collect();
        Self { trunc: self.trunc, coeffs }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn is_kernel_mode(l: i64, j: usize) -> bool {
        l.unsigned_abs() as usize == j
    }

    /// Modes with `j = |l|`.
    pub fn kernel_part(&self) -> Self {
        self.map_modes(|l, j, c| if Self::is_kernel_mode(l, j) { c } else { Complex64::new(0.0, 0.0) })
    }

    /// Modes with `j != |l|`.
    pub fn range_part(&self) -> Self {
        self.map_modes(|l, j, c| if Self::is_kernel_mode(l, j) { Complex64::new(0.0, 0.0) } else { c })
    }

    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn kernel_energy(&self) -> f64 {
        self.modes().filter(|&(l, j, _)| Self::is_kernel_mode(l, j)).map(|(_, _, c)| c.norm_sqr()).sum()
    }

    /// Share of the coefficient energy carried by kernel modes (0 for the zero field).
    pub fn kernel_energy_fraction(&self) -> f64 {
        let e = self.energy();
        if e == 0.0 {
            0.0
        } else {
            self.kernel_energy() / e
        }
    }

    /// `L2(Omega)` norm: each mode carries `pi^2 |u_{l,j}|^2`.
    pub fn l2_norm(&self) -> f64 {
        PI * self.energy().sqrt()
    }

    /// `H1(Omega)` norm with weight `1 + l^2 + j^2` per mode.
    pub fn h1_norm(&self) -> f64 {
        let s: f64 = self
            .modes()
            .map(|(l, j, c)| (1.0 + (l * l) as f64 + (j * j) as f64) * c.norm_sqr())
            .sum();
        PI * s.sqrt()
    }

    /// Spectral time derivative.
    pub fn dt(&self) -> Self {
        self.map_modes(|l, _, c| c * I * l as f64)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { trunc: self.trunc, coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn check_reality(&self, tol: f64) -> Result<()> {
        let scale = 1.0 + self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        for l in 0..=self.trunc.l as i64 {
            for j in 1..=self.trunc.j {
                let dev = (self.get(-l, j) - self.get(l, j).conj()).norm();
                if dev > tol * scale {
                    return Err(Error::RealityViolation { l, j, deviation: dev });
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let (mut re, mut im) = (Vec::new(), Vec::new());
        for l in -(self.trunc.l as i64)..=self.trunc.l as i64 {
            re.push((1..=self.trunc.j).map(|j| self.get(l, j).re).collect());
            im.push((1..=self.trunc.j).map(|j| self.get(l, j).im).collect());
        }
        serde_json::to_value(SpectralDump { l: self.trunc.l, j: self.trunc.j, re, im }).expect("serialisable")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let d: SpectralDump = serde_json::from_value(v.clone())?;
        let trunc = Truncation::new(d.l, d.j);
        if d.re.len() != 2 * d.l + 1 || d.im.len() != 2 * d.l + 1 {
            return Err(Error::DimensionMismatch("spectral dump row count".into()));
        }
        let mut s = Self::zeros(trunc);
        for (k, (re, im)) in d.re.iter().zip(&d.im).enumerate() {
            if re.len() != d.j || im.len() != d.j {
                return Err(Error::DimensionMismatch("spectral dump column count".into()));
            }
            for j in 1..=d.j {
                s.set(k as i64 - d.l as i64, j, Complex64::new(re[j - 1], im[j - 1]));
            }
        }
        Ok(s)
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        assert_eq!(self.trunc, rhs.trunc);
        SpectralField { trunc: self.trunc, coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        assert_eq!(self.trunc, rhs.trunc);
        SpectralField { trunc: self.trunc, coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect() }
    }
}

/// Zero-mean real 2pi-periodic function `p(s) = sum_{m != 0} c_m e^{i m s}`.
///
/// Only `c_1..c_M` are stored; `c_0 = 0` and `c_{-m} = conj(c_m)` hold by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusProfile {
    coeffs: Vec<Complex64>,
}

impl TorusProfile {
    /// `coeffs[m - 1] = c_m`.
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Self { coeffs }
    }

    pub fn zero(modes: usize) -> Self {
        Self { coeffs: vec![Complex64::new(0.0, 0.0); modes] }
    }

    /// `p(s) = cos(m s)`.
    pub fn cosine(m: usize, modes: usize) -> Self {
        let mut p = Self::zero(modes.max(m));
        p.coeffs[m - 1] = Complex64::new(0.5, 0.0);
        p
    }

    /// `p(s) = sin(m s)`.
    pub fn sine(m: usize, modes: usize) -> Self {
        let mut p = Self::zero(modes.max(m));
        p.coeffs[m - 1] = Complex64::new(0.0, -0.5);
        p
    }

    /// Fourier projection of `f` sampled at `n` equispaced points, keeping `modes` modes (mean dropped).
    pub fn from_fn<F: Fn(f64) -> f64>(f: F, n: usize, modes: usize) -> Self {
        let samples: Vec<f64> = (0..n).map(|k| f(2.0 * PI * k as f64 / n as f64)).collect();
        Self::from_samples(&samples, modes)
    }

    pub fn from_samples(samples: &[f64], modes: usize) -> Self {
        let n = samples.len();
        let coeffs = (1..=modes)
            .map(|m| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, &v) in samples.iter().enumerate() {
                    let th = -2.0 * PI * (m * k % n) as f64 / n as f64;
                    acc += Complex64::from_polar(v, th);
                }
                acc / n as f64
            })
            .collect();
        Self { coeffs }
    }

    /// Random profile with `modes` active modes and amplitudes decaying like `1/m`.
    pub fn random<R: Rng>(rng: &mut R, modes: usize, amplitude: f64) -> Self {
        let coeffs = (1..=modes)
            .map(|m| {
                let a = amplitude / m as f64;
                Complex64::new(rng.gen_range(-a..a), rng.gen_range(-a..a))
            })
            .collect();
        Self { coeffs }
    }

    pub fn modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Same profile padded or truncated to `modes` modes.
    pub fn resized(&self, modes: usize) -> Self {
        let mut c = self.coeffs.clone();
        c.resize(modes, Complex64::new(0.0, 0.0));
        Self { coeffs: c }
    }

    pub fn eval(&self, s: f64) -> f64 {
        let z = Complex64::from_polar(1.0, s);
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = (acc + c) * z;
        }
        2.0 * acc.re
    }

    /// Derivative `p'(s)`.
    pub fn eval_derivative(&self, s: f64) -> f64 {
        self.derivative().eval(s)
    }

    pub fn derivative(&self) -> Self {
        Self { coeffs: self.coeffs.iter().enumerate().map(|(k, c)| c * I * (k + 1) as f64).collect() }
    }

    /// Samples at `s_k = 2 pi k / n`.
    pub fn samples(&self, n: usize) -> Vec<f64> {
        (0..n).map(|k| self.eval(2.0 * PI * k as f64 / n as f64)).collect()
    }

    /// `||p||^2_{L2(T)} = 2 pi sum_{m != 0} |c_m|^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        4.0 * PI * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn sup_on(&self, n: usize) -> f64 {
        self.samples(n).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        let n = self.modes().max(other.modes());
        let x = self.resized(n);
        let y = other.resized(n);
        Self { coeffs: x.coeffs.iter().zip(&y.coeffs).map(|(p, q)| p + q * a).collect() }
    }
}

impl Neg for &TorusProfile {
    type Output = TorusProfile;
    fn neg(self) -> TorusProfile {
        self.scale(-1.0)
    }
}

impl Sub for &TorusProfile {
    type Output = TorusProfile;
    fn sub(self, rhs: &TorusProfile) -> TorusProfile {
        self.axpy(-1.0, rhs)
    }
}

impl Mul<f64> for &TorusProfile {
    type Output = TorusProfile;
    fn mul(self, s: f64) -> TorusProfile {
        self.scale(s)
    }
}

/// Element `v(t, x) = p(t + x) - p(t - x)` of the kernel of the wave operator.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelElement {
    pub profile: TorusProfile,
}

impl KernelElement {
    pub fn new(profile: TorusProfile) -> Self {
        Self { profile }
    }

    pub fn zero(modes: usize) -> Self {
        Self { profile: TorusProfile::zero(modes) }
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.profile.eval(t + x) - self.profile.eval(t - x)
    }

    pub fn l2_norm(&self) -> f64 {
        (2.0 * PI * self.profile.l2_norm_sq()).sqrt()
    }

    /// `||v||^2_{H1} = 2 pi (||p||^2 + 2 ||p'||^2)`.
    pub fn h1_norm(&self) -> f64 {
        self.h1_inner(self).max(0.0).sqrt()
    }

    /// `H1(Omega)` inner product of two kernel elements.
    pub fn h1_inner(&self, other: &Self) -> f64 {
        let n = self.profile.modes().min(other.profile.modes());
        let s: f64 = (0..n)
            .map(|k| {
                let m = (k + 1) as f64;
                (1.0 + 2.0 * m * m) * (self.profile.coeffs[k] * other.profile.coeffs[k].conj()).re
            })
            .sum();
        8.0 * PI * PI * s
    }

    /// `L2(Omega)` inner product of two kernel elements.
    pub fn l2_inner(&self, other: &Self) -> f64 {
        let n = self.profile.modes().min(other.profile.modes());
        let s: f64 = (0..n).map(|k| (self.profile.coeffs[k] * other.profile.coeffs[k].conj()).re).sum();
        8.0 * PI * PI * s
    }

    /// Time derivative `v_t = p'(t + x) - p'(t - x)`, again a kernel element.
    pub fn dt(&self) -> Self {
        Self { profile: self.profile.derivative() }
    }

    /// Kernel-mode coefficients `u_{m, |m|} = 2 i sign(m) c_m`.
    pub fn to_spectral(&self, trunc: Truncation) -> SpectralField {
        let mut s = SpectralField::zeros(trunc);
        for (k, c) in self.profile.coeffs.iter().enumerate().take(trunc.kernel_modes()) {
            let m = (k + 1) as i64;
            s.set_real_mode(m, m as usize, 2.0 * I * c);
        }
        s
    }

    /// Read the kernel modes of `s` back as a profile with `min(L, J)` modes.
    pub fn from_spectral(s: &SpectralField) -> Self {
        let modes = s.truncation().kernel_modes();
        let coeffs = (1..=modes).map(|m| s.get(m as i64, m) / (2.0 * I)).collect();
        Self { profile: TorusProfile::new(coeffs) }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { profile: self.profile.scale(s) }
    }

    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        Self { profile: self.profile.axpy(a, &other.profile) }
    }
}

/// Norm selector for [`Discretization::norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    L2,
    H1,
    Linf,
    Holder12,
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NormKind::L2 => "L2",
            NormKind::H1 => "H1",
            NormKind::Linf => "Linf",
            NormKind::Holder12 => "Holder12",
        };
        f.write_str(s)
    }
}

struct Plans {
    t_fwd: Arc<dyn Fft<f64>>,
    t_inv: Arc<dyn Fft<f64>>,
    x_fwd: Arc<dyn Fft<f64>>,
    x_inv: Arc<dyn Fft<f64>>,
}

/// A grid together with a spectral truncation and the transforms between them.
#[derive(Clone)]
pub struct Discretization {
    grid: Grid,
    trunc: Truncation,
    holder_cap: usize,
    plans: Arc<Plans>,
}

impl fmt::Debug for Discretization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Discretization").field("grid", &self.grid).field("trunc", &self.trunc).finish()
    }
}

impl Default for Discretization {
    fn default() -> Self {
        Self::new(Grid::default(), Truncation::default()).expect("default sizes are consistent")
    }
}

impl Discretization {
    pub fn new(grid: Grid, trunc: Truncation) -> Result<Self> {
        if grid.nt < 2 * trunc.l + 2 || grid.nx < trunc.j + 1 || trunc.j == 0 {
            return Err(Error::DimensionMismatch(format!(
                "grid {}x{} too coarse for truncation L={}, J={} (need nt >= 2L+2, nx >= J+1)",
                grid.nt, grid.nx, trunc.l, trunc.j
            )));
        }
        let mut planner = FftPlanner::new();
        let plans = Plans {
            t_fwd: planner.plan_fft_forward(grid.nt),
            t_inv: planner.plan_fft_inverse(grid.nt),
            x_fwd: planner.plan_fft_forward(2 * grid.nx),
            x_inv: planner.plan_fft_inverse(2 * grid.nx),
        };
        Ok(Self { grid, trunc, holder_cap: DEFAULT_HOLDER_CAP, plans: Arc::new(plans) })
    }

    pub fn with_holder_cap(mut self, cap: usize) -> Self {
        self.holder_cap = cap;
        self
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    pub fn kernel_modes(&self) -> usize {
        self.trunc.kernel_modes()
    }

    fn check_grid(&self, g: &GridField) -> Result<()> {
        if g.grid != self.grid {
            return Err(Error::DimensionMismatch(format!(
                "field grid {}x{} differs from discretization grid {}x{}",
                g.grid.nt, g.grid.nx, self.grid.nt, self.grid.nx
            )));
        }
        Ok(())
    }

    #[inline]
    fn bin(&self, l: i64) -> usize {
        if l >= 0 {
            l as usize
        } else {
            (self.grid.nt as i64 + l) as usize
        }
    }

    /// Discrete Fourier-in-t x sine-in-x coefficients of `g`.
    ///
    /// Boundary columns are ignored by the sine transform; a warning is logged
    /// when they are not close to zero.
    pub fn analyze(&self, g: &GridField) -> Result<SpectralField> {
        self.check_grid(g)?;
        let b = g.boundary_max();
        if b > 1e-8 * (1.0 + g.max_abs()) {
            log::warn!("analyze: boundary columns are not zero (max {b:.3e}); they are ignored by the sine transform");
        }
        Ok(self.analyze_interior(g))
    }

    /// [`Discretization::analyze`] without checks; the grid must match.
    pub fn analyze_interior(&self, g: &GridField) -> SpectralField {
        let Grid { nt, nx } = self.grid;
        let (lmax, jmax) = (self.trunc.l as i64, self.trunc.j);
        let nl = 2 * self.trunc.l + 1;
        let zero = Complex64::new(0.0, 0.0);

        // time transform of each interior column, keeping |l| <= L
        let mut ct = vec![zero; nl * (nx - 1)];
        let mut col = vec![zero; nt];
        let inv_nt = 1.0 / nt as f64;
        for q in 1..nx {
            for (i, c) in col.iter_mut().enumerate() {
                *c = Complex64::new(g.get(i, q), 0.0);
            }
            self.plans.t_fwd.process(&mut col);
            for l in -lmax..=lmax {
                ct[(l + lmax) as usize * (nx - 1) + (q - 1)] = col[self.bin(l)] * inv_nt;
            }
        }

        // sine transform via the odd extension of length 2 nx
        let mut out = SpectralField::zeros(self.trunc);
        let mut buf = vec![zero; 2 * nx];
        let factor = I / nx as f64;
        for l in -lmax..=lmax {
            let row = &ct[(l + lmax) as usize * (nx - 1)..(l + lmax + 1) as usize * (nx - 1)];
            buf.fill(zero);
            for q in 1..nx {
                buf[q] = row[q - 1];
                buf[2 * nx - q] = -row[q - 1];
            }
            self.plans.x_fwd.process(&mut buf);
            for j in 1..=jmax {
                out.set(l, j, buf[j] * factor);
            }
        }
        out
    }

    /// Sine-Fourier coefficients of `g` with a boundary correction: values and second
    /// x-derivatives at `x = 0, pi` are carried by polynomials with known sine coefficients,
    /// and only the remainder, whose odd extension is smoother, goes through the discrete transform.
    ///
    /// Unlike [`Discretization::analyze`] this keeps fields that do not vanish (to second
    /// order) on the boundary free of visible aliasing.
    pub fn analyze_corrected(&self, g: &GridField) -> Result<SpectralField> {
        self.check_grid(g)?;
        let Grid { nt, nx } = self.grid;
        if nx < 6 {
            return Ok(self.analyze_interior(g));
        }
        let dx = self.grid.dx();
        // one-sided fourth-order second derivative
        const D2: [f64; 6] = [15.0 / 4.0, -77.0 / 6.0, 107.0 / 6.0, -13.0, 61.0 / 12.0, -5.0 / 6.0];
        let mut ends = vec![[0.0; 4]; nt];
        let mut rem = g.clone();
        for (i, e) in ends.iter_mut().enumerate() {
            let v0 = g.get(i, 0);
            let vp = g.get(i, nx);
            let d0: f64 = D2.iter().enumerate().map(|(k, c)| c * g.get(i, k)).sum::<f64>() / (dx * dx);
            let dp: f64 = D2.iter().enumerate().map(|(k, c)| c * g.get(i, nx - k)).sum::<f64>() / (dx * dx);
            *e = [v0, vp, d0, dp];
            for q in 0..=nx {
                let x = self.grid.x(q);
                let lift = v0 * (1.0 - x / PI) + vp * x / PI + d0 * cubic_lift(x) + dp * cubic_lift(PI - x);
                rem.set(i, q, g.get(i, q) - lift);
            }
        }
        let mut out = self.analyze_interior(&rem);
        let mut buf = vec![Complex64::new(0.0, 0.0); nt];
        let lmax = self.trunc.l as i64;
        for part in 0..4 {
            for (b, e) in buf.iter_mut().zip(&ends) {
                *b = Complex64::new(e[part], 0.0);
            }
            self.plans.t_fwd.process(&mut buf);
            for l in -lmax..=lmax {
                let c = buf[self.bin(l)] / nt as f64;
                for j in 1..=self.trunc.j {
                    let jf = j as f64;
                    let alt = if j % 2 == 1 { 1.0 } else { -1.0 };
                    // sine coefficients of 1 - x/pi, x/pi, C(x), C(pi - x)
                    let b = match part {
                        0 => 2.0 / (PI * jf),
                        1 => 2.0 * alt / (PI * jf),
                        2 => -2.0 / (PI * jf.powi(3)),
                        _ => -2.0 * alt / (PI * jf.powi(3)),
                    };
                    out.set(l, j, out.get(l, j) + c * b);
                }
            }
        }
        Ok(out)
    }

    /// Evaluate the truncated series at the grid nodes.
    pub fn synthesize(&self, s: &SpectralField) -> Result<GridField> {
        if s.truncation() != self.trunc {
            return Err(Error::DimensionMismatch("spectral truncation differs from discretization".into()));
        }
        s.check_reality(1e-10)?;
        Ok(self.synthesize_unchecked(s))
    }

    /// [`Discretization::synthesize`] without the reality check.
    pub fn synthesize_unchecked(&self, s: &SpectralField) -> GridField {
        let Grid { nt, nx } = self.grid;
        let (lmax, jmax) = (self.trunc.l as i64, self.trunc.j);
        let zero = Complex64::new(0.0, 0.0);
        let cols = nx + 1;

        let mut gx = vec![zero; (2 * self.trunc.l + 1) * cols];
        let mut buf = vec![zero; 2 * nx];
        let half_over_i = -0.5 * I;
        for l in -lmax..=lmax {
            buf.fill(zero);
            for j in 1..=jmax.min(nx - 1) {
                let c = s.get(l, j);
                buf[j] = c;
                buf[2 * nx - j] = -c;
            }
            self.plans.x_inv.process(&mut buf);
            let row = &mut gx[(l + lmax) as usize * cols..(l + lmax + 1) as usize * cols];
            for q in 0..=nx {
                row[q] = buf[q] * half_over_i;
            }
        }

        let mut values = vec![0.0; nt * cols];
        let mut col = vec![zero; nt];
        for q in 0..cols {
            col.fill(zero);
            for l in -lmax..=lmax {
                col[self.bin(l)] = gx[(l + lmax) as usize * cols + q];
            }
            self.plans.t_inv.process(&mut col);
            for i in 0..nt {
                values[i * cols + q] = col[i].re;
            }
        }
        for i in 0..nt {
            values[i * cols] = 0.0;
            values[i * cols + nx] = 0.0;
        }
        GridField { grid: self.grid, values }
    }

    /// Time-Fourier coefficients of every column: `out[l_bin][q]` for all `nt` bins.
    pub fn column_spectra(&self, g: &GridField) -> Vec<Vec<Complex64>> {
        let Grid { nt, nx } = self.grid;
        let mut out = vec![vec![Complex64::new(0.0, 0.0); nx + 1]; nt];
        let mut col = vec![Complex64::new(0.0, 0.0); nt];
        for q in 0..=nx {
            for (i, c) in col.iter_mut().enumerate() {
                *c = Complex64::new(g.get(i, q), 0.0);
            }
            self.plans.t_fwd.process(&mut col);
            for (b, c) in col.iter().enumerate() {
                out[b][q] = c / nt as f64;
            }
        }
        out
    }

    /// Samples of the kernel element on the grid; boundary columns are exactly zero.
    pub fn kernel_embed(&self, v: &KernelElement) -> GridField {
        embed_on_grid(self.grid, |s| v.profile.eval(s))
    }

    pub fn norm(&self, g: &GridField, kind: NormKind) -> Result<f64> {
        self.check_grid(g)?;
        match kind {
            NormKind::L2 => Ok(g.l2_norm()),
            NormKind::Linf => Ok(g.max_abs()),
            NormKind::H1 => Ok(self.analyze_interior(g).h1_norm()),
            NormKind::Holder12 => self.holder12(g),
        }
    }

    /// Sup norm plus the grid-pair maximum of `|u(p) - u(q)| / (|t - t'| + |x - x'|)^{1/2}`,
    /// with periodic distance in `t`. A lower bound for the continuous quantity.
    pub fn holder12(&self, g: &GridField) -> Result<f64> {
        let Grid { nt, nx } = self.grid;
        if nt * nx > self.holder_cap {
            return Err(Error::GridTooLarge { points: nt * nx, cap: self.holder_cap });
        }
        let cols = nx + 1;
        let dt = self.grid.dt();
        let dx = self.grid.dx();
        let n = nt * cols;
        let vals = g.values();
        let semi = (0..n)
            .into_par_iter()
            .map(|a| {
                let (ia, qa) = (a / cols, a % cols);
                let mut best = 0.0f64;
                for b in (a + 1)..n {
                    let (ib, qb) = (b / cols, b % cols);
                    let di = ia.abs_diff(ib);
                    let di = di.min(nt - di) as f64 * dt;
                    let d = di + qa.abs_diff(qb) as f64 * dx;
                    best = best.max((vals[a] - vals[b]).abs() / d.sqrt());
                }
                best
            })
            .reduce(|| 0.0, f64::max);
        Ok(g.max_abs() + semi)
    }
}

/// Cubic with zero values at `0, pi`, `C''(0) = 1` and `C''(pi) = 0`.
fn cubic_lift(x: f64) -> f64 {
    -PI * x / 3.0 + x * x / 2.0 - x.powi(3) / (6.0 * PI)
}

/// Values `p(t + x) - p(t - x)` on `grid`, sampling `p` on a common refinement
/// of the t- and x-spacings so both arguments land on sample points.
pub fn embed_on_grid<F: Fn(f64) -> f64>(grid: Grid, p: F) -> GridField {
    let Grid { nt, nx } = grid;
    let ns = lcm(nt, 2 * nx);
    let a = ns / nt;
    let b = ns / (2 * nx);
    let samples: Vec<f64> = (0..ns).map(|k| p(2.0 * PI * k as f64 / ns as f64)).collect();
    let mut out = GridField::zeros(grid);
    for i in 0..nt {
        for q in 0..=nx {
            let plus = (i * a + q * b) % ns;
            let minus = (i * a + ns * (q * b / ns + 1) - q * b) % ns;
            out.set(i, q, samples[plus] - samples[minus]);
        }
    }
    out
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
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
    fn analyze_single_sine_mode() {
        let d = disc();
        let g = GridField::from_fn(d.grid(), |_, x| (2.0 * x).sin());
        let s = d.analyze(&g).unwrap();
        for (l, j, c) in s.modes() {
            let expect = if (l, j) == (0, 2) { 1.0 } else { 0.0 };
            assert!((c - Complex64::new(expect, 0.0)).norm() < 1e-12, "({l},{j}) = {c}");
        }
    }

    #[test]
    fn analyze_cos_t_sin_x() {
        let d = disc();
        let g = GridField::from_fn(d.grid(), |t, x| t.cos() * x.sin());
        let s = d.analyze(&g).unwrap();
        for (l, j, c) in s.modes() {
            let expect = if j == 1 && l.abs() == 1 { 0.5 } else { 0.0 };
            assert!((c - Complex64::new(expect, 0.0)).norm() < 1e-12, "({l},{j}) = {c}");
        }
    }

    #[test]
    fn synthesize_examples() {
        let d = disc();
        let mut s = SpectralField::zeros(d.truncation());
        s.set(0, 1, Complex64::new(1.0, 0.0));
        let g = d.synthesize(&s).unwrap();
        let exact = GridField::from_fn(d.grid(), |_, x| x.sin());
        assert!((&g - &exact).max_abs() < 1e-14);

        let mut s = SpectralField::zeros(d.truncation());
        s.set_real_mode(1, 1, Complex64::new(0.5, 0.0));
        let g = d.synthesize(&s).unwrap();
        let exact = GridField::from_fn(d.grid(), |t, x| t.cos() * x.sin());
        assert!((&g - &exact).max_abs() < 1e-14);

        // i/2 e^{it} - i/2 e^{-it} = -sin t
        let mut s = SpectralField::zeros(d.truncation());
        s.set_real_mode(1, 1, Complex64::new(0.0, 0.5));
        let g = d.synthesize(&s).unwrap();
        let exact = GridField::from_fn(d.grid(), |t, x| -t.sin() * x.sin());
        assert!((&g - &exact).max_abs() < 1e-14);
    }

    #[test]
    fn synthesize_rejects_non_real_coefficients() {
        let d = disc();
        let mut s = SpectralField::zeros(d.truncation());
        s.set(1, 2, Complex64::new(1.0, 0.0));
        assert!(matches!(d.synthesize(&s), Err(Error::RealityViolation { .. })));
    }

    #[test]
    fn too_coarse_grid_is_rejected() {
        assert!(matches!(
            Discretization::new(Grid::new(32, 64), Truncation::new(16, 16)),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(Discretization::new(Grid::new(34, 17), Truncation::new(16, 16)).is_ok());
    }

    #[test]
    fn analyze_rejects_foreign_grid() {
        let d = disc();
        let g = GridField::zeros(Grid::new(64, 32));
        assert!(matches!(d.analyze(&g), Err(Error::DimensionMismatch(_))));
    }

    fn random_spectral(trunc: Truncation, rng: &mut ChaCha8Rng) -> SpectralField {
        let mut s = SpectralField::zeros(trunc);
        for l in 0..=trunc.l as i64 {
            for j in 1..=trunc.j {
                s.set_real_mode(l, j, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            }
        }
        s
    }

    #[test]
    fn round_trip_random_band_limited() {
        let d = disc();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let s = random_spectral(d.truncation(), &mut rng);
            let g = d.synthesize(&s).unwrap();
            let back = d.analyze(&g).unwrap();
            assert!((&back - &s).coeffs().iter().all(|c| c.norm() < 1e-12));
            let g2 = d.synthesize(&back).unwrap();
            assert!((&g2 - &g).max_abs() < 1e-10);
        }
    }

    #[test]
    fn corrected_analysis_of_boundary_nonzero_fields() {
        let d = Discretization::default();
        let one = GridField::from_fn(d.grid(), |_, _| 1.0);
        let parabola = GridField::from_fn(d.grid(), |_, x| x * (PI - x) / 2.0);
        let a = d.analyze_corrected(&one).unwrap();
        let b = d.analyze_corrected(&parabola).unwrap();
        for j in 1..=d.truncation().j {
            let jf = j as f64;
            let odd = if j % 2 == 1 { 1.0 } else { 0.0 };
            assert!((a.get(0, j).re - odd * 4.0 / (PI * jf)).abs() < 1e-12, "j={j}");
            assert!((b.get(0, j).re - odd * 4.0 / (PI * jf.powi(3))).abs() < 1e-12, "j={j}");
            assert!((jf * jf * b.get(0, j) - a.get(0, j)).norm() < 1e-11);
        }
        let g = GridField::from_fn(d.grid(), |t, x| (2.0 * t).cos() * (3.0 * x).sin());
        let s = d.analyze_corrected(&g).unwrap();
        assert!((s.get(2, 3).re - 0.5).abs() < 1e-10 && (s.get(-2, 3).re - 0.5).abs() < 1e-10);
        assert!((s.energy() - 0.5).abs() < 1e-10);
        let smooth = GridField::from_fn(d.grid(), |t, x| t.sin() * (x.sin() + 0.3 * (5.0 * x).sin()));
        // on odd-smooth fields the correction only adds the finite-difference error of g''
        let diff = &d.analyze_corrected(&smooth).unwrap() - &d.analyze_interior(&smooth);
        assert!(diff.l2_norm() < 1e-6, "{}", diff.l2_norm());
    }

    #[test]
    fn parseval_against_quadrature() {
        let d = disc();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_spectral(d.truncation(), &mut rng);
        let g = d.synthesize(&s).unwrap();
        let quad = g.l2_norm();
        assert!((quad - s.l2_norm()).abs() < 1e-10 * quad);
    }

    #[test]
    fn kernel_embed_identities() {
        let d = disc();
        let v = KernelElement::new(TorusProfile::cosine(1, 4));
        let g = d.kernel_embed(&v);
        let exact = GridField::from_fn(d.grid(), |t, x| -2.0 * t.sin() * x.sin());
        assert!((&g - &exact).max_abs() < 1e-14);

        let v = KernelElement::new(TorusProfile::sine(1, 4));
        let g = d.kernel_embed(&v);
        let exact = GridField::from_fn(d.grid(), |t, x| 2.0 * t.cos() * x.sin());
        assert!((&g - &exact).max_abs() < 1e-14);

        let g = d.kernel_embed(&KernelElement::zero(3));
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn kernel_embed_has_exact_zero_boundaries_on_odd_grids() {
        let grid = Grid::new(100, 37);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = KernelElement::new(TorusProfile::random(&mut rng, 6, 1.0));
        let g = embed_on_grid(grid, |s| v.profile.eval(s));
        assert_eq!(g.boundary_max(), 0.0);
        let direct = GridField::from_fn(grid, |t, x| v.eval(t, x));
        assert!((&g - &direct).max_abs() < 1e-12);
    }

    #[test]
    fn kernel_embed_is_supported_on_kernel_modes() {
        let d = disc();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = KernelElement::new(TorusProfile::random(&mut rng, 20, 1.0));
        let s = d.analyze(&d.kernel_embed(&v)).unwrap();
        assert!(s.range_part().energy().sqrt() < 1e-12);
        assert!((&s - &v.to_spectral(d.truncation())).energy().sqrt() < 1e-12);
        let back = KernelElement::from_spectral(&s);
        assert!((&back.profile.resized(20) - &v.profile).coeffs().iter().all(|c| c.norm() < 1e-13));
    }

    #[test]
    fn norms_of_known_fields() {
        let d = disc();
        let v = KernelElement::new(TorusProfile::cosine(1, 1));
        let g = d.kernel_embed(&v);
        let l2 = d.norm(&g, NormKind::L2).unwrap();
        assert!((l2 * l2 - 2.0 * PI * PI).abs() < 1e-10);
        assert!((v.l2_norm().powi(2) - 2.0 * PI * PI).abs() < 1e-10);

        let g = GridField::from_fn(d.grid(), |_, x| x.sin());
        assert!((d.norm(&g, NormKind::Linf).unwrap() - 1.0).abs() < 1e-15);
        let l2 = d.norm(&g, NormKind::L2).unwrap();
        assert!((l2 * l2 - PI * PI).abs() < 1e-10);

        let z = GridField::zeros(d.grid());
        for kind in [NormKind::L2, NormKind::H1, NormKind::Linf, NormKind::Holder12] {
            assert_eq!(d.norm(&z, kind).unwrap(), 0.0);
        }
    }

    #[test]
    fn h1_norm_spectral_matches_profile_formula() {
        let d = disc();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = KernelElement::new(TorusProfile::random(&mut rng, 8, 1.0));
        let h1 = d.norm(&d.kernel_embed(&v), NormKind::H1).unwrap();
        assert!((h1 - v.h1_norm()).abs() < 1e-10 * h1);
    }

    #[test]
    fn holder_cap_is_enforced() {
        let d = Discretization::new(Grid::new(256, 64), Truncation::new(32, 32)).unwrap();
        let g = GridField::zeros(d.grid());
        assert!(matches!(d.norm(&g, NormKind::Holder12), Err(Error::GridTooLarge { .. })));
    }

    #[test]
    fn holder_seminorm_of_sin_x() {
        let d = Discretization::new(Grid::new(16, 16), Truncation::new(4, 4)).unwrap();
        let g = GridField::from_fn(d.grid(), |_, x| x.sin());
        let h = d.norm(&g, NormKind::Holder12).unwrap();
        // |sin x - sin y| <= |x - y| <= sqrt(pi) |x - y|^{1/2}
        assert!(h > 1.0 && h <= 1.0 + PI.sqrt());
    }

    #[test]
    fn csv_and_json_round_trip() {
        let d = Discretization::new(Grid::new(8, 4), Truncation::new(2, 3)).unwrap();
        let g = GridField::from_fn(d.grid(), |t, x| (t + 0.3).cos() * x.sin() + 1.0 / 3.0);
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let back = GridField::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, g);

        let s = d.analyze_interior(&g);
        let back = SpectralField::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }
}
