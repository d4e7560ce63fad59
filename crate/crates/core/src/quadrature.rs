//! Small quadrature and interpolation helpers shared by the integral formulas.

use std::f64::consts::PI;

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integrate `f` over `[a, b]` split into `panels` equal pieces.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
        if a == b {
            return 0.0;
        }
        let h = (b - a) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let lo = a + h * p as f64;
            let mid = lo + 0.5 * h;
            let mut s = 0.0;
            for (z, w) in self.nodes.iter().zip(&self.weights) {
                s += w * f(mid + 0.5 * h * z);
            }
            total += 0.5 * h * s;
        }
        total
    }

    /// Nodes and weights mapped onto `[a, b]` split into `panels` pieces.
    pub fn mapped(&self, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
        let h = (b - a) / panels as f64;
        let mut out = Vec::with_capacity(panels * self.nodes.len());
        for p in 0..panels {
            let mid = a + h * (p as f64 + 0.5);
            for (z, w) in self.nodes.iter().zip(&self.weights) {
                out.push((mid + 0.5 * h * z, 0.5 * h * w));
            }
        }
        out
    }
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Local Lagrange interpolation on the uniform nodes `x_q = q * dx`, `q = 0..len`.
///
/// Uses a stencil of `width` consecutive nodes centred on `x`, shifted inward at
/// the ends of the interval.
#[derive(Debug, Clone, Copy)]
pub struct UniformLagrange {
    pub dx: f64,
    pub len: usize,
    pub width: usize,
}

impl UniformLagrange {
    pub fn new(dx: f64, len: usize, width: usize) -> Self {
        Self { dx, len, width: width.min(len) }
    }

    /// First stencil index and the stencil weights for evaluation at `x`.
    pub fn stencil(&self, x: f64, weights: &mut [f64]) -> usize {
        let w = self.width;
        debug_assert_eq!(weights.len(), w);
        let pos = x / self.dx;
        let centre = pos.floor() as isize - (w as isize - 1) / 2;
        let start = centre.clamp(0, (self.len - w) as isize) as usize;
        for k in 0..w {
            let xk = (start + k) as f64;
            let mut l = 1.0;
            for m in 0..w {
                if m != k {
                    let xm = (start + m) as f64;
                    l *= (pos - xm) / (xk - xm);
                }
            }
            weights[k] = l;
        }
        start
    }

    pub fn eval(&self, samples: &[f64], x: f64) -> f64 {
        let mut w = vec![0.0; self.width];
        let s = self.stencil(x, &mut w);
        w.iter().enumerate().map(|(k, wk)| wk * samples[s + k]).sum()
    }

    /// Stencil weights of the derivative of the interpolant at `x`.
    pub fn stencil_derivative(&self, x: f64, weights: &mut [f64]) -> usize {
        let w = self.width;
        debug_assert_eq!(weights.len(), w);
        let pos = x / self.dx;
        let centre = pos.floor() as isize - (w as isize - 1) / 2;
        let start = centre.clamp(0, (self.len - w) as isize) as usize;
        for k in 0..w {
            let xk = (start + k) as f64;
            let mut total = 0.0;
            for m in (0..w).filter(|&m| m != k) {
                let xm = (start + m) as f64;
                let mut term = 1.0 / (xk - xm);
                for n in (0..w).filter(|&n| n != k && n != m) {
                    let xn = (start + n) as f64;
                    term *= (pos - xn) / (xk - xn);
                }
                total += term;
            }
            weights[k] = total / self.dx;
        }
        start
    }

    /// Node weights `w_q` with `sum_q w_q g_q = int_a^b I[g](x) rho(x) dx`, where `I[g]` is the
    /// piecewise interpolant. Each cell is integrated with an `order`-point Gauss rule; `a > b`
    /// flips the sign.
    pub fn integration_weights<F: Fn(f64) -> f64>(&self, a: f64, b: f64, order: usize, rho: F) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        let (lo, hi, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
        if lo == hi {
            return out;
        }
        let gl = GaussLegendre::new(order);
        let mut st = vec![0.0; self.width];
        let first = (lo / self.dx).floor().max(0.0) as usize;
        let last = ((hi / self.dx).ceil() as usize).min(self.len - 1);
        for cell in first..last {
            let c0 = (cell as f64 * self.dx).max(lo);
            let c1 = ((cell + 1) as f64 * self.dx).min(hi);
            if c1 <= c0 {
                continue;
            }
            for (x, w) in gl.mapped(c0, c1, 1) {
                let s = self.stencil(x, &mut st);
                let wr = sign * w * rho(x);
                for (k, l) in st.iter().enumerate() {
                    out[s + k] += wr * l;
                }
            }
        }
        out
    }
}

/// Composite trapezoid weights for `n + 1` equispaced nodes with spacing `h`.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n + 1];
    w[0] = 0.5 * h;
    w[n] = 0.5 * h;
    w
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
