//! Randomised sweep over every identity and inequality, one row per check.
//!
//! A margin is the slack of an inequality (`rhs - lhs`, negative when violated) or
//! minus the absolute defect of an identity, in both cases relative to the size of the
//! quantities involved. A check passes when its worst margin is at least `-tolerance`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::*;
use crate::fields::{Discretization, SpectralField};
use crate::operators::{difference_quotient, translate};

/// Tolerance for identities that are exact on band-limited data.
const EXACT: f64 = 1e-10;
/// Tolerance for identities limited by quadrature.
const QUADRATURE: f64 = 1e-6;

pub const IDENTITY_NAMES: &[&str] = &[
    "strip_change_of_variables",
    "strip_product_formula",
    "strip_single_profile",
    "strip_swap_symmetry",
    "odd_product_vanishes",
    "symmetric_weight_vanishes",
    "symmetric_weight_derivative_vanishes",
    "kernel_l2_isometry",
    "kernel_h1_isometry",
    "kernel_sup_bounds",
    "kernel_sup_embedding",
    "l2k_upper_bound",
    "l2k_strip_lower_bound",
    "power_difference_upper",
    "power_difference_lower",
    "odd_power_increment",
    "leibniz_rule",
    "summation_by_parts",
    "difference_quotient_bound",
    "coercivity_gap",
    "cutoff_sign",
];

/// One row of the verification table.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub identity: String,
    pub samples: usize,
    pub worst_margin: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl IdentityCheck {
    pub fn new(identity: impl Into<String>, samples: usize, worst_margin: f64, tolerance: f64) -> Self {
        let pass = worst_margin >= -tolerance && worst_margin.is_finite();
        Self { identity: identity.into(), samples, worst_margin, tolerance, pass }
    }

    pub const CSV_HEADER: &'static str = "identity,samples,worst_margin,tolerance,pass";

    pub fn csv_row(&self) -> String {
        format!("{},{},{:.6e},{:.1e},{}", self.identity, self.samples, self.worst_margin, self.tolerance, self.pass)
    }
}

fn random_kernel(rng: &mut ChaCha8Rng) -> KernelElement {
    let modes = rng.gen_range(1..=6);
    KernelElement::new(TorusProfile::random(rng, modes, 1.0))
}

fn defect(a: f64, b: f64) -> f64 {
    -(a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

fn quad() -> StripQuadrature {
    StripQuadrature::new(128, 32, 10)
}

fn random_band_limited(disc: &Discretization, rng: &mut ChaCha8Rng, modes: usize) -> GridField {
    let mut s = SpectralField::zeros(disc.truncation());
    for l in 0..=modes as i64 {
        for j in 1..=modes {
            s.set_real_mode(l, j, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        }
    }
    disc.synthesize_unchecked(&s)
}

/// Run the named checks (all when `only` is empty) with `samples` random inputs each.
pub fn run_identity_suite(seed: u64, samples: usize, only: &[&str]) -> Vec<IdentityCheck> {
    IDENTITY_NAMES
        .par_iter()
        .enumerate()
        .filter(|(_, name)| only.is_empty() || only.contains(name))
        .map(|(idx, name)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(idx as u64 + 1)));
            run_one(name, samples.max(1), &mut rng)
        })
        .collect()
}

fn worst<F: FnMut(&mut ChaCha8Rng) -> f64>(samples: usize, rng: &mut ChaCha8Rng, mut f: F) -> f64 {
    (0..samples).map(|_| f(rng)).fold(f64::INFINITY, f64::min)
}

fn run_one(name: &str, samples: usize, rng: &mut ChaCha8Rng) -> IdentityCheck {
    let q = quad();
    match name {
        "strip_change_of_variables" => {
            let m = worst(samples, rng, |rng| {
                let v = random_kernel(rng);
                let c = rng.gen_range(-1.0..1.0);
                let alpha = rng.gen_range(0.0..0.45);
                let f = |t: f64, x: f64| v.eval(t, x).powi(2) * (1.0 + c * x.cos()) + (t - x).sin() * x;
                let strip = StripDomain { alpha };
                defect(q.integrate(&f, strip, StripPath::Direct), q.integrate(&f, strip, StripPath::Rotated))
            });
            IdentityCheck::new(name, samples, m, QUADRATURE)
        }
        "strip_product_formula" => {
            let m = worst(samples, rng, |rng| {
                let (p, pq) = (random_kernel(rng).profile, random_kernel(rng).profile);
                let (p0, q0) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let alpha = rng.gen_range(0.0..0.45);
                let f = |t: f64, x: f64| (p0 + p.eval(t + x)) * (q0 + pq.eval(t - x));
                let lhs = q.integrate(&f, StripDomain { alpha }, StripPath::Direct);
                let a = 2.0 * alpha * PI;
                let n = p.modes().min(pq.modes());
                let osc: f64 = (0..n)
                    .map(|k| {
                        let m = (k + 1) as f64;
                        2.0 * (p.coeffs()[k].conj() * pq.coeffs()[k]).re * 2.0 * (m * a).sin() / m
                    })
                    .sum();
                let corr = 2.0 * PI * (p0 * q0 * 2.0 * a + osc);
                let rhs = 0.5 * (2.0 * PI * p0) * (2.0 * PI * q0) - 0.5 * corr;
                defect(lhs, rhs)
            });
            IdentityCheck::new(name, samples, m, EXACT)
        }
        "strip_single_profile" => {
            let m = worst(samples, rng, |rng| {
                let p = random_kernel(rng).profile;
                let p0 = rng.gen_range(-1.0..1.0);
                let alpha = rng.gen_range(0.0..0.45);
                let strip = StripDomain { alpha };
                let plus = q.integrate(&|t: f64, x: f64| p0 + p.eval(t + x), strip, StripPath::Direct);
                let minus = q.integrate(&|t: f64, x: f64| p0 + p.eval(t - x), strip, StripPath::Direct);
                let rhs = PI * (1.0 - 2.0 * alpha) * 2.0 * PI * p0;
                defect(plus, rhs).min(defect(minus, rhs))
            });
            IdentityCheck::new(name, samples, m, EXACT)
        }
        "strip_swap_symmetry" => {
            let m = worst(samples, rng, |rng| {
                let p = random_kernel(rng).profile;
                let a: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let b: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let poly = |c: &[f64], y: f64| c.iter().rev().fold(0.0, |acc, ck| acc * y + ck);
                let alpha = rng.gen_range(0.0..0.45);
                let strip = StripDomain { alpha };
                let lhs = q.integrate(&|t: f64, x: f64| poly(&a, p.eval(t + x)) * poly(&b, p.eval(t - x)), strip, StripPath::Direct);
                let rhs = q.integrate(&|t: f64, x: f64| poly(&a, p.eval(t - x)) * poly(&b, p.eval(t + x)), strip, StripPath::Direct);
                defect(lhs, rhs)
            });
            IdentityCheck::new(name, samples, m, QUADRATURE)
        }
        "odd_product_vanishes" => {
            let m = worst(samples, rng, |rng| {
                let n = 2 * rng.gen_range(0..3) + 1;
                let ps: Vec<TorusProfile> = (0..n).map(|_| random_kernel(rng).profile).collect();
                let alpha = rng.gen_range(0.0..0.45);
                let val = odd_product_integral(&ps, alpha).expect("odd count");
                let scale: f64 = ps.iter().map(|p| 2.0 * profile_sup(p)).product::<f64>() * 2.0 * PI * PI;
                -val.abs() / (1.0 + scale)
            });
            IdentityCheck::new(name, samples, m, QUADRATURE)
        }
        "symmetric_weight_vanishes" | "symmetric_weight_derivative_vanishes" => {
            let derivative = name.ends_with("derivative_vanishes");
            let m = worst(samples, rng, |rng| {
                let w = random_weight(rng);
                let v = random_kernel(rng);
                let (p1, p2) = (random_kernel(rng), random_kernel(rng));
                let alpha = rng.gen_range(0.0..0.45);
                let term = if derivative { SymmetryTerm::Derivative(&p1, &p2) } else { SymmetryTerm::Value(&p1) };
                let val = symmetry_integral(&w, &v, term, alpha).expect("valid alpha");
                let abs = match term {
                    SymmetryTerm::Value(phi) => {
                        q.integrate(&|t: f64, x: f64| ((w.a)(x, v.eval(t, x)) * phi.eval(t, x)).abs(), StripDomain { alpha }, StripPath::Direct)
                    }
                    SymmetryTerm::Derivative(a, b) => q.integrate(
                        &|t: f64, x: f64| ((w.a_u)(x, v.eval(t, x)) * a.eval(t, x) * b.eval(t, x)).abs(),
                        StripDomain { alpha },
                        StripPath::Direct,
                    ),
                };
                -val.abs() / (1.0 + abs)
            });
            IdentityCheck::new(name, samples, m, QUADRATURE)
        }
        "kernel_l2_isometry" => {
            let m = worst(samples, rng, |rng| {
                let v = random_kernel(rng);
                let lhs = q.integrate(&|t: f64, x: f64| v.eval(t, x).powi(2), StripDomain { alpha: 0.0 }, StripPath::Direct);
                defect(lhs, 2.0 * PI * v.profile.l2_norm_sq())
            });
            IdentityCheck::new(name, samples, m, EXACT)
        }
        "kernel_h1_isometry" => {
            let m = worst(samples, rng, |rng| {
                let v = random_kernel(rng);
                let d = v.profile.derivative();
                let full = StripDomain { alpha: 0.0 };
                let vt = q.integrate(&|t: f64, x: f64| (d.eval(t + x) - d.eval(t - x)).powi(2), full, StripPath::Direct);
                let vx = q.integrate(&|t: f64, x: f64| (d.eval(t + x) + d.eval(t - x)).powi(2), full, StripPath::Direct);
                let rhs = 2.0 * PI * d.l2_norm_sq();
                defect(vt, rhs).min(defect(vx, rhs))
            });
            IdentityCheck::new(name, samples, m, EXACT)
        }
        "kernel_sup_bounds" => {
            let m = worst(samples, rng, |rng| {
                let v = random_kernel(rng);
                let (sv, sp) = (kernel_sup(&v), profile_sup(&v.profile));
                ((sv - sp) / (1.0 + sv)).min((2.0 * sp - sv) / (1.0 + sv))
            });
            IdentityCheck::new(name, samples, m, EXACT)
        }
        "kernel_sup_embedding" => {
            let m = worst(samples, rng, |rng| {
                let v = random_kernel(rng);
                let (sv, h1) = (kernel_sup(&v), v.h1_norm());
                (h1 - sv) / (1.0 + h1)
            });
            IdentityCheck::new(name, samples, m, EXACT)
        }
        "l2k_upper_bound" | "l2k_strip_lower_bound" => {
            let upper = name == "l2k_upper_bound";
            let m = worst(samples, rng, |rng| {
                let v = random_kernel(rng);
                let k = rng.gen_range(1..=2);
                let r = l2k_strip_bounds(&v, k);
                let margin = if upper { r.upper_margin } else { r.lower_margin };
                margin / (1.0 + r.full)
            });
            IdentityCheck::new(name, samples, m, 1e-8)
        }
        "power_difference_upper" | "power_difference_lower" | "odd_power_increment" => {
            let per_k = samples.max(10_000);
            let mut m = f64::INFINITY;
            let mut total = 0;
            for k in 1..=3 {
                let r = elementary_inequalities(k, per_k, rng);
                total += r.samples;
                m = m.min(match name {
                    "power_difference_upper" => r.upper,
                    "power_difference_lower" => r.lower.unwrap_or(f64::INFINITY),
                    _ => r.odd_increment,
                });
            }
            IdentityCheck::new(name, total, m, 1e-9)
        }
        "leibniz_rule" | "summation_by_parts" | "difference_quotient_bound" => {
            let disc = Discretization::default();
            let m = worst(samples, rng, |rng| {
                let f = random_band_limited(&disc, rng, 6);
                let g = random_band_limited(&disc, rng, 6);
                let h = rng.gen_range(1..=8) * if rng.gen_bool(0.5) { 1 } else { -1 };
                match name {
                    "leibniz_rule" => leibniz_defect(&f, &g, h),
                    "summation_by_parts" => {
                        let lhs = f.inner(&difference_quotient(&g, -h).expect("nonzero shift"));
                        let rhs = -difference_quotient(&f, h).expect("nonzero shift").inner(&g);
                        let scale = f.l2_norm() * g.l2_norm() / (h.unsigned_abs() as f64 * disc.grid().dt());
                        -(lhs - rhs).abs() / (1.0 + scale)
                    }
                    _ => {
                        let dq = difference_quotient(&f, h).expect("nonzero shift").l2_norm();
                        let ft = disc.analyze_interior(&f).dt().l2_norm();
                        (ft - dq) / (1.0 + ft)
                    }
                }
            });
            IdentityCheck::new(name, samples, m, EXACT)
        }
        "coercivity_gap" => {
            let grid = Grid::default();
            let n = samples.max(200);
            let m = worst(n, rng, |rng| {
                let b = random_weight_field(grid, rng);
                let v = random_kernel(rng);
                let k = rng.gen_range(1..=2);
                coercivity_gap(&b, &v, k).expect("nonnegative weight")
            });
            IdentityCheck::new(name, n, m, 1e-8)
        }
        "cutoff_sign" => {
            let grid = Grid::default();
            let m = worst(samples, rng, |rng| {
                let v = random_kernel(rng);
                let phi = cutoff_variation(&v, profile_sup(&v.profile) / 2.0).expect("positive threshold");
                let vg = embed_on_grid(grid, |s| v.profile.eval(s));
                vg.zip_map(&phi.embed(grid), |a, b| a * b).min()
            });
            IdentityCheck::new(name, samples, m, 1e-12)
        }
        other => IdentityCheck::new(format!("unknown:{other}"), 0, f64::NEG_INFINITY, 0.0),
    }
}

fn leibniz_defect(f: &GridField, g: &GridField, h: i64) -> f64 {
    let fg = f.zip_map(g, |a, b| a * b);
    let dfg = difference_quotient(&fg, h).expect("nonzero shift");
    let df = difference_quotient(f, h).expect("nonzero shift");
    let dg = difference_quotient(g, h).expect("nonzero shift");
    let tf = translate(f, h);
    let rhs = &df.zip_map(g, |a, b| a * b) + &tf.zip_map(&dg, |a, b| a * b);
    let product = -(&dfg - &rhs).max_abs() / (1.0 + dfg.max_abs());

    // cube: D f^3 = 3 (D f) f^2 + (D f) sum_j f^{2-j} (T f^j - f^j)
    let f3 = f.map(|a| a.powi(3));
    let d3 = difference_quotient(&f3, h).expect("nonzero shift");
    let mut expansion = df.zip_map(f, |d, a| 3.0 * d * a * a);
    for j in 0..3 {
        let tj = tf.map(|a| a.powi(j));
        let fj = f.map(|a| a.powi(j));
        let term = f.map(|a| a.powi(2 - j)).zip_map(&(&tj - &fj), |a, b| a * b);
        expansion = &expansion + &df.zip_map(&term, |a, b| a * b);
    }
    let cube = -(&d3 - &expansion).max_abs() / (1.0 + d3.max_abs());
    product.min(cube)
}

fn random_weight(rng: &mut ChaCha8Rng) -> SymmetricWeight {
    let c = rng.gen_range(0.5..2.0);
    match rng.gen_range(0..4) {
        0 => SymmetricWeight::new(SymmetryClass::Even, Arc::new(move |x, u| c * x.sin() * u * u), Arc::new(move |x, u| 2.0 * c * x.sin() * u)),
        1 => SymmetricWeight::new(SymmetryClass::Even, Arc::new(move |x, u| (c * u).cos() * (1.0 + x * (PI - x))), Arc::new(move |x, u| -c * (c * u).sin() * (1.0 + x * (PI - x)))),
        2 => SymmetricWeight::new(SymmetryClass::Odd, Arc::new(move |x, u| c * x.cos() * u), Arc::new(move |x, _| c * x.cos())),
        _ => SymmetricWeight::new(SymmetryClass::Odd, Arc::new(move |x, u| (2.0 * x - PI) * u.powi(3) * c), Arc::new(move |x, u| 3.0 * c * (2.0 * x - PI) * u * u)),
    }
    .expect("weights are built with their declared parity")
}

/// Nonnegative weight: a positive trigonometric bump plus a random nonnegative part.
fn random_weight_field(grid: Grid, rng: &mut ChaCha8Rng) -> GridField {
    let a0 = rng.gen_range(0.0..1.0);
    let a1 = rng.gen_range(0.0..1.0);
    let (l, j) = (rng.gen_range(0..4) as f64, rng.gen_range(1..4) as f64);
    let phase = rng.gen_range(0.0..2.0 * PI);
    GridField::from_fn(grid, |t, x| a0 + a1 * x * (PI - x) + ((l * t + phase).sin() * (j * x).cos()).powi(2))
}
