use num_complex::Complex64;
use proptest::prelude::*;

use rws_core::operators::OperatorWorkspace;
use rws_core::{Discretization, Grid, SpectralField, Truncation};

const L: usize = 12;
const J: usize = 12;

fn disc() -> Discretization {
    Discretization::new(Grid::new(48, 24), Truncation::new(L, J)).unwrap()
}

/// Real-valued spectral field from one complex coefficient per `(l >= 0, j)`.
fn field(coeffs: &[(f64, f64)]) -> SpectralField {
    let mut s = SpectralField::zeros(Truncation::new(L, J));
    let mut it = coeffs.iter();
    for l in 0..=L as i64 {
        for j in 1..=J {
            let &(re, im) = it.next().unwrap();
            s.set_real_mode(l, j, Complex64::new(re, im));
        }
    }
    s
}

fn coefficients() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), (L + 1) * J)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn synthesis_and_analysis_round_trip(c in coefficients()) {
        let d = disc();
        let s = field(&c);
        let back = d.analyze(&d.synthesize(&s).unwrap()).unwrap();
        prop_assert!((&back - &s).l2_norm() <= 1e-12 * (1.0 + s.l2_norm()));
    }

    #[test]
    fn grid_and_spectral_norms_agree(c in coefficients()) {
        let d = disc();
        let s = field(&c);
        let g = d.synthesize(&s).unwrap();
        prop_assert!((g.l2_norm() - s.l2_norm()).abs() <= 1e-10 * (1.0 + s.l2_norm()));
    }

    #[test]
    fn inverse_never_amplifies_range_fields(c in coefficients()) {
        // every range eigenvalue j^2 - l^2 is a nonzero integer
        let ws = OperatorWorkspace::new(Truncation::new(L, J));
        let f = field(&c).range_part();
        let u = ws.dalembert_inverse(&f).unwrap();
        prop_assert!(u.l2_norm() <= f.l2_norm() * (1.0 + 1e-14));
        prop_assert!(u.kernel_energy() == 0.0);
    }
}
