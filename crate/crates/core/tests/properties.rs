use nalgebra::DMatrix;
use proptest::prelude::*;

use wishart_core::limits::{droplet, rho_strong};
use wishart_core::sop_kernel::pfaffian;
use wishart_core::specfun::{laguerre, SignedLog};

fn antisymmetric(n: usize, entries: &[f64]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            a[(i, j)] = entries[k];
            a[(j, i)] = -entries[k];
            k += 1;
        }
    }
    a
}

proptest! {
    #[test]
    fn pfaffian_squared_is_determinant(half in 1usize..5, entries in prop::collection::vec(-2.0f64..2.0, 28)) {
        let n = 2 * half;
        let a = antisymmetric(n, &entries);
        let pf = pfaffian(&a).unwrap();
        let det = a.determinant();
        prop_assert!((pf * pf - det).abs() <= 1e-10 * (1.0 + det.abs()), "pf^2 {} det {}", pf * pf, det);
    }

    #[test]
    fn signed_log_arithmetic_matches_f64(x in -1e3f64..1e3, y in -1e3f64..1e3) {
        let (a, b) = (SignedLog::from_f64(x), SignedLog::from_f64(y));
        let close = |got: f64, want: f64| (got - want).abs() <= 1e-12 * (x.abs() + y.abs()).max(1.0).powi(2);
        prop_assert!(close((a * b).to_f64(), x * y));
        prop_assert!(close((a + b).to_f64(), x + y));
        prop_assert!(close((-a).to_f64(), -x));
    }

    #[test]
    fn laguerre_three_term_recurrence(j in 1i64..30, nu in 0.0f64..5.0, x in 0.0f64..40.0) {
        let l = |k: i64| laguerre(k, nu, x).to_f64();
        let jf = j as f64;
        let lhs = (jf + 1.0) * l(j + 1);
        let rhs = (2.0 * jf + 1.0 + nu - x) * l(j) - (jf + nu) * l(j - 1);
        let scale = (jf + 1.0) * l(j + 1).abs() + (2.0 * jf + 1.0 + nu + x) * l(j).abs() + (jf + nu) * l(j - 1).abs();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1e-300));
    }

    #[test]
    fn strong_density_vanishes_off_support(tau in 0.05f64..0.95, rho in 0.1f64..3.0, t in 0.001f64..2.0) {
        let g = droplet(tau, rho);
        prop_assert_eq!(rho_strong(tau, rho, g.xi_plus + t).unwrap(), 0.0);
        prop_assert_eq!(rho_strong(tau, rho, g.xi_minus - t).unwrap(), 0.0);
        prop_assert!(rho_strong(tau, rho, 0.5 * (g.xi_minus + g.xi_plus)).unwrap() > 0.0);
    }
}
