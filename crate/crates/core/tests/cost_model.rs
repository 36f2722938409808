use fedsim::cost_model::{asymptotic_ratio, log_grid, sweep_curve, time_ratio, CostParams};
use proptest::prelude::*;

fn cp(n: f64, a: usize, mr: f64) -> CostParams {
    CostParams::from_relative(n, a, mr).unwrap()
}

proptest! {
    #[test]
    fn scale_invariance(k_n in 0.0f64..100.0, k_s in 0.01f64..100.0, c in 0.01f64..100.0, a in 1usize..50, mr in 0.0f64..1.0) {
        let base = time_ratio(&CostParams::new(k_n, k_s, a, mr).unwrap());
        let scaled = time_ratio(&CostParams::new(k_n * c, k_s * c, a, mr).unwrap());
        prop_assert!((base - scaled).abs() <= 1e-12 * base.max(1.0));
    }

    #[test]
    fn monotone_in_n_iff_mr_below_inverse_a(a in 1usize..30, mr in 0.0f64..1.0, n in 0.0f64..100.0, dn in 0.1f64..10.0) {
        prop_assume!((mr - 1.0 / a as f64).abs() > 1e-6);
        let r0 = time_ratio(&cp(n, a, mr));
        let r1 = time_ratio(&cp(n + dn, a, mr));
        if mr < 1.0 / a as f64 {
            prop_assert!(r1 > r0);
        } else {
            prop_assert!(r1 < r0);
        }
    }

    #[test]
    fn zero_model_size_is_the_asymptote(a in 1usize..30, n in 0.0f64..100.0) {
        let c = cp(n, a, 0.0);
        let want = a as f64 * (1.0 + n);
        prop_assert!((time_ratio(&c) - want).abs() <= 1e-12 * want);
        prop_assert!((asymptotic_ratio(&c) - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn ratio_never_exceeds_asymptote(a in 1usize..30, n in 0.0f64..100.0, mr in 0.0f64..1.0) {
        let c = cp(n, a, mr);
        prop_assert!(time_ratio(&c) <= asymptotic_ratio(&c) * (1.0 + 1e-12));
    }
}

#[test]
fn hand_evaluated_points() {
    assert_eq!(time_ratio(&cp(10.0, 10, 0.01)), 55.0);
    for a in [1, 2, 5, 10, 20] {
        assert_eq!(time_ratio(&cp(0.0, a, 0.37)), a as f64);
    }
}

#[test]
fn sweep_rows_cover_grid() {
    let grid = log_grid(0.1, 100.0, 100).unwrap();
    let rows = sweep_curve(&grid, &[2, 5, 10, 20], 0.01).unwrap();
    assert_eq!(rows.len(), 400);
    for r in &rows {
        assert_eq!(r.ratio, time_ratio(&cp(r.n, r.agencies, 0.01)));
    }
    assert!(grid.windows(2).all(|w| w[1] > w[0]));
}
