//! Property-based invariants across the library.

use matreg::damping::{damp_single, damp_sum_weights, quantile_ladder_from_samples};
use matreg::gp::{gp_prune, pietsch_weights};
use matreg::matcore::{
    frobenius_norm, inf_to_two_estimate, inf_to_two_exact, op_norm, schur_bound, two_to_inf_norm,
    zero_submatrix, DenseMatrix, IndexSet, RemovalMask,
};
use matreg::randgen::{stateless_u64, uniform_open01};
use proptest::prelude::*;

fn small_matrix() -> impl Strategy<Value = DenseMatrix> {
    ((1usize..8, 1usize..8), any::<u64>()).prop_map(|((n, m), seed)| {
        let entries: Vec<f64> = (0..n * m)
            .map(|i| uniform_open01(seed, i as u64) * 8.0 - 4.0)
            .collect();
        DenseMatrix::new(n, m, entries).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_sandwich(a in small_matrix()) {
        let op = op_norm(&a, 1e-9).unwrap();
        let fro = frobenius_norm(&a);
        let t2i = two_to_inf_norm(&a);
        let i2t = inf_to_two_exact(&a).unwrap();
        prop_assert!(op <= schur_bound(&a) + 1e-9);
        prop_assert!(op <= fro + 1e-9);
        prop_assert!(t2i <= fro + 1e-12);
        prop_assert!(t2i <= op + 1e-9);
        prop_assert!(op <= i2t + 1e-9);
        prop_assert!(i2t <= (a.n_cols() as f64).sqrt() * op + 1e-9);
    }

    #[test]
    fn sign_ascent_never_exceeds_exact(a in small_matrix(), restarts in 1usize..8) {
        let est = inf_to_two_estimate(&a, restarts, 7).unwrap();
        let exact = inf_to_two_exact(&a).unwrap();
        prop_assert!(est <= exact + 1e-9, "estimate {est} above exact {exact}");
    }

    #[test]
    fn zeroing_is_idempotent_and_local(a in small_matrix(), sr in any::<u64>()) {
        let n = a.n_rows();
        let m = a.n_cols();
        let rows: Vec<usize> = (0..n).filter(|i| stateless_u64(sr, *i as u64) % 3 == 0).collect();
        let cols: Vec<usize> = (0..m).filter(|j| stateless_u64(sr, 100 + *j as u64) % 3 == 0).collect();
        let mask = RemovalMask {
            rows: IndexSet::new(rows, n).unwrap(),
            cols: IndexSet::new(cols, m).unwrap(),
        };
        let once = zero_submatrix(&a, &mask).unwrap();
        let twice = zero_submatrix(&once, &mask).unwrap();
        prop_assert_eq!(&once, &twice);
        // only the intersection is zeroed; everything else is untouched
        for i in 0..n {
            for j in 0..m {
                if mask.rows.contains(i) && mask.cols.contains(j) {
                    prop_assert_eq!(once.get(i, j), 0.0);
                } else {
                    prop_assert_eq!(once.get(i, j), a.get(i, j));
                }
            }
        }
    }

    #[test]
    fn damp_single_caps_product(x in 0.0f64..1e12, eps in 1e-3f64..0.5) {
        let w = damp_single(x, eps).unwrap();
        prop_assert!((0.0..=1.0).contains(&w));
        prop_assert!(x * w <= 1.0 / eps + 1e-9);
    }

    #[test]
    fn damping_weights_and_domination(seed in any::<u64>(), eps in 0.01f64..0.5) {
        let n = 200;
        let x: Vec<f64> = (0..n)
            .map(|i| uniform_open01(seed, i as u64).powi(-2).min(n as f64) - 1.0)
            .map(|v| v.max(0.0))
            .collect();
        let ladder = quantile_ladder_from_samples(&x).unwrap();
        let dw = damp_sum_weights(&x, &ladder, eps, 1.0).unwrap();
        for (&xi, &wi) in x.iter().zip(dw.w.iter()) {
            prop_assert!((0.0..=1.0).contains(&wi));
            if xi == 0.0 {
                prop_assert_eq!(wi, 1.0);
            }
            prop_assert!(ladder.reconstruct(xi) >= xi - 1e-12);
        }
        let damped: f64 = x.iter().zip(dw.w.iter()).map(|(a, b)| a * b).sum();
        prop_assert!(damped <= 5.0 * dw.level_l * n as f64 + 1e-6);
    }

    #[test]
    fn ladder_levels_are_monotone(seed in any::<u64>()) {
        let xs: Vec<f64> = (0..500).map(|i| uniform_open01(seed, i) * 40.0).collect();
        let ladder = quantile_ladder_from_samples(&xs).unwrap();
        for k in 1..ladder.q.len() {
            prop_assert!(ladder.q[k] >= ladder.q[k - 1]);
            prop_assert!(ladder.p[k] <= ladder.p[k - 1]);
        }
        prop_assert!(ladder.q[ladder.kappa] <= ladder.bound_m + 1e-9);
    }

    #[test]
    fn pruning_pigeonhole_and_bound(seed in any::<u64>(), delta in 0.2f64..1.0) {
        let m = 12;
        let entries: Vec<f64> = (0..m * m)
            .map(|i| uniform_open01(seed, i as u64) * 2.0 - 1.0)
            .collect();
        let b = DenseMatrix::new(m, m, entries).unwrap();
        let w = pietsch_weights(&b, 120, seed).unwrap();
        let (j, bound) = gp_prune(&b, &w, delta).unwrap();
        prop_assert!((j.len() as f64) < delta * m as f64);
        let mask = RemovalMask {
            rows: IndexSet::full(m),
            cols: j,
        };
        let pruned = zero_submatrix(&b, &mask).unwrap();
        prop_assert!(op_norm(&pruned, 1e-9).unwrap() <= bound + 1e-8);
    }

    #[test]
    fn index_set_algebra(sr in any::<u64>(), dim in 1usize..40) {
        let a: Vec<usize> = (0..dim).filter(|i| stateless_u64(sr, *i as u64) % 2 == 0).collect();
        let b: Vec<usize> = (0..dim).filter(|i| stateless_u64(sr, 77 + *i as u64) % 2 == 0).collect();
        let sa = IndexSet::new(a.clone(), dim).unwrap();
        let sb = IndexSet::new(b.clone(), dim).unwrap();
        let u = sa.union(&sb).unwrap();
        for i in 0..dim {
            prop_assert_eq!(u.contains(i), sa.contains(i) || sb.contains(i));
            prop_assert_eq!(sa.complement().contains(i), !sa.contains(i));
        }
        prop_assert!(u.len() <= sa.len() + sb.len());
    }
}
