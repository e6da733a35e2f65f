use ndarray::Array2;
use proptest::prelude::*;
use sbm_mrf::network::{bh_adjust, build_cooccurrence, spearman_rho};
use sbm_mrf::sbm::{log_likelihood, log_mrf_prior};
use sbm_mrf::transform::{mclr, mclr_row, CompositionMatrix};
use sbm_mrf::{BinaryNetwork, CommunityAssignment, EdgeProbabilityMatrix, SamplerConfig, ShiftMode};

fn composition_row() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(prop_oneof![2 => Just(0.0), 3 => 1e-6f64..1.0], 2..30)
        .prop_filter("needs a non-zero entry", |r| r.iter().any(|&x| x > 0.0))
        .prop_map(|r| {
            let total: f64 = r.iter().sum();
            r.into_iter().map(|x| x / total).collect()
        })
}

fn names(p: usize) -> Vec<String> {
    (0..p).map(|i| format!("x{i}")).collect()
}

fn network(p: usize) -> impl Strategy<Value = BinaryNetwork> {
    proptest::collection::vec(any::<bool>(), p * (p - 1) / 2).prop_map(move |bits| {
        let mut g = BinaryNetwork::empty(names(p));
        let mut it = bits.into_iter();
        for a in 0..p {
            for b in a + 1..p {
                g.set_edge(a, b, it.next().unwrap());
            }
        }
        g
    })
}

proptest! {
    #[test]
    fn mclr_keeps_zero_pattern(row in composition_row()) {
        for mode in [ShiftMode::Robust, ShiftMode::Shifted] {
            let mut out = row.clone();
            mclr_row(&mut out, mode).unwrap();
            for (x, y) in row.iter().zip(&out) {
                if *x == 0.0 {
                    prop_assert_eq!(*y, 0.0);
                }
            }
        }
    }

    #[test]
    fn robust_mclr_rows_sum_to_zero(row in composition_row()) {
        let mut out = row.clone();
        mclr_row(&mut out, ShiftMode::Robust).unwrap();
        prop_assert!(out.iter().sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn shifted_mclr_minimum_is_one(row in composition_row()) {
        let mut out = row.clone();
        mclr_row(&mut out, ShiftMode::Shifted).unwrap();
        let nz: Vec<f64> = row.iter().zip(&out).filter(|(x, _)| **x > 0.0).map(|(_, y)| *y).collect();
        prop_assert_eq!(nz.iter().copied().fold(f64::INFINITY, f64::min), 1.0);
    }

    #[test]
    fn mclr_ignores_row_scale(row in composition_row(), c in 0.01f64..100.0) {
        let mut a = row.clone();
        let mut b: Vec<f64> = row.iter().map(|x| x * c).collect();
        mclr_row(&mut a, ShiftMode::Robust).unwrap();
        mclr_row(&mut b, ShiftMode::Robust).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn spearman_symmetric_and_rank_based(
        pairs in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40)
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let Ok(r) = spearman_rho(&a, &b) {
            prop_assert!((-1.0..=1.0).contains(&r));
            prop_assert_eq!(r, spearman_rho(&b, &a).unwrap());
            let warped: Vec<f64> = a.iter().map(|x| x.exp() + 3.0 * x).collect();
            prop_assert!((spearman_rho(&warped, &b).unwrap() - r).abs() < 1e-12);
        }
    }

    #[test]
    fn bh_is_bounded_and_monotone(p in proptest::collection::vec(0.0f64..=1.0, 1..60)) {
        let adj = bh_adjust(&p);
        for (raw, a) in p.iter().zip(&adj) {
            prop_assert!(a >= raw && *a <= 1.0);
        }
        for i in 0..p.len() {
            for j in 0..p.len() {
                if p[i] <= p[j] {
                    prop_assert!(adj[i] <= adj[j]);
                }
            }
        }
    }

    #[test]
    fn edges_grow_with_alpha(
        cells in proptest::collection::vec(0.0f64..1.0, 12 * 6),
        a1 in 0.0f64..1.0,
        a2 in 0.0f64..1.0,
    ) {
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let values = Array2::from_shape_vec((12, 6), cells).unwrap();
        let comp = CompositionMatrix { samples: names(12), taxa: names(6), values };
        let v = mclr(&comp, ShiftMode::Shifted).unwrap();
        let (g_lo, _) = build_cooccurrence(&v, lo).unwrap();
        let (g_hi, _) = build_cooccurrence(&v, hi).unwrap();
        for (a, b) in g_lo.edges() {
            prop_assert!(g_hi.has_edge(a, b));
        }
    }

    #[test]
    fn likelihood_is_label_permutation_equivariant(
        g in network(9),
        labels in proptest::collection::vec(0usize..3, 9),
        upper in proptest::collection::vec(0.01f64..0.99, 6),
        rot in 1usize..3,
    ) {
        let z = CommunityAssignment::new(labels.clone(), 3).unwrap();
        let omega = EdgeProbabilityMatrix::from_upper_triangle(3, &upper).unwrap();
        let perm: Vec<usize> = (0..3).map(|k| (k + rot) % 3).collect();
        let z2 = CommunityAssignment::new(labels.iter().map(|&l| perm[l]).collect(), 3).unwrap();
        let l1 = log_likelihood(&g, &z, &omega).unwrap();
        let l2 = log_likelihood(&g, &z2, &omega.permuted(&perm)).unwrap();
        prop_assert!((l1 - l2).abs() < 1e-9);

        let cfg = SamplerConfig::<f64>::new(3).with_f(1.5);
        prop_assert!((log_mrf_prior(&z, &g, &cfg) - log_mrf_prior(&z2, &g, &cfg)).abs() < 1e-9);
    }
}
