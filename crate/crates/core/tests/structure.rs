use mmtpd::{build_mmt, contract, enumerate_st, expand, naive_pd, reconstruct, GenCsLayout, Shape, StructuredPoint};
use proptest::prelude::*;

/// Sorted shapes with `mpn ≤ 27` and a rank with at least one structured column.
fn layout_strategy() -> impl Strategy<Value = GenCsLayout> {
    (1usize..=3, 0usize..=2, 0usize..=2, 1usize..=9)
        .prop_filter_map("sorted shape within size", |(m, dp, dn, r)| {
            let (p, n) = (m + dp, m + dp + dn);
            (m * p * n <= 27).then_some((m, p, n, r))
        })
        .prop_flat_map(|(m, p, n, r)| {
            let pairs = enumerate_st(r);
            (Just((m, p, n, r)), 0..pairs.len(), Just(pairs))
        })
        .prop_map(|((m, p, n, r), i, pairs)| {
            let (s, t) = pairs[i];
            GenCsLayout::new(Shape::new(m, p, n).unwrap(), r, s, t).unwrap()
        })
}

fn point_strategy() -> impl Strategy<Value = StructuredPoint> {
    layout_strategy().prop_flat_map(|l| {
        prop::collection::vec(-3.0f64..3.0, l.n_vars()).prop_map(move |x| StructuredPoint::new(l, x).unwrap())
    })
}

/// Entry `(i1 + i2 m, j1 + j2 p, k1 + k2 n)` is one iff `i2 = j1`, `j2 = k1`
/// and `k2 = i1`.
fn mmt_oracle(m: usize, p: usize, n: usize, a: usize, b: usize, c: usize) -> f64 {
    let (i1, i2) = (a % m, a / m);
    let (j1, j2) = (b % p, b / p);
    let (k1, k2) = (c % n, c / n);
    f64::from(u8::from(i2 == j1 && j2 == k1 && k2 == i1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mmt_matches_index_rule(m in 1usize..=4, p in 1usize..=4, n in 1usize..=4) {
        let t = build_mmt(m, p, n).unwrap();
        let e = t.entries();
        prop_assert_eq!(e.dims(), [m * p, p * n, n * m]);
        prop_assert_eq!(e.nonzero_count(), m * p * n);
        for a in 0..m * p {
            for b in 0..p * n {
                for c in 0..n * m {
                    prop_assert_eq!(e.get(a, b, c), mmt_oracle(m, p, n, a, b, c));
                }
            }
        }
    }

    #[test]
    fn mmt_cyclic_symmetry_for_square(m in 1usize..=4) {
        let t = build_mmt(m, m, m).unwrap();
        let e = t.entries();
        let d = m * m;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    prop_assert_eq!(e.get(i, j, k), e.get(j, k, i));
                }
            }
        }
    }

    #[test]
    fn naive_pd_reconstructs(m in 1usize..=4, p in 1usize..=4, n in 1usize..=4) {
        let shape = Shape::new(m, p, n).unwrap();
        let f = naive_pd(shape).unwrap();
        prop_assert_eq!(f.rank(), m * p * n);
        prop_assert_eq!(reconstruct(&f).distance(build_mmt(m, p, n).unwrap().entries()), 0.0);
    }

    #[test]
    fn contract_inverts_expand(point in point_strategy()) {
        let back = contract(&expand(&point), point.layout(), 0.0).unwrap();
        prop_assert_eq!(back, point);
    }

    #[test]
    fn expand_is_linear(point in point_strategy(), alpha in -2.0f64..2.0, seed in any::<u64>()) {
        let l = *point.layout();
        let other: Vec<f64> = (0..l.n_vars())
            .map(|i| ((seed.wrapping_add(i as u64) % 97) as f64) / 13.0 - 3.0)
            .collect();
        let combined: Vec<f64> = point.x().iter().zip(&other).map(|(a, b)| alpha * a + b).collect();
        let lhs = expand(&StructuredPoint::new(l, combined).unwrap()).stacked();
        let fx = expand(&point).stacked();
        let fy = expand(&StructuredPoint::new(l, other).unwrap()).stacked();
        for ((a, b), c) in lhs.iter().zip(&fx).zip(&fy) {
            prop_assert!((a - (alpha * b + c)).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn structure_map_agrees_with_expand(point in point_strategy()) {
        let l = *point.layout();
        let map = l.structure_map();
        prop_assert_eq!(map.n_vars(), l.n_vars());
        prop_assert_eq!(map.full_len(), l.full_len());
        let stacked = expand(&point).stacked();
        prop_assert_eq!(&map.apply(point.x()), &stacked);
        let via_dense = map.to_dense() * nalgebra::DVector::from_column_slice(point.x());
        prop_assert_eq!(via_dense.as_slice(), stacked.as_slice());
    }

    #[test]
    fn column_sums_count_ties(l in layout_strategy()) {
        let m2 = l.shape().m * l.shape().m;
        let sums = l.structure_map().column_sums();
        let shared = m2 * l.r_cs();
        prop_assert!(sums[..shared].iter().all(|&c| c == 3));
        prop_assert!(sums[shared..].iter().all(|&c| c == 1));
        prop_assert_eq!(sums.iter().sum::<usize>(), l.full_len());
        prop_assert_eq!(l.n_vars() + 2 * shared, l.full_len());
    }

    #[test]
    fn full_cs_columns_are_cyclic(m in 1usize..=3, s in 0usize..=3, t in 0usize..=2, seed in any::<u64>()) {
        prop_assume!(s + 3 * t > 0);
        let l = GenCsLayout::new(Shape::new(m, m, m).unwrap(), s + 3 * t, s, t).unwrap();
        let x: Vec<f64> = (0..l.n_vars()).map(|i| ((seed >> (i % 60)) & 7) as f64 - 3.5).collect();
        let f = expand(&StructuredPoint::new(l, x).unwrap());
        let t3 = reconstruct(&f);
        let d = m * m;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    prop_assert_eq!(t3.get(i, j, k), t3.get(j, k, i));
                }
            }
        }
    }
}

#[test]
fn enumerate_st_order_and_count() {
    let pairs = enumerate_st(11);
    assert_eq!(pairs.len(), 30);
    assert_eq!(&pairs[..4], &[(2, 3), (5, 2), (8, 1), (11, 0)]);
    assert_eq!(pairs.last(), Some(&(0, 0)));
    for w in pairs.windows(2) {
        let rcs = |(s, t): (usize, usize)| s + 3 * t;
        assert!(rcs(w[0]) > rcs(w[1]) || (rcs(w[0]) == rcs(w[1]) && w[0].0 < w[1].0));
    }
}

#[test]
fn unsorted_shapes_reject_structure() {
    let shape = Shape::new(3, 2, 2).unwrap();
    assert!(GenCsLayout::new(shape, 11, 2, 0).is_err());
    assert!(GenCsLayout::unstructured(shape, 11).is_ok());
}

#[test]
fn contract_reports_broken_tie() {
    let l = GenCsLayout::new(Shape::new(2, 2, 2).unwrap(), 7, 4, 1).unwrap();
    let x: Vec<f64> = (0..l.n_vars()).map(|i| i as f64).collect();
    let f = expand(&StructuredPoint::new(l, x).unwrap());
    let (shape, mut u, v, w) = f.into_parts();
    u[(0, 0)] += 0.5;
    let broken = mmtpd::FactorTriple::new(shape, u, v, w).unwrap();
    assert!(matches!(contract(&broken, &l, 1e-12), Err(mmtpd::Error::StructureViolation { .. })));
}
