use std::path::PathBuf;

use mmtpd::fixtures;
use mmtpd::{
    apply_base_algorithm, apply_transform, build_mmt, expand, jacobian_rank, recursive_cs_pd, recursive_pd, verify_pd,
    FactorTriple, InvTransform, PdRecord, Shape, Verdict,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use serde_json::Map;

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn verdict(f: &FactorTriple) -> Verdict {
    let s = f.shape();
    verify_pd(f, &build_mmt(s.m, s.p, s.n).unwrap(), 1e-9).unwrap()
}

#[test]
fn shipped_files_match_fixtures() {
    let (strassen_cs, l) = fixtures::strassen_cs();
    let mut expected = vec![
        ("strassen".to_string(), fixtures::strassen(), None),
        ("strassen_cs".to_string(), strassen_cs, Some((l.s(), l.t()))),
    ];
    for (name, p) in fixtures::structured() {
        let l = *p.layout();
        expected.push((name.to_string(), expand(&p), Some((l.s(), l.t()))));
    }
    for (name, factors, structure) in expected {
        let rec = PdRecord::read(fixture_dir().join(format!("{name}.json"))).unwrap();
        assert_eq!(rec.factors, factors, "{name}");
        assert_eq!(rec.structure, structure, "{name}");
        assert!(rec.practical && rec.residual_norm == 0.0, "{name}");
        rec.check_structure().unwrap();
    }
}

#[test]
fn record_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    for (name, f) in fixtures::all_factors() {
        let mut prov = Map::new();
        prov.insert("name".into(), name.into());
        let rec = PdRecord::new(f, None, prov).unwrap();
        let path = dir.path().join(format!("{name}.json"));
        rec.write(&path).unwrap();
        assert_eq!(PdRecord::read(&path).unwrap(), rec);
    }
}

#[test]
fn float_entries_survive_round_trip() {
    let mut f = fixtures::strassen();
    let tf = InvTransform::Scaling { alpha: vec![0.1, 3.0, -0.7, 1.0, 2.5, 1.0, 1.0 / 3.0], beta: vec![1.0; 7] };
    f = apply_transform(&f, &tf).unwrap();
    let rec = PdRecord::new(f, None, Map::new()).unwrap();
    assert!(!rec.practical);
    let back = PdRecord::from_json_str(&rec.to_json_string()).unwrap();
    assert_eq!(back.factors, rec.factors);
}

#[test]
fn bad_structure_is_rejected() {
    let text = std::fs::read_to_string(fixture_dir().join("t223_r11_s2_t2.json")).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value["s"] = 5.into();
    value["t"] = 1.into();
    let rec = PdRecord::from_json(&value).unwrap();
    assert!(rec.check_structure().is_err());
    value["t"] = (-1).into();
    assert!(PdRecord::from_json(&value).is_err());
}

fn invertible(dim: usize, seed: u64) -> DMatrix<f64> {
    // Unit lower times unit upper triangular with small integer entries.
    let mut lcg = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        lcg = lcg.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((lcg >> 33) % 5) as f64 - 2.0
    };
    let lower = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            1.0
        } else if i > j {
            next()
        } else {
            0.0
        }
    });
    let upper = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            1.0
        } else if i < j {
            next()
        } else {
            0.0
        }
    });
    lower * upper
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pqr_transforms_keep_exactness(idx in 0usize..9, seed in any::<u64>()) {
        let all = fixtures::all_factors();
        let (_, f) = &all[idx % all.len()];
        let Shape { m, p, n } = f.shape();
        let tf = InvTransform::Pqr { p: invertible(m, seed), q: invertible(p, seed ^ 1), r: invertible(n, seed ^ 2) };
        let g = apply_transform(f, &tf).unwrap();
        prop_assert!(verdict(&g).is_exact());
    }

    #[test]
    fn scaling_and_permutation_keep_exactness(seed in any::<u64>()) {
        let f = expand(&fixtures::t223_r11());
        let r = f.rank();
        let alpha: Vec<f64> = (0..r).map(|i| 0.5 + ((seed >> i) & 3) as f64).collect();
        let beta: Vec<f64> = (0..r).map(|i| -1.0 - ((seed >> (i + 7)) & 1) as f64).collect();
        let mut perm: Vec<usize> = (0..r).collect();
        perm.rotate_left((seed % r as u64) as usize);
        let g = apply_transform(&f, &InvTransform::Scaling { alpha, beta }).unwrap();
        let g = apply_transform(&g, &InvTransform::ColumnPermutation(perm)).unwrap();
        prop_assert!(verdict(&g).is_exact());
    }
}

#[test]
fn square_only_transforms() {
    let f = expand(&fixtures::t333_r23());
    for tf in [InvTransform::Transpose, InvTransform::CyclicShift] {
        assert_eq!(verdict(&apply_transform(&f, &tf).unwrap()), Verdict::ExactInteger);
    }
    let rect = expand(&fixtures::t223_r11());
    assert!(apply_transform(&rect, &InvTransform::Transpose).is_err());
    let singular =
        InvTransform::Pqr { p: DMatrix::zeros(2, 2), q: DMatrix::identity(2, 2), r: DMatrix::identity(3, 3) };
    assert!(apply_transform(&rect, &singular).is_err());
}

#[test]
fn recursion_squares_the_shape() {
    let big = recursive_pd(&fixtures::strassen()).unwrap();
    assert_eq!(big.shape(), Shape::new(4, 4, 4).unwrap());
    assert_eq!(big.rank(), 49);
    assert_eq!(verdict(&big), Verdict::ExactInteger);

    let naive = recursive_pd(&fixtures::naive_222()).unwrap();
    assert_eq!(naive.rank(), 64);
    assert_eq!(verdict(&naive), Verdict::ExactInteger);
}

#[test]
fn cyclic_recursion_keeps_structure() {
    for (f, l, want) in [
        {
            let (f, l) = fixtures::strassen_cs();
            (f, l, (1, 16))
        },
        {
            let p = fixtures::t222_r7_cs41();
            (expand(&p), *p.layout(), (16, 11))
        },
    ] {
        let (g, l2) = recursive_cs_pd(&f, &l).unwrap();
        assert_eq!((l2.s(), l2.t()), want);
        assert_eq!(l2.r(), 49);
        assert_eq!(verdict(&g), Verdict::ExactInteger);
        mmtpd::contract(&g, &l2, 0.0).unwrap();
    }
}

#[test]
fn exact_points_have_deficient_jacobians() {
    for (name, p) in fixtures::structured() {
        let s = p.layout().shape();
        let t = build_mmt(s.m, s.p, s.n).unwrap();
        let report = jacobian_rank(&p, &t, 1e-8).unwrap();
        assert!(report.rank < report.cols, "{name}: rank {} of {}", report.rank, report.cols);
    }
    let strassen = fixtures::strassen();
    let l = mmtpd::GenCsLayout::unstructured(strassen.shape(), 7).unwrap();
    let point = mmtpd::contract(&strassen, &l, 0.0).unwrap();
    let report = jacobian_rank(&point, &build_mmt(2, 2, 2).unwrap(), 1e-8).unwrap();
    // Two scaling directions per rank-one term are invisible to the residual.
    assert!(report.rank <= l.n_vars() - 2 * 7);
}

#[test]
fn base_algorithm_multiplies() {
    let a = DMatrix::from_fn(2, 2, |i, j| (3 * i + j) as f64 - 1.0);
    let b = DMatrix::from_fn(2, 3, |i, j| (i as f64) - 2.0 * j as f64);
    let f = expand(&fixtures::t223_r11());
    let c = apply_base_algorithm(&f, &a, &b).unwrap();
    assert_eq!(c, (&a * &b).transpose());
}
