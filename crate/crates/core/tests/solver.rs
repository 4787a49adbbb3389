use mmtpd::fixtures;
use mmtpd::nls::{reduced_jacobian_cs, reduced_residual_cs};
use mmtpd::{
    al_solve, build_mmt, expand, jacobian, lm_minimize, residual, starting_point, AlState, GenCsLayout, NlsProblem,
    Shape, SolverConfig, Status, StructuredPoint,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_point(layout: GenCsLayout, seed: u64) -> StructuredPoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..layout.n_vars()).map(|_| rng.random_range(-1.0..1.0)).collect();
    StructuredPoint::new(layout, x).unwrap()
}

fn layout(m: usize, p: usize, n: usize, r: usize, s: usize, t: usize) -> GenCsLayout {
    GenCsLayout::new(Shape::new(m, p, n).unwrap(), r, s, t).unwrap()
}

/// Layouts with empty and nonempty border blocks.
fn sample_layouts() -> Vec<GenCsLayout> {
    vec![
        layout(2, 2, 2, 7, 4, 1),
        layout(2, 2, 2, 7, 1, 2),
        layout(2, 2, 2, 7, 0, 0),
        layout(2, 2, 3, 11, 2, 2),
        layout(2, 2, 3, 11, 0, 3),
        layout(2, 3, 4, 20, 3, 1),
        layout(1, 2, 3, 6, 1, 1),
        layout(3, 3, 3, 23, 11, 0),
    ]
}

/// Residual computed straight from the definition.
fn brute_residual(point: &StructuredPoint) -> Vec<f64> {
    let f = expand(point);
    let Shape { m, p, n } = f.shape();
    let t = build_mmt(m, p, n).unwrap();
    let [da, db, dc] = f.shape().tensor_dims();
    let mut out = Vec::with_capacity(da * db * dc);
    for c in 0..dc {
        for b in 0..db {
            for a in 0..da {
                let model: f64 = (0..f.rank()).map(|l| f.u()[(a, l)] * f.v()[(b, l)] * f.w()[(c, l)]).sum();
                out.push(model - t.entries().get(a, b, c));
            }
        }
    }
    out
}

#[test]
fn residual_matches_definition() {
    for (i, l) in sample_layouts().into_iter().enumerate() {
        let point = random_point(l, i as u64);
        let tensor = build_mmt(l.shape().m, l.shape().p, l.shape().n).unwrap();
        let res = residual(&point, &tensor).unwrap();
        let oracle = brute_residual(&point);
        let err = res.value.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{l:?}: {err:e}");
        let cost: f64 = 0.5 * oracle.iter().map(|v| v * v).sum::<f64>();
        assert!((res.cost - cost).abs() <= 1e-12 * cost.max(1.0));
    }
}

#[test]
fn jacobian_matches_central_differences() {
    let h = 1e-6;
    for (i, l) in sample_layouts().into_iter().enumerate() {
        let point = random_point(l, 100 + i as u64);
        let tensor = build_mmt(l.shape().m, l.shape().p, l.shape().n).unwrap();
        let jac = jacobian(&point, &tensor).unwrap();
        let mut fd = DMatrix::zeros(jac.nrows(), jac.ncols());
        for j in 0..l.n_vars() {
            let mut plus = point.x().to_vec();
            let mut minus = point.x().to_vec();
            plus[j] += h;
            minus[j] -= h;
            let rp = residual(&StructuredPoint::new(l, plus).unwrap(), &tensor).unwrap().value;
            let rm = residual(&StructuredPoint::new(l, minus).unwrap(), &tensor).unwrap().value;
            for (row, (a, b)) in rp.iter().zip(&rm).enumerate() {
                fd[(row, j)] = (a - b) / (2.0 * h);
            }
        }
        let rel = (&jac - &fd).norm() / jac.norm().max(1.0);
        assert!(rel < 1e-7, "{l:?}: relative error {rel:e}");
    }
}

#[test]
fn normal_equations_match_explicit_products() {
    for (i, l) in sample_layouts().into_iter().enumerate() {
        let point = random_point(l, 200 + i as u64);
        let tensor = build_mmt(l.shape().m, l.shape().p, l.shape().n).unwrap();
        let problem = NlsProblem::new(&tensor, &l).unwrap();
        let (h, g, cost) = problem.normal_equations(point.x());
        let jac = problem.jacobian(point.x());
        let r = DVector::from_vec(problem.residual(point.x()).value);
        let h_ref = jac.transpose() * &jac;
        let g_ref = jac.transpose() * r;
        assert!((&h - &h_ref).norm() <= 1e-10 * h_ref.norm().max(1.0), "{l:?}");
        assert!((DVector::from_vec(g.clone()) - &g_ref).norm() <= 1e-10 * g_ref.norm().max(1.0));
        assert!((cost - problem.cost(point.x())).abs() <= 1e-12 * cost.max(1.0));
        let (g2, c2) = problem.gradient(point.x());
        assert_eq!(g2.len(), l.n_vars());
        assert!((DVector::from_vec(g2) - g_ref).norm() <= 1e-10 * g.iter().map(|v| v.abs()).sum::<f64>().max(1.0));
        assert_eq!(c2, cost);
    }
}

#[test]
fn reduced_residual_sees_every_orbit() {
    let (_, strassen_cs) = fixtures::strassen_cs();
    let tensor = build_mmt(2, 2, 2).unwrap();
    for (i, l) in [strassen_cs, layout(2, 2, 2, 7, 1, 2), layout(3, 3, 3, 23, 11, 4)].into_iter().enumerate() {
        let point = random_point(l, 300 + i as u64);
        let tensor = if l.shape().m == 2 { tensor.clone() } else { build_mmt(3, 3, 3).unwrap() };
        let full = residual(&point, &tensor).unwrap();
        let reduced = reduced_residual_cs(&point, &tensor).unwrap();
        let d = l.shape().m.pow(2);
        assert_eq!(reduced.value.len(), (d * d * d - d) / 3 + d);
        // Every full entry equals the entry of its orbit representative.
        let mut covered = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let v = full.value[i + d * (j + d * k)];
                    let rot = full.value[j + d * (k + d * i)];
                    assert!((v - rot).abs() < 1e-12);
                    covered += v * v;
                }
            }
        }
        let diag: f64 = (0..d).map(|i| full.value[i * (1 + d + d * d)].powi(2)).sum();
        let reduced_sq = 2.0 * reduced.cost;
        assert!((3.0 * reduced_sq - 2.0 * diag - covered).abs() < 1e-9 * covered.max(1.0));
        let rj = reduced_jacobian_cs(&point, &tensor).unwrap();
        assert_eq!(rj.shape(), (reduced.value.len(), l.n_vars()));
    }
    assert!(reduced_residual_cs(&random_point(layout(2, 2, 2, 7, 4, 0), 1), &tensor).is_err());
}

#[test]
fn lm_stays_at_exact_fixtures() {
    for (name, point) in fixtures::structured() {
        let s = point.layout().shape();
        let tensor = build_mmt(s.m, s.p, s.n).unwrap();
        let out =
            lm_minimize(&point, &tensor, &AlState::inactive(point.x().len()), &SolverConfig::unconstrained()).unwrap();
        assert_eq!(out.status, Status::Exact, "{name}");
        assert_eq!(out.point.x(), point.x(), "{name}");
    }
}

#[test]
fn lm_recovers_from_small_noise() {
    let point = fixtures::t222_r7_cs41();
    let tensor = build_mmt(2, 2, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noisy: Vec<f64> = point.x().iter().map(|v| v + 1e-3 * rng.random_range(-1.0..1.0)).collect();
    let start = StructuredPoint::new(*point.layout(), noisy).unwrap();
    let out =
        lm_minimize(&start, &tensor, &AlState::inactive(start.x().len()), &SolverConfig::unconstrained()).unwrap();
    assert!(out.cost() < 1e-20, "cost {:e}", out.cost());
}

#[test]
fn accepted_steps_decrease_the_stacked_cost() {
    let l = layout(2, 2, 3, 11, 2, 2);
    let tensor = build_mmt(2, 2, 3).unwrap();
    let out = al_solve(&tensor, &l, &SolverConfig::default(), 3).unwrap();
    let mut last: Option<(f64, f64)> = None;
    for e in &out.history {
        if let Some((beta, cost)) = last {
            if e.accepted && e.beta == beta {
                assert!(e.stacked_cost < cost, "iteration {}", e.iteration);
            }
        }
        if e.accepted || last.is_none_or(|(b, _)| b != e.beta) {
            last = Some((e.beta, e.stacked_cost));
        }
    }
    assert_eq!(out.accepted, out.history.iter().filter(|e| e.accepted).count());
}

#[test]
fn searches_are_deterministic() {
    let l = layout(2, 2, 2, 7, 4, 1);
    let tensor = build_mmt(2, 2, 2).unwrap();
    let config = SolverConfig::default();
    let a = al_solve(&tensor, &l, &config, 11).unwrap();
    let b = al_solve(&tensor, &l, &config, 11).unwrap();
    assert_eq!(a.point, b.point);
    assert_eq!(a.history, b.history);
    let c = al_solve(&tensor, &l, &config, 12).unwrap();
    assert_ne!(a.point, c.point);
    assert_eq!(starting_point(&l, 1e-2, 11), starting_point(&l, 1e-2, 11));
}

#[test]
fn strassen_rank_is_found() {
    let tensor = build_mmt(2, 2, 2).unwrap();
    let l = layout(2, 2, 2, 7, 0, 0);
    let exact =
        (0..5).filter(|&seed| al_solve(&tensor, &l, &SolverConfig::default(), seed).unwrap().is_exact()).count();
    assert!(exact >= 1);
}

#[test]
fn rank_six_is_never_exact() {
    let tensor = build_mmt(2, 2, 2).unwrap();
    let l = layout(2, 2, 2, 6, 0, 0);
    let config = SolverConfig { max_outer: 4, ..Default::default() };
    let out = al_solve(&tensor, &l, &config, 0).unwrap();
    assert_ne!(out.status, Status::Exact);
    assert!(out.cost() > 1e-6);
}

#[test]
fn history_csv_has_one_line_per_iteration() {
    let tensor = build_mmt(2, 2, 2).unwrap();
    let out = al_solve(&tensor, &layout(2, 2, 2, 7, 4, 1), &SolverConfig::default(), 0).unwrap();
    let mut buf = Vec::new();
    out.write_history_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), out.history.len() + 1);
}
