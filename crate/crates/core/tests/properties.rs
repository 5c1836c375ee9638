use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;
use proptest::prelude::*;
use tdmv::cleaning::shrink;
use tdmv::estimation::p_transform;
use tdmv::optimizer::{expected_return, global_minimum_strategy, strategy_risk, DriftVector, MeanVarianceProblem};
use tdmv::{AutoCovMatrix, Layer, Provenance};

type Q = Ratio<i64>;

fn int_matrix(n: usize) -> impl Strategy<Value = DMatrix<i64>> {
    prop::collection::vec(-20i64..=20, n * n).prop_map(move |v| {
        let m = DMatrix::from_vec(n, n, v);
        &m + m.transpose()
    })
}

fn rational(m: &DMatrix<i64>) -> DMatrix<Q> {
    m.map(Q::from_integer)
}

fn sampled_q(m: DMatrix<Q>) -> AutoCovMatrix<Q> {
    AutoCovMatrix::new(m, Layer::Increment, Provenance::Sampled).unwrap()
}

/// `B B' + shift I` from entries in [-1, 1].
fn spd(n: usize, shift: f64) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
        let b = DMatrix::from_vec(n, n, v);
        &b * b.transpose() + DMatrix::identity(n, n) * shift
    })
}

fn price(m: DMatrix<f64>) -> AutoCovMatrix<f64> {
    AutoCovMatrix::new(m, Layer::Price, Provenance::True).unwrap()
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().min()
}

fn sized<S: Strategy + 'static>(f: impl Fn(usize) -> S + 'static) -> impl Strategy<Value = (usize, S::Value)>
where
    S::Value: std::fmt::Debug,
{
    (3usize..12).prop_flat_map(move |n| (Just(n), f(n)))
}

/// Random unit direction orthogonal to every vector in `basis`.
fn orthogonal_direction(raw: &[f64], basis: &[DVector<f64>]) -> Option<DVector<f64>> {
    let mut d = DVector::from_column_slice(raw);
    let mut ortho: Vec<DVector<f64>> = Vec::new();
    for b in basis {
        let mut v = b.clone();
        for q in &ortho {
            v -= q * q.dot(&v);
        }
        ortho.push(v.normalize());
    }
    for q in &ortho {
        d -= q * q.dot(&d);
    }
    let norm = d.norm();
    (norm > 1e-6).then(|| d / norm)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn p_transform_is_exactly_linear((n, (a, b)) in sized(|n| (int_matrix(n), int_matrix(n)))) {
        let (qa, qb) = (rational(&a), rational(&b));
        let sum = p_transform(&sampled_q(&qa + &qb)).unwrap();
        let pa = p_transform(&sampled_q(qa)).unwrap();
        let pb = p_transform(&sampled_q(qb)).unwrap();
        prop_assert_eq!(sum.dim(), n);
        prop_assert_eq!(sum.entries(), &(pa.entries() + pb.entries()));
    }

    #[test]
    fn shrink_then_transform_is_exact_mixture(
        (_n, m) in sized(int_matrix),
        num in 0i64..=8,
    ) {
        let delta = Q::new(num, 8);
        let s = sampled_q(rational(&m));
        let diag = sampled_q(DMatrix::from_diagonal(&s.entries().diagonal()));
        let lhs = p_transform(&shrink(&s, delta).unwrap()).unwrap();
        let pd = p_transform(&diag).unwrap();
        let ps = p_transform(&s).unwrap();
        let rhs = pd.entries().map(|v| v * delta) + ps.entries().map(|v| v * (Q::from_integer(1) - delta));
        prop_assert_eq!(lhs.entries(), &rhs);
        prop_assert_eq!(lhs.provenance(), Provenance::Cleaned);
    }

    #[test]
    fn p_transform_preserves_psd((_n, m) in sized(|n| spd(n, 0.0))) {
        let y = AutoCovMatrix::new(m, Layer::Increment, Provenance::Sampled).unwrap();
        let x = p_transform(&y).unwrap();
        let scale = x.entries().amax().max(1.0);
        prop_assert!(min_eig(x.entries()) >= -1e-10 * scale);
    }

    #[test]
    fn shrinkage_keeps_diagonal_and_raises_min_eigenvalue(
        (_n, m) in sized(|n| spd(n, 0.0)),
        delta in 0.0f64..=1.0,
    ) {
        let s = AutoCovMatrix::new(m.clone(), Layer::Increment, Provenance::Sampled).unwrap();
        let c = shrink(&s, delta).unwrap();
        prop_assert_eq!(c.entries().diagonal(), m.diagonal());
        prop_assert_eq!(c.entries().transpose(), c.entries().clone());
        prop_assert!(min_eig(c.entries()) >= min_eig(&m) - 1e-12);
    }

    #[test]
    fn global_minimum_is_stationary_and_local_minimum(
        (n, (m, dirs)) in sized(|n| (spd(n, 0.5), prop::collection::vec(prop::collection::vec(-1.0f64..1.0, n), 100))),
    ) {
        let sigma = price(m.clone());
        let s = global_minimum_strategy(&sigma).unwrap();
        prop_assert!((s.total_weight() - 1.0).abs() < 1e-10);
        let g = &m * &s.weights;
        let mean = g.mean();
        prop_assert!((g.add_scalar(-mean)).amax() <= 1e-8 * mean.abs());
        let ones = DVector::from_element(n, 1.0);
        let v0 = sigma.quadratic_form(&s.weights).unwrap();
        for raw in &dirs {
            if let Some(d) = orthogonal_direction(raw, std::slice::from_ref(&ones)) {
                let moved = &s.weights + d * 1e-3;
                prop_assert!(sigma.quadratic_form(&moved).unwrap() > v0);
            }
        }
    }

    #[test]
    fn constrained_solution_satisfies_kkt(
        (n, (m, mu, dirs)) in sized(|n| (
            spd(n, 0.5),
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, n), 100),
        )),
        target in -1.0f64..1.0,
        x0 in -1.0f64..1.0,
    ) {
        let sigma = price(m.clone());
        let mu = DriftVector::new(DVector::from_vec(mu));
        let problem = match MeanVarianceProblem::new(&sigma, &mu) {
            Ok(p) => p,
            Err(_) => return Ok(()),
        };
        let s = problem.strategy(target, x0);
        prop_assert!((s.total_weight() - 1.0).abs() < 1e-10);
        prop_assert!((expected_return(&s.weights, &mu, x0) - target).abs() < 1e-10 * (1.0 + target.abs() + x0.abs()) * 10.0);

        let ones = DVector::from_element(n, 1.0);
        let g = &m * &s.weights;
        let basis = DMatrix::from_columns(&[ones.clone(), mu.mu.clone()]);
        let coef = (basis.transpose() * &basis).try_inverse().unwrap() * basis.transpose() * &g;
        let residual = &g - &basis * coef;
        prop_assert!(residual.norm() <= 1e-8 * g.norm().max(1.0));

        let risk = strategy_risk(&s, &sigma).unwrap();
        prop_assert!((risk - problem.risk(target, x0)).abs() <= 1e-10 * risk.max(1.0));

        let v0 = risk * risk;
        for raw in &dirs {
            if let Some(d) = orthogonal_direction(raw, &[ones.clone(), mu.mu.clone()]) {
                let moved = &s.weights + d * 1e-3;
                prop_assert!(sigma.quadratic_form(&moved).unwrap() > v0);
            }
        }
    }

    #[test]
    fn scaling_leaves_strategies_unchanged(
        (n, (m, mu)) in sized(|n| (spd(n, 0.5), prop::collection::vec(-1.0f64..1.0, n))),
        c in 0.1f64..10.0,
        target in -1.0f64..1.0,
    ) {
        let base = price(m.clone());
        let scaled = price(&m * c);
        let g1 = global_minimum_strategy(&base).unwrap();
        let g2 = global_minimum_strategy(&scaled).unwrap();
        prop_assert!((&g1.weights - &g2.weights).amax() <= 1e-12 * g1.weights.amax().max(1.0));
        let r1 = strategy_risk(&g1, &base).unwrap();
        let r2 = strategy_risk(&g2, &scaled).unwrap();
        prop_assert!((r2 - c.sqrt() * r1).abs() <= 1e-12 * r2.max(1.0));

        let mu = DriftVector::new(DVector::from_vec(mu));
        if let (Ok(p1), Ok(p2)) = (MeanVarianceProblem::new(&base, &mu), MeanVarianceProblem::new(&scaled, &mu)) {
            let (s1, s2) = (p1.strategy(target, 0.0), p2.strategy(target, 0.0));
            prop_assert!((&s1.weights - &s2.weights).amax() <= 1e-12 * s1.weights.amax().max(1.0));
            prop_assert!((p2.risk(target, 0.0) - c.sqrt() * p1.risk(target, 0.0)).abs() <= 1e-12 * p2.risk(target, 0.0).max(1.0));
        }
        let _ = n;
    }

    #[test]
    fn frontier_is_convex_and_bounded_below(
        (_n, (m, mu)) in sized(|n| (spd(n, 0.5), prop::collection::vec(-1.0f64..1.0, n))),
        start in -1.0f64..1.0,
        step in 0.01f64..1.0,
    ) {
        let sigma = price(m);
        let mu = DriftVector::new(DVector::from_vec(mu));
        let Ok(problem) = MeanVarianceProblem::new(&sigma, &mu) else { return Ok(()) };
        let risks: Vec<f64> = (0..3).map(|k| problem.risk(start + step * k as f64, 0.0)).collect();
        prop_assert!(risks[1] <= 0.5 * (risks[0] + risks[2]) + 1e-12);
        let gms_risk = strategy_risk(&problem.global_minimum(), &sigma).unwrap();
        for r in risks {
            prop_assert!(r >= gms_risk - 1e-10);
        }
    }
}
