use anchor_core::lp::{build_lp, plan, solve_lp, LpConfig, LpError, TvdMatrix};
use proptest::prelude::*;

/// Every expected TVD a computer can reach with fractions on a 0.001 grid.
fn grid_values(row: &[f64]) -> Vec<f64> {
    const STEPS: usize = 1000;
    let mut out = Vec::new();
    match row.len() {
        2 => {
            for a in 0..=STEPS {
                let f = a as f64 / STEPS as f64;
                out.push(f * row[0] + (1.0 - f) * row[1]);
            }
        }
        3 => {
            for a in 0..=STEPS {
                for b in 0..=STEPS - a {
                    let (fa, fb) = (a as f64 / STEPS as f64, b as f64 / STEPS as f64);
                    out.push(fa * row[0] + fb * row[1] + (1.0 - fa - fb) * row[2]);
                }
            }
        }
        _ => unreachable!("oracle covers m in {{2, 3}}"),
    }
    out
}

/// Grid search over the first computer's fractions. The second computer can
/// reach any expected TVD between its row's min and max, so for each grid
/// point its cheapest feasible partner is exact.
fn grid_oracle(t: &[Vec<f64>], eps: f64) -> Option<f64> {
    let lo = t[1].iter().copied().fold(f64::MAX, f64::min);
    let hi = t[1].iter().copied().fold(f64::MIN, f64::max);
    grid_values(&t[0])
        .into_iter()
        .filter_map(|a| {
            let b = lo.max(a / (1.0 + eps));
            (b <= hi.min((1.0 + eps) * a) + 1e-12).then_some(a + b)
        })
        .min_by(f64::total_cmp)
}

fn check_constraints(t: &TvdMatrix, eps: f64, x: &[f64]) {
    let p = build_lp(t, &LpConfig { epsilon: eps, target_computer: 0 }).unwrap();
    for v in x {
        assert!(*v >= -1e-9 && *v <= 1.0 + 1e-9, "bound violated: {v}");
    }
    for (row, b) in p.a_eq.iter().zip(&p.b_eq) {
        let lhs: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
        assert!((lhs - b).abs() <= 1e-9, "equality violated: {lhs} != {b}");
    }
    for (row, b) in p.a_ub.iter().zip(&p.b_ub) {
        let lhs: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
        assert!(lhs <= b + 1e-9, "inequality violated: {lhs} > {b}");
    }
}

fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, f64)> {
    (2usize..=3)
        .prop_flat_map(|m| prop::collection::vec(prop::collection::vec(0.01f64..1.0, m), 2))
        .prop_flat_map(|t| (Just(t), prop::sample::select(vec![0.0, 0.1, 0.5])))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simplex_matches_grid_search((values, eps) in instance()) {
        let t = TvdMatrix::new(values.clone());
        let p = build_lp(&t, &LpConfig { epsilon: eps, target_computer: 0 }).unwrap();
        match (solve_lp(&p), grid_oracle(&values, eps)) {
            (Ok(s), Some(g)) => {
                prop_assert!((s.objective - g).abs() <= 2e-3, "simplex {} grid {}", s.objective, g);
                check_constraints(&t, eps, &s.x);
            }
            (Err(LpError::Infeasible), None) => {}
            (s, g) => prop_assert!(false, "solver {:?} vs oracle {:?}", s, g),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn scaling_keeps_the_optimum(
        values in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 4), 3),
        scale in 0.1f64..50.0,
    ) {
        let cfg = LpConfig { epsilon: 0.3, target_computer: 0 };
        let base = TvdMatrix::new(values.clone());
        let scaled = TvdMatrix::new(values.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect());
        let (a, b) = (
            solve_lp(&build_lp(&base, &cfg).unwrap()),
            solve_lp(&build_lp(&scaled, &cfg).unwrap()),
        );
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert!((b.objective - scale * a.objective).abs() <= 1e-9 * scale.max(1.0));
                // the scaled optimum is optimal for the original program too
                let p = build_lp(&base, &cfg).unwrap();
                let cost: f64 = p.c.iter().zip(&b.x).map(|(c, x)| c * x).sum();
                prop_assert!((cost - a.objective).abs() <= 1e-9);
                check_constraints(&base, 0.3, &b.x);
            }
            (Err(LpError::Infeasible), Err(LpError::Infeasible)) => {}
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn looser_epsilon_never_costs_more(
        values in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 2..=4),
        eps in 0.0f64..0.5,
        extra in 0.0f64..0.5,
    ) {
        let t = TvdMatrix::new(values);
        let tight = solve_lp(&build_lp(&t, &LpConfig { epsilon: eps, target_computer: 0 }).unwrap());
        let loose = solve_lp(&build_lp(&t, &LpConfig { epsilon: eps + extra, target_computer: 0 }).unwrap());
        match (tight, loose) {
            (Ok(a), Ok(b)) => prop_assert!(b.objective <= a.objective + 1e-9),
            (Err(LpError::Infeasible), _) => {}
            (Ok(_), Err(e)) => prop_assert!(false, "looser program failed: {e}"),
            (Err(e), _) => prop_assert!(false, "unexpected error: {e}"),
        }
    }

    #[test]
    fn plans_respect_the_epsilon_they_report(
        values in prop::collection::vec(prop::collection::vec(0.5f64..60.0, 6), 2..=5),
        eps in 0.0f64..0.3,
        total in 1u64..100_000,
    ) {
        let t = TvdMatrix::new(values);
        if let Ok(p) = plan(&t, &LpConfig { epsilon: eps, target_computer: 0 }, total) {
            prop_assert_eq!(p.shots.iter().sum::<u64>(), total);
            let e = p.epsilon_used;
            for &a in &p.equalized_tvd {
                for &b in &p.equalized_tvd {
                    prop_assert!(a <= (1.0 + e) * b * (1.0 + 1e-9) + 1e-9);
                }
            }
            for row in &p.fractions {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
        }
    }
}
