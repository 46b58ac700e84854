use netslice_lp::{solve_lp, BackendKind, LinearProgram, LpStatus, Relation, Tolerances, WarmStart};
use proptest::prelude::*;

/// Boxed variables, `<=` rows whose right-hand side is met by `x = lower`,
/// so every generated program is feasible and bounded.
fn boxed_lp() -> impl Strategy<Value = LinearProgram> {
    (2usize..7, 1usize..6).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(-5.0f64..5.0, n),
            prop::collection::vec(prop::collection::vec(-3i32..4, n), m),
            prop::collection::vec(0.0f64..10.0, m),
        )
            .prop_map(move |(cost, rows, slack)| {
                let mut lp = LinearProgram::new();
                let vars: Vec<_> = (0..n).map(|j| lp.add_variable(format!("x{j}"), 0.0, 4.0)).collect();
                for (j, &c) in cost.iter().enumerate() {
                    lp.set_objective(vars[j], c);
                }
                for (i, row) in rows.iter().enumerate() {
                    let coeffs = row
                        .iter()
                        .enumerate()
                        .filter(|(_, &a)| a != 0)
                        .map(|(j, &a)| (vars[j], a as f64))
                        .collect();
                    lp.add_constraint(format!("r{i}"), coeffs, Relation::Le, slack[i]);
                }
                lp
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn optimal_points_are_feasible(lp in boxed_lp()) {
        let res = solve_lp(&lp, None, &Tolerances::default()).unwrap();
        prop_assert_eq!(res.status, LpStatus::Optimal);
        prop_assert!(lp.max_violation(&res.values) <= 1e-7);
        prop_assert!((lp.objective_value(&res.values) - res.objective).abs() <= 1e-7);
    }

    #[test]
    fn backends_agree(lp in boxed_lp()) {
        let tol = Tolerances::default();
        let a = BackendKind::Bundled.backend().solve(&lp, None, &tol).unwrap();
        let b = BackendKind::Microlp.backend().solve(&lp, None, &tol).unwrap();
        prop_assert_eq!(a.status, b.status);
        prop_assert!((a.objective - b.objective).abs() <= 1e-6 * a.objective.abs().max(1.0));
    }

    #[test]
    fn warm_start_keeps_the_optimum(lp in boxed_lp(), shift in -2.0f64..2.0) {
        let tol = Tolerances::default();
        let cold = solve_lp(&lp, None, &tol).unwrap();
        let mut changed = lp.clone();
        let first = changed.objective()[0];
        changed.set_objective(netslice_lp::VarId(0), first + shift);
        let warm = WarmStart::from_result(&cold);
        let a = solve_lp(&changed, Some(&warm), &tol).unwrap();
        let b = solve_lp(&changed, None, &tol).unwrap();
        prop_assert_eq!(a.status, b.status);
        prop_assert!((a.objective - b.objective).abs() <= 1e-7 * b.objective.abs().max(1.0));
    }
}
