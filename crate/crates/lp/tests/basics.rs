use netslice_lp::{
    solve_lp, BundledSimplex, LinearProgram, LpBackend, LpError, LpStatus, MicrolpBackend, Relation, Tolerances, VarId,
};

#[test]
fn single_bounded_variable() {
    let mut lp = LinearProgram::new();
    let x = lp.add_variable("x", 0.0, 10.0);
    lp.set_objective(x, 1.0);
    lp.add_constraint("lb", vec![(x, 1.0)], Relation::Ge, 1.0);
    let res = solve_lp(&lp, None, &Tolerances::default()).unwrap();
    assert_eq!(res.status, LpStatus::Optimal);
    assert!((res.values[0] - 1.0).abs() < 1e-12);
    assert!((res.objective - 1.0).abs() < 1e-12);
}

#[test]
fn contradictory_rows_are_infeasible() {
    let mut lp = LinearProgram::new();
    let x = lp.add_variable("x", 0.0, f64::INFINITY);
    lp.add_constraint("a", vec![(x, 1.0)], Relation::Le, 0.0);
    lp.add_constraint("b", vec![(x, 1.0)], Relation::Ge, 1.0);
    let res = solve_lp(&lp, None, &Tolerances::default()).unwrap();
    assert_eq!(res.status, LpStatus::Infeasible);
}

#[test]
fn open_above_is_unbounded() {
    let mut lp = LinearProgram::new();
    let x = lp.add_variable("x", 0.0, f64::INFINITY);
    lp.set_objective(x, -1.0);
    let res = solve_lp(&lp, None, &Tolerances::default()).unwrap();
    assert_eq!(res.status, LpStatus::Unbounded);
}

#[test]
fn malformed_programs_are_rejected() {
    let mut lp = LinearProgram::new();
    lp.add_variable("x", 1.0, 0.0);
    assert!(matches!(
        solve_lp(&lp, None, &Tolerances::default()),
        Err(LpError::InvalidBounds { .. })
    ));
    let mut lp = LinearProgram::new();
    lp.add_variable("x", 0.0, 1.0);
    lp.add_constraint("bad", vec![(VarId(3), 1.0)], Relation::Le, 1.0);
    assert!(matches!(
        solve_lp(&lp, None, &Tolerances::default()),
        Err(LpError::UnknownVariable { .. })
    ));
}

#[test]
fn iteration_limit_is_reported() {
    let mut lp = LinearProgram::new();
    let vars: Vec<VarId> = (0..6).map(|j| lp.add_variable(format!("x{j}"), 0.0, 5.0)).collect();
    for (j, &v) in vars.iter().enumerate() {
        lp.set_objective(v, -(j as f64) - 1.0);
    }
    lp.add_constraint("cap", vars.iter().map(|&v| (v, 1.0)).collect(), Relation::Le, 7.0);
    let tol = Tolerances {
        iteration_limit: Some(1),
        ..Tolerances::default()
    };
    let res = solve_lp(&lp, None, &tol).unwrap();
    assert_eq!(res.status, LpStatus::IterationLimit);
}

#[test]
fn backends_agree_on_a_transport_problem() {
    // 2 supplies, 3 demands.
    let supply = [5.0, 7.0];
    let demand = [3.0, 4.0, 5.0];
    let cost = [[2.0, 3.0, 1.0], [5.0, 4.0, 8.0]];
    let mut lp = LinearProgram::new();
    let mut x = [[VarId(0); 3]; 2];
    for i in 0..2 {
        for j in 0..3 {
            x[i][j] = lp.add_variable(format!("x{i}{j}"), 0.0, f64::INFINITY);
            lp.set_objective(x[i][j], cost[i][j]);
        }
    }
    for i in 0..2 {
        lp.add_constraint(
            format!("s{i}"),
            (0..3).map(|j| (x[i][j], 1.0)).collect(),
            Relation::Le,
            supply[i],
        );
    }
    for j in 0..3 {
        lp.add_constraint(
            format!("d{j}"),
            (0..2).map(|i| (x[i][j], 1.0)).collect(),
            Relation::Eq,
            demand[j],
        );
    }
    let tol = Tolerances::default();
    let a = BundledSimplex.solve(&lp, None, &tol).unwrap();
    let b = MicrolpBackend.solve(&lp, None, &tol).unwrap();
    assert_eq!(a.status, LpStatus::Optimal);
    assert_eq!(b.status, LpStatus::Optimal);
    // x02 = 5, x10 = 3, x11 = 4: 5 + 15 + 16
    assert!((a.objective - 36.0).abs() < 1e-9);
    assert!((b.objective - 36.0).abs() < 1e-7);
}
