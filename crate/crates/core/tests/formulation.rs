use netslice::formulation::{
    build_psum_subproblem, build_relaxation, build_routing_repair, default_tau, theorem2_bounds, FormulationError,
    RowKind, Var,
};
use netslice::generate::{gen_random, gen_tightness, RandomParams, TightnessCase};
use netslice::heuristics::hops_from;
use netslice::oracle::{brute_force_optimum, OracleConfig};
use netslice::penalty::PenaltyParams;
use netslice::{FractionalPlacement, InstanceBuilder, Placement, ProblemInstance};
use netslice_lp::{solve_lp, LpStatus, Relation, Tolerances};
use proptest::prelude::*;

fn lp_value(model: &netslice::formulation::Model) -> (LpStatus, f64) {
    let res = solve_lp(&model.lp, None, &Tolerances::default()).unwrap();
    (res.status, res.objective)
}

/// Four links, one function with two candidates.
fn diamond() -> ProblemInstance {
    InstanceBuilder::new()
        .node("s")
        .node("a")
        .node("b")
        .node("d")
        .link("s", "a", 5.0)
        .link("s", "b", 5.0)
        .link("a", "d", 5.0)
        .link("b", "d", 5.0)
        .node_capacity("a", 2.0)
        .node_capacity("b", 2.0)
        .function("f", ["a", "b"])
        .flow("k", "s", "d", 1.0, ["f"])
        .build()
        .unwrap()
}

#[test]
fn dimensions_of_a_one_function_flow() {
    let inst = diamond();
    let model = build_relaxation(&inst, false);
    let d = model.dimensions();
    assert_eq!(d.rate_vars, 2 * 4);
    assert_eq!(d.placement_vars, 2);
    assert_eq!(d.aggregate_vars, 0);
    // Two stages of conservation over 4 nodes, source-out, sink-in, one assignment.
    assert_eq!(d.equality_rows, 2 * 4 + 2 + 1);
    assert_eq!(d.rows_of(RowKind::LinkCapacity), 4);
    assert_eq!(d.rows_of(RowKind::HostOut), 0);
}

#[test]
fn cut_rows_follow_the_function_nodes() {
    let inst = InstanceBuilder::new()
        .node("s")
        .node("a")
        .node("b")
        .node("c")
        .node("d")
        .link("s", "a", 5.0)
        .link("a", "b", 5.0)
        .link("b", "c", 5.0)
        .link("c", "d", 5.0)
        .node_capacity("a", 3.0)
        .node_capacity("b", 3.0)
        .node_capacity("c", 3.0)
        .function("f", ["a", "b"])
        .function("g", ["b", "c"])
        .flow("k1", "s", "d", 1.0, ["f", "g"])
        .flow("k2", "s", "d", 1.0, ["f"])
        .build()
        .unwrap();
    let plain = build_relaxation(&inst, false).dimensions();
    let cut = build_relaxation(&inst, true).dimensions();
    // Function nodes a, b, c; (node, function) pairs a-f, b-f, b-g, c-g.
    assert_eq!(cut.rows_of(RowKind::CutNode), 3);
    assert_eq!(cut.rows_of(RowKind::CutFunction), 4);
    assert_eq!(cut.rows_of(RowKind::CutActivation), 4);
    // One box row per placement variable.
    assert_eq!(cut.rows_of(RowKind::CutPlacement), plain.placement_vars);
    assert_eq!(cut.aggregate_vars, 3 + 4);
    assert_eq!(plain.rows_of(RowKind::CutNode), 0);
}

#[test]
fn empty_chain_costs_a_shortest_path() {
    let inst = InstanceBuilder::new()
        .node("s")
        .node("m")
        .node("n")
        .node("d")
        .link("s", "m", 1.0)
        .link("m", "n", 1.0)
        .link("n", "d", 1.0)
        .link("s", "n", 1.0)
        .flow("k", "s", "d", 1.0, Vec::<String>::new())
        .build()
        .unwrap();
    let hops = hops_from(&inst, 0)[3];
    let (status, obj) = lp_value(&build_relaxation(&inst, false));
    assert_eq!(status, LpStatus::Optimal);
    assert!((obj - hops as f64).abs() < 1e-9);
    assert_eq!(hops, 2);
}

#[test]
fn penalty_coefficient_at_zero() {
    let inst = diamond();
    let x = FractionalPlacement {
        values: vec![vec![vec![0.0, 1.0]]],
        aggregates: None,
    };
    let params = PenaltyParams {
        p: 0.5,
        epsilon: 0.001,
        sigma: 3.0,
    };
    let model = build_psum_subproblem(&inst, &x, &params, false).unwrap();
    let col = model
        .index
        .col(
            &inst,
            Var::Place {
                flow: 0,
                position: 0,
                node: 1,
            },
        )
        .unwrap();
    let coef = model.lp.objective()[col.0];
    assert!((coef - 3.0 * 15.811388).abs() < 1e-5, "{coef}");

    let zero = PenaltyParams { epsilon: 0.0, ..params };
    assert_eq!(
        build_psum_subproblem(&inst, &x, &zero, false).unwrap_err(),
        FormulationError::SingularGradient
    );
}

#[test]
fn zero_sigma_is_the_relaxation() {
    let inst = gen_tightness(TightnessCase::Node, 0.25).unwrap();
    let x = FractionalPlacement::uniform(&inst);
    let params = PenaltyParams {
        p: 0.5,
        epsilon: 0.01,
        sigma: 0.0,
    };
    let a = lp_value(&build_relaxation(&inst, true)).1;
    let b = lp_value(&build_psum_subproblem(&inst, &x, &params, true).unwrap()).1;
    assert!((a - b).abs() < 1e-9);
    assert!((a - 6.25).abs() < 1e-6);
}

#[test]
fn repair_without_binding_capacity_has_no_slack() {
    let inst = diamond();
    let p = Placement {
        assignment: vec![vec![1]],
    };
    let model = build_routing_repair(&inst, &p, default_tau(&inst)).unwrap();
    let res = solve_lp(&model.lp, None, &Tolerances::default()).unwrap();
    let delta = res.values[model.index.delta().unwrap().0];
    assert!(delta.abs() < 1e-9);
    assert!((model.routing(&inst, &res.values).total() - 2.0).abs() < 1e-9);
}

#[test]
fn repair_on_the_link_gadget_pays_for_the_double_use() {
    // Serving at v3 walks (v1, v2) twice, but that link carries 2(1 - eps).
    let eps = 0.25;
    let inst = gen_tightness(TightnessCase::Link, eps).unwrap();
    let v3 = inst.node_id("v3").unwrap();
    let p = Placement {
        assignment: vec![vec![v3]],
    };
    let model = build_routing_repair(&inst, &p, default_tau(&inst)).unwrap();
    let res = solve_lp(&model.lp, None, &Tolerances::default()).unwrap();
    assert_eq!(res.status, LpStatus::Optimal);
    let delta = res.values[model.index.delta().unwrap().0];
    assert!((delta - 2.0 * eps).abs() < 1e-9, "{delta}");
    assert!((model.routing(&inst, &res.values).total() - 6.0).abs() < 1e-9);
}

#[test]
fn disconnected_placement_is_structural() {
    let inst = InstanceBuilder::new()
        .node("s")
        .node("a")
        .node("d")
        .link("s", "d", 1.0)
        .link("a", "d", 1.0)
        .node_capacity("a", 1.0)
        .function("f", ["a"])
        .flow("k", "s", "d", 1.0, ["f"])
        .build()
        .unwrap();
    let p = Placement {
        assignment: vec![vec![1]],
    };
    let err = build_routing_repair(&inst, &p, 1.0).unwrap_err();
    assert!(matches!(err, FormulationError::Disconnected { stage: 0, .. }));
}

#[test]
fn capacity_guarantee_examples() {
    let empty = InstanceBuilder::new().node("a").build().unwrap();
    let b = theorem2_bounds(&empty);
    assert_eq!((b.mu_bar, b.c_bar, b.guaranteed), (0.0, 0.0, true));

    let inst = gen_tightness(TightnessCase::Node, 0.25).unwrap();
    let b = theorem2_bounds(&inst);
    assert_eq!(b.mu_bar, 1.0);
    assert!(!b.guaranteed);
}

#[test]
fn capacity_rows_are_inequalities() {
    let model = build_relaxation(&diamond(), true);
    for (row, kind) in model.lp.constraints().iter().zip(&model.row_kinds) {
        if matches!(kind, RowKind::LinkCapacity | RowKind::NodeCapacity | RowKind::CutNode) {
            assert_ne!(row.relation, Relation::Eq);
        }
    }
}

#[test]
fn guaranteed_instances_have_integral_relaxations() {
    for seed in 0..6 {
        let inst = gen_random(&RandomParams::generous(), seed).unwrap();
        assert!(theorem2_bounds(&inst).guaranteed);
        let (_, lp) = lp_value(&build_relaxation(&inst, false));
        let oracle = brute_force_optimum(&inst, &OracleConfig::default()).unwrap();
        let opt = oracle.objective.expect("generous instances are feasible");
        assert!((lp - opt).abs() <= 1e-6 * opt.max(1.0), "seed {seed}: {lp} vs {opt}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cuts_never_lower_the_bound(seed in 0u64..10_000) {
        let inst = gen_random(&RandomParams::tight(), seed).unwrap();
        let (s0, plain) = lp_value(&build_relaxation(&inst, false));
        let (s1, cut) = lp_value(&build_relaxation(&inst, true));
        if s0 == LpStatus::Optimal {
            prop_assert!(s1 == LpStatus::Optimal || s1 == LpStatus::Infeasible);
            if s1 == LpStatus::Optimal {
                prop_assert!(cut >= plain - 1e-8 * plain.abs().max(1.0), "{} < {}", cut, plain);
            }
        } else {
            prop_assert_eq!(s0, LpStatus::Infeasible);
            prop_assert_eq!(s1, LpStatus::Infeasible);
        }
    }

    #[test]
    fn column_map_round_trips(seed in 0u64..10_000, cuts: bool) {
        let inst = gen_random(&RandomParams::tight(), seed).unwrap();
        let model = build_relaxation(&inst, cuts);
        for (j, v) in model.index.vars().iter().enumerate() {
            prop_assert_eq!(model.index.col(&inst, *v).map(|c| c.0), Some(j));
        }
    }
}
