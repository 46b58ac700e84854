use netslice::formulation::build_fixed_routing;
use netslice::generate::{gen_tightness, TightnessCase};
use netslice::oracle::{brute_force_optimum, OracleConfig};
use netslice::verify::check_feasibility;
use netslice::{InstanceBuilder, Placement, PlacementKind, RoutingPlan, Solution, SolutionStatus};
use netslice_lp::{solve_lp, Tolerances};

fn shared_bottleneck() -> (netslice::ProblemInstance, Solution) {
    let inst = InstanceBuilder::new()
        .node("a")
        .node("b")
        .node("c")
        .link("a", "b", 5.0)
        .link("b", "c", 10.0)
        .node_capacity("b", 2.0)
        .function("f", ["b"])
        .flow("k1", "a", "c", 1.5, ["f"])
        .flow("k2", "a", "c", 1.5, ["f"])
        .build()
        .unwrap();
    let placement = Placement {
        assignment: vec![vec![1], vec![1]],
    };
    let mut routing = RoutingPlan::zeros(&inst);
    for k in 0..2 {
        routing.rates[k][0][0] = 1.5;
        routing.rates[k][1][1] = 1.5;
    }
    let sol = Solution::new(
        SolutionStatus::BinaryWithViolations,
        PlacementKind::Binary(placement),
        routing,
    );
    (inst, sol)
}

#[test]
fn node_overload_ratio() {
    let (inst, sol) = shared_bottleneck();
    let rep = check_feasibility(&inst, &sol, 1e-9).unwrap();
    // 3 units hosted on a node of capacity 2.
    assert!((rep.node_excess[1] - 1.0).abs() < 1e-12);
    assert!((rep.max_node_ratio - 0.5).abs() < 1e-12);
    assert_eq!(rep.max_link_ratio, 0.0);
    assert!(rep.conservation_residual < 1e-12);
    assert!(!rep.is_clean(1e-9));
}

#[test]
fn link_overload_ratio() {
    let (inst, mut sol) = shared_bottleneck();
    // A 2.5 detour a->b->... is not conserving, but the load on a->b reaches 5.5.
    sol.routing.rates[0][0][0] += 2.0;
    sol.routing.rates[1][0][0] += 0.5;
    let rep = check_feasibility(&inst, &sol, 1e-9).unwrap();
    assert!((rep.link_excess[0] - 0.5).abs() < 1e-12);
    assert!((rep.max_link_ratio - 0.1).abs() < 1e-12);
    assert!((rep.conservation_residual - 2.0).abs() < 1e-12);
}

#[test]
fn oracle_optimum_is_clean() {
    let inst = gen_tightness(TightnessCase::Link, 0.25).unwrap();
    let res = brute_force_optimum(&inst, &OracleConfig::default()).unwrap();
    let sol = res.to_solution(&inst);
    let rep = check_feasibility(&inst, &sol, 1e-9).unwrap();
    assert!(rep.is_clean(1e-9), "{rep:?}");
}

#[test]
fn fixed_routing_matches_the_audit() {
    let inst = gen_tightness(TightnessCase::Node, 0.25).unwrap();
    let v6 = inst.node_id("v6").unwrap();
    let p = Placement {
        assignment: vec![vec![v6]],
    };
    let model = build_fixed_routing(&inst, &p).unwrap();
    let res = solve_lp(&model.lp, None, &Tolerances::default()).unwrap();
    let routing = model.routing(&inst, &res.values);
    let sol = Solution::new(SolutionStatus::BinaryFeasible, PlacementKind::Binary(p), routing);
    assert!((sol.objective - 7.0).abs() < 1e-9);
    assert!(check_feasibility(&inst, &sol, 1e-9).unwrap().is_clean(1e-9));
}

#[test]
fn shape_mismatch_is_an_error() {
    let (inst, mut sol) = shared_bottleneck();
    sol.routing.rates.pop();
    assert!(check_feasibility(&inst, &sol, 1e-9).is_err());
}
