use netslice::bench::lp_relaxation;
use netslice::generate::{gen_mesh, gen_random, gen_tightness, MeshParams, RandomParams, TightnessCase};
use netslice::io::{instance_from_str, instance_to_string, read_solution, solution_to_string, IoError};
use netslice::psum::PsumConfig;
use netslice::{FractionalPlacement, ModelError, PlacementKind, RoutingPlan, Solution, SolutionStatus};
use proptest::prelude::*;

const MINIMAL: &str = r#"{
  "nodes": ["s", "a", "d"],
  "links": [
    {"from": "s", "to": "a", "capacity": 2},
    {"from": "a", "to": "d", "capacity": 2}
  ],
  "node_capacities": {"a": 1.5},
  "functions": {"fw": ["a"]},
  "flows": [{"id": "k1", "src": "s", "dst": "d", "rate": 1, "chain": ["fw"]}]
}"#;

#[test]
fn reads_a_minimal_document() {
    let inst = instance_from_str(MINIMAL).unwrap();
    assert_eq!(inst.num_nodes(), 3);
    assert_eq!(inst.num_links(), 2);
    assert_eq!(inst.node_caps(), &[0.0, 1.5, 0.0]);
    assert_eq!(inst.candidates(0, 0), &[1]);
    assert_eq!(inst.flows()[0].stages(), 2);
}

#[test]
fn undeclared_node_is_rejected() {
    let text = MINIMAL.replace(r#"{"from": "a", "to": "d""#, r#"{"from": "a", "to": "x""#);
    match instance_from_str(&text) {
        Err(IoError::Invalid(ModelError::UnknownNode { name, .. })) => assert_eq!(name, "x"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn malformed_json_reports_a_position() {
    match instance_from_str("{\n  \"nodes\": [,]\n}") {
        Err(IoError::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn unknown_fields_are_rejected() {
    let text = MINIMAL.replacen("\"nodes\"", "\"extra\": 1, \"nodes\"", 1);
    assert!(matches!(instance_from_str(&text), Err(IoError::Parse { .. })));
}

#[test]
fn mesh_round_trip_is_byte_identical() {
    let inst = gen_mesh(&MeshParams::default(), 4).unwrap();
    let first = instance_to_string(&inst);
    let back = instance_from_str(&first).unwrap();
    assert_eq!(back, inst);
    assert_eq!(instance_to_string(&back), first);
}

#[test]
fn fractional_solution_round_trip() {
    let inst = gen_tightness(TightnessCase::Link, 0.25).unwrap();
    let sol = lp_relaxation(&inst, true, &PsumConfig::default()).unwrap();
    assert_eq!(sol.status, SolutionStatus::OptimalRelaxation);
    let text = solution_to_string(&inst, &sol);
    let back = read_solution(&inst, text.as_bytes()).unwrap();
    // Cut aggregates are solver internals and are not written.
    let (PlacementKind::Fractional(a), PlacementKind::Fractional(b)) = (&back.placement, &sol.placement) else {
        panic!("relaxation is fractional");
    };
    assert_eq!(a.values, b.values);
    assert_eq!(back.routing, sol.routing);
    assert_eq!(back.objective.to_bits(), sol.objective.to_bits());
    assert_eq!(solution_to_string(&inst, &back), text);
}

#[test]
fn awkward_floats_survive() {
    let inst = instance_from_str(MINIMAL).unwrap();
    let mut routing = RoutingPlan::zeros(&inst);
    routing.rates[0][0][0] = 0.1 + 0.2;
    routing.rates[0][1][1] = 1.0 / 3.0;
    let x = FractionalPlacement {
        values: vec![vec![vec![1.0 - 1e-17]]],
        aggregates: None,
    };
    let mut sol = Solution::new(SolutionStatus::OptimalRelaxation, PlacementKind::Fractional(x), routing);
    sol.delta = Some(5e-324);
    let text = solution_to_string(&inst, &sol);
    let back = read_solution(&inst, text.as_bytes()).unwrap();
    assert_eq!(back.routing.rates[0][0][0].to_bits(), (0.1f64 + 0.2).to_bits());
    assert_eq!(back.delta, Some(5e-324));
    assert_eq!(solution_to_string(&inst, &back), text);
}

#[test]
fn infeasible_solution_round_trip() {
    let inst = instance_from_str(MINIMAL).unwrap();
    let sol = Solution::infeasible(&inst);
    let text = solution_to_string(&inst, &sol);
    let back = read_solution(&inst, text.as_bytes()).unwrap();
    assert_eq!(back.status, SolutionStatus::Infeasible);
    assert_eq!(back.placement, sol.placement);
}

#[test]
fn solution_for_another_instance_is_a_mismatch() {
    let inst = instance_from_str(MINIMAL).unwrap();
    let other = gen_tightness(TightnessCase::Node, 0.25).unwrap();
    let text = solution_to_string(&other, &lp_relaxation(&other, false, &PsumConfig::default()).unwrap());
    assert!(matches!(
        read_solution(&inst, text.as_bytes()),
        Err(IoError::Mismatch(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn uniform_placement_is_a_valid_relaxation_point(seed in 0u64..100_000) {
        let inst = gen_random(&RandomParams::tight(), seed).unwrap();
        let x = FractionalPlacement::uniform(&inst);
        prop_assert!(x.check_shape(&inst).is_ok());
        prop_assert!(x.block_sum_error() < 1e-12);
        for blocks in &x.values {
            for b in blocks {
                prop_assert!(b.iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }
    }

    #[test]
    fn argmax_of_a_binary_point_recovers_it(seed in 0u64..100_000) {
        let inst = gen_random(&RandomParams::tight(), seed).unwrap();
        let p = FractionalPlacement::uniform(&inst).argmax_placement(&inst);
        let x = p.to_fractional(&inst);
        prop_assert!(x.is_binary(0.0));
        prop_assert!(x.block_sum_error() == 0.0);
        prop_assert_eq!(x.argmax_placement(&inst), p);
    }

    #[test]
    fn flow_rates_sum_the_stages(seed in 0u64..100_000, scale in 0.0f64..10.0) {
        let inst = gen_random(&RandomParams::tight(), seed).unwrap();
        let mut plan = RoutingPlan::zeros(&inst);
        for (k, stages) in plan.rates.iter_mut().enumerate() {
            for (s, stage) in stages.iter_mut().enumerate() {
                for (l, r) in stage.iter_mut().enumerate() {
                    *r = scale * ((k + 2 * s + 3 * l) % 5) as f64;
                }
            }
        }
        let loads = plan.link_loads(inst.num_links());
        let mut total = 0.0;
        for l in 0..inst.num_links() {
            let per_flow: f64 = (0..inst.num_flows()).map(|k| plan.flow_rate(k, l)).sum();
            prop_assert!((per_flow - loads[l]).abs() <= 1e-9 * loads[l].max(1.0));
            total += loads[l];
        }
        prop_assert!((total - plan.total()).abs() <= 1e-9 * total.max(1.0));
    }
}
