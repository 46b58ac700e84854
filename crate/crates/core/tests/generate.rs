use netslice::bench::lp_bound;
use netslice::formulation::theorem2_bounds;
use netslice::generate::{
    gen_3dm, gen_fish, gen_mesh, gen_random, gen_tightness, has_perfect_matching, sub_interval, FishParams, MeshParams,
    RandomParams, TightnessCase, TripleSet,
};
use netslice::io::instance_to_string;
use netslice::oracle::{brute_force_optimum, OracleConfig};
use netslice_lp::{BackendKind, Tolerances};

fn bound(inst: &netslice::ProblemInstance) -> f64 {
    lp_bound(inst, BackendKind::Bundled, &Tolerances::default())
        .unwrap()
        .unwrap()
}

#[test]
fn default_mesh_counts() {
    let m = gen_mesh(&MeshParams::default(), 7).unwrap();
    assert_eq!(m.num_nodes(), 100);
    assert_eq!(m.num_links(), 684);
    let no_diag = MeshParams {
        diagonals: false,
        ..MeshParams::default()
    };
    assert_eq!(gen_mesh(&no_diag, 7).unwrap().num_links(), 360);
}

#[test]
fn mesh_endpoints_avoid_their_chain() {
    let m = gen_mesh(&MeshParams::default(), 3).unwrap();
    assert_eq!(m.num_flows(), 30);
    for (k, f) in m.flows().iter().enumerate() {
        assert_eq!(f.len(), 2);
        assert_eq!(f.rate, 1.0);
        for s in 0..f.len() {
            let c = m.candidates(k, s);
            assert!(!c.contains(&f.src) && !c.contains(&f.dst));
        }
    }
    for l in m.links() {
        assert!((0.5..=5.5).contains(&l.capacity));
    }
}

#[test]
fn generators_are_deterministic() {
    let a = instance_to_string(&gen_mesh(&MeshParams::default(), 11).unwrap());
    let b = instance_to_string(&gen_mesh(&MeshParams::default(), 11).unwrap());
    assert_eq!(a, b);
    let c = instance_to_string(&gen_mesh(&MeshParams::default(), 12).unwrap());
    assert_ne!(a, c);
    let f1 = instance_to_string(&gen_fish(&FishParams::default(), 5).unwrap());
    let f2 = instance_to_string(&gen_fish(&FishParams::default(), 5).unwrap());
    assert_eq!(f1, f2);
    let r1 = instance_to_string(&gen_random(&RandomParams::tight(), 5).unwrap());
    let r2 = instance_to_string(&gen_random(&RandomParams::tight(), 5).unwrap());
    assert_eq!(r1, r2);
}

#[test]
fn fish_defaults() {
    let p = FishParams::default();
    let f = gen_fish(&p, 1).unwrap();
    assert_eq!(p.layer_sizes.len(), 11);
    let function_nodes: Vec<usize> = (0..f.num_nodes()).filter(|&i| f.is_function_node(i)).collect();
    assert_eq!(function_nodes.len(), 6);
    for i in function_nodes {
        assert_eq!(f.node_caps()[i], 16.0);
    }
    for flow in f.flows() {
        assert!((1.0..=5.0).contains(&flow.rate) && flow.rate.fract() == 0.0);
        assert!(!f.is_function_node(flow.src));
    }
    let (lo, hi) = sub_interval(p.link_capacity, 10, 11 - 10);
    assert!((lo - 1.0).abs() < 1e-12 && (hi - 6.4).abs() < 1e-12);
}

#[test]
fn single_layer_fish_is_a_star() {
    let p = FishParams {
        layer_sizes: vec![1, 4],
        function_nodes: vec![(2, 0)],
        functions: 1,
        flows: 2,
        chain_len: 1,
        intra_layer_links: false,
        ..FishParams::default()
    };
    let f = gen_fish(&p, 2).unwrap();
    assert_eq!(f.num_nodes(), 5);
    // Every edge touches the destination.
    let dst = f.flows()[0].dst;
    assert!(f.links().iter().all(|l| l.from == dst || l.to == dst));
}

#[test]
fn matching_reduction_examples() {
    let one = TripleSet {
        k: 1,
        triples: vec![(0, 0, 0)],
    };
    let res = brute_force_optimum(&gen_3dm(&one, 1.0).unwrap(), &OracleConfig::default()).unwrap();
    assert!(res.is_feasible());

    let two = TripleSet {
        k: 2,
        triples: vec![(0, 0, 0), (1, 1, 1)],
    };
    let res = brute_force_optimum(&gen_3dm(&two, 1.0).unwrap(), &OracleConfig::default()).unwrap();
    assert!(res.is_feasible() && has_perfect_matching(&two));

    let clash = TripleSet {
        k: 2,
        triples: vec![(0, 0, 0), (0, 1, 1)],
    };
    let res = brute_force_optimum(&gen_3dm(&clash, 1.0).unwrap(), &OracleConfig::default()).unwrap();
    assert!(!res.is_feasible() && !has_perfect_matching(&clash));
}

#[test]
fn matching_reduction_parameters() {
    let t = TripleSet {
        k: 3,
        triples: vec![(0, 1, 2)],
    };
    let inst = gen_3dm(&t, 2.0).unwrap();
    assert_eq!(inst.num_nodes(), 15);
    assert_eq!(inst.num_flows(), 3);
    assert!(inst.links().iter().all(|l| l.capacity == 24.0));
    for i in 0..inst.num_nodes() {
        if inst.is_function_node(i) {
            assert_eq!(inst.node_caps()[i], 3.0);
        }
    }
    // Chains are pairwise disjoint.
    let mut seen = std::collections::BTreeSet::new();
    for f in inst.flows() {
        assert_eq!(f.len(), 3);
        for &c in &f.chain {
            assert!(seen.insert(c));
        }
    }
}

#[test]
fn tightness_gadgets() {
    let node = gen_tightness(TightnessCase::Node, 0.25).unwrap();
    assert_eq!(node.num_nodes(), 11);
    assert!((bound(&node) - 6.25).abs() < 1e-6);
    assert!(!theorem2_bounds(&node).guaranteed);

    let link = gen_tightness(TightnessCase::Link, 0.25).unwrap();
    assert!((bound(&link) - 6.25).abs() < 1e-6);
    assert!(!theorem2_bounds(&link).guaranteed);

    let tight = gen_tightness(TightnessCase::Node, 0.0).unwrap();
    assert!((bound(&tight) - 6.0).abs() < 1e-6);
    let res = brute_force_optimum(&tight, &OracleConfig::default()).unwrap();
    assert!((res.objective.unwrap() - 6.0).abs() < 1e-6);
    assert!(gen_tightness(TightnessCase::Node, 1.0).is_err());
}

#[test]
fn gadget_relaxation_value_is_affine_in_eps() {
    for eps in [0.1, 0.25, 0.5, 0.75] {
        for case in [TightnessCase::Node, TightnessCase::Link] {
            let inst = gen_tightness(case, eps).unwrap();
            let expected = 6.0 * (1.0 - eps) + 7.0 * eps;
            assert!((bound(&inst) - expected).abs() < 1e-6, "{case:?} {eps}");
        }
    }
}

#[test]
fn random_presets() {
    for seed in 0..20 {
        let g = gen_random(&RandomParams::generous(), seed).unwrap();
        assert!(g.num_nodes() <= 16 && g.num_flows() <= 3);
        assert!(theorem2_bounds(&g).guaranteed);
        let t = gen_random(&RandomParams::tight(), seed).unwrap();
        assert!(t.num_nodes() <= 16 && t.num_flows() <= 4);
        assert!(t.flows().iter().all(|f| f.len() <= 2));
    }
}
