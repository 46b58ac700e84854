//! Seeded instance generators.
//!
//! All randomness goes through [`Rng`]; draws happen in a fixed order that
//! is documented on each generator, so a `(params, seed)` pair always maps
//! to the same instance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{InstanceBuilder, ModelError, ProblemInstance};
use crate::rng::Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerateError {
    #[error("inconsistent parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn bad(msg: impl Into<String>) -> GenerateError {
    GenerateError::Params(msg.into())
}

/// Grid topology with function nodes in a band of middle columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshParams {
    pub rows: usize,
    pub cols: usize,
    /// Also connect both diagonal neighbours.
    pub diagonals: bool,
    /// Number of middle columns whose nodes may host functions.
    pub band: usize,
    pub functions: usize,
    /// `|V_f|` for every function.
    pub nodes_per_function: usize,
    pub flows: usize,
    pub rate: f64,
    pub chain_len: usize,
    pub link_capacity: (f64, f64),
    pub node_capacity: (f64, f64),
}

impl Default for MeshParams {
    /// The 10x10 setting with 30 unit-rate flows and chains of length two.
    fn default() -> Self {
        MeshParams {
            rows: 10,
            cols: 10,
            diagonals: true,
            band: 4,
            functions: 5,
            nodes_per_function: 10,
            flows: 30,
            rate: 1.0,
            chain_len: 2,
            link_capacity: (0.5, 5.5),
            node_capacity: (0.5, 8.0),
        }
    }
}

/// Generates a mesh instance.
///
/// Draw order: one capacity per directed link (in link order), one
/// capacity per node (row-major), the candidate set of every function
/// (sampled from the band), then per flow its chain, source and destination.
pub fn gen_mesh(params: &MeshParams, seed: u64) -> Result<ProblemInstance, GenerateError> {
    let MeshParams { rows, cols, band, .. } = *params;
    if rows == 0 || cols == 0 {
        return Err(bad("mesh needs at least one row and one column"));
    }
    if band > cols {
        return Err(bad("function band wider than the grid"));
    }
    if params.nodes_per_function > band * rows {
        return Err(bad("more candidates per function than band nodes"));
    }
    if params.chain_len > params.functions {
        return Err(bad("chain longer than the number of functions"));
    }
    if params.flows > 0 && params.nodes_per_function == 0 && params.chain_len > 0 {
        return Err(bad("functions need candidates"));
    }
    check_range("link capacity", params.link_capacity)?;
    check_range("node capacity", params.node_capacity)?;
    if !(params.rate > 0.0) {
        return Err(bad("rate must be positive"));
    }

    let mut rng = Rng::new(seed);
    let name = |r: usize, c: usize| format!("n{r}_{c}");
    let mut b = InstanceBuilder::new();
    for r in 0..rows {
        for c in 0..cols {
            b.node(name(r, c));
        }
    }
    // Undirected neighbours looking right, down, down-right, down-left.
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push(((r, c), (r, c + 1)));
            }
            if r + 1 < rows {
                edges.push(((r, c), (r + 1, c)));
                if params.diagonals {
                    if c + 1 < cols {
                        edges.push(((r, c), (r + 1, c + 1)));
                    }
                    if c > 0 {
                        edges.push(((r, c), (r + 1, c - 1)));
                    }
                }
            }
        }
    }
    let (clo, chi) = params.link_capacity;
    for &(a, z) in &edges {
        let c1 = rng.uniform(clo, chi);
        let c2 = rng.uniform(clo, chi);
        b.link(name(a.0, a.1), name(z.0, z.1), c1);
        b.link(name(z.0, z.1), name(a.0, a.1), c2);
    }
    let (mlo, mhi) = params.node_capacity;
    for r in 0..rows {
        for c in 0..cols {
            let mu = rng.uniform(mlo, mhi);
            b.node_capacity(name(r, c), mu);
        }
    }
    let first = (cols - band) / 2;
    let band_nodes: Vec<usize> = (0..rows)
        .flat_map(|r| (first..first + band).map(move |c| r * cols + c))
        .collect();
    let mut candidates = Vec::with_capacity(params.functions);
    for f in 0..params.functions {
        let mut members = rng.sample(&band_nodes, params.nodes_per_function);
        members.sort_unstable();
        b.function(
            function_name(f, params.functions),
            members.iter().map(|&i| name(i / cols, i % cols)),
        );
        candidates.push(members);
    }
    let fids: Vec<usize> = (0..params.functions).collect();
    for k in 0..params.flows {
        let chain = rng.sample(&fids, params.chain_len);
        let mut excluded = vec![false; rows * cols];
        for &f in &chain {
            for &i in &candidates[f] {
                excluded[i] = true;
            }
        }
        let pool: Vec<usize> = (0..rows * cols).filter(|&i| !excluded[i]).collect();
        if pool.len() < 2 {
            return Err(bad("not enough nodes outside the chain's candidate sets"));
        }
        let ends = rng.sample(&pool, 2);
        b.flow(
            flow_name(k, params.flows),
            name(ends[0] / cols, ends[0] % cols),
            name(ends[1] / cols, ends[1] % cols),
            params.rate,
            chain.iter().map(|&f| function_name(f, params.functions)),
        );
    }
    Ok(b.build()?)
}

/// Layered topology with a common destination in layer 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FishParams {
    /// Nodes per layer; layer 1 (index 0) holds the destination only.
    pub layer_sizes: Vec<usize>,
    /// `(layer, index)` pairs, 1-based layers, 0-based index within the layer.
    pub function_nodes: Vec<(usize, usize)>,
    pub functions: usize,
    pub flows: usize,
    /// Inclusive integer range for flow rates.
    pub rate: (i64, i64),
    pub chain_len: usize,
    /// Master capacity range, split into `layer_sizes.len() - 1` equal parts.
    pub link_capacity: (f64, f64),
    pub node_capacity: f64,
    /// Connect consecutive nodes inside a layer.
    pub intra_layer_links: bool,
}

impl Default for FishParams {
    /// Best-effort 11-layer reconstruction: 112 nodes, 6 function nodes.
    fn default() -> Self {
        FishParams {
            layer_sizes: vec![1, 3, 6, 9, 12, 15, 17, 17, 15, 11, 6],
            function_nodes: vec![(5, 3), (5, 8), (6, 4), (6, 10), (7, 5), (7, 11)],
            functions: 4,
            flows: 20,
            rate: (1, 5),
            chain_len: 1,
            link_capacity: (1.0, 55.0),
            node_capacity: 16.0,
            intra_layer_links: true,
        }
    }
}

/// Capacity sub-interval `q` (1-based) of `parts` equal parts of `range`.
pub fn sub_interval(range: (f64, f64), parts: usize, q: usize) -> (f64, f64) {
    let w = (range.1 - range.0) / parts as f64;
    (range.0 + w * (q - 1) as f64, range.0 + w * q as f64)
}

/// Generates a layered instance.
///
/// Every node of layer `m + 1` links (both ways) to the nearest node of
/// layer `m` by relative position, and every node of layer `m` to the
/// nearest node of layer `m + 1`; optional intra-layer links join
/// neighbours within a layer. Links touching layers `m + 1` and `m` (and
/// intra links of layer `m + 1`) draw capacities from sub-interval
/// `L - m` of the master range, where `L` is the number of layers.
///
/// Draw order: link capacities in link order, then per flow its rate,
/// source and chain.
pub fn gen_fish(params: &FishParams, seed: u64) -> Result<ProblemInstance, GenerateError> {
    let layers = &params.layer_sizes;
    if layers.is_empty() || layers.iter().any(|&n| n == 0) {
        return Err(bad("layers must be nonempty"));
    }
    if layers[0] != 1 {
        return Err(bad("layer 1 must hold exactly the destination"));
    }
    if params.chain_len > params.functions {
        return Err(bad("chain longer than the number of functions"));
    }
    if params.functions > 0 && params.function_nodes.is_empty() {
        return Err(bad("functions need at least one function node"));
    }
    if params.rate.0 < 1 || params.rate.0 > params.rate.1 {
        return Err(bad("rate range must be positive and ordered"));
    }
    check_range("link capacity", params.link_capacity)?;
    let name = |m: usize, j: usize| format!("L{m}_{j}");
    for &(m, j) in &params.function_nodes {
        if m == 0 || m > layers.len() || j >= layers[m - 1] {
            return Err(bad(format!("function node ({m}, {j}) outside the layers")));
        }
        if m == 1 {
            return Err(bad("the destination cannot host functions"));
        }
    }

    let mut rng = Rng::new(seed);
    let mut b = InstanceBuilder::new();
    for (m, &n) in layers.iter().enumerate() {
        for j in 0..n {
            b.node(name(m + 1, j));
        }
    }
    let parts = (layers.len() - 1).max(1);
    let pos = |n: usize, j: usize| (j as f64 + 0.5) / n as f64;
    let nearest = |n: usize, p: f64| -> usize {
        (0..n)
            .min_by(|&a, &c| (pos(n, a) - p).abs().partial_cmp(&(pos(n, c) - p).abs()).unwrap())
            .unwrap()
    };
    // Undirected edges tagged with the capacity sub-interval they use.
    let mut edges: Vec<((usize, usize), (usize, usize), usize)> = Vec::new();
    let push = |a: (usize, usize), c: (usize, usize), q: usize, edges: &mut Vec<_>| {
        let key = if a <= c { (a, c) } else { (c, a) };
        if !edges.iter().any(|&(x, y, _)| (x, y) == key) {
            edges.push((key.0, key.1, q));
        }
    };
    for m in 1..layers.len() {
        // Layer m + 1 (index m) against layer m (index m - 1).
        let q = layers.len() - m;
        let (upper, lower) = (layers[m], layers[m - 1]);
        for j in 0..upper {
            let t = nearest(lower, pos(upper, j));
            push((m + 1, j), (m, t), q, &mut edges);
        }
        for t in 0..lower {
            let j = nearest(upper, pos(lower, t));
            push((m + 1, j), (m, t), q, &mut edges);
        }
        if params.intra_layer_links {
            for j in 0..upper.saturating_sub(1) {
                push((m + 1, j), (m + 1, j + 1), q, &mut edges);
            }
        }
    }
    for &(a, c, q) in &edges {
        let (lo, hi) = sub_interval(params.link_capacity, parts, q);
        let c1 = rng.uniform(lo, hi);
        let c2 = rng.uniform(lo, hi);
        b.link(name(a.0, a.1), name(c.0, c.1), c1);
        b.link(name(c.0, c.1), name(a.0, a.1), c2);
    }
    let fnodes: Vec<String> = params.function_nodes.iter().map(|&(m, j)| name(m, j)).collect();
    for n in &fnodes {
        b.node_capacity(n.clone(), params.node_capacity);
    }
    for f in 0..params.functions {
        b.function(function_name(f, params.functions), fnodes.iter().cloned());
    }
    let sources: Vec<String> = layers
        .iter()
        .enumerate()
        .skip(1)
        .flat_map(|(m, &n)| (0..n).map(move |j| name(m + 1, j)))
        .filter(|n| !fnodes.contains(n))
        .collect();
    if params.flows > 0 && sources.is_empty() {
        return Err(bad("no eligible source nodes"));
    }
    let fids: Vec<usize> = (0..params.functions).collect();
    for k in 0..params.flows {
        let rate = rng.int_inclusive(params.rate.0, params.rate.1) as f64;
        let src = sources[rng.index(sources.len())].clone();
        let chain = rng.sample(&fids, params.chain_len);
        b.flow(
            flow_name(k, params.flows),
            src,
            name(1, 0),
            rate,
            chain.iter().map(|&f| function_name(f, params.functions)),
        );
    }
    let inst = b.build()?;
    log::info!(
        "fish topology: {} nodes, {} directed links",
        inst.num_nodes(),
        inst.num_links()
    );
    Ok(inst)
}

/// Triples `R` of a 3-dimensional matching instance over `[0, k)^3`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleSet {
    pub k: usize,
    pub triples: Vec<(usize, usize, usize)>,
}

impl TripleSet {
    pub fn validate(&self) -> Result<(), GenerateError> {
        for &(x, y, z) in &self.triples {
            if x >= self.k || y >= self.k || z >= self.k {
                return Err(bad(format!("triple ({x}, {y}, {z}) out of range")));
            }
        }
        Ok(())
    }

    /// Random subset where each of the `k^3` triples is kept with probability `density`.
    pub fn random(k: usize, density: f64, rng: &mut Rng) -> Self {
        let mut triples = Vec::new();
        for x in 0..k {
            for y in 0..k {
                for z in 0..k {
                    if rng.unit() < density {
                        triples.push((x, y, z));
                    }
                }
            }
        }
        TripleSet { k, triples }
    }
}

/// Builds the matching-reduction instance.
///
/// Nodes: sources `s*`, function layers `x*`, `y*`, `z*`, destinations
/// `d*`, `k` of each. Flow `j` goes `s_j -> d_j` through its own functions
/// `a_j`, `b_j`, `c_j`, hosted by any node of `X`, `Y` and `Z`
/// respectively. `S x X` and `Z x D` are complete; each triple contributes
/// the links `x -> y` and `y -> z`. Links carry `4 k lambda`, function
/// nodes `1.5 lambda`.
pub fn gen_3dm(triples: &TripleSet, lambda: f64) -> Result<ProblemInstance, GenerateError> {
    triples.validate()?;
    if !(lambda > 0.0) {
        return Err(bad("lambda must be positive"));
    }
    let k = triples.k;
    let cap = 4.0 * k as f64 * lambda;
    let mu = 1.5 * lambda;
    let mut b = InstanceBuilder::new();
    for prefix in ["s", "x", "y", "z", "d"] {
        for j in 0..k {
            b.node(format!("{prefix}{j}"));
        }
    }
    for s in 0..k {
        for x in 0..k {
            b.link(format!("s{s}"), format!("x{x}"), cap);
        }
    }
    let mut xy = std::collections::BTreeSet::new();
    let mut yz = std::collections::BTreeSet::new();
    for &(x, y, z) in &triples.triples {
        xy.insert((x, y));
        yz.insert((y, z));
    }
    for (x, y) in xy {
        b.link(format!("x{x}"), format!("y{y}"), cap);
    }
    for (y, z) in yz {
        b.link(format!("y{y}"), format!("z{z}"), cap);
    }
    for z in 0..k {
        for d in 0..k {
            b.link(format!("z{z}"), format!("d{d}"), cap);
        }
    }
    for prefix in ["x", "y", "z"] {
        for j in 0..k {
            b.node_capacity(format!("{prefix}{j}"), mu);
        }
    }
    let width = digits(k);
    for j in 0..k {
        for (f, layer) in [("a", "x"), ("b", "y"), ("c", "z")] {
            b.function(format!("{f}{j:0width$}"), (0..k).map(|i| format!("{layer}{i}")));
        }
    }
    for j in 0..k {
        b.flow(
            format!("k{j:0width$}"),
            format!("s{j}"),
            format!("d{j}"),
            lambda,
            [
                format!("a{j:0width$}"),
                format!("b{j:0width$}"),
                format!("c{j:0width$}"),
            ],
        );
    }
    Ok(b.build()?)
}

/// True when `R` contains `k` triples that are pairwise disjoint in every coordinate.
pub fn has_perfect_matching(triples: &TripleSet) -> bool {
    fn go(t: &TripleSet, x: usize, used_y: &mut [bool], used_z: &mut [bool]) -> bool {
        if x == t.k {
            return true;
        }
        for &(a, y, z) in &t.triples {
            if a == x && !used_y[y] && !used_z[z] {
                used_y[y] = true;
                used_z[z] = true;
                if go(t, x + 1, used_y, used_z) {
                    return true;
                }
                used_y[y] = false;
                used_z[z] = false;
            }
        }
        false
    }
    go(triples, 0, &mut vec![false; triples.k], &mut vec![false; triples.k])
}

/// Which capacity makes the small example's relaxation fractional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TightnessCase {
    Node,
    Link,
}

/// Large capacity used for everything not under test.
pub const TIGHTNESS_AMPLE: f64 = 10.0;

/// The 11-node example with a short walk through `v3` and a long path through `v6`.
///
/// The short walk `S v1 v2 v3 v1 v2 D` has 6 hops and crosses `(v1, v2)`
/// twice; the long path `S v4 ... v9 D` has 7. One unit flow needs a single
/// function available at `v3` and `v6`. The node case caps `v3` at
/// `1 - eps`; the link case caps `(v1, v2)` at `2 (1 - eps)`.
pub fn gen_tightness(case: TightnessCase, eps: f64) -> Result<ProblemInstance, GenerateError> {
    if !(0.0..1.0).contains(&eps) {
        return Err(bad("epsilon must lie in [0, 1)"));
    }
    let mut b = InstanceBuilder::new();
    b.node("S");
    for i in 1..=9 {
        b.node(format!("v{i}"));
    }
    b.node("D");
    let short = [("S", "v1"), ("v1", "v2"), ("v2", "v3"), ("v3", "v1"), ("v2", "D")];
    let long = [
        ("S", "v4"),
        ("v4", "v5"),
        ("v5", "v6"),
        ("v6", "v7"),
        ("v7", "v8"),
        ("v8", "v9"),
        ("v9", "D"),
    ];
    for (a, z) in short.iter().chain(long.iter()) {
        let cap = if case == TightnessCase::Link && (*a, *z) == ("v1", "v2") {
            2.0 * (1.0 - eps)
        } else {
            TIGHTNESS_AMPLE
        };
        b.link(*a, *z, cap);
    }
    let mu3 = match case {
        TightnessCase::Node => 1.0 - eps,
        TightnessCase::Link => TIGHTNESS_AMPLE,
    };
    b.node_capacity("v3", mu3);
    b.node_capacity("v6", TIGHTNESS_AMPLE);
    b.function("f1", ["v3", "v6"]);
    b.flow("k1", "S", "D", 1.0, ["f1"]);
    Ok(b.build()?)
}

/// Small random instances for oracle comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomParams {
    /// Inclusive node-count range.
    pub nodes: (usize, usize),
    /// Probability of each extra directed chord beyond the bidirectional ring.
    pub chord_density: f64,
    pub functions: usize,
    /// Inclusive range of `|V_f|`.
    pub candidates: (usize, usize),
    /// Inclusive flow-count range.
    pub flows: (usize, usize),
    /// Inclusive chain-length range.
    pub chain_len: (usize, usize),
    /// Inclusive integer rate range.
    pub rate: (i64, i64),
    /// `None`: capacities follow the sufficient bounds (plus a random margin).
    pub link_capacity: Option<(f64, f64)>,
    pub node_capacity: Option<(f64, f64)>,
}

impl RandomParams {
    /// At most 16 nodes, 3 flows, chains up to 2, capacities that always
    /// admit a binary optimum of the relaxation.
    pub fn generous() -> Self {
        RandomParams {
            nodes: (8, 16),
            chord_density: 0.08,
            functions: 3,
            candidates: (2, 3),
            flows: (1, 3),
            chain_len: (0, 2),
            rate: (1, 3),
            link_capacity: None,
            node_capacity: None,
        }
    }

    /// At most 16 nodes, 4 flows, chains up to 2, with binding capacities.
    pub fn tight() -> Self {
        RandomParams {
            nodes: (8, 16),
            chord_density: 0.08,
            functions: 3,
            candidates: (2, 3),
            flows: (2, 4),
            chain_len: (1, 2),
            rate: (1, 2),
            link_capacity: Some((1.0, 4.0)),
            node_capacity: Some((1.0, 4.0)),
        }
    }
}

/// Random ring-plus-chords instance.
///
/// Draw order: node count, chords, candidate sets, per flow (count first)
/// its chain length, chain, rate, source and destination, then link
/// capacities and node capacities (ranges or margins above the sufficient
/// bounds).
pub fn gen_random(params: &RandomParams, seed: u64) -> Result<ProblemInstance, GenerateError> {
    let (nlo, nhi) = params.nodes;
    if nlo < 3 || nlo > nhi {
        return Err(bad("node range must start at 3 or more and be ordered"));
    }
    if params.candidates.0 == 0 || params.candidates.0 > params.candidates.1 {
        return Err(bad("candidate range must be positive and ordered"));
    }
    if params.candidates.1 > nlo {
        return Err(bad("more candidates than nodes"));
    }
    if params.chain_len.1 > params.functions || params.chain_len.0 > params.chain_len.1 {
        return Err(bad("chain range exceeds the number of functions"));
    }
    if params.rate.0 < 1 || params.rate.0 > params.rate.1 {
        return Err(bad("rate range must be positive and ordered"));
    }
    let mut rng = Rng::new(seed);
    let n = rng.int_inclusive(nlo as i64, nhi as i64) as usize;
    let name = |i: usize| format!("v{i:02}");
    let mut links = Vec::new();
    for i in 0..n {
        links.push((i, (i + 1) % n));
        links.push(((i + 1) % n, i));
    }
    for i in 0..n {
        for j in 0..n {
            let adjacent = j == (i + 1) % n || i == (j + 1) % n;
            if i != j && !adjacent && rng.unit() < params.chord_density {
                links.push((i, j));
            }
        }
    }
    let nodes: Vec<usize> = (0..n).collect();
    let mut cand = Vec::new();
    for _ in 0..params.functions {
        let m = rng.int_inclusive(params.candidates.0 as i64, params.candidates.1 as i64) as usize;
        let mut c = rng.sample(&nodes, m);
        c.sort_unstable();
        cand.push(c);
    }
    let k = rng.int_inclusive(params.flows.0 as i64, params.flows.1 as i64) as usize;
    let fids: Vec<usize> = (0..params.functions).collect();
    let mut flows = Vec::new();
    for _ in 0..k {
        let len = rng.int_inclusive(params.chain_len.0 as i64, params.chain_len.1 as i64) as usize;
        let chain = rng.sample(&fids, len);
        let rate = rng.int_inclusive(params.rate.0, params.rate.1) as f64;
        let mut pool: Vec<usize> = nodes
            .iter()
            .copied()
            .filter(|i| chain.iter().all(|&f| !cand[f].contains(i)))
            .collect();
        if pool.len() < 2 {
            pool = nodes.clone();
        }
        let ends = rng.sample(&pool, 2);
        flows.push((chain, rate, ends[0], ends[1]));
    }
    let mu_bar: f64 = flows.iter().map(|f| f.1).sum();
    let c_bar: f64 = flows.iter().map(|f| f.1 * (f.0.len() as f64 + 1.0)).sum();

    let mut b = InstanceBuilder::new();
    for &i in &nodes {
        b.node(name(i));
    }
    for &(i, j) in &links {
        let c = match params.link_capacity {
            Some((lo, hi)) => rng.uniform(lo, hi),
            None => c_bar + rng.uniform(0.0, 2.0),
        };
        b.link(name(i), name(j), c);
    }
    for &i in &nodes {
        let mu = match params.node_capacity {
            Some((lo, hi)) => rng.uniform(lo, hi),
            None => mu_bar + rng.uniform(0.0, 2.0),
        };
        b.node_capacity(name(i), mu);
    }
    for (f, c) in cand.iter().enumerate() {
        b.function(function_name(f, params.functions), c.iter().map(|&i| name(i)));
    }
    for (kk, (chain, rate, s, d)) in flows.into_iter().enumerate() {
        b.flow(
            flow_name(kk, k),
            name(s),
            name(d),
            rate,
            chain.iter().map(|&f| function_name(f, params.functions)),
        );
    }
    Ok(b.build()?)
}

fn check_range(what: &str, (lo, hi): (f64, f64)) -> Result<(), GenerateError> {
    if lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi {
        Ok(())
    } else {
        Err(bad(format!("{what} range [{lo}, {hi}] is invalid")))
    }
}

fn digits(n: usize) -> usize {
    n.max(1).saturating_sub(1).to_string().len()
}

/// Zero-padded so that lexical and numeric order agree.
fn function_name(f: usize, total: usize) -> String {
    format!("f{:0w$}", f + 1, w = digits(total + 1))
}

fn flow_name(k: usize, total: usize) -> String {
    format!("k{:0w$}", k + 1, w = digits(total + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_meshes() {
        let p = MeshParams {
            rows: 2,
            cols: 2,
            band: 2,
            functions: 1,
            nodes_per_function: 1,
            flows: 0,
            chain_len: 0,
            ..MeshParams::default()
        };
        let m = gen_mesh(&p, 1).unwrap();
        assert_eq!(m.num_nodes(), 4);
        assert_eq!(m.num_links(), 12);
        let p = MeshParams { rows: 1, cols: 2, ..p };
        assert_eq!(gen_mesh(&p, 1).unwrap().num_links(), 2);
    }

    #[test]
    fn sub_interval_arithmetic() {
        let (lo, hi) = sub_interval((1.0, 55.0), 10, 1);
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 6.4).abs() < 1e-12);
        let (lo, hi) = sub_interval((1.0, 55.0), 10, 10);
        assert!((lo - 49.6).abs() < 1e-12 && (hi - 55.0).abs() < 1e-12);
    }

    #[test]
    fn matching_enumerator() {
        let yes = TripleSet {
            k: 2,
            triples: vec![(0, 0, 0), (1, 1, 1)],
        };
        let no = TripleSet {
            k: 2,
            triples: vec![(0, 0, 0), (0, 1, 1)],
        };
        assert!(has_perfect_matching(&yes));
        assert!(!has_perfect_matching(&no));
    }

    #[test]
    fn names_sort_numerically() {
        assert_eq!(function_name(0, 5), "f1");
        assert_eq!(function_name(9, 12), "f10");
        assert_eq!(function_name(0, 12), "f01");
    }
}
