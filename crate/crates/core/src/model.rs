//! Instances, placements, routings and solutions.
//!
//! Node and function ids are strings at the edges of the system and dense
//! indices everywhere else. A [`ProblemInstance`] owns the mapping.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::verify::ViolationReport;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("unknown node `{name}` referenced by {context}")]
    UnknownNode { name: String, context: String },
    #[error("self-loop link on node `{0}`")]
    SelfLoop(String),
    #[error("duplicate link `{0}` -> `{1}`")]
    DuplicateLink(String, String),
    #[error("{what} must be a finite non-negative number, got {value}")]
    BadCapacity { what: String, value: f64 },
    #[error("duplicate function `{0}`")]
    DuplicateFunction(String),
    #[error("function `{0}` has no candidate nodes")]
    EmptyFunction(String),
    #[error("flow `{flow}` references unknown function `{function}`")]
    UnknownFunction { flow: String, function: String },
    #[error("flow `{0}` has identical source and destination")]
    SourceIsDestination(String),
    #[error("flow `{flow}` has rate {rate}; rates must be finite and positive")]
    BadRate { flow: String, rate: f64 },
    #[error("duplicate flow id `{0}`")]
    DuplicateFlow(String),
    #[error("flow `{flow}` repeats node `{node}` across chain positions")]
    ReusedNode { flow: String, node: String },
    #[error("flow `{flow}` position {position}: node `{node}` cannot provide the function")]
    NotACandidate {
        flow: String,
        position: usize,
        node: String,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub from: usize,
    pub to: usize,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Function {
    pub name: String,
    /// Candidate nodes `V_f`, sorted ascending and unique.
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceRequest {
    pub id: String,
    pub src: usize,
    pub dst: usize,
    pub rate: f64,
    /// Function indices, in processing order.
    pub chain: Vec<usize>,
}

impl ServiceRequest {
    /// Chain length `n`; the flow has `n + 1` virtual stages.
    pub fn len(&self) -> usize {
        self.chain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chain.is_empty()
    }

    pub fn stages(&self) -> usize {
        self.chain.len() + 1
    }
}

/// A validated problem instance. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    nodes: Vec<String>,
    node_index: HashMap<String, usize>,
    links: Vec<Link>,
    node_caps: Vec<f64>,
    functions: Vec<Function>,
    flows: Vec<ServiceRequest>,
    out_links: Vec<Vec<usize>>,
    in_links: Vec<Vec<usize>>,
    function_node: Vec<bool>,
}

impl ProblemInstance {
    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_name(&self, i: usize) -> &str {
        &self.nodes[i]
    }

    pub fn node_id(&self, name: &str) -> Option<usize> {
        self.node_index.get(name).copied()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn node_caps(&self) -> &[f64] {
        &self.node_caps
    }

    pub fn functions(&self) -> &[Function] {
        &self.functions
    }

    pub fn function_id(&self, name: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.name == name)
    }

    pub fn flows(&self) -> &[ServiceRequest] {
        &self.flows
    }

    pub fn num_flows(&self) -> usize {
        self.flows.len()
    }

    pub fn out_links(&self, i: usize) -> &[usize] {
        &self.out_links[i]
    }

    pub fn in_links(&self, i: usize) -> &[usize] {
        &self.in_links[i]
    }

    /// True when the node appears in some `V_f`.
    pub fn is_function_node(&self, i: usize) -> bool {
        self.function_node[i]
    }

    /// Candidate set of chain position `s` (0-based) of flow `k`.
    pub fn candidates(&self, k: usize, s: usize) -> &[usize] {
        &self.functions[self.flows[k].chain[s]].nodes
    }

    /// Whether node `i` can serve position `s` of flow `k` in any routable
    /// solution: the first function cannot sit on the source (stage 0 must
    /// leave it) and the last cannot sit on the destination.
    pub fn allowed_host(&self, k: usize, s: usize, i: usize) -> bool {
        let flow = &self.flows[k];
        !(s == 0 && i == flow.src) && !(s + 1 == flow.chain.len() && i == flow.dst)
    }

    pub fn link_between(&self, from: usize, to: usize) -> Option<usize> {
        self.out_links[from].iter().copied().find(|&l| self.links[l].to == to)
    }

    pub fn max_rate(&self) -> f64 {
        self.flows.iter().map(|f| f.rate).fold(0.0, f64::max)
    }

    pub fn max_node_cap(&self) -> f64 {
        self.node_caps.iter().copied().fold(0.0, f64::max)
    }

    /// Number of `(k, s)` placement blocks.
    pub fn num_blocks(&self) -> usize {
        self.flows.iter().map(|f| f.chain.len()).sum()
    }
}

/// Incremental construction of a [`ProblemInstance`] by name.
#[derive(Debug, Clone, Default)]
pub struct InstanceBuilder {
    nodes: Vec<String>,
    links: Vec<(String, String, f64)>,
    caps: Vec<(String, f64)>,
    functions: Vec<(String, Vec<String>)>,
    flows: Vec<(String, String, String, f64, Vec<String>)>,
}

impl InstanceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(&mut self, name: impl Into<String>) -> &mut Self {
        self.nodes.push(name.into());
        self
    }

    pub fn link(&mut self, from: impl Into<String>, to: impl Into<String>, capacity: f64) -> &mut Self {
        self.links.push((from.into(), to.into(), capacity));
        self
    }

    pub fn node_capacity(&mut self, node: impl Into<String>, capacity: f64) -> &mut Self {
        self.caps.push((node.into(), capacity));
        self
    }

    pub fn function<S: Into<String>>(
        &mut self,
        name: impl Into<String>,
        nodes: impl IntoIterator<Item = S>,
    ) -> &mut Self {
        self.functions
            .push((name.into(), nodes.into_iter().map(Into::into).collect()));
        self
    }

    pub fn flow<S: Into<String>>(
        &mut self,
        id: impl Into<String>,
        src: impl Into<String>,
        dst: impl Into<String>,
        rate: f64,
        chain: impl IntoIterator<Item = S>,
    ) -> &mut Self {
        self.flows.push((
            id.into(),
            src.into(),
            dst.into(),
            rate,
            chain.into_iter().map(Into::into).collect(),
        ));
        self
    }

    /// Validates every invariant and produces the instance.
    ///
    /// Functions are stored sorted by name so that the internal order does
    /// not depend on how the instance was assembled.
    pub fn build(&self) -> Result<ProblemInstance, ModelError> {
        let mut node_index = HashMap::with_capacity(self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            if node_index.insert(n.clone(), i).is_some() {
                return Err(ModelError::DuplicateNode(n.clone()));
            }
        }
        let lookup = |name: &str, context: &str| {
            node_index.get(name).copied().ok_or_else(|| ModelError::UnknownNode {
                name: name.to_string(),
                context: context.to_string(),
            })
        };

        let mut links = Vec::with_capacity(self.links.len());
        let mut seen = BTreeSet::new();
        for (from, to, cap) in &self.links {
            let ctx = format!("link {from}->{to}");
            let a = lookup(from, &ctx)?;
            let b = lookup(to, &ctx)?;
            if a == b {
                return Err(ModelError::SelfLoop(from.clone()));
            }
            if !seen.insert((a, b)) {
                return Err(ModelError::DuplicateLink(from.clone(), to.clone()));
            }
            check_capacity(&ctx, *cap)?;
            links.push(Link {
                from: a,
                to: b,
                capacity: *cap,
            });
        }

        let mut node_caps = vec![0.0; self.nodes.len()];
        for (node, cap) in &self.caps {
            let ctx = format!("capacity of node {node}");
            let i = lookup(node, &ctx)?;
            check_capacity(&ctx, *cap)?;
            node_caps[i] = *cap;
        }

        let mut order: Vec<usize> = (0..self.functions.len()).collect();
        order.sort_by(|&a, &b| self.functions[a].0.cmp(&self.functions[b].0));
        let mut functions = Vec::with_capacity(order.len());
        let mut function_index = HashMap::new();
        let mut function_node = vec![false; self.nodes.len()];
        for &o in &order {
            let (name, members) = &self.functions[o];
            if function_index.insert(name.clone(), functions.len()).is_some() {
                return Err(ModelError::DuplicateFunction(name.clone()));
            }
            let mut nodes = Vec::with_capacity(members.len());
            for m in members {
                nodes.push(lookup(m, &format!("function {name}"))?);
            }
            nodes.sort_unstable();
            nodes.dedup();
            for &i in &nodes {
                function_node[i] = true;
            }
            functions.push(Function {
                name: name.clone(),
                nodes,
            });
        }

        let mut flows = Vec::with_capacity(self.flows.len());
        let mut flow_ids = BTreeSet::new();
        for (id, src, dst, rate, chain) in &self.flows {
            if !flow_ids.insert(id.clone()) {
                return Err(ModelError::DuplicateFlow(id.clone()));
            }
            let ctx = format!("flow {id}");
            let s = lookup(src, &ctx)?;
            let d = lookup(dst, &ctx)?;
            if s == d {
                return Err(ModelError::SourceIsDestination(id.clone()));
            }
            if !(rate.is_finite() && *rate > 0.0) {
                return Err(ModelError::BadRate {
                    flow: id.clone(),
                    rate: *rate,
                });
            }
            let mut c = Vec::with_capacity(chain.len());
            for f in chain {
                let fi = *function_index.get(f).ok_or_else(|| ModelError::UnknownFunction {
                    flow: id.clone(),
                    function: f.clone(),
                })?;
                if functions[fi].nodes.is_empty() {
                    return Err(ModelError::EmptyFunction(f.clone()));
                }
                c.push(fi);
            }
            flows.push(ServiceRequest {
                id: id.clone(),
                src: s,
                dst: d,
                rate: *rate,
                chain: c,
            });
        }

        let mut out_links = vec![Vec::new(); self.nodes.len()];
        let mut in_links = vec![Vec::new(); self.nodes.len()];
        for (l, link) in links.iter().enumerate() {
            out_links[link.from].push(l);
            in_links[link.to].push(l);
        }

        Ok(ProblemInstance {
            nodes: self.nodes.clone(),
            node_index,
            links,
            node_caps,
            functions,
            flows,
            out_links,
            in_links,
            function_node,
        })
    }
}

fn check_capacity(what: &str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(ModelError::BadCapacity {
            what: what.to_string(),
            value,
        })
    }
}

/// Relaxed placement values `x_{i,f_s}(k)`.
///
/// `values[k][s][j]` belongs to node `instance.candidates(k, s)[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalPlacement {
    pub values: Vec<Vec<Vec<f64>>>,
    pub aggregates: Option<Aggregates>,
}

/// Cut variables `x_{i,f}` and `x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregates {
    /// `node_function[f][j]` for node `functions[f].nodes[j]`.
    pub node_function: Vec<Vec<f64>>,
    /// One entry per node; non-function nodes stay at zero.
    pub node: Vec<f64>,
}

impl FractionalPlacement {
    /// Every block spread uniformly over its candidates.
    pub fn uniform(instance: &ProblemInstance) -> Self {
        let values = (0..instance.num_flows())
            .map(|k| {
                (0..instance.flows()[k].len())
                    .map(|s| {
                        let m = instance.candidates(k, s).len();
                        vec![1.0 / m as f64; m]
                    })
                    .collect()
            })
            .collect();
        FractionalPlacement {
            values,
            aggregates: None,
        }
    }

    pub fn check_shape(&self, instance: &ProblemInstance) -> Result<(), ModelError> {
        if self.values.len() != instance.num_flows() {
            return Err(ModelError::Shape(format!(
                "{} placement flows for {} instance flows",
                self.values.len(),
                instance.num_flows()
            )));
        }
        for (k, blocks) in self.values.iter().enumerate() {
            if blocks.len() != instance.flows()[k].len() {
                return Err(ModelError::Shape(format!("flow {k} chain length")));
            }
            for (s, b) in blocks.iter().enumerate() {
                if b.len() != instance.candidates(k, s).len() {
                    return Err(ModelError::Shape(format!("flow {k} block {s} size")));
                }
            }
        }
        Ok(())
    }

    /// Largest distance of any entry to `{0, 1}`.
    pub fn binarity_gap(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .flatten()
            .map(|&x| x.min(1.0 - x).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn is_binary(&self, tol: f64) -> bool {
        self.binarity_gap() <= tol
    }

    /// Largest `|sum - 1|` over all blocks.
    pub fn block_sum_error(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .map(|b| (b.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest excess of `sum_s x_{i,f_s}(k)` over one.
    pub fn reuse_excess(&self, instance: &ProblemInstance) -> f64 {
        let mut worst: f64 = 0.0;
        let mut acc: HashMap<usize, f64> = HashMap::new();
        for (k, blocks) in self.values.iter().enumerate() {
            acc.clear();
            for (s, b) in blocks.iter().enumerate() {
                for (j, &x) in b.iter().enumerate() {
                    *acc.entry(instance.candidates(k, s)[j]).or_default() += x;
                }
            }
            for v in acc.values() {
                worst = worst.max(v - 1.0);
            }
        }
        worst
    }

    /// Picks the largest entry of every block (ties: smallest node id).
    pub fn argmax_placement(&self, instance: &ProblemInstance) -> Placement {
        let assignment = self
            .values
            .iter()
            .enumerate()
            .map(|(k, blocks)| {
                blocks
                    .iter()
                    .enumerate()
                    .map(|(s, b)| {
                        let cands = instance.candidates(k, s);
                        let mut best = 0;
                        for j in 1..b.len() {
                            if b[j] > b[best] {
                                best = j;
                            }
                        }
                        cands[best]
                    })
                    .collect()
            })
            .collect();
        Placement { assignment }
    }

    /// `sum_k sum_s lambda(k) x_{i,f_s}(k)` per node.
    pub fn node_loads(&self, instance: &ProblemInstance) -> Vec<f64> {
        let mut load = vec![0.0; instance.num_nodes()];
        for (k, blocks) in self.values.iter().enumerate() {
            let rate = instance.flows()[k].rate;
            for (s, b) in blocks.iter().enumerate() {
                for (j, &x) in b.iter().enumerate() {
                    load[instance.candidates(k, s)[j]] += rate * x;
                }
            }
        }
        load
    }
}

/// Binary placement: `assignment[k][s]` is the node serving position `s`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Placement {
    pub assignment: Vec<Vec<usize>>,
}

impl Placement {
    /// Checks candidate membership and the no-reuse rule per flow.
    pub fn validate(&self, instance: &ProblemInstance) -> Result<(), ModelError> {
        if self.assignment.len() != instance.num_flows() {
            return Err(ModelError::Shape(format!(
                "{} placement flows for {} instance flows",
                self.assignment.len(),
                instance.num_flows()
            )));
        }
        for (k, nodes) in self.assignment.iter().enumerate() {
            let flow = &instance.flows()[k];
            if nodes.len() != flow.len() {
                return Err(ModelError::Shape(format!("flow {} chain length", flow.id)));
            }
            for (s, &i) in nodes.iter().enumerate() {
                if instance.candidates(k, s).binary_search(&i).is_err() {
                    return Err(ModelError::NotACandidate {
                        flow: flow.id.clone(),
                        position: s,
                        node: instance.node_name(i).to_string(),
                    });
                }
                if nodes[..s].contains(&i) {
                    return Err(ModelError::ReusedNode {
                        flow: flow.id.clone(),
                        node: instance.node_name(i).to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn to_fractional(&self, instance: &ProblemInstance) -> FractionalPlacement {
        let values = self
            .assignment
            .iter()
            .enumerate()
            .map(|(k, nodes)| {
                nodes
                    .iter()
                    .enumerate()
                    .map(|(s, &i)| {
                        instance
                            .candidates(k, s)
                            .iter()
                            .map(|&c| if c == i { 1.0 } else { 0.0 })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        FractionalPlacement {
            values,
            aggregates: None,
        }
    }

    /// Node sequence of flow `k`: source, placed nodes, destination.
    pub fn waypoints(&self, instance: &ProblemInstance, k: usize) -> Vec<usize> {
        let flow = &instance.flows()[k];
        let mut w = Vec::with_capacity(flow.len() + 2);
        w.push(flow.src);
        w.extend_from_slice(&self.assignment[k]);
        w.push(flow.dst);
        w
    }

    pub fn node_loads(&self, instance: &ProblemInstance) -> Vec<f64> {
        let mut load = vec![0.0; instance.num_nodes()];
        for (k, nodes) in self.assignment.iter().enumerate() {
            for &i in nodes {
                load[i] += instance.flows()[k].rate;
            }
        }
        load
    }
}

/// Virtual-flow rates `rates[k][s][l]` for stage `s` in `0..=n` and link `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingPlan {
    pub rates: Vec<Vec<Vec<f64>>>,
}

impl RoutingPlan {
    pub fn zeros(instance: &ProblemInstance) -> Self {
        RoutingPlan {
            rates: instance
                .flows()
                .iter()
                .map(|f| vec![vec![0.0; instance.num_links()]; f.stages()])
                .collect(),
        }
    }

    /// Per-flow rate `r_{ij}(k)`: the sum over stages.
    pub fn flow_rate(&self, k: usize, link: usize) -> f64 {
        self.rates[k].iter().map(|stage| stage[link]).sum()
    }

    /// `sum_k r_{ij}(k)` for every link.
    pub fn link_loads(&self, num_links: usize) -> Vec<f64> {
        let mut load = vec![0.0; num_links];
        for stages in &self.rates {
            for stage in stages {
                for (l, &r) in stage.iter().enumerate() {
                    load[l] += r;
                }
            }
        }
        load
    }

    /// Total link flow `g(r)`.
    pub fn total(&self) -> f64 {
        self.rates.iter().flatten().flatten().sum()
    }

    pub fn check_shape(&self, instance: &ProblemInstance) -> Result<(), ModelError> {
        if self.rates.len() != instance.num_flows() {
            return Err(ModelError::Shape(format!(
                "{} routed flows for {} instance flows",
                self.rates.len(),
                instance.num_flows()
            )));
        }
        for (k, stages) in self.rates.iter().enumerate() {
            if stages.len() != instance.flows()[k].stages() {
                return Err(ModelError::Shape(format!("flow {k} stage count")));
            }
            if stages.iter().any(|s| s.len() != instance.num_links()) {
                return Err(ModelError::Shape(format!("flow {k} link count")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlacementKind {
    Binary(Placement),
    Fractional(FractionalPlacement),
}

impl PlacementKind {
    pub fn to_fractional(&self, instance: &ProblemInstance) -> FractionalPlacement {
        match self {
            PlacementKind::Binary(p) => p.to_fractional(instance),
            PlacementKind::Fractional(x) => x.clone(),
        }
    }

    pub fn as_binary(&self) -> Option<&Placement> {
        match self {
            PlacementKind::Binary(p) => Some(p),
            PlacementKind::Fractional(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolutionStatus {
    OptimalRelaxation,
    BinaryFeasible,
    BinaryWithViolations,
    Infeasible,
}

impl SolutionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolutionStatus::OptimalRelaxation => "optimal-relaxation",
            SolutionStatus::BinaryFeasible => "binary-feasible",
            SolutionStatus::BinaryWithViolations => "binary-with-violations",
            SolutionStatus::Infeasible => "infeasible",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "optimal-relaxation" => SolutionStatus::OptimalRelaxation,
            "binary-feasible" => SolutionStatus::BinaryFeasible,
            "binary-with-violations" => SolutionStatus::BinaryWithViolations,
            "infeasible" => SolutionStatus::Infeasible,
            _ => return None,
        })
    }
}

impl std::fmt::Display for SolutionStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: SolutionStatus,
    pub placement: PlacementKind,
    pub routing: RoutingPlan,
    /// `g(r)`, recomputed from `routing`.
    pub objective: f64,
    /// Link-violation variable of the repair LP, when one was solved.
    pub delta: Option<f64>,
    pub violations: Option<ViolationReport>,
    pub wall_time_ms: f64,
    /// Flows a heuristic could not serve.
    pub failed_flows: Vec<usize>,
    /// LP solves spent producing this solution.
    pub lp_solves: usize,
}

impl Solution {
    pub fn new(status: SolutionStatus, placement: PlacementKind, routing: RoutingPlan) -> Self {
        let objective = routing.total();
        Solution {
            status,
            placement,
            routing,
            objective,
            delta: None,
            violations: None,
            wall_time_ms: 0.0,
            failed_flows: Vec::new(),
            lp_solves: 0,
        }
    }

    /// An infeasible verdict with an all-zero routing and no placement values.
    pub fn infeasible(instance: &ProblemInstance) -> Self {
        let placement = Placement {
            assignment: instance.flows().iter().map(|_| Vec::new()).collect(),
        };
        let mut sol = Solution::new(
            SolutionStatus::Infeasible,
            PlacementKind::Binary(placement),
            RoutingPlan::zeros(instance),
        );
        sol.objective = 0.0;
        sol
    }
}
