//! LP builders for the relaxation, the penalized subproblem and routing with
//! a fixed placement.
//!
//! Columns come in blocks: virtual-flow rates per `(flow, stage, link)`,
//! then placement values per `(flow, position, candidate)`, then the cut
//! aggregates, then the optional repair variable `Delta`.
//!
//! Conservation is written once per stage and node. Stage `s` of flow `k`
//! carries the traffic after `s` functions have been applied, so it leaves
//! the node serving position `s` (the source for `s = 0`) and enters the node
//! serving position `s + 1` (the destination for `s = n`):
//!
//! `out_s(i) - in_s(i) = lambda * (src_s(i) - snk_s(i))`.
//!
//! The explicit source-out and sink-in rows are kept, and stage 0 may not
//! enter the source nor stage `n` leave the destination. Their counterparts
//! at function nodes, "the host of position `s` sends out at least
//! `lambda x` of stage `s`" and "the host of position `s + 1` takes in at
//! least `lambda x`", are added wherever the net row does not imply them,
//! i.e. at nodes that are candidates for two consecutive positions.

use std::collections::{BTreeMap, VecDeque};

use netslice_lp::{LinearProgram, Relation, VarId};
use thiserror::Error;

use crate::model::{FractionalPlacement, Placement, ProblemInstance, RoutingPlan};
use crate::penalty::{derivative, PenaltyParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormulationError {
    #[error("flow `{flow}` stage {stage}: no path from `{from}` to `{to}`")]
    Disconnected {
        flow: String,
        stage: usize,
        from: String,
        to: String,
    },
    #[error("penalty gradient is infinite: epsilon = 0 with a zero placement value")]
    SingularGradient,
    #[error("invalid penalty parameters: {0}")]
    BadParams(String),
    #[error("placement does not fit the instance: {0}")]
    Placement(String),
    #[error("{0}")]
    Shape(String),
}

/// Semantic meaning of an LP column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    /// `r_ij(k, f_s)`.
    Rate { flow: usize, stage: usize, link: usize },
    /// `x_{i, f_s}(k)` where `s` is the 0-based chain position.
    Place { flow: usize, position: usize, node: usize },
    /// Cut aggregate `x_{i,f}`.
    NodeFunction { node: usize, function: usize },
    /// Cut aggregate `x_i`.
    NodeActive { node: usize },
    /// Shared link-capacity slack of the repair LP.
    Delta,
}

/// Meaning of an LP row, for dimension audits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowKind {
    Conservation,
    SourceOut,
    SinkIn,
    /// `out_s(i) >= lambda x_{i,f_s}(k)` at a candidate of two consecutive positions.
    HostOut,
    /// `in_s(i) >= lambda x_{i,f_(s+1)}(k)` at the same nodes.
    HostIn,
    Assignment,
    NoReuse,
    LinkCapacity,
    NodeCapacity,
    /// `x_{i,f}(k) <= x_{i,f}`.
    CutPlacement,
    /// `x_{i,f} <= x_i`.
    CutActivation,
    /// `sum lambda x_{i,f}(k) <= mu_i x_i`.
    CutNode,
    /// `sum_k lambda x_{i,f}(k) <= mu_i x_{i,f}`.
    CutFunction,
}

/// Bidirectional map between LP columns and [`Var`]s.
#[derive(Debug, Clone)]
pub struct VariableIndex {
    vars: Vec<Var>,
    flows: Vec<usize>,
    slot: Vec<Option<usize>>,
    num_links: usize,
    rate_base: Vec<usize>,
    /// `[slot][position]` first column of the block, when placement is free.
    place_base: Vec<Vec<usize>>,
    node_function: BTreeMap<(usize, usize), usize>,
    node_active: BTreeMap<usize, usize>,
    delta: Option<usize>,
}

impl VariableIndex {
    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn var(&self, col: VarId) -> Var {
        self.vars[col.0]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// Instance flows present in the model, in column order.
    pub fn flows(&self) -> &[usize] {
        &self.flows
    }

    pub fn rate(&self, flow: usize, stage: usize, link: usize) -> Option<VarId> {
        let slot = self.slot.get(flow).copied().flatten()?;
        Some(VarId(self.rate_base[slot] + stage * self.num_links + link))
    }

    /// Column of candidate `j` of block `(flow, position)`.
    pub fn place(&self, flow: usize, position: usize, j: usize) -> Option<VarId> {
        let slot = self.slot.get(flow).copied().flatten()?;
        let base = self.place_base.get(slot)?.get(position)?;
        Some(VarId(base + j))
    }

    pub fn node_function(&self, node: usize, function: usize) -> Option<VarId> {
        self.node_function.get(&(node, function)).map(|&c| VarId(c))
    }

    pub fn node_active(&self, node: usize) -> Option<VarId> {
        self.node_active.get(&node).map(|&c| VarId(c))
    }

    pub fn delta(&self) -> Option<VarId> {
        self.delta.map(VarId)
    }

    /// Inverse of [`VariableIndex::var`]. `Place` uses node ids, not
    /// candidate offsets.
    pub fn col(&self, instance: &ProblemInstance, var: Var) -> Option<VarId> {
        match var {
            Var::Rate { flow, stage, link } => {
                let flows = instance.flows();
                if flow >= flows.len() || stage >= flows[flow].stages() || link >= self.num_links {
                    return None;
                }
                self.rate(flow, stage, link)
            }
            Var::Place { flow, position, node } => {
                if flow >= instance.num_flows() || position >= instance.flows()[flow].len() {
                    return None;
                }
                let j = instance.candidates(flow, position).binary_search(&node).ok()?;
                self.place(flow, position, j)
            }
            Var::NodeFunction { node, function } => self.node_function(node, function),
            Var::NodeActive { node } => self.node_active(node),
            Var::Delta => self.delta(),
        }
    }

    pub fn has_placement_columns(&self) -> bool {
        !self.place_base.is_empty() && self.place_base.iter().any(|b| !b.is_empty())
    }

    /// Rates of every included flow; excluded flows stay zero.
    pub fn extract_routing(&self, instance: &ProblemInstance, values: &[f64]) -> RoutingPlan {
        let mut plan = RoutingPlan::zeros(instance);
        for (slot, &k) in self.flows.iter().enumerate() {
            for s in 0..instance.flows()[k].stages() {
                let base = self.rate_base[slot] + s * self.num_links;
                for l in 0..self.num_links {
                    plan.rates[k][s][l] = values[base + l].max(0.0);
                }
            }
        }
        plan
    }

    /// Placement values of the included flows, clamped to `[0, 1]`.
    /// Requires a model with free placement columns.
    pub fn extract_placement(&self, instance: &ProblemInstance, values: &[f64]) -> FractionalPlacement {
        let mut x = FractionalPlacement::uniform(instance);
        for (slot, &k) in self.flows.iter().enumerate() {
            for (s, &base) in self.place_base[slot].iter().enumerate() {
                for j in 0..instance.candidates(k, s).len() {
                    x.values[k][s][j] = values[base + j].clamp(0.0, 1.0);
                }
            }
        }
        if !self.node_active.is_empty() {
            let node_function = instance
                .functions()
                .iter()
                .enumerate()
                .map(|(f, func)| {
                    func.nodes
                        .iter()
                        .map(|&i| values[self.node_function[&(i, f)]])
                        .collect()
                })
                .collect();
            let mut node = vec![0.0; instance.num_nodes()];
            for (&i, &c) in &self.node_active {
                node[i] = values[c];
            }
            x.aggregates = Some(crate::model::Aggregates { node_function, node });
        }
        x
    }
}

/// Row and column counts of a built model.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dimensions {
    pub rate_vars: usize,
    pub placement_vars: usize,
    pub aggregate_vars: usize,
    pub delta_vars: usize,
    pub rows: BTreeMap<RowKind, usize>,
    pub equality_rows: usize,
    pub inequality_rows: usize,
}

impl Dimensions {
    pub fn rows_of(&self, kind: RowKind) -> usize {
        self.rows.get(&kind).copied().unwrap_or(0)
    }
}

/// An LP with its column map and row labels.
#[derive(Debug, Clone)]
pub struct Model {
    pub lp: LinearProgram,
    pub index: VariableIndex,
    pub row_kinds: Vec<RowKind>,
    base_objective: Vec<f64>,
}

impl Model {
    pub fn dimensions(&self) -> Dimensions {
        let mut d = Dimensions::default();
        for v in self.index.vars() {
            match v {
                Var::Rate { .. } => d.rate_vars += 1,
                Var::Place { .. } => d.placement_vars += 1,
                Var::NodeFunction { .. } | Var::NodeActive { .. } => d.aggregate_vars += 1,
                Var::Delta => d.delta_vars += 1,
            }
        }
        for (row, kind) in self.lp.constraints().iter().zip(&self.row_kinds) {
            *d.rows.entry(*kind).or_default() += 1;
            if row.relation == Relation::Eq {
                d.equality_rows += 1;
            } else {
                d.inequality_rows += 1;
            }
        }
        d
    }

    /// Resets the objective to `g(r)` (plus `tau * Delta` when present) and
    /// adds the linearized penalty `sigma * grad P(x_prev) . x`.
    pub fn set_penalty_objective(
        &mut self,
        instance: &ProblemInstance,
        x_prev: &FractionalPlacement,
        params: &PenaltyParams,
    ) -> Result<(), FormulationError> {
        params.validate().map_err(FormulationError::BadParams)?;
        x_prev
            .check_shape(instance)
            .map_err(|e| FormulationError::Shape(e.to_string()))?;
        let mut objective = self.base_objective.clone();
        if params.sigma > 0.0 {
            for &k in self.index.flows() {
                for s in 0..instance.flows()[k].len() {
                    for (j, &y) in x_prev.values[k][s].iter().enumerate() {
                        if params.epsilon == 0.0 && y <= 0.0 {
                            return Err(FormulationError::SingularGradient);
                        }
                        if let Some(col) = self.index.place(k, s, j) {
                            objective[col.0] += params.sigma * derivative(y, params.p, params.epsilon);
                        }
                    }
                }
            }
        }
        for (j, c) in objective.into_iter().enumerate() {
            self.lp.set_objective(VarId(j), c);
        }
        Ok(())
    }

    pub fn routing(&self, instance: &ProblemInstance, values: &[f64]) -> RoutingPlan {
        self.index.extract_routing(instance, values)
    }

    pub fn placement(&self, instance: &ProblemInstance, values: &[f64]) -> FractionalPlacement {
        self.index.extract_placement(instance, values)
    }
}

/// Per-block bounds on placement values, `[flow][position][candidate]`.
pub type PlacementBounds = Vec<Vec<Vec<(f64, f64)>>>;

/// Knobs shared by every builder.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuildOptions<'a> {
    /// Add the aggregate variables and the strengthened capacity rows.
    pub with_cuts: bool,
    /// Route a given placement instead of choosing one.
    pub fixed: Option<&'a Placement>,
    /// Add `Delta` to every link row with this objective weight.
    pub repair_weight: Option<f64>,
    /// Only model these flows (default: all, in instance order).
    pub flows: Option<&'a [usize]>,
    /// Override link capacities (residual capacities, for instance).
    pub link_capacities: Option<&'a [f64]>,
    /// Tighter bounds on free placement columns.
    pub placement_bounds: Option<&'a PlacementBounds>,
}

/// Builds a model according to `opts`. See the module docs for the rows.
pub fn build(instance: &ProblemInstance, opts: &BuildOptions) -> Result<Model, FormulationError> {
    let all: Vec<usize>;
    let flows: &[usize] = match opts.flows {
        Some(f) => f,
        None => {
            all = (0..instance.num_flows()).collect();
            &all
        }
    };
    if let Some(p) = opts.fixed {
        p.validate(instance)
            .map_err(|e| FormulationError::Placement(e.to_string()))?;
        for &k in flows {
            check_connected(instance, p, k)?;
        }
    }
    let caps: Vec<f64> = match opts.link_capacities {
        Some(c) => {
            if c.len() != instance.num_links() {
                return Err(FormulationError::Shape("link capacity override length".into()));
            }
            c.to_vec()
        }
        None => instance.links().iter().map(|l| l.capacity).collect(),
    };

    let nl = instance.num_links();
    let nn = instance.num_nodes();
    let mut lp = LinearProgram::new();
    let mut vars = Vec::new();
    let mut slot = vec![None; instance.num_flows()];
    let mut rate_base = Vec::with_capacity(flows.len());
    let mut place_base: Vec<Vec<usize>> = Vec::with_capacity(flows.len());
    let mut row_kinds = Vec::new();

    for (si, &k) in flows.iter().enumerate() {
        slot[k] = Some(si);
        let flow = &instance.flows()[k];
        rate_base.push(lp.num_variables());
        for s in 0..flow.stages() {
            for (l, link) in instance.links().iter().enumerate() {
                // Stage 0 never re-enters the source, the last stage never
                // leaves the destination.
                let closed = (s == 0 && link.to == flow.src) || (s == flow.len() && link.from == flow.dst);
                let ub = if closed { 0.0 } else { f64::INFINITY };
                let v = lp.add_variable(format!("r_{k}_{s}_{l}"), 0.0, ub);
                lp.set_objective(v, 1.0);
                vars.push(Var::Rate {
                    flow: k,
                    stage: s,
                    link: l,
                });
            }
        }
    }
    if opts.fixed.is_none() {
        for (si, &k) in flows.iter().enumerate() {
            let mut bases = Vec::new();
            for s in 0..instance.flows()[k].len() {
                bases.push(lp.num_variables());
                for (j, &i) in instance.candidates(k, s).iter().enumerate() {
                    let (lo, hi) = opts.placement_bounds.map(|b| b[k][s][j]).unwrap_or((0.0, 1.0));
                    lp.add_variable(format!("x_{k}_{s}_{i}"), lo, hi);
                    vars.push(Var::Place {
                        flow: k,
                        position: s,
                        node: i,
                    });
                }
            }
            debug_assert_eq!(place_base.len(), si);
            place_base.push(bases);
        }
    }
    let mut node_function = BTreeMap::new();
    let mut node_active = BTreeMap::new();
    if opts.with_cuts && opts.fixed.is_none() {
        for (f, func) in instance.functions().iter().enumerate() {
            for &i in &func.nodes {
                let v = lp.add_variable(format!("xf_{i}_{f}"), 0.0, 1.0);
                node_function.insert((i, f), v.0);
                vars.push(Var::NodeFunction { node: i, function: f });
            }
        }
        for i in 0..nn {
            if instance.is_function_node(i) {
                let v = lp.add_variable(format!("xa_{i}"), 0.0, 1.0);
                node_active.insert(i, v.0);
                vars.push(Var::NodeActive { node: i });
            }
        }
    }
    let delta = opts.repair_weight.map(|tau| {
        let v = lp.add_variable("delta", 0.0, f64::INFINITY);
        lp.set_objective(v, tau);
        vars.push(Var::Delta);
        v.0
    });

    let index = VariableIndex {
        vars,
        flows: flows.to_vec(),
        slot,
        num_links: nl,
        rate_base,
        place_base,
        node_function,
        node_active,
        delta,
    };

    // Conservation, source and sink rows.
    for &k in flows {
        let flow = &instance.flows()[k];
        let lambda = flow.rate;
        let n = flow.len();
        let fixed = opts.fixed.map(|p| &p.assignment[k]);
        for s in 0..=n {
            let mut coeffs_by_node: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); nn];
            let mut rhs = vec![0.0; nn];
            for l in 0..nl {
                let col = index.rate(k, s, l).expect("flow is modelled");
                let link = &instance.links()[l];
                coeffs_by_node[link.from].push((col, 1.0));
                coeffs_by_node[link.to].push((col, -1.0));
            }
            // Supply side: the source or the node serving position s.
            if s == 0 {
                rhs[flow.src] += lambda;
            } else if let Some(nodes) = fixed {
                rhs[nodes[s - 1]] += lambda;
            } else {
                for (j, &i) in instance.candidates(k, s - 1).iter().enumerate() {
                    coeffs_by_node[i].push((index.place(k, s - 1, j).unwrap(), -lambda));
                }
            }
            // Demand side: the node serving position s + 1, or the destination.
            if s == n {
                rhs[flow.dst] -= lambda;
            } else if let Some(nodes) = fixed {
                rhs[nodes[s]] -= lambda;
            } else {
                for (j, &i) in instance.candidates(k, s).iter().enumerate() {
                    coeffs_by_node[i].push((index.place(k, s, j).unwrap(), lambda));
                }
            }
            for (i, coeffs) in coeffs_by_node.into_iter().enumerate() {
                lp.add_constraint(format!("cons_{k}_{s}_{i}"), coeffs, Relation::Eq, rhs[i]);
                row_kinds.push(RowKind::Conservation);
            }
        }
        let out: Vec<(VarId, f64)> = instance
            .out_links(flow.src)
            .iter()
            .map(|&l| (index.rate(k, 0, l).unwrap(), 1.0))
            .collect();
        lp.add_constraint(format!("src_{k}"), out, Relation::Eq, lambda);
        row_kinds.push(RowKind::SourceOut);
        let inn: Vec<(VarId, f64)> = instance
            .in_links(flow.dst)
            .iter()
            .map(|&l| (index.rate(k, n, l).unwrap(), 1.0))
            .collect();
        lp.add_constraint(format!("dst_{k}"), inn, Relation::Eq, lambda);
        row_kinds.push(RowKind::SinkIn);

        // A node serving position s emits all of stage s; one serving s + 1
        // absorbs it. The net rows alone let a node that is a candidate for
        // both split itself between them and ship nothing.
        if opts.fixed.is_none() {
            for s in 1..n {
                let prev = instance.candidates(k, s - 1);
                for (j, &i) in instance.candidates(k, s).iter().enumerate() {
                    let Some(jp) = prev.iter().position(|&c| c == i) else {
                        continue;
                    };
                    let mut out: Vec<(VarId, f64)> = instance
                        .out_links(i)
                        .iter()
                        .map(|&l| (index.rate(k, s, l).unwrap(), 1.0))
                        .collect();
                    out.push((index.place(k, s - 1, jp).unwrap(), -lambda));
                    lp.add_constraint(format!("host_out_{k}_{s}_{i}"), out, Relation::Ge, 0.0);
                    row_kinds.push(RowKind::HostOut);
                    let mut inn: Vec<(VarId, f64)> = instance
                        .in_links(i)
                        .iter()
                        .map(|&l| (index.rate(k, s, l).unwrap(), 1.0))
                        .collect();
                    inn.push((index.place(k, s, j).unwrap(), -lambda));
                    lp.add_constraint(format!("host_in_{k}_{s}_{i}"), inn, Relation::Ge, 0.0);
                    row_kinds.push(RowKind::HostIn);
                }
            }
        }
    }

    // Assignment and no-reuse rows.
    if opts.fixed.is_none() {
        for &k in flows {
            let n = instance.flows()[k].len();
            let mut by_node: BTreeMap<usize, Vec<(VarId, f64)>> = BTreeMap::new();
            for s in 0..n {
                let mut coeffs = Vec::new();
                for (j, &i) in instance.candidates(k, s).iter().enumerate() {
                    let c = index.place(k, s, j).unwrap();
                    coeffs.push((c, 1.0));
                    by_node.entry(i).or_default().push((c, 1.0));
                }
                lp.add_constraint(format!("assign_{k}_{s}"), coeffs, Relation::Eq, 1.0);
                row_kinds.push(RowKind::Assignment);
            }
            for (i, coeffs) in by_node {
                if coeffs.len() >= 2 {
                    lp.add_constraint(format!("reuse_{k}_{i}"), coeffs, Relation::Le, 1.0);
                    row_kinds.push(RowKind::NoReuse);
                }
            }
        }
    }

    // Link capacities.
    for l in 0..nl {
        let mut coeffs = Vec::new();
        for &k in flows {
            for s in 0..instance.flows()[k].stages() {
                coeffs.push((index.rate(k, s, l).unwrap(), 1.0));
            }
        }
        if let Some(d) = delta {
            coeffs.push((VarId(d), -1.0));
        }
        lp.add_constraint(format!("link_{l}"), coeffs, Relation::Le, caps[l]);
        row_kinds.push(RowKind::LinkCapacity);
    }

    if opts.fixed.is_none() {
        // Node capacities and cuts, per function node.
        let mut load: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); nn];
        let mut load_by_fn: BTreeMap<(usize, usize), Vec<(VarId, f64)>> = BTreeMap::new();
        for &k in flows {
            let flow = &instance.flows()[k];
            for s in 0..flow.len() {
                let f = flow.chain[s];
                for (j, &i) in instance.candidates(k, s).iter().enumerate() {
                    let c = index.place(k, s, j).unwrap();
                    load[i].push((c, flow.rate));
                    load_by_fn.entry((i, f)).or_default().push((c, flow.rate));
                }
            }
        }
        for (i, coeffs) in load.iter().enumerate() {
            if instance.is_function_node(i) {
                lp.add_constraint(
                    format!("node_{i}"),
                    coeffs.clone(),
                    Relation::Le,
                    instance.node_caps()[i],
                );
                row_kinds.push(RowKind::NodeCapacity);
            }
        }
        if opts.with_cuts {
            for &k in flows {
                let flow = &instance.flows()[k];
                for s in 0..flow.len() {
                    let f = flow.chain[s];
                    for (j, &i) in instance.candidates(k, s).iter().enumerate() {
                        let c = index.place(k, s, j).unwrap();
                        let agg = index.node_function(i, f).unwrap();
                        lp.add_constraint(
                            format!("cut_x_{k}_{s}_{i}"),
                            vec![(c, 1.0), (agg, -1.0)],
                            Relation::Le,
                            0.0,
                        );
                        row_kinds.push(RowKind::CutPlacement);
                    }
                }
            }
            for (f, func) in instance.functions().iter().enumerate() {
                for &i in &func.nodes {
                    lp.add_constraint(
                        format!("cut_act_{i}_{f}"),
                        vec![
                            (index.node_function(i, f).unwrap(), 1.0),
                            (index.node_active(i).unwrap(), -1.0),
                        ],
                        Relation::Le,
                        0.0,
                    );
                    row_kinds.push(RowKind::CutActivation);
                }
            }
            for (i, coeffs) in load.into_iter().enumerate() {
                if instance.is_function_node(i) {
                    let mut c = coeffs;
                    c.push((index.node_active(i).unwrap(), -instance.node_caps()[i]));
                    lp.add_constraint(format!("cut_node_{i}"), c, Relation::Le, 0.0);
                    row_kinds.push(RowKind::CutNode);
                }
            }
            for (f, func) in instance.functions().iter().enumerate() {
                for &i in &func.nodes {
                    let mut c = load_by_fn.remove(&(i, f)).unwrap_or_default();
                    c.push((index.node_function(i, f).unwrap(), -instance.node_caps()[i]));
                    lp.add_constraint(format!("cut_fn_{i}_{f}"), c, Relation::Le, 0.0);
                    row_kinds.push(RowKind::CutFunction);
                }
            }
        }
    }

    let base_objective = lp.objective().to_vec();
    Ok(Model {
        lp,
        index,
        row_kinds,
        base_objective,
    })
}

/// Relaxation of the full model with `x` in `[0, 1]`.
pub fn build_relaxation(instance: &ProblemInstance, with_cuts: bool) -> Model {
    build(
        instance,
        &BuildOptions {
            with_cuts,
            ..Default::default()
        },
    )
    .expect("free-placement builds cannot fail")
}

/// Relaxation with the linearized penalty of `x_prev` in the objective.
pub fn build_psum_subproblem(
    instance: &ProblemInstance,
    x_prev: &FractionalPlacement,
    params: &PenaltyParams,
    with_cuts: bool,
) -> Result<Model, FormulationError> {
    let mut model = build_relaxation(instance, with_cuts);
    model.set_penalty_objective(instance, x_prev, params)?;
    Ok(model)
}

/// Routing of a fixed placement with a shared link slack `Delta` priced at `tau`.
pub fn build_routing_repair(
    instance: &ProblemInstance,
    placement: &Placement,
    tau: f64,
) -> Result<Model, FormulationError> {
    build(
        instance,
        &BuildOptions {
            fixed: Some(placement),
            repair_weight: Some(tau),
            ..Default::default()
        },
    )
}

/// Exact routing LP of a fixed placement: no slack, capacities enforced.
pub fn build_fixed_routing(instance: &ProblemInstance, placement: &Placement) -> Result<Model, FormulationError> {
    build(
        instance,
        &BuildOptions {
            fixed: Some(placement),
            ..Default::default()
        },
    )
}

/// Default repair weight: `10 * |L| * max_k lambda(k)`.
pub fn default_tau(instance: &ProblemInstance) -> f64 {
    let t = 10.0 * instance.num_links() as f64 * instance.max_rate();
    if t > 0.0 {
        t
    } else {
        1.0
    }
}

fn check_connected(instance: &ProblemInstance, p: &Placement, k: usize) -> Result<(), FormulationError> {
    let w = p.waypoints(instance, k);
    for s in 0..w.len() - 1 {
        if !reachable(instance, w[s], w[s + 1]) {
            return Err(FormulationError::Disconnected {
                flow: instance.flows()[k].id.clone(),
                stage: s,
                from: instance.node_name(w[s]).to_string(),
                to: instance.node_name(w[s + 1]).to_string(),
            });
        }
    }
    Ok(())
}

/// Directed reachability by breadth-first search.
pub fn reachable(instance: &ProblemInstance, from: usize, to: usize) -> bool {
    if from == to {
        return true;
    }
    let mut seen = vec![false; instance.num_nodes()];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(u) = queue.pop_front() {
        for &l in instance.out_links(u) {
            let v = instance.links()[l].to;
            if v == to {
                return true;
            }
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    false
}

/// Sufficient capacities under which the relaxation has a binary optimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem2Bounds {
    /// `sum_k lambda(k)`.
    pub mu_bar: f64,
    /// `sum_k lambda(k) (|F(k)| + 1)`.
    pub c_bar: f64,
    /// Every function node has `mu >= mu_bar` and every link `C >= c_bar`.
    pub guaranteed: bool,
}

pub fn theorem2_bounds(instance: &ProblemInstance) -> Theorem2Bounds {
    let mu_bar: f64 = instance.flows().iter().map(|f| f.rate).sum();
    let c_bar: f64 = instance.flows().iter().map(|f| f.rate * (f.len() as f64 + 1.0)).sum();
    let nodes_ok = (0..instance.num_nodes())
        .filter(|&i| instance.is_function_node(i))
        .all(|i| instance.node_caps()[i] >= mu_bar);
    let links_ok = instance.links().iter().all(|l| l.capacity >= c_bar);
    Theorem2Bounds {
        mu_bar,
        c_bar,
        guaranteed: nodes_ok && links_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InstanceBuilder;

    fn square() -> ProblemInstance {
        InstanceBuilder::new()
            .node("s")
            .node("a")
            .node("b")
            .node("d")
            .link("s", "a", 5.0)
            .link("s", "b", 5.0)
            .link("a", "d", 5.0)
            .link("b", "d", 5.0)
            .node_capacity("a", 3.0)
            .node_capacity("b", 3.0)
            .function("f", ["a", "b"])
            .flow("k", "s", "d", 1.0, ["f"])
            .build()
            .unwrap()
    }

    #[test]
    fn dimensions_of_single_function_flow() {
        let inst = square();
        let m = build_relaxation(&inst, false);
        let d = m.dimensions();
        assert_eq!(d.rate_vars, 8);
        assert_eq!(d.placement_vars, 2);
        assert_eq!(d.equality_rows, 2 * 4 + 2 + 1);
        assert_eq!(d.rows_of(RowKind::NodeCapacity), 2);
    }

    #[test]
    fn column_map_is_bijective() {
        let inst = square();
        let m = build_relaxation(&inst, true);
        for (c, &v) in m.index.vars().iter().enumerate() {
            assert_eq!(m.index.col(&inst, v), Some(VarId(c)));
        }
    }

    #[test]
    fn capacity_bound_example() {
        let inst = InstanceBuilder::new()
            .node("s")
            .node("a")
            .node("b")
            .node("d")
            .link("s", "a", 100.0)
            .node_capacity("a", 3.0)
            .node_capacity("b", 3.0)
            .function("f", ["a"])
            .function("g", ["b"])
            .flow("k1", "s", "d", 1.0, ["f"])
            .flow("k2", "s", "d", 2.0, ["f", "g"])
            .build()
            .unwrap();
        let b = theorem2_bounds(&inst);
        assert_eq!(b.mu_bar, 3.0);
        assert_eq!(b.c_bar, 8.0);
        assert!(b.guaranteed);
    }
}
