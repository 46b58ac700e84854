//! Low-complexity heuristics I–IV.
//!
//! I and II place every chain function by filtering and weighting, then
//! route with the slack-priced repair LP (per flow against residual link
//! capacities for I, jointly for II). III bootstraps a relaxation by fixing
//! near-binary values, decides the rest greedily and rounds what is left.
//! IV is purely combinatorial: a greedy hop-count placement, min-cost-flow
//! routing on residual capacities and one pass of local search.

use std::collections::VecDeque;
use std::time::Instant;

use log::debug;
use netslice_lp::{BackendKind, LpError, LpResult, LpStatus, Tolerances};
use thiserror::Error;

use crate::formulation::{self, BuildOptions, FormulationError, Model, PlacementBounds};
use crate::model::{
    FractionalPlacement, Placement, PlacementKind, ProblemInstance, RoutingPlan, Solution, SolutionStatus,
};
use crate::psum::{attach_report, finish, round_placement, PsumError, CERTIFY_TOL};

/// Marks an unreachable node in [`hop_counts`] and [`hops_from`].
pub const UNREACHABLE: usize = usize::MAX;

const FLOW_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum HeuristicError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("flow `{flow}` position {position}: no candidate node")]
    NoCandidates { flow: String, position: usize },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Rounding(#[from] PsumError),
    #[error("LP solver stopped with status {0:?}")]
    Solver(LpStatus),
}

/// Weights of the filter-and-weight cost
/// `z_i = w1 (h(S, i) + h(i, D)) + w2 / mu~_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightingConfig {
    pub w1: f64,
    /// `None` means `10 * max_i mu_i`.
    pub w2: Option<f64>,
}

impl Default for WeightingConfig {
    fn default() -> Self {
        WeightingConfig { w1: 1.0, w2: None }
    }
}

impl WeightingConfig {
    pub fn validate(&self) -> Result<(), HeuristicError> {
        let w2 = self.w2.unwrap_or(1.0);
        if !(self.w1 >= 0.0 && self.w1.is_finite() && w2 >= 0.0 && w2.is_finite()) {
            return Err(HeuristicError::Config(format!(
                "weights must be finite and >= 0, got w1 = {}, w2 = {w2}",
                self.w1
            )));
        }
        if self.w1 == 0.0 && self.w2 == Some(0.0) {
            return Err(HeuristicError::Config("weights must not all be zero".into()));
        }
        Ok(())
    }

    /// `(w1, w2)` with the default `w2` filled in.
    pub fn resolve(&self, instance: &ProblemInstance) -> (f64, f64) {
        (self.w1, self.w2.unwrap_or(10.0 * instance.max_node_cap()))
    }
}

/// Settings shared by heuristics I, II and IV.
#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicConfig {
    pub weighting: WeightingConfig,
    /// Repair weight on `Delta`; `None` uses [`formulation::default_tau`].
    pub tau: Option<f64>,
    /// Heuristic IV: run the local-search pass.
    pub local_search: bool,
    pub backend: BackendKind,
    pub tolerances: Tolerances,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            weighting: WeightingConfig::default(),
            tau: None,
            local_search: true,
            backend: BackendKind::Bundled,
            tolerances: Tolerances::default(),
        }
    }
}

impl HeuristicConfig {
    pub fn validate(&self) -> Result<(), HeuristicError> {
        self.weighting.validate()?;
        check_tau(self.tau)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicIIIConfig {
    /// Bootstrapping rounds.
    pub t_max: usize,
    /// Values at or below this are fixed to zero.
    pub theta1: f64,
    /// Values at or above this are fixed to one.
    pub theta2: f64,
    /// Threshold of the final rounding.
    pub theta: f64,
    pub tau: Option<f64>,
    pub use_cuts: bool,
    pub backend: BackendKind,
    pub tolerances: Tolerances,
}

impl Default for HeuristicIIIConfig {
    fn default() -> Self {
        HeuristicIIIConfig {
            t_max: 3,
            theta1: 0.1,
            theta2: 0.9,
            theta: 0.9,
            tau: None,
            use_cuts: true,
            backend: BackendKind::Bundled,
            tolerances: Tolerances::default(),
        }
    }
}

impl HeuristicIIIConfig {
    pub fn validate(&self) -> Result<(), HeuristicError> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !(unit(self.theta1) && unit(self.theta2) && self.theta1 < self.theta2) {
            return Err(HeuristicError::Config(format!(
                "need 0 < theta1 < theta2 < 1, got {} and {}",
                self.theta1, self.theta2
            )));
        }
        if !unit(self.theta) {
            return Err(HeuristicError::Config(format!(
                "theta must lie in (0, 1), got {}",
                self.theta
            )));
        }
        check_tau(self.tau)
    }
}

fn check_tau(tau: Option<f64>) -> Result<(), HeuristicError> {
    match tau {
        Some(t) if !(t > 0.0 && t.is_finite()) => Err(HeuristicError::Config(format!("tau must be > 0, got {t}"))),
        _ => Ok(()),
    }
}

/// Decision state of one placement variable in heuristic III.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fixing {
    Undecided,
    One,
    Zero,
}

/// Fixings of heuristic III, shaped like the placement blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicIIIState {
    pub fixings: Vec<Vec<Vec<Fixing>>>,
}

impl HeuristicIIIState {
    pub fn new(instance: &ProblemInstance) -> Self {
        let fixings = (0..instance.num_flows())
            .map(|k| {
                (0..instance.flows()[k].len())
                    .map(|s| {
                        instance
                            .candidates(k, s)
                            .iter()
                            .map(|&i| {
                                if instance.allowed_host(k, s, i) {
                                    Fixing::Undecided
                                } else {
                                    Fixing::Zero
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        HeuristicIIIState { fixings }
    }

    /// `(k, s, j)` of every variable in the given state.
    pub fn members(&self, state: Fixing) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (k, blocks) in self.fixings.iter().enumerate() {
            for (s, block) in blocks.iter().enumerate() {
                for (j, &f) in block.iter().enumerate() {
                    if f == state {
                        out.push((k, s, j));
                    }
                }
            }
        }
        out
    }

    pub fn bounds(&self) -> PlacementBounds {
        self.fixings
            .iter()
            .map(|blocks| {
                blocks
                    .iter()
                    .map(|block| {
                        block
                            .iter()
                            .map(|f| match f {
                                Fixing::One => (1.0, 1.0),
                                Fixing::Zero => (0.0, 0.0),
                                Fixing::Undecided => (0.0, 1.0),
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// Fixes `(k, s, j)` to one and its block siblings to zero.
    fn set_one(&mut self, k: usize, s: usize, j: usize) {
        for (jj, f) in self.fixings[k][s].iter_mut().enumerate() {
            *f = if jj == j { Fixing::One } else { Fixing::Zero };
        }
    }
}

/// Directed hop distance from every node to `target`; [`UNREACHABLE`] when
/// there is no path.
pub fn hop_counts(instance: &ProblemInstance, target: usize) -> Vec<usize> {
    bfs(instance, target, true)
}

/// Directed hop distance from `source` to every node.
pub fn hops_from(instance: &ProblemInstance, source: usize) -> Vec<usize> {
    bfs(instance, source, false)
}

fn bfs(instance: &ProblemInstance, root: usize, reverse: bool) -> Vec<usize> {
    let mut dist = vec![UNREACHABLE; instance.num_nodes()];
    dist[root] = 0;
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        let links = if reverse {
            instance.in_links(u)
        } else {
            instance.out_links(u)
        };
        for &l in links {
            let link = &instance.links()[l];
            let v = if reverse { link.from } else { link.to };
            if dist[v] == UNREACHABLE {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Hop count with the unreachable sentinel `|V| + 1`.
fn finite_hops(h: usize, instance: &ProblemInstance) -> f64 {
    if h == UNREACHABLE {
        (instance.num_nodes() + 1) as f64
    } else {
        h as f64
    }
}

/// Chooses the node serving position `s` of flow `k`.
///
/// Eligible nodes are candidates with `remaining[i] >= lambda(k)`; when none
/// is eligible every candidate is. Nodes in `exclude` and hosts ruled out by
/// [`ProblemInstance::allowed_host`] are never chosen. Returns the argmin of
/// `z_i`, ties broken by the smallest node id. The caller charges the node.
pub fn filter_and_weight(
    instance: &ProblemInstance,
    k: usize,
    s: usize,
    remaining: &[f64],
    exclude: &[usize],
    weights: &WeightingConfig,
) -> Result<usize, HeuristicError> {
    let flow = &instance.flows()[k];
    let from_src = hops_from(instance, flow.src);
    let to_dst = hop_counts(instance, flow.dst);
    let (w1, w2) = weights.resolve(instance);
    let pool: Vec<usize> = instance
        .candidates(k, s)
        .iter()
        .copied()
        .filter(|&i| instance.allowed_host(k, s, i) && !exclude.contains(&i))
        .collect();
    if pool.is_empty() {
        return Err(HeuristicError::NoCandidates {
            flow: flow.id.clone(),
            position: s,
        });
    }
    let eligible: Vec<usize> = pool.iter().copied().filter(|&i| remaining[i] >= flow.rate).collect();
    let set = if eligible.is_empty() { &pool } else { &eligible };
    let z = |i: usize| {
        let hops = finite_hops(from_src[i], instance) + finite_hops(to_dst[i], instance);
        let load = if w2 == 0.0 {
            0.0
        } else if remaining[i] > 0.0 {
            w2 / remaining[i]
        } else {
            f64::INFINITY
        };
        w1 * hops + load
    };
    // Candidate lists are sorted by id, so the first minimum wins ties.
    let mut best = set[0];
    let mut best_z = z(best);
    for &i in &set[1..] {
        let zi = z(i);
        if zi < best_z {
            best = i;
            best_z = zi;
        }
    }
    Ok(best)
}

/// Filter-and-weight sweep over all flows in order, charging `lambda(k)`
/// per chosen node.
fn weighted_placement(instance: &ProblemInstance, weights: &WeightingConfig) -> Result<Placement, HeuristicError> {
    let mut remaining = instance.node_caps().to_vec();
    let mut assignment = Vec::with_capacity(instance.num_flows());
    for (k, flow) in instance.flows().iter().enumerate() {
        let mut nodes: Vec<usize> = Vec::with_capacity(flow.len());
        for s in 0..flow.len() {
            let i = filter_and_weight(instance, k, s, &remaining, &nodes, weights)?;
            remaining[i] -= flow.rate;
            nodes.push(i);
        }
        assignment.push(nodes);
    }
    Ok(Placement { assignment })
}

fn solve(
    model: &Model,
    backend: BackendKind,
    tol: &Tolerances,
    lp_solves: &mut usize,
) -> Result<LpResult, HeuristicError> {
    *lp_solves += 1;
    Ok(backend.backend().solve(&model.lp, None, tol)?)
}

/// Audit-driven status: failed flows make the answer infeasible, otherwise
/// clean means binary-feasible.
fn settle(instance: &ProblemInstance, sol: &mut Solution) {
    attach_report(instance, sol);
    sol.status = if !sol.failed_flows.is_empty() {
        SolutionStatus::Infeasible
    } else if sol.violations.as_ref().is_some_and(|v| v.is_clean(CERTIFY_TOL)) {
        SolutionStatus::BinaryFeasible
    } else {
        SolutionStatus::BinaryWithViolations
    };
}

fn is_disconnected(e: &FormulationError) -> bool {
    matches!(e, FormulationError::Disconnected { .. })
}

/// Heuristic I: flows are placed and routed one after another. Each flow's
/// repair LP sees the link capacity left by earlier flows, clamped at zero;
/// earlier flows are never re-routed.
pub fn heuristic1(instance: &ProblemInstance, cfg: &HeuristicConfig) -> Result<Solution, HeuristicError> {
    cfg.validate()?;
    let started = Instant::now();
    let placement = weighted_placement(instance, &cfg.weighting)?;
    let tau = cfg.tau.unwrap_or_else(|| formulation::default_tau(instance));
    let mut residual: Vec<f64> = instance.links().iter().map(|l| l.capacity).collect();
    let mut routing = RoutingPlan::zeros(instance);
    let mut failed = Vec::new();
    let mut max_delta: f64 = 0.0;
    let mut lp_solves = 0;
    for k in 0..instance.num_flows() {
        let flows = [k];
        let opts = BuildOptions {
            fixed: Some(&placement),
            repair_weight: Some(tau),
            flows: Some(&flows),
            link_capacities: Some(&residual),
            ..Default::default()
        };
        let model = match formulation::build(instance, &opts) {
            Ok(m) => m,
            Err(e) if is_disconnected(&e) => {
                debug!("heuristic I: flow {k} disconnected");
                failed.push(k);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let res = solve(&model, cfg.backend, &cfg.tolerances, &mut lp_solves)?;
        if res.status != LpStatus::Optimal {
            return Err(HeuristicError::Solver(res.status));
        }
        let plan = model.routing(instance, &res.values);
        if let Some(d) = model.index.delta() {
            max_delta = max_delta.max(res.values[d.0].max(0.0));
        }
        for (l, cap) in residual.iter_mut().enumerate() {
            *cap = (*cap - plan.flow_rate(k, l)).max(0.0);
        }
        routing.rates[k] = plan.rates[k].clone();
    }
    let mut sol = Solution::new(
        SolutionStatus::BinaryFeasible,
        PlacementKind::Binary(placement),
        routing,
    );
    sol.delta = Some(max_delta);
    sol.failed_flows = failed;
    sol.lp_solves = lp_solves;
    settle(instance, &mut sol);
    Ok(finish(sol, started, "heuristic-1"))
}

/// Heuristic II: the same placement sweep, then one joint repair LP.
pub fn heuristic2(instance: &ProblemInstance, cfg: &HeuristicConfig) -> Result<Solution, HeuristicError> {
    cfg.validate()?;
    let started = Instant::now();
    let placement = weighted_placement(instance, &cfg.weighting)?;
    let tau = cfg.tau.unwrap_or_else(|| formulation::default_tau(instance));
    let mut lp_solves = 0;
    let mut sol = route_jointly(instance, placement, tau, cfg.backend, &cfg.tolerances, &mut lp_solves)?;
    sol.lp_solves = lp_solves;
    settle(instance, &mut sol);
    Ok(finish(sol, started, "heuristic-2"))
}

/// Joint repair LP over every connected flow; disconnected flows are
/// recorded as failed and left unrouted.
fn route_jointly(
    instance: &ProblemInstance,
    placement: Placement,
    tau: f64,
    backend: BackendKind,
    tol: &Tolerances,
    lp_solves: &mut usize,
) -> Result<Solution, HeuristicError> {
    let mut failed = Vec::new();
    let mut included = Vec::new();
    for k in 0..instance.num_flows() {
        let w = placement.waypoints(instance, k);
        if w.windows(2).all(|p| formulation::reachable(instance, p[0], p[1])) {
            included.push(k);
        } else {
            failed.push(k);
        }
    }
    let opts = BuildOptions {
        fixed: Some(&placement),
        repair_weight: Some(tau),
        flows: Some(&included),
        ..Default::default()
    };
    let model = formulation::build(instance, &opts)?;
    let res = solve(&model, backend, tol, lp_solves)?;
    if res.status != LpStatus::Optimal {
        return Err(HeuristicError::Solver(res.status));
    }
    let routing = model.routing(instance, &res.values);
    let mut sol = Solution::new(
        SolutionStatus::BinaryFeasible,
        PlacementKind::Binary(placement),
        routing,
    );
    sol.delta = model.index.delta().map(|d| res.values[d.0].max(0.0));
    sol.failed_flows = failed;
    Ok(sol)
}

struct Relaxed {
    x: FractionalPlacement,
    objective: f64,
}

fn solve_fixed_relaxation(
    instance: &ProblemInstance,
    state: &HeuristicIIIState,
    cfg: &HeuristicIIIConfig,
    lp_solves: &mut usize,
) -> Result<Option<Relaxed>, HeuristicError> {
    let bounds = state.bounds();
    let opts = BuildOptions {
        with_cuts: cfg.use_cuts,
        placement_bounds: Some(&bounds),
        ..Default::default()
    };
    let model = formulation::build(instance, &opts)?;
    let res = solve(&model, cfg.backend, &cfg.tolerances, lp_solves)?;
    match res.status {
        LpStatus::Optimal => Ok(Some(Relaxed {
            x: model.placement(instance, &res.values),
            objective: model.routing(instance, &res.values).total(),
        })),
        LpStatus::Infeasible => Ok(None),
        other => Err(HeuristicError::Solver(other)),
    }
}

/// Heuristic III: bootstrapping, greedy selection, rounding, repair.
pub fn heuristic3(instance: &ProblemInstance, cfg: &HeuristicIIIConfig) -> Result<Solution, HeuristicError> {
    cfg.validate()?;
    let started = Instant::now();
    let mut lp_solves = 0;
    let mut state = HeuristicIIIState::new(instance);
    let Some(mut relaxed) = solve_fixed_relaxation(instance, &state, cfg, &mut lp_solves)? else {
        return Ok(finish(Solution::infeasible(instance), started, "heuristic-3"));
    };

    for round in 0..cfg.t_max {
        let undecided = state.members(Fixing::Undecided);
        if undecided.is_empty() {
            break;
        }
        let mut ones = Vec::new();
        let mut zeros = Vec::new();
        for &(k, s, j) in &undecided {
            let v = relaxed.x.values[k][s][j];
            if v >= cfg.theta2 {
                ones.push((k, s, j));
            } else if v <= cfg.theta1 {
                zeros.push((k, s, j));
            }
        }
        // Node-capacity audit: drop every new member of an overloaded node.
        let mut load = vec![0.0; instance.num_nodes()];
        for (k, s, j) in state.members(Fixing::One).into_iter().chain(ones.iter().copied()) {
            load[instance.candidates(k, s)[j]] += instance.flows()[k].rate;
        }
        let caps = instance.node_caps();
        ones.retain(|&(k, s, j)| {
            let i = instance.candidates(k, s)[j];
            load[i] <= caps[i] + CERTIFY_TOL * caps[i].max(1.0)
        });
        if ones.is_empty() && zeros.is_empty() {
            break;
        }
        let saved = state.clone();
        for &(k, s, j) in &zeros {
            state.fixings[k][s][j] = Fixing::Zero;
        }
        for &(k, s, j) in &ones {
            state.set_one(k, s, j);
        }
        debug!(
            "heuristic III round {round}: {} fixed to one, {} to zero",
            ones.len(),
            zeros.len()
        );
        match solve_fixed_relaxation(instance, &state, cfg, &mut lp_solves)? {
            Some(r) => relaxed = r,
            None => {
                // The promotions cut off every feasible point; keep the last
                // consistent state and move on to the greedy phase.
                state = saved;
                break;
            }
        }
    }

    // Greedy selection: one variable to zero per round, forced ones as found.
    let budget = state.members(Fixing::Undecided).len();
    for _ in 0..budget {
        let undecided = state.members(Fixing::Undecided);
        if undecided.is_empty() {
            break;
        }
        let mut best: Option<((usize, usize, usize), f64)> = None;
        let mut forced = Vec::new();
        for &(k, s, j) in &undecided {
            if state.fixings[k][s][j] != Fixing::Undecided {
                continue;
            }
            let mut trial = state.clone();
            trial.fixings[k][s][j] = Fixing::Zero;
            match solve_fixed_relaxation(instance, &trial, cfg, &mut lp_solves)? {
                None => forced.push((k, s, j)),
                Some(r) => {
                    if best.is_none_or(|(_, obj)| r.objective < obj - 1e-9) {
                        best = Some(((k, s, j), r.objective));
                    }
                }
            }
        }
        for &(k, s, j) in &forced {
            state.set_one(k, s, j);
        }
        if let Some(((k, s, j), _)) = best {
            if state.fixings[k][s][j] == Fixing::Undecided {
                state.fixings[k][s][j] = Fixing::Zero;
            }
        }
        match solve_fixed_relaxation(instance, &state, cfg, &mut lp_solves)? {
            Some(r) => relaxed = r,
            None => break,
        }
    }

    // Decided blocks become exact vertices; the rest is rounded.
    let mut x = relaxed.x;
    for (k, blocks) in state.fixings.iter().enumerate() {
        for (s, block) in blocks.iter().enumerate() {
            if block.contains(&Fixing::One) {
                for (j, f) in block.iter().enumerate() {
                    x.values[k][s][j] = if *f == Fixing::One { 1.0 } else { 0.0 };
                }
            }
        }
    }
    let placement = round_placement(instance, &x, cfg.theta, instance.node_caps())?;
    let tau = cfg.tau.unwrap_or_else(|| formulation::default_tau(instance));
    let mut sol = route_jointly(instance, placement, tau, cfg.backend, &cfg.tolerances, &mut lp_solves)?;
    sol.lp_solves = lp_solves;
    settle(instance, &mut sol);
    Ok(finish(sol, started, "heuristic-3"))
}

/// Sends `amount` from `from` to `to` at unit cost per link through
/// `residual` by successive shortest paths. Returns the per-link flow, or
/// `None` when the residual network cannot carry the amount.
pub fn min_cost_route(
    instance: &ProblemInstance,
    residual: &[f64],
    from: usize,
    to: usize,
    amount: f64,
) -> Option<Vec<f64>> {
    let nl = instance.num_links();
    let mut flow = vec![0.0; nl];
    if from == to || amount <= 0.0 {
        return Some(flow);
    }
    let n = instance.num_nodes();
    let mut left = amount;
    while left > FLOW_EPS * amount.max(1.0) {
        // Bellman-Ford over forward arcs (cost 1) and reverse arcs (cost -1).
        let mut dist = vec![f64::INFINITY; n];
        // (link, forward?)
        let mut pred: Vec<Option<(usize, bool)>> = vec![None; n];
        dist[from] = 0.0;
        for _ in 0..n {
            let mut changed = false;
            for (l, link) in instance.links().iter().enumerate() {
                if residual[l] - flow[l] > FLOW_EPS && dist[link.from] + 1.0 < dist[link.to] {
                    dist[link.to] = dist[link.from] + 1.0;
                    pred[link.to] = Some((l, true));
                    changed = true;
                }
                if flow[l] > FLOW_EPS && dist[link.to] - 1.0 < dist[link.from] {
                    dist[link.from] = dist[link.to] - 1.0;
                    pred[link.from] = Some((l, false));
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if dist[to].is_infinite() {
            return None;
        }
        let mut path = Vec::new();
        let mut v = to;
        while v != from {
            let (l, fwd) = pred[v].expect("reached nodes have predecessors");
            path.push((l, fwd));
            let link = &instance.links()[l];
            v = if fwd { link.from } else { link.to };
        }
        let mut push = left;
        for &(l, fwd) in &path {
            let room = if fwd { residual[l] - flow[l] } else { flow[l] };
            push = push.min(room);
        }
        for &(l, fwd) in &path {
            if fwd {
                flow[l] += push;
            } else {
                flow[l] -= push;
            }
        }
        left -= push;
    }
    Some(flow)
}

struct GreedyState<'a> {
    instance: &'a ProblemInstance,
    remaining_mu: Vec<f64>,
    residual: Vec<f64>,
}

impl GreedyState<'_> {
    fn take(&mut self, stage: &[f64]) {
        for (c, f) in self.residual.iter_mut().zip(stage) {
            *c -= f;
        }
    }

    fn give_back(&mut self, stage: &[f64]) {
        for (c, f) in self.residual.iter_mut().zip(stage) {
            *c += f;
        }
    }

    /// Greedy knapsack rule for position `s`: the closest (in hops from
    /// `current`) candidate that still has room, else the roomiest one.
    fn choose(&self, k: usize, s: usize, current: usize, exclude: &[usize]) -> Option<usize> {
        let inst = self.instance;
        let rate = inst.flows()[k].rate;
        let hops = hops_from(inst, current);
        let pool: Vec<usize> = inst
            .candidates(k, s)
            .iter()
            .copied()
            .filter(|&i| inst.allowed_host(k, s, i) && !exclude.contains(&i))
            .collect();
        let fits = pool
            .iter()
            .copied()
            .filter(|&i| self.remaining_mu[i] >= rate)
            .min_by_key(|&i| (hops[i], i));
        fits.or_else(|| {
            pool.iter().copied().fold(None, |best: Option<usize>, i| match best {
                Some(b) if self.remaining_mu[b] >= self.remaining_mu[i] => Some(b),
                _ => Some(i),
            })
        })
    }

    /// Places and routes flow `k`. On failure nothing stays charged.
    fn serve(&mut self, k: usize) -> Option<(Vec<usize>, Vec<Vec<f64>>)> {
        let inst = self.instance;
        let flow = &inst.flows()[k];
        let mut nodes = Vec::with_capacity(flow.len());
        let mut stages: Vec<Vec<f64>> = Vec::with_capacity(flow.stages());
        let mut current = flow.src;
        let mut ok = true;
        for s in 0..=flow.len() {
            let next = if s < flow.len() {
                match self.choose(k, s, current, &nodes) {
                    Some(i) => i,
                    None => {
                        ok = false;
                        break;
                    }
                }
            } else {
                flow.dst
            };
            match min_cost_route(inst, &self.residual, current, next, flow.rate) {
                Some(stage) => {
                    self.take(&stage);
                    stages.push(stage);
                }
                None => {
                    ok = false;
                    break;
                }
            }
            if s < flow.len() {
                self.remaining_mu[next] -= flow.rate;
                nodes.push(next);
            }
            current = next;
        }
        if ok {
            return Some((nodes, stages));
        }
        for stage in &stages {
            self.give_back(stage);
        }
        for &i in &nodes {
            self.remaining_mu[i] += flow.rate;
        }
        None
    }

    /// One pass over every position of every served flow: move the function
    /// to the candidate whose two adjacent stages route cheapest, if that is
    /// a strict improvement.
    fn local_search(&mut self, served: &mut [Option<(Vec<usize>, Vec<Vec<f64>>)>]) -> usize {
        let inst = self.instance;
        let mut moves = 0;
        for (k, entry) in served.iter_mut().enumerate() {
            let Some((nodes, stages)) = entry else { continue };
            let flow = &inst.flows()[k];
            for s in 0..flow.len() {
                let prev = if s == 0 { flow.src } else { nodes[s - 1] };
                let next = if s + 1 == flow.len() { flow.dst } else { nodes[s + 1] };
                let cost_now: f64 = stages[s].iter().chain(&stages[s + 1]).sum();
                self.give_back(&stages[s]);
                self.give_back(&stages[s + 1]);
                let mut best: Option<(usize, Vec<f64>, Vec<f64>, f64)> = None;
                for &v in inst.candidates(k, s) {
                    if v == nodes[s]
                        || !inst.allowed_host(k, s, v)
                        || nodes.contains(&v)
                        || self.remaining_mu[v] < flow.rate
                    {
                        continue;
                    }
                    let Some(a) = min_cost_route(inst, &self.residual, prev, v, flow.rate) else {
                        continue;
                    };
                    self.take(&a);
                    let b = min_cost_route(inst, &self.residual, v, next, flow.rate);
                    self.give_back(&a);
                    let Some(b) = b else { continue };
                    let cost: f64 = a.iter().chain(&b).sum();
                    let bar = best.as_ref().map_or(cost_now, |t| t.3);
                    if cost < bar - 1e-9 {
                        best = Some((v, a, b, cost));
                    }
                }
                if let Some((v, a, b, _)) = best {
                    self.remaining_mu[nodes[s]] += flow.rate;
                    self.remaining_mu[v] -= flow.rate;
                    nodes[s] = v;
                    stages[s] = a;
                    stages[s + 1] = b;
                    moves += 1;
                }
                self.take(&stages[s]);
                self.take(&stages[s + 1]);
            }
        }
        moves
    }
}

/// Heuristic IV: greedy hop-count placement and min-cost-flow routing on
/// residual capacities, flow by flow, then one local-search pass. A flow
/// that cannot be routed within the residual capacities is reported failed
/// instead of overloading a link.
pub fn heuristic4(instance: &ProblemInstance, cfg: &HeuristicConfig) -> Result<Solution, HeuristicError> {
    cfg.validate()?;
    let started = Instant::now();
    let mut st = GreedyState {
        instance,
        remaining_mu: instance.node_caps().to_vec(),
        residual: instance.links().iter().map(|l| l.capacity).collect(),
    };
    let mut served: Vec<Option<(Vec<usize>, Vec<Vec<f64>>)>> = (0..instance.num_flows()).map(|k| st.serve(k)).collect();
    if cfg.local_search {
        let moves = st.local_search(&mut served);
        debug!("heuristic IV: local search made {moves} moves");
    }

    let mut routing = RoutingPlan::zeros(instance);
    let mut assignment = Vec::with_capacity(instance.num_flows());
    let mut failed = Vec::new();
    for (k, entry) in served.into_iter().enumerate() {
        match entry {
            Some((nodes, stages)) => {
                routing.rates[k] = stages;
                assignment.push(nodes);
            }
            None => {
                failed.push(k);
                assignment.push(fallback_assignment(instance, k)?);
            }
        }
    }
    let mut sol = Solution::new(
        SolutionStatus::BinaryFeasible,
        PlacementKind::Binary(Placement { assignment }),
        routing,
    );
    sol.failed_flows = failed;
    settle(instance, &mut sol);
    Ok(finish(sol, started, "heuristic-4"))
}

/// Some valid assignment for a failed flow, so the placement stays
/// well-formed: first allowed distinct candidate per position.
fn fallback_assignment(instance: &ProblemInstance, k: usize) -> Result<Vec<usize>, HeuristicError> {
    let flow = &instance.flows()[k];
    let mut nodes: Vec<usize> = Vec::with_capacity(flow.len());
    for s in 0..flow.len() {
        let i = instance
            .candidates(k, s)
            .iter()
            .copied()
            .find(|&i| instance.allowed_host(k, s, i) && !nodes.contains(&i))
            .ok_or_else(|| HeuristicError::NoCandidates {
                flow: flow.id.clone(),
                position: s,
            })?;
        nodes.push(i);
    }
    Ok(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InstanceBuilder;

    fn line() -> ProblemInstance {
        InstanceBuilder::new()
            .node("a")
            .node("b")
            .node("c")
            .node("z")
            .link("a", "b", 1.0)
            .link("b", "c", 1.0)
            .build()
            .unwrap()
    }

    #[test]
    fn hop_counts_on_a_line() {
        let inst = line();
        let h = hop_counts(&inst, 2);
        assert_eq!(&h[..3], &[2, 1, 0]);
        assert_eq!(h[3], UNREACHABLE);
        assert_eq!(hops_from(&inst, 0)[..3], [0, 1, 2]);
    }

    #[test]
    fn filter_and_weight_arithmetic() {
        // a: 2 + 3 hops, mu 8; b: 1 + 2 hops, mu 2; w2 = 80.
        let mut b = InstanceBuilder::new();
        for n in ["s", "d", "a", "b", "p1", "p2", "q1", "q2"] {
            b.node(n);
        }
        b.link("s", "p1", 1.0)
            .link("p1", "a", 1.0)
            .link("a", "q1", 1.0)
            .link("q1", "q2", 1.0)
            .link("q2", "d", 1.0)
            .link("s", "b", 1.0)
            .link("b", "p2", 1.0)
            .link("p2", "d", 1.0)
            .node_capacity("a", 8.0)
            .node_capacity("b", 2.0)
            .function("f", ["a", "b"])
            .flow("k", "s", "d", 1.0, ["f"]);
        let inst = b.build().unwrap();
        let w = WeightingConfig {
            w1: 1.0,
            w2: Some(80.0),
        };
        let i = filter_and_weight(&inst, 0, 0, inst.node_caps(), &[], &w).unwrap();
        assert_eq!(inst.node_name(i), "a");
        // Without the capacity term the shorter detour wins.
        let w = WeightingConfig { w1: 1.0, w2: Some(0.0) };
        let i = filter_and_weight(&inst, 0, 0, inst.node_caps(), &[], &w).unwrap();
        assert_eq!(inst.node_name(i), "b");
    }

    #[test]
    fn min_cost_route_splits_over_capacity() {
        let inst = InstanceBuilder::new()
            .node("s")
            .node("m")
            .node("n")
            .node("d")
            .link("s", "d", 0.5)
            .link("s", "m", 1.0)
            .link("m", "n", 1.0)
            .link("n", "d", 1.0)
            .build()
            .unwrap();
        let caps: Vec<f64> = inst.links().iter().map(|l| l.capacity).collect();
        let f = min_cost_route(&inst, &caps, 0, 3, 1.0).unwrap();
        assert_eq!(f, vec![0.5, 0.5, 0.5, 0.5]);
        assert!(min_cost_route(&inst, &caps, 0, 3, 2.0).is_none());
    }

    #[test]
    fn thresholds_must_be_ordered() {
        let cfg = HeuristicIIIConfig {
            theta1: 0.9,
            theta2: 0.1,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
