//! Exhaustive MILP oracle for small instances.
//!
//! Every placement that uses distinct nodes within each flow and respects
//! node capacities is routed with the exact (slack-free) LP. Placements are
//! skipped only when a valid lower bound already rules them out: each stage
//! must carry `lambda` over at least the hop distance between its endpoints.

use netslice_lp::{BackendKind, LpError, LpStatus, Tolerances};
use thiserror::Error;

use crate::formulation::{self, FormulationError};
use crate::heuristics::{hops_from, UNREACHABLE};
use crate::model::{Placement, PlacementKind, ProblemInstance, RoutingPlan, Solution, SolutionStatus};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{needed} placements exceed the budget of {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error("LP solver stopped with status {0:?}")]
    Solver(LpStatus),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    /// Largest admissible product of candidate-set sizes over all blocks.
    pub budget: u128,
    pub backend: BackendKind,
    pub tolerances: Tolerances,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            budget: 1_000_000,
            backend: BackendKind::Bundled,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// `None` certifies infeasibility.
    pub objective: Option<f64>,
    pub placement: Option<Placement>,
    pub routing: Option<RoutingPlan>,
    /// Complete placements that passed the capacity check.
    pub placements_checked: u64,
    pub lp_solves: usize,
}

impl OracleResult {
    pub fn is_feasible(&self) -> bool {
        self.objective.is_some()
    }

    pub fn to_solution(&self, instance: &ProblemInstance) -> Solution {
        match (&self.placement, &self.routing) {
            (Some(p), Some(r)) => Solution::new(
                SolutionStatus::BinaryFeasible,
                PlacementKind::Binary(p.clone()),
                r.clone(),
            ),
            _ => Solution::infeasible(instance),
        }
    }
}

/// Product of the candidate-set sizes over all `(k, s)` blocks, saturating.
pub fn placement_count(instance: &ProblemInstance) -> u128 {
    let mut n: u128 = 1;
    for (k, flow) in instance.flows().iter().enumerate() {
        for s in 0..flow.len() {
            n = n.saturating_mul(instance.candidates(k, s).len() as u128);
        }
    }
    n
}

struct Search<'a> {
    instance: &'a ProblemInstance,
    cfg: &'a OracleConfig,
    /// `hops[i][j]` from `i` to `j`.
    hops: Vec<Vec<usize>>,
    /// Cheapest hop bound of each flow over its own placements.
    flow_floor: Vec<f64>,
    load: Vec<f64>,
    current: Vec<Vec<usize>>,
    best: Option<(f64, Placement, RoutingPlan)>,
    checked: u64,
    lp_solves: usize,
}

impl Search<'_> {
    fn stage_bound(&self, rate: f64, from: usize, to: usize) -> f64 {
        match self.hops[from][to] {
            UNREACHABLE => f64::INFINITY,
            h => rate * h as f64,
        }
    }

    fn flow_bound(&self, k: usize, nodes: &[usize]) -> f64 {
        let flow = &self.instance.flows()[k];
        let mut w = vec![flow.src];
        w.extend_from_slice(nodes);
        w.push(flow.dst);
        w.windows(2).map(|p| self.stage_bound(flow.rate, p[0], p[1])).sum()
    }

    fn cutoff(&self) -> f64 {
        self.best
            .as_ref()
            .map_or(f64::INFINITY, |b| b.0 - 1e-9 * b.0.abs().max(1.0))
    }

    /// Depth-first over flows, then positions. `partial` is the hop bound of
    /// the fully placed flows.
    fn descend(&mut self, k: usize, s: usize, partial: f64) -> Result<(), OracleError> {
        let inst = self.instance;
        if k == inst.num_flows() {
            return self.evaluate();
        }
        let flow = &inst.flows()[k];
        if s == flow.len() {
            let b = self.flow_bound(k, &self.current[k]);
            let rest: f64 = self.flow_floor[k + 1..].iter().sum();
            if partial + b + rest >= self.cutoff() || !b.is_finite() {
                return Ok(());
            }
            return self.descend(k + 1, 0, partial + b);
        }
        for &i in inst.candidates(k, s) {
            if self.current[k].contains(&i) {
                continue;
            }
            let mu = inst.node_caps()[i];
            if self.load[i] + flow.rate > mu + 1e-9 * mu.max(1.0) {
                continue;
            }
            self.load[i] += flow.rate;
            self.current[k].push(i);
            self.descend(k, s + 1, partial)?;
            self.current[k].pop();
            self.load[i] -= flow.rate;
        }
        Ok(())
    }

    fn evaluate(&mut self) -> Result<(), OracleError> {
        self.checked += 1;
        let inst = self.instance;
        let placement = Placement {
            assignment: self.current.clone(),
        };
        let model = match formulation::build_fixed_routing(inst, &placement) {
            Ok(m) => m,
            Err(FormulationError::Disconnected { .. }) => return Ok(()),
            Err(e) => return Err(e.into()),
        };
        self.lp_solves += 1;
        let res = self
            .cfg
            .backend
            .backend()
            .solve(&model.lp, None, &self.cfg.tolerances)?;
        match res.status {
            LpStatus::Optimal => {
                let routing = model.routing(inst, &res.values);
                let g = routing.total();
                if g < self.cutoff() {
                    self.best = Some((g, placement, routing));
                }
                Ok(())
            }
            LpStatus::Infeasible => Ok(()),
            other => Err(OracleError::Solver(other)),
        }
    }
}

/// Exact optimum of the mixed-binary problem by enumeration.
pub fn brute_force_optimum(instance: &ProblemInstance, cfg: &OracleConfig) -> Result<OracleResult, OracleError> {
    let needed = placement_count(instance);
    if needed > cfg.budget {
        return Err(OracleError::BudgetExceeded {
            needed,
            budget: cfg.budget,
        });
    }
    let hops: Vec<Vec<usize>> = (0..instance.num_nodes()).map(|i| hops_from(instance, i)).collect();
    let mut search = Search {
        instance,
        cfg,
        hops,
        flow_floor: Vec::new(),
        load: vec![0.0; instance.num_nodes()],
        current: vec![Vec::new(); instance.num_flows()],
        best: None,
        checked: 0,
        lp_solves: 0,
    };
    search.flow_floor = (0..instance.num_flows())
        .map(|k| cheapest_flow(&search, k, &mut Vec::new()))
        .collect();
    if search.flow_floor.iter().all(|f| f.is_finite()) {
        search.descend(0, 0, 0.0)?;
    }
    let (objective, placement, routing) = match search.best {
        Some((g, p, r)) => (Some(g), Some(p), Some(r)),
        None => (None, None, None),
    };
    log::debug!(
        "oracle: {} placements routed, {} LP solves",
        search.checked,
        search.lp_solves
    );
    Ok(OracleResult {
        objective,
        placement,
        routing,
        placements_checked: search.checked,
        lp_solves: search.lp_solves,
    })
}

/// Smallest hop bound of flow `k` alone, ignoring capacities.
fn cheapest_flow(search: &Search, k: usize, nodes: &mut Vec<usize>) -> f64 {
    let inst = search.instance;
    let s = nodes.len();
    if s == inst.flows()[k].len() {
        return search.flow_bound(k, nodes);
    }
    let mut best = f64::INFINITY;
    for &i in inst.candidates(k, s) {
        if nodes.contains(&i) {
            continue;
        }
        nodes.push(i);
        best = best.min(cheapest_flow(search, k, nodes));
        nodes.pop();
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InstanceBuilder;

    #[test]
    fn budget_is_enforced() {
        let inst = InstanceBuilder::new()
            .node("s")
            .node("a")
            .node("b")
            .node("d")
            .link("s", "a", 1.0)
            .link("a", "d", 1.0)
            .link("s", "b", 1.0)
            .link("b", "d", 1.0)
            .node_capacity("a", 1.0)
            .node_capacity("b", 1.0)
            .function("f", ["a", "b"])
            .flow("k", "s", "d", 1.0, ["f"])
            .build()
            .unwrap();
        assert_eq!(placement_count(&inst), 2);
        let cfg = OracleConfig {
            budget: 1,
            ..Default::default()
        };
        assert!(matches!(
            brute_force_optimum(&inst, &cfg),
            Err(OracleError::BudgetExceeded { needed: 2, budget: 1 })
        ));
        let res = brute_force_optimum(&inst, &OracleConfig::default()).unwrap();
        assert_eq!(res.objective, Some(2.0));
    }
}
