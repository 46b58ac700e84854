//! Independent feasibility audit of a solution.
//!
//! Everything here is recomputed from the instance and the raw rates; no
//! solver output is trusted.

use thiserror::Error;

use crate::model::{FractionalPlacement, ModelError, ProblemInstance, Solution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("solution does not match the instance: {0}")]
    Dimension(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ViolationReport {
    /// `delta_ij = max(0, sum_k r_ij(k) - C_ij)` per link.
    pub link_excess: Vec<f64>,
    /// `pi_i = max(0, sum_k sum_f lambda(k) x_{i,f}(k) - mu_i)` per node.
    pub node_excess: Vec<f64>,
    /// `max delta_ij / C_ij` over links with positive capacity.
    pub max_link_ratio: f64,
    /// `max pi_i / mu_i` over nodes with positive capacity.
    pub max_node_ratio: f64,
    /// Largest excess on zero-capacity links (no ratio is defined there).
    pub zero_capacity_link_excess: f64,
    /// Largest excess on zero-capacity nodes.
    pub zero_capacity_node_excess: f64,
    /// Repair-LP `Delta`, copied from the solution when present.
    pub delta: Option<f64>,
    /// Largest absolute residual of the conservation, source and sink rows,
    /// including negative rates.
    pub conservation_residual: f64,
    /// Largest violation of the assignment and no-reuse rows, or of the
    /// `[0, 1]` box on placement values.
    pub placement_residual: f64,
}

impl ViolationReport {
    /// True when every capacity and structural residual is within `tol`.
    pub fn is_clean(&self, tol: f64) -> bool {
        self.capacity_clean(tol) && self.conservation_residual <= tol && self.placement_residual <= tol
    }

    pub fn capacity_clean(&self, tol: f64) -> bool {
        self.max_link_ratio <= tol
            && self.max_node_ratio <= tol
            && self.zero_capacity_link_excess <= tol
            && self.zero_capacity_node_excess <= tol
    }
}

/// Audits `solution` against every constraint of the model.
pub fn check_feasibility(
    instance: &ProblemInstance,
    solution: &Solution,
    _tol: f64,
) -> Result<ViolationReport, VerifyError> {
    let x = solution.placement.to_fractional(instance);
    x.check_shape(instance)?;
    solution.routing.check_shape(instance)?;
    let mut report = audit(instance, &x, &solution.routing.rates);
    report.delta = solution.delta;
    Ok(report)
}

fn audit(instance: &ProblemInstance, x: &FractionalPlacement, rates: &[Vec<Vec<f64>>]) -> ViolationReport {
    let mut report = ViolationReport::default();

    let mut load = vec![0.0; instance.num_links()];
    for stages in rates {
        for stage in stages {
            for (l, &r) in stage.iter().enumerate() {
                load[l] += r;
            }
        }
    }
    for (l, link) in instance.links().iter().enumerate() {
        let excess = (load[l] - link.capacity).max(0.0);
        report.link_excess.push(excess);
        if link.capacity > 0.0 {
            report.max_link_ratio = report.max_link_ratio.max(excess / link.capacity);
        } else {
            report.zero_capacity_link_excess = report.zero_capacity_link_excess.max(excess);
        }
    }

    let node_load = x.node_loads(instance);
    for (i, &mu) in instance.node_caps().iter().enumerate() {
        let excess = (node_load[i] - mu).max(0.0);
        report.node_excess.push(excess);
        if mu > 0.0 {
            report.max_node_ratio = report.max_node_ratio.max(excess / mu);
        } else {
            report.zero_capacity_node_excess = report.zero_capacity_node_excess.max(excess);
        }
    }

    let n_nodes = instance.num_nodes();
    let mut worst: f64 = 0.0;
    let mut supply = vec![0.0; n_nodes];
    for (k, flow) in instance.flows().iter().enumerate() {
        let lambda = flow.rate;
        for s in 0..flow.stages() {
            let stage = &rates[k][s];
            // Net supply the stage must ship out of each node.
            supply.iter_mut().for_each(|v| *v = 0.0);
            if s == 0 {
                supply[flow.src] += lambda;
            } else {
                for (j, &i) in instance.candidates(k, s - 1).iter().enumerate() {
                    supply[i] += lambda * x.values[k][s - 1][j];
                }
            }
            if s == flow.len() {
                supply[flow.dst] -= lambda;
            } else {
                for (j, &i) in instance.candidates(k, s).iter().enumerate() {
                    supply[i] -= lambda * x.values[k][s][j];
                }
            }
            for (i, &b) in supply.iter().enumerate() {
                let out: f64 = instance.out_links(i).iter().map(|&l| stage[l]).sum();
                let inn: f64 = instance.in_links(i).iter().map(|&l| stage[l]).sum();
                worst = worst.max((out - inn - b).abs());
            }
            for &r in stage {
                worst = worst.max(-r);
            }
            if s == 0 {
                let out: f64 = instance.out_links(flow.src).iter().map(|&l| stage[l]).sum();
                worst = worst.max((out - lambda).abs());
            }
            if s == flow.len() {
                let inn: f64 = instance.in_links(flow.dst).iter().map(|&l| stage[l]).sum();
                worst = worst.max((inn - lambda).abs());
            }
        }
    }
    report.conservation_residual = worst;

    let mut placement: f64 = x.block_sum_error().max(x.reuse_excess(instance));
    for &v in x.values.iter().flatten().flatten() {
        placement = placement.max(-v).max(v - 1.0);
    }
    report.placement_residual = placement;
    report
}
