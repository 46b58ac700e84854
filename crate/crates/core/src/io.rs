//! JSON documents for instances and solutions.
//!
//! Writers are canonical: fixed key order, maps sorted by key, and floats in
//! shortest round-trip form, so write -> read -> write is byte-identical.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    FractionalPlacement, InstanceBuilder, ModelError, Placement, PlacementKind, ProblemInstance, RoutingPlan, Solution,
    SolutionStatus,
};
use crate::verify::ViolationReport;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid document: {0}")]
    Invalid(#[from] ModelError),
    #[error("solution does not fit the instance: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for IoError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            return IoError::Io(e.into());
        }
        IoError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    nodes: Vec<String>,
    links: Vec<LinkDoc>,
    #[serde(default)]
    node_capacities: BTreeMap<String, f64>,
    #[serde(default)]
    functions: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    flows: Vec<FlowDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkDoc {
    from: String,
    to: String,
    capacity: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowDoc {
    id: String,
    src: String,
    dst: String,
    rate: f64,
    #[serde(default)]
    chain: Vec<String>,
}

pub fn read_instance<R: Read>(reader: R) -> Result<ProblemInstance, IoError> {
    let doc: InstanceDoc = serde_json::from_reader(reader)?;
    let mut b = InstanceBuilder::new();
    for n in &doc.nodes {
        b.node(n.clone());
    }
    for l in &doc.links {
        b.link(l.from.clone(), l.to.clone(), l.capacity);
    }
    for (n, c) in &doc.node_capacities {
        b.node_capacity(n.clone(), *c);
    }
    for (f, members) in &doc.functions {
        b.function(f.clone(), members.iter().cloned());
    }
    for f in &doc.flows {
        b.flow(
            f.id.clone(),
            f.src.clone(),
            f.dst.clone(),
            f.rate,
            f.chain.iter().cloned(),
        );
    }
    Ok(b.build()?)
}

pub fn instance_from_str(text: &str) -> Result<ProblemInstance, IoError> {
    read_instance(text.as_bytes())
}

pub fn write_instance<W: Write>(instance: &ProblemInstance, mut writer: W) -> Result<(), IoError> {
    let name = |i: usize| instance.node_name(i).to_string();
    let doc = InstanceDoc {
        nodes: instance.nodes().to_vec(),
        links: instance
            .links()
            .iter()
            .map(|l| LinkDoc {
                from: name(l.from),
                to: name(l.to),
                capacity: l.capacity,
            })
            .collect(),
        node_capacities: instance
            .node_caps()
            .iter()
            .enumerate()
            .map(|(i, &c)| (name(i), c))
            .collect(),
        functions: instance
            .functions()
            .iter()
            .map(|f| (f.name.clone(), f.nodes.iter().map(|&i| name(i)).collect()))
            .collect(),
        flows: instance
            .flows()
            .iter()
            .map(|f| FlowDoc {
                id: f.id.clone(),
                src: name(f.src),
                dst: name(f.dst),
                rate: f.rate,
                chain: f.chain.iter().map(|&c| instance.functions()[c].name.clone()).collect(),
            })
            .collect(),
    };
    serde_json::to_writer_pretty(&mut writer, &doc)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn instance_to_string(instance: &ProblemInstance) -> String {
    let mut buf = Vec::new();
    write_instance(instance, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolutionDoc {
    status: String,
    objective: f64,
    placement_kind: String,
    placement: Vec<PlacementEntry>,
    routes: Vec<RouteEntry>,
    violations: Option<ViolationDoc>,
    delta: Option<f64>,
    failed_flows: Vec<String>,
    wall_time_ms: f64,
    #[serde(default)]
    lp_solves: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlacementEntry {
    flow: String,
    /// 1-based chain position.
    position: usize,
    node: String,
    value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RouteEntry {
    flow: String,
    /// Virtual-flow stage, 0 = fresh from the source.
    stage: usize,
    from: String,
    to: String,
    rate: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ViolationDoc {
    max_link_ratio: f64,
    max_node_ratio: f64,
    zero_capacity_link_excess: f64,
    zero_capacity_node_excess: f64,
    conservation_residual: f64,
    placement_residual: f64,
    links: Vec<LinkExcess>,
    nodes: Vec<NodeExcess>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkExcess {
    from: String,
    to: String,
    excess: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeExcess {
    node: String,
    excess: f64,
}

pub fn write_solution<W: Write>(instance: &ProblemInstance, solution: &Solution, mut writer: W) -> Result<(), IoError> {
    let name = |i: usize| instance.node_name(i).to_string();
    let flow_id = |k: usize| instance.flows()[k].id.clone();
    let mut placement = Vec::new();
    let kind = match &solution.placement {
        PlacementKind::Binary(p) => {
            for (k, nodes) in p.assignment.iter().enumerate() {
                for (s, &i) in nodes.iter().enumerate() {
                    placement.push(PlacementEntry {
                        flow: flow_id(k),
                        position: s + 1,
                        node: name(i),
                        value: 1.0,
                    });
                }
            }
            "binary"
        }
        PlacementKind::Fractional(x) => {
            for (k, blocks) in x.values.iter().enumerate() {
                for (s, b) in blocks.iter().enumerate() {
                    for (j, &v) in b.iter().enumerate() {
                        placement.push(PlacementEntry {
                            flow: flow_id(k),
                            position: s + 1,
                            node: name(instance.candidates(k, s)[j]),
                            value: v,
                        });
                    }
                }
            }
            "fractional"
        }
    };
    let mut routes = Vec::new();
    for (k, stages) in solution.routing.rates.iter().enumerate() {
        for (s, stage) in stages.iter().enumerate() {
            for (l, &r) in stage.iter().enumerate() {
                if r != 0.0 {
                    let link = &instance.links()[l];
                    routes.push(RouteEntry {
                        flow: flow_id(k),
                        stage: s,
                        from: name(link.from),
                        to: name(link.to),
                        rate: r,
                    });
                }
            }
        }
    }
    let violations = solution.violations.as_ref().map(|v| ViolationDoc {
        max_link_ratio: v.max_link_ratio,
        max_node_ratio: v.max_node_ratio,
        zero_capacity_link_excess: v.zero_capacity_link_excess,
        zero_capacity_node_excess: v.zero_capacity_node_excess,
        conservation_residual: v.conservation_residual,
        placement_residual: v.placement_residual,
        links: v
            .link_excess
            .iter()
            .enumerate()
            .filter(|(_, &e)| e != 0.0)
            .map(|(l, &e)| LinkExcess {
                from: name(instance.links()[l].from),
                to: name(instance.links()[l].to),
                excess: e,
            })
            .collect(),
        nodes: v
            .node_excess
            .iter()
            .enumerate()
            .filter(|(_, &e)| e != 0.0)
            .map(|(i, &e)| NodeExcess {
                node: name(i),
                excess: e,
            })
            .collect(),
    });
    let doc = SolutionDoc {
        status: solution.status.as_str().to_string(),
        objective: solution.objective,
        placement_kind: kind.to_string(),
        placement,
        routes,
        violations,
        delta: solution.delta,
        failed_flows: solution.failed_flows.iter().map(|&k| flow_id(k)).collect(),
        wall_time_ms: solution.wall_time_ms,
        lp_solves: solution.lp_solves,
    };
    serde_json::to_writer_pretty(&mut writer, &doc)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn solution_to_string(instance: &ProblemInstance, solution: &Solution) -> String {
    let mut buf = Vec::new();
    write_solution(instance, solution, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Reads a solution document written for `instance`.
pub fn read_solution<R: Read>(instance: &ProblemInstance, reader: R) -> Result<Solution, IoError> {
    let doc: SolutionDoc = serde_json::from_reader(reader)?;
    let mismatch = |m: String| IoError::Mismatch(m);
    let flow_of = |id: &str| {
        instance
            .flows()
            .iter()
            .position(|f| f.id == id)
            .ok_or_else(|| mismatch(format!("unknown flow `{id}`")))
    };
    let node_of = |n: &str| {
        instance
            .node_id(n)
            .ok_or_else(|| mismatch(format!("unknown node `{n}`")))
    };
    let status =
        SolutionStatus::parse(&doc.status).ok_or_else(|| mismatch(format!("unknown status `{}`", doc.status)))?;

    let mut values: Vec<Vec<Vec<f64>>> = instance
        .flows()
        .iter()
        .enumerate()
        .map(|(k, f)| {
            (0..f.len())
                .map(|s| vec![0.0; instance.candidates(k, s).len()])
                .collect()
        })
        .collect();
    let mut assigned: Vec<Vec<Option<usize>>> = instance.flows().iter().map(|f| vec![None; f.len()]).collect();
    for e in &doc.placement {
        let k = flow_of(&e.flow)?;
        let i = node_of(&e.node)?;
        if e.position == 0 || e.position > instance.flows()[k].len() {
            return Err(mismatch(format!("flow `{}` has no position {}", e.flow, e.position)));
        }
        let s = e.position - 1;
        let j = instance
            .candidates(k, s)
            .binary_search(&i)
            .map_err(|_| mismatch(format!("node `{}` is not a candidate", e.node)))?;
        values[k][s][j] = e.value;
        assigned[k][s] = Some(i);
    }
    let placement = match doc.placement_kind.as_str() {
        "binary" if status == SolutionStatus::Infeasible && doc.placement.is_empty() => {
            PlacementKind::Binary(Placement {
                assignment: instance.flows().iter().map(|_| Vec::new()).collect(),
            })
        }
        "binary" => {
            let mut assignment = Vec::with_capacity(assigned.len());
            for (k, row) in assigned.into_iter().enumerate() {
                let mut nodes = Vec::with_capacity(row.len());
                for (s, v) in row.into_iter().enumerate() {
                    nodes.push(v.ok_or_else(|| {
                        mismatch(format!(
                            "flow `{}` position {} is unassigned",
                            instance.flows()[k].id,
                            s + 1
                        ))
                    })?);
                }
                assignment.push(nodes);
            }
            PlacementKind::Binary(Placement { assignment })
        }
        "fractional" => PlacementKind::Fractional(FractionalPlacement {
            values,
            aggregates: None,
        }),
        other => return Err(mismatch(format!("unknown placement kind `{other}`"))),
    };

    let mut routing = RoutingPlan::zeros(instance);
    for r in &doc.routes {
        let k = flow_of(&r.flow)?;
        let a = node_of(&r.from)?;
        let b = node_of(&r.to)?;
        let l = instance
            .link_between(a, b)
            .ok_or_else(|| mismatch(format!("no link `{}` -> `{}`", r.from, r.to)))?;
        if r.stage >= instance.flows()[k].stages() {
            return Err(mismatch(format!("flow `{}` has no stage {}", r.flow, r.stage)));
        }
        routing.rates[k][r.stage][l] = r.rate;
    }

    let violations = match doc.violations {
        None => None,
        Some(v) => {
            let mut link_excess = vec![0.0; instance.num_links()];
            for e in &v.links {
                let l = instance
                    .link_between(node_of(&e.from)?, node_of(&e.to)?)
                    .ok_or_else(|| mismatch(format!("no link `{}` -> `{}`", e.from, e.to)))?;
                link_excess[l] = e.excess;
            }
            let mut node_excess = vec![0.0; instance.num_nodes()];
            for e in &v.nodes {
                node_excess[node_of(&e.node)?] = e.excess;
            }
            Some(ViolationReport {
                link_excess,
                node_excess,
                max_link_ratio: v.max_link_ratio,
                max_node_ratio: v.max_node_ratio,
                zero_capacity_link_excess: v.zero_capacity_link_excess,
                zero_capacity_node_excess: v.zero_capacity_node_excess,
                delta: doc.delta,
                conservation_residual: v.conservation_residual,
                placement_residual: v.placement_residual,
            })
        }
    };
    let failed_flows = doc
        .failed_flows
        .iter()
        .map(|id| flow_of(id))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(Solution {
        status,
        placement,
        routing,
        objective: doc.objective,
        delta: doc.delta,
        violations,
        wall_time_ms: doc.wall_time_ms,
        failed_flows,
        lp_solves: doc.lp_solves,
    })
}
