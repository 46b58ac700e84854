//! Penalty continuation (PSUM) and its truncated, rounding variant (PSUM-R).
//!
//! Step 0 solves the relaxation. Stage `t >= 1` replaces the concave penalty
//! `P_eps` by its linearization at the current iterate and re-solves, with
//! `sigma_t = sigma_1 gamma^(t-1)` and `eps_t = eps_1 eta^(t-1)`. The loop
//! stops as soon as every placement value is within `beta` of `{0, 1}`.

use std::fmt::Write as _;
use std::time::Instant;

use log::{debug, info};
use netslice_lp::{BackendKind, LpError, LpResult, LpStatus, Tolerances, WarmStart};
use thiserror::Error;

use crate::formulation::{self, FormulationError, Model};
use crate::model::{FractionalPlacement, Placement, PlacementKind, ProblemInstance, Solution, SolutionStatus};
use crate::penalty::{penalty_value, PenaltyParams};
use crate::verify::check_feasibility;

/// Capacity slack tolerated when certifying a binary solution.
pub const CERTIFY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum PsumError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error("LP solver stopped with status {0:?}")]
    Solver(LpStatus),
    #[error("flow `{0}`: no placement uses distinct nodes for every position")]
    NoDistinctPlacement(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsumConfig {
    pub sigma1: f64,
    pub gamma: f64,
    pub epsilon1: f64,
    pub eta: f64,
    pub p: f64,
    pub t_max: usize,
    /// Binarity tolerance on `min(x, 1 - x)`.
    pub beta: f64,
    pub use_cuts: bool,
    /// Linearize-and-solve steps per `(sigma, eps)` stage.
    pub inner_steps: usize,
    /// Reuse the previous basis for the next stage.
    pub warm_start: bool,
    pub backend: BackendKind,
    pub tolerances: Tolerances,
}

impl Default for PsumConfig {
    fn default() -> Self {
        PsumConfig {
            sigma1: 2.0,
            gamma: 1.1,
            epsilon1: 0.001,
            eta: 0.7,
            p: 0.5,
            t_max: 20,
            beta: 1e-4,
            use_cuts: true,
            inner_steps: 1,
            warm_start: true,
            backend: BackendKind::Bundled,
            tolerances: Tolerances::default(),
        }
    }
}

impl PsumConfig {
    pub fn validate(&self) -> Result<(), PsumError> {
        let bad = |m: String| Err(PsumError::Config(m));
        if !(self.sigma1 > 0.0 && self.sigma1.is_finite()) {
            return bad(format!("sigma1 must be > 0, got {}", self.sigma1));
        }
        if !(self.eta > 0.0 && self.eta < 1.0 && self.gamma > 1.0 && self.gamma.is_finite()) {
            return bad(format!(
                "need 0 < eta < 1 < gamma, got eta = {}, gamma = {}",
                self.eta, self.gamma
            ));
        }
        if !(self.epsilon1 > 0.0 && self.epsilon1.is_finite()) {
            return bad(format!("epsilon1 must be > 0, got {}", self.epsilon1));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return bad(format!("p must lie in (0, 1), got {}", self.p));
        }
        if self.t_max == 0 {
            return bad("t_max must be >= 1".into());
        }
        if !(self.beta >= 0.0 && self.beta < 0.5) {
            return bad(format!("beta must lie in [0, 0.5), got {}", self.beta));
        }
        if self.inner_steps == 0 {
            return bad("inner_steps must be >= 1".into());
        }
        Ok(())
    }

    /// `(sigma_t, eps_t)` of stage `t >= 1`.
    pub fn stage_params(&self, t: usize) -> PenaltyParams {
        let e = t.saturating_sub(1) as i32;
        PenaltyParams {
            p: self.p,
            epsilon: self.epsilon1 * self.eta.powi(e),
            sigma: self.sigma1 * self.gamma.powi(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsumRConfig {
    pub t_max: usize,
    pub theta: f64,
    /// Repair weight on `Delta`; `None` uses [`formulation::default_tau`].
    pub tau: Option<f64>,
}

impl Default for PsumRConfig {
    fn default() -> Self {
        PsumRConfig {
            t_max: 7,
            theta: 0.9,
            tau: None,
        }
    }
}

impl PsumRConfig {
    pub fn validate(&self) -> Result<(), PsumError> {
        if self.t_max == 0 {
            return Err(PsumError::Config("t_max must be >= 1".into()));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(PsumError::Config(format!(
                "theta must lie in (0, 1), got {}",
                self.theta
            )));
        }
        if let Some(tau) = self.tau {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(PsumError::Config(format!("tau must be > 0, got {tau}")));
            }
        }
        Ok(())
    }
}

/// One LP solve of the continuation.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub stage: usize,
    /// Inner step within the stage (always 0 with one step per stage).
    pub step: usize,
    pub sigma: f64,
    pub epsilon: f64,
    /// `g(r)` of the new iterate.
    pub g: f64,
    /// `P_eps(x)` of the new iterate under this stage's `eps`.
    pub penalty: f64,
    /// `g + sigma * P_eps` of the new iterate.
    pub penalized: f64,
    /// `g + sigma * P_eps` of the iterate the step started from, same parameters.
    pub start_penalized: Option<f64>,
    pub binarity_gap: f64,
    pub lp_iters: usize,
    pub ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PsumTrace {
    pub stages: Vec<StageRecord>,
    pub lp_solves: usize,
    /// Stage at which the iterate was declared binary.
    pub binary_at: Option<usize>,
    /// The iterate never became binary and was rounded instead.
    pub rounded_fallback: bool,
    /// Objective of the step-0 relaxation.
    pub relaxation_objective: Option<f64>,
}

impl PsumTrace {
    /// Number of penalized stages run (step 0 excluded).
    pub fn num_stages(&self) -> usize {
        self.stages.last().map_or(0, |r| r.stage)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,sigma,epsilon,g,P,penalized,binarity_gap,lp_iters,ms\n");
        for r in &self.stages {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{:.3}",
                r.stage, r.sigma, r.epsilon, r.g, r.penalty, r.penalized, r.binarity_gap, r.lp_iters, r.ms
            );
        }
        out
    }
}

struct Runner<'a> {
    instance: &'a ProblemInstance,
    cfg: &'a PsumConfig,
    trace: PsumTrace,
}

enum StageOutcome {
    Infeasible,
    Binary(FractionalPlacement),
    Fractional(FractionalPlacement),
}

impl<'a> Runner<'a> {
    fn solve(&mut self, model: &Model, warm: Option<&WarmStart>) -> Result<LpResult, PsumError> {
        let warm = if self.cfg.warm_start { warm } else { None };
        let res = self
            .cfg
            .backend
            .backend()
            .solve(&model.lp, warm, &self.cfg.tolerances)?;
        self.trace.lp_solves += 1;
        Ok(res)
    }

    /// Relaxation plus up to `limit` penalized stages.
    fn run(&mut self, limit: usize) -> Result<StageOutcome, PsumError> {
        let inst = self.instance;
        let mut model = formulation::build_relaxation(inst, self.cfg.use_cuts);
        let started = Instant::now();
        let res = self.solve(&model, None)?;
        match res.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Ok(StageOutcome::Infeasible),
            other => return Err(PsumError::Solver(other)),
        }
        let mut x = model.placement(inst, &res.values);
        let mut g = model.routing(inst, &res.values).total();
        let eps0 = self.cfg.epsilon1;
        self.trace.relaxation_objective = Some(g);
        self.trace.stages.push(StageRecord {
            stage: 0,
            step: 0,
            sigma: 0.0,
            epsilon: eps0,
            g,
            penalty: penalty_value(&x, self.cfg.p, eps0),
            penalized: g,
            start_penalized: None,
            binarity_gap: x.binarity_gap(),
            lp_iters: res.iterations,
            ms: started.elapsed().as_secs_f64() * 1e3,
        });
        let mut warm = WarmStart::from_result(&res);

        for t in 1..=limit {
            if x.binarity_gap() <= self.cfg.beta {
                self.trace.binary_at = Some(t - 1);
                return Ok(StageOutcome::Binary(x));
            }
            let params = self.cfg.stage_params(t);
            for step in 0..self.cfg.inner_steps {
                let start = g + params.sigma * penalty_value(&x, params.p, params.epsilon);
                model.set_penalty_objective(inst, &x, &params)?;
                let started = Instant::now();
                let res = self.solve(&model, Some(&warm))?;
                if res.status != LpStatus::Optimal {
                    // The feasible region never changes, so this is numerical trouble.
                    return Err(PsumError::Solver(res.status));
                }
                x = model.placement(inst, &res.values);
                g = model.routing(inst, &res.values).total();
                let penalty = penalty_value(&x, params.p, params.epsilon);
                let rec = StageRecord {
                    stage: t,
                    step,
                    sigma: params.sigma,
                    epsilon: params.epsilon,
                    g,
                    penalty,
                    penalized: g + params.sigma * penalty,
                    start_penalized: Some(start),
                    binarity_gap: x.binarity_gap(),
                    lp_iters: res.iterations,
                    ms: started.elapsed().as_secs_f64() * 1e3,
                };
                debug!(
                    "stage {t}.{step}: sigma {:.4} eps {:.3e} g {:.6} P {:.6} gap {:.3e} ({} iters)",
                    rec.sigma, rec.epsilon, rec.g, rec.penalty, rec.binarity_gap, rec.lp_iters
                );
                self.trace.stages.push(rec);
                warm = WarmStart::from_result(&res);
                if x.binarity_gap() <= self.cfg.beta {
                    break;
                }
            }
        }
        if x.binarity_gap() <= self.cfg.beta {
            self.trace.binary_at = Some(limit);
            return Ok(StageOutcome::Binary(x));
        }
        Ok(StageOutcome::Fractional(x))
    }

    /// Rounds a binary iterate exactly and certifies it with the slack-free
    /// routing LP. Returns `None` when the certificate fails.
    fn certify(&mut self, x: &FractionalPlacement) -> Result<Option<Solution>, PsumError> {
        let inst = self.instance;
        let placement = x.argmax_placement(inst);
        if placement.validate(inst).is_err() {
            return Ok(None);
        }
        let loads = placement.node_loads(inst);
        if loads
            .iter()
            .zip(inst.node_caps())
            .any(|(l, mu)| *l > mu + CERTIFY_TOL * mu.max(1.0))
        {
            return Ok(None);
        }
        let model = match formulation::build_fixed_routing(inst, &placement) {
            Ok(m) => m,
            Err(FormulationError::Disconnected { .. }) => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let res = self.solve(&model, None)?;
        if res.status != LpStatus::Optimal {
            return Ok(None);
        }
        let routing = model.routing(inst, &res.values);
        let mut sol = Solution::new(
            SolutionStatus::BinaryFeasible,
            PlacementKind::Binary(placement),
            routing,
        );
        attach_report(inst, &mut sol);
        if !sol.violations.as_ref().is_some_and(|v| v.is_clean(CERTIFY_TOL)) {
            sol.status = SolutionStatus::BinaryWithViolations;
        }
        Ok(Some(sol))
    }

    /// Rounds `x` with the threshold/capacity rule and repairs the routing.
    fn round_and_repair(&mut self, x: &FractionalPlacement, rcfg: &PsumRConfig) -> Result<Solution, PsumError> {
        let inst = self.instance;
        let placement = round_placement(inst, x, rcfg.theta, inst.node_caps())?;
        let tau = rcfg.tau.unwrap_or_else(|| formulation::default_tau(inst));
        let model = match formulation::build_routing_repair(inst, &placement, tau) {
            Ok(m) => m,
            Err(FormulationError::Disconnected { flow, .. }) => {
                let mut sol = Solution::infeasible(inst);
                sol.failed_flows = inst.flows().iter().position(|f| f.id == flow).into_iter().collect();
                return Ok(sol);
            }
            Err(e) => return Err(e.into()),
        };
        let res = self.solve(&model, None)?;
        if res.status != LpStatus::Optimal {
            return Err(PsumError::Solver(res.status));
        }
        let routing = model.routing(inst, &res.values);
        let delta = model.index.delta().map(|d| res.values[d.0].max(0.0));
        let mut sol = Solution::new(
            SolutionStatus::BinaryWithViolations,
            PlacementKind::Binary(placement),
            routing,
        );
        sol.delta = delta;
        attach_report(inst, &mut sol);
        if sol.violations.as_ref().is_some_and(|v| v.is_clean(CERTIFY_TOL)) {
            sol.status = SolutionStatus::BinaryFeasible;
        }
        Ok(sol)
    }
}

pub(crate) fn attach_report(instance: &ProblemInstance, sol: &mut Solution) {
    let report = check_feasibility(instance, sol, CERTIFY_TOL).expect("solver output matches the instance");
    sol.violations = Some(report);
}

pub(crate) fn finish(mut sol: Solution, started: Instant, name: &str) -> Solution {
    sol.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    info!(
        "{name}: status {} objective {:.6} in {:.1} ms",
        sol.status, sol.objective, sol.wall_time_ms
    );
    sol
}

/// Runs PSUM up to `cfg.t_max` stages. A binary iterate is certified with
/// the slack-free routing LP; otherwise the last iterate goes through the
/// PSUM-R rounding and repair path and `trace.rounded_fallback` is set.
pub fn psum_solve(instance: &ProblemInstance, cfg: &PsumConfig) -> Result<(Solution, PsumTrace), PsumError> {
    psum_with_limit(instance, cfg, cfg.t_max, &PsumRConfig::default(), "psum")
}

/// PSUM truncated at `rcfg.t_max` stages, then rounding and routing repair.
pub fn psum_r_solve(
    instance: &ProblemInstance,
    cfg: &PsumConfig,
    rcfg: &PsumRConfig,
) -> Result<(Solution, PsumTrace), PsumError> {
    rcfg.validate()?;
    psum_with_limit(instance, cfg, rcfg.t_max, rcfg, "psum-r")
}

fn psum_with_limit(
    instance: &ProblemInstance,
    cfg: &PsumConfig,
    limit: usize,
    rcfg: &PsumRConfig,
    name: &str,
) -> Result<(Solution, PsumTrace), PsumError> {
    cfg.validate()?;
    let started = Instant::now();
    let mut runner = Runner {
        instance,
        cfg,
        trace: PsumTrace::default(),
    };
    let sol = match runner.run(limit)? {
        StageOutcome::Infeasible => Solution::infeasible(instance),
        StageOutcome::Binary(x) => match runner.certify(&x)? {
            Some(sol) => sol,
            None => {
                debug!("{name}: binary iterate failed certification, repairing");
                runner.trace.rounded_fallback = true;
                runner.round_and_repair(&x, rcfg)?
            }
        },
        StageOutcome::Fractional(x) => {
            runner.trace.rounded_fallback = true;
            runner.round_and_repair(&x, rcfg)?
        }
    };
    let mut sol = finish(sol, started, name);
    sol.lp_solves = runner.trace.lp_solves;
    Ok((sol, runner.trace))
}

/// Rounds every `(k, s)` block in ascending order: the largest entry when it
/// reaches `theta`, otherwise the candidate with the most remaining capacity
/// (ties: smallest node id). Each choice charges `lambda(k)` to the node.
/// Nodes already serving an earlier position of the same flow, and hosts
/// ruled out by [`ProblemInstance::allowed_host`], are skipped;
/// if that leaves a block without candidates, the flow's assignment is
/// completed by augmenting paths.
pub fn round_placement(
    instance: &ProblemInstance,
    x: &FractionalPlacement,
    theta: f64,
    capacities: &[f64],
) -> Result<Placement, PsumError> {
    let mut remaining = capacities.to_vec();
    let mut assignment = Vec::with_capacity(instance.num_flows());
    for (k, flow) in instance.flows().iter().enumerate() {
        let mut chosen: Vec<Option<usize>> = vec![None; flow.len()];
        for s in 0..flow.len() {
            let cands = instance.candidates(k, s);
            let block = &x.values[k][s];
            let used = |i: usize| !instance.allowed_host(k, s, i) || chosen.iter().flatten().any(|&c| c == i);
            let mut top: Option<usize> = None;
            for (j, &v) in block.iter().enumerate() {
                if !used(cands[j]) && top.is_none_or(|t| v > block[t]) {
                    top = Some(j);
                }
            }
            let pick = match top {
                Some(j) if block[j] >= theta => Some(cands[j]),
                _ => {
                    let mut best: Option<usize> = None;
                    for &i in cands {
                        if !used(i) && best.is_none_or(|b| remaining[i] > remaining[b]) {
                            best = Some(i);
                        }
                    }
                    best
                }
            };
            chosen[s] = pick;
            if let Some(i) = pick {
                remaining[i] -= flow.rate;
            }
        }
        if chosen.iter().any(Option::is_none) {
            let fixed = complete_distinct(instance, k, &chosen)
                .ok_or_else(|| PsumError::NoDistinctPlacement(flow.id.clone()))?;
            for (s, &i) in fixed.iter().enumerate() {
                if chosen[s].is_none() {
                    remaining[i] -= flow.rate;
                }
            }
            assignment.push(fixed);
        } else {
            assignment.push(chosen.into_iter().flatten().collect());
        }
    }
    Ok(Placement { assignment })
}

/// Perfect matching of positions to distinct candidates, grown from the
/// partial choice by augmenting paths.
fn complete_distinct(instance: &ProblemInstance, k: usize, partial: &[Option<usize>]) -> Option<Vec<usize>> {
    let n = partial.len();
    let mut owner: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    let mut at: Vec<Option<usize>> = partial.to_vec();
    for (s, c) in partial.iter().enumerate() {
        if let Some(i) = c {
            owner.insert(*i, s);
        }
    }
    fn augment(
        instance: &ProblemInstance,
        k: usize,
        s: usize,
        seen: &mut Vec<usize>,
        owner: &mut std::collections::HashMap<usize, usize>,
        at: &mut [Option<usize>],
    ) -> bool {
        for &i in instance.candidates(k, s) {
            if seen.contains(&i) || !instance.allowed_host(k, s, i) {
                continue;
            }
            seen.push(i);
            let free = match owner.get(&i) {
                None => true,
                Some(&o) => augment(instance, k, o, seen, owner, at),
            };
            if free {
                owner.insert(i, s);
                at[s] = Some(i);
                return true;
            }
        }
        false
    }
    for s in 0..n {
        if at[s].is_none() {
            let mut seen = Vec::new();
            if !augment(instance, k, s, &mut seen, &mut owner, &mut at) {
                return None;
            }
        }
    }
    at.into_iter().collect()
}
