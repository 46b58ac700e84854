//! Benchmark harness: generate a suite, run algorithms, tabulate.
//!
//! Records are keyed by `(instance, algorithm)` and always emitted in that
//! order, whatever the number of workers.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use log::{info, warn};
use netslice_lp::{BackendKind, LpStatus, Tolerances};
use rayon::prelude::*;
use thiserror::Error;

use crate::formulation;
use crate::generate::{self, FishParams, MeshParams, RandomParams, TightnessCase, TripleSet};
use crate::heuristics::{self, HeuristicConfig, HeuristicIIIConfig};
use crate::model::{PlacementKind, ProblemInstance, Solution, SolutionStatus};
use crate::psum::{self, attach_report, PsumConfig, PsumRConfig};
use crate::rng::Rng;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("suite generation failed for seed {seed}: {message}")]
    Generate { seed: u64, message: String },
    #[error("cannot start {0} workers")]
    Workers(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Psum,
    PsumR,
    H1,
    H2,
    H3,
    H4,
    LpRelax,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Psum,
        Algorithm::PsumR,
        Algorithm::H1,
        Algorithm::H2,
        Algorithm::H3,
        Algorithm::H4,
        Algorithm::LpRelax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Psum => "psum",
            Algorithm::PsumR => "psum-r",
            Algorithm::H1 => "h1",
            Algorithm::H2 => "h2",
            Algorithm::H3 => "h3",
            Algorithm::H4 => "h4",
            Algorithm::LpRelax => "lp-relax",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Algorithm::ALL.iter().map(|a| a.name()).collect();
            format!("unknown algorithm `{s}` (expected one of {})", names.join(", "))
        })
    }
}

/// Parameters of every algorithm, as one bundle.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlgorithmSettings {
    pub psum: PsumConfig,
    pub psum_r: PsumRConfig,
    pub heuristic: HeuristicConfig,
    pub heuristic3: HeuristicIIIConfig,
}

impl AlgorithmSettings {
    /// Points every algorithm at the same LP backend.
    pub fn with_backend(mut self, backend: BackendKind) -> Self {
        self.psum.backend = backend;
        self.heuristic.backend = backend;
        self.heuristic3.backend = backend;
        self
    }
}

/// Output of one algorithm run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub solution: Solution,
    /// Penalized stages, for the PSUM family.
    pub stages: Option<usize>,
}

/// Runs `algorithm` on `instance`. Errors are returned as text so a harness
/// can record them and move on.
pub fn run_algorithm(
    instance: &ProblemInstance,
    algorithm: Algorithm,
    settings: &AlgorithmSettings,
) -> Result<RunOutput, String> {
    let plain = |solution: Solution| RunOutput { solution, stages: None };
    match algorithm {
        Algorithm::Psum => psum::psum_solve(instance, &settings.psum)
            .map(|(solution, trace)| RunOutput {
                solution,
                stages: Some(trace.num_stages()),
            })
            .map_err(|e| e.to_string()),
        Algorithm::PsumR => psum::psum_r_solve(instance, &settings.psum, &settings.psum_r)
            .map(|(solution, trace)| RunOutput {
                solution,
                stages: Some(trace.num_stages()),
            })
            .map_err(|e| e.to_string()),
        Algorithm::H1 => heuristics::heuristic1(instance, &settings.heuristic)
            .map(plain)
            .map_err(|e| e.to_string()),
        Algorithm::H2 => heuristics::heuristic2(instance, &settings.heuristic)
            .map(plain)
            .map_err(|e| e.to_string()),
        Algorithm::H3 => heuristics::heuristic3(instance, &settings.heuristic3)
            .map(plain)
            .map_err(|e| e.to_string()),
        Algorithm::H4 => heuristics::heuristic4(instance, &settings.heuristic)
            .map(plain)
            .map_err(|e| e.to_string()),
        Algorithm::LpRelax => lp_relaxation(instance, settings.psum.use_cuts, &settings.psum).map(plain),
    }
}

/// The relaxation as a solution: fractional placement, status
/// `optimal-relaxation` (or `infeasible`).
pub fn lp_relaxation(instance: &ProblemInstance, with_cuts: bool, cfg: &PsumConfig) -> Result<Solution, String> {
    let started = Instant::now();
    let model = formulation::build_relaxation(instance, with_cuts);
    let res = cfg
        .backend
        .backend()
        .solve(&model.lp, None, &cfg.tolerances)
        .map_err(|e| e.to_string())?;
    let mut sol = match res.status {
        LpStatus::Optimal => Solution::new(
            SolutionStatus::OptimalRelaxation,
            PlacementKind::Fractional(model.placement(instance, &res.values)),
            model.routing(instance, &res.values),
        ),
        LpStatus::Infeasible => Solution::infeasible(instance),
        other => return Err(format!("LP solver stopped with status {other:?}")),
    };
    if sol.status == SolutionStatus::OptimalRelaxation {
        attach_report(instance, &mut sol);
    }
    sol.lp_solves = 1;
    sol.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(sol)
}

/// Cut-free relaxation optimum, the reference of every ratio.
pub fn lp_bound(instance: &ProblemInstance, backend: BackendKind, tol: &Tolerances) -> Result<Option<f64>, String> {
    let model = formulation::build_relaxation(instance, false);
    let res = backend
        .backend()
        .solve(&model.lp, None, tol)
        .map_err(|e| e.to_string())?;
    match res.status {
        LpStatus::Optimal => Ok(Some(model.routing(instance, &res.values).total())),
        LpStatus::Infeasible => Ok(None),
        other => Err(format!("LP solver stopped with status {other:?}")),
    }
}

/// Instance family of a suite.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    Mesh(MeshParams),
    Fish(FishParams),
    Random(RandomParams),
    /// Random triple sets of size `k` with the given density.
    ThreeDm {
        k: usize,
        density: f64,
        lambda: f64,
    },
    Tightness {
        case: TightnessCase,
        eps: f64,
    },
}

impl Generator {
    pub fn generate(&self, seed: u64) -> Result<ProblemInstance, String> {
        match self {
            Generator::Mesh(p) => generate::gen_mesh(p, seed).map_err(|e| e.to_string()),
            Generator::Fish(p) => generate::gen_fish(p, seed).map_err(|e| e.to_string()),
            Generator::Random(p) => generate::gen_random(p, seed).map_err(|e| e.to_string()),
            Generator::ThreeDm { k, density, lambda } => {
                let mut rng = Rng::new(seed);
                let triples = TripleSet::random(*k, *density, &mut rng);
                generate::gen_3dm(&triples, *lambda).map_err(|e| e.to_string())
            }
            Generator::Tightness { case, eps } => generate::gen_tightness(*case, *eps).map_err(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSpec {
    /// Prefix of instance ids; instance `i` is `{name}-{i:03}`.
    pub name: String,
    pub generator: Generator,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub workers: usize,
    /// Write `wall_ms` as 0 so that repeated runs give identical bytes.
    pub deterministic: bool,
    pub settings: AlgorithmSettings,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            workers: 1,
            deterministic: false,
            settings: AlgorithmSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub instance_id: String,
    pub seed: u64,
    pub algorithm: Algorithm,
    /// A [`SolutionStatus`] name, or `error`.
    pub status: String,
    pub objective: Option<f64>,
    pub lp_bound: Option<f64>,
    pub ratio: Option<f64>,
    pub max_link_viol_ratio: Option<f64>,
    pub max_node_viol_ratio: Option<f64>,
    pub delta: Option<f64>,
    pub wall_ms: f64,
    pub lp_solves: usize,
    pub stages: Option<usize>,
}

impl BenchRecord {
    pub fn is_binary(&self) -> bool {
        self.status == SolutionStatus::BinaryFeasible.as_str()
            || self.status == SolutionStatus::BinaryWithViolations.as_str()
    }
}

pub const CSV_HEADER: &str = "instance_id,seed,algorithm,status,objective,lp_bound,ratio,\
max_link_viol_ratio,max_node_viol_ratio,delta,wall_ms,lp_solves,stages";

/// `x` rounded to 12 significant digits, printed in shortest form.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    // Avoid "-0".
    if rounded == 0.0 {
        return "0".into();
    }
    if (1e-5..1e15).contains(&rounded.abs()) {
        rounded.to_string()
    } else {
        format!("{rounded:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

pub fn to_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.instance_id,
            r.seed,
            r.algorithm,
            r.status,
            opt(r.objective),
            opt(r.lp_bound),
            opt(r.ratio),
            opt(r.max_link_viol_ratio),
            opt(r.max_node_viol_ratio),
            opt(r.delta),
            fmt_sig(r.wall_ms),
            r.lp_solves,
            r.stages.map(|s| s.to_string()).unwrap_or_default()
        );
    }
    out
}

/// The `xi` grid `1.00, 1.01, ..., 3.50`.
pub fn xi_grid() -> Vec<f64> {
    (0..=250).map(|i| 1.0 + i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSummary {
    /// `xi` then, per algorithm, the number of binary solutions with
    /// `ratio <= xi`.
    pub cumulative_csv: String,
    /// Per algorithm: min, median and max of both worst violation ratios
    /// over binary solutions.
    pub violations_csv: String,
}

fn algorithms_in(records: &[BenchRecord]) -> Vec<Algorithm> {
    let mut algs: Vec<Algorithm> = records.iter().map(|r| r.algorithm).collect();
    algs.sort();
    algs.dedup();
    algs
}

fn min_median_max(mut v: Vec<f64>) -> Option<(f64, f64, f64)> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    Some((v[0], median, v[n - 1]))
}

pub fn summarize(records: &[BenchRecord]) -> BenchSummary {
    let algs = algorithms_in(records);
    let mut cumulative = String::from("xi");
    for a in &algs {
        let _ = write!(cumulative, ",{a}");
    }
    cumulative.push('\n');
    for xi in xi_grid() {
        let _ = write!(cumulative, "{xi:.2}");
        for &a in &algs {
            let n = records
                .iter()
                .filter(|r| r.algorithm == a && r.is_binary())
                .filter(|r| r.ratio.is_some_and(|q| q <= xi + 1e-12))
                .count();
            let _ = write!(cumulative, ",{n}");
        }
        cumulative.push('\n');
    }

    let mut violations = String::from("algorithm,metric,count,min,median,max\n");
    for &a in &algs {
        let binary: Vec<&BenchRecord> = records.iter().filter(|r| r.algorithm == a && r.is_binary()).collect();
        for (metric, get) in [
            (
                "max_link_viol_ratio",
                (|r: &BenchRecord| r.max_link_viol_ratio) as fn(&BenchRecord) -> Option<f64>,
            ),
            ("max_node_viol_ratio", |r: &BenchRecord| r.max_node_viol_ratio),
        ] {
            let values: Vec<f64> = binary.iter().filter_map(|r| get(r)).collect();
            let count = values.len();
            match min_median_max(values) {
                Some((lo, mid, hi)) => {
                    let _ = writeln!(
                        violations,
                        "{a},{metric},{count},{},{},{}",
                        fmt_sig(lo),
                        fmt_sig(mid),
                        fmt_sig(hi)
                    );
                }
                None => {
                    let _ = writeln!(violations, "{a},{metric},0,,,");
                }
            }
        }
    }
    BenchSummary {
        cumulative_csv: cumulative,
        violations_csv: violations,
    }
}

fn record_of(
    instance_id: &str,
    seed: u64,
    algorithm: Algorithm,
    bound: Option<f64>,
    outcome: Result<RunOutput, String>,
    deterministic: bool,
) -> BenchRecord {
    let mut rec = BenchRecord {
        instance_id: instance_id.to_string(),
        seed,
        algorithm,
        status: "error".into(),
        objective: None,
        lp_bound: bound,
        ratio: None,
        max_link_viol_ratio: None,
        max_node_viol_ratio: None,
        delta: None,
        wall_ms: 0.0,
        lp_solves: 0,
        stages: None,
    };
    match outcome {
        Ok(out) => {
            let sol = out.solution;
            rec.status = sol.status.as_str().to_string();
            rec.stages = out.stages;
            rec.lp_solves = sol.lp_solves;
            rec.delta = sol.delta;
            if !deterministic {
                rec.wall_ms = sol.wall_time_ms;
            }
            if sol.status != SolutionStatus::Infeasible {
                rec.objective = Some(sol.objective);
                rec.ratio = bound.map(|b| ratio(sol.objective, b));
                if let Some(v) = &sol.violations {
                    rec.max_link_viol_ratio = Some(v.max_link_ratio);
                    rec.max_node_viol_ratio = Some(v.max_node_ratio);
                }
            }
        }
        Err(e) => warn!("{instance_id} {algorithm}: {e}"),
    }
    rec
}

/// `objective / bound`, with `0 / 0 = 1`.
pub fn ratio(objective: f64, bound: f64) -> f64 {
    if bound > 0.0 {
        objective / bound
    } else if objective <= 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// Generates every instance of `suite` and runs each algorithm on it.
pub fn run_bench(
    suite: &SuiteSpec,
    algorithms: &[Algorithm],
    opts: &BenchOptions,
) -> Result<(Vec<BenchRecord>, BenchSummary), BenchError> {
    let instances: Vec<(String, u64, ProblemInstance)> = suite
        .seeds
        .iter()
        .enumerate()
        .map(|(i, &seed)| {
            suite
                .generator
                .generate(seed)
                .map(|inst| (format!("{}-{i:03}", suite.name), seed, inst))
                .map_err(|message| BenchError::Generate { seed, message })
        })
        .collect::<Result<_, _>>()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|_| BenchError::Workers(opts.workers))?;
    let settings = &opts.settings;

    let bounds: Vec<Option<f64>> = pool.install(|| {
        instances
            .par_iter()
            .map(|(id, _, inst)| {
                lp_bound(inst, settings.psum.backend, &settings.psum.tolerances).unwrap_or_else(|e| {
                    warn!("{id}: LP bound failed: {e}");
                    None
                })
            })
            .collect()
    });

    let cells: Vec<(usize, Algorithm)> = (0..instances.len())
        .flat_map(|i| algorithms.iter().map(move |&a| (i, a)))
        .collect();
    let mut records: Vec<BenchRecord> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(i, a)| {
                let (id, seed, inst) = &instances[i];
                let outcome = run_algorithm(inst, a, settings);
                record_of(id, *seed, a, bounds[i], outcome, opts.deterministic)
            })
            .collect()
    });
    records.sort_by(|a, b| (&a.instance_id, a.algorithm).cmp(&(&b.instance_id, b.algorithm)));
    info!("bench {}: {} records", suite.name, records.len());
    let summary = summarize(&records);
    Ok((records, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(0.1 + 0.2), "0.3");
        assert_eq!(fmt_sig(222.934811234567891), "222.934811235");
        assert_eq!(fmt_sig(-0.0), "0");
        assert_eq!(fmt_sig(1e-20 / 3.0), "3.33333333333e-21");
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("h5".parse::<Algorithm>().is_err());
    }

    #[test]
    fn xi_grid_endpoints() {
        let g = xi_grid();
        assert_eq!(g.len(), 251);
        assert_eq!(g[0], 1.0);
        assert!((g[250] - 3.5).abs() < 1e-12);
    }

    #[test]
    fn median_of_even_count() {
        assert_eq!(min_median_max(vec![3.0, 1.0, 2.0, 4.0]), Some((1.0, 2.5, 4.0)));
        assert_eq!(min_median_max(vec![]), None);
    }
}
