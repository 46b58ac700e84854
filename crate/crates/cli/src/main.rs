use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use netslice::bench::{self, Algorithm, AlgorithmSettings, BenchOptions, Generator, SuiteSpec};
use netslice::generate::{FishParams, MeshParams, RandomParams, TightnessCase};
use netslice::heuristics::{HeuristicConfig, HeuristicIIIConfig, WeightingConfig};
use netslice::io;
use netslice::oracle::{self, OracleConfig};
use netslice::psum::{self, PsumConfig, PsumRConfig};
use netslice::verify::check_feasibility;
use netslice::{ProblemInstance, SolutionStatus};
use netslice_lp::BackendKind;

const EXIT_INFEASIBLE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "netslice",
    version,
    about = "Joint function placement and routing for network slices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a generated instance as JSON.
    Generate(GenerateArgs),
    /// Run one algorithm on an instance and write the solution.
    Solve(SolveArgs),
    /// Run algorithms over a seeded suite and write CSV tables.
    Bench(BenchArgs),
    /// Audit a solution against its instance.
    Verify(VerifyArgs),
    /// Exhaustive optimum of a small instance.
    Oracle(OracleArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Family {
    /// 10x10 grid with diagonals, 30 flows.
    Mesh,
    /// Layered fish-shaped network.
    Fish,
    /// Small random instance with capacities that guarantee a binary relaxation optimum.
    RandomGenerous,
    /// Small random instance with scarce capacities.
    RandomTight,
    /// Matching-reduction instance over random triples.
    #[value(name = "3dm")]
    ThreeDm,
    /// Tightness gadget, node case.
    TightnessNode,
    /// Tightness gadget, link case.
    TightnessLink,
}

#[derive(Args, Debug, Clone)]
struct FamilyArgs {
    /// Instance family.
    #[arg(long, value_enum)]
    family: Family,
    /// Triple-set size (3dm).
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Probability of each triple (3dm).
    #[arg(long, default_value_t = 0.2)]
    density: f64,
    /// Flow rate (3dm).
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Gadget slack, in [0, 1) (tightness families).
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
}

impl FamilyArgs {
    fn generator(&self) -> Generator {
        match self.family {
            Family::Mesh => Generator::Mesh(MeshParams::default()),
            Family::Fish => Generator::Fish(FishParams::default()),
            Family::RandomGenerous => Generator::Random(RandomParams::generous()),
            Family::RandomTight => Generator::Random(RandomParams::tight()),
            Family::ThreeDm => Generator::ThreeDm {
                k: self.k,
                density: self.density,
                lambda: self.lambda,
            },
            Family::TightnessNode => Generator::Tightness {
                case: TightnessCase::Node,
                eps: self.eps,
            },
            Family::TightnessLink => Generator::Tightness {
                case: TightnessCase::Link,
                eps: self.eps,
            },
        }
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Algorithm parameters. Every flag overrides one default.
#[derive(Args, Debug, Clone)]
struct Overrides {
    /// PSUM: initial penalty weight.
    #[arg(long, default_value_t = 2.0)]
    sigma1: f64,
    /// PSUM: penalty weight growth per stage (> 1).
    #[arg(long, default_value_t = 1.1)]
    gamma: f64,
    /// PSUM: initial smoothing.
    #[arg(long, default_value_t = 0.001)]
    epsilon1: f64,
    /// PSUM: smoothing decay per stage, in (0, 1).
    #[arg(long, default_value_t = 0.7)]
    eta: f64,
    /// PSUM: penalty exponent, in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// PSUM: maximum number of penalized stages.
    #[arg(long, default_value_t = 20)]
    psum_stages: usize,
    /// PSUM: binarity tolerance.
    #[arg(long, default_value_t = 1e-4)]
    beta: f64,
    /// PSUM: linearize-and-solve steps per stage.
    #[arg(long, default_value_t = 1)]
    inner_steps: usize,
    /// Solve relaxations without the valid cuts.
    #[arg(long)]
    no_cuts: bool,
    /// PSUM-R: stages before rounding.
    #[arg(long, default_value_t = 7)]
    rounding_stages: usize,
    /// PSUM-R and heuristic III: rounding threshold, in (0, 1).
    #[arg(long, default_value_t = 0.9)]
    theta: f64,
    /// Weight of the worst link overload in repair LPs [default: 10 |L| max rate].
    #[arg(long)]
    tau: Option<f64>,
    /// Heuristics I, II, IV: weight of the hop term.
    #[arg(long, default_value_t = 1.0)]
    w1: f64,
    /// Heuristics I, II, IV: weight of the inverse-capacity term [default: 10 max mu].
    #[arg(long)]
    w2: Option<f64>,
    /// Heuristic IV: skip the local-search pass.
    #[arg(long)]
    no_local_search: bool,
    /// Heuristic III: bootstrapping rounds.
    #[arg(long, default_value_t = 3)]
    bootstrap_rounds: usize,
    /// Heuristic III: values at or below this are fixed to zero.
    #[arg(long, default_value_t = 0.1)]
    theta1: f64,
    /// Heuristic III: values at or above this are fixed to one.
    #[arg(long, default_value_t = 0.9)]
    theta2: f64,
    /// LP backend: bundled or microlp.
    #[arg(long, default_value = "bundled")]
    backend: BackendKind,
}

impl Overrides {
    fn settings(&self) -> Result<AlgorithmSettings, String> {
        let psum = PsumConfig {
            sigma1: self.sigma1,
            gamma: self.gamma,
            epsilon1: self.epsilon1,
            eta: self.eta,
            p: self.p,
            t_max: self.psum_stages,
            beta: self.beta,
            use_cuts: !self.no_cuts,
            inner_steps: self.inner_steps,
            ..PsumConfig::default()
        };
        let psum_r = PsumRConfig {
            t_max: self.rounding_stages,
            theta: self.theta,
            tau: self.tau,
        };
        let heuristic = HeuristicConfig {
            weighting: WeightingConfig {
                w1: self.w1,
                w2: self.w2,
            },
            tau: self.tau,
            local_search: !self.no_local_search,
            ..HeuristicConfig::default()
        };
        let heuristic3 = HeuristicIIIConfig {
            t_max: self.bootstrap_rounds,
            theta1: self.theta1,
            theta2: self.theta2,
            theta: self.theta,
            tau: self.tau,
            use_cuts: !self.no_cuts,
            ..HeuristicIIIConfig::default()
        };
        psum.validate().map_err(|e| e.to_string())?;
        psum_r.validate().map_err(|e| e.to_string())?;
        heuristic.validate().map_err(|e| e.to_string())?;
        heuristic3.validate().map_err(|e| e.to_string())?;
        Ok(AlgorithmSettings {
            psum,
            psum_r,
            heuristic,
            heuristic3,
        }
        .with_backend(self.backend))
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Instance JSON file.
    #[arg(long)]
    instance: PathBuf,
    /// psum, psum-r, h1, h2, h3, h4 or lp-relax.
    #[arg(long)]
    algorithm: Algorithm,
    #[command(flatten)]
    overrides: Overrides,
    /// Solution file; `<out-dir>/<instance stem>.<algorithm>.json` when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Directory for outputs without an explicit path.
    #[arg(long, env = "NETSLICE_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    /// Per-stage CSV trace (psum and psum-r only).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Seeds as `a..b` (half-open) or a comma-separated list.
    #[arg(long, default_value = "0..10")]
    seeds: String,
    /// Comma-separated algorithm names.
    #[arg(long, default_value = "psum,psum-r,h1,h2,h3,h4")]
    algorithms: String,
    /// Prefix of instance ids [default: the family name].
    #[arg(long)]
    name: Option<String>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Write wall times as 0 so that repeated runs give identical files.
    #[arg(long)]
    deterministic: bool,
    #[command(flatten)]
    overrides: Overrides,
    /// Directory for records.csv, cumulative.csv and violations.csv.
    #[arg(long, env = "NETSLICE_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Instance JSON file.
    #[arg(long)]
    instance: PathBuf,
    /// Solution JSON file written for the instance.
    #[arg(long)]
    solution: PathBuf,
    /// Tolerance for the clean/violated verdict.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Instance JSON file.
    #[arg(long)]
    instance: PathBuf,
    /// Largest number of raw placements to search.
    #[arg(long, default_value_t = 1_000_000)]
    budget: u128,
    /// LP backend: bundled or microlp.
    #[arg(long, default_value = "bundled")]
    backend: BackendKind,
    /// Solution file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// A failure with its exit code and a short machine-readable kind.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            kind: "usage",
            message: message.into(),
        }
    }

    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            kind: "input",
            message: message.into(),
        }
    }

    fn solver(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INFEASIBLE,
            kind: "solver",
            message: message.into(),
        }
    }

    fn output(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            kind: "output",
            message: message.into(),
        }
    }
}

fn read_instance(path: &Path) -> Result<ProblemInstance, Failure> {
    let file = File::open(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    io::read_instance(BufReader::new(file)).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let fail = |e: &dyn std::fmt::Display| Failure::output(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| fail(&e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| fail(&e))?;
    tmp.write_all(bytes).map_err(|e| fail(&e))?;
    tmp.as_file().sync_all().map_err(|e| fail(&e))?;
    tmp.persist(path).map_err(|e| fail(&e.error))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Failure> {
    match output {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::output(format!("stdout: {e}")))
        }
    }
}

fn generate(args: &GenerateArgs) -> Result<(), Failure> {
    let inst = args.family.generator().generate(args.seed).map_err(Failure::usage)?;
    emit(args.output.as_deref(), &io::instance_to_string(&inst))
}

fn solve(args: &SolveArgs) -> Result<(), Failure> {
    let settings = args.overrides.settings().map_err(Failure::usage)?;
    if args.trace.is_some() && !matches!(args.algorithm, Algorithm::Psum | Algorithm::PsumR) {
        return Err(Failure::usage("--trace needs --algorithm psum or psum-r"));
    }
    let inst = read_instance(&args.instance)?;
    let (solution, trace) = match args.algorithm {
        Algorithm::Psum => psum::psum_solve(&inst, &settings.psum)
            .map(|(s, t)| (s, Some(t)))
            .map_err(|e| Failure::solver(e.to_string()))?,
        Algorithm::PsumR => psum::psum_r_solve(&inst, &settings.psum, &settings.psum_r)
            .map(|(s, t)| (s, Some(t)))
            .map_err(|e| Failure::solver(e.to_string()))?,
        other => bench::run_algorithm(&inst, other, &settings)
            .map(|out| (out.solution, None))
            .map_err(Failure::solver)?,
    };
    let output = args.output.clone().unwrap_or_else(|| {
        let stem = args
            .instance
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "instance".into());
        args.out_dir.join(format!("{stem}.{}.json", args.algorithm))
    });
    write_atomic(&output, io::solution_to_string(&inst, &solution).as_bytes())?;
    if let (Some(path), Some(trace)) = (&args.trace, &trace) {
        write_atomic(path, trace.to_csv().as_bytes())?;
    }
    println!(
        "status {} objective {} delta {}",
        solution.status,
        bench::fmt_sig(solution.objective),
        solution.delta.map(bench::fmt_sig).unwrap_or_else(|| "-".into())
    );
    if solution.status == SolutionStatus::Infeasible {
        return Err(Failure {
            code: EXIT_INFEASIBLE,
            kind: "infeasible",
            message: format!("{} found no solution", args.algorithm),
        });
    }
    Ok(())
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    let bad = || format!("bad seed list `{text}` (expected a..b or a,b,c)");
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a >= b {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn family_name(f: Family) -> String {
    f.to_possible_value()
        .map(|v| v.get_name().to_string())
        .unwrap_or_default()
}

fn run_bench(args: &BenchArgs) -> Result<(), Failure> {
    let settings = args.overrides.settings().map_err(Failure::usage)?;
    let seeds = parse_seeds(&args.seeds).map_err(Failure::usage)?;
    let algorithms = args
        .algorithms
        .split(',')
        .map(|s| s.trim().parse::<Algorithm>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::usage)?;
    if args.workers == 0 {
        return Err(Failure::usage("--workers must be >= 1"));
    }
    let suite = SuiteSpec {
        name: args.name.clone().unwrap_or_else(|| family_name(args.family.family)),
        generator: args.family.generator(),
        seeds,
    };
    let opts = BenchOptions {
        workers: args.workers,
        deterministic: args.deterministic,
        settings,
    };
    let (records, summary) = bench::run_bench(&suite, &algorithms, &opts).map_err(|e| Failure::usage(e.to_string()))?;
    write_atomic(&args.out_dir.join("records.csv"), bench::to_csv(&records).as_bytes())?;
    write_atomic(&args.out_dir.join("cumulative.csv"), summary.cumulative_csv.as_bytes())?;
    write_atomic(&args.out_dir.join("violations.csv"), summary.violations_csv.as_bytes())?;
    println!("{} records written to {}", records.len(), args.out_dir.display());
    Ok(())
}

fn verify(args: &VerifyArgs) -> Result<(), Failure> {
    let inst = read_instance(&args.instance)?;
    let file = File::open(&args.solution).map_err(|e| Failure::input(format!("{}: {e}", args.solution.display())))?;
    let sol = io::read_solution(&inst, BufReader::new(file))
        .map_err(|e| Failure::input(format!("{}: {e}", args.solution.display())))?;
    let rep = check_feasibility(&inst, &sol, args.tol).map_err(|e| Failure::input(e.to_string()))?;
    let recomputed = sol.routing.total();
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        out.push_str(k);
        out.push(' ');
        out.push_str(&v);
        out.push('\n');
    };
    line("status", sol.status.to_string());
    line("objective", bench::fmt_sig(recomputed));
    line(
        "objective_matches",
        ((recomputed - sol.objective).abs() <= 1e-9 * recomputed.abs().max(1.0)).to_string(),
    );
    line("max_link_viol_ratio", bench::fmt_sig(rep.max_link_ratio));
    line("max_node_viol_ratio", bench::fmt_sig(rep.max_node_ratio));
    line(
        "zero_capacity_link_excess",
        bench::fmt_sig(rep.zero_capacity_link_excess),
    );
    line(
        "zero_capacity_node_excess",
        bench::fmt_sig(rep.zero_capacity_node_excess),
    );
    line("conservation_residual", bench::fmt_sig(rep.conservation_residual));
    line("placement_residual", bench::fmt_sig(rep.placement_residual));
    line("clean", rep.is_clean(args.tol).to_string());
    emit(None, &out)
}

fn run_oracle(args: &OracleArgs) -> Result<(), Failure> {
    let inst = read_instance(&args.instance)?;
    let cfg = OracleConfig {
        budget: args.budget,
        backend: args.backend,
        ..OracleConfig::default()
    };
    let res = oracle::brute_force_optimum(&inst, &cfg).map_err(|e| match e {
        oracle::OracleError::BudgetExceeded { .. } => Failure::usage(e.to_string()),
        other => Failure::solver(other.to_string()),
    })?;
    emit(
        args.output.as_deref(),
        &io::solution_to_string(&inst, &res.to_solution(&inst)),
    )?;
    info!(
        "{} placements checked, {} LP solves",
        res.placements_checked, res.lp_solves
    );
    if !res.is_feasible() {
        return Err(Failure {
            code: EXIT_INFEASIBLE,
            kind: "infeasible",
            message: "no feasible placement".into(),
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Bench(a) => run_bench(a),
        Command::Verify(a) => verify(a),
        Command::Oracle(a) => run_oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.kind, f.message);
            ExitCode::from(f.code)
        }
    }
}
