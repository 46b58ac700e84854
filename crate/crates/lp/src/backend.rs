use crate::{solve_lp, LinearProgram, LpError, LpResult, LpStatus, Relation, Tolerances, WarmStart};

/// In-memory hand-off of a [`LinearProgram`] to a solver.
///
/// Implementations must report `Infeasible`/`Unbounded`/`IterationLimit`
/// rather than returning a non-optimal point labelled optimal.
pub trait LpBackend: Send + Sync {
    fn name(&self) -> &'static str;

    fn solve(&self, lp: &LinearProgram, warm: Option<&WarmStart>, tol: &Tolerances) -> Result<LpResult, LpError>;
}

/// The bundled revised simplex.
#[derive(Debug, Clone, Copy, Default)]
pub struct BundledSimplex;

impl LpBackend for BundledSimplex {
    fn name(&self) -> &'static str {
        "bundled"
    }

    fn solve(&self, lp: &LinearProgram, warm: Option<&WarmStart>, tol: &Tolerances) -> Result<LpResult, LpError> {
        solve_lp(lp, warm, tol)
    }
}

/// Delegates to the `microlp` crate (sparse LU, steepest-edge dual/primal simplex).
///
/// Warm starts are ignored and no basis or duals are returned.
#[derive(Debug, Clone, Copy, Default)]
pub struct MicrolpBackend;

impl LpBackend for MicrolpBackend {
    fn name(&self) -> &'static str {
        "microlp"
    }

    fn solve(&self, lp: &LinearProgram, _warm: Option<&WarmStart>, _tol: &Tolerances) -> Result<LpResult, LpError> {
        lp.validate()?;
        let mut problem = microlp::Problem::new(microlp::OptimizationDirection::Minimize);
        let vars: Vec<microlp::Variable> = lp
            .variables()
            .iter()
            .zip(lp.objective())
            .map(|(v, &c)| problem.add_var(c, (v.lower, v.upper)))
            .collect();
        for c in lp.constraints() {
            let expr: Vec<(microlp::Variable, f64)> = c.coeffs.iter().map(|&(j, a)| (vars[j.0], a)).collect();
            let op = match c.relation {
                Relation::Le => microlp::ComparisonOp::Le,
                Relation::Eq => microlp::ComparisonOp::Eq,
                Relation::Ge => microlp::ComparisonOp::Ge,
            };
            problem.add_constraint(expr, op, c.rhs);
        }
        let empty = |status| LpResult {
            status,
            values: vec![0.0; lp.num_variables()],
            objective: f64::NAN,
            iterations: 0,
            basis: None,
            duals: None,
        };
        match problem.solve() {
            Ok(microlp::SolveOutcome::Solution(sol)) => {
                let values: Vec<f64> = vars.iter().map(|&v| sol.var_value_raw(v)).collect();
                let objective = lp.objective_value(&values);
                Ok(LpResult {
                    status: LpStatus::Optimal,
                    values,
                    objective,
                    iterations: 0,
                    basis: None,
                    duals: None,
                })
            }
            Ok(microlp::SolveOutcome::Interrupted(_)) => Ok(empty(LpStatus::IterationLimit)),
            Err(microlp::Error::Infeasible) => Ok(empty(LpStatus::Infeasible)),
            Err(microlp::Error::Unbounded) => Ok(empty(LpStatus::Unbounded)),
            Err(e) => Err(LpError::Backend {
                backend: "microlp".into(),
                message: e.to_string(),
            }),
        }
    }
}

/// Named choice of a built-in backend, for configuration files and flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackendKind {
    #[default]
    Bundled,
    Microlp,
}

impl BackendKind {
    pub fn backend(self) -> &'static dyn LpBackend {
        match self {
            BackendKind::Bundled => &BundledSimplex,
            BackendKind::Microlp => &MicrolpBackend,
        }
    }
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.backend().name())
    }
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bundled" => Ok(BackendKind::Bundled),
            "microlp" => Ok(BackendKind::Microlp),
            other => Err(format!("unknown LP backend `{other}` (expected bundled or microlp)")),
        }
    }
}
