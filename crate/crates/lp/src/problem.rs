use std::fmt;

use crate::LpError;

/// Index of a column in a [`LinearProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A minimization LP over bounded variables.
///
/// Bounds may be infinite. Constraint rows are sparse; repeated entries for the
/// same variable within a row are summed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<f64>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        let id = VarId(self.variables.len());
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
        });
        self.objective.push(0.0);
        id
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        self.constraints.push(Constraint {
            name: name.into(),
            coeffs,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn set_objective(&mut self, var: VarId, coeff: f64) {
        self.objective[var.0] = coeff;
    }

    pub fn add_objective(&mut self, var: VarId, coeff: f64) {
        self.objective[var.0] += coeff;
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        let v = &mut self.variables[var.0];
        v.lower = lower;
        v.upper = upper;
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, var: VarId) -> &Variable {
        &self.variables[var.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Dense objective vector, one coefficient per variable.
    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, x)| c * x).sum()
    }

    /// Largest violation of any bound or constraint row at `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, x) in self.variables.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().map(|(j, a)| a * values[j.0]).sum();
            let viol = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.variables.len();
        for (j, v) in self.variables.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(LpError::InvalidBounds {
                    variable: j,
                    lower: v.lower,
                    upper: v.upper,
                });
            }
            if v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(LpError::InvalidBounds {
                    variable: j,
                    lower: v.lower,
                    upper: v.upper,
                });
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(LpError::NonFinite { row: i });
            }
            for &(j, a) in &c.coeffs {
                if j.0 >= n {
                    return Err(LpError::UnknownVariable { row: i, variable: j.0 });
                }
                if !a.is_finite() {
                    return Err(LpError::NonFinite { row: i });
                }
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::NonFiniteObjective);
        }
        Ok(())
    }
}
