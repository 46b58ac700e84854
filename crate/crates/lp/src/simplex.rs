//! Bundled solver: bounded-variable revised simplex, dual and primal.
//!
//! Rows are normalized to `a x + s = b` with one logical (slack) column per
//! row: `s >= 0` for `<=` rows and `s = 0` for equalities; `>=` rows are
//! negated first.
//!
//! When the starting basis is dual feasible (after moving boxed columns to
//! the bound matching their reduced cost) and not primal feasible, the dual
//! simplex runs first: dual Devex pricing, a bound-flipping ratio test and
//! Harris tolerances. The primal simplex then finishes (or does all the work
//! when the start is primal feasible or cannot be made dual feasible). Its
//! phase I minimizes the sum of bound infeasibilities of the basic variables,
//! phase II the true objective. Primal pricing is Dantzig's rule with a Harris
//! two-pass ratio test; a long run of degenerate pivots switches to Bland's
//! rule until the objective moves again.

use std::time::Instant;

use log::{debug, trace};

use crate::lu::{LuFactors, SparseCol};
use crate::{Basis, BasisStatus, LinearProgram, LpResult, LpStatus, Relation, Tolerances, WarmStart};

const REFACTOR_INTERVAL: usize = 100;
const DEGENERATE_RUN: usize = 400;
const DROP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Basic(usize),
    Lower,
    Upper,
    /// Nonbasic free column held at zero.
    Free,
}

struct Simplex {
    m: usize,
    n: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    row_start: Vec<usize>,
    row_col: Vec<usize>,
    row_val: Vec<f64>,
    row_sign: Vec<f64>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    b: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    lu: LuFactors,
    tol: Tolerances,
    work: Vec<f64>,
    iterations: usize,
}

/// Solves `lp` with the bundled revised simplex.
pub fn solve(lp: &LinearProgram, warm: Option<&WarmStart>, tol: &Tolerances) -> LpResult {
    let started = Instant::now();
    let mut s = Simplex::new(lp, *tol);
    if let Some(basis) = warm.and_then(|w| w.basis.as_ref()) {
        s.load_basis(basis);
    }
    s.refactor();
    s.recompute_primal();
    let limit = tol.iteration_limit.unwrap_or(50 * (s.m + s.n).max(1));
    let mut status = None;
    if !s.primal_feasible() && s.make_dual_feasible() {
        let original = s.perturb_costs();
        let outcome = s.run_dual(limit);
        s.cost = original;
        match outcome {
            DualOutcome::Finished => {}
            DualOutcome::Stopped(st) => status = Some(st),
        }
    }
    let status = match status {
        Some(st) => st,
        None => s.run(limit),
    };
    debug!(
        "simplex: {} rows, {} cols, status {:?}, {} iterations, {:.1} ms",
        s.m,
        s.n,
        status,
        s.iterations,
        started.elapsed().as_secs_f64() * 1e3
    );
    s.into_result(lp, status)
}

impl Simplex {
    fn new(lp: &LinearProgram, tol: Tolerances) -> Self {
        let n = lp.num_variables();
        let m = lp.num_constraints();
        let mut row_sign = vec![1.0; m];
        let mut b = vec![0.0; m];
        let mut counts = vec![0usize; n];
        for (i, c) in lp.constraints().iter().enumerate() {
            if c.relation == Relation::Ge {
                row_sign[i] = -1.0;
            }
            b[i] = row_sign[i] * c.rhs;
            for &(j, _) in &c.coeffs {
                counts[j.0] += 1;
            }
        }
        let mut col_start = vec![0usize; n + 1];
        for j in 0..n {
            col_start[j + 1] = col_start[j] + counts[j];
        }
        let nnz = col_start[n];
        let mut col_row = vec![0usize; nnz];
        let mut col_val = vec![0.0; nnz];
        let mut fill = col_start.clone();
        for (i, c) in lp.constraints().iter().enumerate() {
            for &(j, a) in &c.coeffs {
                let p = fill[j.0];
                col_row[p] = i;
                col_val[p] = row_sign[i] * a;
                fill[j.0] += 1;
            }
        }
        // Merge duplicate row entries within a column.
        let mut merged_start = vec![0usize; n + 1];
        let mut mrow = Vec::with_capacity(nnz);
        let mut mval = Vec::with_capacity(nnz);
        let mut last_seen = vec![usize::MAX; m];
        for j in 0..n {
            let base = mrow.len();
            for p in col_start[j]..col_start[j + 1] {
                let r = col_row[p];
                if last_seen[r] != usize::MAX && last_seen[r] >= base {
                    mval[last_seen[r]] += col_val[p];
                } else {
                    last_seen[r] = mrow.len();
                    mrow.push(r);
                    mval.push(col_val[p]);
                }
            }
            merged_start[j + 1] = mrow.len();
        }

        let mut cost = vec![0.0; n + m];
        cost[..n].copy_from_slice(lp.objective());
        let mut lo = vec![0.0; n + m];
        let mut hi = vec![0.0; n + m];
        for (j, v) in lp.variables().iter().enumerate() {
            lo[j] = v.lower;
            hi[j] = v.upper;
        }
        for (i, c) in lp.constraints().iter().enumerate() {
            lo[n + i] = 0.0;
            hi[n + i] = if c.relation == Relation::Eq { 0.0 } else { f64::INFINITY };
        }
        let mut state = vec![State::Lower; n + m];
        let mut x = vec![0.0; n + m];
        for j in 0..n {
            let (st, v) = nonbasic_home(lo[j], hi[j]);
            state[j] = st;
            x[j] = v;
        }
        let basis: Vec<usize> = (0..m).map(|i| n + i).collect();
        for (i, &j) in basis.iter().enumerate() {
            state[j] = State::Basic(i);
        }
        let mut row_start = vec![0usize; m + 1];
        for &r in &mrow {
            row_start[r + 1] += 1;
        }
        for i in 0..m {
            row_start[i + 1] += row_start[i];
        }
        let mut row_col = vec![0usize; mrow.len()];
        let mut row_val = vec![0.0; mrow.len()];
        let mut fill = row_start.clone();
        for j in 0..n {
            for p in merged_start[j]..merged_start[j + 1] {
                let r = mrow[p];
                row_col[fill[r]] = j;
                row_val[fill[r]] = mval[p];
                fill[r] += 1;
            }
        }
        let lu = LuFactors::factorize(0, &[]).expect("empty factorization");
        Simplex {
            m,
            n,
            col_start: merged_start,
            col_row: mrow,
            col_val: mval,
            row_start,
            row_col,
            row_val,
            row_sign,
            cost,
            lo,
            hi,
            b,
            x,
            basis,
            state,
            lu,
            tol,
            work: vec![0.0; m],
            iterations: 0,
        }
    }

    fn load_basis(&mut self, warm: &Basis) {
        if warm.status.len() != self.n + self.m {
            debug!("warm basis has wrong dimension, ignored");
            return;
        }
        let nbasic = warm.status.iter().filter(|s| **s == BasisStatus::Basic).count();
        if nbasic != self.m {
            debug!("warm basis has {nbasic} basic columns for {} rows, ignored", self.m);
            return;
        }
        let mut pos = 0;
        for (j, st) in warm.status.iter().enumerate() {
            match st {
                BasisStatus::Basic => {
                    self.basis[pos] = j;
                    self.state[j] = State::Basic(pos);
                    pos += 1;
                }
                BasisStatus::AtLower if self.lo[j].is_finite() => {
                    self.state[j] = State::Lower;
                    self.x[j] = self.lo[j];
                }
                BasisStatus::AtUpper if self.hi[j].is_finite() => {
                    self.state[j] = State::Upper;
                    self.x[j] = self.hi[j];
                }
                _ => {
                    let (st, v) = nonbasic_home(self.lo[j], self.hi[j]);
                    self.state[j] = st;
                    self.x[j] = v;
                }
            }
        }
    }

    fn column(&self, j: usize) -> SparseCol {
        if j < self.n {
            (self.col_start[j]..self.col_start[j + 1])
                .map(|p| (self.col_row[p], self.col_val[p]))
                .collect()
        } else {
            vec![(j - self.n, 1.0)]
        }
    }

    fn scatter_column(&self, j: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if j < self.n {
            for p in self.col_start[j]..self.col_start[j + 1] {
                out[self.col_row[p]] = self.col_val[p];
            }
        } else {
            out[j - self.n] = 1.0;
        }
    }

    /// Dot product of column `j` with a row-indexed vector.
    fn col_dot(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            let mut s = 0.0;
            for p in self.col_start[j]..self.col_start[j + 1] {
                s += self.col_val[p] * y[self.col_row[p]];
            }
            s
        } else {
            y[j - self.n]
        }
    }

    fn refactor(&mut self) {
        loop {
            let cols: Vec<SparseCol> = self.basis.iter().map(|&j| self.column(j)).collect();
            match LuFactors::factorize(self.m, &cols) {
                Ok(lu) => {
                    self.lu = lu;
                    return;
                }
                Err(sing) => {
                    debug!("singular basis: replacing {} columns by slacks", sing.positions.len());
                    for (&pos, &row) in sing.positions.iter().zip(&sing.rows) {
                        let out = self.basis[pos];
                        let slack = self.n + row;
                        if let State::Basic(other) = self.state[slack] {
                            // Slack already basic elsewhere; swap positions only.
                            self.basis.swap(pos, other);
                            self.state[out] = State::Basic(other);
                            self.state[slack] = State::Basic(pos);
                            continue;
                        }
                        let (st, v) = nonbasic_home(self.lo[out], self.hi[out]);
                        self.state[out] = st;
                        self.x[out] = v;
                        self.basis[pos] = slack;
                        self.state[slack] = State::Basic(pos);
                    }
                }
            }
        }
    }

    fn recompute_primal(&mut self) {
        let mut rhs = self.b.clone();
        for j in 0..self.n + self.m {
            if matches!(self.state[j], State::Basic(_)) {
                continue;
            }
            let v = self.x[j];
            if v == 0.0 {
                continue;
            }
            if j < self.n {
                for p in self.col_start[j]..self.col_start[j + 1] {
                    rhs[self.col_row[p]] -= self.col_val[p] * v;
                }
            } else {
                rhs[j - self.n] -= v;
            }
        }
        self.lu.ftran(&mut rhs, &mut self.work);
        for (pos, &j) in self.basis.iter().enumerate() {
            self.x[j] = rhs[pos];
        }
    }

    fn primal_feasible(&self) -> bool {
        self.basis.iter().all(|&j| self.infeasibility(j) == 0.0)
    }

    /// Reduced costs `d = c - A^T y` of every nonbasic column (zero for basic ones).
    fn compute_reduced_costs(&mut self, d: &mut [f64]) {
        let mut y: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        self.lu.btran(&mut y, &mut self.work);
        for j in 0..self.n + self.m {
            d[j] = if matches!(self.state[j], State::Basic(_)) {
                0.0
            } else {
                self.cost[j] - self.col_dot(j, &y)
            };
        }
    }

    /// Moves boxed nonbasic columns to the bound their reduced cost prefers.
    /// Returns false when some column with an infinite bound stays dual
    /// infeasible, in which case the dual simplex cannot start here.
    fn make_dual_feasible(&mut self) -> bool {
        let mut d = vec![0.0; self.n + self.m];
        self.compute_reduced_costs(&mut d);
        let dtol = self.tol.optimality;
        let mut flips = Vec::new();
        for j in 0..self.n + self.m {
            if self.lo[j] == self.hi[j] {
                continue;
            }
            let wrong = match self.state[j] {
                State::Basic(_) => false,
                State::Lower => d[j] < -dtol,
                State::Upper => d[j] > dtol,
                State::Free => d[j].abs() > dtol,
            };
            if !wrong {
                continue;
            }
            if !(self.lo[j].is_finite() && self.hi[j].is_finite()) {
                return false;
            }
            flips.push(j);
        }
        let moved = !flips.is_empty();
        for j in flips {
            if d[j] < 0.0 {
                self.state[j] = State::Upper;
                self.x[j] = self.hi[j];
            } else {
                self.state[j] = State::Lower;
                self.x[j] = self.lo[j];
            }
        }
        if moved {
            self.recompute_primal();
        }
        true
    }

    /// Shifts nonbasic costs further into their dual feasible direction by a
    /// tiny deterministic amount, which breaks the ties behind dual stalling.
    /// Returns the unperturbed costs.
    fn perturb_costs(&mut self) -> Vec<f64> {
        let original = self.cost.clone();
        let scale = original.iter().fold(0.0f64, |a, c| a.max(c.abs())).max(1.0);
        for j in 0..self.n {
            if self.lo[j] == self.hi[j] {
                continue;
            }
            // Knuth multiplicative hash as a fixed pseudo-random factor in [1, 2).
            let u = 1.0 + ((j as u64).wrapping_mul(2_654_435_761) % 1024) as f64 / 1024.0;
            let xi = 5e-7 * u * (1.0 + original[j].abs()).min(scale);
            match self.state[j] {
                State::Lower => self.cost[j] += xi,
                State::Upper => self.cost[j] -= xi,
                _ => {}
            }
        }
        original
    }

    /// Row `p` of `B^-1 A` over the nonbasic columns, scattered into `row`
    /// with the touched indices listed in `touched`.
    fn pivot_row(&mut self, p: usize, rho: &mut [f64], row: &mut [f64], touched: &mut Vec<usize>) {
        for &j in touched.iter() {
            row[j] = 0.0;
        }
        touched.clear();
        rho.iter_mut().for_each(|v| *v = 0.0);
        rho[p] = 1.0;
        self.lu.btran(rho, &mut self.work);
        for (i, &r) in rho.iter().enumerate() {
            if r.abs() <= DROP_TOL {
                continue;
            }
            for e in self.row_start[i]..self.row_start[i + 1] {
                let j = self.row_col[e];
                if matches!(self.state[j], State::Basic(_)) {
                    continue;
                }
                if row[j] == 0.0 {
                    touched.push(j);
                }
                row[j] += r * self.row_val[e];
                if row[j] == 0.0 {
                    row[j] = f64::MIN_POSITIVE;
                }
            }
            let slack = self.n + i;
            if !matches!(self.state[slack], State::Basic(_)) {
                if row[slack] == 0.0 {
                    touched.push(slack);
                }
                row[slack] += r;
            }
        }
    }

    /// Dual simplex from a dual feasible basis until primal feasibility.
    fn run_dual(&mut self, limit: usize) -> DualOutcome {
        let m = self.m;
        let total = self.n + m;
        let ftol = self.tol.feasibility;
        let dtol = self.tol.optimality;
        let ptol = self.tol.pivot.max(1e-9);
        let mut d = vec![0.0; total];
        self.compute_reduced_costs(&mut d);
        let mut weights = vec![1.0; m];
        let mut rho = vec![0.0; m];
        let mut row = vec![0.0; total];
        let mut touched: Vec<usize> = Vec::new();
        let mut acol = vec![0.0; m];
        let mut cands: Vec<(usize, f64, f64)> = Vec::new();
        let mut rhs = vec![0.0; m];
        let mut checks = 0;
        let mut retried = false;

        loop {
            if self.iterations >= limit {
                return DualOutcome::Stopped(LpStatus::IterationLimit);
            }
            if self.lu.num_updates() >= REFACTOR_INTERVAL || self.lu.eta_nnz() > 2 * self.lu.factor_nnz() + m {
                self.refactor();
                self.recompute_primal();
                self.compute_reduced_costs(&mut d);
            }

            // Leaving row: largest squared infeasibility over its weight.
            let mut leave: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for (pos, &j) in self.basis.iter().enumerate() {
                let v = self.x[j];
                let infeas = if v < self.lo[j] - ftol {
                    self.lo[j] - v
                } else if v > self.hi[j] + ftol {
                    v - self.hi[j]
                } else {
                    continue;
                };
                let score = infeas * infeas / weights[pos];
                if score > best {
                    best = score;
                    leave = Some((pos, infeas));
                }
            }
            let Some((p, infeas)) = leave else {
                // Primal feasible: confirm with fresh factors.
                if self.lu.num_updates() > 0 && checks < 5 {
                    checks += 1;
                    self.refactor();
                    self.recompute_primal();
                    self.compute_reduced_costs(&mut d);
                    continue;
                }
                return DualOutcome::Finished;
            };
            let l = self.basis[p];
            let to_upper = self.x[l] > self.hi[l];
            let s = if to_upper { 1.0 } else { -1.0 };

            self.pivot_row(p, &mut rho, &mut row, &mut touched);

            cands.clear();
            for &j in &touched {
                if self.lo[j] == self.hi[j] {
                    continue;
                }
                let a = row[j];
                let sa = s * a;
                let ratio = match self.state[j] {
                    State::Lower if sa > ptol => d[j].max(0.0) / sa,
                    State::Upper if sa < -ptol => d[j].min(0.0) / sa,
                    State::Free if a.abs() > ptol => 0.0,
                    _ => continue,
                };
                cands.push((j, ratio, a.abs()));
            }
            cands.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

            // Bound flipping: pass boxed breakpoints while the dual slope stays positive.
            let mut slope = infeas;
            let mut first = 0;
            while first < cands.len() {
                let (j, _, a) = cands[first];
                let range = self.hi[j] - self.lo[j];
                if range.is_finite() && slope - a * range > ftol {
                    slope -= a * range;
                    first += 1;
                } else {
                    break;
                }
            }
            if first == cands.len() {
                // Dual ray: the primal is infeasible.
                if self.lu.num_updates() > 0 && !retried {
                    retried = true;
                    self.refactor();
                    self.recompute_primal();
                    self.compute_reduced_costs(&mut d);
                    continue;
                }
                return DualOutcome::Stopped(LpStatus::Infeasible);
            }
            // Harris pass among the remaining breakpoints.
            let mut bound = f64::INFINITY;
            for &(j, _, a) in &cands[first..] {
                bound = bound.min((d[j].abs() + dtol) / a);
            }
            let mut pick = first;
            for (k, &(_, ratio, a)) in cands.iter().enumerate().skip(first) {
                if ratio > bound {
                    break;
                }
                if a > cands[pick].2 {
                    pick = k;
                }
            }
            let q = cands[pick].0;
            let alpha_pq = row[q];

            self.scatter_column(q, &mut acol);
            self.lu.ftran(&mut acol, &mut self.work);
            let err = (acol[p] - alpha_pq).abs();
            if err > 1e-8 * (1.0 + alpha_pq.abs()) || acol[p].abs() < 1e-11 {
                if self.lu.num_updates() > 0 && !retried {
                    trace!("dual: pivot mismatch {err:.2e}, refactorizing");
                    retried = true;
                    self.refactor();
                    self.recompute_primal();
                    self.compute_reduced_costs(&mut d);
                    continue;
                }
            }
            retried = false;

            // Dual step.
            let theta_d = d[q] / alpha_pq;
            for &j in &touched {
                d[j] -= theta_d * row[j];
            }
            d[q] = 0.0;
            d[l] = -theta_d;

            // Bound flips.
            if first > 0 {
                rhs.iter_mut().for_each(|v| *v = 0.0);
                for &(j, _, _) in &cands[..first] {
                    let (st, v) = if self.state[j] == State::Lower {
                        (State::Upper, self.hi[j])
                    } else {
                        (State::Lower, self.lo[j])
                    };
                    let delta = v - self.x[j];
                    self.x[j] = v;
                    self.state[j] = st;
                    if j < self.n {
                        for e in self.col_start[j]..self.col_start[j + 1] {
                            rhs[self.col_row[e]] += self.col_val[e] * delta;
                        }
                    } else {
                        rhs[j - self.n] += delta;
                    }
                }
                self.lu.ftran(&mut rhs, &mut self.work);
                for (pos, &j) in self.basis.iter().enumerate() {
                    self.x[j] -= rhs[pos];
                }
            }

            // Primal step.
            let target = if to_upper { self.hi[l] } else { self.lo[l] };
            let theta_p = (self.x[l] - target) / acol[p];
            self.x[q] += theta_p;
            for (pos, &j) in self.basis.iter().enumerate() {
                self.x[j] -= theta_p * acol[pos];
            }
            self.x[l] = target;

            // Dual Devex weights.
            let wp = weights[p];
            let ap = acol[p];
            for (pos, &a) in acol.iter().enumerate() {
                if pos != p && a != 0.0 {
                    let r = a / ap;
                    weights[pos] = weights[pos].max(r * r * wp);
                }
            }
            weights[p] = (wp / (ap * ap)).max(1.0);

            self.state[l] = if to_upper { State::Upper } else { State::Lower };
            self.basis[p] = q;
            self.state[q] = State::Basic(p);
            self.lu.update(p, &acol);
            self.iterations += 1;
            if self.iterations % 1000 == 0 {
                let obj: f64 = (0..self.n).map(|j| self.cost[j] * self.x[j]).sum();
                debug!(
                    "dual iter {} obj {:.6} lu {} etas {}",
                    self.iterations,
                    obj,
                    self.lu.factor_nnz(),
                    self.lu.eta_nnz()
                );
            }
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lo[j] - self.tol.feasibility {
            self.lo[j] - v
        } else if v > self.hi[j] + self.tol.feasibility {
            v - self.hi[j]
        } else {
            0.0
        }
    }

    fn run(&mut self, limit: usize) -> LpStatus {
        let m = self.m;
        let mut y = vec![0.0; m];
        let mut alpha = vec![0.0; m];
        let mut degenerate_run = 0usize;
        let mut bland = false;
        let mut rejected: Vec<usize> = Vec::new();
        let mut cleanups = 0;
        let mut refreshed_for: Option<usize> = None;

        loop {
            if self.iterations >= limit {
                return LpStatus::IterationLimit;
            }
            if self.lu.num_updates() >= REFACTOR_INTERVAL || self.lu.eta_nnz() > 2 * self.lu.factor_nnz() + m {
                self.refactor();
                self.recompute_primal();
            }

            // Phase selection and basic costs.
            let mut phase1 = false;
            if self.iterations % 1000 == 0 && self.iterations > 0 {
                let infeas: f64 = self.basis.iter().map(|&j| self.infeasibility(j)).sum();
                let obj: f64 = (0..self.n).map(|j| self.cost[j] * self.x[j]).sum();
                debug!(
                    "iter {} infeas {:.3e} obj {:.6} lu {} etas {} bland {}",
                    self.iterations,
                    infeas,
                    obj,
                    self.lu.factor_nnz(),
                    self.lu.eta_nnz(),
                    bland
                );
            }
            for (pos, &j) in self.basis.iter().enumerate() {
                let v = self.x[j];
                y[pos] = if v < self.lo[j] - self.tol.feasibility {
                    phase1 = true;
                    -1.0
                } else if v > self.hi[j] + self.tol.feasibility {
                    phase1 = true;
                    1.0
                } else {
                    0.0
                };
            }
            if !phase1 {
                for (pos, &j) in self.basis.iter().enumerate() {
                    y[pos] = self.cost[j];
                }
            }
            self.lu.btran(&mut y, &mut self.work);

            // Pricing.
            let dtol = self.tol.optimality;
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..self.n + self.m {
                let st = self.state[j];
                if matches!(st, State::Basic(_)) || self.lo[j] == self.hi[j] {
                    continue;
                }
                let cj = if phase1 { 0.0 } else { self.cost[j] };
                let d = cj - self.col_dot(j, &y);
                let eligible = match st {
                    State::Lower => d < -dtol,
                    State::Upper => d > dtol,
                    State::Free => d.abs() > dtol,
                    State::Basic(_) => false,
                };
                if !eligible || rejected.contains(&j) {
                    continue;
                }
                if bland {
                    entering = Some((j, d));
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    entering = Some((j, d));
                }
            }

            let Some((q, dq)) = entering else {
                if !rejected.is_empty() {
                    // Candidates were skipped for tiny pivots; retry with fresh factors.
                    rejected.clear();
                    self.refactor();
                    self.recompute_primal();
                    cleanups += 1;
                    if cleanups > 20 {
                        return if phase1 {
                            LpStatus::Infeasible
                        } else {
                            LpStatus::Optimal
                        };
                    }
                    continue;
                }
                if phase1 {
                    return LpStatus::Infeasible;
                }
                // Confirm optimality with fresh factors before returning.
                if self.lu.num_updates() > 0 && cleanups < 20 {
                    cleanups += 1;
                    self.refactor();
                    self.recompute_primal();
                    let infeasible = self.basis.iter().any(|&j| self.infeasibility(j) > 0.0);
                    if infeasible {
                        continue;
                    }
                }
                return LpStatus::Optimal;
            };

            let dir = if dq < 0.0 { 1.0 } else { -1.0 };
            self.scatter_column(q, &mut alpha);
            self.lu.ftran(&mut alpha, &mut self.work);

            let ftol = self.tol.feasibility;
            let ptol = self.tol.pivot;
            // Harris pass 1: largest step keeping everyone within relaxed bounds.
            let mut t_relaxed = f64::INFINITY;
            for (pos, &j) in self.basis.iter().enumerate() {
                let a = alpha[pos];
                if a.abs() <= ptol {
                    continue;
                }
                let delta = -dir * a;
                if let Some(target) = self.blocking_target(j, delta) {
                    let relaxed = if delta < 0.0 { target - ftol } else { target + ftol };
                    let t = (relaxed - self.x[j]) / delta;
                    if t < t_relaxed {
                        t_relaxed = t;
                    }
                }
            }
            // Pass 2: largest pivot among candidates within the relaxed step.
            let mut leave: Option<(usize, f64, f64)> = None; // (pos, step, target)
            let mut best_piv = 0.0;
            if t_relaxed.is_finite() {
                for (pos, &j) in self.basis.iter().enumerate() {
                    let a = alpha[pos];
                    if a.abs() <= ptol {
                        continue;
                    }
                    let delta = -dir * a;
                    if let Some(target) = self.blocking_target(j, delta) {
                        let t = ((target - self.x[j]) / delta).max(0.0);
                        if t <= t_relaxed {
                            let better = if bland {
                                match leave {
                                    None => true,
                                    Some((lp, lt, _)) => t < lt - 1e-12 || (t <= lt + 1e-12 && j < self.basis[lp]),
                                }
                            } else {
                                a.abs() > best_piv
                            };
                            if better {
                                best_piv = a.abs();
                                leave = Some((pos, t, target));
                            }
                        }
                    }
                }
            }
            let t_flip = self.hi[q] - self.lo[q];
            let step_leave = leave.map(|(_, t, _)| t).unwrap_or(f64::INFINITY);

            if t_flip.is_finite() && t_flip <= step_leave {
                // Bound flip of the entering column.
                let t = t_flip;
                self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                self.state[q] = if dir > 0.0 { State::Upper } else { State::Lower };
                for (pos, &j) in self.basis.iter().enumerate() {
                    self.x[j] -= dir * t * alpha[pos];
                }
                self.iterations += 1;
                degenerate_run = 0;
                bland = false;
                rejected.clear();
                continue;
            }
            let Some((p, t, target)) = leave else {
                if phase1 {
                    rejected.push(q);
                    continue;
                }
                return LpStatus::Unbounded;
            };
            if alpha[p].abs() < 1e-7 && refreshed_for != Some(q) && self.lu.num_updates() > 0 {
                // Small pivot: refresh the factors and recheck this candidate once.
                self.refactor();
                self.recompute_primal();
                refreshed_for = Some(q);
                continue;
            }
            refreshed_for = None;

            let leaving = self.basis[p];
            self.x[q] += dir * t;
            for (pos, &j) in self.basis.iter().enumerate() {
                if pos != p {
                    self.x[j] -= dir * t * alpha[pos];
                }
            }
            self.x[leaving] = target;
            self.state[leaving] = if target == self.lo[leaving] {
                State::Lower
            } else {
                State::Upper
            };
            self.basis[p] = q;
            self.state[q] = State::Basic(p);
            self.lu.update(p, &alpha);
            self.iterations += 1;
            rejected.clear();

            if t <= DROP_TOL {
                degenerate_run += 1;
                if degenerate_run > DEGENERATE_RUN && !bland {
                    trace!("switching to Bland's rule after {degenerate_run} degenerate pivots");
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }
        }
    }

    /// Bound a basic variable runs into when it changes at rate `delta`.
    fn blocking_target(&self, j: usize, delta: f64) -> Option<f64> {
        let v = self.x[j];
        let ftol = self.tol.feasibility;
        if delta < 0.0 {
            if v > self.hi[j] + ftol {
                Some(self.hi[j])
            } else if v >= self.lo[j] - ftol && self.lo[j].is_finite() {
                Some(self.lo[j])
            } else {
                None
            }
        } else if v < self.lo[j] - ftol {
            Some(self.lo[j])
        } else if v <= self.hi[j] + ftol && self.hi[j].is_finite() {
            Some(self.hi[j])
        } else {
            None
        }
    }

    fn into_result(mut self, lp: &LinearProgram, status: LpStatus) -> LpResult {
        let values: Vec<f64> = self.x[..self.n].to_vec();
        let objective = lp.objective_value(&values);
        let basis = Basis {
            status: self
                .state
                .iter()
                .map(|s| match s {
                    State::Basic(_) => BasisStatus::Basic,
                    State::Lower => BasisStatus::AtLower,
                    State::Upper => BasisStatus::AtUpper,
                    State::Free => BasisStatus::Free,
                })
                .collect(),
        };
        let duals = if status == LpStatus::Optimal {
            let mut y: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
            self.lu.btran(&mut y, &mut self.work);
            Some(y.iter().zip(&self.row_sign).map(|(v, s)| v * s).collect())
        } else {
            None
        };
        LpResult {
            status,
            values,
            objective,
            iterations: self.iterations,
            basis: Some(basis),
            duals,
        }
    }
}

enum DualOutcome {
    /// Primal feasible; the primal simplex certifies optimality.
    Finished,
    Stopped(LpStatus),
}

fn nonbasic_home(lo: f64, hi: f64) -> (State, f64) {
    if lo.is_finite() {
        (State::Lower, lo)
    } else if hi.is_finite() {
        (State::Upper, hi)
    } else {
        (State::Free, 0.0)
    }
}
