//! Cross-checks the bundled solver against an independent dense tableau
//! simplex (Bland's rule, two-phase with artificials) on random programs.

use netslice_lp::{solve_lp, LinearProgram, LpStatus, Relation, Tolerances, VarId, WarmStart};
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

#[derive(Debug, PartialEq)]
enum Oracle {
    Optimal(f64),
    Infeasible,
    Unbounded,
}

/// Dense two-phase tableau simplex on `min c x, A x = b, x >= 0, b >= 0`.
fn tableau_simplex(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Oracle {
    let m = a.len();
    let n = c.len();
    let width = n + m + 1;
    let mut t: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row = vec![0.0; width];
            row[..n].copy_from_slice(&a[i]);
            row[n + i] = 1.0;
            row[width - 1] = b[i];
            row
        })
        .collect();
    let mut basis: Vec<usize> = (n..n + m).collect();

    let pivot = |t: &mut Vec<Vec<f64>>, r: usize, col: usize| {
        let p = t[r][col];
        for v in t[r].iter_mut() {
            *v /= p;
        }
        for i in 0..t.len() {
            if i != r {
                let f = t[i][col];
                if f != 0.0 {
                    for k in 0..width {
                        t[i][k] -= f * t[r][k];
                    }
                }
            }
        }
    };
    let run = |t: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, cost: &[f64], allowed: usize| -> bool {
        loop {
            // reduced costs
            let mut enter = None;
            for j in 0..allowed {
                if basis.contains(&j) {
                    continue;
                }
                let mut d = cost[j];
                for i in 0..m {
                    d -= cost[basis[i]] * t[i][j];
                }
                if d < -1e-10 {
                    enter = Some(j);
                    break;
                }
            }
            let Some(q) = enter else { return true };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                if t[i][q] > 1e-10 {
                    let ratio = t[i][width - 1] / t[i][q];
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && basis[i] < basis[li]) {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((r, _)) = leave else { return false };
            pivot(t, r, q);
            basis[r] = q;
        }
    };

    let mut phase1 = vec![0.0; n + m];
    for v in phase1[n..].iter_mut() {
        *v = 1.0;
    }
    run(&mut t, &mut basis, &phase1, n + m);
    let infeas: f64 = (0..m).filter(|&i| basis[i] >= n).map(|i| t[i][width - 1]).sum();
    if infeas > 1e-7 {
        return Oracle::Infeasible;
    }
    // Drive artificials out of the basis where possible.
    for i in 0..m {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| !basis.contains(&j) && t[i][j].abs() > 1e-9) {
                pivot(&mut t, i, j);
                basis[i] = j;
            }
        }
    }
    let mut cost = vec![0.0; n + m];
    cost[..n].copy_from_slice(c);
    // Remaining artificials sit on redundant rows at zero; keep them out of pricing.
    if !run(&mut t, &mut basis, &cost, n) {
        return Oracle::Unbounded;
    }
    let obj: f64 = (0..m)
        .filter(|&i| basis[i] < n)
        .map(|i| c[basis[i]] * t[i][width - 1])
        .sum();
    Oracle::Optimal(obj)
}

/// Rewrites a bounded LP into the oracle's standard form and solves it.
fn oracle_solve(lp: &LinearProgram) -> Oracle {
    // Column map: x_j = lo_j + p_j (finite lo) or x_j = p_j - q_j (free).
    struct Col {
        plus: usize,
        minus: Option<usize>,
        shift: f64,
    }
    let mut cols = Vec::new();
    let mut ncols = 0;
    for v in lp.variables() {
        if v.lower.is_finite() {
            cols.push(Col {
                plus: ncols,
                minus: None,
                shift: v.lower,
            });
            ncols += 1;
        } else {
            cols.push(Col {
                plus: ncols,
                minus: Some(ncols + 1),
                shift: 0.0,
            });
            ncols += 2;
        }
    }
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for c in lp.constraints() {
        let mut row = vec![0.0; ncols];
        let mut rhs = c.rhs;
        for &(j, a) in &c.coeffs {
            let col = &cols[j.0];
            row[col.plus] += a;
            if let Some(mi) = col.minus {
                row[mi] -= a;
            }
            rhs -= a * col.shift;
        }
        rows.push((row, c.relation, rhs));
    }
    for (j, v) in lp.variables().iter().enumerate() {
        if v.upper.is_finite() {
            let col = &cols[j];
            let mut row = vec![0.0; ncols];
            row[col.plus] = 1.0;
            if let Some(mi) = col.minus {
                row[mi] = -1.0;
            }
            rows.push((row, Relation::Le, v.upper - col.shift));
        }
    }
    // Slack/surplus columns.
    let nslack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let total = ncols + nslack;
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut s = ncols;
    for (row, rel, rhs) in rows {
        let mut full = vec![0.0; total];
        full[..ncols].copy_from_slice(&row);
        match rel {
            Relation::Le => {
                full[s] = 1.0;
                s += 1;
            }
            Relation::Ge => {
                full[s] = -1.0;
                s += 1;
            }
            Relation::Eq => {}
        }
        let (full, rhs) = if rhs < 0.0 {
            (full.iter().map(|v| -v).collect(), -rhs)
        } else {
            (full, rhs)
        };
        a.push(full);
        b.push(rhs);
    }
    let mut c = vec![0.0; total];
    let mut offset = 0.0;
    for (j, col) in cols.iter().enumerate() {
        let cj = lp.objective()[j];
        c[col.plus] += cj;
        if let Some(mi) = col.minus {
            c[mi] -= cj;
        }
        offset += cj * col.shift;
    }
    match tableau_simplex(&a, &b, &c) {
        Oracle::Optimal(v) => Oracle::Optimal(v + offset),
        other => other,
    }
}

struct Gen(Xoshiro256StarStar);

impl Gen {
    fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }
    fn below(&mut self, n: u64) -> u64 {
        self.0.next_u64() % n
    }
}

fn random_lp(seed: u64, nvars: usize, nrows: usize) -> LinearProgram {
    let mut g = Gen(Xoshiro256StarStar::seed_from_u64(seed));
    let mut lp = LinearProgram::new();
    let mut anchor = Vec::new();
    for j in 0..nvars {
        let lo = if g.below(5) == 0 {
            f64::NEG_INFINITY
        } else {
            g.range(-2.0, 1.0)
        };
        let hi = if g.below(3) == 0 {
            f64::INFINITY
        } else {
            lo.max(-3.0) + g.range(0.5, 4.0)
        };
        let base = if lo.is_finite() { lo } else { hi.min(0.0) - 1.0 };
        let top = if hi.is_finite() { hi } else { base + 3.0 };
        anchor.push(g.range(base, top));
        let v = lp.add_variable(format!("x{j}"), lo, hi);
        lp.set_objective(v, g.range(-3.0, 3.0));
    }
    for i in 0..nrows {
        let mut coeffs = Vec::new();
        for j in 0..nvars {
            if g.below(3) == 0 {
                coeffs.push((VarId(j), g.range(-4.0, 4.0).round()));
            }
        }
        let lhs: f64 = coeffs.iter().map(|&(j, a)| a * anchor[j.0]).sum();
        let (rel, rhs) = match g.below(3) {
            0 => (Relation::Le, lhs + g.range(0.0, 2.0)),
            1 => (Relation::Ge, lhs - g.range(0.0, 2.0)),
            _ => (Relation::Eq, lhs),
        };
        lp.add_constraint(format!("r{i}"), coeffs, rel, rhs);
    }
    lp
}

#[test]
fn random_twenty_variable_programs_match_tableau_oracle() {
    let mut optimal = 0;
    for seed in 0..200 {
        let lp = random_lp(seed, 20, 12);
        let ours = solve_lp(&lp, None, &Tolerances::default()).unwrap();
        let oracle = oracle_solve(&lp);
        match (&ours.status, &oracle) {
            (LpStatus::Optimal, Oracle::Optimal(v)) => {
                assert!(
                    (ours.objective - v).abs() <= 1e-7 * v.abs().max(1.0),
                    "seed {seed}: {} vs {v}",
                    ours.objective
                );
                assert!(lp.max_violation(&ours.values) < 1e-6, "seed {seed}");
                optimal += 1;
            }
            (LpStatus::Unbounded, Oracle::Unbounded) => {}
            (LpStatus::Infeasible, Oracle::Infeasible) => {}
            (s, o) => panic!("seed {seed}: bundled {s:?}, oracle {o:?}"),
        }
    }
    assert!(optimal > 100, "only {optimal} optimal instances");
}

#[test]
fn optimal_solves_carry_a_dual_certificate() {
    for seed in 0..100 {
        let lp = random_lp(1000 + seed, 20, 12);
        let res = solve_lp(&lp, None, &Tolerances::default()).unwrap();
        if res.status != LpStatus::Optimal {
            continue;
        }
        let y = res.duals.as_ref().unwrap();
        // Reduced costs d = c - A^T y; the dual objective collects b^T y plus bound terms.
        let mut d = lp.objective().to_vec();
        let mut dual_obj = 0.0;
        for (i, c) in lp.constraints().iter().enumerate() {
            for &(j, a) in &c.coeffs {
                d[j.0] -= a * y[i];
            }
            dual_obj += c.rhs * y[i];
            // Sign feasibility of row duals for a minimization.
            match c.relation {
                Relation::Le => assert!(y[i] <= 1e-7, "seed {seed} row {i} y={}", y[i]),
                Relation::Ge => assert!(y[i] >= -1e-7, "seed {seed} row {i} y={}", y[i]),
                Relation::Eq => {}
            }
        }
        for (j, v) in lp.variables().iter().enumerate() {
            let dj = d[j];
            if dj > 1e-9 {
                assert!(v.lower.is_finite(), "seed {seed}");
                dual_obj += dj * v.lower;
            } else if dj < -1e-9 {
                assert!(v.upper.is_finite(), "seed {seed}");
                dual_obj += dj * v.upper;
            }
        }
        let gap = (res.objective - dual_obj).abs();
        assert!(gap <= 1e-6 * res.objective.abs().max(1.0), "seed {seed}: gap {gap}");
    }
}

#[test]
fn warm_restart_from_optimal_basis_is_immediate() {
    for seed in 0..50 {
        let lp = random_lp(5000 + seed, 20, 12);
        let cold = solve_lp(&lp, None, &Tolerances::default()).unwrap();
        if cold.status != LpStatus::Optimal {
            continue;
        }
        let warm = solve_lp(&lp, Some(&WarmStart::from_result(&cold)), &Tolerances::default()).unwrap();
        assert_eq!(warm.status, LpStatus::Optimal);
        assert!(warm.iterations <= cold.iterations);
        assert!((warm.objective - cold.objective).abs() <= 1e-9 * cold.objective.abs().max(1.0));
    }
}
