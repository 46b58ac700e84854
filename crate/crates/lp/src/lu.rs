//! Sparse LU factorization of simplex bases with product-form updates.
//!
//! The basis is factorized with a right-looking Markowitz elimination using
//! threshold pivoting. Each basis change afterwards appends an eta column;
//! the caller refactorizes once the eta file grows too long.

const THRESHOLD: f64 = 0.01;
const ABS_PIVOT_TOL: f64 = 1e-11;
const SEARCH_LIMIT: usize = 4;

/// Sparse column given as `(row, value)` pairs.
pub(crate) type SparseCol = Vec<(usize, f64)>;

/// Count-bucketed doubly linked lists (rows or columns keyed by active count).
struct Buckets {
    head: Vec<usize>,
    next: Vec<usize>,
    prev: Vec<usize>,
    count: Vec<usize>,
    present: Vec<bool>,
}

const NIL: usize = usize::MAX;

impl Buckets {
    fn new(n: usize, max_count: usize) -> Self {
        Buckets {
            head: vec![NIL; max_count + 2],
            next: vec![NIL; n],
            prev: vec![NIL; n],
            count: vec![0; n],
            present: vec![false; n],
        }
    }

    fn insert(&mut self, item: usize, count: usize) {
        let count = count.min(self.head.len() - 1);
        self.count[item] = count;
        self.prev[item] = NIL;
        self.next[item] = self.head[count];
        if self.head[count] != NIL {
            self.prev[self.head[count]] = item;
        }
        self.head[count] = item;
        self.present[item] = true;
    }

    fn remove(&mut self, item: usize) {
        if !self.present[item] {
            return;
        }
        let c = self.count[item];
        if self.prev[item] != NIL {
            self.next[self.prev[item]] = self.next[item];
        } else {
            self.head[c] = self.next[item];
        }
        if self.next[item] != NIL {
            self.prev[self.next[item]] = self.prev[item];
        }
        self.present[item] = false;
    }

    fn update(&mut self, item: usize, count: usize) {
        if self.present[item] {
            self.remove(item);
            self.insert(item, count);
        }
    }
}

/// Result of a factorization attempt that found the basis (numerically) singular.
#[derive(Debug, Clone)]
pub(crate) struct Singular {
    /// Basis positions that could not be pivoted.
    pub positions: Vec<usize>,
    /// Rows left without a pivot; same length as `positions`.
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub(crate) struct LuFactors {
    m: usize,
    pivot_row: Vec<usize>,
    pivot_col: Vec<usize>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_diag: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    etas: Vec<Eta>,
    eta_nnz: usize,
}

impl LuFactors {
    /// Factorizes the `m x m` matrix whose columns are `cols`.
    pub(crate) fn factorize(m: usize, cols: &[SparseCol]) -> Result<LuFactors, Singular> {
        debug_assert_eq!(cols.len(), m);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut col_pat: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (c, col) in cols.iter().enumerate() {
            for &(r, v) in col {
                if v != 0.0 {
                    rows[r].push((c, v));
                    col_pat[c].push(r);
                }
            }
        }
        let mut row_active = vec![true; m];
        let mut col_active = vec![true; m];
        let mut col_count: Vec<usize> = col_pat.iter().map(|p| p.len()).collect();
        let mut rbk = Buckets::new(m, m);
        let mut cbk = Buckets::new(m, m);
        for r in 0..m {
            rbk.insert(r, rows[r].len());
        }
        for c in 0..m {
            cbk.insert(c, col_count[c]);
        }

        let mut lu = LuFactors {
            m,
            pivot_row: Vec::with_capacity(m),
            pivot_col: Vec::with_capacity(m),
            l_start: vec![0],
            l_idx: Vec::new(),
            l_val: Vec::new(),
            u_diag: Vec::with_capacity(m),
            u_start: vec![0],
            u_idx: Vec::new(),
            u_val: Vec::new(),
            etas: Vec::new(),
            eta_nnz: 0,
        };
        let mut marker = vec![NIL; m];

        for _step in 0..m {
            let Some((pr, pc)) = find_pivot(&rows, &col_pat, &row_active, &col_count, &rbk, &cbk) else {
                let positions: Vec<usize> = (0..m).filter(|&c| col_active[c]).collect();
                let left_rows: Vec<usize> = (0..m).filter(|&r| row_active[r]).collect();
                return Err(Singular {
                    positions,
                    rows: left_rows,
                });
            };
            rbk.remove(pr);
            cbk.remove(pc);
            row_active[pr] = false;
            col_active[pc] = false;

            let prow = std::mem::take(&mut rows[pr]);
            let pval = prow
                .iter()
                .find(|&&(c, _)| c == pc)
                .map(|&(_, v)| v)
                .expect("pivot entry present");
            for &(c, _) in &prow {
                if c != pc && col_active[c] {
                    col_count[c] -= 1;
                }
            }

            // Eliminate column pc from every other active row.
            let pattern = std::mem::take(&mut col_pat[pc]);
            for &i in &pattern {
                if !row_active[i] {
                    continue;
                }
                let Some(k) = rows[i].iter().position(|&(c, _)| c == pc) else {
                    continue;
                };
                let aic = rows[i].swap_remove(k).1;
                let l = aic / pval;
                lu.l_idx.push(i);
                lu.l_val.push(l);
                for (k, &(c, _)) in rows[i].iter().enumerate() {
                    marker[c] = k;
                }
                for &(c, v) in &prow {
                    if c == pc {
                        continue;
                    }
                    let k = marker[c];
                    if k != NIL {
                        rows[i][k].1 -= l * v;
                    } else {
                        rows[i].push((c, -l * v));
                        col_pat[c].push(i);
                        col_count[c] += 1;
                    }
                }
                for &(c, _) in rows[i].iter() {
                    marker[c] = NIL;
                }
                rbk.update(i, rows[i].len());
            }
            lu.l_start.push(lu.l_idx.len());

            for &(c, v) in &prow {
                if c != pc {
                    lu.u_idx.push(c);
                    lu.u_val.push(v);
                    cbk.update(c, col_count[c]);
                }
            }
            lu.u_start.push(lu.u_idx.len());
            lu.u_diag.push(pval);
            lu.pivot_row.push(pr);
            lu.pivot_col.push(pc);
        }
        Ok(lu)
    }

    pub(crate) fn num_updates(&self) -> usize {
        self.etas.len()
    }

    pub(crate) fn eta_nnz(&self) -> usize {
        self.eta_nnz
    }

    pub(crate) fn factor_nnz(&self) -> usize {
        self.l_idx.len() + self.u_idx.len() + self.m
    }

    /// Solves `B x = rhs` in place; on entry `rhs` is indexed by row, on exit by basis position.
    pub(crate) fn ftran(&self, rhs: &mut [f64], work: &mut [f64]) {
        let m = self.m;
        for k in 0..m {
            let v = rhs[self.pivot_row[k]];
            if v != 0.0 {
                for t in self.l_start[k]..self.l_start[k + 1] {
                    rhs[self.l_idx[t]] -= self.l_val[t] * v;
                }
            }
        }
        for k in (0..m).rev() {
            let mut s = rhs[self.pivot_row[k]];
            for t in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[t] * work[self.u_idx[t]];
            }
            work[self.pivot_col[k]] = s / self.u_diag[k];
        }
        rhs.copy_from_slice(work);
        for eta in &self.etas {
            let vp = rhs[eta.pos] / eta.pivot;
            if vp != 0.0 {
                for &(i, a) in &eta.entries {
                    rhs[i] -= a * vp;
                }
            }
            rhs[eta.pos] = vp;
        }
    }

    /// Solves `B^T y = rhs` in place; on entry `rhs` is indexed by basis position, on exit by row.
    pub(crate) fn btran(&self, rhs: &mut [f64], work: &mut [f64]) {
        let m = self.m;
        for eta in self.etas.iter().rev() {
            let mut s = rhs[eta.pos];
            for &(i, a) in &eta.entries {
                s -= a * rhs[i];
            }
            rhs[eta.pos] = s / eta.pivot;
        }
        for k in 0..m {
            let w = rhs[self.pivot_col[k]] / self.u_diag[k];
            work[self.pivot_row[k]] = w;
            if w != 0.0 {
                for t in self.u_start[k]..self.u_start[k + 1] {
                    rhs[self.u_idx[t]] -= self.u_val[t] * w;
                }
            }
        }
        for k in (0..m).rev() {
            let mut s = work[self.pivot_row[k]];
            for t in self.l_start[k]..self.l_start[k + 1] {
                s -= self.l_val[t] * work[self.l_idx[t]];
            }
            work[self.pivot_row[k]] = s;
        }
        rhs.copy_from_slice(work);
    }

    /// Records the replacement of basis position `pos` by a column whose
    /// FTRAN image is `alpha` (indexed by basis position).
    pub(crate) fn update(&mut self, pos: usize, alpha: &[f64]) {
        let entries: Vec<(usize, f64)> = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != pos && a.abs() > 1e-13)
            .map(|(i, &a)| (i, a))
            .collect();
        self.eta_nnz += entries.len() + 1;
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            entries,
        });
    }
}

fn find_pivot(
    rows: &[Vec<(usize, f64)>],
    col_pat: &[Vec<usize>],
    row_active: &[bool],
    col_count: &[usize],
    rbk: &Buckets,
    cbk: &Buckets,
) -> Option<(usize, usize)> {
    let entry =
        |r: usize, c: usize| -> f64 { rows[r].iter().find(|&&(cc, _)| cc == c).map(|&(_, v)| v).unwrap_or(0.0) };
    let col_max = |c: usize| -> f64 {
        col_pat[c]
            .iter()
            .filter(|&&r| row_active[r])
            .map(|&r| entry(r, c).abs())
            .fold(0.0, f64::max)
    };

    // Column singletons need no multipliers.
    let mut c = cbk.head[1];
    while c != NIL {
        if let Some(&r) = col_pat[c]
            .iter()
            .find(|&&r| row_active[r] && entry(r, c).abs() > ABS_PIVOT_TOL)
        {
            return Some((r, c));
        }
        c = cbk.next[c];
    }

    let mut best: Option<(usize, usize)> = None;
    let mut best_cost = usize::MAX;
    let mut found = 0;
    let max_count = rbk.head.len() - 1;
    for count in 1..=max_count {
        // Columns with `count` active entries.
        let mut c = cbk.head[count];
        while c != NIL {
            let cmax = col_max(c);
            if cmax > ABS_PIVOT_TOL {
                for &r in &col_pat[c] {
                    if !row_active[r] {
                        continue;
                    }
                    let v = entry(r, c).abs();
                    if v >= THRESHOLD * cmax && v > ABS_PIVOT_TOL {
                        let cost = (rows[r].len() - 1) * (col_count[c] - 1);
                        if cost < best_cost {
                            best_cost = cost;
                            best = Some((r, c));
                        }
                    }
                }
                found += 1;
            }
            if found >= SEARCH_LIMIT && best.is_some() {
                return best;
            }
            c = cbk.next[c];
        }
        // Rows with `count` active entries.
        let mut r = rbk.head[count];
        while r != NIL {
            for &(c, v) in &rows[r] {
                let v = v.abs();
                if v <= ABS_PIVOT_TOL {
                    continue;
                }
                let cost = (rows[r].len() - 1) * (col_count[c] - 1);
                if cost < best_cost && v >= THRESHOLD * col_max(c) {
                    best_cost = cost;
                    best = Some((r, c));
                }
            }
            found += 1;
            if found >= SEARCH_LIMIT && best.is_some() {
                return best;
            }
            r = rbk.next[r];
        }
        if best.is_some() && best_cost <= (count - 1) * (count - 1) {
            return best;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_to_cols(a: &[Vec<f64>]) -> Vec<SparseCol> {
        let m = a.len();
        (0..m)
            .map(|c| (0..m).filter(|&r| a[r][c] != 0.0).map(|r| (r, a[r][c])).collect())
            .collect()
    }

    fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    #[test]
    fn solves_small_system_both_ways() {
        let a = vec![
            vec![2.0, 0.0, 1.0, 0.0],
            vec![1.0, 3.0, 0.0, 0.0],
            vec![0.0, 1.0, 4.0, 1.0],
            vec![0.0, 0.0, 1.0, 5.0],
        ];
        let lu = LuFactors::factorize(4, &dense_to_cols(&a)).unwrap();
        let x_true = [1.0, -2.0, 0.5, 3.0];
        let mut b = matvec(&a, &x_true);
        let mut work = vec![0.0; 4];
        lu.ftran(&mut b, &mut work);
        for (x, t) in b.iter().zip(&x_true) {
            assert!((x - t).abs() < 1e-12);
        }
        // B^T y = c
        let at: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| a[j][i]).collect()).collect();
        let y_true = [0.25, 1.0, -1.0, 2.0];
        let mut c = matvec(&at, &y_true);
        lu.btran(&mut c, &mut work);
        for (y, t) in c.iter().zip(&y_true) {
            assert!((y - t).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_update_matches_refactorization() {
        let a = vec![vec![1.0, 2.0, 0.0], vec![0.0, 1.0, 1.0], vec![3.0, 0.0, 1.0]];
        let mut lu = LuFactors::factorize(3, &dense_to_cols(&a)).unwrap();
        let mut work = vec![0.0; 3];
        // Replace column 1 by (1, 1, 1).
        let newcol = [1.0, 1.0, 1.0];
        let mut alpha = newcol.to_vec();
        lu.ftran(&mut alpha, &mut work);
        lu.update(1, &alpha);
        let mut b2 = a.clone();
        for r in 0..3 {
            b2[r][1] = newcol[r];
        }
        let x_true = [0.5, -1.0, 2.0];
        let mut rhs = matvec(&b2, &x_true);
        lu.ftran(&mut rhs, &mut work);
        for (x, t) in rhs.iter().zip(&x_true) {
            assert!((x - t).abs() < 1e-12, "{rhs:?}");
        }
        let bt: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| b2[j][i]).collect()).collect();
        let mut c = matvec(&bt, &x_true);
        lu.btran(&mut c, &mut work);
        for (y, t) in c.iter().zip(&x_true) {
            assert!((y - t).abs() < 1e-12, "{c:?}");
        }
    }

    #[test]
    fn reports_singular_positions() {
        let a = vec![vec![1.0, 2.0, 0.0], vec![2.0, 4.0, 0.0], vec![0.0, 0.0, 1.0]];
        let err = LuFactors::factorize(3, &dense_to_cols(&a)).unwrap_err();
        assert_eq!(err.positions.len(), 1);
        assert_eq!(err.rows.len(), 1);
    }
}
