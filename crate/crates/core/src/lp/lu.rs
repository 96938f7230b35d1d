//! Sparse LU factorization of a simplex basis with product-form updates.
//!
//! The factorization is left-looking: columns are processed in ascending
//! nonzero order, each is reduced against the L columns already built and a
//! row pivot is picked by threshold partial pivoting with a static
//! row-count tie break. With `P B Q = L U`, `L` unit lower triangular:
//! `row_of[k]` is the row pivoted at step `k` and `col_of[k]` the basis
//! position it came from.

use alloc::vec;
use alloc::vec::Vec;

const PIVOT_THRESHOLD: f64 = 0.1;
const SINGULAR_TOL: f64 = 1e-11;

#[derive(Clone, Debug)]
pub(crate) struct LuFactor {
    m: usize,
    row_of: Vec<usize>,
    col_of: Vec<usize>,
    l_cols: Vec<Vec<(u32, f64)>>,
    u_cols: Vec<Vec<(u32, f64)>>,
    u_diag: Vec<f64>,
    etas: Vec<Eta>,
}

#[derive(Clone, Debug)]
struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(u32, f64)>,
}

/// Basis positions whose columns turned out dependent, with rows left
/// without a pivot. Pairing them up and swapping in the row slacks repairs
/// the basis.
#[derive(Debug)]
pub(crate) struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

impl LuFactor {
    /// Factorizes the `m x m` matrix whose column at basis position `p` is
    /// `columns[p]` (row index, value).
    pub fn factorize(m: usize, columns: &[Vec<(u32, f64)>]) -> Result<LuFactor, Singular> {
        debug_assert_eq!(columns.len(), m);
        let mut row_count = vec![0usize; m];
        for col in columns {
            for &(i, _) in col {
                row_count[i as usize] += 1;
            }
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&p| columns[p].len());

        let mut pinv = vec![usize::MAX; m];
        let mut row_of = Vec::with_capacity(m);
        let mut col_of = Vec::with_capacity(m);
        let mut l_cols: Vec<Vec<(u32, f64)>> = Vec::with_capacity(m);
        let mut u_cols: Vec<Vec<(u32, f64)>> = Vec::with_capacity(m);
        let mut u_diag = Vec::with_capacity(m);
        let mut dependent = Vec::new();

        let mut x = vec![0.0f64; m];
        let mut mark = vec![false; m];
        let mut touched: Vec<usize> = Vec::new();

        for &pos in &order {
            for &(i, v) in &columns[pos] {
                let i = i as usize;
                if !mark[i] {
                    mark[i] = true;
                    touched.push(i);
                }
                x[i] += v;
            }
            let k = row_of.len();
            for kk in 0..k {
                let r: usize = row_of[kk];
                let v = x[r];
                if v == 0.0 {
                    continue;
                }
                for &(i, l) in &l_cols[kk] {
                    let i = i as usize;
                    if !mark[i] {
                        mark[i] = true;
                        touched.push(i);
                    }
                    x[i] -= l * v;
                }
            }
            let mut ucol = Vec::new();
            let mut max_abs: f64 = 0.0;
            for &i in &touched {
                if pinv[i] != usize::MAX {
                    if x[i] != 0.0 {
                        ucol.push((pinv[i] as u32, x[i]));
                    }
                } else {
                    max_abs = max_abs.max(x[i].abs());
                }
            }
            if max_abs < SINGULAR_TOL {
                dependent.push(pos);
            } else {
                let mut best: Option<usize> = None;
                for &i in &touched {
                    if pinv[i] != usize::MAX || x[i].abs() < PIVOT_THRESHOLD * max_abs {
                        continue;
                    }
                    best = match best {
                        None => Some(i),
                        Some(b) => {
                            if (row_count[i], i) < (row_count[b], b) {
                                Some(i)
                            } else {
                                Some(b)
                            }
                        }
                    };
                }
                let piv_row = best.expect("a pivot candidate exists above the threshold");
                let piv = x[piv_row];
                let mut lcol = Vec::new();
                for &i in &touched {
                    if pinv[i] == usize::MAX && i != piv_row && x[i] != 0.0 {
                        lcol.push((i as u32, x[i] / piv));
                    }
                }
                pinv[piv_row] = k;
                row_of.push(piv_row);
                col_of.push(pos);
                l_cols.push(lcol);
                u_cols.push(ucol);
                u_diag.push(piv);
            }
            for &i in &touched {
                x[i] = 0.0;
                mark[i] = false;
            }
            touched.clear();
        }

        if !dependent.is_empty() {
            let rows = (0..m).filter(|&i| pinv[i] == usize::MAX).collect();
            return Err(Singular { positions: dependent, rows });
        }
        Ok(LuFactor { m, row_of, col_of, l_cols, u_cols, u_diag, etas: Vec::new() })
    }

    pub fn num_etas(&self) -> usize {
        self.etas.len()
    }

    /// Solves `B x = b` in place: `rhs` is indexed by row on entry and by
    /// basis position on exit.
    pub fn ftran(&self, rhs: &mut [f64], work: &mut Vec<f64>) {
        let m = self.m;
        for k in 0..m {
            let v = rhs[self.row_of[k]];
            if v == 0.0 {
                continue;
            }
            for &(i, l) in &self.l_cols[k] {
                rhs[i as usize] -= l * v;
            }
        }
        work.clear();
        work.extend(self.row_of.iter().map(|&r| rhs[r]));
        for k in (0..m).rev() {
            let zk = work[k] / self.u_diag[k];
            work[k] = zk;
            if zk == 0.0 {
                continue;
            }
            for &(kk, u) in &self.u_cols[k] {
                work[kk as usize] -= u * zk;
            }
        }
        for k in 0..m {
            rhs[self.col_of[k]] = work[k];
        }
        for eta in &self.etas {
            let t = rhs[eta.pos] / eta.pivot;
            rhs[eta.pos] = t;
            if t == 0.0 {
                continue;
            }
            for &(i, d) in &eta.entries {
                rhs[i as usize] -= d * t;
            }
        }
    }

    /// Solves `Bᵀ y = c` in place: `rhs` is indexed by basis position on
    /// entry and by row on exit.
    pub fn btran(&self, rhs: &mut [f64], work: &mut Vec<f64>) {
        let m = self.m;
        for eta in self.etas.iter().rev() {
            let mut s = rhs[eta.pos];
            for &(i, d) in &eta.entries {
                s -= d * rhs[i as usize];
            }
            rhs[eta.pos] = s / eta.pivot;
        }
        work.clear();
        work.extend(self.col_of.iter().map(|&p| rhs[p]));
        for k in 0..m {
            let mut s = work[k];
            for &(kk, u) in &self.u_cols[k] {
                s -= u * work[kk as usize];
            }
            work[k] = s / self.u_diag[k];
        }
        for k in (0..m).rev() {
            let mut s = work[k];
            for &(i, l) in &self.l_cols[k] {
                s -= l * rhs[i as usize];
            }
            rhs[self.row_of[k]] = s;
        }
    }

    /// Records the replacement of the column at basis position `pos` by a
    /// column whose FTRAN image is `alpha`.
    pub fn push_eta(&mut self, pos: usize, alpha: &[f64]) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i != pos && v != 0.0)
            .map(|(i, &v)| (i as u32, v))
            .collect();
        self.etas.push(Eta { pos, pivot: alpha[pos], entries });
    }
}
