//! Textbook two-phase tableau simplex with Bland's rule, used as an
//! independent reference for the sparse engine. Variables must have a
//! finite lower bound; finite upper bounds become explicit rows.

use mpbap_core::lp::{LinearProgram, Sense};

#[derive(Debug, PartialEq)]
pub enum DenseResult {
    Optimal(f64),
    Infeasible,
    Unbounded,
}

pub fn dense_solve(lp: &LinearProgram) -> DenseResult {
    let n = lp.num_vars();
    // Rows over shifted variables x' = x - lower >= 0.
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = Vec::new();
    for row in &lp.rows {
        let mut a = vec![0.0; n];
        let mut rhs = row.rhs;
        for &(j, v) in &row.coeffs {
            a[j] += v;
            rhs -= v * lp.lower[j];
        }
        rows.push((a, row.sense, rhs));
    }
    for j in 0..n {
        assert!(lp.lower[j].is_finite());
        if lp.upper[j].is_finite() {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            rows.push((a, Sense::Le, lp.upper[j] - lp.lower[j]));
        }
    }
    let offset: f64 = (0..n).map(|j| lp.objective[j] * lp.lower[j]).sum();
    let m = rows.len();
    // Normalize to rhs >= 0.
    for r in rows.iter_mut() {
        if r.2 < 0.0 {
            r.0.iter_mut().for_each(|v| *v = -*v);
            r.2 = -r.2;
            r.1 = match r.1 {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }
    let n_slack = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Sense::Le).count();
    let width = n + n_slack + n_art;
    let mut t = vec![vec![0.0; width + 1]; m];
    let mut basis = vec![0usize; m];
    let (mut s, mut a) = (n, n + n_slack);
    for (i, (coef, sense, rhs)) in rows.iter().enumerate() {
        t[i][..n].copy_from_slice(coef);
        t[i][width] = *rhs;
        match sense {
            Sense::Le => {
                t[i][s] = 1.0;
                basis[i] = s;
                s += 1;
            }
            Sense::Ge => {
                t[i][s] = -1.0;
                s += 1;
                t[i][a] = 1.0;
                basis[i] = a;
                a += 1;
            }
            Sense::Eq => {
                t[i][a] = 1.0;
                basis[i] = a;
                a += 1;
            }
        }
    }
    let mut phase1 = vec![0.0; width];
    for c in phase1.iter_mut().skip(n + n_slack) {
        *c = 1.0;
    }
    match run(&mut t, &mut basis, &phase1, width, width) {
        Some(v) if v > 1e-7 => return DenseResult::Infeasible,
        None => return DenseResult::Infeasible,
        _ => {}
    }
    // Drive artificials out of the basis where possible.
    for i in 0..m {
        if basis[i] >= n + n_slack {
            if let Some(j) = (0..n + n_slack).find(|&j| t[i][j].abs() > 1e-9) {
                pivot(&mut t, &mut basis, i, j);
            }
        }
    }
    let mut cost = vec![0.0; width];
    cost[..n].copy_from_slice(&lp.objective);
    match run(&mut t, &mut basis, &cost, n + n_slack, width) {
        Some(v) => DenseResult::Optimal(v + offset),
        None => DenseResult::Unbounded,
    }
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, c: usize) {
    let p = t[r][c];
    t[r].iter_mut().for_each(|v| *v /= p);
    let prow = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i != r && row[c] != 0.0 {
            let f = row[c];
            for (v, pv) in row.iter_mut().zip(&prow) {
                *v -= f * pv;
            }
        }
    }
    basis[r] = c;
}

/// Minimizes `cost` over columns `< allowed`; `None` when unbounded.
fn run(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], allowed: usize, width: usize) -> Option<f64> {
    loop {
        let mut entering = None;
        for j in 0..allowed {
            if basis.contains(&j) {
                continue;
            }
            let d = cost[j] - (0..t.len()).map(|i| cost[basis[i]] * t[i][j]).sum::<f64>();
            if d < -1e-9 {
                entering = Some(j);
                break;
            }
        }
        let Some(j) = entering else {
            return Some((0..t.len()).map(|i| cost[basis[i]] * t[i][width]).sum());
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..t.len() {
            if t[i][j] > 1e-9 {
                let ratio = t[i][width] / t[i][j];
                let better = match leave {
                    None => true,
                    Some((li, lr)) => ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && basis[i] < basis[li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let (r, _) = leave?;
        pivot(t, basis, r, j);
    }
}
