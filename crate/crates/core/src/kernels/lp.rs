//! Dense two-phase simplex with Bland's rule.

use crate::error::{Error, Result};

/// `maximize c^T x  s.t.  A x <= b,  lo <= x <= hi`. `hi` may be infinite, `lo` may not.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl LinearProgram {
    /// Program with `x >= 0` and no upper bounds.
    pub fn nonneg(c: Vec<f64>, a: Vec<Vec<f64>>, b: Vec<f64>) -> Self {
        let n = c.len();
        Self {
            c,
            a,
            b,
            lo: vec![0.0; n],
            hi: vec![f64::INFINITY; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal point; empty unless `status` is `Optimal`.
    pub x: Vec<f64>,
    /// `c^T x`, or NaN when there is no optimum.
    pub objective: f64,
}

const EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 100_000;

struct Tableau {
    /// `rows x (cols + 1)`, last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize, obj: &mut [f64]) {
        let piv = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= piv;
        }
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    for (v, p) in row.iter_mut().zip(&prow) {
                        *v -= f * p;
                    }
                }
            }
        }
        let f = obj[c];
        if f != 0.0 {
            for (v, p) in obj.iter_mut().zip(&prow) {
                *v -= f * p;
            }
        }
        self.basis[r] = c;
    }

    /// Maximizes with reduced costs in `obj` (entries `obj[j] > 0` improve). Returns false when unbounded.
    fn run(&mut self, obj: &mut [f64], allowed: &[bool]) -> Result<bool> {
        for _ in 0..MAX_PIVOTS {
            let Some(enter) = (0..self.cols).find(|&j| allowed[j] && obj[j] > EPS) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.t.iter().enumerate() {
                let a = row[enter];
                if a > EPS {
                    let ratio = row[self.cols] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - EPS
                                || (ratio <= lr + EPS && self.basis[i] < self.basis[li])
                            {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(false),
                Some((r, _)) => self.pivot(r, enter, obj),
            }
        }
        Err(Error::Numerical {
            message: "simplex pivot limit reached".into(),
            residual: f64::NAN,
        })
    }
}

/// Solves `lp` to an optimal vertex, or reports infeasibility / unboundedness.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    let n = lp.c.len();
    let m = lp.a.len();
    if lp.b.len() != m || lp.lo.len() != n || lp.hi.len() != n || lp.a.iter().any(|r| r.len() != n)
    {
        return Err(Error::Usage(
            "linear program dimensions are inconsistent".into(),
        ));
    }
    let finite =
        lp.c.iter()
            .chain(lp.a.iter().flatten())
            .chain(&lp.b)
            .chain(&lp.lo)
            .all(|v| v.is_finite());
    if !finite || lp.hi.iter().any(|v| v.is_nan()) {
        return Err(Error::Usage("linear program entries must be finite".into()));
    }
    let none = || LpSolution {
        status: LpStatus::Infeasible,
        x: Vec::new(),
        objective: f64::NAN,
    };
    if lp.lo.iter().zip(&lp.hi).any(|(l, h)| l > h) {
        return Ok(none());
    }

    // Shift to y = x - lo >= 0 and turn finite upper bounds into rows.
    let mut rows: Vec<(Vec<f64>, f64)> =
        lp.a.iter()
            .zip(&lp.b)
            .map(|(row, &bi)| {
                let shift: f64 = row.iter().zip(&lp.lo).map(|(a, l)| a * l).sum();
                (row.clone(), bi - shift)
            })
            .collect();
    for j in 0..n {
        if lp.hi[j].is_finite() {
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            rows.push((row, lp.hi[j] - lp.lo[j]));
        }
    }
    let m_all = rows.len();
    let artificial_rows: Vec<usize> = (0..m_all).filter(|&i| rows[i].1 < 0.0).collect();
    let n_art = artificial_rows.len();
    let cols = n + m_all + n_art;

    let mut t = vec![vec![0.0; cols + 1]; m_all];
    let mut basis = vec![0; m_all];
    let mut art_of_row = vec![None; m_all];
    for (q, &i) in artificial_rows.iter().enumerate() {
        art_of_row[i] = Some(n + m_all + q);
    }
    for (i, (row, rhs)) in rows.iter().enumerate() {
        let sign = if *rhs < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = sign * row[j];
        }
        t[i][n + i] = sign;
        t[i][cols] = sign * rhs;
        match art_of_row[i] {
            Some(a) => {
                t[i][a] = 1.0;
                basis[i] = a;
            }
            None => basis[i] = n + i,
        }
    }
    let mut tab = Tableau { t, basis, cols };

    if n_art > 0 {
        // Phase I: maximize -sum(artificials); reduced costs after pricing out the basis.
        let mut obj = vec![0.0; cols + 1];
        for &i in &artificial_rows {
            for (o, v) in obj.iter_mut().zip(&tab.t[i]) {
                *o += v;
            }
        }
        for q in 0..n_art {
            obj[n + m_all + q] = 0.0;
        }
        let allowed = vec![true; cols];
        tab.run(&mut obj, &allowed)?;
        let infeasibility: f64 = (0..m_all)
            .filter(|&i| tab.basis[i] >= n + m_all)
            .map(|i| tab.t[i][cols])
            .sum();
        let scale = 1.0 + rows.iter().map(|r| r.1.abs()).fold(0.0, f64::max);
        if infeasibility > 1e-9 * scale {
            return Ok(none());
        }
        // Drive zero-valued artificials out of the basis where possible.
        for i in 0..m_all {
            if tab.basis[i] >= n + m_all {
                if let Some(j) = (0..n + m_all).find(|&j| tab.t[i][j].abs() > 1e-9) {
                    let mut dummy = vec![0.0; cols + 1];
                    tab.pivot(i, j, &mut dummy);
                }
            }
        }
    }

    // Phase II.
    let mut obj = vec![0.0; cols + 1];
    obj[..n].copy_from_slice(&lp.c);
    for i in 0..m_all {
        let bj = tab.basis[i];
        let f = obj[bj];
        if f != 0.0 {
            for (o, v) in obj.iter_mut().zip(&tab.t[i]) {
                *o -= f * v;
            }
        }
    }
    let allowed: Vec<bool> = (0..cols).map(|j| j < n + m_all).collect();
    if !tab.run(&mut obj, &allowed)? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            objective: f64::NAN,
        });
    }
    let mut x = lp.lo.clone();
    for i in 0..m_all {
        if tab.basis[i] < n {
            x[tab.basis[i]] += tab.t[i][cols];
        }
    }
    // Clean round-off against the box.
    for j in 0..n {
        x[j] = x[j].clamp(lp.lo[j], lp.hi[j]);
    }
    let objective = lp.c.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
    })
}
