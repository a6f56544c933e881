//! Primal-dual interior-point core of the concave kernels.
//!
//! Both kernels maximize rates `alpha log2(1 + beta p)` over `p >= 0` under linear budget
//! rows; the max-min kernel adds an epigraph level `tau` bounded by every rate group. Newton
//! systems are reduced onto the budget and rate rows with the Woodbury identity, so a step
//! costs `O(vars * nnz_per_var^2 + rows^3)` instead of `O(vars^3)`.
//!
//! The answer is the better of the last interior iterate and the water-filling point of its
//! multipliers, each scaled onto the tightest budget.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};

use super::concave::{ConcaveTerm, ResourceRow};
use super::KernelOptions;

/// Centering parameter: the barrier weight grows by this factor relative to the current gap.
const MU: f64 = 10.0;
const ARMIJO: f64 = 0.01;
const BOUNDARY: f64 = 0.99;
const REFINE: usize = 2;

/// Problem restricted to the variables that can move.
pub(crate) struct Reduced {
    /// Original index of each free variable.
    pub free: Vec<usize>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Budget rows over free variables, scaled to a unit right-hand side.
    pub rows: Vec<Vec<(usize, f64)>>,
    /// Original index and right-hand side of each kept row.
    pub origin: Vec<(usize, f64)>,
}

impl Reduced {
    /// Drops variables that cannot move (zero weight, caller-excluded, or touched by a zero
    /// budget) and rows that are infinite or have nothing left to constrain.
    pub fn new(
        terms: &[ConcaveTerm],
        rows: &[ResourceRow],
        movable: impl Fn(usize) -> bool,
    ) -> Self {
        let n = terms.len();
        let mut pinned: Vec<bool> = (0..n)
            .map(|j| terms[j].alpha == 0.0 || !movable(j))
            .collect();
        for row in rows.iter().filter(|r| r.rhs == 0.0) {
            for &(j, a) in &row.coeffs {
                if a > 0.0 {
                    pinned[j] = true;
                }
            }
        }
        let mut index = vec![usize::MAX; n];
        let mut free = Vec::new();
        for j in (0..n).filter(|&j| !pinned[j]) {
            index[j] = free.len();
            free.push(j);
        }
        let mut kept = Vec::new();
        let mut origin = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            if !(row.rhs.is_finite() && row.rhs > 0.0) {
                continue;
            }
            let mut coeffs: Vec<(usize, f64)> = row
                .coeffs
                .iter()
                .filter(|&&(j, a)| a > 0.0 && index[j] != usize::MAX)
                .map(|&(j, a)| (index[j], a / row.rhs))
                .collect();
            if coeffs.is_empty() {
                continue;
            }
            coeffs.sort_by_key(|c| c.0);
            // Merge repeated entries so the Newton matrices stay symmetric in the obvious way.
            coeffs.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            kept.push(coeffs);
            origin.push((r, row.rhs));
        }
        Self {
            alpha: free.iter().map(|&j| terms[j].alpha).collect(),
            beta: free.iter().map(|&j| terms[j].beta).collect(),
            free,
            rows: kept,
            origin,
        }
    }

    /// Multipliers in the caller's row numbering and units.
    pub fn original_duals(&self, scaled: &[f64], num_rows: usize) -> Vec<f64> {
        let mut out = vec![0.0; num_rows];
        for (&(r, rhs), &l) in self.origin.iter().zip(scaled) {
            out[r] = l / rhs;
        }
        out
    }

    pub fn scatter(&self, p: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (&j, &v) in self.free.iter().zip(p) {
            out[j] = v;
        }
        out
    }
}

/// One rate row of the max-min kernel over free variables.
pub(crate) struct Group {
    pub vars: Vec<usize>,
    pub constant: f64,
}

pub(crate) struct Outcome {
    pub p: Vec<f64>,
    /// Multipliers of the scaled budget rows.
    pub row_duals: Vec<f64>,
    /// Multipliers of the rate groups.
    pub group_duals: Vec<f64>,
    /// Relative gap plus relative stationarity residual at termination.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone)]
struct Point {
    p: Vec<f64>,
    tau: f64,
    lam_row: Vec<f64>,
    lam_lo: Vec<f64>,
    lam_grp: Vec<f64>,
}

struct Solver<'a> {
    red: &'a Reduced,
    /// Empty for the separable objective.
    groups: &'a [Group],
    owner: Vec<usize>,
    cols: Vec<Vec<(usize, f64)>>,
}

/// Slacks of every inequality at a point; `None` outside the interior.
struct Slacks {
    row: Vec<f64>,
    grp: Vec<f64>,
}

impl<'a> Solver<'a> {
    fn level(&self) -> bool {
        !self.groups.is_empty()
    }

    /// Rate, its derivative, and minus its second derivative.
    #[inline]
    fn term(&self, j: usize, p: f64) -> (f64, f64, f64) {
        let (a, b) = (self.red.alpha[j], self.red.beta[j]);
        let q = 1.0 + b * p;
        (
            a * (b * p).ln_1p() / LN_2,
            a * b / (LN_2 * q),
            a * b * b / (LN_2 * q * q),
        )
    }

    fn group_values(&self, p: &[f64]) -> Vec<f64> {
        self.groups
            .iter()
            .map(|g| g.constant + g.vars.iter().map(|&j| self.term(j, p[j]).0).sum::<f64>())
            .collect()
    }

    fn objective(&self, p: &[f64], tau: f64) -> f64 {
        if self.level() {
            tau
        } else {
            (0..p.len()).map(|j| self.term(j, p[j]).0).sum()
        }
    }

    fn slacks(&self, p: &[f64], tau: f64) -> Option<Slacks> {
        if p.iter().any(|&v| !(v > 0.0)) {
            return None;
        }
        let row: Vec<f64> = self
            .red
            .rows
            .iter()
            .map(|r| 1.0 - r.iter().map(|&(j, a)| a * p[j]).sum::<f64>())
            .collect();
        let grp: Vec<f64> = self.group_values(p).iter().map(|v| v - tau).collect();
        if row.iter().chain(&grp).all(|&s| s > 0.0) {
            Some(Slacks { row, grp })
        } else {
            None
        }
    }

    /// Dual residual (stationarity) per coordinate; the last entry is `tau` when present.
    fn dual_residual(&self, pt: &Point) -> Vec<f64> {
        let n = pt.p.len();
        let mut r = Vec::with_capacity(n + 1);
        for j in 0..n {
            let (_, d1, _) = self.term(j, pt.p[j]);
            let weight = if self.level() {
                pt.lam_grp[self.owner[j]]
            } else {
                1.0
            };
            let price: f64 = self.cols[j]
                .iter()
                .map(|&(row, a)| pt.lam_row[row] * a)
                .sum();
            r.push(price - weight * d1 - pt.lam_lo[j]);
        }
        if self.level() {
            r.push(pt.lam_grp.iter().sum::<f64>() - 1.0);
        }
        r
    }

    /// Surrogate gap `sum lambda_i s_i` and the squared norm of the full residual at weight `t`.
    fn measure(&self, pt: &Point, s: &Slacks, t: f64) -> (f64, f64) {
        let mut eta = 0.0;
        let mut norm2: f64 = self.dual_residual(pt).iter().map(|v| v * v).sum();
        let mut cent = |lam: f64, slack: f64| {
            let c = lam * slack;
            eta += c;
            norm2 += (c - 1.0 / t).powi(2);
        };
        for (&l, &v) in pt.lam_row.iter().zip(&s.row) {
            cent(l, v);
        }
        for (&l, &v) in pt.lam_lo.iter().zip(&pt.p) {
            cent(l, v);
        }
        for (&l, &v) in pt.lam_grp.iter().zip(&s.grp) {
            cent(l, v);
        }
        (eta, norm2)
    }

    fn start(&self) -> Point {
        let n = self.red.alpha.len();
        let usage: Vec<f64> = self
            .red
            .rows
            .iter()
            .map(|r| r.iter().map(|&(_, a)| a).sum())
            .collect();
        let p: Vec<f64> = (0..n)
            .map(|j| {
                0.5 * self.cols[j]
                    .iter()
                    .map(|&(r, _)| 1.0 / usage[r])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let values = self.group_values(&p);
        let low = values.iter().copied().fold(f64::INFINITY, f64::min);
        let tau = if self.level() {
            low - 0.1 * low.abs().max(1e-6)
        } else {
            0.0
        };
        let s = self.slacks(&p, tau).expect("start point is interior");
        let m_tot = (s.row.len() + n + s.grp.len()) as f64;
        let kappa = self.objective(&p, tau).abs().max(self.magnitude()) / m_tot;
        Point {
            lam_row: s.row.iter().map(|v| kappa / v).collect(),
            lam_lo: p.iter().map(|v| kappa / v).collect(),
            lam_grp: vec![1.0 / s.grp.len().max(1) as f64; s.grp.len()],
            p,
            tau,
        }
    }

    /// Rough size of the objective, used to make the gap test relative.
    fn magnitude(&self) -> f64 {
        let a: f64 = self.red.alpha.iter().sum();
        let c = self
            .groups
            .iter()
            .map(|g| g.constant.abs())
            .fold(0.0, f64::max);
        1e-6 * (a + c)
    }

    /// Newton direction `(dp, dtau)` for barrier weight `t`, or `None` if the system is singular.
    fn direction(&self, pt: &Point, s: &Slacks, t: f64) -> Option<(Vec<f64>, f64)> {
        let n = pt.p.len();
        let m = s.row.len();
        let level = self.level();
        let mut d = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        let mut entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut h = vec![0.0; n];
        let mut h_tt = 0.0;
        let mut r_tau = 0.0;
        if level {
            r_tau = 1.0 - s.grp.iter().map(|v| 1.0 / (t * v)).sum::<f64>();
            h_tt = pt.lam_grp.iter().zip(&s.grp).map(|(l, v)| l / v).sum();
        }
        let row_w: Vec<f64> = pt
            .lam_row
            .iter()
            .zip(&s.row)
            .map(|(l, v)| (l / v).sqrt())
            .collect();
        for j in 0..n {
            let (_, d1, d2) = self.term(j, pt.p[j]);
            let pj = pt.p[j];
            let mut g = -1.0 / (t * pj);
            for &(r, a) in &self.cols[j] {
                g += a / (t * s.row[r]);
                entries[j].push((r, row_w[r] * a));
            }
            if level {
                let u = self.owner[j];
                let (lam, sl) = (pt.lam_grp[u], s.grp[u]);
                d[j] = lam * d2 + pt.lam_lo[j] / pj;
                g -= d1 / (t * sl);
                entries[j].push((m + u, (lam / sl).sqrt() * -d1));
                h[j] = -(lam / sl) * d1;
            } else {
                d[j] = d2 + pt.lam_lo[j] / pj;
                g -= d1;
            }
            rhs[j] = -g;
        }
        let width = m + if level { self.groups.len() } else { 0 };
        if level {
            let sol = solve_low_rank(&d, &entries, width, &[&rhs, &h])?;
            let (x1, x2) = (&sol[0], &sol[1]);
            let denom = h_tt - dot(&h, x2);
            if !(denom > 0.0) {
                return None;
            }
            let dtau = (r_tau - dot(&h, x1)) / denom;
            Some(((0..n).map(|j| x1[j] - x2[j] * dtau).collect(), dtau))
        } else {
            let mut sol = solve_low_rank(&d, &entries, width, &[&rhs])?;
            Some((sol.swap_remove(0), 0.0))
        }
    }

    fn dual_step(
        &self,
        pt: &Point,
        s: &Slacks,
        t: f64,
        dp: &[f64],
        dtau: f64,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let step =
            |lam: f64, slack: f64, along: f64| -lam + 1.0 / (t * slack) + lam / slack * along;
        let d_row = self
            .red
            .rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                step(
                    pt.lam_row[r],
                    s.row[r],
                    row.iter().map(|&(j, a)| a * dp[j]).sum(),
                )
            })
            .collect();
        let d_lo = (0..dp.len())
            .map(|j| step(pt.lam_lo[j], pt.p[j], -dp[j]))
            .collect();
        let d_grp = self
            .groups
            .iter()
            .enumerate()
            .map(|(u, g)| {
                let along: f64 = g
                    .vars
                    .iter()
                    .map(|&j| -self.term(j, pt.p[j]).1 * dp[j])
                    .sum::<f64>()
                    + dtau;
                step(pt.lam_grp[u], s.grp[u], along)
            })
            .collect();
        (d_row, d_lo, d_grp)
    }

    fn run(&self, opts: KernelOptions) -> Outcome {
        let mut pt = self.start();
        let mut residual = f64::INFINITY;
        let mut iterations = 0;
        while iterations < opts.max_iters {
            let s = self.slacks(&pt.p, pt.tau).expect("iterates stay interior");
            let m_tot = (s.row.len() + pt.p.len() + s.grp.len()) as f64;
            let (eta, _) = self.measure(&pt, &s, 1.0);
            let obj = self.objective(&pt.p, pt.tau);
            let scale = obj.abs().max(self.magnitude()).max(f64::MIN_POSITIVE);
            let gscale = 1.0
                + (0..pt.p.len())
                    .map(|j| self.term(j, pt.p[j]).1)
                    .fold(0.0, f64::max);
            let dual_inf = self
                .dual_residual(&pt)
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            residual = eta / scale + dual_inf / gscale;
            if eta <= opts.gap_tol * scale && dual_inf <= opts.gap_tol * gscale {
                break;
            }
            iterations += 1;
            let t = MU * m_tot / eta;
            let Some((dp, dtau)) = self.direction(&pt, &s, t) else {
                break;
            };
            let (d_row, d_lo, d_grp) = self.dual_step(&pt, &s, t, &dp, dtau);
            let mut step: f64 = 1.0;
            for (l, d) in pt
                .lam_row
                .iter()
                .zip(&d_row)
                .chain(pt.lam_lo.iter().zip(&d_lo))
                .chain(pt.lam_grp.iter().zip(&d_grp))
            {
                if *d < 0.0 {
                    step = step.min(-l / d);
                }
            }
            step = (BOUNDARY * step).min(1.0);
            let (_, base) = self.measure(&pt, &s, t);
            let base = base.sqrt();
            let mut accepted = None;
            while step > 1e-14 {
                let cand = Point {
                    p: pt.p.iter().zip(&dp).map(|(p, d)| p + step * d).collect(),
                    tau: pt.tau + step * dtau,
                    lam_row: pt
                        .lam_row
                        .iter()
                        .zip(&d_row)
                        .map(|(l, d)| l + step * d)
                        .collect(),
                    lam_lo: pt
                        .lam_lo
                        .iter()
                        .zip(&d_lo)
                        .map(|(l, d)| l + step * d)
                        .collect(),
                    lam_grp: pt
                        .lam_grp
                        .iter()
                        .zip(&d_grp)
                        .map(|(l, d)| l + step * d)
                        .collect(),
                };
                if let Some(cs) = self.slacks(&cand.p, cand.tau) {
                    let (_, norm2) = self.measure(&cand, &cs, t);
                    if norm2.sqrt() <= (1.0 - ARMIJO * step) * base {
                        accepted = Some(cand);
                        break;
                    }
                }
                step *= 0.5;
            }
            match accepted {
                Some(next) => pt = next,
                None => break,
            }
        }
        self.finish(pt, residual, iterations)
    }

    /// Picks the better of the interior iterate and the water-filling point of its multipliers.
    fn finish(&self, pt: Point, residual: f64, iterations: usize) -> Outcome {
        let n = pt.p.len();
        let mut filled: Vec<f64> = (0..n)
            .map(|j| {
                let price: f64 = self.cols[j].iter().map(|&(r, a)| pt.lam_row[r] * a).sum();
                let weight = if self.level() {
                    pt.lam_grp[self.owner[j]]
                } else {
                    1.0
                } * self.red.alpha[j];
                if price > 0.0 {
                    (weight / (LN_2 * price) - 1.0 / self.red.beta[j]).max(0.0)
                } else {
                    pt.p[j]
                }
            })
            .collect();
        fit_rows(&mut filled, &self.red.rows);
        let mut interior = pt.p.clone();
        fit_rows(&mut interior, &self.red.rows);
        let score = |p: &[f64]| {
            if self.level() {
                self.group_values(p)
                    .into_iter()
                    .fold(f64::INFINITY, f64::min)
            } else {
                self.objective(p, 0.0)
            }
        };
        let p = if score(&filled) >= score(&interior) {
            filled
        } else {
            interior
        };
        Outcome {
            p,
            row_duals: pt.lam_row,
            group_duals: pt.lam_grp,
            residual,
            iterations,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scales `p` uniformly (up or down) onto the tightest unit-budget row; every rate grows
/// with `p`, so this never hurts an interior point and repairs a slightly infeasible one.
fn fit_rows(p: &mut [f64], rows: &[Vec<(usize, f64)>]) {
    let worst = rows
        .iter()
        .map(|r| r.iter().map(|&(j, a)| a * p[j]).sum::<f64>())
        .fold(0.0, f64::max);
    if worst > 0.0 {
        let s = (1.0 - 4.0 * f64::EPSILON) / worst;
        p.iter_mut().for_each(|v| *v *= s);
    }
}

/// Solves `(diag(d) + sum_k u_k u_k^T) x = r` for each right-hand side, where column `j` of the
/// `u_k` is given sparsely by `entries[j]`.
fn solve_low_rank(
    d: &[f64],
    entries: &[Vec<(usize, f64)>],
    width: usize,
    rhs: &[&[f64]],
) -> Option<Vec<Vec<f64>>> {
    let n = d.len();
    if n <= width {
        let mut k = DMatrix::from_diagonal(&DVector::from_column_slice(d));
        for list in &transpose(entries, width) {
            for &(a, va) in list {
                for &(b, vb) in list {
                    k[(a, b)] += va * vb;
                }
            }
        }
        let ch = k.cholesky()?;
        return Some(
            rhs.iter()
                .map(|r| ch.solve(&DVector::from_column_slice(r)).as_slice().to_vec())
                .collect(),
        );
    }
    // Woodbury: K^-1 = D^-1 - D^-1 U^T (I + U D^-1 U^T)^-1 U D^-1.
    let mut s = DMatrix::<f64>::identity(width, width);
    for (j, e) in entries.iter().enumerate() {
        for &(a, va) in e {
            for &(b, vb) in e {
                s[(a, b)] += va * vb / d[j];
            }
        }
    }
    let ch = s.cholesky()?;
    let by_k = transpose(entries, width);
    let apply_inverse = |r: &[f64]| -> Vec<f64> {
        let mut y = DVector::<f64>::zeros(width);
        for (j, e) in entries.iter().enumerate() {
            for &(a, va) in e {
                y[a] += va * r[j] / d[j];
            }
        }
        let z = ch.solve(&y);
        (0..n)
            .map(|j| (r[j] - entries[j].iter().map(|&(a, va)| va * z[a]).sum::<f64>()) / d[j])
            .collect::<Vec<f64>>()
    };
    let out = rhs
        .iter()
        .map(|r| {
            let mut x = apply_inverse(r);
            // The Woodbury form loses accuracy when some constraints are nearly active;
            // a few refinement passes against the exact operator recover it.
            for _ in 0..REFINE {
                let kx = apply(d, &by_k, &x);
                let res: Vec<f64> = r.iter().zip(&kx).map(|(a, b)| a - b).collect();
                let dx = apply_inverse(&res);
                x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
            }
            x
        })
        .collect();
    Some(out)
}

fn transpose(entries: &[Vec<(usize, f64)>], width: usize) -> Vec<Vec<(usize, f64)>> {
    let mut by_k: Vec<Vec<(usize, f64)>> = vec![Vec::new(); width];
    for (j, e) in entries.iter().enumerate() {
        for &(k, v) in e {
            by_k[k].push((j, v));
        }
    }
    by_k
}

/// `(diag(d) + sum_k u_k u_k^T) x`.
fn apply(d: &[f64], by_k: &[Vec<(usize, f64)>], x: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = d.iter().zip(x).map(|(a, b)| a * b).collect();
    for list in by_k {
        let dotted: f64 = list.iter().map(|&(j, v)| v * x[j]).sum();
        for &(j, v) in list {
            out[j] += v * dotted;
        }
    }
    out
}

/// Runs the interior-point method; `groups` empty means the separable objective.
pub(crate) fn solve(red: &Reduced, groups: &[Group], opts: KernelOptions) -> Outcome {
    let n = red.alpha.len();
    let mut owner = vec![usize::MAX; n];
    for (u, g) in groups.iter().enumerate() {
        for &j in &g.vars {
            owner[j] = u;
        }
    }
    let mut cols = vec![Vec::new(); n];
    for (r, row) in red.rows.iter().enumerate() {
        for &(j, a) in row {
            cols[j].push((r, a));
        }
    }
    let solver = Solver {
        red,
        groups,
        owner,
        cols,
    };
    if n == 0 {
        let mut group_duals = vec![0.0; groups.len()];
        if let Some((u, _)) = groups
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.constant.total_cmp(&b.1.constant))
        {
            group_duals[u] = 1.0;
        }
        return Outcome {
            p: Vec::new(),
            row_duals: vec![0.0; red.rows.len()],
            group_duals,
            residual: 0.0,
            iterations: 0,
        };
    }
    solver.run(opts)
}
