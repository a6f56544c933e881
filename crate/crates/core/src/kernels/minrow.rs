//! Max-min of concave rate rows under shared linear budgets.
//!
//! Solved in epigraph form: maximize a level `tau` that every rate row must reach.

use std::f64::consts::LN_2;

use super::concave::{check_program, row_violation, ConcaveTerm, ResourceRow};
use super::interior::{self, Group, Reduced};
use super::KernelOptions;
use crate::error::{Error, Result};

/// `constant + sum_{j in vars} alpha_j log2(1 + beta_j p_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub vars: Vec<usize>,
    pub constant: f64,
}

/// Maximize `min_u rate_rows[u](p)` subject to `rows` and `p >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinRowProgram {
    pub terms: Vec<ConcaveTerm>,
    /// Rows must have disjoint supports.
    pub rate_rows: Vec<RateRow>,
    pub rows: Vec<ResourceRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinRowSolution {
    pub p: Vec<f64>,
    /// Smallest row value at `p`.
    pub tau: f64,
    pub row_values: Vec<f64>,
    /// Weights of the rate rows (sum to one).
    pub weights: Vec<f64>,
    /// Budget-row multipliers.
    pub duals: Vec<f64>,
    /// Relative gap and stationarity residual plus relative budget violation.
    pub kkt_residual: f64,
    pub iterations: usize,
}

fn row_value(prog: &MinRowProgram, row: &RateRow, p: &[f64]) -> f64 {
    row.constant
        + row
            .vars
            .iter()
            .map(|&j| prog.terms[j].alpha * (prog.terms[j].beta * p[j]).ln_1p() / LN_2)
            .sum::<f64>()
}

/// Maximizes the smallest rate row. Row supports must be disjoint.
pub fn maximize_minrow_concave(
    prog: &MinRowProgram,
    opts: KernelOptions,
) -> Result<MinRowSolution> {
    if prog.rate_rows.is_empty() {
        return Err(Error::Usage(
            "max-min program needs at least one rate row".into(),
        ));
    }
    let n = prog.terms.len();
    let mut owner = vec![usize::MAX; n];
    for (u, row) in prog.rate_rows.iter().enumerate() {
        if !row.constant.is_finite() {
            return Err(Error::Domain(format!(
                "rate row {u} has non-finite constant"
            )));
        }
        for &j in &row.vars {
            if j >= n {
                return Err(Error::Usage(format!(
                    "rate row {u} references variable {j} of {n}"
                )));
            }
            if owner[j] != usize::MAX {
                return Err(Error::Usage(format!(
                    "variable {j} appears in two rate rows"
                )));
            }
            owner[j] = u;
        }
    }
    check_program(&prog.terms, &prog.rows)?;
    let red = Reduced::new(&prog.terms, &prog.rows, |j| owner[j] != usize::MAX);
    let mut local = vec![usize::MAX; n];
    for (i, &j) in red.free.iter().enumerate() {
        local[j] = i;
    }
    let groups: Vec<Group> = prog
        .rate_rows
        .iter()
        .map(|row| Group {
            vars: row
                .vars
                .iter()
                .filter(|&&j| local[j] != usize::MAX)
                .map(|&j| local[j])
                .collect(),
            constant: row.constant,
        })
        .collect();
    let out = interior::solve(&red, &groups, opts);
    let p = red.scatter(&out.p, n);
    let row_values: Vec<f64> = prog
        .rate_rows
        .iter()
        .map(|row| row_value(prog, row, &p))
        .collect();
    let tau = row_values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(MinRowSolution {
        tau,
        row_values,
        weights: out.group_duals,
        duals: red.original_duals(&out.row_duals, prog.rows.len()),
        kkt_residual: out.residual + row_violation(&p, &prog.rows),
        iterations: out.iterations,
        p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_rows_split_evenly() {
        let prog = MinRowProgram {
            terms: vec![
                ConcaveTerm {
                    alpha: 1.0,
                    beta: 3.0
                };
                2
            ],
            rate_rows: vec![
                RateRow {
                    vars: vec![0],
                    constant: 0.0,
                },
                RateRow {
                    vars: vec![1],
                    constant: 0.0,
                },
            ],
            rows: vec![ResourceRow {
                coeffs: vec![(0, 1.0), (1, 1.0)],
                rhs: 2.0,
            }],
        };
        let s = maximize_minrow_concave(&prog, KernelOptions::default()).unwrap();
        assert!(
            (s.p[0] - 1.0).abs() < 1e-6 && (s.p[1] - 1.0).abs() < 1e-6,
            "{:?}",
            s.p
        );
        assert!((s.tau - 2.0).abs() < 1e-6);
    }

    #[test]
    fn constant_row_caps_level() {
        // Second row has no variables; its constant 0.5 bounds the optimum.
        let prog = MinRowProgram {
            terms: vec![ConcaveTerm {
                alpha: 1.0,
                beta: 3.0,
            }],
            rate_rows: vec![
                RateRow {
                    vars: vec![0],
                    constant: 0.0,
                },
                RateRow {
                    vars: vec![],
                    constant: 0.5,
                },
            ],
            rows: vec![ResourceRow {
                coeffs: vec![(0, 1.0)],
                rhs: 2.0,
            }],
        };
        let s = maximize_minrow_concave(&prog, KernelOptions::default()).unwrap();
        assert!((s.tau - 0.5).abs() < 1e-9, "{}", s.tau);
    }

    #[test]
    fn overlapping_rows_rejected() {
        let prog = MinRowProgram {
            terms: vec![ConcaveTerm {
                alpha: 1.0,
                beta: 1.0,
            }],
            rate_rows: vec![
                RateRow {
                    vars: vec![0],
                    constant: 0.0,
                },
                RateRow {
                    vars: vec![0],
                    constant: 0.0,
                },
            ],
            rows: vec![ResourceRow {
                coeffs: vec![(0, 1.0)],
                rhs: 1.0,
            }],
        };
        assert!(maximize_minrow_concave(&prog, KernelOptions::default()).is_err());
    }
}
