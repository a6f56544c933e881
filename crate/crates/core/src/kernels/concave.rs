//! Separable `sum alpha log2(1 + beta p)` maximization under linear budgets.

use std::f64::consts::LN_2;

use super::interior::{self, Reduced};
use super::KernelOptions;
use crate::error::{Error, Result};

/// One concave term `alpha * log2(1 + beta * p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcaveTerm {
    pub alpha: f64,
    pub beta: f64,
}

/// Sparse inequality `sum_j a_j p_j <= rhs` with non-negative coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparableConcaveProgram {
    pub terms: Vec<ConcaveTerm>,
    pub rows: Vec<ResourceRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcaveSolution {
    pub p: Vec<f64>,
    pub objective: f64,
    /// One multiplier per row.
    pub duals: Vec<f64>,
    /// Relative duality gap plus relative row violation at the returned point.
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Validates terms and rows.
pub(crate) fn check_program(terms: &[ConcaveTerm], rows: &[ResourceRow]) -> Result<()> {
    let n = terms.len();
    if let Some(t) = terms
        .iter()
        .find(|t| !(t.alpha >= 0.0 && t.alpha.is_finite() && t.beta > 0.0 && t.beta.is_finite()))
    {
        return Err(Error::Domain(format!(
            "concave term needs alpha >= 0 and beta > 0, got {t:?}"
        )));
    }
    let mut bounded = vec![false; n];
    for (r, row) in rows.iter().enumerate() {
        if !(row.rhs >= 0.0) {
            return Err(Error::Domain(format!(
                "row {r} has negative or NaN right-hand side {}",
                row.rhs
            )));
        }
        for &(j, a) in &row.coeffs {
            if j >= n {
                return Err(Error::Usage(format!(
                    "row {r} references variable {j} of {n}"
                )));
            }
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::Domain(format!(
                    "row {r} has invalid coefficient {a}"
                )));
            }
            if a > 0.0 && row.rhs.is_finite() {
                bounded[j] = true;
            }
        }
    }
    if let Some(j) = (0..n).find(|&j| terms[j].alpha > 0.0 && !bounded[j]) {
        return Err(Error::Usage(format!(
            "variable {j} is not bounded by any row"
        )));
    }
    Ok(())
}

pub(crate) fn separable_value(terms: &[ConcaveTerm], p: &[f64]) -> f64 {
    terms
        .iter()
        .zip(p)
        .map(|(t, &v)| t.alpha * (t.beta * v).ln_1p() / LN_2)
        .sum()
}

/// Largest relative excess of any finite row.
pub(crate) fn row_violation(p: &[f64], rows: &[ResourceRow]) -> f64 {
    rows.iter()
        .filter(|r| r.rhs.is_finite())
        .map(|row| {
            let used: f64 = row.coeffs.iter().map(|&(j, a)| a * p[j]).sum();
            ((used - row.rhs) / row.rhs.max(f64::MIN_POSITIVE)).max(0.0)
        })
        .fold(0.0, f64::max)
}

/// Maximizes `sum_j alpha_j log2(1 + beta_j p_j)` subject to `A p <= b`, `p >= 0`.
///
/// Every variable with `alpha > 0` must appear in some finite row. The zero point is always
/// feasible, so the call only fails on malformed input. At the returned point every active
/// variable sits exactly on its water-filling level `alpha / (ln2 c) - 1/beta` for the
/// reported multipliers, up to a common scale-down onto the budgets.
pub fn maximize_separable_concave(
    prog: &SeparableConcaveProgram,
    opts: KernelOptions,
) -> Result<ConcaveSolution> {
    check_program(&prog.terms, &prog.rows)?;
    let n = prog.terms.len();
    let red = Reduced::new(&prog.terms, &prog.rows, |_| true);
    let out = interior::solve(&red, &[], opts);
    let p = red.scatter(&out.p, n);
    Ok(ConcaveSolution {
        objective: separable_value(&prog.terms, &p),
        duals: red.original_duals(&out.row_duals, prog.rows.len()),
        kkt_residual: out.residual + row_violation(&p, &prog.rows),
        iterations: out.iterations,
        p,
    })
}
