//! Optimization kernels shared by both pipelines.

mod concave;
mod interior;
mod lp;
mod minrow;

pub use concave::{
    maximize_separable_concave, ConcaveSolution, ConcaveTerm, ResourceRow, SeparableConcaveProgram,
};
pub use lp::{solve_lp, LinearProgram, LpSolution, LpStatus};
pub use minrow::{maximize_minrow_concave, MinRowProgram, MinRowSolution, RateRow};

/// Iteration limit and accuracy target of the concave kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelOptions {
    /// Stop once the relative duality gap and the relative stationarity residual both fall below this.
    pub gap_tol: f64,
    /// Newton iterations.
    pub max_iters: usize,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-9,
            max_iters: 200,
        }
    }
}

/// Lagrange multipliers carried between iterations of the allocation algorithms.
///
/// The sum pipeline prices interference (`lambda[n][i]`), energy (`mu[k]`) and per-slot power
/// (`gamma[n][k]`); `zeta[n][g]` is the price of a subchannel, i.e. its best positive score.
/// The max-min power step reports its own multipliers on the same rows (`nu`, `xi`, `theta`),
/// the per-user weights `psi[n][u]`, and the epigraph value `tau`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DualState {
    pub lambda: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub gamma: Vec<Vec<f64>>,
    pub zeta: Vec<Vec<f64>>,
    pub nu: Vec<Vec<f64>>,
    pub xi: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
    pub psi: Vec<Vec<f64>>,
    pub tau: f64,
    /// Initial steps for the interference, energy and power families.
    pub steps: [f64; 3],
}

impl DualState {
    pub fn zeros(
        num_slots: usize,
        num_sat_users: usize,
        num_uavs: usize,
        num_subchannels: usize,
    ) -> Self {
        Self {
            lambda: vec![vec![0.0; num_sat_users]; num_slots],
            mu: vec![0.0; num_uavs],
            gamma: vec![vec![0.0; num_uavs]; num_slots],
            zeta: vec![vec![0.0; num_subchannels]; num_slots],
            nu: vec![vec![0.0; num_sat_users]; num_slots],
            xi: vec![0.0; num_uavs],
            theta: vec![vec![0.0; num_uavs]; num_slots],
            psi: Vec::new(),
            tau: 0.0,
            steps: [0.0; 3],
        }
    }
}
