use crate::error::{Error, Result};

/// Resource limits shared by every solver.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    /// Interference temperature threshold `eps_p` in watts. May be infinite.
    pub eps_p: f64,
    /// Communication energy budget `E_com` per UAV, joules.
    pub e_com: Vec<f64>,
    /// Per-slot transmit power cap per UAV, watts.
    pub p_max: f64,
    /// Total hovering time, seconds.
    pub t_total: f64,
    /// Hovering time cap per slot, seconds.
    pub t_max: f64,
}

impl ConstraintSet {
    /// Same energy budget for each of `num_uavs` UAVs, splitting `e_total` evenly.
    pub fn uniform(
        eps_p: f64,
        e_total: f64,
        num_uavs: usize,
        p_max: f64,
        t_total: f64,
        t_max: f64,
    ) -> Self {
        Self {
            eps_p,
            e_com: vec![e_total / num_uavs as f64; num_uavs],
            p_max,
            t_total,
            t_max,
        }
    }

    pub fn validate(&self, num_uavs: usize) -> Result<()> {
        if self.e_com.len() != num_uavs {
            return Err(Error::Usage(format!(
                "constraint set has {} energy budgets for {num_uavs} UAVs",
                self.e_com.len()
            )));
        }
        let positive = |v: f64| v > 0.0 && !v.is_nan();
        let finite_positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.eps_p) {
            return Err(Error::Config(format!(
                "eps_p must be positive, got {}",
                self.eps_p
            )));
        }
        if let Some(e) = self.e_com.iter().find(|&&e| !finite_positive(e)) {
            return Err(Error::Config(format!(
                "energy budgets must be positive, got {e}"
            )));
        }
        if !finite_positive(self.p_max)
            || !finite_positive(self.t_total)
            || !finite_positive(self.t_max)
        {
            return Err(Error::Config(
                "p_max, t_total and t_max must be positive".into(),
            ));
        }
        if self.t_max > self.t_total {
            return Err(Error::Config(format!(
                "t_max ({}) exceeds t_total ({})",
                self.t_max, self.t_total
            )));
        }
        Ok(())
    }
}
