//! Augmented Lagrangian for the peak (equality) and leakage (inequality)
//! constraints, and its multiplier schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Graph, Var};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintState {
    pub lambda_p: f64,
    pub lambda_l: f64,
    pub mu_p: f64,
    pub mu_l: f64,
    pub tau: f64,
    pub iteration: usize,
}

impl Default for ConstraintState {
    fn default() -> Self {
        ConstraintState { lambda_p: 0.0, lambda_l: 0.0, mu_p: 0.1, mu_l: 0.001, tau: 0.004, iteration: 0 }
    }
}

impl ConstraintState {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_p > 0.0 && self.mu_l > 0.0) {
            return Err(Error::NonPositivePenalty);
        }
        if !(self.tau > 0.0) || self.lambda_l < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "tau {} must be positive and lambda_l {} non-negative",
                self.tau, self.lambda_l
            )));
        }
        Ok(())
    }

    /// Multiplier and penalty update after one outer iteration.
    pub fn update(&mut self, l_peak: f64, l_leak: f64) {
        self.lambda_p += self.mu_p * l_peak;
        self.lambda_l = (self.lambda_l + self.mu_l * l_leak).max(0.0);
        self.mu_p *= 1.0 + self.tau;
        self.mu_l *= 1.0 + self.tau;
        self.iteration += 1;
    }
}

/// `L_C + λp Lp + ½ μp Lp² + (max(0, λl + μl Ll)² − λl²) / (2 μl)`.
pub fn augmented_lagrangian(bce: f64, l_peak: f64, l_leak: f64, s: &ConstraintState) -> Result<f64> {
    if !(s.mu_p > 0.0 && s.mu_l > 0.0) {
        return Err(Error::NonPositivePenalty);
    }
    let leak = (s.lambda_l + s.mu_l * l_leak).max(0.0);
    Ok(bce + s.lambda_p * l_peak + 0.5 * s.mu_p * l_peak * l_peak + (leak * leak - s.lambda_l * s.lambda_l) / (2.0 * s.mu_l))
}

/// Graph form of [`augmented_lagrangian`] over scalar nodes.
pub fn augmented_lagrangian_node(g: &mut Graph, bce: Var, l_peak: Var, l_leak: Var, s: &ConstraintState) -> Result<Var> {
    if !(s.mu_p > 0.0 && s.mu_l > 0.0) {
        return Err(Error::NonPositivePenalty);
    }
    let lin = g.scale(l_peak, s.lambda_p);
    let sq = g.square(l_peak);
    let quad = g.scale(sq, 0.5 * s.mu_p);
    let peak = g.add(lin, quad)?;
    let a = g.scale(l_leak, s.mu_l);
    let a = g.add_scalar(a, s.lambda_l);
    let a = g.relu(a);
    let a = g.square(a);
    let a = g.scale(a, 1.0 / (2.0 * s.mu_l));
    let leak = g.add_scalar(a, -s.lambda_l * s.lambda_l / (2.0 * s.mu_l));
    let total = g.add(bce, peak)?;
    g.add(total, leak)
}
