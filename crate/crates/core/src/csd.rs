//! Conjugate subgradient directions: the min-norm point of the segment
//! between the previous direction and the current residual.

use crate::error::{check_dim, Result};
use crate::vector::{dot, norm_sq, sub};

/// Below this squared segment length the segment is treated as a point.
pub const DEGENERATE_SEGMENT: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionState {
    pub g: Vec<f64>,
    pub d_prev: Option<Vec<f64>>,
    pub d: Vec<f64>,
    /// Weight on `d_prev`. Set to 1 as a sentinel on a scenario's first
    /// iteration, where `d = g` and no combination takes place.
    pub gamma: f64,
}

/// Residual `x_s − x̄`.
pub fn residual(x_s: &[f64], xbar: &[f64]) -> Result<Vec<f64>> {
    check_dim("residual", xbar.len(), x_s.len())?;
    Ok(sub(x_s, xbar))
}

/// Minimizer over `[0, 1]` of `½‖γ d_prev + (1 − γ) g‖²`.
pub fn solve_gamma(d_prev: &[f64], g: &[f64]) -> f64 {
    let diff = sub(g, d_prev);
    let denom = norm_sq(&diff);
    if denom < DEGENERATE_SEGMENT {
        return 0.0;
    }
    (dot(g, &diff) / denom).clamp(0.0, 1.0)
}

/// Min-norm point of `{γ d_prev + (1 − γ) g : γ ∈ [0, 1]}`, or `g` itself
/// when there is no previous direction.
pub fn nr_direction(d_prev: Option<&[f64]>, g: &[f64]) -> Result<DirectionState> {
    let Some(prev) = d_prev else {
        return Ok(DirectionState {
            g: g.to_vec(),
            d_prev: None,
            d: g.to_vec(),
            gamma: 1.0,
        });
    };
    check_dim("previous direction", g.len(), prev.len())?;
    let gamma = solve_gamma(prev, g);
    let d = prev
        .iter()
        .zip(g)
        .map(|(p, gi)| gamma * p + (1.0 - gamma) * gi)
        .collect();
    Ok(DirectionState {
        g: g.to_vec(),
        d_prev: Some(prev.to_vec()),
        d,
        gamma,
    })
}
