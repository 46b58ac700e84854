//! The concave `l_p` penalty that pushes relaxed placement blocks to vertices.
//!
//! For a block `y` on the simplex of size `m`,
//! `sum_i (y_i + eps)^p` is minimized exactly at the vertices, where it
//! equals `c(m, p, eps) = (1 + eps)^p + (m - 1) eps^p`. The penalty of a
//! placement is the sum of `sum_i (y_i + eps)^p - c` over all blocks.

use crate::model::FractionalPlacement;

/// Penalty exponent, smoothing and weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyParams {
    pub p: f64,
    pub epsilon: f64,
    pub sigma: f64,
}

impl PenaltyParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(format!("p must lie in (0, 1), got {}", self.p));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(format!("epsilon must be >= 0, got {}", self.epsilon));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(format!("sigma must be >= 0, got {}", self.sigma));
        }
        Ok(())
    }
}

/// Minimum of `sum_i (y_i + eps)^p` over the simplex of dimension `m`.
pub fn vertex_value(m: usize, p: f64, eps: f64) -> f64 {
    (1.0 + eps).powf(p) + (m as f64 - 1.0) * eps.powf(p)
}

/// `sum_i (y_i + eps)^p - c(m, p, eps)` for a single block.
pub fn block_penalty(block: &[f64], p: f64, eps: f64) -> f64 {
    let s: f64 = block.iter().map(|&y| (y.max(0.0) + eps).powf(p)).sum();
    s - vertex_value(block.len(), p, eps)
}

/// `d/dy (y + eps)^p`. Infinite at `y + eps = 0`.
pub fn derivative(y: f64, p: f64, eps: f64) -> f64 {
    p * (y.max(0.0) + eps).powf(p - 1.0)
}

/// `P_eps(x)` summed over every `(k, s)` block.
pub fn penalty_value(x: &FractionalPlacement, p: f64, eps: f64) -> f64 {
    x.values.iter().flatten().map(|b| block_penalty(b, p, eps)).sum()
}

/// Gradient of [`penalty_value`], shaped like `x.values`.
pub fn penalty_gradient(x: &FractionalPlacement, p: f64, eps: f64) -> Vec<Vec<Vec<f64>>> {
    x.values
        .iter()
        .map(|blocks| {
            blocks
                .iter()
                .map(|b| b.iter().map(|&y| derivative(y, p, eps)).collect())
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_value_matches_hand_evaluation() {
        let c = vertex_value(10, 0.5, 0.001);
        let expected = 1.001f64.sqrt() + 9.0 * 0.001f64.sqrt();
        assert!((c - expected).abs() < 1e-15);
        assert!((c - 1.285105).abs() < 1e-6);
    }

    #[test]
    fn binary_blocks_have_zero_penalty() {
        let x = FractionalPlacement {
            values: vec![vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0]]],
            aggregates: None,
        };
        assert_eq!(penalty_value(&x, 0.5, 0.0), 0.0);
        assert!(penalty_value(&x, 0.5, 0.01).abs() < 1e-15);
    }

    #[test]
    fn half_half_block() {
        let v = block_penalty(&[0.5, 0.5], 0.5, 0.0);
        assert!((v - (2.0 * 0.5f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((v - 0.414214).abs() < 1e-6);
    }

    #[test]
    fn gradient_at_zero() {
        let g = derivative(0.0, 0.5, 0.001);
        assert!((2.0 * g - 31.6227766).abs() < 1e-6);
    }
}
