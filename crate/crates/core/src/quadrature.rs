//! Gauss–Radau quadrature on `[0, 1]` with the fixed node at `t = 1`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("Gauss-Radau rule needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * f(t)).sum()
    }
}

/// `m`-point Gauss–Radau rule for weight 1 on `[0, 1]`, nodes ascending, last node 1.
///
/// The interior nodes are the Gauss nodes for the weight `1 - t`, found by
/// Golub–Welsch on the Jacobi(1, 0) recurrence. Exact for degree `<= 2m - 2`.
pub fn gauss_radau(m: usize) -> Result<QuadratureRule, QuadratureError> {
    if m < 2 {
        return Err(QuadratureError::TooFewNodes(m));
    }
    let k = m - 1;
    let (alpha, beta) = (1.0_f64, 0.0_f64);
    let mut jacobi = DMatrix::<f64>::zeros(k, k);
    for n in 0..k {
        let nf = n as f64;
        let s = 2.0 * nf + alpha + beta;
        jacobi[(n, n)] = (beta * beta - alpha * alpha) / (s * (s + 2.0));
        if n + 1 < k {
            let n1 = nf + 1.0;
            let s1 = 2.0 * n1 + alpha + beta;
            let b = 4.0 * n1 * (n1 + alpha) * (n1 + beta) * (n1 + alpha + beta)
                / (s1 * s1 * (s1 + 1.0) * (s1 - 1.0));
            jacobi[(n, n + 1)] = b.sqrt();
            jacobi[(n + 1, n)] = b.sqrt();
        }
    }
    let eig = SymmetricEigen::new(jacobi);
    // Integral of (1 - x) over [-1, 1].
    let mu0 = 2.0;
    let mut interior: Vec<(f64, f64)> = (0..k)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            let t = 0.5 * (x + 1.0);
            let omega = mu0 * v0 * v0 / 4.0;
            (t, omega / (1.0 - t))
        })
        .collect();
    interior.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut nodes: Vec<f64> = interior.iter().map(|p| p.0).collect();
    let mut weights: Vec<f64> = interior.iter().map(|p| p.1).collect();
    nodes.push(1.0);
    weights.push(1.0 / (m * m) as f64);
    Ok(QuadratureRule { nodes, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_point_rule() {
        let r = gauss_radau(2).unwrap();
        assert_abs_diff_eq!(r.nodes[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(r.nodes[1], 1.0);
        assert_abs_diff_eq!(r.weights[0], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights[1], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn rejects_single_node() {
        assert_eq!(gauss_radau(1), Err(QuadratureError::TooFewNodes(1)));
        assert_eq!(gauss_radau(0), Err(QuadratureError::TooFewNodes(0)));
    }

    #[test]
    fn exactness_and_weights() {
        for m in 2..=20 {
            let r = gauss_radau(m).unwrap();
            assert_eq!(r.len(), m);
            assert_eq!(*r.nodes.last().unwrap(), 1.0);
            assert!(r.weights.iter().all(|&w| w > 0.0));
            assert!(r.nodes.iter().all(|&t| t > 0.0 && t <= 1.0));
            assert!(r.nodes.windows(2).all(|p| p[0] < p[1]));
            for deg in 0..=(2 * m - 2) {
                let q = r.integrate(|t| t.powi(deg as i32));
                assert_abs_diff_eq!(q, 1.0 / (deg as f64 + 1.0), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn not_exact_one_degree_higher() {
        let r = gauss_radau(3).unwrap();
        let q = r.integrate(|t| t.powi(5));
        assert!((q - 1.0 / 6.0).abs() > 1e-6);
    }
}
