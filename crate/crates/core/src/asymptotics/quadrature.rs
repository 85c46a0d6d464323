use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// `nodes` equally spaced points on `[0, tau]`; `nodes` must be odd for Simpson.
pub fn uniform_grid(tau: f64, nodes: usize) -> Result<Vec<f64>> {
    if nodes < 3 || nodes.is_multiple_of(2) {
        return Err(Error::usage(format!("grid needs an odd number >= 3 of nodes, got {nodes}")));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::usage(format!("tau must be positive, got {tau}")));
    }
    let h = tau / (nodes - 1) as f64;
    let mut g: Vec<f64> = (0..nodes).map(|i| i as f64 * h).collect();
    g[nodes - 1] = tau;
    Ok(g)
}

/// Composite Simpson weights for a uniform grid of odd length.
pub fn simpson_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let h = (grid[n - 1] - grid[0]) / (n - 1) as f64;
    (0..n)
        .map(|i| {
            let c = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect()
}

pub fn simpson(grid: &[f64], values: &[f64]) -> f64 {
    simpson_weights(grid).iter().zip(values).map(|(w, v)| w * v).sum()
}

/// Gauss-Hermite rule for a standard normal: `E g(Z) ~ sum_i w_i g(z_i)`.
///
/// Nodes and weights come from the eigen-decomposition of the Jacobi matrix
/// of the probabilists' Hermite polynomials.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.0], vec![1.0]);
    }
    let jacobi = DMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { (i.max(j) as f64).sqrt() } else { 0.0 });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n).map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    (pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1 / total).collect())
}

/// Three-point Gauss-Legendre rule on `[a, b]`, exact for quintics.
pub fn gauss_legendre3(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const X: f64 = 0.774_596_669_241_483_4;
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    r * (5.0 * f(c - r * X) + 8.0 * f(c) + 5.0 * f(c + r * X)) / 9.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        let g = uniform_grid(2.0, 11).unwrap();
        let v: Vec<f64> = g.iter().map(|x| x * x * x - x + 1.0).collect();
        assert!((simpson(&g, &v) - (4.0 - 2.0 + 2.0)).abs() < 1e-13);
    }

    #[test]
    fn hermite_moments() {
        let (z, w) = gauss_hermite(20);
        let m = |k: i32| z.iter().zip(&w).map(|(x, p)| p * x.powi(k)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-13);
        assert!(m(1).abs() < 1e-13);
        assert!((m(2) - 1.0).abs() < 1e-12);
        assert!((m(4) - 3.0).abs() < 1e-11);
        let mgf: f64 = z.iter().zip(&w).map(|(x, p)| p * (0.7 * x).exp()).sum();
        assert!((mgf - (0.245f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn legendre_quintic() {
        let v = gauss_legendre3(|x| x.powi(5) + x * x, 0.0, 1.0);
        assert!((v - (1.0 / 6.0 + 1.0 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn grid_shape() {
        assert!(uniform_grid(1.0, 4).is_err());
        let g = uniform_grid(1.0, 5).unwrap();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
