//! Gauss–Hermite quadrature for the standard Gaussian weight and its tensor
//! products.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

/// Nodes and weights integrating against `N(0, 1)`; weights sum to 1.
#[derive(Clone, Debug)]
pub struct GaussHermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermiteRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Orthonormal Hermite values `ψ_0..ψ_{n}` at `x`, `ψ_k = He_k / √k!`.
fn orthonormal_hermite(n: usize, x: f64) -> Vec<f64> {
    let mut psi = Vec::with_capacity(n + 1);
    psi.push(1.0);
    if n >= 1 {
        psi.push(x);
    }
    for k in 1..n {
        let next = (x * psi[k] - (k as f64).sqrt() * psi[k - 1]) / ((k + 1) as f64).sqrt();
        psi.push(next);
    }
    psi
}

/// `n`-point probabilists' Gauss–Hermite rule, exact for polynomials of
/// degree `≤ 2n − 1`.
///
/// Golub–Welsch eigenvalues seed a Newton polish on `ψ_n`; weights come from
/// the Christoffel function `1 / Σ_{k<n} ψ_k(x)²`.
pub fn gauss_hermite(n: usize) -> GaussHermiteRule {
    assert!(n >= 1, "quadrature needs at least one node");
    if n == 1 {
        return GaussHermiteRule { nodes: vec![0.0], weights: vec![1.0] };
    }
    let mut jacobi = DMatrix::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let psi = orthonormal_hermite(n, *x);
            let derivative = (n as f64).sqrt() * psi[n - 1];
            if derivative == 0.0 {
                break;
            }
            let step = psi[n] / derivative;
            *x -= step;
            if step.abs() < 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
    }
    // symmetric rule: average mirrored nodes
    for i in 0..n / 2 {
        let m = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -m;
        nodes[n - 1 - i] = m;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let mut weights: Vec<f64> =
        nodes.iter().map(|&x| 1.0 / orthonormal_hermite(n - 1, x).iter().map(|p| p * p).sum::<f64>()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    GaussHermiteRule { nodes, weights }
}

const CHUNK: usize = 2048;

/// `Σ_{i<len} term(i)` with a reduction order that depends only on `len`.
pub(crate) fn chunked_sum(len: usize, term: impl Fn(usize) -> f64 + Sync) -> f64 {
    let chunks = len.div_ceil(CHUNK);
    let partial: Vec<f64> =
        (0..chunks).into_par_iter().map(|c| (c * CHUNK..((c + 1) * CHUNK).min(len)).map(&term).sum()).collect();
    partial.iter().sum()
}

/// `∫ f dμ_d` by the tensor product of a one-dimensional rule.
pub fn tensor_integrate(d: usize, rule: &GaussHermiteRule, f: impl Fn(&[f64]) -> f64 + Sync) -> f64 {
    let n = rule.len();
    let total = n.pow(d as u32);
    chunked_sum(total, |mut linear| {
        let mut point = [0.0f64; 8];
        let mut point_vec;
        let w: &mut [f64] = if d <= 8 {
            &mut point[..d]
        } else {
            point_vec = vec![0.0; d];
            &mut point_vec
        };
        let mut weight = 1.0;
        for x in w.iter_mut() {
            let i = linear % n;
            linear /= n;
            *x = rule.nodes[i];
            weight *= rule.weights[i];
        }
        weight * f(w)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_rules_match_known_values() {
        let r = gauss_hermite(2);
        assert!((r.nodes[1] - 1.0).abs() < 1e-15);
        assert!((r.weights[0] - 0.5).abs() < 1e-15);
        let r = gauss_hermite(3);
        assert!((r.nodes[2] - 3f64.sqrt()).abs() < 1e-14);
        assert!((r.weights[1] - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_moments_are_exact() {
        // E[x^{2m}] = (2m−1)!!
        for n in [5, 20, 60, 150] {
            let r = gauss_hermite(n);
            let mut dfact = 1.0;
            for m in 0..n.min(12) {
                if m > 0 {
                    dfact *= (2 * m - 1) as f64;
                }
                let q: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(2 * m as i32)).sum();
                assert!((q / dfact - 1.0).abs() < 1e-11, "n={n} m={m} q={q}");
            }
        }
    }

    #[test]
    fn tensor_rule_integrates_product_moments() {
        let r = gauss_hermite(6);
        let q = tensor_integrate(3, &r, |w| w[0] * w[0] * w[1].powi(4) * (1.0 + w[2]));
        assert!((q - 3.0).abs() < 1e-12);
    }
}
