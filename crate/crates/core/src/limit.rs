//! The limiting density `ξ = Σ_k δ^{2k}(G^{⊗k})/k!`, i.e. the density of
//! `N(0, I + 2G)` with respect to `N(0, I)`.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;
use serde_json::value::RawValue;

use crate::basis::{table_size, GaussianSpace};
use crate::chaos::{raw_numbers, ChaosVector, ChaosVectorJson};
use crate::error::{Error, Result};
use crate::wick::{gamma, wick_mul, wick_power, TruncationPolicy};

/// Symmetry tolerance for user-supplied `G`.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues of `G` above `-PSD_TOL` count as nonnegative.
pub const PSD_TOL: f64 = 1e-10;
/// Cramér's constant: `|He_n(x)| ≤ κ √(n!) e^{x²/4}`.
pub const CRAMER_CONSTANT: f64 = 1.086_435;

#[derive(Clone, Debug)]
pub struct LimitDensity {
    g2: DMatrix<f64>,
    series: ChaosVector,
    eigenvalues: Vec<f64>,
}

pub(crate) fn check_symmetric(g: &DMatrix<f64>) -> Result<()> {
    if !g.is_square() {
        return Err(Error::InvalidParameter(format!("G must be square, got {}x{}", g.nrows(), g.ncols())));
    }
    for i in 0..g.nrows() {
        for j in i + 1..g.ncols() {
            let gap = (g[(i, j)] - g[(j, i)]).abs();
            if !(gap <= SYMMETRY_TOL) {
                return Err(Error::NotSymmetric { row: i, col: j, gap });
            }
        }
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(g: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(g.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Checks symmetry, positivity and `ρ(2G) < 1`; returns the spectrum.
pub fn check_admissible(g: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(g)?;
    let ev = symmetric_eigenvalues(g);
    let min = ev.first().copied().unwrap_or(0.0);
    if min < -PSD_TOL {
        return Err(Error::AssumptionViolation {
            assumption: "A2 (2f2 - f1f1^T positive semidefinite)",
            detail: format!("G has eigenvalue {min}"),
        });
    }
    let radius = 2.0 * ev.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(radius < 1.0) {
        return Err(Error::AssumptionViolation {
            assumption: "L2 admissibility of the limit (spectral radius of 2G < 1)",
            detail: format!("spectral radius of 2G is {radius}"),
        });
    }
    Ok(ev)
}

/// `δ²(G)`: coefficient `G_ii` at `2e_i` and `2G_ij` at `e_i + e_j`.
pub fn second_chaos(g: &DMatrix<f64>, space: &Arc<GaussianSpace>) -> Result<ChaosVector> {
    let d = space.dimension();
    if g.nrows() != d {
        return Err(Error::DimensionMismatch { expected: d, got: g.nrows() });
    }
    if space.max_degree() < 2 {
        return Err(Error::InsufficientDegree { required: 2, actual: space.max_degree() });
    }
    let mut q = ChaosVector::zeros(space);
    let coeffs = q.coeffs_mut();
    for i in 0..d {
        coeffs[space.pair_position(i, i)] = g[(i, i)];
        for j in i + 1..d {
            coeffs[space.pair_position(i, j)] = 2.0 * g[(i, j)];
        }
    }
    Ok(q)
}

/// Truncated Wick exponential of `δ²(G)` built by iterated Wick products.
pub fn xi_series(g: &DMatrix<f64>, space: &Arc<GaussianSpace>) -> Result<LimitDensity> {
    if g.nrows() != space.dimension() {
        return Err(Error::DimensionMismatch { expected: space.dimension(), got: g.nrows() });
    }
    let eigenvalues = check_admissible(g)?;
    let mut series = ChaosVector::one(space);
    if space.max_degree() >= 2 {
        let q = second_chaos(g, space)?;
        let mut term = ChaosVector::one(space);
        for k in 1..=space.max_degree() / 2 {
            term = wick_mul(&term, &q)?.scale(1.0 / k as f64);
            series = series.add(&term)?;
        }
    }
    Ok(LimitDensity { g2: g.clone(), series, eigenvalues })
}

/// Generalized binomial weights `binom(k + d/2 − 1, k)` for `k = 0, 1, ...`.
fn half_binomials(d: usize) -> impl Iterator<Item = f64> {
    let half = d as f64 / 2.0;
    (0..).scan(1.0, move |w, k: usize| {
        let out = *w;
        *w *= (k as f64 + half) / (k as f64 + 1.0);
        Some(out)
    })
}

impl LimitDensity {
    pub fn g2(&self) -> &DMatrix<f64> {
        &self.g2
    }

    pub fn series(&self) -> &ChaosVector {
        &self.series
    }

    pub fn into_series(self) -> ChaosVector {
        self.series
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `ρ(2G) = 2 max |λ_i|`.
    pub fn spectral_radius_2g(&self) -> f64 {
        2.0 * self.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    fn dropped_orders(&self) -> usize {
        self.series.max_degree() / 2 + 1
    }

    /// Bound on `‖ξ − ξ_K‖₂²` from `Π(1 − 4λ_i²x)^{−1/2} ≤ (1 − ρ²x)^{−d/2}`
    /// coefficientwise.
    pub fn l2_tail_bound_sq(&self) -> f64 {
        let rho2 = self.spectral_radius_2g().powi(2);
        if rho2 == 0.0 {
            return 0.0;
        }
        let first = self.dropped_orders();
        let d = self.series.dimension();
        let mut total = 0.0;
        let mut power = rho2.powi(first as i32);
        for w in half_binomials(d).skip(first).take(100_000) {
            let term = w * power;
            total += term;
            if term <= 1e-18 * total {
                break;
            }
            power *= rho2;
        }
        total
    }

    /// Bound on `|ξ(w) − ξ_K(w)|` from Cramér's inequality and the degree-wise
    /// L² bounds.
    pub fn pointwise_tail_bound(&self, w: &[f64]) -> f64 {
        let rho = self.spectral_radius_2g();
        if rho == 0.0 {
            return 0.0;
        }
        let d = self.series.dimension();
        let first = self.dropped_orders();
        let w2: f64 = w.iter().map(|x| x * x).sum();
        let mut total = 0.0;
        let mut power = rho.powi(first as i32);
        for (k, hb) in half_binomials(d).enumerate().skip(first).take(100_000) {
            // number of multi-indices of degree 2k
            let count = table_size(d - 1, 2 * k) as f64;
            let term = (count * hb).sqrt() * power;
            total += term;
            if term <= 1e-18 * total {
                break;
            }
            power *= rho;
        }
        CRAMER_CONSTANT.powi(d as i32) * (w2 / 4.0).exp() * total
    }

    pub fn closed_form(&self, w: &[f64]) -> Result<f64> {
        xi_closed_form(&self.g2, w)
    }

    pub fn to_json(&self) -> Result<LimitDensityJson> {
        let rows = (0..self.g2.nrows())
            .map(|i| raw_numbers(&self.g2.row(i).iter().copied().collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?;
        Ok(LimitDensityJson { g2: rows, series: self.series.to_json()? })
    }
}

/// `{g2, series}` with numbers at 17 significant digits.
#[derive(Debug, Serialize)]
pub struct LimitDensityJson {
    pub g2: Vec<Vec<Box<RawValue>>>,
    pub series: ChaosVectorJson,
}

/// `det(I+2G)^{−1/2} exp{−½ wᵀ((I+2G)^{−1} − I) w}`.
pub fn xi_closed_form(g: &DMatrix<f64>, w: &[f64]) -> Result<f64> {
    check_symmetric(g)?;
    let d = g.nrows();
    if w.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: w.len() });
    }
    let cov = DMatrix::identity(d, d) + g * 2.0;
    let chol =
        cov.clone().cholesky().ok_or_else(|| Error::InvalidParameter("I + 2G is not positive definite".into()))?;
    let det: f64 = chol.l().diagonal().iter().map(|x| x * x).product();
    let wv = nalgebra::DVector::from_column_slice(w);
    let solved = chol.solve(&wv);
    let quad = wv.dot(&solved) - wv.dot(&wv);
    Ok(det.powf(-0.5) * (-0.5 * quad).exp())
}

/// `exp{−hᵀGh − |h|²/2}`.
pub fn char_functional(g: &DMatrix<f64>, h: &[f64]) -> Result<f64> {
    let d = g.nrows();
    if h.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: h.len() });
    }
    let hv = nalgebra::DVector::from_column_slice(h);
    let quad = hv.dot(&(g * &hv));
    Ok((-quad - 0.5 * hv.dot(&hv)).exp())
}

/// The three numbers compared for `‖ξ‖₂²`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct XiNorms {
    /// `Σ α! c_α²` over the truncated series.
    pub series_value: f64,
    /// `Π_i (1 − 4λ_i²)^{−1/2}`.
    pub determinant_value: f64,
    /// `(1 − 4|G|_F²)^{−1/2}`, undefined when `|G|_F² ≥ 1/4`.
    pub frobenius_scalar_value: Option<f64>,
    /// Bound on `determinant_value − series_value`.
    pub tail_bound: f64,
}

pub fn xi_l2_norm(g: &DMatrix<f64>, space: &Arc<GaussianSpace>) -> Result<XiNorms> {
    let xi = xi_series(g, space)?;
    let determinant_value = xi.eigenvalues.iter().map(|l| (1.0 - 4.0 * l * l).powf(-0.5)).product();
    let frob_sq = g.iter().map(|x| x * x).sum::<f64>();
    let frobenius_scalar_value = (4.0 * frob_sq < 1.0).then(|| (1.0 - 4.0 * frob_sq).powf(-0.5));
    Ok(XiNorms {
        series_value: xi.series.norm_sq(),
        determinant_value,
        frobenius_scalar_value,
        tail_bound: xi.l2_tail_bound_sq(),
    })
}

/// `max_α |c_α((Γ(n^{−1/2})ξ)^{◇n}) − c_α(ξ)|`.
pub fn self_similarity_check(g: &DMatrix<f64>, n: usize, space: &Arc<GaussianSpace>) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let xi = xi_series(g, space)?;
    let scaled = gamma(1.0 / (n as f64).sqrt(), &xi.series)?;
    let power = wick_power(&scaled, n, TruncationPolicy::full(space))?;
    power.max_abs_diff(&xi.series)
}
