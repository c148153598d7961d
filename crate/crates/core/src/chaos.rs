//! Truncated chaos expansions on `(ℝ^d, N(0, I))`.
//!
//! A [`ChaosVector`] stores one coefficient per multi-index of the space's
//! index table, as `f = Σ_α c_α H_α` with `H_α(w) = Π He_{α_i}(w_i)`.
//! Under this basis a symmetric kernel `T` of order `k` corresponds to
//! `δ^k(T) = Σ_{|α|=k} (k!/α!) T_α H_α`, so `‖δ^k(T)‖² = k! |T|²` and
//! `E(h)` has coefficients `h^α/α!`.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::basis::{hermite_table, GaussianSpace, MultiIndex};
use crate::error::{Error, Result};
use crate::output::fmt17;

#[derive(Clone, Debug)]
pub struct ChaosVector {
    space: Arc<GaussianSpace>,
    coeffs: Vec<f64>,
}

impl PartialEq for ChaosVector {
    fn eq(&self, other: &Self) -> bool {
        self.space.same_as(&other.space) && self.coeffs == other.coeffs
    }
}

impl ChaosVector {
    pub fn zeros(space: &Arc<GaussianSpace>) -> Self {
        Self { space: Arc::clone(space), coeffs: vec![0.0; space.len()] }
    }

    /// The constant function 1 (the density of `μ` itself).
    pub fn one(space: &Arc<GaussianSpace>) -> Self {
        let mut v = Self::zeros(space);
        v.coeffs[0] = 1.0;
        v
    }

    /// The single basis element `H_α`.
    pub fn basis_element(space: &Arc<GaussianSpace>, alpha: &MultiIndex) -> Result<Self> {
        let p = space
            .position(alpha)
            .ok_or(Error::InsufficientDegree { required: alpha.degree(), actual: space.max_degree() })?;
        let mut v = Self::zeros(space);
        v.coeffs[p] = 1.0;
        Ok(v)
    }

    pub fn from_coeffs(space: &Arc<GaussianSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.len() {
            return Err(Error::CoefficientLength { expected: space.len(), got: coeffs.len() });
        }
        Ok(Self { space: Arc::clone(space), coeffs })
    }

    /// Builds a vector from sparse `(α, c_α)` terms; repeated indices add up.
    pub fn from_terms(space: &Arc<GaussianSpace>, terms: &[(MultiIndex, f64)]) -> Result<Self> {
        let mut v = Self::zeros(space);
        for (alpha, c) in terms {
            if alpha.dimension() != space.dimension() {
                return Err(Error::DimensionMismatch { expected: space.dimension(), got: alpha.dimension() });
            }
            let p = space
                .position(alpha)
                .ok_or(Error::InsufficientDegree { required: alpha.degree(), actual: space.max_degree() })?;
            v.coeffs[p] += c;
        }
        Ok(v)
    }

    /// `1 + δ¹(mean) + δ²(kernel2)`, the inverse of [`ChaosVector::kernel_view`]
    /// on degrees 0 to 2.
    pub fn from_kernels(space: &Arc<GaussianSpace>, mean: &[f64], kernel2: &DMatrix<f64>) -> Result<Self> {
        let d = space.dimension();
        if mean.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: mean.len() });
        }
        if kernel2.nrows() != d || kernel2.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: kernel2.nrows() });
        }
        if space.max_degree() < 2 {
            return Err(Error::InsufficientDegree { required: 2, actual: space.max_degree() });
        }
        let mut v = Self::one(space);
        for (i, &m) in mean.iter().enumerate() {
            v.coeffs[space.unit_position(i)] = m;
        }
        for i in 0..d {
            v.coeffs[space.pair_position(i, i)] = kernel2[(i, i)];
            for j in i + 1..d {
                v.coeffs[space.pair_position(i, j)] = 2.0 * kernel2[(i, j)];
            }
        }
        Ok(v)
    }

    pub fn space(&self) -> &Arc<GaussianSpace> {
        &self.space
    }

    pub fn dimension(&self) -> usize {
        self.space.dimension()
    }

    pub fn max_degree(&self) -> usize {
        self.space.max_degree()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> f64 {
        self.space.position(alpha).map_or(0.0, |p| self.coeffs[p])
    }

    pub fn coeff_at(&self, position: usize) -> f64 {
        self.coeffs[position]
    }

    pub fn set_coeff(&mut self, alpha: &MultiIndex, value: f64) -> Result<()> {
        let p = self
            .space
            .position(alpha)
            .ok_or(Error::InsufficientDegree { required: alpha.degree(), actual: self.space.max_degree() })?;
        self.coeffs[p] = value;
        Ok(())
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub(crate) fn ensure_compatible(&self, other: &ChaosVector) -> Result<()> {
        if self.space.same_as(&other.space) {
            Ok(())
        } else {
            Err(Error::IncompatibleBases {
                left_dim: self.space.dimension(),
                left_degree: self.space.max_degree(),
                right_dim: other.space.dimension(),
                right_degree: other.space.max_degree(),
            })
        }
    }

    /// Highest degree carrying a nonzero coefficient (0 for constants and zero).
    pub fn effective_degree(&self) -> usize {
        (0..=self.max_degree()).rev().find(|&k| self.space.degree_range(k).any(|p| self.coeffs[p] != 0.0)).unwrap_or(0)
    }

    /// `∫ f g dμ = Σ_α α! c_α(f) c_α(g)`.
    pub fn inner(&self, other: &ChaosVector) -> Result<f64> {
        self.ensure_compatible(other)?;
        Ok(self.coeffs.iter().zip(&other.coeffs).zip(self.space.factorials()).map(|((a, b), w)| w * a * b).sum())
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().zip(self.space.factorials()).map(|(c, w)| w * c * c).sum()
    }

    /// `‖f‖₂`.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `k! |f_k|²`, the squared L² norm of the degree-`k` chaos.
    pub fn degree_norm_sq(&self, k: usize) -> f64 {
        if k > self.max_degree() {
            return 0.0;
        }
        self.space.degree_range(k).map(|p| self.space.factorial_at(p) * self.coeffs[p] * self.coeffs[p]).sum()
    }

    /// `Σ_α c_α Π_i He_{α_i}(w_i)`.
    pub fn eval_at(&self, w: &[f64]) -> Result<f64> {
        if w.len() != self.dimension() {
            return Err(Error::DimensionMismatch { expected: self.dimension(), got: w.len() });
        }
        Ok(self.eval_unchecked(w))
    }

    pub(crate) fn eval_unchecked(&self, w: &[f64]) -> f64 {
        let k = self.max_degree();
        let tables: Vec<Vec<f64>> = w.iter().map(|&x| hermite_table(k, x)).collect();
        self.space
            .indices()
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, &c)| c != 0.0)
            .map(|(alpha, &c)| c * alpha.entries().iter().zip(&tables).map(|(&a, t)| t[a as usize]).product::<f64>())
            .sum()
    }

    /// Degree-1 and degree-2 kernels and `G = f₂ − f₁f₁ᵀ/2`.
    pub fn kernel_view(&self) -> Result<KernelView> {
        if self.max_degree() < 2 {
            return Err(Error::InsufficientDegree { required: 2, actual: self.max_degree() });
        }
        let d = self.dimension();
        let mean: Vec<f64> = (0..d).map(|i| self.coeffs[self.space.unit_position(i)]).collect();
        let mut kernel2 = DMatrix::zeros(d, d);
        let mut g2 = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let c = self.coeffs[self.space.pair_position(i, j)];
                let k = if i == j { c } else { c / 2.0 };
                let g = k - mean[i] * mean[j] / 2.0;
                kernel2[(i, j)] = k;
                kernel2[(j, i)] = k;
                g2[(i, j)] = g;
                g2[(j, i)] = g;
            }
        }
        Ok(KernelView { mean, kernel2, g2 })
    }

    /// Copies coefficients into another space of the same dimension; indices
    /// beyond the target degree are dropped.
    pub fn embed(&self, target: &Arc<GaussianSpace>) -> Result<ChaosVector> {
        if target.dimension() != self.dimension() {
            return Err(Error::DimensionMismatch { expected: target.dimension(), got: self.dimension() });
        }
        let mut out = ChaosVector::zeros(target);
        for (alpha, &c) in self.space.indices().iter().zip(&self.coeffs) {
            if let Some(p) = target.position(alpha) {
                out.coeffs[p] = c;
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &ChaosVector) -> Result<ChaosVector> {
        self.ensure_compatible(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &ChaosVector) -> Result<ChaosVector> {
        self.ensure_compatible(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub fn scale(&self, s: f64) -> ChaosVector {
        ChaosVector { space: Arc::clone(&self.space), coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    /// Largest absolute coefficient difference.
    pub fn max_abs_diff(&self, other: &ChaosVector) -> Result<f64> {
        self.ensure_compatible(other)?;
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    fn zip_with(&self, other: &ChaosVector, op: impl Fn(f64, f64) -> f64) -> ChaosVector {
        ChaosVector {
            space: Arc::clone(&self.space),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| op(a, b)).collect(),
        }
    }

    pub fn to_json(&self) -> Result<ChaosVectorJson> {
        Ok(ChaosVectorJson {
            dimension: self.dimension(),
            max_degree: self.max_degree(),
            coeffs: raw_numbers(&self.coeffs)?,
        })
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_json()?)?)
    }

    pub fn from_json_str(s: &str) -> Result<ChaosVector> {
        let parsed: ChaosVectorWire = serde_json::from_str(s)?;
        let space = GaussianSpace::new(parsed.dimension, parsed.max_degree)?;
        ChaosVector::from_coeffs(&space, parsed.coeffs)
    }
}

/// `inner` as a free function.
pub fn chaos_inner(f: &ChaosVector, g: &ChaosVector) -> Result<f64> {
    f.inner(g)
}

pub(crate) fn raw_numbers(values: &[f64]) -> Result<Vec<Box<RawValue>>> {
    values
        .iter()
        .map(|&x| {
            if !x.is_finite() {
                return Err(Error::NonFinite(x));
            }
            Ok(RawValue::from_string(fmt17(x))?)
        })
        .collect()
}

/// Serialized form `{dimension, max_degree, coeffs}`; coefficients are in
/// index-table order and printed with 17 significant digits.
#[derive(Debug, Serialize)]
pub struct ChaosVectorJson {
    pub dimension: usize,
    pub max_degree: usize,
    pub coeffs: Vec<Box<RawValue>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChaosVectorWire {
    dimension: usize,
    max_degree: usize,
    coeffs: Vec<f64>,
}

/// `f₁`, `f₂` and `G = f₂ − f₁f₁ᵀ/2` of a chaos vector.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelView {
    pub mean: Vec<f64>,
    pub kernel2: DMatrix<f64>,
    pub g2: DMatrix<f64>,
}

impl KernelView {
    /// `M = 2f₂ − f₁f₁ᵀ`, the excess covariance over the identity.
    pub fn excess_covariance(&self) -> DMatrix<f64> {
        &self.g2 * 2.0
    }
}
