//! Wick products, the second-quantization operator `Γ(λ)`, stochastic
//! exponentials, the S-transform and density centering.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::basis::{factorial, GaussianSpace};
use crate::chaos::ChaosVector;
use crate::error::{Error, Result};
use crate::rng;

/// How a product is cut back to the basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TruncationPolicy {
    pub cap_degree: usize,
    pub report_discarded: bool,
}

impl TruncationPolicy {
    /// Keep every degree the space can hold; no mass report.
    pub fn full(space: &GaussianSpace) -> Self {
        Self { cap_degree: space.max_degree(), report_discarded: false }
    }

    pub fn reporting(space: &GaussianSpace) -> Self {
        Self { cap_degree: space.max_degree(), report_discarded: true }
    }

    pub fn capped(cap_degree: usize, report_discarded: bool) -> Self {
        Self { cap_degree, report_discarded }
    }

    fn validate(&self, space: &GaussianSpace) -> Result<()> {
        if self.cap_degree > space.max_degree() {
            return Err(Error::InvalidParameter(format!(
                "cap degree {} exceeds the space's max degree {}",
                self.cap_degree,
                space.max_degree()
            )));
        }
        Ok(())
    }
}

/// A Wick product together with the L² mass of the coefficients it dropped
/// (only computed when the policy asks for it).
#[derive(Clone, Debug)]
pub struct WickOutcome {
    pub product: ChaosVector,
    pub discarded_mass: Option<f64>,
}

/// `c_γ(f ◇ g) = Σ_{α+β=γ} c_α(f) c_β(g)` for `|γ| ≤ cap`.
pub fn wick_product(f: &ChaosVector, g: &ChaosVector, policy: TruncationPolicy) -> Result<WickOutcome> {
    f.ensure_compatible(g)?;
    let space = f.space();
    policy.validate(space)?;
    let kept = space.len_up_to(policy.cap_degree);
    let table = space.pair_table();
    let (fc, gc) = (f.coeffs(), g.coeffs());
    let mut coeffs: Vec<f64> = (0..kept)
        .into_par_iter()
        .map(|p| {
            table.pairs[table.offsets[p]..table.offsets[p + 1]]
                .iter()
                .map(|&(a, b)| fc[a as usize] * gc[b as usize])
                .sum()
        })
        .collect();
    coeffs.resize(space.len(), 0.0);
    let discarded_mass = policy.report_discarded.then(|| discarded_mass(f, g, policy.cap_degree));
    Ok(WickOutcome { product: ChaosVector::from_coeffs(space, coeffs)?, discarded_mass })
}

/// Wick product keeping every degree of the space.
pub fn wick_mul(f: &ChaosVector, g: &ChaosVector) -> Result<ChaosVector> {
    Ok(wick_product(f, g, TruncationPolicy::full(f.space()))?.product)
}

/// `Σ γ! c_γ²` over the output indices with `|γ| > cap`, including the ones
/// outside the index table.
fn discarded_mass(f: &ChaosVector, g: &ChaosVector, cap: usize) -> f64 {
    let space = f.space();
    let nonzero = |v: &ChaosVector| -> Vec<usize> { (0..space.len()).filter(|&p| v.coeff_at(p) != 0.0).collect() };
    let (fa, gb) = (nonzero(f), nonzero(g));
    let mut dropped: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for &a in &fa {
        let alpha = space.index(a);
        for &b in &gb {
            let beta = space.index(b);
            if alpha.degree() + beta.degree() <= cap {
                continue;
            }
            let gamma = alpha.add(beta);
            *dropped.entry(gamma.entries().to_vec()).or_insert(0.0) += f.coeff_at(a) * g.coeff_at(b);
        }
    }
    dropped
        .iter()
        .map(|(gamma, c)| {
            let w: f64 = gamma.iter().map(|&x| factorial(x as usize)).product();
            w * c * c
        })
        .sum()
}

/// `f^{◇n}` by binary exponentiation with every step capped at `policy.cap_degree`.
pub fn wick_power(f: &ChaosVector, n: usize, policy: TruncationPolicy) -> Result<ChaosVector> {
    if n == 0 {
        return Ok(ChaosVector::one(f.space()));
    }
    let step = TruncationPolicy { report_discarded: false, ..policy };
    let mut base = f.clone();
    let mut acc: Option<ChaosVector> = None;
    let mut e = n;
    loop {
        if e & 1 == 1 {
            acc = Some(match acc {
                None => base.clone(),
                Some(a) => wick_product(&a, &base, step)?.product,
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        base = wick_product(&base, &base, step)?.product;
    }
    let mut out = acc.expect("n >= 1");
    // the first factor is copied uncapped; apply the cap to it as well
    let kept = f.space().len_up_to(policy.cap_degree);
    out.coeffs_mut()[kept..].iter_mut().for_each(|c| *c = 0.0);
    Ok(out)
}

/// `Γ(λ)`: multiplies the degree-`k` chaos by `λ^k`.
pub fn gamma(lambda: f64, f: &ChaosVector) -> Result<ChaosVector> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidLambda(lambda));
    }
    let space = f.space();
    let mut out = f.clone();
    let mut scale = 1.0;
    for k in 0..=space.max_degree() {
        if k > 0 {
            scale *= lambda;
        }
        for p in space.degree_range(k) {
            out.coeffs_mut()[p] *= scale;
        }
    }
    Ok(out)
}

/// A Monte-Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl McEstimate {
    /// Mean and standard error of `values`. The mean is accumulated as
    /// offsets from the first value so that constant inputs come back exactly.
    pub fn from_values(values: &[f64]) -> Self {
        let m = values.len();
        if m == 0 {
            return Self { mean: f64::NAN, std_error: f64::NAN, samples: 0 };
        }
        let pivot = values[0];
        let shift: f64 = values.iter().map(|v| v - pivot).sum::<f64>() / m as f64;
        let mean = pivot + shift;
        let std_error = if m > 1 {
            let ss: f64 = values.iter().map(|v| (v - pivot - shift).powi(2)).sum();
            (ss / (m - 1) as f64 / m as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std_error, samples: m }
    }
}

/// Monte-Carlo Mehler formula
/// `P_t f(w) = E[f(e^{−t} w + √(1 − e^{−2t}) W̃)]`, `W̃ ~ N(0, I)`.
pub fn ou_apply(t: f64, f: &ChaosVector, w: &[f64], samples: usize, seed: u64) -> Result<McEstimate> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("time must be nonnegative, got {t}")));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("sample count must be positive".into()));
    }
    let d = f.dimension();
    if w.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: w.len() });
    }
    let decay = (-t).exp();
    let spread = (1.0 - decay * decay).max(0.0).sqrt();
    let values: Vec<f64> = rng::blocks(samples)
        .collect::<Vec<_>>()
        .into_par_iter()
        .flat_map_iter(|(b, _, len)| {
            let mut r = rng::stream(seed, "ou-mehler", b as u64);
            let mut point = vec![0.0; d];
            (0..len)
                .map(|_| {
                    for (x, &wi) in point.iter_mut().zip(w) {
                        let z: f64 = StandardNormal.sample(&mut r);
                        *x = decay * wi + spread * z;
                    }
                    f.eval_unchecked(&point)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(McEstimate::from_values(&values))
}

/// `E(h)` truncated at the space's degree: `c_α = h^α / α!`.
pub fn stochastic_exponential(h: &[f64], space: &Arc<GaussianSpace>) -> Result<ChaosVector> {
    if h.len() != space.dimension() {
        return Err(Error::DimensionMismatch { expected: space.dimension(), got: h.len() });
    }
    let mut out = ChaosVector::zeros(space);
    exponential_into(h, space, out.coeffs_mut());
    Ok(out)
}

/// Writes `h^α/α!` into `buf` by the recursion `c_α = c_{α−e_i} h_i / α_i`.
pub(crate) fn exponential_into(h: &[f64], space: &GaussianSpace, buf: &mut [f64]) {
    buf[0] = 1.0;
    for (p, &(i, parent)) in space.parents().iter().enumerate().skip(1) {
        let i = i as usize;
        buf[p] = buf[parent as usize] * h[i] / space.index(p).entries()[i] as f64;
    }
}

/// `∫ f E(h) dμ = Σ_α c_α h^α`.
pub fn s_transform(f: &ChaosVector, h: &[f64]) -> Result<f64> {
    let space = f.space();
    if h.len() != space.dimension() {
        return Err(Error::DimensionMismatch { expected: space.dimension(), got: h.len() });
    }
    let mut monomials = vec![0.0; space.len()];
    monomials[0] = 1.0;
    for (p, &(i, parent)) in space.parents().iter().enumerate().skip(1) {
        monomials[p] = monomials[parent as usize] * h[i as usize];
    }
    Ok(f.coeffs().iter().zip(&monomials).map(|(c, m)| c * m).sum())
}

/// Tolerance on the degree-0 coefficient of a density.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Density of `X − E[X]`: `f ◇ E(−f₁)`.
pub fn center_density(f: &ChaosVector, policy: TruncationPolicy) -> Result<ChaosVector> {
    let c0 = f.coeff_at(0);
    if (c0 - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized(c0));
    }
    let space = f.space();
    let shift: Vec<f64> = if space.max_degree() == 0 {
        vec![0.0; space.dimension()]
    } else {
        (0..space.dimension()).map(|i| -f.coeff_at(space.unit_position(i))).collect()
    };
    if shift.iter().all(|&x| x == 0.0) {
        let mut out = f.clone();
        let kept = space.len_up_to(policy.cap_degree);
        out.coeffs_mut()[kept..].iter_mut().for_each(|c| *c = 0.0);
        return Ok(out);
    }
    let e = stochastic_exponential(&shift, space)?;
    Ok(wick_product(f, &e, policy)?.product)
}
