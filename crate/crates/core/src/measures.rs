//! Example densities: shift mixtures, Gaussian covariance changes and the
//! rank-one quadratic, plus a rejection sampler against `μ`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::audit::{check_a1, GridSpec};
use crate::basis::GaussianSpace;
use crate::chaos::{raw_numbers, ChaosVector};
use crate::error::{Error, Result};
use crate::limit::{xi_closed_form, xi_series};
use crate::rng;
use crate::wick::{exponential_into, NORMALIZATION_TOL};

/// Tolerance on `Σ p_j = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Envelope factor over the grid maximum in [`sample`].
pub const ENVELOPE_FACTOR: f64 = 1.05;
/// Largest dimension [`sample`] accepts.
pub const SAMPLER_MAX_DIM: usize = 4;

/// A finitely supported measure `ν = Σ p_j δ_{h_j}` on the shift space.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedShifts {
    weights: Vec<f64>,
    shifts: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightedShiftsWire {
    weights: Vec<f64>,
    shifts: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct WeightedShiftsJson {
    weights: Vec<Box<RawValue>>,
    shifts: Vec<Vec<Box<RawValue>>>,
}

impl WeightedShifts {
    pub fn new(weights: Vec<f64>, shifts: Vec<Vec<f64>>) -> Result<Self> {
        let mut problems = Vec::new();
        if weights.is_empty() {
            problems.push("no atoms".to_string());
        }
        if weights.len() != shifts.len() {
            problems.push(format!("{} weights but {} shifts", weights.len(), shifts.len()));
        }
        if let Some((j, p)) = weights.iter().enumerate().find(|(_, p)| !(**p >= 0.0 && p.is_finite())) {
            problems.push(format!("weight {j} is {p}"));
        }
        let total: f64 = weights.iter().sum();
        if !((total - 1.0).abs() <= WEIGHT_SUM_TOL) {
            problems.push(format!("weights sum to {total}"));
        }
        if let Some(first) = shifts.first() {
            let d = first.len();
            if d == 0 {
                problems.push("shifts have dimension 0".into());
            }
            if let Some(j) = shifts.iter().position(|h| h.len() != d) {
                problems.push(format!("shift {j} has dimension {}, expected {d}", shifts[j].len()));
            }
            if let Some(j) = shifts.iter().position(|h| h.iter().any(|x| !x.is_finite())) {
                problems.push(format!("shift {j} has a non-finite component"));
            }
        }
        if problems.is_empty() {
            Ok(Self { weights, shifts })
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Uniform weights over `shifts`.
    pub fn uniform(shifts: Vec<Vec<f64>>) -> Result<Self> {
        let m = shifts.len();
        Self::new(vec![1.0 / m as f64; m], shifts)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn shifts(&self) -> &[Vec<f64>] {
        &self.shifts
    }

    pub fn dimension(&self) -> usize {
        self.shifts[0].len()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `Σ p_j e^{|h_j|²/2}`.
    pub fn exp_integrability(&self) -> f64 {
        self.weights.iter().zip(&self.shifts).map(|(p, h)| p * (0.5 * h.iter().map(|x| x * x).sum::<f64>()).exp()).sum()
    }

    /// `Σ p_j h_j`.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dimension()];
        for (p, h) in self.weights.iter().zip(&self.shifts) {
            for (mi, hi) in m.iter_mut().zip(h) {
                *mi += p * hi;
            }
        }
        m
    }

    /// `Cov_ν(Y) = Σ p_j h_j h_jᵀ − m mᵀ`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.dimension();
        let m = self.mean();
        let mut c = DMatrix::zeros(d, d);
        for (p, h) in self.weights.iter().zip(&self.shifts) {
            for i in 0..d {
                for j in 0..d {
                    c[(i, j)] += p * (h[i] - m[i]) * (h[j] - m[j]);
                }
            }
        }
        c
    }

    /// `Σ_i Var⟨Y, e_i⟩`.
    pub fn shift_variance_trace(&self) -> f64 {
        self.covariance().trace()
    }

    pub fn to_json_string(&self) -> Result<String> {
        let json = WeightedShiftsJson {
            weights: raw_numbers(&self.weights)?,
            shifts: self.shifts.iter().map(|h| raw_numbers(h)).collect::<Result<_>>()?,
        };
        Ok(serde_json::to_string(&json)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let wire: WeightedShiftsWire = serde_json::from_str(s)?;
        Self::new(wire.weights, wire.shifts)
    }
}

/// Builds a density from raw coefficients, rejecting it unless `c₀ = 1` and
/// the grid screen of A1 passes.
pub fn from_coefficients(coeffs: Vec<f64>, space: &Arc<GaussianSpace>, grid: &GridSpec) -> Result<ChaosVector> {
    let f = ChaosVector::from_coeffs(space, coeffs)?;
    let report = check_a1(&f, grid)?;
    let mut problems = Vec::new();
    if (report.normalization - 1.0).abs() > NORMALIZATION_TOL {
        problems.push(format!("normalization: degree-0 coefficient is {}", report.normalization));
    }
    for v in report.verdicts.iter().filter(|v| !v.pass && v.quantity == "min_on_grid") {
        problems.push(format!("negativity: minimum {} at {:?} below {}", v.measured, report.argmin, v.threshold));
    }
    if problems.is_empty() {
        Ok(f)
    } else {
        Err(Error::Validation(problems))
    }
}

const MIXTURE_CHUNK: usize = 256;

/// `Σ_j p_j E(h_j)`.
pub fn shift_mixture(nu: &WeightedShifts, space: &Arc<GaussianSpace>) -> Result<ChaosVector> {
    if nu.dimension() != space.dimension() {
        return Err(Error::DimensionMismatch { expected: space.dimension(), got: nu.dimension() });
    }
    let len = space.len();
    let partials: Vec<Vec<f64>> = nu
        .weights
        .par_chunks(MIXTURE_CHUNK)
        .zip(nu.shifts.par_chunks(MIXTURE_CHUNK))
        .map(|(ps, hs)| {
            let mut acc = vec![0.0; len];
            let mut buf = vec![0.0; len];
            for (p, h) in ps.iter().zip(hs) {
                exponential_into(h, space, &mut buf);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += p * b;
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; len];
    for part in &partials {
        for (t, x) in total.iter_mut().zip(part) {
            *t += x;
        }
    }
    ChaosVector::from_coeffs(space, total)
}

/// The density of `N(0, I + 2G)`.
pub fn gaussian_cov(g: &DMatrix<f64>, space: &Arc<GaussianSpace>) -> Result<ChaosVector> {
    Ok(xi_series(g, space)?.into_series())
}

fn check_rank_one(g: &[f64]) -> Result<f64> {
    let g2: f64 = g.iter().map(|x| x * x).sum();
    if !(2.0 * g2 < 1.0) {
        return Err(Error::InvalidParameter(format!("rank-one quadratic needs 2|g|^2 < 1, got {}", 2.0 * g2)));
    }
    Ok(g2)
}

/// `Σ_k δ(g)^{◇2k}/k!`, i.e. the limit density for `G = g gᵀ`.
pub fn rank_one_quadratic(g: &[f64], space: &Arc<GaussianSpace>) -> Result<ChaosVector> {
    check_rank_one(g)?;
    let gv = nalgebra::DVector::from_column_slice(g);
    gaussian_cov(&(&gv * gv.transpose()), space)
}

/// `(1 + 2|g|²)^{−1/2} exp{⟨g,w⟩² / (1 + 2|g|²)}`.
pub fn rank_one_closed_form(g: &[f64], w: &[f64]) -> Result<f64> {
    let g2 = check_rank_one(g)?;
    if w.len() != g.len() {
        return Err(Error::DimensionMismatch { expected: g.len(), got: w.len() });
    }
    let dot: f64 = g.iter().zip(w).map(|(a, b)| a * b).sum();
    let s = 1.0 + 2.0 * g2;
    Ok(s.powf(-0.5) * (dot * dot / s).exp())
}

/// `Π_i f_i(w_i)` for one-dimensional factors, as a density on `ℝ^d`.
pub fn product_density(factors: &[ChaosVector], space: &Arc<GaussianSpace>) -> Result<ChaosVector> {
    let d = space.dimension();
    if factors.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: factors.len() });
    }
    if let Some(f) = factors.iter().find(|f| f.dimension() != 1) {
        return Err(Error::DimensionMismatch { expected: 1, got: f.dimension() });
    }
    let coeffs = space
        .indices()
        .iter()
        .map(|alpha| {
            alpha
                .entries()
                .iter()
                .zip(factors)
                .map(|(&a, f)| if (a as usize) <= f.max_degree() { f.coeff_at(a as usize) } else { 0.0 })
                .product()
        })
        .collect();
    ChaosVector::from_coeffs(space, coeffs)
}

/// Grid used for the sampler envelope in dimension `d`.
pub fn envelope_grid(d: usize) -> GridSpec {
    let (half_width, points_per_axis) = match d {
        1 => (8.0, 801),
        2 => (7.0, 141),
        3 => (6.5, 41),
        _ => (6.0, 21),
    };
    GridSpec { half_width, points_per_axis, negativity_tolerance: 0.0 }
}

/// Envelope constant `1.05 · max_grid f`, after checking `f > 0` on the grid.
pub fn envelope(f: &ChaosVector) -> Result<f64> {
    let grid = envelope_grid(f.dimension());
    let neg = f.scale(-1.0);
    let (neg_max, _) = crate::audit::grid_minimum(&neg, &grid)?;
    let (min, at) = crate::audit::grid_minimum(f, &grid)?;
    if !(min > 0.0) {
        return Err(Error::Validation(vec![format!(
            "sampler needs a strictly positive density on its grid; f({at:?}) = {min}"
        )]));
    }
    Ok(ENVELOPE_FACTOR * -neg_max)
}

/// `count` draws from `f dμ` by rejection against `μ`.
///
/// Each block of [`rng::BLOCK`] accepted draws consumes its own stream, so
/// the output depends only on `(f, count, seed)`.
pub fn sample(f: &ChaosVector, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let d = f.dimension();
    if d > SAMPLER_MAX_DIM {
        return Err(Error::InvalidParameter(format!("rejection sampling supports d <= {SAMPLER_MAX_DIM}, got {d}")));
    }
    let c0 = f.coeff_at(0);
    if (c0 - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized(c0));
    }
    let m = envelope(f)?;
    let chunks: Vec<Result<Vec<Vec<f64>>>> = rng::blocks(count)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(b, _, len)| {
            let mut r = rng::stream(seed, "rejection-sampler", b as u64);
            let mut out = Vec::with_capacity(len);
            while out.len() < len {
                let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut r)).collect();
                let u: f64 = r.random();
                let value = f.eval_unchecked(&z);
                if value > m {
                    return Err(Error::EnvelopeBreach { point: z, value, envelope: m });
                }
                if u * m < value {
                    out.push(z);
                }
            }
            Ok(out)
        })
        .collect();
    let mut samples = Vec::with_capacity(count);
    for chunk in chunks {
        samples.extend(chunk?);
    }
    Ok(samples)
}

/// Closed form of [`gaussian_cov`] at `w`.
pub fn gaussian_cov_closed_form(g: &DMatrix<f64>, w: &[f64]) -> Result<f64> {
    xi_closed_form(g, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit::{audit, check_a2, check_a3};
    use crate::basis::MultiIndex;
    use crate::wick::stochastic_exponential;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn two_point() -> WeightedShifts {
        WeightedShifts::new(vec![0.5, 0.5], vec![vec![0.4], vec![-0.4]]).unwrap()
    }

    #[test]
    fn weighted_shift_validation() {
        assert!(WeightedShifts::new(vec![0.5, 0.6], vec![vec![0.0], vec![1.0]]).is_err());
        assert!(WeightedShifts::new(vec![1.5, -0.5], vec![vec![0.0], vec![1.0]]).is_err());
        assert!(WeightedShifts::new(vec![1.0], vec![vec![0.0], vec![1.0]]).is_err());
        assert!(WeightedShifts::new(vec![0.5, 0.5], vec![vec![0.0], vec![1.0, 2.0]]).is_err());
        let nu = two_point();
        assert_relative_eq!(nu.exp_integrability(), 0.08f64.exp(), max_relative = 1e-15);
        let back = WeightedShifts::from_json_str(&nu.to_json_string().unwrap()).unwrap();
        assert_eq!(back, nu);
        assert!(WeightedShifts::from_json_str(r#"{"weights":[1],"shifts":[[0]],"x":1}"#).is_err());
    }

    #[test]
    fn from_coefficients_examples() {
        let s = GaussianSpace::new(1, 2).unwrap();
        let grid = GridSpec::default_for(1);
        assert!(from_coefficients(vec![1.0, 0.0, 0.0], &s, &grid).is_ok());
        assert!(from_coefficients(vec![1.0, 0.0, 0.6], &s, &grid).is_ok());
        let e = from_coefficients(vec![1.0, 0.0, 1.2], &s, &grid).unwrap_err();
        assert!(matches!(&e, Error::Validation(v) if v[0].starts_with("negativity")));
        let e = from_coefficients(vec![0.5, 0.0, 0.0], &s, &grid).unwrap_err();
        assert!(matches!(&e, Error::Validation(v) if v[0].starts_with("normalization")));
    }

    #[test]
    fn shift_mixture_examples() {
        let s = GaussianSpace::new(1, 6).unwrap();
        let one = WeightedShifts::new(vec![1.0], vec![vec![0.0]]).unwrap();
        assert_eq!(shift_mixture(&one, &s).unwrap(), ChaosVector::one(&s));

        let f = shift_mixture(&two_point(), &s).unwrap();
        assert_eq!(f.coeff(&MultiIndex::new(vec![1])), 0.0);
        assert_relative_eq!(f.coeff(&MultiIndex::new(vec![2])), 0.08, max_relative = 1e-15);
        assert_relative_eq!(two_point().shift_variance_trace(), 0.16, max_relative = 1e-15);
        assert!(audit(&f, &GridSpec::default_for(1)).unwrap().all_pass);
    }

    #[test]
    fn gaussian_cov_matches_closed_form() {
        let s = GaussianSpace::new(2, 16).unwrap();
        let g = DMatrix::from_row_slice(2, 2, &[0.1, 0.02, 0.02, 0.05]);
        let xi = xi_series(&g, &s).unwrap();
        let f = gaussian_cov(&g, &s).unwrap();
        for w in [[0.0, 0.0], [1.0, -0.5], [-1.5, 1.5]] {
            let c = gaussian_cov_closed_form(&g, &w).unwrap();
            let v = f.eval_at(&w).unwrap();
            // the pointwise tail decays like ρ(2G)^{K/2}, here ≈ 0.21^9
            assert!(((v - c) / c).abs() < 1e-6);
            assert!((v - c).abs() <= xi.pointwise_tail_bound(&w));
        }
    }

    #[test]
    fn rank_one_examples() {
        let s = GaussianSpace::new(1, 20).unwrap();
        assert_eq!(rank_one_quadratic(&[0.0], &s).unwrap(), ChaosVector::one(&s));
        assert!(rank_one_quadratic(&[0.75], &s).is_err());
        // (1.5)^{-1/2} e^{0.25/1.5}
        assert_relative_eq!(
            rank_one_closed_form(&[0.5], &[1.0]).unwrap(),
            0.964_576_737_948_166_7,
            max_relative = 1e-12
        );
        let g = [0.3];
        let f = rank_one_quadratic(&g, &s).unwrap();
        for w in [-2.0, 0.0, 1.0, 2.0] {
            let c = rank_one_closed_form(&g, &[w]).unwrap();
            assert!(((f.eval_at(&[w]).unwrap() - c) / c).abs() < 1e-6);
        }
    }

    #[test]
    fn product_density_factorizes() {
        let s1 = GaussianSpace::new(1, 3).unwrap();
        let a = ChaosVector::from_coeffs(&s1, vec![1.0, 0.1, 0.05, 0.02]).unwrap();
        let b = ChaosVector::from_coeffs(&s1, vec![1.0, -0.2, 0.1, 0.0]).unwrap();
        let s2 = GaussianSpace::new(2, 6).unwrap();
        let p = product_density(&[a.clone(), b.clone()], &s2).unwrap();
        let w = [0.7, -1.1];
        assert_relative_eq!(
            p.eval_at(&w).unwrap(),
            a.eval_at(&[w[0]]).unwrap() * b.eval_at(&[w[1]]).unwrap(),
            max_relative = 1e-13
        );
    }

    fn moments(xs: &[Vec<f64>]) -> (f64, f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().map(|x| x[0]).sum::<f64>() / n;
        let var = xs.iter().map(|x| (x[0] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var, (var / n).sqrt())
    }

    #[test]
    fn sampler_examples() {
        let s = GaussianSpace::new(1, 12).unwrap();
        let n = 100_000;
        let xs = sample(&ChaosVector::one(&s), n, 7).unwrap();
        let (mean, _, se) = moments(&xs);
        assert!(mean.abs() <= 4.0 * se);

        let e = stochastic_exponential(&[0.4], &s).unwrap();
        let xs = sample(&e, n, 8).unwrap();
        let (mean, _, se) = moments(&xs);
        assert!((mean - 0.4).abs() <= 4.0 * se);

        let f = shift_mixture(&two_point(), &s).unwrap();
        let xs = sample(&f, n, 9).unwrap();
        let (_, var, _) = moments(&xs);
        // se of the sample variance for a near-Gaussian law ≈ var·√(2/n)
        assert!((var - 1.16).abs() <= 4.0 * 1.16 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn sampler_is_thread_count_invariant() {
        let s = GaussianSpace::new(2, 4).unwrap();
        let f = shift_mixture(&WeightedShifts::uniform(vec![vec![0.3, 0.0], vec![0.0, -0.2]]).unwrap(), &s).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| sample(&f, 10_000, 3).unwrap());
        let b = four.install(|| sample(&f, 10_000, 3).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn sampler_rejects_nonpositive_and_high_dimension() {
        let s = GaussianSpace::new(1, 2).unwrap();
        let f = ChaosVector::from_coeffs(&s, vec![1.0, 0.0, 1.2]).unwrap();
        assert!(matches!(sample(&f, 10, 1), Err(Error::Validation(_))));
        let s5 = GaussianSpace::new(5, 1).unwrap();
        assert!(sample(&ChaosVector::one(&s5), 10, 1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn mixture_kernels_match_shift_moments(
            raw in prop::collection::vec((0.01f64..1.0, -0.5f64..0.5, -0.5f64..0.5), 1..6)
        ) {
            let total: f64 = raw.iter().map(|r| r.0).sum();
            let weights: Vec<f64> = raw.iter().map(|r| r.0 / total).collect();
            let fix = 1.0 - weights.iter().sum::<f64>();
            let mut weights = weights;
            weights[0] += fix;
            let nu = WeightedShifts::new(weights, raw.iter().map(|r| vec![r.1, r.2]).collect()).unwrap();
            let s = GaussianSpace::new(2, 4).unwrap();
            let f = shift_mixture(&nu, &s).unwrap();
            let v = f.kernel_view().unwrap();
            let m = nu.mean();
            for (a, b) in v.mean.iter().zip(&m) {
                prop_assert!((a - b).abs() < 1e-14);
            }
            let half_cov = nu.covariance() * 0.5;
            prop_assert!((&v.g2 - &half_cov).abs().max() < 1e-14);
            prop_assert!(check_a2(&f).unwrap().verdicts[0].pass);
            prop_assert!(check_a3(&f).unwrap().verdicts[0].pass);
        }
    }
}
