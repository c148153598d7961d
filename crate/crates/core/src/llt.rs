//! Standardized sums, L¹ distances to the smoothed limit, the rate constant,
//! rate sweeps, the Young-type inequality and the empirical convolution test.

use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::audit::{audit, AssumptionReport, GridSpec, QUADRATURE_MAX_DIM};
use crate::basis::{hermite_table, GaussianSpace};
use crate::chaos::ChaosVector;
use crate::error::{Error, Result};
use crate::limit::xi_series;
use crate::measures::sample;
use crate::output::{csv_document, fmt17};
use crate::quadrature::{gauss_hermite, tensor_integrate};
use crate::rng;
use crate::wick::{center_density, gamma, wick_mul, wick_power, McEstimate, TruncationPolicy};

/// Absolute slack added to every bound comparison to absorb rounding.
pub const BOUND_FLOOR: f64 = 1e-10;
/// `c(0.01)` of the Kolmogorov distribution; the 1% critical value is
/// `KS_COEFFICIENT / √N`.
pub const KS_COEFFICIENT: f64 = 1.6276;

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// `(Γ(√(α/n)) f̃)^{◇n}` with `f̃` the centered density.
pub fn sum_density(f: &ChaosVector, n: usize, alpha: f64, policy: TruncationPolicy) -> Result<ChaosVector> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let centered = center_density(f, policy)?;
    let scaled = gamma((alpha / n as f64).sqrt(), &centered)?;
    wick_power(&scaled, n, policy)
}

/// `Γ(√α) ξ(G(f))`.
pub fn smoothed_limit(f: &ChaosVector, alpha: f64) -> Result<ChaosVector> {
    check_alpha(alpha)?;
    let g = f.kernel_view()?.g2;
    gamma(alpha.sqrt(), xi_series(&g, f.space())?.series())
}

/// How `∫|f − g| dμ` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistanceSpec {
    /// Tensor Gauss–Hermite with `nodes` and `2·nodes` points per axis
    /// (`nodes` is raised to at least `2K`).
    Quadrature { nodes: usize },
    /// Plain Monte Carlo at `samples` standard Gaussian points.
    MonteCarlo { samples: usize, seed: u64 },
}

impl DistanceSpec {
    /// Quadrature up to `d = 3`, Monte Carlo above.
    pub fn auto(d: usize, samples: usize, seed: u64) -> Self {
        match d {
            _ if d > QUADRATURE_MAX_DIM => DistanceSpec::MonteCarlo { samples, seed },
            1 => DistanceSpec::Quadrature { nodes: 200 },
            2 => DistanceSpec::Quadrature { nodes: 80 },
            _ => DistanceSpec::Quadrature { nodes: 30 },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DistanceEstimate {
    pub value: f64,
    /// `|Q_{2N} − Q_N|` for quadrature, one standard error for Monte Carlo.
    pub error: f64,
}

pub fn l1_distance(f: &ChaosVector, g: &ChaosVector, spec: DistanceSpec) -> Result<DistanceEstimate> {
    let diff = f.sub(g)?;
    let d = diff.dimension();
    match spec {
        DistanceSpec::Quadrature { nodes } => {
            let n = nodes.max(2 * diff.max_degree()).max(1);
            let coarse = tensor_integrate(d, &gauss_hermite(n), |w| diff.eval_unchecked(w).abs());
            let fine = tensor_integrate(d, &gauss_hermite(2 * n), |w| diff.eval_unchecked(w).abs());
            Ok(DistanceEstimate { value: fine, error: (fine - coarse).abs() })
        }
        DistanceSpec::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::InvalidParameter("Monte-Carlo distance needs at least 2 samples".into()));
            }
            let values: Vec<f64> = rng::blocks(samples)
                .collect::<Vec<_>>()
                .into_par_iter()
                .flat_map_iter(|(b, _, len)| {
                    let mut r = rng::stream(seed, "l1-monte-carlo", b as u64);
                    let mut w = vec![0.0; d];
                    (0..len)
                        .map(|_| {
                            for x in w.iter_mut() {
                                *x = StandardNormal.sample(&mut r);
                            }
                            diff.eval_unchecked(&w).abs()
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
            let est = McEstimate::from_values(&values);
            Ok(DistanceEstimate { value: est.mean, error: est.std_error })
        }
    }
}

/// `½ ∫|f − g| dμ`.
pub fn tv_distance(f: &ChaosVector, g: &ChaosVector, spec: DistanceSpec) -> Result<DistanceEstimate> {
    let l1 = l1_distance(f, g, spec)?;
    Ok(DistanceEstimate { value: 0.5 * l1.value, error: 0.5 * l1.error })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateConstant {
    pub c: f64,
    pub n0: usize,
    pub beta: f64,
    /// `Σ_{k≥3} (β/n₀)^k ‖(f̃ − ξ)_k‖₂²`.
    pub raw_sum: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// `C = n₀^{3/2} (Σ_{k≥3} (β/n₀)^k ‖(f̃ − ξ)_k‖₂²)^{1/2}` with `β = α/(1−α)`
/// and `n₀ = max(1, ⌈β⌉)`.
pub fn rate_constant(f: &ChaosVector, alpha: f64) -> Result<RateConstant> {
    check_alpha(alpha)?;
    let beta = alpha / (1.0 - alpha);
    let n0 = (beta.ceil() as usize).max(1);
    let k_max = f.max_degree();
    if k_max < 3 {
        return Ok(RateConstant {
            c: 0.0,
            n0,
            beta,
            raw_sum: 0.0,
            warning: Some(format!("K = {k_max} < 3: no degree-3 content is representable")),
        });
    }
    let centered = center_density(f, TruncationPolicy::full(f.space()))?;
    let g = f.kernel_view()?.g2;
    let xi = xi_series(&g, f.space())?;
    let diff = centered.sub(xi.series())?;
    let ratio = beta / n0 as f64;
    let raw_sum: f64 = (3..=k_max).map(|k| ratio.powi(k as i32) * diff.degree_norm_sq(k)).sum();
    Ok(RateConstant { c: (n0 as f64).powf(1.5) * raw_sum.sqrt(), n0, beta, raw_sum, warning: None })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub l1: f64,
    pub bound: f64,
    pub err: f64,
    pub seconds: f64,
}

impl RateRow {
    pub fn within_bound(&self) -> bool {
        self.l1 <= self.bound + self.err + BOUND_FLOOR
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    pub c: f64,
    pub n0: usize,
    pub beta: f64,
}

impl RateTable {
    pub fn to_csv(&self) -> String {
        csv_document(
            &["n", "l1", "bound", "err", "seconds"],
            self.rows
                .iter()
                .map(|r| vec![r.n.to_string(), fmt17(r.l1), fmt17(r.bound), fmt17(r.err), fmt17(r.seconds)]),
        )
    }

    pub fn first_violation(&self) -> Option<&RateRow> {
        self.rows.iter().find(|r| !r.within_bound())
    }

    /// `l1` never increases along the sorted rows.
    pub fn nonincreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].l1 <= w[0].l1)
    }

    /// Log-log slope between the first and last rows.
    pub fn secant_slope(&self) -> Option<f64> {
        let (a, b) = (self.rows.first()?, self.rows.last()?);
        (a.n != b.n).then(|| (b.l1.ln() - a.l1.ln()) / ((b.n as f64).ln() - (a.n as f64).ln()))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub alpha: f64,
    pub n_values: Vec<usize>,
    pub distance: DistanceSpec,
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default)]
    pub override_audit: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepOutcome {
    pub table: RateTable,
    pub constant: RateConstant,
    pub audit: AssumptionReport,
    /// True when the audit failed and the sweep ran under the override.
    pub audit_overridden: bool,
}

/// Rate table over `config.n_values`; fails with the offending row when a
/// distance exceeds `C/√n` plus its error estimate.
pub fn rate_sweep(f: &ChaosVector, config: &SweepConfig) -> Result<SweepOutcome> {
    check_alpha(config.alpha)?;
    if config.n_values.is_empty() || config.n_values.contains(&0) {
        return Err(Error::InvalidParameter("n_values must be nonempty and positive".into()));
    }
    let grid = config.grid.unwrap_or_else(|| GridSpec::default_for(f.dimension()));
    let report = audit(f, &grid)?;
    if !report.all_pass && !config.override_audit {
        let failed: Vec<String> = report
            .failures()
            .iter()
            .map(|v| format!("{} {} = {} (threshold {})", v.assumption, v.quantity, v.measured, v.threshold))
            .collect();
        return Err(Error::AssumptionViolation { assumption: "audit", detail: failed.join("; ") });
    }
    let constant = rate_constant(f, config.alpha)?;
    let limit = smoothed_limit(f, config.alpha)?;
    let policy = TruncationPolicy::full(f.space());
    let mut ns = config.n_values.clone();
    ns.sort_unstable();
    ns.dedup();
    let rows = ns
        .par_iter()
        .map(|&n| {
            let start = Instant::now();
            let sum = sum_density(f, n, config.alpha, policy)?;
            let dist = l1_distance(&sum, &limit, config.distance)?;
            let elapsed = start.elapsed().as_secs_f64();
            Ok(RateRow {
                n,
                l1: dist.value,
                bound: constant.c / (n as f64).sqrt(),
                err: dist.error,
                seconds: if config.record_timing { elapsed } else { 0.0 },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let table = RateTable { rows, c: constant.c, n0: constant.n0, beta: constant.beta };
    if let Some(row) = table.first_violation() {
        return Err(Error::BoundViolation {
            n: row.n,
            distance: row.l1,
            bound: row.bound,
            error: row.err,
            table: Box::new(table.clone()),
        });
    }
    let audit_overridden = !report.all_pass;
    Ok(SweepOutcome { table, constant, audit: report, audit_overridden })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct YoungReport {
    pub left: f64,
    pub right: f64,
    pub slack: f64,
    pub holds: bool,
}

/// `‖Γ(√α₁)f₁ ◇ … ◇ Γ(√α_n)f_n‖₂ ≤ Π‖f_i‖₂` at `p_i = r = 2`, computed in a
/// space large enough that no product term is truncated.
pub fn young_check(fs: &[ChaosVector], alphas: &[f64]) -> Result<YoungReport> {
    if fs.is_empty() || fs.len() != alphas.len() {
        return Err(Error::InvalidParameter(format!("{} densities but {} weights", fs.len(), alphas.len())));
    }
    if alphas.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) || (alphas.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("weights must lie in (0, 1] and sum to 1, got {alphas:?}")));
    }
    let d = fs[0].dimension();
    if let Some(f) = fs.iter().find(|f| f.dimension() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: f.dimension() });
    }
    let k: usize = fs.iter().map(|f| f.effective_degree()).sum();
    let space = GaussianSpace::new(d, k)?;
    let mut product = ChaosVector::one(&space);
    for (f, &a) in fs.iter().zip(alphas) {
        let lifted = gamma(a.sqrt(), &f.embed(&space)?)?;
        product = wick_mul(&product, &lifted)?;
    }
    let left = product.norm();
    let right: f64 = fs.iter().map(|f| f.norm()).product();
    Ok(YoungReport { left, right, slack: right - left, holds: left <= right * (1.0 + 1e-12) })
}

/// `Φ(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `∫_{−∞}^x f φ = c₀Φ(x) − φ(x) Σ_{n≥1} c_n He_{n−1}(x)` for `d = 1`.
pub fn chaos_cdf(f: &ChaosVector, x: f64) -> Result<f64> {
    if f.dimension() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: f.dimension() });
    }
    let k = f.max_degree();
    let he = hermite_table(k, x);
    let phi = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let tail: f64 = (1..=k).map(|n| f.coeff_at(n) * he[n - 1]).sum();
    Ok(f.coeff_at(0) * normal_cdf(x) - phi * tail)
}

/// `sup_x |F_N(x) − F(x)|` for a sample and a continuous CDF.
pub fn ks_statistic(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(|a, b| a.total_cmp(b));
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (((i + 1) as f64 / n) - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KsReport {
    pub samples: usize,
    pub statistic: f64,
    pub critical_value: f64,
    pub pass: bool,
}

/// Samples `√α₁X₁ + √α₂X₂` with `X₁ ~ f dμ`, `X₂ ~ g dμ` and compares it with
/// the CDF of `Γ(√α₁)f ◇ Γ(√α₂)g`.
pub fn empirical_convolution_check(
    f: &ChaosVector,
    g: &ChaosVector,
    alphas: (f64, f64),
    samples: usize,
    seed: u64,
) -> Result<KsReport> {
    if f.dimension() != 1 || g.dimension() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: f.dimension().max(g.dimension()) });
    }
    let (a1, a2) = alphas;
    if !(a1 > 0.0 && a2 > 0.0) || (a1 + a2 - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("weights must be positive and sum to 1, got {alphas:?}")));
    }
    let space = GaussianSpace::new(1, f.effective_degree() + g.effective_degree())?;
    let predicted = wick_mul(&gamma(a1.sqrt(), &f.embed(&space)?)?, &gamma(a2.sqrt(), &g.embed(&space)?)?)?;
    let x1 = sample(f, samples, rng::derive_seed(seed, "convolution-x1"))?;
    let x2 = sample(g, samples, rng::derive_seed(seed, "convolution-x2"))?;
    let mut sums: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a1.sqrt() * a[0] + a2.sqrt() * b[0]).collect();
    let statistic = ks_statistic(&mut sums, |x| chaos_cdf(&predicted, x).expect("one-dimensional"));
    let critical_value = KS_COEFFICIENT / (samples as f64).sqrt();
    Ok(KsReport { samples, statistic, critical_value, pass: statistic < critical_value })
}

/// A centered density in the same space as `f`, exposed for reporting.
pub fn centered(f: &ChaosVector) -> Result<ChaosVector> {
    center_density(f, TruncationPolicy::full(f.space()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::MultiIndex;
    use crate::measures::{gaussian_cov, shift_mixture, WeightedShifts};
    use crate::wick::stochastic_exponential;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn d1(coeffs: &[f64]) -> ChaosVector {
        let s = GaussianSpace::new(1, coeffs.len() - 1).unwrap();
        ChaosVector::from_coeffs(&s, coeffs.to_vec()).unwrap()
    }

    fn corpus_d1(k: usize) -> ChaosVector {
        let s = GaussianSpace::new(1, k).unwrap();
        ChaosVector::from_terms(
            &s,
            &[(MultiIndex::new(vec![0]), 1.0), (MultiIndex::new(vec![2]), 0.1), (MultiIndex::new(vec![3]), 0.05)],
        )
        .unwrap()
    }

    #[test]
    fn sum_density_examples() {
        let s = GaussianSpace::new(1, 8).unwrap();
        let p = TruncationPolicy::full(&s);
        assert_eq!(sum_density(&ChaosVector::one(&s), 7, 0.3, p).unwrap(), ChaosVector::one(&s));

        let s12 = GaussianSpace::new(1, 12).unwrap();
        let xi = gaussian_cov(&DMatrix::from_element(1, 1, 0.2), &s12).unwrap();
        let sum = sum_density(&xi, 5, 0.5, TruncationPolicy::full(&s12)).unwrap();
        assert!(sum.max_abs_diff(&gamma(0.5f64.sqrt(), &xi).unwrap()).unwrap() <= 1e-10);

        let e = stochastic_exponential(&[0.4], &s).unwrap();
        for n in [1, 3, 8] {
            let out = sum_density(&e, n, 0.5, p).unwrap();
            assert!(out.max_abs_diff(&ChaosVector::one(&s)).unwrap() < 1e-15);
        }
        assert!(sum_density(&e, 2, 1.0, p).is_err());
    }

    #[test]
    fn l1_examples() {
        let s = GaussianSpace::new(1, 16).unwrap();
        let one = ChaosVector::one(&s);
        let spec = DistanceSpec::auto(1, 0, 0);
        assert_eq!(l1_distance(&one, &one, spec).unwrap().value, 0.0);
        let e = stochastic_exponential(&[0.5], &s).unwrap();
        let d = l1_distance(&one, &e, spec).unwrap();
        let oracle = 2.0 * (normal_cdf(0.25) - normal_cdf(-0.25));
        assert_relative_eq!(oracle, 0.394_825_302_731_694_8, max_relative = 1e-12);
        // truncation at K = 16 contributes well below the quadrature error
        assert!((d.value - oracle).abs() <= d.error.max(1e-4), "{d:?} vs {oracle}");
        let tv = tv_distance(&one, &e, spec).unwrap();
        assert_eq!(tv.value, 0.5 * d.value);
    }

    #[test]
    fn monte_carlo_distance_is_consistent() {
        let s = GaussianSpace::new(1, 16).unwrap();
        let one = ChaosVector::one(&s);
        let e = stochastic_exponential(&[0.5], &s).unwrap();
        let mc = l1_distance(&one, &e, DistanceSpec::MonteCarlo { samples: 200_000, seed: 4 }).unwrap();
        let oracle = 2.0 * (normal_cdf(0.25) - normal_cdf(-0.25));
        assert!((mc.value - oracle).abs() <= 4.0 * mc.error);
    }

    #[test]
    fn rate_constant_examples() {
        let s = GaussianSpace::new(1, 8).unwrap();
        let xi = gaussian_cov(&DMatrix::from_element(1, 1, 0.2), &s).unwrap();
        assert_eq!(rate_constant(&xi, 0.5).unwrap().c, 0.0);

        let mut f = xi.clone();
        f.set_coeff(&MultiIndex::new(vec![3]), 0.01).unwrap();
        let rc = rate_constant(&f, 0.5).unwrap();
        assert_eq!((rc.n0, rc.beta), (1, 1.0));
        assert_relative_eq!(rc.c, 0.01 * 6f64.sqrt(), max_relative = 1e-12);

        // degree-3 mismatch 0, degree-4 mismatch 0.02 − 0.1²/2
        let f = d1(&[1.0, 0.0, 0.1, 0.0, 0.02]);
        let rc = rate_constant(&f, 0.5).unwrap();
        assert_relative_eq!(rc.c, 24f64.sqrt() * (0.02 - 0.005), max_relative = 1e-12);

        let rc = rate_constant(&d1(&[1.0, 0.0, 0.1]), 0.5).unwrap();
        assert!(rc.c == 0.0 && rc.warning.is_some());

        let rc = rate_constant(&corpus_d1(6), 0.75).unwrap();
        assert_eq!((rc.n0, rc.beta), (3, 3.0));
    }

    #[test]
    fn low_degrees_of_centered_density_match_the_limit() {
        let s = GaussianSpace::new(2, 5).unwrap();
        let nu = WeightedShifts::uniform(vec![vec![0.3, -0.1], vec![-0.2, 0.25], vec![0.1, 0.1]]).unwrap();
        let f = shift_mixture(&nu, &s).unwrap();
        let c = centered(&f).unwrap();
        let xi = xi_series(&f.kernel_view().unwrap().g2, f.space()).unwrap();
        for p in 0..s.len_up_to(2) {
            assert!((c.coeff_at(p) - xi.series().coeff_at(p)).abs() <= 1e-12);
        }
    }

    fn sweep_config(n_values: Vec<usize>) -> SweepConfig {
        SweepConfig {
            alpha: 0.5,
            n_values,
            distance: DistanceSpec::auto(1, 0, 0),
            record_timing: false,
            override_audit: false,
            grid: None,
        }
    }

    #[test]
    fn fixed_point_sweep_is_zero() {
        let s = GaussianSpace::new(1, 10).unwrap();
        let xi = gaussian_cov(&DMatrix::from_element(1, 1, 0.15), &s).unwrap();
        let out = rate_sweep(&xi, &sweep_config(vec![4, 16, 64])).unwrap();
        assert!(out.table.rows.iter().all(|r| r.l1 <= 1e-10 && r.seconds == 0.0));
    }

    #[test]
    fn corpus_sweep_meets_the_bound() {
        let out = rate_sweep(&corpus_d1(8), &sweep_config(vec![256, 4, 64, 16])).unwrap();
        let t = &out.table;
        assert_eq!(t.rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![4, 16, 64, 256]);
        assert!(t.first_violation().is_none());
        assert!(t.nonincreasing());
        assert!(t.secant_slope().unwrap() <= -0.35);
        for r in &t.rows {
            assert_eq!(r.bound, t.c / (r.n as f64).sqrt());
        }
        let csv = t.to_csv();
        assert!(csv.starts_with("n,l1,bound,err,seconds\n4,"));
    }

    #[test]
    fn sweep_refuses_failed_audit_without_override() {
        let f = d1(&[1.0, 0.0, 1.2, 0.0]);
        let mut cfg = sweep_config(vec![4]);
        assert!(matches!(rate_sweep(&f, &cfg), Err(Error::AssumptionViolation { .. })));
        cfg.override_audit = true;
        match rate_sweep(&f, &cfg) {
            Ok(out) => assert!(out.audit_overridden),
            Err(e) => assert!(matches!(e, Error::AssumptionViolation { .. } | Error::BoundViolation { .. })),
        }
    }

    #[test]
    fn young_examples() {
        let s = GaussianSpace::new(1, 4).unwrap();
        let one = ChaosVector::one(&s);
        let r = young_check(&[one.clone(), one.clone(), one], &[0.25, 0.25, 0.5]).unwrap();
        assert_eq!((r.left, r.right), (1.0, 1.0));

        let f = d1(&[1.0, 0.0, 1.0]);
        let r = young_check(&[f.clone(), f], &[0.5, 0.5]).unwrap();
        assert_relative_eq!(r.right, 3.0, max_relative = 1e-15);
        assert_relative_eq!(r.left, 4.5f64.sqrt(), max_relative = 1e-15);
        assert!(r.holds);
        assert!(young_check(&[d1(&[1.0])], &[0.5]).is_err());
    }

    #[test]
    fn chaos_cdf_matches_quadrature() {
        let f = d1(&[1.0, 0.2, 0.1, 0.05, 0.01]);
        assert_relative_eq!(chaos_cdf(&f, 40.0).unwrap(), 1.0, max_relative = 1e-15);
        assert!(chaos_cdf(&f, -40.0).unwrap().abs() < 1e-300);
        // trapezoid on a fine grid as an independent check
        for x in [-1.5, 0.0, 0.7, 2.0] {
            let n = 200_000;
            let lo = -12.0;
            let h = (x - lo) / n as f64;
            let dens = |t: f64| f.eval_at(&[t]).unwrap() * (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let mut acc = 0.5 * (dens(lo) + dens(x));
            for i in 1..n {
                acc += dens(lo + h * i as f64);
            }
            assert_relative_eq!(chaos_cdf(&f, x).unwrap(), acc * h, epsilon = 1e-9);
        }
    }

    #[test]
    fn ks_statistic_on_known_sample() {
        let mut xs = vec![0.1, 0.5, 0.9];
        let d = ks_statistic(&mut xs, |x| x);
        assert_relative_eq!(d, 0.2333333333333333, max_relative = 1e-12);
    }

    #[test]
    fn convolution_examples() {
        let s = GaussianSpace::new(1, 12).unwrap();
        let one = ChaosVector::one(&s);
        let r = empirical_convolution_check(&one, &one, (0.5, 0.5), 20_000, 1).unwrap();
        assert!(r.pass, "{r:?}");
        let e = stochastic_exponential(&[0.4], &s).unwrap();
        let r = empirical_convolution_check(&e, &one, (0.5, 0.5), 20_000, 2).unwrap();
        assert!(r.pass, "{r:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn l1_triangle_inequality(c in prop::collection::vec(-0.1f64..0.1, 9)) {
            let s = GaussianSpace::new(1, 3).unwrap();
            let f = ChaosVector::from_coeffs(&s, vec![1.0, c[0], c[1], c[2]]).unwrap();
            let g = ChaosVector::from_coeffs(&s, vec![1.0, c[3], c[4], c[5]]).unwrap();
            let h = ChaosVector::from_coeffs(&s, vec![1.0, c[6], c[7], c[8]]).unwrap();
            let spec = DistanceSpec::Quadrature { nodes: 60 };
            let fg = l1_distance(&f, &g, spec).unwrap();
            let gh = l1_distance(&g, &h, spec).unwrap();
            let fh = l1_distance(&f, &h, spec).unwrap();
            prop_assert!(fh.value <= fg.value + gh.value + fg.error + gh.error + fh.error + 1e-12);
        }

        #[test]
        fn young_holds_on_random_pairs(a in prop::collection::vec(-0.3f64..0.3, 8), w in 0.05f64..0.95) {
            let s = GaussianSpace::new(2, 2).unwrap();
            let mut ca = vec![1.0];
            ca.extend_from_slice(&a[..5]);
            let f = ChaosVector::from_coeffs(&s, ca).unwrap();
            let mut cb = vec![1.0, a[5], a[6], a[7], 0.0, 0.0];
            cb[4] = a[0] * a[7];
            let g = ChaosVector::from_coeffs(&s, cb).unwrap();
            let r = young_check(&[f, g], &[w, 1.0 - w]).unwrap();
            prop_assert!(r.holds);
        }
    }
}
