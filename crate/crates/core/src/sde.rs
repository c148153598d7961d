//! Time-discretized path space: the drift `b₁` evaluated along simulated
//! Brownian paths `B²` on a uniform grid of `[0, 1]`.
//!
//! Coordinate `i` of the discrete space is the normalized increment
//! `(w(t_i) − w(t_{i−1}))/√Δt`; the shift of one path has components
//! `h_i = −√Δt · b₁(B²_{t_{i−1}})` (left-point rule).

use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::GaussianSpace;
use crate::chaos::ChaosVector;
use crate::error::{Error, Result};
use crate::measures::{shift_mixture, WeightedShifts};
use crate::rng;
use crate::wick::McEstimate;

/// Default finiteness ceiling for the Novikov estimate.
pub const NOVIKOV_CEILING: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathGrid {
    pub steps: usize,
}

impl PathGrid {
    pub fn new(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self { steps })
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.steps as f64
    }
}

/// The drift `b₁` of the first equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Drift {
    Constant {
        value: f64,
    },
    /// `amplitude · sin(frequency · x)`.
    Sine {
        amplitude: f64,
        frequency: f64,
    },
    /// `amplitude · tanh(scale · x)`.
    Tanh {
        amplitude: f64,
        scale: f64,
    },
}

impl Drift {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Drift::Constant { value } => value,
            Drift::Sine { amplitude, frequency } => amplitude * (frequency * x).sin(),
            Drift::Tanh { amplitude, scale } => amplitude * (scale * x).tanh(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSpec {
    pub b1: Drift,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

impl From<Drift> for DriftSpec {
    fn from(b1: Drift) -> Self {
        Self { b1, kappa: None }
    }
}

/// `b₁(B²_{t_{i−1}})` for `i = 1..=d` on each of `m` paths. Path `j` uses
/// stream `j`, so results do not depend on scheduling.
fn drift_values(spec: &DriftSpec, grid: PathGrid, paths: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if paths == 0 {
        return Err(Error::InvalidParameter("path count must be positive".into()));
    }
    let sd = grid.dt().sqrt();
    (0..paths)
        .into_par_iter()
        .map(|j| {
            let mut r = rng::stream(seed, "sde-brownian", j as u64);
            let mut b = 0.0f64;
            let mut out = Vec::with_capacity(grid.steps);
            for _ in 0..grid.steps {
                let v = spec.b1.eval(b);
                if !v.is_finite() {
                    return Err(Error::NonFiniteDrift { path: j });
                }
                out.push(v);
                let z: f64 = StandardNormal.sample(&mut r);
                b += sd * z;
            }
            Ok(out)
        })
        .collect()
}

/// `Δt Σ_i b₁(B²_{t_{i−1}})²`, written as a mean so constant drifts are exact.
fn energy(values: &[f64]) -> f64 {
    values.iter().map(|b| b * b).sum::<f64>() / values.len() as f64
}

/// Uniform empirical measure over the simulated shifts.
pub fn simulate_drift_shifts(spec: &DriftSpec, grid: PathGrid, paths: usize, seed: u64) -> Result<WeightedShifts> {
    let sd = grid.dt().sqrt();
    let shifts =
        drift_values(spec, grid, paths, seed)?.into_iter().map(|v| v.into_iter().map(|b| -sd * b).collect()).collect();
    WeightedShifts::uniform(shifts)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct NovikovReport {
    pub estimate: McEstimate,
    pub ceiling: f64,
    pub finite: bool,
}

/// Monte-Carlo mean of `exp{½ Δt Σ_i b₁(B²_{t_{i−1}})²}`.
pub fn novikov_estimate(
    spec: &DriftSpec,
    grid: PathGrid,
    paths: usize,
    seed: u64,
    ceiling: f64,
) -> Result<NovikovReport> {
    let values = drift_values(spec, grid, paths, seed)?;
    let mut samples = Vec::with_capacity(paths);
    for (j, v) in values.iter().enumerate() {
        let x = (0.5 * energy(v)).exp();
        if !x.is_finite() {
            return Err(Error::NovikovOverflow { path: j });
        }
        samples.push(x);
    }
    let estimate = McEstimate::from_values(&samples);
    Ok(NovikovReport { estimate, ceiling, finite: estimate.mean.is_finite() && estimate.mean <= ceiling })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Assumption3Report {
    pub estimate: McEstimate,
    /// `estimate + 3·SE < 1`.
    pub pass: bool,
}

/// Monte-Carlo estimate of `Δt Σ_i E[b₁(B²_{t_{i−1}})²]`.
pub fn assumption3_estimate(spec: &DriftSpec, grid: PathGrid, paths: usize, seed: u64) -> Result<Assumption3Report> {
    let values: Vec<f64> = drift_values(spec, grid, paths, seed)?.iter().map(|v| energy(v)).collect();
    let estimate = McEstimate::from_values(&values);
    Ok(Assumption3Report { estimate, pass: estimate.mean + 3.0 * estimate.std_error < 1.0 })
}

/// `Σ_j E(h_j)/m` over the simulated shifts.
pub fn sde_density(
    spec: &DriftSpec,
    grid: PathGrid,
    paths: usize,
    space: &Arc<GaussianSpace>,
    seed: u64,
) -> Result<ChaosVector> {
    if space.dimension() != grid.steps {
        return Err(Error::DimensionMismatch { expected: grid.steps, got: space.dimension() });
    }
    shift_mixture(&simulate_drift_shifts(spec, grid, paths, seed)?, space)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit::{audit, check_a3, variance_pairing, GridSpec};
    use crate::wick::stochastic_exponential;
    use approx::assert_relative_eq;

    fn constant(c: f64) -> DriftSpec {
        Drift::Constant { value: c }.into()
    }

    fn half_sine() -> DriftSpec {
        Drift::Sine { amplitude: 0.5, frequency: 1.0 }.into()
    }

    #[test]
    fn shifts_for_zero_and_constant_drift() {
        let grid = PathGrid::new(8).unwrap();
        let nu = simulate_drift_shifts(&constant(0.0), grid, 5, 1).unwrap();
        assert!(nu.shifts().iter().flatten().all(|&x| x == 0.0));

        let c = 0.7;
        let nu = simulate_drift_shifts(&constant(c), grid, 5, 1).unwrap();
        for h in nu.shifts() {
            assert!(h.iter().all(|&x| x == -grid.dt().sqrt() * c));
            assert_relative_eq!(h.iter().map(|x| x * x).sum::<f64>(), c * c, max_relative = 1e-15);
        }
    }

    #[test]
    fn novikov_examples() {
        let grid = PathGrid::new(8).unwrap();
        let r = novikov_estimate(&constant(0.0), grid, 100, 2, NOVIKOV_CEILING).unwrap();
        assert_eq!((r.estimate.mean, r.estimate.std_error), (1.0, 0.0));
        let r = novikov_estimate(&constant(1.0), grid, 100, 2, NOVIKOV_CEILING).unwrap();
        assert_eq!(r.estimate.mean, 0.5f64.exp());
        assert_eq!(r.estimate.std_error, 0.0);
        let r = novikov_estimate(&constant(0.5), grid, 100, 2, NOVIKOV_CEILING).unwrap();
        assert_eq!(r.estimate.mean, 0.125f64.exp());
        let r = novikov_estimate(&half_sine(), grid, 10_000, 2, NOVIKOV_CEILING).unwrap();
        assert!(r.finite && r.estimate.mean > 1.0 && r.estimate.mean <= 0.125f64.exp());
        let huge = constant(1e200);
        assert!(matches!(
            novikov_estimate(&huge, grid, 3, 2, NOVIKOV_CEILING),
            Err(Error::NovikovOverflow { path: 0 })
        ));
    }

    #[test]
    fn assumption3_examples() {
        let grid = PathGrid::new(8).unwrap();
        let r = assumption3_estimate(&constant(0.0), grid, 10, 3).unwrap();
        assert!(r.estimate.mean == 0.0 && r.pass);
        let r = assumption3_estimate(&constant(1.0), grid, 10, 3).unwrap();
        assert!(r.estimate.mean == 1.0 && !r.pass);
        let r = assumption3_estimate(&constant(0.5), grid, 10, 3).unwrap();
        assert!(r.estimate.mean == 0.25 && r.pass);
        let r = assumption3_estimate(&half_sine(), grid, 10_000, 3).unwrap();
        assert!(r.estimate.mean < 0.25 && r.pass);
    }

    #[test]
    fn non_finite_drift_is_reported() {
        let grid = PathGrid::new(4).unwrap();
        let spec = constant(f64::NAN);
        assert!(matches!(simulate_drift_shifts(&spec, grid, 3, 0), Err(Error::NonFiniteDrift { path: 0 })));
    }

    #[test]
    fn density_examples() {
        let grid = PathGrid::new(4).unwrap();
        let s = GaussianSpace::new(4, 4).unwrap();
        let f = sde_density(&constant(0.0), grid, 10, &s, 4).unwrap();
        assert!(f.max_abs_diff(&ChaosVector::one(&s)).unwrap() < 1e-15);

        let f = sde_density(&constant(0.3), grid, 10, &s, 4).unwrap();
        let e = stochastic_exponential(&[-0.5 * 0.3; 4], &s).unwrap();
        assert!(f.max_abs_diff(&e).unwrap() < 1e-15);

        let f = sde_density(&half_sine(), grid, 2000, &s, 4).unwrap();
        assert!(check_a3(&f).unwrap().frobenius_sq_m < 1.0);
        assert!(audit(&f, &GridSpec::default_for(4)).unwrap().all_pass);
    }

    #[test]
    fn variance_decomposes_into_gaussian_and_shift_parts() {
        let grid = PathGrid::new(3).unwrap();
        let s = GaussianSpace::new(3, 4).unwrap();
        let nu = simulate_drift_shifts(&half_sine(), grid, 4000, 5).unwrap();
        let f = shift_mixture(&nu, &s).unwrap();
        let cov = nu.covariance();
        for i in 0..3 {
            let mut h = [0.0; 3];
            h[i] = 1.0;
            let v = variance_pairing(&f, &h).unwrap();
            assert_relative_eq!(v.formula_value, 1.0 + cov[(i, i)], max_relative = 1e-12);
            assert_relative_eq!(v.quadrature_value.unwrap(), v.formula_value, max_relative = 1e-10);
        }
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let grid = PathGrid::new(8).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(6).build().unwrap();
        let a = one.install(|| simulate_drift_shifts(&half_sine(), grid, 3000, 11).unwrap());
        let b = many.install(|| simulate_drift_shifts(&half_sine(), grid, 3000, 11).unwrap());
        assert_eq!(a, b);
    }
}
