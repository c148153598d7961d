//! Numeric checks of the three hypotheses on a candidate density and of the
//! variance identity `Var⟨X,h⟩ = hᵀMh + |h|²`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::chaos::ChaosVector;
use crate::error::{Error, Result};
use crate::limit::{symmetric_eigenvalues, PSD_TOL};
use crate::quadrature::{gauss_hermite, tensor_integrate};
use crate::wick::NORMALIZATION_TOL;

/// Largest dimension for which quadrature oracles are used.
pub const QUADRATURE_MAX_DIM: usize = 3;

const GRID_BUDGET: usize = 200_000;
const GRID_AXIS_MAX: usize = 701;

/// A uniform tensor grid on `[−half_width, half_width]^d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub half_width: f64,
    pub points_per_axis: usize,
    /// A1 passes when the grid minimum is at least `−tolerance · ‖f‖₂`.
    #[serde(default = "default_negativity_tolerance")]
    pub negativity_tolerance: f64,
}

fn default_negativity_tolerance() -> f64 {
    1e-6
}

impl GridSpec {
    /// Half-width 3.5 and the largest odd point count (at most 701, at
    /// least 3) with at most 2·10⁵ grid points in total.
    pub fn default_for(d: usize) -> Self {
        let mut n = 3usize;
        while n + 2 <= GRID_AXIS_MAX && (n + 2).checked_pow(d as u32).is_some_and(|t| t <= GRID_BUDGET) {
            n += 2;
        }
        Self { half_width: 3.5, points_per_axis: n, negativity_tolerance: default_negativity_tolerance() }
    }

    pub fn total_points(&self, d: usize) -> usize {
        self.points_per_axis.pow(d as u32)
    }

    pub fn axis(&self) -> Vec<f64> {
        let n = self.points_per_axis;
        if n == 1 {
            return vec![0.0];
        }
        let step = 2.0 * self.half_width / (n - 1) as f64;
        (0..n).map(|i| -self.half_width + step * i as f64).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.points_per_axis == 0 || !(self.half_width >= 0.0) || !(self.negativity_tolerance >= 0.0) {
            return Err(Error::InvalidParameter(format!("bad grid specification {self:?}")));
        }
        Ok(())
    }
}

/// Minimum of `f` over a grid and the first point attaining it.
pub fn grid_minimum(f: &ChaosVector, grid: &GridSpec) -> Result<(f64, Vec<f64>)> {
    grid.validate()?;
    let d = f.dimension();
    let axis = grid.axis();
    let n = axis.len();
    let point = |mut linear: usize| -> Vec<f64> {
        (0..d)
            .map(|_| {
                let x = axis[linear % n];
                linear /= n;
                x
            })
            .collect()
    };
    let (value, at) = (0..grid.total_points(d)).into_par_iter().map(|i| (f.eval_unchecked(&point(i)), i)).reduce(
        || (f64::INFINITY, usize::MAX),
        |a, b| {
            if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        },
    );
    Ok((value, point(at)))
}

/// One pass/fail line of an audit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub assumption: &'static str,
    pub quantity: &'static str,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct A1Report {
    pub l2_norm: f64,
    pub normalization: f64,
    pub min_on_grid: f64,
    pub argmin: Vec<f64>,
    pub verdicts: Vec<Verdict>,
}

pub fn check_a1(f: &ChaosVector, grid: &GridSpec) -> Result<A1Report> {
    let l2_norm = f.norm();
    let normalization = f.coeff_at(0);
    let (min_on_grid, argmin) = grid_minimum(f, grid)?;
    let floor = -grid.negativity_tolerance * l2_norm;
    let verdicts = vec![
        Verdict {
            assumption: "A1",
            quantity: "l2_norm",
            measured: l2_norm,
            threshold: f64::INFINITY,
            pass: l2_norm.is_finite(),
        },
        Verdict {
            assumption: "A1",
            quantity: "normalization_gap",
            measured: (normalization - 1.0).abs(),
            threshold: NORMALIZATION_TOL,
            pass: (normalization - 1.0).abs() <= NORMALIZATION_TOL,
        },
        Verdict {
            assumption: "A1",
            quantity: "min_on_grid",
            measured: min_on_grid,
            threshold: floor,
            pass: min_on_grid >= floor,
        },
    ];
    Ok(A1Report { l2_norm, normalization, min_on_grid, argmin, verdicts })
}

#[derive(Clone, Debug, Serialize)]
pub struct A2Report {
    pub min_eigenvalue_m: f64,
    pub trace_m: f64,
    pub verdicts: Vec<Verdict>,
}

/// `M = 2f₂ − f₁f₁ᵀ`, computed as `2G` so that `|M|_F² = 4|G|_F²` holds
/// exactly in floating point.
pub fn excess_matrix(f: &ChaosVector) -> Result<DMatrix<f64>> {
    Ok(f.kernel_view()?.excess_covariance())
}

pub fn check_a2(f: &ChaosVector) -> Result<A2Report> {
    let m = excess_matrix(f)?;
    let min_eigenvalue_m = symmetric_eigenvalues(&m).first().copied().unwrap_or(0.0);
    let trace_m = m.trace();
    let verdicts = vec![
        Verdict {
            assumption: "A2",
            quantity: "min_eigenvalue_M",
            measured: min_eigenvalue_m,
            threshold: -PSD_TOL,
            pass: min_eigenvalue_m >= -PSD_TOL,
        },
        Verdict {
            assumption: "A2",
            quantity: "trace_M",
            measured: trace_m,
            threshold: f64::INFINITY,
            pass: trace_m.is_finite(),
        },
    ];
    Ok(A2Report { min_eigenvalue_m, trace_m, verdicts })
}

#[derive(Clone, Debug, Serialize)]
pub struct A3Report {
    pub frobenius_sq_m: f64,
    pub spectral_radius_2g: f64,
    pub verdicts: Vec<Verdict>,
}

pub fn check_a3(f: &ChaosVector) -> Result<A3Report> {
    let m = excess_matrix(f)?;
    let frobenius_sq_m: f64 = m.iter().map(|x| x * x).sum();
    let spectral_radius_2g = symmetric_eigenvalues(&m).iter().fold(0.0f64, |r, x| r.max(x.abs()));
    let verdicts = vec![Verdict {
        assumption: "A3",
        quantity: "frobenius_sq_M",
        measured: frobenius_sq_m,
        threshold: 1.0,
        pass: frobenius_sq_m < 1.0,
    }];
    Ok(A3Report { frobenius_sq_m, spectral_radius_2g, verdicts })
}

/// All three audits on one density.
#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    pub l2_norm: f64,
    pub min_on_grid: f64,
    pub argmin: Vec<f64>,
    pub normalization: f64,
    pub min_eigenvalue_m: f64,
    pub trace_m: f64,
    pub frobenius_sq_m: f64,
    pub spectral_radius_2g: f64,
    pub grid: GridSpec,
    pub verdicts: Vec<Verdict>,
    pub all_pass: bool,
}

impl AssumptionReport {
    pub fn failures(&self) -> Vec<&Verdict> {
        self.verdicts.iter().filter(|v| !v.pass).collect()
    }

    pub fn passes(&self, assumption: &str) -> bool {
        self.verdicts.iter().filter(|v| v.assumption == assumption).all(|v| v.pass)
    }
}

pub fn audit(f: &ChaosVector, grid: &GridSpec) -> Result<AssumptionReport> {
    let a1 = check_a1(f, grid)?;
    let a2 = check_a2(f)?;
    let a3 = check_a3(f)?;
    let a3_pass = a3.verdicts.iter().all(|v| v.pass);
    assert!(!a3_pass || a3.spectral_radius_2g < 1.0, "A3 passed with spectral radius {} of 2G", a3.spectral_radius_2g);
    let verdicts: Vec<Verdict> = a1.verdicts.into_iter().chain(a2.verdicts).chain(a3.verdicts).collect();
    let all_pass = verdicts.iter().all(|v| v.pass);
    Ok(AssumptionReport {
        l2_norm: a1.l2_norm,
        min_on_grid: a1.min_on_grid,
        argmin: a1.argmin,
        normalization: a1.normalization,
        min_eigenvalue_m: a2.min_eigenvalue_m,
        trace_m: a2.trace_m,
        frobenius_sq_m: a3.frobenius_sq_m,
        spectral_radius_2g: a3.spectral_radius_2g,
        grid: *grid,
        verdicts,
        all_pass,
    })
}

/// Both sides of the variance identity for one direction `h`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct VariancePairing {
    pub formula_value: f64,
    /// `None` when the dimension is above [`QUADRATURE_MAX_DIM`].
    pub quadrature_value: Option<f64>,
}

impl VariancePairing {
    pub fn relative_difference(&self) -> Option<f64> {
        self.quadrature_value.map(|q| (q - self.formula_value).abs() / self.formula_value.abs().max(f64::MIN_POSITIVE))
    }
}

pub fn variance_pairing(f: &ChaosVector, h: &[f64]) -> Result<VariancePairing> {
    let d = f.dimension();
    if h.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: h.len() });
    }
    let m = excess_matrix(f)?;
    let hv = nalgebra::DVector::from_column_slice(h);
    let formula_value = hv.dot(&(&m * &hv)) + hv.dot(&hv);
    let quadrature_value = (d <= QUADRATURE_MAX_DIM).then(|| {
        let rule = gauss_hermite(f.max_degree() + 3);
        let proj = |w: &[f64]| w.iter().zip(h).map(|(a, b)| a * b).sum::<f64>();
        let first = tensor_integrate(d, &rule, |w| proj(w) * f.eval_unchecked(w));
        let second = tensor_integrate(d, &rule, |w| proj(w).powi(2) * f.eval_unchecked(w));
        second - first * first
    });
    Ok(VariancePairing { formula_value, quadrature_value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{GaussianSpace, MultiIndex};
    use crate::wick::stochastic_exponential;
    use approx::assert_relative_eq;

    fn he2(d1_coeff: f64) -> ChaosVector {
        let s = GaussianSpace::new(1, 4).unwrap();
        ChaosVector::from_terms(&s, &[(MultiIndex::new(vec![0]), 1.0), (MultiIndex::new(vec![2]), d1_coeff)]).unwrap()
    }

    #[test]
    fn default_grid_sizes() {
        assert_eq!(GridSpec::default_for(1).points_per_axis, 701);
        assert_eq!(GridSpec::default_for(2).points_per_axis, 447);
        assert_eq!(GridSpec::default_for(8).points_per_axis, 3);
        assert!(GridSpec::default_for(3).axis().contains(&0.0));
    }

    #[test]
    fn a1_examples() {
        let s = GaussianSpace::new(1, 20).unwrap();
        let grid = GridSpec::default_for(1);
        let r = check_a1(&ChaosVector::one(&s), &grid).unwrap();
        assert_eq!((r.l2_norm, r.normalization, r.min_on_grid), (1.0, 1.0, 1.0));
        assert!(r.verdicts.iter().all(|v| v.pass));

        let e = stochastic_exponential(&[0.5], &s).unwrap();
        let r = check_a1(&e, &grid).unwrap();
        assert_relative_eq!(r.l2_norm, 0.125f64.exp(), max_relative = 1e-12);
        assert_eq!(r.normalization, 1.0);
        assert!(r.min_on_grid > 0.0);

        let mut bad = ChaosVector::one(&s);
        bad.set_coeff(&MultiIndex::new(vec![0]), 0.9).unwrap();
        let r = check_a1(&bad, &grid).unwrap();
        assert!(!r.verdicts[1].pass);
    }

    #[test]
    fn a2_a3_examples() {
        let s = GaussianSpace::new(1, 4).unwrap();
        let r = check_a2(&ChaosVector::one(&s)).unwrap();
        assert_eq!((r.min_eigenvalue_m, r.trace_m), (0.0, 0.0));
        assert!(r.verdicts.iter().all(|v| v.pass));

        let f = he2(0.1);
        let r = check_a2(&f).unwrap();
        assert_relative_eq!(r.min_eigenvalue_m, 0.2, max_relative = 1e-14);
        assert_relative_eq!(r.trace_m, 0.2, max_relative = 1e-14);
        let r = check_a3(&f).unwrap();
        assert_relative_eq!(r.frobenius_sq_m, 0.04, max_relative = 1e-14);
        assert!(r.verdicts[0].pass);

        let e = stochastic_exponential(&[0.4], &s).unwrap();
        let r = check_a2(&e).unwrap();
        assert!(r.min_eigenvalue_m.abs() < 1e-16 && r.verdicts[0].pass);

        let s2 = GaussianSpace::new(2, 4).unwrap();
        let g = DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.0, 0.3]);
        let f = ChaosVector::from_kernels(&s2, &[0.0, 0.0], &g).unwrap();
        let r = check_a3(&f).unwrap();
        assert_relative_eq!(r.frobenius_sq_m, 0.72, max_relative = 1e-14);
        assert_relative_eq!(r.spectral_radius_2g, 0.6, max_relative = 1e-14);
        assert!(r.verdicts[0].pass);
    }

    #[test]
    fn frobenius_is_four_g_squared_exactly() {
        let s = GaussianSpace::new(3, 3).unwrap();
        let f = ChaosVector::from_coeffs(&s, (0..s.len()).map(|i| 1.0 / (i as f64 + 1.0).sqrt()).collect()).unwrap();
        let g = f.kernel_view().unwrap().g2;
        let four: f64 = g.iter().map(|x| x * x).sum::<f64>() * 4.0;
        assert_eq!(check_a3(&f).unwrap().frobenius_sq_m, four);
    }

    #[test]
    fn variance_examples() {
        let s = GaussianSpace::new(1, 6).unwrap();
        let v = variance_pairing(&ChaosVector::one(&s), &[1.0]).unwrap();
        assert_relative_eq!(v.formula_value, 1.0);
        assert_relative_eq!(v.quadrature_value.unwrap(), 1.0, max_relative = 1e-12);

        let v = variance_pairing(&he2(0.1), &[1.0]).unwrap();
        assert_relative_eq!(v.formula_value, 1.2, max_relative = 1e-14);
        assert_relative_eq!(v.quadrature_value.unwrap(), 1.2, max_relative = 1e-12);

        let e = stochastic_exponential(&[0.4], &s).unwrap();
        let v = variance_pairing(&e, &[1.0]).unwrap();
        assert_relative_eq!(v.formula_value, 1.0, max_relative = 1e-14);
        assert_relative_eq!(v.quadrature_value.unwrap(), 1.0, max_relative = 1e-12);

        let s4 = GaussianSpace::new(4, 2).unwrap();
        let v = variance_pairing(&ChaosVector::one(&s4), &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(v.quadrature_value.is_none());
    }

    #[test]
    fn audit_collects_verdicts() {
        let r = audit(&he2(0.1), &GridSpec::default_for(1)).unwrap();
        assert!(r.all_pass);
        assert_eq!(r.verdicts.len(), 6);
        let r = audit(&he2(1.2), &GridSpec::default_for(1)).unwrap();
        assert!(!r.all_pass && !r.passes("A1") && r.passes("A2"));
    }

    proptest::proptest! {
        #[test]
        fn a3_pass_implies_admissible_limit(
            coeffs in proptest::collection::vec(-0.6f64..0.6, 5),
        ) {
            let s = GaussianSpace::new(2, 2).unwrap();
            let mut c = vec![1.0];
            c.extend(coeffs);
            let f = ChaosVector::from_coeffs(&s, c).unwrap();
            let grid = GridSpec { half_width: 3.0, points_per_axis: 21, negativity_tolerance: 1e-6 };
            let r = audit(&f, &grid).unwrap();
            if r.passes("A3") {
                proptest::prop_assert!(r.spectral_radius_2g < 1.0);
            }
            let again = audit(&f, &grid).unwrap();
            proptest::prop_assert_eq!(
                serde_json::to_string(&r).unwrap(),
                serde_json::to_string(&again).unwrap()
            );
        }
    }
}
