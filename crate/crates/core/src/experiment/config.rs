//! Versioned JSON configuration. Unknown fields are rejected everywhere.

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::audit::GridSpec;
use crate::basis::{GaussianSpace, MultiIndex};
use crate::chaos::ChaosVector;
use crate::error::{Error, Result};
use crate::llt::DistanceSpec;
use crate::measures::{gaussian_cov, product_density, rank_one_quadratic, shift_mixture, WeightedShifts};
use crate::rng::derive_seed;
use crate::sde::{simulate_drift_shifts, Drift, PathGrid};
use crate::wick::stochastic_exponential;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llt: Option<LltSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sde: Option<SdeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<XiSpec>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub dimension: usize,
    pub max_degree: usize,
}

impl SpaceSpec {
    pub fn build(&self) -> Result<Arc<GaussianSpace>> {
        GaussianSpace::new(self.dimension, self.max_degree)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub index: Vec<u32>,
    pub value: f64,
}

/// A density by constructor name and parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    One {},
    /// Raw coefficients in basis order.
    Coefficients {
        coeffs: Vec<f64>,
    },
    Terms {
        terms: Vec<TermSpec>,
    },
    Exponential {
        shift: Vec<f64>,
    },
    ShiftMixture {
        weights: Vec<f64>,
        shifts: Vec<Vec<f64>>,
    },
    GaussianCov {
        g2: Vec<Vec<f64>>,
    },
    RankOneQuadratic {
        g: Vec<f64>,
    },
    /// One-dimensional coefficient lists, one per axis.
    Product {
        factors: Vec<Vec<f64>>,
    },
    /// Empirical drift measure on a grid with `space.dimension` steps.
    Sde {
        drift: Drift,
        paths: usize,
    },
}

/// Side information about a constructed density.
#[derive(Clone, Debug, Default, Serialize)]
pub struct DensityExtras {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift_variance_trace: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exp_integrability: Option<f64>,
}

impl DensityExtras {
    fn from_shifts(nu: &WeightedShifts) -> Self {
        Self { shift_variance_trace: Some(nu.shift_variance_trace()), exp_integrability: Some(nu.exp_integrability()) }
    }
}

pub(crate) fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config("matrix must be square and nonempty".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl DensitySpec {
    pub fn build(&self, space: &Arc<GaussianSpace>, master_seed: u64) -> Result<(ChaosVector, DensityExtras)> {
        let plain = |f: ChaosVector| Ok((f, DensityExtras::default()));
        match self {
            DensitySpec::One {} => plain(ChaosVector::one(space)),
            DensitySpec::Coefficients { coeffs } => plain(ChaosVector::from_coeffs(space, coeffs.clone())?),
            DensitySpec::Terms { terms } => {
                let terms: Vec<(MultiIndex, f64)> =
                    terms.iter().map(|t| (MultiIndex::new(t.index.clone()), t.value)).collect();
                plain(ChaosVector::from_terms(space, &terms)?)
            }
            DensitySpec::Exponential { shift } => plain(stochastic_exponential(shift, space)?),
            DensitySpec::ShiftMixture { weights, shifts } => {
                let nu = WeightedShifts::new(weights.clone(), shifts.clone())?;
                Ok((shift_mixture(&nu, space)?, DensityExtras::from_shifts(&nu)))
            }
            DensitySpec::GaussianCov { g2 } => plain(gaussian_cov(&matrix(g2)?, space)?),
            DensitySpec::RankOneQuadratic { g } => plain(rank_one_quadratic(g, space)?),
            DensitySpec::Product { factors } => {
                let factors = factors
                    .iter()
                    .map(|c| {
                        if c.is_empty() {
                            return Err(Error::Config("empty product factor".into()));
                        }
                        ChaosVector::from_coeffs(&GaussianSpace::new(1, c.len() - 1)?, c.clone())
                    })
                    .collect::<Result<Vec<_>>>()?;
                plain(product_density(&factors, space)?)
            }
            DensitySpec::Sde { drift, paths } => {
                let grid = PathGrid::new(space.dimension())?;
                let nu = simulate_drift_shifts(&(*drift).into(), grid, *paths, derive_seed(master_seed, "sde"))?;
                Ok((shift_mixture(&nu, space)?, DensityExtras::from_shifts(&nu)))
            }
        }
    }
}

/// `∫|f − g|` method; Monte-Carlo seeds always derive from the master seed.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistanceConfig {
    Auto {
        #[serde(default = "default_mc_samples")]
        samples: usize,
    },
    Quadrature {
        nodes: usize,
    },
    MonteCarlo {
        samples: usize,
    },
}

fn default_mc_samples() -> usize {
    100_000
}

impl Default for DistanceConfig {
    fn default() -> Self {
        DistanceConfig::Auto { samples: default_mc_samples() }
    }
}

impl DistanceConfig {
    pub fn resolve(&self, d: usize, master_seed: u64) -> DistanceSpec {
        let seed = derive_seed(master_seed, "l1-distance");
        match *self {
            DistanceConfig::Auto { samples } => DistanceSpec::auto(d, samples, seed),
            DistanceConfig::Quadrature { nodes } => DistanceSpec::Quadrature { nodes },
            DistanceConfig::MonteCarlo { samples } => DistanceSpec::MonteCarlo { samples, seed },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LltSpec {
    pub alpha: f64,
    pub n_values: Vec<usize>,
    #[serde(default)]
    pub distance: DistanceConfig,
    /// Writes wall times into the `seconds` column (breaks byte-identical
    /// re-runs); otherwise the column is 0 and times go to the manifest.
    #[serde(default)]
    pub record_timing: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSpec {
    #[serde(default = "default_validate_dimension")]
    pub dimension: usize,
    #[serde(default = "default_validate_degree")]
    pub max_degree: usize,
    #[serde(default = "default_mc_samples")]
    pub convolution_samples: usize,
    #[serde(default = "default_young_pairs")]
    pub young_pairs: usize,
    /// Negates the reference side of the named identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inject_sign_error: Option<String>,
}

fn default_validate_dimension() -> usize {
    2
}

fn default_validate_degree() -> usize {
    8
}

fn default_young_pairs() -> usize {
    50
}

impl Default for ValidateSpec {
    fn default() -> Self {
        Self {
            dimension: default_validate_dimension(),
            max_degree: default_validate_degree(),
            convolution_samples: default_mc_samples(),
            young_pairs: default_young_pairs(),
            inject_sign_error: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeSpec {
    pub drift: Drift,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    pub steps: usize,
    pub paths: usize,
    #[serde(default = "default_sde_degree")]
    pub max_degree: usize,
    #[serde(default = "default_novikov_ceiling")]
    pub novikov_ceiling: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llt: Option<LltSpec>,
}

fn default_sde_degree() -> usize {
    4
}

fn default_novikov_ceiling() -> f64 {
    crate::sde::NOVIKOV_CEILING
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XiSpec {
    pub g2: Vec<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn require_space(&self) -> Result<SpaceSpec> {
        self.space.ok_or_else(|| Error::Config("missing field `space`".into()))
    }

    pub fn require_density(&self) -> Result<&DensitySpec> {
        self.density.as_ref().ok_or_else(|| Error::Config("missing field `density`".into()))
    }

    pub fn grid_for(&self, d: usize) -> GridSpec {
        self.grid.unwrap_or_else(|| GridSpec::default_for(d))
    }
}
