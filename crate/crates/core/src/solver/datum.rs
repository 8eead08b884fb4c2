use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::noise::bump_with_gradient;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub center: [f64; 3],
    pub radius: f64,
    pub amplitude: f64,
}

/// Initial datum profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum DatumSpec {
    Constant {
        value: f64,
    },
    /// `floor + Σ amplitude·bump`, strictly positive when `floor > 0` and amplitudes are `≥ 0`.
    FloorBumps {
        floor: f64,
        bumps: Vec<BumpSpec>,
    },
    /// `mean + amplitude·Π_a cos(π m_a ξ_a / L)`.
    Cosine {
        mean: f64,
        amplitude: f64,
        mode: [i64; 3],
    },
}

impl Default for DatumSpec {
    fn default() -> Self {
        DatumSpec::FloorBumps {
            floor: 1.0,
            bumps: vec![BumpSpec {
                center: [0.0; 3],
                radius: 3.0,
                amplitude: 1.0,
            }],
        }
    }
}

impl DatumSpec {
    pub fn build(&self, grid: &Grid) -> Result<ScalarField> {
        let d = grid.dim();
        match self {
            DatumSpec::Constant { value } => Ok(ScalarField::constant(*grid, *value)),
            DatumSpec::FloorBumps { floor, bumps } => {
                if bumps.iter().any(|b| !(b.radius > 0.0)) {
                    return Err(Error::Param("datum bump radius must be positive".into()));
                }
                ScalarField::from_fn(*grid, |xi| {
                    floor
                        + bumps
                            .iter()
                            .map(|b| b.amplitude * bump_with_gradient(xi, b.center, b.radius, d).0)
                            .sum::<f64>()
                })
            }
            DatumSpec::Cosine {
                mean,
                amplitude,
                mode,
            } => {
                let k0 = grid.base_wavenumber();
                ScalarField::from_fn(*grid, |xi| {
                    let mut c = 1.0;
                    for a in 0..d {
                        c *= (k0 * mode[a] as f64 * xi[a]).cos();
                    }
                    mean + amplitude * c
                })
            }
        }
    }
}
