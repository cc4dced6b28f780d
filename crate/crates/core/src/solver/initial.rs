//! Analytic initial densities.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::ValidationError;
use crate::grid::{ScalarField, StructuredGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialField {
    Constant {
        value: f64,
    },
    /// `background + amplitude·exp(−|x − center|²/(2·width²))`.
    Gaussian {
        amplitude: f64,
        center: [f64; 2],
        width: f64,
        #[serde(default)]
        background: f64,
    },
    /// `mean + amplitude·cos(kx·πx/Lx)·cos(ky·πy/Ly)`.
    Cosine {
        #[serde(default)]
        mean: f64,
        amplitude: f64,
        #[serde(default)]
        kx: f64,
        #[serde(default)]
        ky: f64,
    },
}

impl Default for InitialField {
    fn default() -> Self {
        InitialField::Constant { value: 0.0 }
    }
}

impl InitialField {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let finite = match *self {
            InitialField::Constant { value } => value.is_finite(),
            InitialField::Gaussian {
                amplitude,
                center,
                width,
                background,
            } => {
                if !(width > 0.0) {
                    return Err(ValidationError::new("initial data", "gaussian width must be positive"));
                }
                [amplitude, center[0], center[1], background].iter().all(|v| v.is_finite())
            }
            InitialField::Cosine {
                mean,
                amplitude,
                kx,
                ky,
            } => [mean, amplitude, kx, ky].iter().all(|v| v.is_finite()),
        };
        if finite {
            Ok(())
        } else {
            Err(ValidationError::new("initial data", "parameters must be finite"))
        }
    }

    pub fn eval(&self, x: f64, y: f64, lx: f64, ly: f64) -> f64 {
        match *self {
            InitialField::Constant { value } => value,
            InitialField::Gaussian {
                amplitude,
                center,
                width,
                background,
            } => {
                let r2 = (x - center[0]).powi(2) + (y - center[1]).powi(2);
                background + amplitude * (-r2 / (2.0 * width * width)).exp()
            }
            InitialField::Cosine {
                mean,
                amplitude,
                kx,
                ky,
            } => mean + amplitude * (kx * PI * x / lx).cos() * (ky * PI * y / ly).cos(),
        }
    }

    /// Cell-center samples; negative values are kept (callers clamp).
    pub fn sample(&self, grid: &StructuredGrid) -> ScalarField {
        let (lx, ly) = (grid.lx(), grid.ly());
        ScalarField::from_fn(grid, |x, y| self.eval(x, y, lx, ly))
    }
}
