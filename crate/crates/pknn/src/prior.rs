//! Prior over the interaction strength.

use crate::{Error, Result};
use statrs::function::gamma::ln_gamma;

/// Gamma prior on `beta`, in shape/scale parameterization (mean =
/// shape * scale). The default `shape = 2, scale = 10` is nearly flat over
/// the beta ranges that matter here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPrior {
    pub shape: f64,
    pub scale: f64,
}

impl GammaPrior {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite() && scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "gamma prior requires positive finite shape and scale, got ({shape}, {scale})"
            )));
        }
        Ok(Self { shape, scale })
    }

    /// Log density; negative infinity for `x <= 0`.
    pub fn log_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        (self.shape - 1.0) * x.ln() - x / self.scale
            - self.shape * self.scale.ln()
            - ln_gamma(self.shape)
    }

    /// Density mode: `(shape - 1) * scale` for shape >= 1, else 0.
    pub fn mode(&self) -> f64 {
        ((self.shape - 1.0) * self.scale).max(0.0)
    }
}

impl Default for GammaPrior {
    fn default() -> Self {
        Self {
            shape: 2.0,
            scale: 10.0,
        }
    }
}
