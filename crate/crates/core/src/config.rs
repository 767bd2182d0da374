//! Flat key-value parameter files.
//!
//! ```toml
//! omega_c = 1000.0
//! delta = 10.0        # or: lambda = 0.1
//! g = 1.0
//! gamma_scale = 1.0
//! zero_detuning_sign = "above"
//! hop_j = 0.5
//! ```

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::jch2::TwoSiteParams;
use crate::model::{DetuningApproach, SystemParams};

/// Every key is optional so files, flags and defaults can be layered.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamConfig {
    pub omega_c: Option<f64>,
    pub delta: Option<f64>,
    pub lambda: Option<f64>,
    pub g: Option<f64>,
    pub gamma_scale: Option<f64>,
    pub zero_detuning_sign: Option<DetuningApproach>,
    pub hop_j: Option<f64>,
}

impl ParamConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Keys set in `over` win. Setting either of delta/lambda clears the other.
    pub fn overlay(self, over: &ParamConfig) -> ParamConfig {
        let (delta, lambda) = if over.delta.is_some() || over.lambda.is_some() {
            (over.delta, over.lambda)
        } else {
            (self.delta, self.lambda)
        };
        ParamConfig {
            omega_c: over.omega_c.or(self.omega_c),
            delta,
            lambda,
            g: over.g.or(self.g),
            gamma_scale: over.gamma_scale.or(self.gamma_scale),
            zero_detuning_sign: over.zero_detuning_sign.or(self.zero_detuning_sign),
            hop_j: over.hop_j.or(self.hop_j),
        }
    }

    /// Builds validated parameters. Exact resonance needs an explicit approach sign
    /// when `strict_resonance` is set.
    pub fn system_params(&self, strict_resonance: bool) -> Result<SystemParams> {
        let omega_c = self.omega_c.ok_or_else(|| missing("omega_c"))?;
        let g = self.g.ok_or_else(|| missing("g"))?;
        let delta = match (self.delta, self.lambda) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidParameter("give either delta or lambda, not both".into()))
            }
            (Some(d), None) => d,
            (None, Some(l)) => {
                if l == 0.0 || !l.is_finite() {
                    return Err(Error::InvalidParameter(format!("lambda must be finite and non-zero, got {l}")));
                }
                g / l
            }
            (None, None) => return Err(missing("delta or lambda")),
        };
        if strict_resonance && delta == 0.0 && self.zero_detuning_sign.is_none() {
            return Err(Error::InvalidParameter(
                "delta = 0 needs an explicit approach (above or below)".into(),
            ));
        }
        let mut p = SystemParams::new(omega_c, delta, g)?
            .with_approach(self.zero_detuning_sign.unwrap_or_default());
        if let Some(gamma) = self.gamma_scale {
            p = p.with_gamma_scale(gamma)?;
        }
        Ok(p)
    }

    pub fn two_site_params(&self, strict_resonance: bool) -> Result<TwoSiteParams> {
        let site = self.system_params(strict_resonance)?;
        TwoSiteParams::new(site, self.hop_j.ok_or_else(|| missing("hop_j"))?)
    }
}

fn missing(key: &str) -> Error {
    Error::InvalidParameter(format!("missing parameter: {key}"))
}
