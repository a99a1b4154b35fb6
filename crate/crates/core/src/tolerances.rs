use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matops::{CareOptions, SignOptions};

/// Environment variable selecting a tolerance profile (`default`, `strict`,
/// `relaxed`). Values from a config file's `[tolerances]` section are applied
/// on top of the profile.
pub const PROFILE_ENV: &str = "AGC_TOLERANCE_PROFILE";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Sign iteration stop: `||Z_{k+1} − Z_k|| < sign_rel * ||Z_k||`.
    pub sign_rel: f64,
    pub sign_max_iterations: usize,
    /// CARE residual bound, scaled by `1 + ||P||²`.
    pub care_residual: f64,
    /// Eigenvalue tolerance for definiteness verdicts.
    pub definiteness: f64,
    /// Final disagreement must fall below `consensus_rel * (initial + 1)`.
    pub consensus_rel: f64,
    /// Realised cost may exceed the bound by `bound_rel * bound + bound_rel`.
    pub bound_rel: f64,
    /// Allowed dip between consecutive weight samples.
    pub weight_monotone: f64,
    /// Final adaptive-weight rate below which weights count as converged.
    pub weight_rate: f64,
    /// Bound integrand per unit time below which the horizon counts as long
    /// enough.
    pub tail_integrand: f64,
    /// Absolute tolerance on the consensus-function tracking error.
    pub tracking: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            sign_rel: 1e-12,
            sign_max_iterations: 100,
            care_residual: 1e-7,
            definiteness: 1e-9,
            consensus_rel: 1e-2,
            bound_rel: 1e-6,
            weight_monotone: 1e-12,
            weight_rate: 1e-8,
            tail_integrand: 1e-10,
            tracking: 1e-2,
        }
    }
}

impl Tolerances {
    pub fn profile(name: &str) -> Result<Self> {
        let base = Self::default();
        match name {
            "default" => Ok(base),
            "strict" => Ok(Self {
                care_residual: 1e-9,
                consensus_rel: 1e-3,
                bound_rel: 1e-9,
                tracking: 1e-3,
                ..base
            }),
            "relaxed" => Ok(Self {
                care_residual: 1e-5,
                consensus_rel: 5e-2,
                bound_rel: 1e-4,
                weight_rate: 1e-4,
                tail_integrand: 1e-4,
                tracking: 5e-2,
                ..base
            }),
            other => Err(Error::Config(format!(
                "unknown tolerance profile '{other}' (expected default, strict or relaxed)"
            ))),
        }
    }

    /// Profile named by [`PROFILE_ENV`], or the defaults when unset.
    pub fn from_env() -> Result<Self> {
        match std::env::var(PROFILE_ENV) {
            Ok(name) => Self::profile(name.trim()),
            Err(_) => Ok(Self::default()),
        }
    }

    pub fn care_options(&self) -> CareOptions {
        CareOptions {
            sign: SignOptions {
                rel_tol: self.sign_rel,
                max_iterations: self.sign_max_iterations,
            },
            residual_tol: self.care_residual,
            definiteness_tol: self.definiteness,
        }
    }
}
