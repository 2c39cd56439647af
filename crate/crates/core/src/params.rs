//! Rate constants of the Λ system and the EIT/Autler-Townes regime labels.
//!
//! All five rates share one frequency unit chosen by the caller. Widths are
//! full widths at half maximum and no factors of 2π are applied anywhere.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coupling Rabi frequency, homogeneous decay rates and inhomogeneous widths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    /// Coupling-field Rabi frequency Ω.
    pub omega: f64,
    /// Spin (ground-ground) decay rate γ21.
    pub gamma21: f64,
    /// Optical decay rate γ31.
    pub gamma31: f64,
    /// Optical inhomogeneous FWHM.
    pub sigma_opt: f64,
    /// Spin inhomogeneous FWHM, laser linewidth included in quadrature.
    pub sigma_spin: f64,
}

impl RateParams {
    pub fn new(
        omega: f64,
        gamma21: f64,
        gamma31: f64,
        sigma_opt: f64,
        sigma_spin: f64,
    ) -> Result<Self> {
        let p = RateParams {
            omega,
            gamma21,
            gamma31,
            sigma_opt,
            sigma_spin,
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks that every rate is finite and nonnegative.
    ///
    /// Zero decay rates are accepted here; the closed forms use them for the
    /// σ ≫ γ limit and the numeric integrator adds its own stricter checks.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega", self.omega),
            ("gamma21", self.gamma21),
            ("gamma31", self.gamma31),
            ("sigma_opt", self.sigma_opt),
            ("sigma_spin", self.sigma_spin),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} is not finite ({v})")));
            }
            if v < 0.0 {
                return Err(Error::invalid(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn with_omega(self, omega: f64) -> Self {
        RateParams { omega, ..self }
    }

    pub fn with_sigma_spin(self, sigma_spin: f64) -> Self {
        RateParams { sigma_spin, ..self }
    }

    /// Folds the Lorentzian inhomogeneous widths into the homogeneous rates
    /// and zeroes them.
    pub fn broadened(self) -> Self {
        RateParams {
            omega: self.omega,
            gamma21: self.gamma21 + self.sigma_spin,
            gamma31: self.gamma31 + self.sigma_opt,
            sigma_opt: 0.0,
            sigma_spin: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "EIT")]
    Eit,
    Crossover,
    AutlerTownes,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Eit => "EIT",
            Regime::Crossover => "Crossover",
            Regime::AutlerTownes => "AutlerTownes",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "EIT" => Ok(Regime::Eit),
            "Crossover" => Ok(Regime::Crossover),
            "AutlerTownes" => Ok(Regime::AutlerTownes),
            other => Err(Error::Schema(format!("unknown regime label `{other}`"))),
        }
    }
}

/// Ω/σ_opt boundaries between the regimes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeThresholds {
    pub lower: f64,
    pub upper: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        RegimeThresholds {
            lower: 0.5,
            upper: 2.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_and_nan() {
        assert!(RateParams::new(-1.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(RateParams::new(1.0, f64::NAN, 1.0, 1.0, 0.0).is_err());
        assert!(RateParams::new(1.0, 0.0, 0.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn regime_labels_round_trip() {
        for r in [Regime::Eit, Regime::Crossover, Regime::AutlerTownes] {
            assert_eq!(r.to_string().parse::<Regime>().unwrap(), r);
        }
    }
}
