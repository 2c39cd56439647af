//! Closed-form probe susceptibility of a Λ system and the EIT width and
//! visibility expressions derived from it.
//!
//! The susceptibility is returned up to an overall constant fixed to 1, so
//! only its shape is meaningful. Absolute scaling lives in
//! [`crate::transmission`].

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{RateParams, Regime, RegimeThresholds};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Homogeneous kernel written in terms of the complex spin and optical
/// factors `a = γ21 − 2iδ` and `g = γ31 − 2iΔ`: `2i·a / (Ω² + a·g)`.
///
/// Passing complex detunings (through `a` or `g`) evaluates the kernel off the
/// real axis, which is how Lorentzian profiles are collapsed by residues.
#[inline]
pub(crate) fn kernel(omega_sq: f64, a: Complex64, g: Complex64) -> Complex64 {
    2.0 * I * a / (omega_sq + a * g)
}

/// Homogeneous susceptibility at two-photon detuning `delta` and probe
/// detuning `probe_detuning`.
pub fn chi_homogeneous(delta: f64, probe_detuning: f64, p: &RateParams) -> Result<Complex64> {
    p.validate()?;
    if !delta.is_finite() || !probe_detuning.is_finite() {
        return Err(Error::invalid("detunings must be finite"));
    }
    let num = Complex64::new(4.0 * delta, 2.0 * p.gamma21);
    let den = p.omega * p.omega
        + Complex64::new(p.gamma21, -2.0 * delta)
            * Complex64::new(p.gamma31, -2.0 * probe_detuning);
    if den.norm() == 0.0 {
        return Err(Error::invalid(
            "susceptibility denominator vanishes; need a nonzero decay rate or Rabi frequency",
        ));
    }
    Ok(num / den)
}

/// Susceptibility of an ensemble with Lorentzian optical and spin profiles
/// (FWHM `sigma_opt`, `sigma_spin`), with the control field resonant on the
/// center of the optical line.
///
/// Identical to [`chi_homogeneous`] at `Δ = δ` after the replacements
/// `γ21 → γ21 + σ_spin` and `γ31 → γ31 + σ_opt`.
pub fn chi_lorentzian_inhomogeneous(delta: f64, p: &RateParams) -> Result<Complex64> {
    p.validate()?;
    chi_homogeneous(delta, delta, &p.broadened())
}

/// First-order EIT width with the flag for when the σ_spin expansion is not
/// trustworthy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthEstimate {
    pub width: f64,
    /// `(√(σ_opt² + 4Ω²) − σ_opt)/2`, the σ_spin = 0 width.
    pub leading: f64,
    /// False when σ_spin exceeds half of the leading term.
    pub reliable: bool,
}

/// σ_spin above this fraction of the leading width marks the first-order
/// correction as unreliable.
pub const EXPANSION_LIMIT: f64 = 0.5;

/// FWHM of the transparency window, exact at σ_spin = 0 and first order in
/// σ_spin otherwise (σ ≫ γ limit).
pub fn eit_width_closed(p: &RateParams) -> Result<WidthEstimate> {
    p.validate()?;
    if p.sigma_opt <= 0.0 || p.omega <= 0.0 {
        return Err(Error::invalid(
            "closed-form width needs sigma_opt > 0 and omega > 0",
        ));
    }
    let (om2, so, ss) = (p.omega * p.omega, p.sigma_opt, p.sigma_spin);
    let root = (so * so + 4.0 * om2).sqrt();
    let leading = leading_width(p.omega, so);
    let correction = 1.0 + ss * (so * so - om2) / (om2 * root);
    Ok(WidthEstimate {
        width: leading * correction,
        leading,
        reliable: ss <= EXPANSION_LIMIT * leading,
    })
}

/// `(√(σ_opt² + 4Ω²) − σ_opt)/2`, evaluated without cancellation at small Ω.
pub fn leading_width(omega: f64, sigma_opt: f64) -> f64 {
    let om2 = omega * omega;
    // (√(s²+4Ω²) − s)/2 == 2Ω²/(√(s²+4Ω²) + s)
    2.0 * om2 / ((sigma_opt * sigma_opt + 4.0 * om2).sqrt() + sigma_opt)
}

/// Width asymptotes: `Ω²/σ_opt + σ_spin` deep in the EIT regime and
/// `Ω − (σ_opt + σ_spin)/2` deep in the Autler-Townes regime.
pub fn eit_width_asymptotic(p: &RateParams, regime: Regime) -> Result<f64> {
    p.validate()?;
    match regime {
        Regime::Eit => {
            if p.sigma_opt <= 0.0 {
                return Err(Error::invalid("EIT asymptote needs sigma_opt > 0"));
            }
            Ok(p.omega * p.omega / p.sigma_opt + p.sigma_spin)
        }
        Regime::AutlerTownes => Ok(p.omega - 0.5 * (p.sigma_opt + p.sigma_spin)),
        Regime::Crossover => Err(Error::invalid(
            "no asymptotic width in the crossover regime",
        )),
    }
}

/// Residual-definition visibility `Ω²/(Ω² + σ_opt σ_spin)`.
pub fn eit_visibility_closed(p: &RateParams) -> Result<f64> {
    p.validate()?;
    let om2 = p.omega * p.omega;
    let prod = p.sigma_opt * p.sigma_spin;
    if om2 == 0.0 && prod == 0.0 {
        return Err(Error::Indeterminate);
    }
    Ok(om2 / (om2 + prod))
}

pub fn classify_regime(p: &RateParams) -> Result<Regime> {
    classify_regime_with(p, RegimeThresholds::default())
}

pub fn classify_regime_with(p: &RateParams, t: RegimeThresholds) -> Result<Regime> {
    p.validate()?;
    if p.sigma_opt <= 0.0 {
        return Err(Error::invalid("regime classification needs sigma_opt > 0"));
    }
    let ratio = p.omega / p.sigma_opt;
    Ok(if ratio < t.lower {
        Regime::Eit
    } else if ratio > t.upper {
        Regime::AutlerTownes
    } else {
        Regime::Crossover
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormMetrics {
    pub width: f64,
    pub visibility: f64,
    pub regime: Regime,
}

pub fn closed_form_metrics(p: &RateParams) -> Result<ClosedFormMetrics> {
    Ok(ClosedFormMetrics {
        width: eit_width_closed(p)?.width,
        visibility: eit_visibility_closed(p)?,
        regime: classify_regime(p)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rp(omega: f64, g21: f64, g31: f64, so: f64, ss: f64) -> RateParams {
        RateParams::new(omega, g21, g31, so, ss).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn homogeneous_examples() {
        let z = chi_homogeneous(0.0, 0.0, &rp(2.0, 0.0, 2.0, 0.0, 0.0)).unwrap();
        assert_eq!(z, Complex64::new(0.0, 0.0));

        // 2i/(4+2)
        let z = chi_homogeneous(0.0, 0.0, &rp(2.0, 1.0, 2.0, 0.0, 0.0)).unwrap();
        assert!(close(z.re, 0.0, 1e-15) && close(z.im, 1.0 / 3.0, 1e-15));
    }

    #[test]
    fn zero_rabi_is_optical_lorentzian() {
        let p = rp(0.0, 1.0, 5.0, 0.0, 0.0);
        for &d in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
            let z = chi_homogeneous(d, d, &p).unwrap();
            let expect = 2.0 * I / Complex64::new(5.0, -2.0 * d);
            assert!((z - expect).norm() < 1e-14);
        }
        assert!(close(chi_homogeneous(0.0, 0.0, &p).unwrap().im, 0.4, 1e-15));
    }

    #[test]
    fn vanishing_denominator_is_rejected() {
        assert!(chi_homogeneous(0.0, 0.0, &rp(0.0, 0.0, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn lorentzian_examples() {
        let p = rp(1.3, 0.2, 0.7, 0.0, 0.0);
        for &d in &[-2.0, 0.0, 0.3] {
            assert_eq!(
                chi_lorentzian_inhomogeneous(d, &p).unwrap(),
                chi_homogeneous(d, d, &p).unwrap()
            );
        }
        let (om, so, ss) = (0.8, 2.0, 0.05);
        let z = chi_lorentzian_inhomogeneous(0.0, &rp(om, 0.0, 0.0, so, ss)).unwrap();
        assert!(close(z.im, 2.0 * ss / (om * om + ss * so), 1e-14));

        let z = chi_lorentzian_inhomogeneous(om / 2.0, &rp(om, 0.0, 0.0, so, 0.0)).unwrap();
        assert!(close(z.im, 2.0 / so, 1e-14));
    }

    #[test]
    fn width_closed_examples() {
        let w = eit_width_closed(&rp(10.0, 0.0, 0.0, 100.0, 0.0)).unwrap();
        assert!(close(w.width, (10400f64.sqrt() - 100.0) / 2.0, 1e-12));
        assert!(close(w.width, 0.99019, 1e-5));
        let w = eit_width_closed(&rp(100.0, 0.0, 0.0, 1.0, 0.0)).unwrap();
        assert!(close(w.width, 99.50125, 1e-5));
        let s = 3.0;
        let w = eit_width_closed(&rp(s / 2.0, 0.0, 0.0, s, 0.0)).unwrap();
        assert!(close(w.width, (2f64.sqrt() - 1.0) * s / 2.0, 1e-12));
    }

    #[test]
    fn width_closed_flags_unreliable_expansion() {
        // leading ~ 1e-4, sigma_spin far above it
        let w = eit_width_closed(&rp(0.01, 0.0, 0.0, 1.0, 0.01)).unwrap();
        assert!(!w.reliable);
        let w = eit_width_closed(&rp(0.3, 0.0, 0.0, 1.0, 0.001)).unwrap();
        assert!(w.reliable);
        assert!(eit_width_closed(&rp(0.0, 0.0, 0.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn asymptote_examples() {
        let eit = eit_width_asymptotic(&rp(10.0, 0.0, 0.0, 100.0, 0.0), Regime::Eit).unwrap();
        assert!(close(eit, 1.0, 1e-12));
        let at =
            eit_width_asymptotic(&rp(100.0, 0.0, 0.0, 1.0, 0.0), Regime::AutlerTownes).unwrap();
        assert!(close(at, 99.5, 1e-12));
        let eit = eit_width_asymptotic(&rp(10.0, 0.0, 0.0, 100.0, 3.0), Regime::Eit).unwrap();
        assert!(close(eit, 4.0, 1e-12));
        assert!(eit_width_asymptotic(&rp(1.0, 0.0, 0.0, 1.0, 0.0), Regime::Crossover).is_err());
    }

    #[test]
    fn visibility_examples() {
        assert!(close(
            eit_visibility_closed(&rp(2.0, 0.0, 0.0, 1.0, 4.0)).unwrap(),
            0.5,
            1e-15
        ));
        assert_eq!(
            eit_visibility_closed(&rp(2.0, 0.0, 0.0, 1.0, 0.0)).unwrap(),
            1.0
        );
        assert!(close(
            eit_visibility_closed(&rp(3.0, 0.0, 0.0, 3.0, 3.0)).unwrap(),
            0.5,
            1e-15
        ));
        assert!(matches!(
            eit_visibility_closed(&rp(0.0, 0.0, 0.0, 1.0, 0.0)),
            Err(Error::Indeterminate)
        ));
    }

    #[test]
    fn regime_examples() {
        assert_eq!(
            classify_regime(&rp(0.01, 0.0, 0.0, 1.0, 0.0)).unwrap(),
            Regime::Eit
        );
        assert_eq!(
            classify_regime(&rp(100.0, 0.0, 0.0, 1.0, 0.0)).unwrap(),
            Regime::AutlerTownes
        );
        assert_eq!(
            classify_regime(&rp(1.0, 0.0, 0.0, 1.0, 0.0)).unwrap(),
            Regime::Crossover
        );
        assert!(classify_regime(&rp(1.0, 0.0, 0.0, 0.0, 0.0)).is_err());
    }
}
