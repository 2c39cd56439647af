//! Beer-Lambert probe transmission, residual visibility and the
//! saturated-absorption fit used for optically thick features.

use crate::analysis::{extract_fwhm_dip, AbsorptionCurve};
use crate::error::{Error, Result};
use crate::fit::{levenberg_marquardt, LmOptions};
use crate::grid::DetuningGrid;
use crate::integrator::{uncoupled_absorption, QuadratureConfig, SusceptibilitySpectrum};
use crate::profile::{numeric_fwhm, ProfileKind};

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionTrace {
    pub grid: DetuningGrid,
    pub transmission: Vec<f64>,
    pub optical_depth: f64,
}

impl TransmissionTrace {
    pub fn new(grid: DetuningGrid, transmission: Vec<f64>, optical_depth: f64) -> Result<Self> {
        if transmission.len() != grid.count() {
            return Err(Error::GridMismatch);
        }
        if let Some(t) = transmission.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::invalid(format!(
                "transmission must lie in (0, 1], got {t}"
            )));
        }
        check_depth(optical_depth)?;
        Ok(TransmissionTrace {
            grid,
            transmission,
            optical_depth,
        })
    }

    /// `−ln T` per point.
    pub fn absorbance(&self) -> Vec<f64> {
        self.transmission.iter().map(|t| -t.ln()).collect()
    }

    pub fn absorbance_curve(&self) -> AbsorptionCurve {
        AbsorptionCurve {
            grid: self.grid,
            alpha: self.absorbance().into_iter().map(|a| a.max(0.0)).collect(),
            clipped: 0,
        }
    }
}

fn check_depth(d: f64) -> Result<()> {
    if d.is_finite() && d > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidDepth(d))
    }
}

/// Peak absorption with the coupling field off: the closed form
/// `2/(γ31 + σ_opt)` for a Lorentzian optical profile, otherwise the largest
/// numerically integrated value over the spectrum grid and profile span.
pub fn absorption_baseline(s: &SusceptibilitySpectrum, q: &QuadratureConfig) -> Result<f64> {
    let g31 = s.params.gamma31;
    let optical = &s.optical;
    if optical.kind() == ProfileKind::Lorentzian {
        let w = g31 + optical.fwhm().unwrap_or(0.0);
        if w <= 0.0 {
            return Err(Error::DegenerateBaseline(f64::INFINITY));
        }
        return Ok(2.0 / w);
    }
    let mut probes: Vec<f64> = s.grid.points().collect();
    probes.push(optical.center());
    if let Some((lo, hi)) = optical.support() {
        probes.extend(DetuningGrid::new(lo, hi, 201)?.points());
    }
    let mut best = 0.0f64;
    for x in probes {
        best = best.max(uncoupled_absorption(x, g31, optical, q)?);
    }
    if best > 0.0 {
        Ok(best)
    } else {
        Err(Error::DegenerateBaseline(best))
    }
}

pub fn transmission_from_spectrum(s: &SusceptibilitySpectrum, d: f64) -> Result<TransmissionTrace> {
    let baseline = absorption_baseline(s, &QuadratureConfig::default())?;
    transmission_with_baseline(s, d, baseline)
}

/// `T = exp(−d·Im χ̃/baseline)`, with negative absorption clipped to zero.
pub fn transmission_with_baseline(
    s: &SusceptibilitySpectrum,
    d: f64,
    baseline: f64,
) -> Result<TransmissionTrace> {
    check_depth(d)?;
    if !(baseline.is_finite() && baseline > 0.0) {
        return Err(Error::DegenerateBaseline(baseline));
    }
    let transmission = s
        .values
        .iter()
        .map(|v| (-d * v.im.max(0.0) / baseline).exp().max(f64::MIN_POSITIVE))
        .collect();
    Ok(TransmissionTrace {
        grid: s.grid,
        transmission,
        optical_depth: d,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualVisibility {
    pub value: f64,
    /// Set when the raw ratio fell outside [0, 1].
    pub clipped: bool,
}

/// Index of the transparency dip, or of the strongest absorption when no dip
/// is resolved.
fn dip_or_center(with: &AbsorptionCurve, center: usize) -> usize {
    extract_fwhm_dip(with)
        .map(|m| m.dip_index)
        .unwrap_or(center)
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn residual_from(absorbed: f64, reference: f64) -> ResidualVisibility {
    let raw = 1.0 - absorbed / reference;
    let value = raw.clamp(0.0, 1.0);
    ResidualVisibility {
        value,
        clipped: value != raw,
    }
}

/// `1 − ln T_dip(with)/ln T_center(without)`.
pub fn visibility_residual(
    with: &TransmissionTrace,
    without: &TransmissionTrace,
) -> Result<ResidualVisibility> {
    if with.grid != without.grid || with.optical_depth != without.optical_depth {
        return Err(Error::GridMismatch);
    }
    let reference = without.absorbance();
    let center = argmax(&reference);
    if without.transmission[center] >= 1.0 - 1e-9 {
        return Err(Error::DegenerateBaseline(without.transmission[center]));
    }
    let coupled = with.absorbance_curve();
    let i = dip_or_center(&coupled, center);
    Ok(residual_from(coupled.alpha[i], reference[center]))
}

/// Same quantity on susceptibility spectra, before any Beer-Lambert mapping.
pub fn visibility_residual_spectra(
    with: &SusceptibilitySpectrum,
    without: &SusceptibilitySpectrum,
) -> Result<ResidualVisibility> {
    if with.grid != without.grid {
        return Err(Error::GridMismatch);
    }
    let reference = without.imag();
    let center = argmax(&reference);
    if !(reference[center] > 0.0) {
        return Err(Error::DegenerateBaseline(reference[center]));
    }
    let coupled = crate::analysis::absorption_curve(with);
    let i = dip_or_center(&coupled, center);
    Ok(residual_from(coupled.alpha[i], reference[center]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturatedFit {
    pub optical_depth: f64,
    pub width: f64,
    pub center: f64,
    /// RMS residual in transmission over the feature contrast.
    pub residual_norm: f64,
}

/// Minimum number of samples across the absorbance FWHM.
pub const SATURATED_MIN_POINTS: usize = 10;

/// Fits `T = exp(−d·L(δ))` with `L` a unit-peak Lorentzian of width `w`
/// centred at `c`.
pub fn fit_saturated_absorption(trace: &TransmissionTrace) -> Result<SaturatedFit> {
    let g = trace.grid;
    let a = trace.absorbance();
    let peak = argmax(&a);
    let d0 = a[peak];
    let t_min = trace.transmission[peak];
    let t_max = trace.transmission.iter().copied().fold(0.0, f64::max);
    if !(d0 > 1e-12) || t_max - t_min <= 1e-12 {
        return Err(Error::FeatureAbsent);
    }
    let w0 = numeric_fwhm(g.start(), g.step(), &a).ok_or(Error::FeatureAbsent)?;
    let points = w0 / g.step();
    if points < SATURATED_MIN_POINTS as f64 {
        return Err(Error::GridTooCoarse {
            points,
            required: SATURATED_MIN_POINTS,
        });
    }
    let xs: Vec<f64> = g.points().collect();
    let ts = &trace.transmission;
    let model = |p: &[f64], x: f64| {
        let hw2 = 0.25 * p[1] * p[1];
        (-p[0] * hw2 / ((x - p[2]).powi(2) + hw2)).exp()
    };
    let r = levenberg_marquardt(
        |p, out| {
            for (o, (x, t)) in out.iter_mut().zip(xs.iter().zip(ts)) {
                *o = model(p, *x) - t;
            }
        },
        xs.len(),
        &[d0, w0, g.point(peak)],
        &[d0, w0, w0],
        LmOptions::default(),
    );
    let (d, w, c) = (r.params[0], r.params[1].abs(), r.params[2]);
    if !r.converged || !(d > 0.0) || !(w > 0.0) || !c.is_finite() {
        return Err(Error::FitDiverged(format!(
            "saturated absorption fit ended at {:?}",
            r.params
        )));
    }
    Ok(SaturatedFit {
        optical_depth: d,
        width: w,
        center: c,
        residual_norm: r.rms / (t_max - t_min),
    })
}

/// Largest laser scan rate that keeps the sweep adiabatic: the spin
/// inhomogeneous width divided by the optical coherence time.
pub fn max_scan_rate(sigma_spin: f64, optical_coherence_time: f64) -> Result<f64> {
    if !(sigma_spin > 0.0 && sigma_spin.is_finite())
        || !(optical_coherence_time > 0.0 && optical_coherence_time.is_finite())
    {
        return Err(Error::invalid(
            "scan rate needs positive spin width and coherence time",
        ));
    }
    Ok(sigma_spin / optical_coherence_time)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::RateParams;

    fn uncoupled(so: f64, half: f64, n: usize) -> SusceptibilitySpectrum {
        let p = RateParams::new(0.0, 1e-6, 1e-6, so, 0.0).unwrap();
        SusceptibilitySpectrum::lorentzian(DetuningGrid::symmetric(half, n).unwrap(), &p).unwrap()
    }

    fn self_trace(d: f64, w: f64, c: f64) -> TransmissionTrace {
        let g = DetuningGrid::symmetric(8.0 * w, 801).unwrap();
        let t = g
            .points()
            .map(|x| (-d * 0.25 * w * w / ((x - c).powi(2) + 0.25 * w * w)).exp())
            .collect();
        TransmissionTrace::new(g, t, d).unwrap()
    }

    #[test]
    fn line_center_transmission() {
        let s = uncoupled(1.0, 2.0, 41);
        let t = transmission_from_spectrum(&s, 2.0).unwrap();
        assert!((t.transmission[20] - (-2.0f64).exp()).abs() < 1e-5);
        assert!((t.transmission[20] - 0.1353).abs() < 1e-4);
    }

    #[test]
    fn small_depth_linearizes() {
        let s = uncoupled(1.0, 3.0, 61);
        let base = absorption_baseline(&s, &QuadratureConfig::default()).unwrap();
        let d = 1e-4;
        let t = transmission_from_spectrum(&s, d).unwrap();
        for (ti, v) in t.transmission.iter().zip(&s.values) {
            assert!((ti - (1.0 - d * v.im / base)).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_depth() {
        let s = uncoupled(1.0, 2.0, 5);
        assert!(matches!(
            transmission_from_spectrum(&s, 0.0),
            Err(Error::InvalidDepth(_))
        ));
        assert!(matches!(
            transmission_from_spectrum(&s, f64::NAN),
            Err(Error::InvalidDepth(_))
        ));
    }

    #[test]
    fn residual_visibility_examples() {
        let s = uncoupled(1.0, 2.0, 41);
        let t = transmission_from_spectrum(&s, 1.5).unwrap();
        assert_eq!(visibility_residual(&t, &t).unwrap().value, 0.0);

        let transparent = TransmissionTrace::new(t.grid, vec![1.0; 41], 1.5).unwrap();
        assert_eq!(visibility_residual(&transparent, &t).unwrap().value, 1.0);

        let (om, so, ss) = (0.2, 1.0, 0.05);
        let g = DetuningGrid::symmetric(1.0, 4001).unwrap();
        let with = SusceptibilitySpectrum::lorentzian(
            g,
            &RateParams::new(om, 1e-6, 1e-6, so, ss).unwrap(),
        )
        .unwrap();
        let without = SusceptibilitySpectrum::lorentzian(
            g,
            &RateParams::new(0.0, 1e-6, 1e-6, so, ss).unwrap(),
        )
        .unwrap();
        let v = visibility_residual(
            &transmission_from_spectrum(&with, 1.0).unwrap(),
            &transmission_from_spectrum(&without, 1.0).unwrap(),
        )
        .unwrap()
        .value;
        let expect = om * om / (om * om + so * ss);
        assert!((v / expect - 1.0).abs() < 0.01, "{v} vs {expect}");
        let direct = visibility_residual_spectra(&with, &without).unwrap().value;
        assert!((v - direct).abs() < 1e-9);
    }

    #[test]
    fn residual_visibility_errors() {
        let s = uncoupled(1.0, 2.0, 41);
        let t = transmission_from_spectrum(&s, 1.0).unwrap();
        let other = transmission_from_spectrum(&uncoupled(1.0, 2.0, 43), 1.0).unwrap();
        assert!(matches!(
            visibility_residual(&t, &other),
            Err(Error::GridMismatch)
        ));
        let flat = TransmissionTrace::new(t.grid, vec![1.0; 41], 1.0).unwrap();
        assert!(matches!(
            visibility_residual(&t, &flat),
            Err(Error::DegenerateBaseline(_))
        ));
    }

    #[test]
    fn saturated_self_fit() {
        let tr = self_trace(6.0, 0.7, 0.1);
        let f = fit_saturated_absorption(&tr).unwrap();
        assert!((f.optical_depth / 6.0 - 1.0).abs() < 0.02);
        assert!((f.width / 0.7 - 1.0).abs() < 0.02);
        assert!(f.residual_norm < 1e-8);
    }

    #[test]
    fn unsaturated_fit_matches_direct_fwhm() {
        let tr = self_trace(0.02, 1.0, 0.0);
        let f = fit_saturated_absorption(&tr).unwrap();
        let one_minus: Vec<f64> = tr.transmission.iter().map(|t| 1.0 - t).collect();
        let direct = numeric_fwhm(tr.grid.start(), tr.grid.step(), &one_minus).unwrap();
        assert!(
            (f.width / direct - 1.0).abs() < 0.01,
            "{} vs {direct}",
            f.width
        );
    }

    #[test]
    fn flat_trace_has_no_feature() {
        let g = DetuningGrid::symmetric(1.0, 50).unwrap();
        let tr = TransmissionTrace::new(g, vec![0.8; 50], 1.0).unwrap();
        assert!(matches!(
            fit_saturated_absorption(&tr),
            Err(Error::FeatureAbsent)
        ));
    }

    #[test]
    fn scan_rate() {
        assert!((max_scan_rate(40e3, 1e-3).unwrap() - 4e7).abs() < 1e-6);
        assert!((max_scan_rate(4e3, 1e-3).unwrap() - 4e6).abs() < 1e-7);
        assert_eq!(
            max_scan_rate(8e3, 1e-3).unwrap() / max_scan_rate(4e3, 1e-3).unwrap(),
            2.0
        );
        assert!(max_scan_rate(0.0, 1.0).is_err());
    }
}
