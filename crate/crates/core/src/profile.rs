//! Normalized broadening densities over optical or spin frequency shifts.
//!
//! Every width is a FWHM. Analytic shapes are symmetric about their center;
//! tabulated shapes are arbitrary nonnegative samples on a uniform grid,
//! linearly interpolated and zero outside their span.

use std::f64::consts::{LN_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Lorentzian,
    Gaussian,
    #[serde(alias = "flat-top", alias = "flat_top")]
    FlatTop,
    Tabulated,
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileKind::Lorentzian => "lorentzian",
            ProfileKind::Gaussian => "gaussian",
            ProfileKind::FlatTop => "flattop",
            ProfileKind::Tabulated => "tabulated",
        })
    }
}

/// Samples of a tabulated density on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub start: f64,
    pub step: f64,
    pub density: Vec<f64>,
}

impl Table {
    pub fn shift(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn stop(&self) -> f64 {
        self.shift(self.density.len() - 1)
    }

    fn interpolate(&self, x: f64) -> f64 {
        let u = (x - self.start) / self.step;
        let last = (self.density.len() - 1) as f64;
        if !(0.0..=last).contains(&u) {
            return 0.0;
        }
        let i = (u.floor() as usize).min(self.density.len() - 2);
        let t = u - i as f64;
        self.density[i] * (1.0 - t) + self.density[i + 1] * t
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    PointMass,
    Lorentzian { fwhm: f64 },
    Gaussian { fwhm: f64 },
    FlatTop { fwhm: f64 },
    Tabulated { table: Table, fwhm: Option<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BroadeningProfile {
    kind: ProfileKind,
    shape: Shape,
    center: f64,
}

/// `fwhm / (2√(2 ln 2))`
pub fn gaussian_sigma(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * LN_2).sqrt())
}

impl BroadeningProfile {
    /// Analytic profile of the given FWHM centered at `center`. A zero FWHM
    /// gives a point mass, which the integrator collapses to one evaluation.
    pub fn new(kind: ProfileKind, fwhm: f64, center: f64) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::InvalidWidth(format!(
                "center {center} is not finite"
            )));
        }
        if !fwhm.is_finite() || fwhm < 0.0 {
            return Err(Error::InvalidWidth(format!(
                "fwhm must be finite and >= 0, got {fwhm}"
            )));
        }
        let shape = if fwhm == 0.0 {
            Shape::PointMass
        } else {
            match kind {
                ProfileKind::Lorentzian => Shape::Lorentzian { fwhm },
                ProfileKind::Gaussian => Shape::Gaussian { fwhm },
                ProfileKind::FlatTop => Shape::FlatTop { fwhm },
                ProfileKind::Tabulated => {
                    return Err(Error::InvalidWidth(
                        "tabulated profiles are built from a table, not a width".into(),
                    ))
                }
            }
        };
        Ok(BroadeningProfile {
            kind,
            shape,
            center,
        })
    }

    pub fn lorentzian(fwhm: f64) -> Result<Self> {
        Self::new(ProfileKind::Lorentzian, fwhm, 0.0)
    }

    pub fn gaussian(fwhm: f64) -> Result<Self> {
        Self::new(ProfileKind::Gaussian, fwhm, 0.0)
    }

    pub fn flat_top(fwhm: f64) -> Result<Self> {
        Self::new(ProfileKind::FlatTop, fwhm, 0.0)
    }

    pub fn point_mass(center: f64) -> Self {
        BroadeningProfile {
            kind: ProfileKind::Lorentzian,
            shape: Shape::PointMass,
            center,
        }
    }

    /// Builds a tabulated profile from `(shift, density)` samples, renormalized
    /// to unit trapezoid area.
    pub fn from_table(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidWidth(format!(
                "a tabulated profile needs at least 3 points, got {}",
                points.len()
            )));
        }
        let start = points[0].0;
        let step = points[1].0 - points[0].0;
        if !(step > 0.0) || !start.is_finite() {
            return Err(Error::NonUniformGrid { row: 1 });
        }
        for (i, w) in points.windows(2).enumerate() {
            let d = w[1].0 - w[0].0;
            if !(d > 0.0) || (d - step).abs() > 1e-6 * step {
                return Err(Error::NonUniformGrid { row: i + 1 });
            }
        }
        let mut density = Vec::with_capacity(points.len());
        for &(shift, value) in points {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::NegativeDensity { shift, value });
            }
            density.push(value);
        }
        Self::from_uniform(start, step, density)
    }

    pub(crate) fn from_uniform(start: f64, step: f64, mut density: Vec<f64>) -> Result<Self> {
        let area = trapezoid(&density, step);
        if !(area > 0.0) {
            return Err(Error::AllZero);
        }
        density.iter_mut().for_each(|d| *d /= area);
        let fwhm = numeric_fwhm(start, step, &density);
        Ok(BroadeningProfile {
            kind: ProfileKind::Tabulated,
            shape: Shape::Tabulated {
                table: Table {
                    start,
                    step,
                    density,
                },
                fwhm,
            },
            center: 0.0,
        })
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn is_point_mass(&self) -> bool {
        matches!(self.shape, Shape::PointMass)
    }

    /// Analytic FWHM, the numeric FWHM of the dominant feature for tables,
    /// zero for a point mass.
    pub fn fwhm(&self) -> Option<f64> {
        match &self.shape {
            Shape::PointMass => Some(0.0),
            Shape::Lorentzian { fwhm } | Shape::Gaussian { fwhm } | Shape::FlatTop { fwhm } => {
                Some(*fwhm)
            }
            Shape::Tabulated { fwhm, .. } => *fwhm,
        }
    }

    pub fn table(&self) -> Option<&Table> {
        match &self.shape {
            Shape::Tabulated { table, .. } => Some(table),
            _ => None,
        }
    }

    /// Finite support, or `None` for Lorentzian tails and point masses.
    pub fn support(&self) -> Option<(f64, f64)> {
        let c = self.center;
        match &self.shape {
            Shape::PointMass | Shape::Lorentzian { .. } => None,
            // 7 FWHM is ~16.5 standard deviations, far below f64 resolution
            Shape::Gaussian { fwhm } => Some((c - 7.0 * fwhm, c + 7.0 * fwhm)),
            Shape::FlatTop { fwhm } => Some((c - 0.5 * fwhm, c + 0.5 * fwhm)),
            Shape::Tabulated { table, .. } => Some((table.start, table.stop())),
        }
    }

    /// Probability density at shift `x`; zero everywhere for a point mass.
    pub fn density(&self, x: f64) -> f64 {
        let u = x - self.center;
        match &self.shape {
            Shape::PointMass => 0.0,
            Shape::Lorentzian { fwhm } => {
                let h = 0.5 * fwhm;
                h / (PI * (u * u + h * h))
            }
            Shape::Gaussian { fwhm } => {
                let s = gaussian_sigma(*fwhm);
                (-0.5 * (u / s).powi(2)).exp() / (s * (2.0 * PI).sqrt())
            }
            Shape::FlatTop { fwhm } => {
                if u.abs() <= 0.5 * fwhm {
                    1.0 / fwhm
                } else {
                    0.0
                }
            }
            Shape::Tabulated { table, .. } => table.interpolate(x),
        }
    }

    /// Samples the density on `count` uniform points over `[start, stop]`.
    pub fn discretize(&self, start: f64, stop: f64, count: usize) -> Vec<(f64, f64)> {
        let step = (stop - start) / (count - 1) as f64;
        (0..count)
            .map(|i| {
                let x = start + step * i as f64;
                (x, self.density(x))
            })
            .collect()
    }

    /// Short label used in reports and CSV columns.
    pub fn describe(&self) -> String {
        match &self.shape {
            Shape::PointMass => format!("point(center={})", self.center),
            Shape::Tabulated { table, fwhm } => format!(
                "tabulated(n={},fwhm={})",
                table.density.len(),
                fwhm.map_or_else(|| "none".to_string(), |w| format!("{w:.6e}"))
            ),
            _ => format!("{}(fwhm={:e})", self.kind, self.fwhm().unwrap_or(0.0)),
        }
    }

    /// Two-column `shift,density` CSV of a tabulated profile, or of an analytic
    /// one sampled over `±span_fwhm` widths with `count` points.
    pub fn to_points(&self, span_fwhm: f64, count: usize) -> Vec<(f64, f64)> {
        match &self.shape {
            Shape::Tabulated { table, .. } => table
                .density
                .iter()
                .enumerate()
                .map(|(i, &d)| (table.shift(i), d))
                .collect(),
            _ => {
                let w = self.fwhm().unwrap_or(0.0).max(f64::MIN_POSITIVE);
                self.discretize(
                    self.center - span_fwhm * w,
                    self.center + span_fwhm * w,
                    count,
                )
            }
        }
    }
}

pub(crate) fn trapezoid(values: &[f64], step: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    step * (inner + 0.5 * (values[0] + values[values.len() - 1]))
}

/// Width of the dominant peak of uniformly sampled values: distance between
/// the linearly interpolated half-maximum crossings around the global
/// maximum. `None` when either crossing falls outside the samples.
pub fn numeric_fwhm(start: f64, step: f64, values: &[f64]) -> Option<f64> {
    let (imax, &vmax) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(vmax > 0.0) {
        return None;
    }
    let half = 0.5 * vmax;
    let mut left = None;
    for i in (0..imax).rev() {
        if values[i] < half {
            let t = (half - values[i]) / (values[i + 1] - values[i]);
            left = Some(start + step * (i as f64 + t));
            break;
        }
    }
    let mut right = None;
    for i in imax + 1..values.len() {
        if values[i] < half {
            let t = (values[i - 1] - half) / (values[i - 1] - values[i]);
            right = Some(start + step * (i as f64 - 1.0 + t));
            break;
        }
    }
    Some(right? - left?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_peak_densities() {
        let s = 2.5;
        let flat = BroadeningProfile::flat_top(s).unwrap();
        assert!((flat.density(0.0) - 1.0 / s).abs() < 1e-15);
        assert_eq!(flat.density(0.51 * s), 0.0);

        let lor = BroadeningProfile::lorentzian(s).unwrap();
        assert!((lor.density(0.0) - 2.0 / (PI * s)).abs() < 1e-15);
        assert!((lor.density(s / 2.0) - 0.5 * lor.density(0.0)).abs() < 1e-15);

        let gau = BroadeningProfile::gaussian(s).unwrap();
        assert!((gau.density(0.0) - 2.0 * (LN_2 / PI).sqrt() / s).abs() < 1e-15);
        assert!((gau.density(0.0) * s - 0.93944).abs() < 1e-5);
        assert!((gau.density(s / 2.0) - 0.5 * gau.density(0.0)).abs() < 1e-14);
    }

    #[test]
    fn invalid_widths() {
        assert!(matches!(
            BroadeningProfile::lorentzian(-1.0),
            Err(Error::InvalidWidth(_))
        ));
        assert!(matches!(
            BroadeningProfile::gaussian(f64::NAN),
            Err(Error::InvalidWidth(_))
        ));
        assert!(BroadeningProfile::gaussian(0.0).unwrap().is_point_mass());
    }

    #[test]
    fn triangle_table_renormalizes() {
        let p = BroadeningProfile::from_table(&[(-1.0, 0.0), (0.0, 2.0), (1.0, 0.0)]).unwrap();
        assert!((p.density(0.0) - 1.0).abs() < 1e-15);
        assert!((p.density(0.5) - 0.5).abs() < 1e-15);
        assert_eq!(p.density(1.5), 0.0);
        assert_eq!(p.density(-1.0001), 0.0);
        assert!((p.fwhm().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn table_scale_invariance_and_idempotence() {
        let base = BroadeningProfile::gaussian(1.0)
            .unwrap()
            .discretize(-5.0, 5.0, 201);
        let p1 = BroadeningProfile::from_table(&base).unwrap();
        let scaled: Vec<_> = base.iter().map(|&(x, d)| (x, 7.0 * d)).collect();
        let p7 = BroadeningProfile::from_table(&scaled).unwrap();
        let t1 = p1.table().unwrap();
        let t7 = p7.table().unwrap();
        for (a, b) in t1.density.iter().zip(&t7.density) {
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-300));
        }
        let again = BroadeningProfile::from_table(&p1.to_points(0.0, 0)).unwrap();
        for (a, b) in t1.density.iter().zip(&again.table().unwrap().density) {
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-300));
        }
    }

    #[test]
    fn table_errors() {
        assert!(matches!(
            BroadeningProfile::from_table(&[(0.0, 1.0), (1.0, 1.0), (2.5, 1.0)]),
            Err(Error::NonUniformGrid { row: 2 })
        ));
        assert!(matches!(
            BroadeningProfile::from_table(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]),
            Err(Error::AllZero)
        ));
        assert!(matches!(
            BroadeningProfile::from_table(&[(0.0, 1.0), (1.0, -1.0), (2.0, 0.0)]),
            Err(Error::NegativeDensity { .. })
        ));
        assert!(BroadeningProfile::from_table(&[(0.0, 1.0), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn discretized_lorentzian_fwhm() {
        let pts = BroadeningProfile::lorentzian(1.0)
            .unwrap()
            .discretize(-50.0, 50.0, 10001);
        let p = BroadeningProfile::from_table(&pts).unwrap();
        assert!((p.fwhm().unwrap() - 1.0).abs() < 0.01);
    }
}
