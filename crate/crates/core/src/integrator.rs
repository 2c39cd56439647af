//! Numeric susceptibility of an ensemble with arbitrary optical and spin
//! broadening profiles.
//!
//! Each grid point is a nested one-dimensional adaptive integral: the outer
//! one over optical shifts, the inner one over spin shifts. At fixed values of
//! the other variables the homogeneous kernel has a single pole on each axis,
//! so its location is handed to the quadrature as a breakpoint. Lorentzian
//! tails are mapped onto a finite interval with `x = c + (w/2)·tan θ`, under
//! which the Lorentzian measure becomes uniform.

use std::cell::Cell;
use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::DetuningGrid;
use crate::params::RateParams;
use crate::profile::{BroadeningProfile, ProfileKind};
use crate::quadrature::{self, QuadResult, QuadSettings};
use crate::susceptibility::{chi_lorentzian_inhomogeneous, kernel};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// How infinite (Lorentzian) supports are handled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailMapping {
    TangentMap,
    /// Truncate at ±N FWHM around the center.
    TruncateAtN(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub max_depth: u32,
    pub tail_mapping: TailMapping,
    /// Collapse a Lorentzian spin integral by residues (γ21 → γ21 + σ_spin).
    pub lorentzian_spin_shortcut: bool,
    pub max_intervals: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rel_tol: 1e-6,
            max_depth: 30,
            tail_mapping: TailMapping::TangentMap,
            lorentzian_spin_shortcut: true,
            max_intervals: 4000,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-2) {
            return Err(Error::invalid(format!(
                "rel_tol must lie in (0, 1e-2], got {}",
                self.rel_tol
            )));
        }
        if self.max_depth < 5 {
            return Err(Error::invalid(format!(
                "max_depth must be >= 5, got {}",
                self.max_depth
            )));
        }
        if let TailMapping::TruncateAtN(n) = self.tail_mapping {
            if !(n.is_finite() && n > 0.0) {
                return Err(Error::invalid(format!(
                    "truncation span must be positive, got {n}"
                )));
            }
        }
        Ok(())
    }

    fn settings(&self, rel_tol: f64) -> QuadSettings {
        QuadSettings {
            rel_tol,
            abs_tol: 0.0,
            max_depth: self.max_depth,
            max_intervals: self.max_intervals,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumMethod {
    ClosedForm,
    Numeric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureReport {
    /// Largest per-point relative error estimate.
    pub max_rel_error: f64,
    pub evaluations: usize,
    /// Grid indices whose integral missed the tolerance.
    pub flagged: Vec<usize>,
}

/// Complex susceptibility sampled on a detuning grid, with the inputs that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SusceptibilitySpectrum {
    pub grid: DetuningGrid,
    pub values: Vec<Complex64>,
    pub params: RateParams,
    pub optical: BroadeningProfile,
    pub spin: BroadeningProfile,
    pub method: SpectrumMethod,
    pub report: Option<QuadratureReport>,
}

fn lorentzian_or_point(fwhm: f64) -> BroadeningProfile {
    if fwhm > 0.0 {
        BroadeningProfile::new(ProfileKind::Lorentzian, fwhm, 0.0).expect("positive width")
    } else {
        BroadeningProfile::point_mass(0.0)
    }
}

impl SusceptibilitySpectrum {
    /// Closed-form spectrum for Lorentzian profiles of widths
    /// `p.sigma_opt` and `p.sigma_spin`.
    pub fn lorentzian(grid: DetuningGrid, p: &RateParams) -> Result<Self> {
        let values = grid
            .points()
            .map(|d| chi_lorentzian_inhomogeneous(d, p))
            .collect::<Result<Vec<_>>>()?;
        Ok(SusceptibilitySpectrum {
            grid,
            values,
            params: *p,
            optical: lorentzian_or_point(p.sigma_opt),
            spin: lorentzian_or_point(p.sigma_spin),
            method: SpectrumMethod::ClosedForm,
            report: None,
        })
    }

    /// Builds a spectrum from externally computed values.
    pub fn from_values(
        grid: DetuningGrid,
        values: Vec<Complex64>,
        params: RateParams,
        optical: BroadeningProfile,
        spin: BroadeningProfile,
    ) -> Result<Self> {
        if values.len() != grid.count() {
            return Err(Error::invalid(format!(
                "{} values for a {}-point grid",
                values.len(),
                grid.count()
            )));
        }
        if values
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::invalid("spectrum contains non-finite values"));
        }
        Ok(SusceptibilitySpectrum {
            grid,
            values,
            params,
            optical,
            spin,
            method: SpectrumMethod::Numeric,
            report: None,
        })
    }

    pub fn imag(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.im).collect()
    }

    pub fn real(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }
}

/// Integrates `weight·f` against a profile. The hints are abscissae where
/// `f` is sharply structured.
fn integrate_profile<F>(
    profile: &BroadeningProfile,
    mut f: F,
    hints: &[f64],
    settings: &QuadSettings,
    tail: TailMapping,
) -> QuadResult
where
    F: FnMut(f64) -> Complex64,
{
    let c = profile.center();
    if profile.is_point_mass() {
        return QuadResult {
            value: f(c),
            error: 0.0,
            l1: 0.0,
            evaluations: 1,
            converged: true,
        };
    }
    let fwhm = profile.fwhm().unwrap_or(0.0);
    match (profile.kind(), tail) {
        (ProfileKind::Lorentzian, TailMapping::TangentMap) => {
            // w in [-1, 1]: tails, x = c + h/w; w in [1, 3]: core, x = c + h·tan((w-2)π/4)
            let h = 0.5 * fwhm;
            let to_w = |x: f64| {
                let t = (x - c) / h;
                if t.abs() > 1.0 {
                    1.0 / t
                } else {
                    2.0 + t.atan() / FRAC_PI_4
                }
            };
            let decades = (1..=12).flat_map(|k| [-(10f64.powi(-k)), 10f64.powi(-k)]);
            let interior = hints
                .iter()
                .map(|&x| to_w(x))
                .chain([0.0, 1.0, 2.0])
                .chain(decades);
            let pts = quadrature::breakpoints(-1.0, 3.0, interior);
            quadrature::integrate(
                |w| {
                    if w <= 1.0 {
                        f(c + h / w) / (PI * (1.0 + w * w))
                    } else {
                        0.25 * f(c + h * ((w - 2.0) * FRAC_PI_4).tan())
                    }
                },
                &pts,
                settings,
            )
        }
        (ProfileKind::Lorentzian, TailMapping::TruncateAtN(n)) => {
            let span = n * fwhm;
            let decades = (0..)
                .map(|k| 0.5 * fwhm * 10f64.powi(k))
                .take_while(|&d| d < span)
                .flat_map(|d| [c - d, c + d]);
            let pts = quadrature::breakpoints(
                c - span,
                c + span,
                hints.iter().copied().chain(decades).chain([c]),
            );
            quadrature::integrate(|x| f(x) * profile.density(x), &pts, settings)
        }
        _ => {
            let (lo, hi) = profile.support().expect("finite support");
            let mut interior: Vec<f64> = hints.to_vec();
            match profile.table() {
                Some(table) => interior.extend((0..table.density.len()).map(|i| table.shift(i))),
                None => interior.extend([c - 0.5 * fwhm, c, c + 0.5 * fwhm]),
            }
            let pts = quadrature::breakpoints(lo, hi, interior);
            quadrature::integrate(|x| f(x) * profile.density(x), &pts, settings)
        }
    }
}

/// The pole centre plus points at geometrically growing distances from it.
fn pole_hints(pole: Complex64) -> impl Iterator<Item = f64> {
    let w = pole.im.abs();
    std::iter::once(pole.re).chain((0..8).flat_map(move |k| {
        let d = w * 10f64.powi(k);
        [pole.re - d, pole.re + d]
    }))
}

struct Evaluator<'a> {
    omega_sq: f64,
    gamma21: f64,
    gamma31: f64,
    optical: &'a BroadeningProfile,
    spin: &'a BroadeningProfile,
    q: &'a QuadratureConfig,
}

struct PointResult {
    value: Complex64,
    rel_error: f64,
    evaluations: usize,
    converged: bool,
}

impl Evaluator<'_> {
    fn spin_factor(&self, delta: f64, delta_s: f64) -> Complex64 {
        Complex64::new(self.gamma21, -2.0 * (delta - delta_s))
    }

    fn spin_shortcut(&self) -> Option<Complex64> {
        // Lorentzian spin profile: evaluate at δs = c − iσ/2
        (self.spin.kind() == ProfileKind::Lorentzian
            && !self.spin.is_point_mass()
            && self.q.lorentzian_spin_shortcut)
            .then(|| Complex64::new(self.spin.center(), -0.5 * self.spin.fwhm().unwrap_or(0.0)))
    }

    /// Kernel averaged over the spin profile at fixed optical factor `g`.
    fn spin_average(
        &self,
        delta: f64,
        g: Complex64,
        inner_ok: &Cell<bool>,
        evals: &Cell<usize>,
    ) -> Complex64 {
        if self.spin.is_point_mass() {
            evals.set(evals.get() + 1);
            return kernel(
                self.omega_sq,
                self.spin_factor(delta, self.spin.center()),
                g,
            );
        }
        if let Some(ds) = self.spin_shortcut() {
            evals.set(evals.get() + 1);
            let a = self.gamma21 - 2.0 * I * (delta - ds);
            return kernel(self.omega_sq, a, g);
        }
        // pole of the kernel in δs at fixed g
        let pole = delta + 0.5 * I * (self.gamma21 + self.omega_sq / g);
        let hints: Vec<f64> = std::iter::once(delta).chain(pole_hints(pole)).collect();
        let settings = self.q.settings(0.25 * self.q.rel_tol);
        let r = integrate_profile(
            self.spin,
            |ds| kernel(self.omega_sq, self.spin_factor(delta, ds), g),
            &hints,
            &settings,
            self.q.tail_mapping,
        );
        evals.set(evals.get() + r.evaluations);
        if !r.converged {
            inner_ok.set(false);
        }
        r.value
    }

    fn point(&self, delta: f64) -> PointResult {
        let inner_ok = Cell::new(true);
        let evals = Cell::new(0usize);
        let optical_factor = |d_o: f64| Complex64::new(self.gamma31, -2.0 * (delta - d_o));

        // representative spin factor for locating the optical pole
        let a = match self.spin_shortcut() {
            Some(ds) => self.gamma21 - 2.0 * I * (delta - ds),
            None => self.spin_factor(delta, self.spin.center()),
        };
        let mut hints = vec![
            delta,
            delta - 0.5 * self.omega_sq.sqrt(),
            delta + 0.5 * self.omega_sq.sqrt(),
        ];
        if a.norm() > 0.0 {
            let pole = delta + 0.5 * I * self.gamma31 + 0.5 * I * self.omega_sq / a;
            hints.extend(pole_hints(pole));
        }

        let settings = self.q.settings(self.q.rel_tol);
        let r = integrate_profile(
            self.optical,
            |d_o| self.spin_average(delta, optical_factor(d_o), &inner_ok, &evals),
            &hints,
            &settings,
            self.q.tail_mapping,
        );
        PointResult {
            value: r.value,
            rel_error: r.relative_error(),
            evaluations: evals.get(),
            converged: r.converged
                && inner_ok.get()
                && r.value.re.is_finite()
                && r.value.im.is_finite(),
        }
    }
}

/// Susceptibility integrated over the optical and spin profiles at every grid
/// point. The `sigma_*` fields of `p` are recorded but not used; the profiles
/// carry the broadening.
///
/// Points that miss the tolerance are flagged in the report; the call fails
/// with [`Error::QuadratureNotConverged`] when more than 1% are flagged.
pub fn integrate_susceptibility(
    grid: DetuningGrid,
    p: &RateParams,
    optical: &BroadeningProfile,
    spin: &BroadeningProfile,
    q: &QuadratureConfig,
) -> Result<SusceptibilitySpectrum> {
    p.validate()?;
    q.validate()?;
    if p.gamma31 <= 0.0 {
        return Err(Error::invalid("numeric integration needs gamma31 > 0"));
    }
    let spin_width = if spin.is_point_mass() {
        0.0
    } else {
        spin.fwhm().unwrap_or(0.0)
    };
    if p.gamma21 + spin_width <= 0.0 {
        return Err(Error::invalid(
            "numeric integration needs gamma21 + spin width > 0",
        ));
    }

    let ev = Evaluator {
        omega_sq: p.omega * p.omega,
        gamma21: p.gamma21,
        gamma31: p.gamma31,
        optical,
        spin,
        q,
    };
    let points: Vec<f64> = grid.points().collect();
    let results: Vec<PointResult> = points.par_iter().map(|&d| ev.point(d)).collect();

    let flagged: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.converged)
        .map(|(i, _)| i)
        .collect();
    if flagged.len() * 100 > grid.count() {
        return Err(Error::QuadratureNotConverged {
            flagged: flagged.len(),
            total: grid.count(),
        });
    }
    let report = QuadratureReport {
        max_rel_error: results.iter().map(|r| r.rel_error).fold(0.0, f64::max),
        evaluations: results.iter().map(|r| r.evaluations).sum(),
        flagged,
    };
    let values = results
        .iter()
        .map(|r| {
            if r.value.re.is_finite() && r.value.im.is_finite() {
                r.value
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(SusceptibilitySpectrum {
        grid,
        values,
        params: *p,
        optical: optical.clone(),
        spin: spin.clone(),
        method: SpectrumMethod::Numeric,
        report: Some(report),
    })
}

/// Probe absorption with the coupling field off, which depends only on the
/// optical profile and γ31.
pub fn uncoupled_absorption(
    delta: f64,
    gamma31: f64,
    optical: &BroadeningProfile,
    q: &QuadratureConfig,
) -> Result<f64> {
    if gamma31 <= 0.0 && (optical.kind() != ProfileKind::Lorentzian || optical.is_point_mass()) {
        return Err(Error::invalid(
            "uncoupled absorption needs gamma31 > 0 for non-Lorentzian profiles",
        ));
    }
    if optical.kind() == ProfileKind::Lorentzian {
        let w = gamma31
            + if optical.is_point_mass() {
                0.0
            } else {
                optical.fwhm().unwrap_or(0.0)
            };
        let u = delta - optical.center();
        return Ok(2.0 * w / (w * w + 4.0 * u * u));
    }
    let r = integrate_profile(
        optical,
        |d_o| 2.0 * I / Complex64::new(gamma31, -2.0 * (delta - d_o)),
        &[delta, delta - 0.5 * gamma31, delta + 0.5 * gamma31],
        &q.settings(q.rel_tol),
        q.tail_mapping,
    );
    Ok(r.value.im)
}
