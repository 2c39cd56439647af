//! Model-free EIT metrics from absorption curves: dip FWHM, contrast
//! visibility, absorption peak positions, dispersion slope, and a Lorentzian
//! dip fit for the narrow-window regime.

use crate::error::{Error, Result};
use crate::fit::{levenberg_marquardt, LmOptions};
use crate::grid::DetuningGrid;
use crate::integrator::SusceptibilitySpectrum;
use crate::params::Regime;

/// Nonnegative probe absorption (imaginary part of the susceptibility) on a
/// detuning grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionCurve {
    pub grid: DetuningGrid,
    pub alpha: Vec<f64>,
    /// Number of samples clipped from negative values to zero.
    pub clipped: usize,
}

impl AbsorptionCurve {
    pub fn new(grid: DetuningGrid, alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() != grid.count() {
            return Err(Error::invalid(format!(
                "{} samples for a {}-point grid",
                alpha.len(),
                grid.count()
            )));
        }
        if let Some(v) = alpha.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!(
                "absorption must be finite and >= 0, got {v}"
            )));
        }
        Ok(AbsorptionCurve {
            grid,
            alpha,
            clipped: 0,
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        AbsorptionCurve {
            grid: self.grid,
            alpha: self.alpha.iter().map(|a| a * factor).collect(),
            clipped: self.clipped,
        }
    }
}

pub fn absorption_curve(s: &SusceptibilitySpectrum) -> AbsorptionCurve {
    let mut clipped = 0;
    let alpha = s
        .values
        .iter()
        .map(|v| {
            if v.im < 0.0 {
                clipped += 1;
                0.0
            } else {
                v.im
            }
        })
        .collect();
    AbsorptionCurve {
        grid: s.grid,
        alpha,
        clipped,
    }
}

/// Run of equal consecutive samples.
#[derive(Debug, Clone, Copy)]
struct Run {
    start: usize,
    end: usize,
    value: f64,
}

impl Run {
    fn mid(&self) -> usize {
        (self.start + self.end) / 2
    }
}

fn runs(y: &[f64]) -> Vec<Run> {
    let mut out: Vec<Run> = Vec::new();
    for (i, &v) in y.iter().enumerate() {
        match out.last_mut() {
            Some(r) if r.value == v => r.end = i,
            _ => out.push(Run {
                start: i,
                end: i,
                value: v,
            }),
        }
    }
    out
}

/// Indices into `runs` of interior local minima (or maxima when `maxima`).
fn interior_extrema(rs: &[Run], maxima: bool) -> Vec<usize> {
    (1..rs.len().saturating_sub(1))
        .filter(|&k| {
            let (l, c, r) = (rs[k - 1].value, rs[k].value, rs[k + 1].value);
            if maxima {
                c > l && c > r
            } else {
                c < l && c < r
            }
        })
        .collect()
}

/// Sub-sample position of an extremum from the parabola through three points.
fn refine(grid: &DetuningGrid, y: &[f64], i: usize) -> f64 {
    let x = grid.point(i);
    if i == 0 || i + 1 >= y.len() {
        return x;
    }
    let (a, b, c) = (y[i - 1], y[i], y[i + 1]);
    let den = a - 2.0 * b + c;
    if den == 0.0 {
        return x;
    }
    let shift = 0.5 * (a - c) / den;
    if shift.abs() > 1.0 {
        return x;
    }
    x + shift * grid.step()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipOptions {
    /// Minimum dip depth as a fraction of the flanking level.
    pub depth_threshold: f64,
}

impl Default for DipOptions {
    fn default() -> Self {
        DipOptions {
            depth_threshold: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipMeasurement {
    pub width: f64,
    pub dip_index: usize,
    pub dip_position: f64,
    pub alpha_min: f64,
    /// Mean of the two adjacent local maxima.
    pub alpha_ref: f64,
    pub left_peak: usize,
    pub right_peak: usize,
    pub left_crossing: f64,
    pub right_crossing: f64,
    /// `(alpha_ref − alpha_min)/alpha_ref`
    pub depth: f64,
}

pub fn extract_fwhm_dip(c: &AbsorptionCurve) -> Result<DipMeasurement> {
    extract_fwhm_dip_with(c, DipOptions::default())
}

/// FWHM of the deepest interior dip, measured between the half-level
/// crossings. The half level sits midway between the dip minimum and the
/// mean of the nearest local maxima on either side; a side with no interior
/// maximum uses the grid edge.
pub fn extract_fwhm_dip_with(c: &AbsorptionCurve, opts: DipOptions) -> Result<DipMeasurement> {
    let y = &c.alpha;
    let rs = runs(y);
    let minima = interior_extrema(&rs, false);
    let &k = minima
        .iter()
        .min_by(|&&a, &&b| rs[a].value.total_cmp(&rs[b].value))
        .ok_or(Error::NoDip)?;

    let mut l = k;
    while l > 0 && rs[l - 1].value > rs[l].value {
        l -= 1;
    }
    let mut r = k;
    while r + 1 < rs.len() && rs[r + 1].value > rs[r].value {
        r += 1;
    }
    let (left_peak, right_peak) = (rs[l].mid(), rs[r].mid());
    let alpha_min = rs[k].value;
    let alpha_ref = 0.5 * (rs[l].value + rs[r].value);
    let depth = if alpha_ref > 0.0 {
        (alpha_ref - alpha_min) / alpha_ref
    } else {
        0.0
    };
    if depth < opts.depth_threshold {
        return Err(Error::NotResolved {
            depth,
            threshold: opts.depth_threshold,
        });
    }
    let half = 0.5 * (alpha_ref + alpha_min);
    let unresolved = Error::NotResolved {
        depth,
        threshold: opts.depth_threshold,
    };

    let g = &c.grid;
    let (lo, hi) = (rs[k].start, rs[k].end);
    let left_crossing = (rs[l].start..lo)
        .rev()
        .find(|&i| y[i] >= half)
        .map(|i| g.point(i) + g.step() * (y[i] - half) / (y[i] - y[i + 1]));
    let right_crossing = (hi + 1..=rs[r].end)
        .find(|&i| y[i] >= half)
        .map(|i| g.point(i) - g.step() * (y[i] - half) / (y[i] - y[i - 1]));
    let (Some(left_crossing), Some(right_crossing)) = (left_crossing, right_crossing) else {
        return Err(unresolved);
    };

    let dip_index = rs[k].mid();
    let dip_position = if lo == hi {
        refine(g, y, dip_index)
    } else {
        0.5 * (g.point(lo) + g.point(hi))
    };
    Ok(DipMeasurement {
        width: right_crossing - left_crossing,
        dip_index,
        dip_position,
        alpha_min,
        alpha_ref,
        left_peak,
        right_peak,
        left_crossing,
        right_crossing,
        depth,
    })
}

/// `(max − min)/(max + min)` of the absorption inside `[lo, hi]`.
pub fn extract_visibility_contrast(c: &AbsorptionCurve, window: (f64, f64)) -> Result<f64> {
    let (lo, hi) = window;
    let mut it = c
        .grid
        .points()
        .zip(&c.alpha)
        .filter(|(x, _)| *x >= lo && *x <= hi)
        .map(|(_, &a)| a)
        .peekable();
    if it.peek().is_none() {
        return Err(Error::EmptyWindow);
    }
    let (mn, mx) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(mn, mx), a| {
        (mn.min(a), mx.max(a))
    });
    if mx + mn == 0.0 {
        return Ok(0.0);
    }
    Ok(((mx - mn) / (mx + mn)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AbsorptionPeaks {
    /// Up to two positions, ascending.
    pub positions: Vec<f64>,
    pub separation: Option<f64>,
}

/// The two tallest interior local maxima.
pub fn find_absorption_peaks(c: &AbsorptionCurve) -> AbsorptionPeaks {
    let rs = runs(&c.alpha);
    let mut maxima = interior_extrema(&rs, true);
    maxima.sort_by(|&a, &b| rs[b].value.total_cmp(&rs[a].value));
    let mut positions: Vec<f64> = maxima
        .iter()
        .take(2)
        .map(|&k| {
            let run = rs[k];
            if run.start == run.end {
                refine(&c.grid, &c.alpha, run.start)
            } else {
                0.5 * (c.grid.point(run.start) + c.grid.point(run.end))
            }
        })
        .collect();
    positions.sort_by(f64::total_cmp);
    let separation = (positions.len() == 2).then(|| positions[1] - positions[0]);
    AbsorptionPeaks {
        positions,
        separation,
    }
}

/// Minimum number of grid points across the dip FWHM for a slope estimate.
pub const SLOPE_MIN_POINTS: usize = 5;

/// Derivative of the real part at the absorption dip (at δ = 0 when no dip is
/// resolved), by a five-point central difference.
pub fn dispersion_slope(s: &SusceptibilitySpectrum) -> Result<f64> {
    let curve = absorption_curve(s);
    let g = &s.grid;
    let h = g.step();
    let index = match extract_fwhm_dip(&curve) {
        Ok(m) => {
            let points = m.width / h;
            if points < SLOPE_MIN_POINTS as f64 {
                return Err(Error::GridTooCoarse {
                    points,
                    required: SLOPE_MIN_POINTS,
                });
            }
            m.dip_index
        }
        Err(Error::NoDip | Error::NotResolved { .. }) => {
            let i = ((0.0 - g.start()) / h).round();
            (i.max(1.0) as usize).min(g.count() - 2)
        }
        Err(e) => return Err(e),
    };
    let re = s.real();
    let n = re.len();
    if index >= 2 && index + 2 < n {
        Ok((8.0 * (re[index + 1] - re[index - 1]) - (re[index + 2] - re[index - 2])) / (12.0 * h))
    } else if index >= 1 && index + 1 < n {
        Ok((re[index + 1] - re[index - 1]) / (2.0 * h))
    } else {
        Err(Error::GridTooCoarse {
            points: 0.0,
            required: SLOPE_MIN_POINTS,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianDipFit {
    pub width: f64,
    pub depth: f64,
    pub center: f64,
    pub background: f64,
    /// RMS residual divided by the fitted depth.
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipFitOptions {
    /// Half-width of the fit window in units of the model-free width.
    pub window_widths: f64,
    /// Fits with a larger relative residual are rejected.
    pub max_residual: f64,
    pub dip: DipOptions,
}

impl Default for DipFitOptions {
    fn default() -> Self {
        DipFitOptions {
            window_widths: 3.0,
            max_residual: 0.02,
            dip: DipOptions::default(),
        }
    }
}

pub fn fit_lorentzian_dip(c: &AbsorptionCurve) -> Result<LorentzianDipFit> {
    fit_lorentzian_dip_with(c, DipFitOptions::default())
}

/// Least-squares fit of `background − depth·(w²/4)/((δ−c)² + w²/4)` in a
/// window around the dip, started from the model-free dip metrics.
pub fn fit_lorentzian_dip_with(
    c: &AbsorptionCurve,
    opts: DipFitOptions,
) -> Result<LorentzianDipFit> {
    let m = extract_fwhm_dip_with(c, opts.dip)?;
    let half_window = opts.window_widths * m.width;
    let (xs, ys): (Vec<f64>, Vec<f64>) = c
        .grid
        .points()
        .zip(&c.alpha)
        .filter(|(x, _)| (x - m.dip_position).abs() <= half_window)
        .unzip();
    if xs.len() < 6 {
        return Err(Error::GridTooCoarse {
            points: xs.len() as f64,
            required: 6,
        });
    }
    let model = |p: &[f64], x: f64| {
        let hw2 = 0.25 * p[3] * p[3];
        p[0] - p[1] * hw2 / ((x - p[2]).powi(2) + hw2)
    };
    let p0 = [
        m.alpha_ref,
        m.alpha_ref - m.alpha_min,
        m.dip_position,
        m.width,
    ];
    let scale = m.alpha_ref.abs().max(f64::MIN_POSITIVE);
    let scales = [scale, scale, m.width, m.width];
    let r = levenberg_marquardt(
        |p, out| {
            for (o, (x, y)) in out.iter_mut().zip(xs.iter().zip(&ys)) {
                *o = model(p, *x) - y;
            }
        },
        xs.len(),
        &p0,
        &scales,
        LmOptions::default(),
    );
    let [background, depth, center, width] =
        [r.params[0], r.params[1], r.params[2], r.params[3].abs()];
    if !r.converged || !(width > 0.0) || !(depth > 0.0) || r.params.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitDiverged(format!(
            "Lorentzian dip fit ended at {:?}",
            r.params
        )));
    }
    let residual_norm = r.rms / depth;
    if residual_norm > opts.max_residual {
        return Err(Error::FitDiverged(format!(
            "relative residual {residual_norm:.3e} exceeds {:.3e}",
            opts.max_residual
        )));
    }
    Ok(LorentzianDipFit {
        width,
        depth,
        center,
        background,
        residual_norm,
    })
}

/// Extracted EIT metrics of one curve. Missing values carry the reason in
/// `status`.
#[derive(Debug, Clone, PartialEq)]
pub struct EitMetrics {
    pub width: Option<f64>,
    pub visibility_contrast: Option<f64>,
    /// Residual definition; needs the uncoupled baseline.
    pub visibility_residual: Option<f64>,
    pub dip_position: Option<f64>,
    pub peak_positions: Vec<f64>,
    pub peak_separation: Option<f64>,
    pub regime: Option<Regime>,
    /// A local absorption maximum at δ ≈ 0 inside the transparency window.
    pub center_bump: bool,
    pub status: String,
}

/// Every model-free metric of `c`. The contrast window spans the two
/// absorption peaks, or the dip flanks when fewer peaks are found. The
/// residual visibility is filled in when `baseline` (the uncoupled peak
/// absorption on the same scale) is given.
pub fn analyze_curve(c: &AbsorptionCurve, baseline: Option<f64>) -> EitMetrics {
    let peaks = find_absorption_peaks(c);
    let dip = extract_fwhm_dip(c);
    let status = match &dip {
        Ok(_) => "ok".to_string(),
        Err(e) => status_tag(e),
    };
    let window = match (&peaks.positions[..], &dip) {
        ([a, b], _) => (*a - c.grid.step(), *b + c.grid.step()),
        (_, Ok(m)) => (c.grid.point(m.left_peak), c.grid.point(m.right_peak)),
        _ => (c.grid.start(), c.grid.stop()),
    };
    let dip = dip.ok();
    let visibility_contrast = extract_visibility_contrast(c, window).ok();
    let visibility_residual = baseline.filter(|b| *b > 0.0).map(|b| {
        let at = match &dip {
            Some(m) => m.alpha_min,
            None => value_near(c, 0.0),
        };
        (1.0 - at / b).clamp(0.0, 1.0)
    });
    EitMetrics {
        width: dip.map(|m| m.width),
        visibility_contrast,
        visibility_residual,
        dip_position: dip.map(|m| m.dip_position),
        peak_positions: peaks.positions.clone(),
        peak_separation: peaks.separation,
        regime: None,
        center_bump: has_center_bump(c, window),
        status,
    }
}

fn value_near(c: &AbsorptionCurve, x: f64) -> f64 {
    let i = ((x - c.grid.start()) / c.grid.step())
        .round()
        .clamp(0.0, (c.grid.count() - 1) as f64) as usize;
    c.alpha[i]
}

/// Whether a local absorption maximum lies within one grid step of δ = 0,
/// strictly inside `window`.
pub fn has_center_bump(c: &AbsorptionCurve, window: (f64, f64)) -> bool {
    let rs = runs(&c.alpha);
    interior_extrema(&rs, true).into_iter().any(|k| {
        let x = 0.5 * (c.grid.point(rs[k].start) + c.grid.point(rs[k].end));
        x.abs() <= c.grid.step() * 1.01 && x > window.0 && x < window.1
    })
}

/// Short machine-readable tag for an analysis failure.
pub fn status_tag(e: &Error) -> String {
    match e.root() {
        Error::NoDip => "NoDip".into(),
        Error::NotResolved { .. } => "NotResolved".into(),
        Error::FitDiverged(_) => "FitDiverged".into(),
        Error::QuadratureNotConverged { .. } => "QuadratureNotConverged".into(),
        Error::GridTooCoarse { .. } => "GridTooCoarse".into(),
        other => format!("{other}")
            .split(':')
            .next()
            .unwrap_or("error")
            .replace(',', ";"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::RateParams;
    use num_complex::Complex64;

    fn lorentz_dip(
        grid: DetuningGrid,
        bg: f64,
        depth: f64,
        center: f64,
        w: f64,
    ) -> AbsorptionCurve {
        let alpha = grid
            .points()
            .map(|x| bg - depth * 0.25 * w * w / ((x - center).powi(2) + 0.25 * w * w))
            .collect();
        AbsorptionCurve::new(grid, alpha).unwrap()
    }

    fn closed_form_curve(p: &RateParams, half_span: f64, count: usize) -> AbsorptionCurve {
        let grid = DetuningGrid::symmetric(half_span, count).unwrap();
        absorption_curve(&SusceptibilitySpectrum::lorentzian(grid, p).unwrap())
    }

    #[test]
    fn clipping_counts_negative_samples() {
        let grid = DetuningGrid::symmetric(1.0, 3).unwrap();
        let p = RateParams::new(1.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        let bp = crate::profile::BroadeningProfile::point_mass(0.0);
        let s = SusceptibilitySpectrum::from_values(
            grid,
            vec![
                Complex64::new(1.0, 0.5),
                Complex64::new(0.0, -1e-15),
                Complex64::new(2.0, 0.0),
            ],
            p,
            bp.clone(),
            bp,
        )
        .unwrap();
        let c = absorption_curve(&s);
        assert_eq!(c.alpha, vec![0.5, 0.0, 0.0]);
        assert_eq!(c.clipped, 1);
    }

    #[test]
    fn synthetic_dip_width() {
        let w = 0.8;
        let grid = DetuningGrid::symmetric(10.0 * w, 1001).unwrap();
        assert!(grid.step() <= w / 50.0);
        let m = extract_fwhm_dip(&lorentz_dip(grid, 1.0, 1.0, 0.0, w)).unwrap();
        assert!((m.width / w - 1.0).abs() < 0.005, "{}", m.width);
    }

    #[test]
    fn closed_form_dip_matches_closed_width() {
        let so = 1.0;
        let om = 0.1 * so;
        let p = RateParams::new(om, 1e-4 * so, 1e-4 * so, so, 0.0).unwrap();
        let c = closed_form_curve(&p, 0.06, 6001);
        let m = extract_fwhm_dip(&c).unwrap();
        let expect = crate::susceptibility::leading_width(om, so);
        assert!(
            (m.width / expect - 1.0).abs() < 0.01,
            "{} vs {}",
            m.width,
            expect
        );
    }

    #[test]
    fn flat_and_single_peak_have_no_dip() {
        let grid = DetuningGrid::symmetric(1.0, 11).unwrap();
        let flat = AbsorptionCurve::new(grid, vec![0.3; 11]).unwrap();
        assert!(matches!(extract_fwhm_dip(&flat), Err(Error::NoDip)));
        let p = RateParams::new(0.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            extract_fwhm_dip(&closed_form_curve(&p, 5.0, 101)),
            Err(Error::NoDip)
        ));
    }

    #[test]
    fn shallow_dip_is_not_resolved() {
        let grid = DetuningGrid::symmetric(5.0, 501).unwrap();
        let c = lorentz_dip(grid, 1.0, 0.02, 0.0, 1.0);
        assert!(matches!(
            extract_fwhm_dip(&c),
            Err(Error::NotResolved { .. })
        ));
    }

    #[test]
    fn contrast_examples() {
        let grid = DetuningGrid::symmetric(5.0, 501).unwrap();
        let c = lorentz_dip(grid, 1.0, 1.0, 0.0, 1.0);
        assert_eq!(extract_visibility_contrast(&c, (-5.0, 5.0)).unwrap(), 1.0);
        let flat = AbsorptionCurve::new(grid, vec![0.7; 501]).unwrap();
        assert_eq!(
            extract_visibility_contrast(&flat, (-5.0, 5.0)).unwrap(),
            0.0
        );
        assert!(matches!(
            extract_visibility_contrast(&c, (6.0, 7.0)),
            Err(Error::EmptyWindow)
        ));

        let (om, so, ss) = (0.3, 1.0, 0.01);
        let p = RateParams::new(om, 0.0, 0.0, so, ss).unwrap();
        let c = closed_form_curve(&p, 0.5, 20001);
        let v = extract_visibility_contrast(&c, (-0.5, 0.5)).unwrap();
        let expect = om * om / (om * om + 2.0 * so * ss);
        assert!((v - expect).abs() < 0.01, "{v} vs {expect}");
    }

    #[test]
    fn peak_examples() {
        let p = RateParams::new(50.0, 0.0, 0.0, 10.0, 0.0).unwrap();
        let pk = find_absorption_peaks(&closed_form_curve(&p, 60.0, 12001));
        assert_eq!(pk.positions.len(), 2);
        assert!((pk.positions[0] + 25.0).abs() < 0.01 && (pk.positions[1] - 25.0).abs() < 0.01);
        assert!((pk.separation.unwrap() - 50.0).abs() < 0.01);

        let p = RateParams::new(0.0, 0.1, 1.0, 1.0, 0.0).unwrap();
        let pk = find_absorption_peaks(&closed_form_curve(&p, 5.0, 101));
        assert_eq!(pk.positions.len(), 1);
        assert!(pk.positions[0].abs() < 1e-12);

        let grid = DetuningGrid::symmetric(1.0, 11).unwrap();
        let flat = AbsorptionCurve::new(grid, vec![0.3; 11]).unwrap();
        assert!(find_absorption_peaks(&flat).positions.is_empty());
    }

    #[test]
    fn slope_examples() {
        let so = 1.0;
        let slope_for = |om: f64| {
            let p = RateParams::new(om, 0.0, 1e-6, so, 0.0).unwrap();
            let w = om * om / so;
            let grid = DetuningGrid::symmetric(0.75 * om, 2001).unwrap();
            assert!(grid.step() < w / 5.0);
            dispersion_slope(&SusceptibilitySpectrum::lorentzian(grid, &p).unwrap()).unwrap()
        };
        let s1 = slope_for(0.1);
        assert!((s1 / (4.0 / 0.01) - 1.0).abs() < 0.01, "{s1}");
        let s2 = slope_for(0.2);
        assert!((s1 / s2 - 4.0).abs() < 0.04);

        let grid = DetuningGrid::symmetric(1.0, 101).unwrap();
        let p = RateParams::new(1.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        let bp = crate::profile::BroadeningProfile::point_mass(0.0);
        let s = SusceptibilitySpectrum::from_values(
            grid,
            vec![Complex64::new(0.0, 1.0); 101],
            p,
            bp.clone(),
            bp,
        )
        .unwrap();
        assert_eq!(dispersion_slope(&s).unwrap(), 0.0);
    }

    #[test]
    fn coarse_grid_is_rejected_for_slope() {
        let p = RateParams::new(0.1, 0.0, 1e-6, 1.0, 0.0).unwrap();
        let grid = DetuningGrid::symmetric(0.075, 21).unwrap();
        let s = SusceptibilitySpectrum::lorentzian(grid, &p).unwrap();
        assert!(matches!(
            dispersion_slope(&s),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn lorentzian_fit_recovers_own_model() {
        let grid = DetuningGrid::new(-4.0, 5.0, 901).unwrap();
        let c = lorentz_dip(grid, 2.0, 1.3, 0.37, 0.9);
        let f = fit_lorentzian_dip(&c).unwrap();
        assert!((f.width / 0.9 - 1.0).abs() < 1e-6);
        assert!((f.depth / 1.3 - 1.0).abs() < 1e-6);
        assert!((f.center / 0.37 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn lorentzian_fit_agrees_with_model_free_width() {
        let so = 1.0;
        let p = RateParams::new(0.05 * so, 1e-6, 1e-6, so, 0.0).unwrap();
        let c = closed_form_curve(&p, 0.04, 8001);
        let direct = extract_fwhm_dip(&c).unwrap().width;
        let fit = fit_lorentzian_dip(&c).unwrap().width;
        assert!((fit / direct - 1.0).abs() < 0.02, "{fit} vs {direct}");
    }

    #[test]
    fn lorentzian_fit_rejects_split_lines() {
        let p = RateParams::new(5.0, 1e-4, 1e-4, 1.0, 0.0).unwrap();
        let c = closed_form_curve(&p, 6.0, 4001);
        assert!(matches!(fit_lorentzian_dip(&c), Err(Error::FitDiverged(_))));
    }
}
