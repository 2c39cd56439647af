//! The four run commands. Each writes into its own run directory and
//! returns a summary of what it produced.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::analysis::{absorption_curve, analyze_curve, status_tag, AbsorptionCurve, EitMetrics};
use crate::config::{FitKind, Method, Mode, RunConfig, SweepPoint};
use crate::csvio::{self, fmt_f64, MetricsRow};
use crate::error::{Error, Result};
use crate::grid::DetuningGrid;
use crate::holeburn::{profile_from_populations, run_burn_sequence, BurnOutcome};
use crate::integrator::{
    integrate_susceptibility, uncoupled_absorption, QuadratureConfig, SusceptibilitySpectrum,
};
use crate::params::{RateParams, Regime, RegimeThresholds};
use crate::profile::{BroadeningProfile, ProfileKind};
use crate::susceptibility::{classify_regime, eit_visibility_closed, eit_width_closed};
use crate::transmission::{
    absorption_baseline, fit_saturated_absorption, transmission_with_baseline, SaturatedFit,
    TransmissionTrace,
};

/// Files written by one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn create(cfg: &RunConfig, out: Option<&Path>) -> Result<Self> {
        let dir = cfg.run_dir(out);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut w = Writer {
            dir,
            files: Vec::new(),
        };
        w.text("config.toml", &cfg.echo())?;
        Ok(w)
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, body).map_err(|e| Error::io(&p, e))
    }

    fn finish(self) -> RunOutput {
        RunOutput {
            dir: self.dir,
            files: self.files,
        }
    }
}

/// Closed form for Lorentzian optical and spin profiles unless `method`
/// asks for quadrature.
pub fn compute_spectrum(
    grid: DetuningGrid,
    p: &RateParams,
    optical: &BroadeningProfile,
    spin: &BroadeningProfile,
    q: &QuadratureConfig,
    method: Method,
) -> Result<SusceptibilitySpectrum> {
    let lorentzian =
        |b: &BroadeningProfile| b.kind() == ProfileKind::Lorentzian && b.center() == 0.0;
    if method == Method::Auto && lorentzian(optical) && lorentzian(spin) {
        let widths = RateParams {
            sigma_opt: optical.fwhm().unwrap_or(0.0),
            sigma_spin: spin.fwhm().unwrap_or(0.0),
            ..*p
        };
        SusceptibilitySpectrum::lorentzian(grid, &widths)
    } else {
        integrate_susceptibility(grid, p, optical, spin, q)
    }
}

/// Uncoupled peak absorption. Symmetric analytic profiles peak at their
/// center; tabulated ones are searched numerically.
pub fn peak_uncoupled(s: &SusceptibilitySpectrum, q: &QuadratureConfig) -> Result<f64> {
    match s.optical.kind() {
        ProfileKind::Tabulated | ProfileKind::Lorentzian => absorption_baseline(s, q),
        ProfileKind::Gaussian | ProfileKind::FlatTop => {
            let v = uncoupled_absorption(s.optical.center(), s.params.gamma31, &s.optical, q)?;
            if v > 0.0 {
                Ok(v)
            } else {
                Err(Error::DegenerateBaseline(v))
            }
        }
    }
}

/// Regime from the measured dip width `w` and peak separation `s`, by
/// inverting `w/s = (√(1+4r²)−1)/(2r)` for `r = Ω/σ_opt`.
pub fn regime_from_shape(width: f64, separation: f64) -> Option<Regime> {
    let q = width / separation;
    if !(q.is_finite() && q > 0.0) {
        return None;
    }
    if q >= 1.0 {
        return Some(Regime::AutlerTownes);
    }
    let r = q / (1.0 - q * q);
    let t = RegimeThresholds::default();
    Some(if r < t.lower {
        Regime::Eit
    } else if r > t.upper {
        Regime::AutlerTownes
    } else {
        Regime::Crossover
    })
}

fn metrics_for(s: &SusceptibilitySpectrum, baseline: f64, regime: Option<Regime>) -> EitMetrics {
    let mut m = analyze_curve(&absorption_curve(s), Some(baseline));
    m.regime = regime;
    m
}

fn params_regime(p: &RateParams) -> Option<Regime> {
    (p.sigma_opt > 0.0)
        .then(|| classify_regime(p).ok())
        .flatten()
}

fn peaks_rows(c: &AbsorptionCurve, m: &EitMetrics) -> Vec<Vec<String>> {
    m.peak_positions
        .iter()
        .map(|&x| {
            let i = ((x - c.grid.start()) / c.grid.step()).round() as usize;
            vec![fmt_f64(x), fmt_f64(c.alpha[i.min(c.alpha.len() - 1)])]
        })
        .collect()
}

/// Result of a single-spectrum run.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRun {
    pub spectrum: SusceptibilitySpectrum,
    pub baseline: f64,
    pub metrics: MetricsRow,
    pub trace: Option<TransmissionTrace>,
}

pub fn run_spectrum(cfg: &RunConfig) -> Result<SpectrumRun> {
    let p = cfg.rate_params()?;
    let q = cfg.quadrature();
    let optical = cfg
        .optical_profile()
        .map_err(|e| e.in_stage("optical profile"))?;
    let spin = cfg.spin_profile().map_err(|e| e.in_stage("spin profile"))?;
    let s = compute_spectrum(cfg.grid()?, &p, &optical, &spin, &q, cfg.method)
        .map_err(|e| e.in_stage("spectrum"))?;
    let baseline = peak_uncoupled(&s, &q).map_err(|e| e.in_stage("baseline"))?;
    let trace = cfg
        .optical_depth
        .map(|d| transmission_with_baseline(&s, d, baseline))
        .transpose()?;
    let metrics = MetricsRow {
        omega: Some(p.omega),
        sigma_opt: cfg.sigma_opt,
        sigma_spin: cfg.sigma_spin,
        metrics: metrics_for(&s, baseline, params_regime(&p)),
    };
    Ok(SpectrumRun {
        spectrum: s,
        baseline,
        metrics,
        trace,
    })
}

pub fn cmd_spectrum(cfg: &RunConfig, out: Option<&Path>) -> Result<RunOutput> {
    let run = run_spectrum(cfg)?;
    let mut w = Writer::create(cfg, out)?;
    csvio::write_spectrum(w.path("spectrum.csv"), &run.spectrum)?;
    csvio::write_metrics(w.path("metrics.csv"), std::slice::from_ref(&run.metrics))?;
    let curve = absorption_curve(&run.spectrum);
    csvio::write_table(
        w.path("peaks.csv"),
        &["delta", "absorption"],
        &peaks_rows(&curve, &run.metrics.metrics),
    )?;
    if let Some(t) = &run.trace {
        csvio::write_trace(w.path("transmission.csv"), t)?;
    }
    if let Some(r) = &run.spectrum.report {
        csvio::write_table(
            w.path("quadrature.csv"),
            &["max_rel_error", "evaluations", "flagged"],
            &[vec![
                fmt_f64(r.max_rel_error),
                r.evaluations.to_string(),
                r.flagged.len().to_string(),
            ]],
        )?;
    }
    let shade = cfg.sigma_opt.unwrap_or(0.0) / 2.0;
    w.text("spectrum.gp", &spectrum_plot(shade, run.trace.is_some()))?;
    Ok(w.finish())
}

/// One sweep row: the metrics plus the generating shapes and abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub optical_shape: ProfileKind,
    pub spin_shape: ProfileKind,
    pub abscissa: f64,
    pub row: MetricsRow,
}

pub const SWEEP_HEADER: [&str; 13] = [
    "optical_shape",
    "spin_shape",
    "abscissa",
    "omega",
    "sigma_opt",
    "sigma_spin",
    "width",
    "vis_contrast",
    "vis_residual",
    "dip_pos",
    "peak_sep",
    "regime",
    "status",
];

impl SweepRecord {
    pub fn fields(&self) -> Vec<String> {
        let mut f = vec![
            self.optical_shape.to_string(),
            self.spin_shape.to_string(),
            fmt_f64(self.abscissa),
        ];
        f.extend(self.row.fields());
        f.push(self.row.metrics.status.clone());
        f
    }
}

fn sweep_point(cfg: &RunConfig, pt: &SweepPoint) -> SweepRecord {
    let p = pt.params;
    let q = cfg.quadrature();
    let result = (|| -> Result<EitMetrics> {
        let optical = BroadeningProfile::new(pt.optical_shape, p.sigma_opt, 0.0)?;
        let spin = BroadeningProfile::new(pt.spin_shape, p.sigma_spin, 0.0)?;
        let s = compute_spectrum(cfg.sweep_grid(&p)?, &p, &optical, &spin, &q, cfg.method)?;
        let baseline = peak_uncoupled(&s, &q)?;
        Ok(metrics_for(&s, baseline, params_regime(&p)))
    })();
    let metrics = result.unwrap_or_else(|e| EitMetrics {
        width: None,
        visibility_contrast: None,
        visibility_residual: None,
        dip_position: None,
        peak_positions: Vec::new(),
        peak_separation: None,
        regime: params_regime(&p),
        center_bump: false,
        status: status_tag(&e),
    });
    SweepRecord {
        optical_shape: pt.optical_shape,
        spin_shape: pt.spin_shape,
        abscissa: pt.abscissa,
        row: MetricsRow {
            omega: Some(p.omega),
            sigma_opt: Some(p.sigma_opt),
            sigma_spin: Some(p.sigma_spin),
            metrics,
        },
    }
}

/// Every planned sweep point in config order; failures become status tags.
pub fn run_sweep(cfg: &RunConfig) -> Result<Vec<SweepRecord>> {
    if !cfg.mode().is_sweep() {
        return Err(Error::validation("mode", "not a sweep mode"));
    }
    let plan = cfg.planned_runs()?;
    Ok(plan.par_iter().map(|pt| sweep_point(cfg, pt)).collect())
}

/// Closed-form companion curve over the sweep range, 200 log-spaced points.
pub fn analytic_curve(cfg: &RunConfig) -> Result<(Vec<&'static str>, Vec<Vec<String>>)> {
    let base = cfg.rate_params()?;
    let (lo, hi) = cfg
        .sweep_values
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    let n = 200;
    let rows = (0..n)
        .map(|i| {
            let x = if hi > lo {
                lo * (hi / lo).powf(i as f64 / (n - 1) as f64)
            } else {
                lo
            };
            match cfg.mode() {
                Mode::SweepWidth => {
                    let p = base.with_omega(x * base.sigma_opt);
                    let w = eit_width_closed(&p).map(|e| e.width / base.sigma_opt).ok();
                    vec![fmt_f64(x), csvio::fmt_opt(w)]
                }
                _ => {
                    let p = base.with_omega((x * base.sigma_opt * base.sigma_spin).sqrt());
                    vec![fmt_f64(x), csvio::fmt_opt(eit_visibility_closed(&p).ok())]
                }
            }
        })
        .collect();
    let header = match cfg.mode() {
        Mode::SweepWidth => vec!["abscissa", "width_over_sigma_opt"],
        _ => vec!["abscissa", "visibility"],
    };
    Ok((header, rows))
}

pub fn cmd_sweep(cfg: &RunConfig, out: Option<&Path>) -> Result<RunOutput> {
    let records = run_sweep(cfg)?;
    let mut w = Writer::create(cfg, out)?;
    let rows: Vec<Vec<String>> = records.iter().map(SweepRecord::fields).collect();
    csvio::write_table(w.path("sweep.csv"), &SWEEP_HEADER, &rows)?;
    let (header, rows) = analytic_curve(cfg)?;
    csvio::write_table(w.path("analytic.csv"), &header, &rows)?;
    let mut combos: Vec<(ProfileKind, ProfileKind)> = Vec::new();
    for r in &records {
        if !combos.contains(&(r.optical_shape, r.spin_shape)) {
            combos.push((r.optical_shape, r.spin_shape));
        }
    }
    w.text("sweep.gp", &sweep_plot(cfg.mode(), &combos))?;
    Ok(w.finish())
}

/// Result of the hole-burn pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct HoleburnRun {
    pub burn: BurnOutcome,
    pub profile: BroadeningProfile,
    pub spectrum: SusceptibilitySpectrum,
    pub metrics: MetricsRow,
}

pub fn run_holeburn(cfg: &RunConfig) -> Result<HoleburnRun> {
    let (ls, seq) = cfg.burn_setup()?;
    let burn = run_burn_sequence(&ls, &seq)?;
    if !(burn.report.feature_population > 1e-12) {
        return Err(Error::AllZero.in_stage("feature"));
    }
    let profile = profile_from_populations(&burn.populations, &ls, &cfg.probe_transition(&seq))
        .map_err(|e| e.in_stage("profile"))?;
    let p = cfg.rate_params()?;
    let spin = cfg.spin_profile().map_err(|e| e.in_stage("spin profile"))?;
    let q = cfg.quadrature();
    let spectrum = integrate_susceptibility(cfg.grid()?, &p, &profile, &spin, &q)
        .map_err(|e| e.in_stage("spectrum"))?;
    let baseline = peak_uncoupled(&spectrum, &q).map_err(|e| e.in_stage("baseline"))?;
    let metrics = MetricsRow {
        omega: Some(p.omega),
        sigma_opt: Some(p.sigma_opt),
        sigma_spin: Some(p.sigma_spin),
        metrics: metrics_for(&spectrum, baseline, params_regime(&p)),
    };
    Ok(HoleburnRun {
        burn,
        profile,
        spectrum,
        metrics,
    })
}

pub fn cmd_holeburn(cfg: &RunConfig, out: Option<&Path>) -> Result<RunOutput> {
    let run = run_holeburn(cfg)?;
    let mut w = Writer::create(cfg, out)?;
    csvio::write_populations(w.path("populations.csv"), &run.burn.populations)?;
    csvio::write_profile(w.path("profile.csv"), &run.profile)?;
    csvio::write_spectrum(w.path("spectrum.csv"), &run.spectrum)?;
    csvio::write_metrics(w.path("metrics.csv"), std::slice::from_ref(&run.metrics))?;
    let r = &run.burn.report;
    csvio::write_table(
        w.path("burn_report.csv"),
        &[
            "passes_selection",
            "passes_emptying",
            "converged",
            "feature_population",
            "control_resonant_outside",
            "center_bump",
        ],
        &[vec![
            r.passes[0].to_string(),
            r.passes[1].to_string(),
            r.converged.to_string(),
            fmt_f64(r.feature_population),
            r.control_resonant_outside.len().to_string(),
            run.metrics.metrics.center_bump.to_string(),
        ]],
    )?;
    let (_, seq) = cfg.burn_setup()?;
    w.text("holeburn.gp", &holeburn_plot(seq.trench_halfwidth))?;
    Ok(w.finish())
}

/// Result of analyzing an external trace.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeRun {
    pub metrics: Option<MetricsRow>,
    pub fit: Option<SaturatedFit>,
}

pub fn run_analyze(cfg: &RunConfig) -> Result<AnalyzeRun> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| Error::validation("input", "required"))?;
    let trace = csvio::read_trace(input, cfg.optical_depth)?;
    let fit = match cfg.fit {
        FitKind::Dip => None,
        _ => Some(fit_saturated_absorption(&trace).map_err(|e| e.in_stage("saturated fit"))?),
    };
    let metrics = match cfg.fit {
        FitKind::Saturated => None,
        _ => {
            let depth = cfg.optical_depth.or(fit.map(|f| f.optical_depth));
            let mut m = analyze_curve(&trace.absorbance_curve(), depth);
            if m.width.is_none() {
                let e = crate::analysis::extract_fwhm_dip(&trace.absorbance_curve())
                    .err()
                    .unwrap_or(Error::NoDip);
                return Err(e.in_stage("dip analysis"));
            }
            m.regime = match (cfg.omega, cfg.sigma_opt) {
                (Some(omega), Some(sigma_opt)) => RateParams::new(omega, 0.0, 0.0, sigma_opt, 0.0)
                    .ok()
                    .and_then(|p| classify_regime(&p).ok()),
                _ => m
                    .width
                    .zip(m.peak_separation)
                    .and_then(|(w, s)| regime_from_shape(w, s)),
            };
            Some(MetricsRow {
                omega: cfg.omega,
                sigma_opt: cfg.sigma_opt,
                sigma_spin: cfg.sigma_spin,
                metrics: m,
            })
        }
    };
    Ok(AnalyzeRun { metrics, fit })
}

pub fn cmd_analyze(cfg: &RunConfig, out: Option<&Path>) -> Result<RunOutput> {
    let run = run_analyze(cfg)?;
    let mut w = Writer::create(cfg, out)?;
    if let Some(m) = &run.metrics {
        csvio::write_metrics(w.path("metrics.csv"), std::slice::from_ref(m))?;
    }
    if let Some(f) = &run.fit {
        csvio::write_table(
            w.path("fit.csv"),
            &["optical_depth", "width", "center", "residual_norm"],
            &[vec![
                fmt_f64(f.optical_depth),
                fmt_f64(f.width),
                fmt_f64(f.center),
                fmt_f64(f.residual_norm),
            ]],
        )?;
    }
    Ok(w.finish())
}

/// Dispatch on the configured mode.
pub fn run_command(cfg: &RunConfig, out: Option<&Path>) -> Result<RunOutput> {
    match cfg.mode() {
        Mode::Spectrum => cmd_spectrum(cfg, out),
        Mode::SweepWidth | Mode::SweepVisibility => cmd_sweep(cfg, out),
        Mode::Holeburn => cmd_holeburn(cfg, out),
        Mode::Analyze => cmd_analyze(cfg, out),
    }
}

fn spectrum_plot(shade: f64, with_trace: bool) -> String {
    let mut s = String::from(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 'two-photon detuning'\n\
         set ylabel 'absorption (Im chi)'\n",
    );
    if shade > 0.0 {
        s.push_str(&format!(
            "set object 1 rect from {:.6e}, graph 0 to {:.6e}, graph 1 fc rgb '#dde8f5' fs solid 0.5 behind\n",
            -shade, shade
        ));
    }
    s.push_str("plot 'spectrum.csv' using 1:3 with lines lw 2 title 'absorption'\n");
    if with_trace {
        s.push_str(
            "set terminal push\nset output\nset ylabel 'transmission'\n\
             plot 'transmission.csv' using 1:2 with lines lw 2 title 'transmission'\nset terminal pop\n",
        );
    }
    s
}

fn sweep_plot(mode: Mode, combos: &[(ProfileKind, ProfileKind)]) -> String {
    let (xlabel, ylabel, ycol, logy) = match mode {
        Mode::SweepWidth => ("Omega / sigma_opt", "width / sigma_opt", "($7/$5)", true),
        _ => ("Omega^2 / (sigma_opt sigma_spin)", "visibility", "8", false),
    };
    let mut s = format!(
        "set datafile separator ','\nset logscale x\n{}set xlabel '{xlabel}'\nset ylabel '{ylabel}'\nset key left top\n",
        if logy { "set logscale y\n" } else { "" }
    );
    let mut parts: Vec<String> = combos
        .iter()
        .map(|(o, sp)| {
            format!(
                "'sweep.csv' using (strcol(1) eq '{o}' && strcol(2) eq '{sp}' ? $3 : 1/0):{ycol} with linespoints title '{o}/{sp}'"
            )
        })
        .collect();
    parts.push("'analytic.csv' using 1:2 with lines dt 2 lw 2 title 'closed form'".into());
    s.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
    s
}

fn holeburn_plot(trench: f64) -> String {
    format!(
        "set datafile separator ','\n\
         set multiplot layout 2,1\n\
         set xlabel 'optical shift'\nset ylabel 'absorber density'\n\
         set object 1 rect from {:.6e}, graph 0 to {:.6e}, graph 1 fc rgb '#f0e6d8' fs solid 0.5 behind\n\
         plot 'profile.csv' using 1:2 with lines lw 2 title 'burned profile'\n\
         unset object 1\n\
         set xlabel 'two-photon detuning'\nset ylabel 'absorption (Im chi)'\n\
         plot 'spectrum.csv' using 1:3 with lines lw 2 title 'probe absorption'\n\
         unset multiplot\n",
        -trench, trench
    )
}
