//! Run configuration: a flat TOML file, one key per line.
//!
//! Keys absent from the file take the defaults listed on [`RunConfig`];
//! [`RunConfig::echo`] prints the resolved file, and its hash names the run
//! directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::DetuningGrid;
use crate::holeburn::{BurnSequence, LevelStructure, ProbeTransition};
use crate::integrator::{QuadratureConfig, TailMapping};
use crate::params::RateParams;
use crate::profile::{BroadeningProfile, ProfileKind};
use crate::susceptibility::leading_width;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Spectrum,
    SweepWidth,
    SweepVisibility,
    Holeburn,
    Analyze,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Spectrum => "spectrum",
            Mode::SweepWidth => "sweep_width",
            Mode::SweepVisibility => "sweep_visibility",
            Mode::Holeburn => "holeburn",
            Mode::Analyze => "analyze",
        }
    }

    pub fn is_sweep(self) -> bool {
        matches!(self, Mode::SweepWidth | Mode::SweepVisibility)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    Tangent,
    Truncate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Closed form for Lorentzian × Lorentzian, numeric otherwise.
    Auto,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    Dip,
    Saturated,
    Both,
}

/// Every key of the configuration file.
///
/// | key | default |
/// |---|---|
/// | `gamma21`, `gamma31` | `1e-4` × `sigma_opt` (× `feature_fwhm` in holeburn mode) |
/// | `optical_shape`, `spin_shape` | `lorentzian` |
/// | `grid_points` | 2001 (301 in holeburn mode) |
/// | `rel_tol`, `max_depth` | `1e-6`, 30 |
/// | `tail`, `truncate_fwhm` | `tangent`, 1000 |
/// | `spin_shortcut`, `method` | `true`, `auto` |
/// | `optical_shapes`, `spin_shapes` | `[optical_shape]`, `[spin_shape]` |
/// | `output_dir` | `runs` |
/// | `fit` | `dip` |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub output_dir: PathBuf,

    pub omega: Option<f64>,
    pub gamma21: Option<f64>,
    pub gamma31: Option<f64>,
    pub sigma_opt: Option<f64>,
    pub sigma_spin: Option<f64>,

    pub optical_shape: ProfileKind,
    pub spin_shape: ProfileKind,
    /// `shift,density` CSV for a tabulated optical profile.
    pub optical_table: Option<PathBuf>,
    pub spin_table: Option<PathBuf>,

    pub grid_start: Option<f64>,
    pub grid_stop: Option<f64>,
    pub grid_halfwidth: Option<f64>,
    pub grid_points: Option<usize>,

    pub rel_tol: f64,
    pub max_depth: u32,
    pub tail: Tail,
    /// Truncation span in FWHM units when `tail = "truncate"`.
    pub truncate_fwhm: f64,
    pub spin_shortcut: bool,
    pub method: Method,

    pub optical_depth: Option<f64>,

    /// Ω/σ_opt (width sweep) or Ω²/(σ_opt σ_spin) (visibility sweep).
    pub sweep_values: Vec<f64>,
    pub optical_shapes: Vec<ProfileKind>,
    pub spin_shapes: Vec<ProfileKind>,
    /// Grid points per sweep run; chosen from the expected width when absent.
    pub sweep_points: Option<usize>,

    pub ground_offsets: Option<[f64; 3]>,
    pub excited_offsets: Option<[f64; 3]>,
    pub strengths: Option<[[f64; 3]; 3]>,
    pub background_fwhm: Option<f64>,
    pub target_class: Option<f64>,
    pub shared_excited: Option<usize>,
    pub auxiliary_excited: Option<usize>,
    pub probe_ground: Option<usize>,
    pub control_ground: Option<usize>,
    pub trench_halfwidth: Option<f64>,
    pub feature_fwhm: Option<f64>,
    pub class_step: Option<f64>,
    pub span_halfwidth: Option<f64>,
    pub transfer_fraction: Option<f64>,
    pub max_passes: Option<usize>,
    /// Homogeneous kernel of the burned profile; `gamma31` when absent.
    pub kernel_fwhm: Option<f64>,
    /// Half-width of the tabulated probe profile; 4 × `trench_halfwidth`
    /// when absent.
    pub profile_halfwidth: Option<f64>,

    /// `delta,transmission` CSV to analyze.
    pub input: Option<PathBuf>,
    pub fit: FitKind,
}

impl Default for RunConfig {
    fn default() -> Self {
        let q = QuadratureConfig::default();
        RunConfig {
            mode: None,
            output_dir: PathBuf::from("runs"),
            omega: None,
            gamma21: None,
            gamma31: None,
            sigma_opt: None,
            sigma_spin: None,
            optical_shape: ProfileKind::Lorentzian,
            spin_shape: ProfileKind::Lorentzian,
            optical_table: None,
            spin_table: None,
            grid_start: None,
            grid_stop: None,
            grid_halfwidth: None,
            grid_points: None,
            rel_tol: q.rel_tol,
            max_depth: q.max_depth,
            tail: Tail::Tangent,
            truncate_fwhm: 1000.0,
            spin_shortcut: true,
            method: Method::Auto,
            optical_depth: None,
            sweep_values: Vec::new(),
            optical_shapes: Vec::new(),
            spin_shapes: Vec::new(),
            sweep_points: None,
            ground_offsets: None,
            excited_offsets: None,
            strengths: None,
            background_fwhm: None,
            target_class: None,
            shared_excited: None,
            auxiliary_excited: None,
            probe_ground: None,
            control_ground: None,
            trench_halfwidth: None,
            feature_fwhm: None,
            class_step: None,
            span_halfwidth: None,
            transfer_fraction: None,
            max_passes: None,
            kernel_fwhm: None,
            profile_halfwidth: None,
            input: None,
            fit: FitKind::Dip,
        }
    }
}

/// One planned sweep run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub optical_shape: ProfileKind,
    pub spin_shape: ProfileKind,
    pub abscissa: f64,
    pub params: RateParams,
}

pub fn load_config<P: AsRef<Path>>(path: P) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, path, base)
}

/// Parse, resolve relative paths against `base`, apply defaults and
/// validate. `origin` only labels parse errors.
pub fn parse_config(text: &str, origin: &Path, base: &Path) -> Result<RunConfig> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        Error::Parse {
            path: origin.to_path_buf(),
            line,
            message: e.message().to_string(),
        }
    })?;
    for p in [&mut cfg.optical_table, &mut cfg.spin_table, &mut cfg.input]
        .into_iter()
        .flatten()
    {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    cfg.resolve()?;
    Ok(cfg)
}

fn positive(field: &str, v: Option<f64>) -> Result<f64> {
    match v {
        None => Err(Error::validation(field, "required")),
        Some(x) if x.is_finite() && x > 0.0 => Ok(x),
        Some(x) => Err(Error::validation(field, format!("must be > 0, got {x}"))),
    }
}

fn nonnegative(field: &str, v: Option<f64>) -> Result<f64> {
    match v {
        None => Err(Error::validation(field, "required")),
        Some(x) if x.is_finite() && x >= 0.0 => Ok(x),
        Some(x) => Err(Error::validation(field, format!("must be >= 0, got {x}"))),
    }
}

fn check_optional(field: &str, v: Option<f64>, allow_zero: bool) -> Result<()> {
    match v {
        Some(_) if allow_zero => nonnegative(field, v).map(|_| ()),
        Some(_) => positive(field, v).map(|_| ()),
        None => Ok(()),
    }
}

impl RunConfig {
    pub fn mode(&self) -> Mode {
        self.mode.expect("validated config has a mode")
    }

    fn resolve(&mut self) -> Result<()> {
        let mode = self
            .mode
            .ok_or_else(|| Error::validation("mode", "required"))?;
        check_optional("sigma_opt", self.sigma_opt, false)?;
        check_optional("sigma_spin", self.sigma_spin, true)?;
        check_optional("omega", self.omega, true)?;
        check_optional("gamma21", self.gamma21, true)?;
        check_optional("gamma31", self.gamma31, true)?;
        check_optional("optical_depth", self.optical_depth, false)?;
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-2) {
            return Err(Error::validation(
                "rel_tol",
                format!("must lie in (0, 1e-2], got {}", self.rel_tol),
            ));
        }
        if self.max_depth < 5 {
            return Err(Error::validation("max_depth", "must be >= 5"));
        }
        if !(self.truncate_fwhm > 0.0 && self.truncate_fwhm.is_finite()) {
            return Err(Error::validation("truncate_fwhm", "must be > 0"));
        }
        match mode {
            Mode::Spectrum => self.resolve_spectrum(),
            Mode::SweepWidth | Mode::SweepVisibility => self.resolve_sweep(mode),
            Mode::Holeburn => self.resolve_holeburn(),
            Mode::Analyze => self.resolve_analyze(),
        }
    }

    fn default_rates(&mut self, reference: f64) {
        self.gamma21.get_or_insert(1e-4 * reference);
        self.gamma31.get_or_insert(1e-4 * reference);
    }

    fn resolve_profiles(&mut self) -> Result<()> {
        if self.optical_shape == ProfileKind::Tabulated {
            if self.optical_table.is_none() {
                return Err(Error::validation(
                    "optical_table",
                    "required when optical_shape = \"tabulated\"",
                ));
            }
        } else {
            positive("sigma_opt", self.sigma_opt)?;
        }
        if self.spin_shape == ProfileKind::Tabulated {
            if self.spin_table.is_none() {
                return Err(Error::validation(
                    "spin_table",
                    "required when spin_shape = \"tabulated\"",
                ));
            }
        } else {
            nonnegative("sigma_spin", self.sigma_spin)?;
        }
        Ok(())
    }

    fn resolve_grid(&mut self, default_points: usize) -> Result<()> {
        let points = *self.grid_points.get_or_insert(default_points);
        if points < 3 {
            return Err(Error::validation("grid_points", "must be >= 3"));
        }
        match (self.grid_start, self.grid_stop, self.grid_halfwidth) {
            (Some(a), Some(b), None) => {
                if !(a.is_finite() && b.is_finite() && b > a) {
                    return Err(Error::validation("grid_stop", "must exceed grid_start"));
                }
            }
            (None, None, Some(_)) => {
                positive("grid_halfwidth", self.grid_halfwidth)?;
            }
            (None, None, None) => {
                return Err(Error::validation(
                    "grid_halfwidth",
                    "required (or grid_start and grid_stop)",
                ))
            }
            _ => {
                return Err(Error::validation(
                    "grid_halfwidth",
                    "give either grid_halfwidth or both grid_start and grid_stop",
                ))
            }
        }
        Ok(())
    }

    fn resolve_spectrum(&mut self) -> Result<()> {
        nonnegative("omega", self.omega)?;
        self.resolve_profiles()?;
        let reference = self.sigma_opt.unwrap_or(1.0);
        self.default_rates(reference);
        self.resolve_grid(2001)
    }

    fn resolve_sweep(&mut self, mode: Mode) -> Result<()> {
        positive("sigma_opt", self.sigma_opt)?;
        if mode == Mode::SweepVisibility {
            positive("sigma_spin", self.sigma_spin)?;
        } else {
            nonnegative("sigma_spin", self.sigma_spin)?;
        }
        if self.sweep_values.is_empty() {
            return Err(Error::validation("sweep_values", "sweep list is empty"));
        }
        if let Some(x) = self
            .sweep_values
            .iter()
            .find(|x| !(x.is_finite() && **x > 0.0))
        {
            return Err(Error::validation(
                "sweep_values",
                format!("values must be > 0, got {x}"),
            ));
        }
        if self.optical_shapes.is_empty() {
            self.optical_shapes.push(self.optical_shape);
        }
        if self.spin_shapes.is_empty() {
            self.spin_shapes.push(self.spin_shape);
        }
        for (field, shapes) in [
            ("optical_shapes", &self.optical_shapes),
            ("spin_shapes", &self.spin_shapes),
        ] {
            if shapes.contains(&ProfileKind::Tabulated) {
                return Err(Error::validation(field, "tabulated shapes cannot be swept"));
            }
        }
        if let Some(n) = self.sweep_points {
            if n < 3 {
                return Err(Error::validation("sweep_points", "must be >= 3"));
            }
        }
        let reference = self.sigma_opt.unwrap_or(1.0);
        self.default_rates(reference);
        Ok(())
    }

    fn resolve_holeburn(&mut self) -> Result<()> {
        nonnegative("omega", self.omega)?;
        nonnegative("sigma_spin", self.sigma_spin)?;
        if self.ground_offsets.is_none() {
            return Err(Error::validation("ground_offsets", "required"));
        }
        if self.excited_offsets.is_none() {
            return Err(Error::validation("excited_offsets", "required"));
        }
        positive("background_fwhm", self.background_fwhm)?;
        let d = BurnSequence::default();
        self.target_class.get_or_insert(d.target_class);
        self.shared_excited.get_or_insert(d.shared_excited);
        self.probe_ground.get_or_insert(d.probe_ground);
        self.control_ground.get_or_insert(d.control_ground);
        self.trench_halfwidth.get_or_insert(d.trench_halfwidth);
        let feature = *self.feature_fwhm.get_or_insert(d.feature_fwhm);
        self.transfer_fraction.get_or_insert(d.transfer_fraction);
        self.max_passes.get_or_insert(d.max_passes);
        check_optional("feature_fwhm", self.feature_fwhm, true)?;
        check_optional("class_step", self.class_step, false)?;
        check_optional("kernel_fwhm", self.kernel_fwhm, false)?;
        check_optional("profile_halfwidth", self.profile_halfwidth, false)?;
        let reference = if feature > 0.0 {
            feature
        } else {
            self.class_step.unwrap_or(1.0)
        };
        self.default_rates(reference);
        if self.kernel_fwhm.is_none() {
            self.kernel_fwhm = self.gamma31.filter(|g| *g > 0.0).or(Some(1e-4 * reference));
        }
        let h = self.trench_halfwidth.unwrap_or(d.trench_halfwidth);
        self.profile_halfwidth.get_or_insert(4.0 * h);
        if self.grid_halfwidth.is_none() && self.grid_start.is_none() && self.grid_stop.is_none() {
            let omega = self.omega.unwrap_or(0.0);
            self.grid_halfwidth = Some(if omega > 0.0 {
                1.5 * omega
            } else {
                2.0 * reference
            });
        }
        self.resolve_grid(301)?;
        let (ls, seq) = self.burn_setup()?;
        seq.validate(&ls)
            .map_err(|e| Error::validation("holeburn", e.to_string()))
    }

    fn resolve_analyze(&mut self) -> Result<()> {
        if self.input.is_none() {
            return Err(Error::validation("input", "required"));
        }
        if self.fit == FitKind::Dip && self.optical_depth.is_none() {
            return Err(Error::validation(
                "optical_depth",
                "required unless fit includes \"saturated\"",
            ));
        }
        Ok(())
    }

    pub fn rate_params(&self) -> Result<RateParams> {
        let sigma_opt = match self.mode() {
            Mode::Holeburn => self.feature_fwhm.unwrap_or(0.0),
            _ => self.sigma_opt.unwrap_or(0.0),
        };
        RateParams::new(
            self.omega.unwrap_or(0.0),
            self.gamma21.unwrap_or(0.0),
            self.gamma31.unwrap_or(0.0),
            sigma_opt,
            self.sigma_spin.unwrap_or(0.0),
        )
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        QuadratureConfig {
            rel_tol: self.rel_tol,
            max_depth: self.max_depth,
            tail_mapping: match self.tail {
                Tail::Tangent => TailMapping::TangentMap,
                Tail::Truncate => TailMapping::TruncateAtN(self.truncate_fwhm),
            },
            lorentzian_spin_shortcut: self.spin_shortcut,
            ..QuadratureConfig::default()
        }
    }

    pub fn grid(&self) -> Result<DetuningGrid> {
        let n = self.grid_points.unwrap_or(2001);
        match (self.grid_start, self.grid_stop, self.grid_halfwidth) {
            (Some(a), Some(b), _) => DetuningGrid::new(a, b, n),
            (_, _, Some(h)) => DetuningGrid::symmetric(h, n),
            _ => Err(Error::validation("grid_halfwidth", "required")),
        }
    }

    pub fn optical_profile(&self) -> Result<BroadeningProfile> {
        match &self.optical_table {
            Some(p) if self.optical_shape == ProfileKind::Tabulated => {
                crate::csvio::read_profile(p)
            }
            _ => BroadeningProfile::new(self.optical_shape, self.sigma_opt.unwrap_or(0.0), 0.0),
        }
    }

    pub fn spin_profile(&self) -> Result<BroadeningProfile> {
        match &self.spin_table {
            Some(p) if self.spin_shape == ProfileKind::Tabulated => crate::csvio::read_profile(p),
            _ => BroadeningProfile::new(self.spin_shape, self.sigma_spin.unwrap_or(0.0), 0.0),
        }
    }

    pub fn burn_setup(&self) -> Result<(LevelStructure, BurnSequence)> {
        let g = self
            .ground_offsets
            .ok_or_else(|| Error::validation("ground_offsets", "required"))?;
        let e = self
            .excited_offsets
            .ok_or_else(|| Error::validation("excited_offsets", "required"))?;
        let bg = self.background_fwhm.unwrap_or(0.0);
        let ls = match self.strengths {
            Some(s) => LevelStructure::new(g, e, s, bg),
            None => LevelStructure::uniform(g, e, bg),
        }
        .map_err(|err| Error::validation("ground_offsets", err.to_string()))?;
        let d = BurnSequence::default();
        let seq = BurnSequence {
            target_class: self.target_class.unwrap_or(d.target_class),
            shared_excited: self.shared_excited.unwrap_or(d.shared_excited),
            auxiliary_excited: self.auxiliary_excited,
            probe_ground: self.probe_ground.unwrap_or(d.probe_ground),
            control_ground: self.control_ground.unwrap_or(d.control_ground),
            trench_halfwidth: self.trench_halfwidth.unwrap_or(d.trench_halfwidth),
            feature_fwhm: self.feature_fwhm.unwrap_or(d.feature_fwhm),
            class_step: self.class_step,
            span_halfwidth: self.span_halfwidth,
            transfer_fraction: self.transfer_fraction.unwrap_or(d.transfer_fraction),
            max_passes: self.max_passes.unwrap_or(d.max_passes),
        };
        Ok((ls, seq))
    }

    pub fn probe_transition(&self, seq: &BurnSequence) -> ProbeTransition {
        let mut t = ProbeTransition::new(
            seq.probe_ground,
            seq.shared_excited,
            seq.target_class,
            self.kernel_fwhm.unwrap_or(1e-4),
        );
        t.half_span = self.profile_halfwidth;
        t
    }

    /// Cartesian product optical shape × spin shape × sweep value, in
    /// config order.
    pub fn planned_runs(&self) -> Result<Vec<SweepPoint>> {
        let mode = self.mode();
        if !mode.is_sweep() {
            return Ok(Vec::new());
        }
        let base = self.rate_params()?;
        let mut out = Vec::new();
        for &optical_shape in &self.optical_shapes {
            for &spin_shape in &self.spin_shapes {
                for &x in &self.sweep_values {
                    let omega = match mode {
                        Mode::SweepWidth => x * base.sigma_opt,
                        _ => (x * base.sigma_opt * base.sigma_spin).sqrt(),
                    };
                    out.push(SweepPoint {
                        optical_shape,
                        spin_shape,
                        abscissa: x,
                        params: base.with_omega(omega),
                    });
                }
            }
        }
        Ok(out)
    }

    /// Detuning grid for one sweep run: wide enough for both absorption
    /// peaks, fine enough to resolve the expected dip.
    pub fn sweep_grid(&self, p: &RateParams) -> Result<DetuningGrid> {
        let gamma = leading_width(p.omega, p.sigma_opt) + p.sigma_spin + p.gamma21;
        let scale = p
            .omega
            .max((p.sigma_opt * (p.sigma_spin + p.gamma21)).sqrt())
            .max(gamma);
        let half = scale + scale.min(3.0 * p.sigma_opt);
        let per_width = if self.mode() == Mode::SweepWidth {
            50.0
        } else {
            25.0
        };
        let count = match self.sweep_points {
            Some(n) => n,
            None => {
                let n = ((2.0 * half * per_width / gamma).ceil() as usize).clamp(401, 40001);
                n | 1
            }
        };
        DetuningGrid::symmetric(half, count)
    }

    /// The resolved configuration as TOML, with the planned sweep size.
    pub fn echo(&self) -> String {
        let mut s = toml::to_string(self).expect("config serializes");
        if let Ok(runs) = self.planned_runs() {
            if !runs.is_empty() {
                s.push_str(&format!("# planned runs: {}\n", runs.len()));
            }
        }
        s
    }

    /// First 16 hex digits of the SHA-256 of [`echo`](Self::echo).
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.echo().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// `<output_dir>/<mode>-<hash>`.
    pub fn run_dir(&self, out: Option<&Path>) -> PathBuf {
        let root = out.unwrap_or(&self.output_dir);
        root.join(format!("{}-{}", self.mode().name(), self.content_hash()))
    }
}
