//! Idealized spectral hole burning over frequency classes of a
//! three-ground, three-excited hyperfine manifold.
//!
//! A class with optical shift `x` has its `(ground i, excited j)` transition
//! at `x + e_j − g_i` relative to the carrier. Pumping is complete and
//! instantaneous; only the resulting population geometry is modelled.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DetuningGrid;
use crate::profile::BroadeningProfile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStructure {
    pub ground_offsets: [f64; 3],
    pub excited_offsets: [f64; 3],
    /// Relative strengths, rows = ground, columns = excited, unit row sums.
    pub strengths: [[f64; 3]; 3],
    pub background_fwhm: f64,
}

fn check_offsets(name: &str, v: &[f64; 3]) -> Result<()> {
    if v[0] != 0.0 || !(v[0] < v[1] && v[1] < v[2]) || !v[2].is_finite() {
        return Err(Error::invalid(format!(
            "{name} offsets must be strictly ascending from 0, got {v:?}"
        )));
    }
    Ok(())
}

impl LevelStructure {
    /// Row-normalizes `strengths` and validates.
    pub fn new(
        ground_offsets: [f64; 3],
        excited_offsets: [f64; 3],
        mut strengths: [[f64; 3]; 3],
        background_fwhm: f64,
    ) -> Result<Self> {
        check_offsets("ground", &ground_offsets)?;
        check_offsets("excited", &excited_offsets)?;
        for row in strengths.iter_mut() {
            if row.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                return Err(Error::invalid(format!(
                    "strengths must be finite and >= 0, got {row:?}"
                )));
            }
            let sum: f64 = row.iter().sum();
            if sum <= 0.0 {
                return Err(Error::invalid(
                    "every ground state needs a nonzero transition strength",
                ));
            }
            row.iter_mut().for_each(|s| *s /= sum);
        }
        if !(background_fwhm.is_finite() && background_fwhm > 0.0) {
            return Err(Error::invalid(format!(
                "background_fwhm must be > 0, got {background_fwhm}"
            )));
        }
        Ok(LevelStructure {
            ground_offsets,
            excited_offsets,
            strengths,
            background_fwhm,
        })
    }

    /// Equal strengths on all nine transitions.
    pub fn uniform(
        ground_offsets: [f64; 3],
        excited_offsets: [f64; 3],
        background_fwhm: f64,
    ) -> Result<Self> {
        Self::new(
            ground_offsets,
            excited_offsets,
            [[1.0; 3]; 3],
            background_fwhm,
        )
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(
            self.ground_offsets,
            self.excited_offsets,
            self.strengths,
            self.background_fwhm,
        )
        .map(|_| ())
    }

    /// Transition frequency `e_j − g_i` of the zero-shift class.
    pub fn transition(&self, ground: usize, excited: usize) -> f64 {
        self.excited_offsets[excited] - self.ground_offsets[ground]
    }

    fn ground_span(&self) -> f64 {
        self.ground_offsets[2]
    }

    fn excited_span(&self) -> f64 {
        self.excited_offsets[2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    pub class_offset: f64,
    pub ground: usize,
    pub excited: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceSet {
    /// All nine `(ground, excited)` entries, ascending in class offset.
    pub entries: Vec<Resonance>,
    /// Index pairs into `entries` whose class offsets agree within tolerance.
    pub collisions: Vec<(usize, usize)>,
}

impl ResonanceSet {
    /// Number of distinct classes after merging collisions.
    pub fn distinct_classes(&self) -> usize {
        let mut n = self.entries.len();
        let mut merged = vec![false; n];
        for &(_, b) in &self.collisions {
            if !merged[b] {
                merged[b] = true;
                n -= 1;
            }
        }
        n
    }
}

/// The class resonant with a field at `field_freq` on each of the nine
/// transitions.
pub fn enumerate_resonances(ls: &LevelStructure, field_freq: f64, tol: f64) -> ResonanceSet {
    let mut entries: Vec<Resonance> = (0..3)
        .flat_map(|g| (0..3).map(move |e| (g, e)))
        .map(|(ground, excited)| Resonance {
            class_offset: field_freq - ls.transition(ground, excited),
            ground,
            excited,
        })
        .collect();
    entries.sort_by(|a, b| a.class_offset.total_cmp(&b.class_offset));
    let mut collisions = Vec::new();
    for a in 0..entries.len() {
        for b in a + 1..entries.len() {
            if (entries[a].class_offset - entries[b].class_offset).abs() <= tol {
                collisions.push((a, b));
            }
        }
    }
    ResonanceSet {
        entries,
        collisions,
    }
}

/// Field frequencies, indexed by ground state, that bring `target_class` into
/// resonance from ground `k` to excited level `excited[k]`.
pub fn select_class_fields(
    ls: &LevelStructure,
    target_class: f64,
    excited: [usize; 3],
    tol: f64,
) -> Result<[f64; 3]> {
    if excited.iter().any(|&e| e > 2) {
        return Err(Error::invalid(format!(
            "excited indices {excited:?} out of range"
        )));
    }
    let fields = [0, 1, 2].map(|g| target_class + ls.transition(g, excited[g]));
    // A rival class shifted by `s` is resonant from ground k when
    // s = f_i − target + g_k − e_l for some field i and excited l.
    let shifts: Vec<Vec<f64>> = (0..3)
        .map(|k| {
            let mut v: Vec<f64> = fields
                .iter()
                .flat_map(|f| (0..3).map(move |l| f - target_class - ls.transition(k, l)))
                .collect();
            v.sort_by(f64::total_cmp);
            v
        })
        .collect();
    for &s in &shifts[0] {
        if s.abs() <= tol {
            continue;
        }
        let hit = |k: usize| shifts[k].iter().any(|t| (t - s).abs() <= 2.0 * tol);
        if hit(1) && hit(2) {
            return Err(Error::AmbiguousSelection {
                offset: target_class + s,
            });
        }
    }
    Ok(fields)
}

/// Ground-state occupancies per frequency class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPopulations {
    pub grid: DetuningGrid,
    pub populations: Vec<[f64; 3]>,
}

impl ClassPopulations {
    /// Thermal populations: one third in each ground state.
    pub fn uniform(grid: DetuningGrid) -> Self {
        ClassPopulations {
            grid,
            populations: vec![[1.0 / 3.0; 3]; grid.count()],
        }
    }

    pub fn new(grid: DetuningGrid, populations: Vec<[f64; 3]>) -> Result<Self> {
        if populations.len() != grid.count() {
            return Err(Error::GridMismatch);
        }
        for (i, p) in populations.iter().enumerate() {
            let sum: f64 = p.iter().sum();
            if p.iter().any(|v| !(*v >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "class {i} occupancies {p:?} are not a distribution"
                )));
            }
        }
        Ok(ClassPopulations { grid, populations })
    }

    /// Largest deviation of any per-class occupancy sum from 1.
    pub fn conservation_error(&self) -> f64 {
        self.populations
            .iter()
            .map(|p| (p.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn offset(&self, i: usize) -> f64 {
        self.grid.point(i)
    }

    /// Indices of classes whose offset lies in `[lo, hi]`.
    fn index_range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let (s, h, n) = (self.grid.start(), self.grid.step(), self.grid.count());
        let a = ((lo - s) / h - 1e-9).ceil().max(0.0);
        let b = ((hi - s) / h + 1e-9).floor();
        if b < 0.0 || a > (n - 1) as f64 || a > b {
            return 0..0;
        }
        a as usize..(b as usize + 1).min(n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PumpStep {
    pub field_frequencies: Vec<f64>,
    /// Each field covers `f ± sweep_halfwidth`.
    pub sweep_halfwidth: f64,
    pub resonance_tolerance: f64,
    pub transfer_fraction: f64,
}

impl PumpStep {
    pub fn new(
        field_frequencies: Vec<f64>,
        sweep_halfwidth: f64,
        resonance_tolerance: f64,
    ) -> Result<Self> {
        let s = PumpStep {
            field_frequencies,
            sweep_halfwidth,
            resonance_tolerance,
            transfer_fraction: 1.0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_transfer_fraction(mut self, f: f64) -> Result<Self> {
        self.transfer_fraction = f;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.field_frequencies.is_empty()
            || self.field_frequencies.iter().any(|f| !f.is_finite())
        {
            return Err(Error::invalid(
                "pump step needs at least one finite field frequency",
            ));
        }
        if !(self.resonance_tolerance > 0.0 && self.resonance_tolerance.is_finite()) {
            return Err(Error::invalid("resonance tolerance must be > 0"));
        }
        if !(self.sweep_halfwidth >= 0.0 && self.sweep_halfwidth.is_finite()) {
            return Err(Error::invalid("sweep half-width must be >= 0"));
        }
        if !(self.transfer_fraction > 0.0 && self.transfer_fraction <= 1.0) {
            return Err(Error::invalid("transfer fraction must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Sweep-offset intervals `[lo, hi]` during which a class is resonant, per
/// ground state, together with the excited levels involved.
#[derive(Default, Clone)]
struct ClassHits {
    windows: [Vec<(f64, f64)>; 3],
    excited: [[bool; 3]; 3],
}

impl ClassHits {
    fn grounds(&self) -> [bool; 3] {
        [0, 1, 2].map(|k| !self.windows[k].is_empty())
    }

    /// Whether a single sweep offset makes all three grounds resonant.
    fn simultaneous(&self) -> bool {
        self.windows.iter().flatten().any(|&(lo, _)| {
            self.windows
                .iter()
                .all(|w| w.iter().any(|&(a, b)| a <= lo && lo <= b))
        })
    }
}

/// Redistribution weights from pumped ground `k` to each other ground,
/// averaged over the excited levels it is pumped through.
fn branching(ls: &LevelStructure, k: usize, excited: &[bool; 3]) -> [f64; 3] {
    let mut w = [0.0; 3];
    let mut n = 0.0;
    for l in (0..3).filter(|&l| excited[l]) {
        let col: f64 = (0..3).filter(|&m| m != k).map(|m| ls.strengths[m][l]).sum();
        for m in (0..3).filter(|&m| m != k) {
            w[m] += if col > 0.0 {
                ls.strengths[m][l] / col
            } else {
                0.5
            };
        }
        n += 1.0;
    }
    w.iter_mut().for_each(|v| *v /= n);
    w
}

/// Final occupancies of one class after pumping its resonant grounds to
/// exhaustion. Each pass moves `fraction` of the population arriving on a
/// resonant ground to the other grounds; re-pumping of what lands on another
/// resonant ground is summed as a geometric series. `None` when the series
/// diverges (nowhere to settle).
fn settle(
    p: [f64; 3],
    resonant: [bool; 3],
    weights: &[[f64; 3]; 3],
    fraction: f64,
) -> Option<[f64; 3]> {
    // column k holds the branching out of ground k
    let w = Matrix3::from_fn(|m, k| if resonant[k] { weights[k][m] } else { 0.0 });
    let inside = Matrix3::from_fn(|m, k| if resonant[m] { w[(m, k)] } else { 0.0 });
    let outside = w - inside;
    let v = Vector3::from_fn(|k, _| if resonant[k] { p[k] } else { 0.0 });
    let u = (Matrix3::identity() - fraction * inside).lu().solve(&v)?;
    if u.iter().any(|x| !x.is_finite() || x.abs() > 1e6) {
        return None;
    }
    let kept = (1.0 - fraction) * u + fraction * outside * u;
    Some([0, 1, 2].map(|k| if resonant[k] { kept[k] } else { p[k] + kept[k] }))
}

/// One pumping step. Every (class, ground) resonant with an active field
/// anywhere in its sweep is emptied into the non-resonant grounds of the same
/// class, following the branching of the pumped excited level. A class that
/// one sweep offset makes resonant from all three grounds at once is the
/// selected class and keeps its population.
pub fn apply_pump_step(
    pop: &ClassPopulations,
    ls: &LevelStructure,
    step: &PumpStep,
) -> Result<ClassPopulations> {
    step.validate()?;
    let h = step.sweep_halfwidth;
    let tol = step.resonance_tolerance;
    let mut hits: std::collections::BTreeMap<usize, ClassHits> = Default::default();
    for &f in &step.field_frequencies {
        for k in 0..3 {
            for l in 0..3 {
                let x0 = f - ls.transition(k, l);
                for i in pop.index_range(x0 - h - tol, x0 + h + tol) {
                    // sweep offsets t with |x − (x0 + t)| ≤ tol
                    let x = pop.offset(i);
                    let (lo, hi) = ((x - x0 - tol).max(-h), (x - x0 + tol).min(h));
                    let entry = hits.entry(i).or_default();
                    entry.windows[k].push((lo, hi));
                    entry.excited[k][l] = true;
                }
            }
        }
    }

    let mut out = pop.clone();
    let mut stuck = Vec::new();
    for (i, hit) in hits {
        let resonant = hit.grounds();
        if resonant.iter().all(|&r| r) {
            if hit.simultaneous() {
                continue;
            }
            if step.transfer_fraction >= 1.0 {
                stuck.push(pop.offset(i));
                continue;
            }
        }
        let weights = [0, 1, 2].map(|k| {
            if resonant[k] {
                branching(ls, k, &hit.excited[k])
            } else {
                [0.0; 3]
            }
        });
        match settle(
            pop.populations[i],
            resonant,
            &weights,
            step.transfer_fraction,
        ) {
            Some(p) => out.populations[i] = p,
            None => stuck.push(pop.offset(i)),
        }
    }
    if !stuck.is_empty() {
        return Err(Error::NoConvergence { offsets: stuck });
    }
    Ok(out)
}

/// Settings of the three-stage state preparation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BurnSequence {
    pub target_class: f64,
    pub shared_excited: usize,
    /// Excited level addressed from the auxiliary ground during selection;
    /// the next level after `shared_excited` when absent.
    pub auxiliary_excited: Option<usize>,
    /// Ground state of the probe transition (|1⟩).
    pub probe_ground: usize,
    /// Ground state of the control transition (|2⟩).
    pub control_ground: usize,
    pub trench_halfwidth: f64,
    pub feature_fwhm: f64,
    /// Class-grid spacing; `feature_fwhm/20` when absent.
    pub class_step: Option<f64>,
    /// Half-width of the simulated class span around the target.
    pub span_halfwidth: Option<f64>,
    pub transfer_fraction: f64,
    pub max_passes: usize,
}

impl Default for BurnSequence {
    fn default() -> Self {
        BurnSequence {
            target_class: 0.0,
            shared_excited: 0,
            auxiliary_excited: None,
            probe_ground: 1,
            control_ground: 2,
            trench_halfwidth: 4.0,
            feature_fwhm: 1.0,
            class_step: None,
            span_halfwidth: None,
            transfer_fraction: 1.0,
            max_passes: 200,
        }
    }
}

impl BurnSequence {
    pub fn auxiliary_ground(&self) -> usize {
        3 - self.probe_ground - self.control_ground
    }

    /// Excited level addressed from each ground during selection.
    pub fn selection_levels(&self) -> [usize; 3] {
        let mut e = [self.shared_excited; 3];
        e[self.auxiliary_ground()] = self
            .auxiliary_excited
            .unwrap_or((self.shared_excited + 1) % 3);
        e
    }

    pub fn step(&self) -> f64 {
        self.class_step.unwrap_or(self.feature_fwhm / 20.0)
    }

    pub fn validate(&self, ls: &LevelStructure) -> Result<()> {
        ls.validate()?;
        let g = [self.probe_ground, self.control_ground];
        if g.iter().any(|&k| k > 2) || g[0] == g[1] {
            return Err(Error::invalid(
                "probe and control grounds must be distinct indices in 0..3",
            ));
        }
        let aux = self.auxiliary_excited.unwrap_or(0);
        if self.shared_excited > 2 || aux > 2 || self.auxiliary_excited == Some(self.shared_excited)
        {
            return Err(Error::invalid(
                "shared and auxiliary excited levels must be distinct indices in 0..3",
            ));
        }
        if !(self.trench_halfwidth > 0.0 && self.trench_halfwidth.is_finite()) {
            return Err(Error::invalid("trench_halfwidth must be > 0"));
        }
        if !(self.feature_fwhm >= 0.0 && self.feature_fwhm < self.trench_halfwidth) {
            return Err(Error::invalid(
                "feature_fwhm must satisfy 0 <= feature_fwhm < trench_halfwidth",
            ));
        }
        let step = self.step();
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::invalid(
                "class_step must be given and > 0 when feature_fwhm = 0",
            ));
        }
        if let Some(s) = self.span_halfwidth {
            if !(s > self.trench_halfwidth) {
                return Err(Error::invalid(
                    "span_halfwidth must exceed trench_halfwidth",
                ));
            }
        }
        if !(self.transfer_fraction > 0.0 && self.transfer_fraction <= 1.0) {
            return Err(Error::invalid("transfer_fraction must lie in (0, 1]"));
        }
        if self.max_passes == 0 {
            return Err(Error::invalid("max_passes must be >= 1"));
        }
        Ok(())
    }

    /// Class grid centred on the target, with the target on a grid point.
    pub fn class_grid(&self, ls: &LevelStructure) -> Result<DetuningGrid> {
        let step = self.step();
        let half = self
            .span_halfwidth
            .unwrap_or(3.0 * self.trench_halfwidth + ls.ground_span() + ls.excited_span());
        let n = (half / step).ceil();
        if n > 2.0e6 {
            return Err(Error::invalid(format!(
                "class grid of {} points is too large",
                2.0 * n + 1.0
            )));
        }
        DetuningGrid::new(
            self.target_class - n * step,
            self.target_class + n * step,
            2 * n as usize + 1,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BurnReport {
    /// Passes over the sweep in stages one and two.
    pub passes: [usize; 2],
    /// False when a stage hit `max_passes` before its populations settled.
    pub converged: bool,
    /// Classes outside the trench still holding population on a transition
    /// resonant with the control frequency.
    pub control_resonant_outside: Vec<f64>,
    /// Total |1⟩ occupancy inside the trench after the repump.
    pub feature_population: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BurnOutcome {
    pub populations: ClassPopulations,
    /// Populations after stage one, kept for auditing.
    pub after_selection: ClassPopulations,
    pub report: BurnReport,
}

/// Sweeps `fields` together across `±halfwidth` in class-grid steps,
/// repeating until a full pass leaves every occupancy within 1e−13.
pub fn sweep_to_convergence(
    pop: &ClassPopulations,
    ls: &LevelStructure,
    fields: &[f64],
    halfwidth: f64,
    transfer_fraction: f64,
    max_passes: usize,
) -> Result<(ClassPopulations, usize, bool)> {
    let step = pop.grid.step();
    let m = (halfwidth / step).round() as i64;
    let tol = 0.5 * step;
    let mut current = pop.clone();
    for pass in 1..=max_passes {
        let before = current.clone();
        for j in -m..=m {
            let t = j as f64 * step;
            let ps = PumpStep::new(fields.iter().map(|f| f + t).collect(), 0.0, tol)?
                .with_transfer_fraction(transfer_fraction)?;
            current = apply_pump_step(&current, ls, &ps)?;
        }
        let change = current
            .populations
            .iter()
            .zip(&before.populations)
            .flat_map(|(a, b)| (0..3).map(move |k| (a[k] - b[k]).abs()))
            .fold(0.0, f64::max);
        if change <= 1e-13 {
            return Ok((current, pass, true));
        }
    }
    Ok((current, max_passes, false))
}

/// Offsets of classes farther than `halfwidth` from `center` that keep
/// population in a ground state resonant with `control` on any transition.
pub fn control_audit(
    pop: &ClassPopulations,
    ls: &LevelStructure,
    control: f64,
    center: f64,
    halfwidth: f64,
) -> Vec<f64> {
    let tol = 0.5 * pop.grid.step();
    let mut out: Vec<f64> = (0..3)
        .flat_map(|k| (0..3).map(move |l| (k, control - ls.transition(k, l))))
        .filter(|(_, x)| (x - center).abs() > halfwidth)
        .flat_map(|(k, x)| pop.index_range(x - tol, x + tol).map(move |i| (k, i)))
        .filter(|&(k, i)| pop.populations[i][k] > 1e-9)
        .map(|(_, i)| pop.offset(i))
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Class selection, emptying of the Λ grounds across the trench, and repump
/// of a narrow feature into |1⟩ with the control field on.
pub fn run_burn_sequence(ls: &LevelStructure, seq: &BurnSequence) -> Result<BurnOutcome> {
    seq.validate(ls)?;
    let grid = seq.class_grid(ls)?;
    let pop = ClassPopulations::uniform(grid);
    let c = seq.target_class;
    let h = seq.trench_halfwidth;
    let fields = select_class_fields(ls, c, seq.selection_levels(), 0.5 * grid.step())
        .map_err(|e| e.in_stage("selection"))?;

    let (selected, p1, ok1) =
        sweep_to_convergence(&pop, ls, &fields, h, seq.transfer_fraction, seq.max_passes)
            .map_err(|e| e.in_stage("selection"))?;
    let lambda = [fields[seq.probe_ground], fields[seq.control_ground]];
    let (mut emptied, p2, ok2) = sweep_to_convergence(
        &selected,
        ls,
        &lambda,
        h,
        seq.transfer_fraction,
        seq.max_passes,
    )
    .map_err(|e| e.in_stage("emptying"))?;

    let (probe, control, aux) = (seq.probe_ground, seq.control_ground, seq.auxiliary_ground());
    let mut feature_population = 0.0;
    let trench = emptied.index_range(c - h, c + h);
    for i in trench.clone() {
        let w = if seq.feature_fwhm > 0.0 {
            let u = (emptied.offset(i) - c) / (0.5 * seq.feature_fwhm);
            1.0 / (1.0 + u * u)
        } else {
            0.0
        };
        let p = &mut emptied.populations[i];
        let moved_aux = w * p[aux];
        let moved_ctl = w * p[control];
        p[aux] -= moved_aux;
        p[control] -= moved_ctl;
        p[probe] += moved_aux + moved_ctl;
        feature_population += p[probe];
    }

    let control_resonant_outside = control_audit(&emptied, ls, fields[seq.control_ground], c, h);

    Ok(BurnOutcome {
        populations: emptied,
        after_selection: selected,
        report: BurnReport {
            passes: [p1, p2],
            converged: ok1 && ok2,
            control_resonant_outside,
            feature_population,
        },
    })
}

/// The probe transition whose absorber density is tabulated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeTransition {
    pub ground: usize,
    pub excited: usize,
    /// Class the probe laser is tuned to.
    pub target_class: f64,
    /// Homogeneous kernel FWHM (γ31).
    pub kernel_fwhm: f64,
    /// Half-width of the tabulated shift range; the whole class span when
    /// absent.
    pub half_span: Option<f64>,
}

impl ProbeTransition {
    pub fn new(ground: usize, excited: usize, target_class: f64, kernel_fwhm: f64) -> Self {
        ProbeTransition {
            ground,
            excited,
            target_class,
            kernel_fwhm,
            half_span: None,
        }
    }
}

/// Probe-transition absorber density versus optical shift from the probe
/// laser.
///
/// Each class contributes its probe-ground occupancy times the transition
/// strength and the background class weight, spread over one class step and
/// broadened by a Lorentzian of the kernel width. Contributions landing more
/// than twice the half-span away are dropped. The result is sampled on the
/// class spacing and renormalized.
pub fn profile_from_populations(
    pop: &ClassPopulations,
    ls: &LevelStructure,
    probe: &ProbeTransition,
) -> Result<BroadeningProfile> {
    let &ProbeTransition {
        ground,
        excited,
        target_class,
        kernel_fwhm,
        half_span,
    } = probe;
    if !(kernel_fwhm > 0.0 && kernel_fwhm.is_finite()) {
        return Err(Error::invalid(format!(
            "kernel_fwhm must be > 0, got {kernel_fwhm}"
        )));
    }
    if ground > 2 || excited > 2 {
        return Err(Error::invalid("level index out of range"));
    }
    let step = pop.grid.step();
    let (start, count) = match half_span {
        Some(h) if h > 0.0 && h.is_finite() => {
            let n = (h / step).ceil();
            (-n * step, 2 * n as usize + 1)
        }
        Some(h) => {
            return Err(Error::invalid(format!(
                "profile half-span must be > 0, got {h}"
            )))
        }
        None => (pop.grid.start() - target_class, pop.grid.count()),
    };
    let stop = start + step * (count - 1) as f64;
    let reach = stop - start;
    let hb = 0.5 * ls.background_fwhm;
    let hk = 0.5 * kernel_fwhm;
    let mut sources: Vec<(f64, f64)> = Vec::new();
    for (i, p) in pop.populations.iter().enumerate() {
        let occupancy = p[ground];
        if occupancy <= 0.0 {
            continue;
        }
        let x = pop.offset(i) - target_class;
        let background = 1.0 / (1.0 + (x / hb).powi(2));
        for l in 0..3 {
            let at = x + ls.excited_offsets[l] - ls.excited_offsets[excited];
            let mass = occupancy * ls.strengths[ground][l] * background * step;
            if mass > 0.0 && at > start - reach && at < stop + reach {
                sources.push((at, mass));
            }
        }
    }
    let density: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|j| {
            let s = start + step * j as f64;
            sources
                .iter()
                .map(|&(at, mass)| {
                    let u = s - at;
                    mass * (((u + 0.5 * step) / hk).atan() - ((u - 0.5 * step) / hk).atan())
                })
                .sum::<f64>()
                / (std::f64::consts::PI * step)
        })
        .collect();
    BroadeningProfile::from_uniform(start, step, density)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn levels() -> LevelStructure {
        LevelStructure::uniform([0.0, 10.2, 27.5], [0.0, 4.6, 9.4], 5000.0).unwrap()
    }

    #[test]
    fn nine_resonances_and_carrier() {
        let ls = levels();
        let r = enumerate_resonances(&ls, 0.0, 1e-6);
        assert_eq!(r.entries.len(), 9);
        assert_eq!(r.distinct_classes(), 9);
        assert!(r
            .entries
            .iter()
            .any(|e| e.class_offset == 0.0 && e.ground == 0 && e.excited == 0));
    }

    #[test]
    fn degenerate_offsets_collide() {
        let ls = LevelStructure::uniform([0.0, 3.0, 8.0], [0.0, 3.0, 5.5], 100.0).unwrap();
        let r = enumerate_resonances(&ls, 1.0, 1e-9);
        assert!(!r.collisions.is_empty());
        assert!(r.distinct_classes() < 9);
    }

    #[test]
    fn selection_frequencies() {
        let ls = levels();
        let f = select_class_fields(&ls, 0.0, [1, 0, 0], 1e-3).unwrap();
        assert_eq!(f, [4.6, -10.2, -27.5]);
        let shifted = select_class_fields(&ls, 2.0, [1, 0, 0], 1e-3).unwrap();
        assert!(shifted
            .iter()
            .zip(f)
            .all(|(a, b)| (a - b - 2.0).abs() < 1e-12));
    }

    #[test]
    fn shared_level_for_all_fields_is_ambiguous() {
        // classes shifted by an excited splitting see the same three fields
        let ls = levels();
        assert!(matches!(
            select_class_fields(&ls, 0.0, [0, 0, 0], 1e-3),
            Err(Error::AmbiguousSelection { .. })
        ));
    }

    #[test]
    fn matching_splittings_are_ambiguous() {
        // ground splitting equal to an excited splitting
        let ls = LevelStructure::uniform([0.0, 7.0, 12.0], [0.0, 3.0, 7.0], 100.0).unwrap();
        assert!(select_class_fields(&levels(), 0.0, [1, 0, 0], 1e-6).is_ok());
        assert!(matches!(
            select_class_fields(&ls, 0.0, [1, 0, 0], 1e-6),
            Err(Error::AmbiguousSelection { .. })
        ));
    }

    #[test]
    fn single_field_empties_one_ground() {
        let ls = levels();
        let grid = DetuningGrid::new(-50.0, 50.0, 1001).unwrap();
        let pop = ClassPopulations::uniform(grid);
        let step = PumpStep::new(vec![0.0], 0.0, 0.05).unwrap();
        let out = apply_pump_step(&pop, &ls, &step).unwrap();
        let c = 500;
        assert_eq!(out.populations[c][0], 0.0);
        assert!((out.populations[c][1] - 0.5).abs() < 1e-15);
        assert!((out.populations[c][2] - 0.5).abs() < 1e-15);
        let touched = out
            .populations
            .iter()
            .zip(&pop.populations)
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(touched, 9);
        assert!(out.conservation_error() < 1e-12);
    }

    #[test]
    fn nothing_resonant_is_identity() {
        let ls = levels();
        let grid = DetuningGrid::new(-5.0, 5.0, 101).unwrap();
        let pop = ClassPopulations::uniform(grid);
        let step = PumpStep::new(vec![500.0], 0.0, 0.05).unwrap();
        assert_eq!(apply_pump_step(&pop, &ls, &step).unwrap(), pop);
    }

    #[test]
    fn selection_leaves_only_target_resonant() {
        let ls = levels();
        let grid = DetuningGrid::new(-60.0, 60.0, 2401).unwrap();
        let pop = ClassPopulations::uniform(grid);
        let tol = 0.5 * grid.step();
        let fields = select_class_fields(&ls, 0.0, [1, 0, 0], tol).unwrap();
        let out = apply_pump_step(
            &pop,
            &ls,
            &PumpStep::new(fields.to_vec(), 0.0, tol).unwrap(),
        )
        .unwrap();
        let target = 1200;
        assert_eq!(out.populations[target], pop.populations[target]);
        for (i, p) in out.populations.iter().enumerate() {
            if i == target {
                continue;
            }
            let x = out.offset(i);
            for &f in &[fields[1], fields[2]] {
                for (k, pk) in p.iter().enumerate() {
                    for l in 0..3 {
                        if (x - (f - ls.transition(k, l))).abs() <= tol {
                            assert_eq!(*pk, 0.0, "class {x} ground {k}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn unsettled_class_is_reported() {
        let ls = levels();
        let grid = DetuningGrid::new(-60.0, 60.0, 2401).unwrap();
        let pop = ClassPopulations::uniform(grid);
        let fields = select_class_fields(&ls, 0.0, [1, 0, 0], 0.025).unwrap();
        // the target sees ground 0 and grounds 1, 2 at different sweep offsets
        let step = PumpStep::new(
            vec![fields[0] - 0.2, fields[1] + 0.2, fields[2] + 0.2],
            0.3,
            0.025,
        )
        .unwrap();
        let r = apply_pump_step(&pop, &ls, &step);
        assert!(matches!(r, Err(Error::NoConvergence { .. })), "{r:?}");
        let partial = step.with_transfer_fraction(0.5).unwrap();
        let out = apply_pump_step(&pop, &ls, &partial).unwrap();
        assert!(out.conservation_error() < 1e-12);
    }

    #[test]
    fn burn_sequence_shapes_trench_and_feature() {
        let ls = levels();
        let seq = BurnSequence {
            trench_halfwidth: 3.0,
            feature_fwhm: 0.5,
            ..BurnSequence::default()
        };
        let out = run_burn_sequence(&ls, &seq).unwrap();
        let pop = &out.populations;
        assert!(out.report.converged);
        assert!(pop.conservation_error() < 1e-12);
        assert!(out.after_selection.conservation_error() < 1e-12);
        let target = pop.populations.len() / 2;
        assert!(pop.populations[target][seq.probe_ground] > 0.9);
        for (i, p) in pop.populations.iter().enumerate() {
            let x = pop.offset(i);
            if x.abs() > seq.trench_halfwidth + 27.5 + 9.4 + 0.1 {
                assert_eq!(p, &[1.0 / 3.0; 3]);
            }
            if x.abs() <= seq.trench_halfwidth {
                assert!(p[seq.control_ground] < 1e-9);
                let u = x / (0.5 * seq.feature_fwhm);
                let w = 1.0 / (1.0 + u * u);
                assert!(p[seq.probe_ground] <= w + 1e-9, "class {x}: {p:?}");
            }
        }
    }

    #[test]
    fn narrow_trench_is_flagged() {
        let ls = levels();
        let seq = BurnSequence {
            trench_halfwidth: 2.0,
            feature_fwhm: 0.5,
            ..BurnSequence::default()
        };
        let out = run_burn_sequence(&ls, &seq).unwrap();
        let flagged = &out.report.control_resonant_outside;
        assert!(!flagged.is_empty());
        assert!(flagged.iter().all(|x| x.abs() > seq.trench_halfwidth));

        let grid = DetuningGrid::new(-40.0, 40.0, 801).unwrap();
        let control = -27.5;
        let all = control_audit(&ClassPopulations::uniform(grid), &ls, control, 0.0, 2.0);
        assert_eq!(all.len(), 8);
        assert!(
            control_audit(&ClassPopulations::uniform(grid), &ls, control, 0.0, 40.0).is_empty()
        );
    }

    #[test]
    fn unburned_profile_follows_background() {
        let ls = LevelStructure::uniform([0.0, 10.2, 27.5], [0.0, 4.6, 9.4], 40.0).unwrap();
        let grid = DetuningGrid::new(-200.0, 200.0, 4001).unwrap();
        let pop = ClassPopulations::uniform(grid);
        let prof =
            profile_from_populations(&pop, &ls, &ProbeTransition::new(1, 0, 0.0, 0.05)).unwrap();
        let w = prof.fwhm().unwrap();
        // three equal Lorentzians of FWHM 40 at the excited offsets
        let oracle: Vec<f64> = grid
            .points()
            .map(|x| {
                ls.excited_offsets
                    .iter()
                    .map(|e| 1.0 / (1.0 + ((x - e) / 20.025).powi(2)))
                    .sum()
            })
            .collect();
        let expect = crate::profile::numeric_fwhm(grid.start(), grid.step(), &oracle).unwrap();
        assert!((w / expect - 1.0).abs() < 0.01, "{w} vs {expect}");
    }

    #[test]
    fn feature_width_adds_kernel_width() {
        let ls = levels();
        let grid = DetuningGrid::new(-30.0, 30.0, 6001).unwrap();
        let mut pop = ClassPopulations::new(grid, vec![[1.0, 0.0, 0.0]; 6001]).unwrap();
        for i in 0..6001 {
            let x = pop.offset(i);
            if x.abs() < 4.0 {
                let u = x / 0.4;
                let w = 1.0 / (1.0 + u * u);
                pop.populations[i] = [1.0 - w, w, 0.0];
            }
        }
        let width = |k: f64| {
            let prof =
                profile_from_populations(&pop, &ls, &ProbeTransition::new(1, 0, 0.0, k)).unwrap();
            let t = prof.table().unwrap();
            let lo = ((-2.0 - t.start) / t.step).round() as usize;
            let hi = ((2.0 - t.start) / t.step).round() as usize;
            crate::profile::numeric_fwhm(t.shift(lo), t.step, &t.density[lo..=hi]).unwrap()
        };
        for k in [0.1, 0.2] {
            let w = width(k);
            assert!((w / (0.8 + k) - 1.0).abs() < 0.02, "{k}: {w}");
        }
    }

    #[test]
    fn empty_probe_ground_is_all_zero() {
        let ls = levels();
        let grid = DetuningGrid::new(-5.0, 5.0, 11).unwrap();
        let pop = ClassPopulations::new(grid, vec![[1.0, 0.0, 0.0]; 11]).unwrap();
        assert!(matches!(
            profile_from_populations(&pop, &ls, &ProbeTransition::new(1, 0, 0.0, 0.1)),
            Err(Error::AllZero)
        ));
    }
}
