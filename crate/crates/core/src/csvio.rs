//! CSV readers and writers for spectra, traces, profiles, populations and
//! metric tables. Floats are written as `{:.8e}`; missing values are empty
//! fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::analysis::EitMetrics;
use crate::error::{Error, Result};
use crate::grid::DetuningGrid;
use crate::holeburn::ClassPopulations;
use crate::integrator::SusceptibilitySpectrum;
use crate::params::Regime;
use crate::profile::BroadeningProfile;
use crate::transmission::TransmissionTrace;

pub const SPECTRUM_HEADER: [&str; 3] = ["delta", "chi_re", "chi_im"];
pub const TRACE_HEADER: [&str; 2] = ["delta", "transmission"];
pub const PROFILE_HEADER: [&str; 2] = ["shift", "density"];
pub const POPULATION_HEADER: [&str; 4] = ["class_offset", "pop_g1", "pop_g2", "pop_g3"];
pub const METRICS_HEADER: [&str; 9] = [
    "omega",
    "sigma_opt",
    "sigma_spin",
    "width",
    "vis_contrast",
    "vis_residual",
    "dip_pos",
    "peak_sep",
    "regime",
];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// One row of the metrics table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub omega: Option<f64>,
    pub sigma_opt: Option<f64>,
    pub sigma_spin: Option<f64>,
    pub metrics: EitMetrics,
}

impl MetricsRow {
    pub fn fields(&self) -> Vec<String> {
        let m = &self.metrics;
        vec![
            fmt_opt(self.omega),
            fmt_opt(self.sigma_opt),
            fmt_opt(self.sigma_spin),
            fmt_opt(m.width),
            fmt_opt(m.visibility_contrast),
            fmt_opt(m.visibility_residual),
            fmt_opt(m.dip_position),
            fmt_opt(m.peak_separation),
            m.regime.map(|r| r.to_string()).unwrap_or_default(),
        ]
    }
}

/// Write a header and string rows.
pub fn write_table<P: AsRef<Path>>(path: P, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Schema(format!(
                "row has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_spectrum<P: AsRef<Path>>(path: P, s: &SusceptibilitySpectrum) -> Result<()> {
    let rows: Vec<Vec<String>> = s
        .grid
        .points()
        .zip(&s.values)
        .map(|(d, v)| vec![fmt_f64(d), fmt_f64(v.re), fmt_f64(v.im)])
        .collect();
    write_table(path, &SPECTRUM_HEADER, &rows)
}

pub fn write_trace<P: AsRef<Path>>(path: P, t: &TransmissionTrace) -> Result<()> {
    let rows: Vec<Vec<String>> = t
        .grid
        .points()
        .zip(&t.transmission)
        .map(|(d, v)| vec![fmt_f64(d), fmt_f64(*v)])
        .collect();
    write_table(path, &TRACE_HEADER, &rows)
}

/// Tabulated profiles are written at their nodes; analytic ones are sampled
/// over ±`span_fwhm` widths.
pub fn write_profile<P: AsRef<Path>>(path: P, p: &BroadeningProfile) -> Result<()> {
    let points: Vec<(f64, f64)> = match p.table() {
        Some(t) => (0..t.density.len())
            .map(|i| (t.shift(i), t.density[i]))
            .collect(),
        None => p.to_points(10.0, 2001),
    };
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|(x, y)| vec![fmt_f64(*x), fmt_f64(*y)])
        .collect();
    write_table(path, &PROFILE_HEADER, &rows)
}

pub fn write_populations<P: AsRef<Path>>(path: P, pop: &ClassPopulations) -> Result<()> {
    let rows: Vec<Vec<String>> = pop
        .grid
        .points()
        .zip(&pop.populations)
        .map(|(x, p)| vec![fmt_f64(x), fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(p[2])])
        .collect();
    write_table(path, &POPULATION_HEADER, &rows)
}

pub fn write_metrics<P: AsRef<Path>>(path: P, rows: &[MetricsRow]) -> Result<()> {
    let rows: Vec<Vec<String>> = rows.iter().map(MetricsRow::fields).collect();
    write_table(path, &METRICS_HEADER, &rows)
}

/// A parsed CSV: header plus rows of optional floats (empty field = `None`).
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl NumericTable {
    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let k = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r[k]).collect())
    }

    /// A column with every value present.
    pub fn required(&self, name: &str) -> Result<Vec<f64>> {
        self.column(name)?
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::Schema(format!("row {}: empty `{name}`", i + 2))))
            .collect()
    }
}

/// Read a CSV whose header must start with `expected`. Non-numeric cells in
/// those columns are schema errors; extra columns are kept but may be text.
pub fn read_numeric<P: AsRef<Path>>(path: P, expected: &[&str]) -> Result<NumericTable> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < expected.len() || header.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::Schema(format!(
            "{}: expected header `{}`, found `{}`",
            path.display(),
            expected.join(","),
            header.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = i + 2;
        let mut row = Vec::with_capacity(header.len());
        for (k, cell) in rec.iter().enumerate() {
            if cell.is_empty() {
                row.push(None);
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) => row.push(Some(v)),
                Err(_) if k >= expected.len() => row.push(None),
                Err(_) => {
                    return Err(Error::Schema(format!(
                        "{}:{line}: `{}` is not a number in column `{}`",
                        path.display(),
                        cell,
                        header[k]
                    )))
                }
            }
        }
        rows.push(row);
    }
    Ok(NumericTable { header, rows })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::io(path, source),
            _ => unreachable!(),
        }
    } else {
        Error::Schema(format!("{}: {e}", path.display()))
    }
}

/// Read a `delta,transmission` trace. The grid must be uniform.
pub fn read_trace<P: AsRef<Path>>(
    path: P,
    optical_depth: Option<f64>,
) -> Result<TransmissionTrace> {
    let t = read_numeric(&path, &TRACE_HEADER)?;
    let xs = t.required("delta")?;
    let ts = t.required("transmission")?;
    let grid =
        DetuningGrid::from_points(&xs).map_err(|e| Error::Schema(format!("trace grid: {e}")))?;
    let d = match optical_depth {
        Some(d) => d,
        None => ts
            .iter()
            .filter(|v| **v > 0.0)
            .map(|v| -v.ln())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE),
    };
    TransmissionTrace::new(grid, ts, d)
}

/// Read a `shift,density` table into a tabulated profile.
pub fn read_profile<P: AsRef<Path>>(path: P) -> Result<BroadeningProfile> {
    let t = read_numeric(&path, &PROFILE_HEADER)?;
    let xs = t.required("shift")?;
    let ys = t.required("density")?;
    let points: Vec<(f64, f64)> = xs.into_iter().zip(ys).collect();
    BroadeningProfile::from_table(&points)
}

/// Read a metrics table written by [`write_metrics`].
pub fn read_metrics<P: AsRef<Path>>(path: P) -> Result<Vec<MetricsRow>> {
    let path = path.as_ref();
    let t = read_numeric(path, &METRICS_HEADER[..8])?;
    if t.header.get(8).map(String::as_str) != Some("regime") {
        return Err(Error::Schema(format!(
            "{}: missing column `regime`",
            path.display()
        )));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut regimes = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let cell = rec.get(8).unwrap_or("");
        regimes.push(if cell.is_empty() {
            None
        } else {
            Some(cell.parse::<Regime>()?)
        });
    }
    Ok(t.rows
        .iter()
        .zip(regimes)
        .map(|(r, regime)| MetricsRow {
            omega: r[0],
            sigma_opt: r[1],
            sigma_spin: r[2],
            metrics: EitMetrics {
                width: r[3],
                visibility_contrast: r[4],
                visibility_residual: r[5],
                dip_position: r[6],
                peak_positions: Vec::new(),
                peak_separation: r[7],
                regime,
                center_bump: false,
                status: String::new(),
            },
        })
        .collect())
}
