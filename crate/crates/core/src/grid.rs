use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid of two-photon detunings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetuningGrid {
    start: f64,
    stop: f64,
    count: usize,
}

impl DetuningGrid {
    pub fn new(start: f64, stop: f64, count: usize) -> Result<Self> {
        if !start.is_finite() || !stop.is_finite() || !(start < stop) {
            return Err(Error::invalid(format!(
                "grid needs finite start < stop, got [{start}, {stop}]"
            )));
        }
        if count < 3 {
            return Err(Error::invalid(format!(
                "grid needs at least 3 points, got {count}"
            )));
        }
        Ok(DetuningGrid { start, stop, count })
    }

    /// Grid symmetric about zero.
    pub fn symmetric(half_span: f64, count: usize) -> Result<Self> {
        Self::new(-half_span, half_span, count)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn stop(&self) -> f64 {
        self.stop
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn step(&self) -> f64 {
        (self.stop - self.start) / (self.count - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.stop
        } else {
            self.start + self.step() * i as f64
        }
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.count).map(move |i| self.point(i))
    }

    /// Rebuilds a grid from sampled detunings, checking uniform spacing.
    pub fn from_points(xs: &[f64]) -> Result<Self> {
        if xs.len() < 3 {
            return Err(Error::Schema(format!(
                "need at least 3 rows, got {}",
                xs.len()
            )));
        }
        let grid = Self::new(xs[0], xs[xs.len() - 1], xs.len())?;
        let step = grid.step();
        for (i, &x) in xs.iter().enumerate() {
            if (x - grid.point(i)).abs() > 1e-6 * step {
                return Err(Error::Schema(format!(
                    "detuning column is not uniformly spaced at row {}",
                    i + 1
                )));
            }
        }
        Ok(grid)
    }

    /// Same span with the given number of points.
    pub fn with_count(&self, count: usize) -> Result<Self> {
        Self::new(self.start, self.stop, count)
    }
}
