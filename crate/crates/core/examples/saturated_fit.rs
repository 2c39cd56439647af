//! Recovering optical depth and width from a saturated Lorentzian trace.

use eit_lineshape::transmission::{fit_saturated_absorption, TransmissionTrace};
use eit_lineshape::DetuningGrid;

fn main() -> eit_lineshape::Result<()> {
    let (d, w) = (6.0, 0.8);
    let grid = DetuningGrid::symmetric(4.0, 801)?;
    let t: Vec<f64> = grid
        .points()
        .map(|x| (-d / (1.0 + (2.0 * x / w).powi(2))).exp())
        .collect();
    let trace = TransmissionTrace::new(grid, t, d)?;
    let fit = fit_saturated_absorption(&trace)?;
    println!(
        "optical depth {:.4} (true {d}), width {:.4} (true {w}), residual {:.1e}",
        fit.optical_depth, fit.width, fit.residual_norm
    );
    Ok(())
}
