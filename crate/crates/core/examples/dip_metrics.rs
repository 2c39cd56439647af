//! Dip width, both visibilities and the peak structure of a computed spectrum.

use eit_lineshape::analysis::{
    absorption_curve, analyze_curve, dispersion_slope, extract_fwhm_dip,
};
use eit_lineshape::susceptibility::eit_width_closed;
use eit_lineshape::transmission::absorption_baseline;
use eit_lineshape::{
    integrate_susceptibility, BroadeningProfile, DetuningGrid, QuadratureConfig, RateParams,
};

fn main() -> eit_lineshape::Result<()> {
    let p = RateParams::new(0.3, 1e-4, 1e-4, 1.0, 1e-3)?;
    let grid = DetuningGrid::symmetric(0.6, 2401)?;
    let q = QuadratureConfig::default();
    let s = integrate_susceptibility(
        grid,
        &p,
        &BroadeningProfile::lorentzian(p.sigma_opt)?,
        &BroadeningProfile::lorentzian(p.sigma_spin)?,
        &q,
    )?;
    let curve = absorption_curve(&s);
    let dip = extract_fwhm_dip(&curve)?;
    println!(
        "measured width {:.5e}, closed form {:.5e}",
        dip.width,
        eit_width_closed(&p)?.width
    );

    let baseline = absorption_baseline(&s, &q)?;
    let m = analyze_curve(&curve, Some(baseline));
    println!(
        "contrast {:?}, residual {:?}, peaks {:?}, regime {:?}",
        m.visibility_contrast, m.visibility_residual, m.peak_positions, m.regime
    );
    println!(
        "dispersion slope at line centre {:.4}",
        dispersion_slope(&s)?
    );
    Ok(())
}
