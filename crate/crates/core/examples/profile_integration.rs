//! Numeric integration over Gaussian and flat-top optical profiles, checked
//! against the Lorentzian closed form on the same grid.

use eit_lineshape::susceptibility::chi_lorentzian_inhomogeneous;
use eit_lineshape::{
    integrate_susceptibility, BroadeningProfile, DetuningGrid, QuadratureConfig, RateParams,
};

fn main() -> eit_lineshape::Result<()> {
    let p = RateParams::new(0.3, 1e-4, 1e-4, 1.0, 1e-3)?;
    let grid = DetuningGrid::symmetric(0.6, 121)?;
    let spin = BroadeningProfile::lorentzian(p.sigma_spin)?;
    let q = QuadratureConfig::default();

    let lorentz =
        integrate_susceptibility(grid, &p, &BroadeningProfile::lorentzian(1.0)?, &spin, &q)?;
    let worst = grid
        .points()
        .zip(&lorentz.values)
        .map(|(d, v)| {
            let exact = chi_lorentzian_inhomogeneous(d, &p).unwrap();
            (v - exact).norm() / exact.norm()
        })
        .fold(0.0, f64::max);
    println!("lorentzian: max deviation from closed form {worst:.2e}");

    for (name, optical) in [
        ("gaussian", BroadeningProfile::gaussian(1.0)?),
        ("flat-top", BroadeningProfile::flat_top(1.0)?),
    ] {
        let s = integrate_susceptibility(grid, &p, &optical, &spin, &q)?;
        let report = s.report.as_ref().expect("numeric spectra carry a report");
        let mid = grid.count() / 2;
        println!(
            "{name}: Im chi at 0 = {:.4e}, at edge = {:.4e}, {} evaluations, max rel error {:.1e}",
            s.values[mid].im, s.values[0].im, report.evaluations, report.max_rel_error
        );
    }
    Ok(())
}
