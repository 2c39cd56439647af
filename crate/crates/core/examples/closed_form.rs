//! Closed-form width, visibility and regime across the coupling strength for
//! Lorentzian optical and spin broadening.

use eit_lineshape::susceptibility::{
    chi_lorentzian_inhomogeneous, closed_form_metrics, leading_width,
};
use eit_lineshape::RateParams;

fn main() -> eit_lineshape::Result<()> {
    let base = RateParams::new(1.0, 1e-4, 1e-4, 1.0, 1e-3)?;
    println!(
        "{:>8} {:>12} {:>12} {:>10} {:>18}",
        "omega", "width", "leading", "vis", "regime"
    );
    for omega in [0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0] {
        let p = base.with_omega(omega);
        let m = closed_form_metrics(&p)?;
        println!(
            "{omega:>8.3} {:>12.4e} {:>12.4e} {:>10.4} {:>18}",
            m.width,
            leading_width(omega, p.sigma_opt),
            m.visibility,
            m.regime
        );
    }

    let p = base.with_omega(0.3);
    let chi0 = chi_lorentzian_inhomogeneous(0.0, &p)?;
    let chi_edge = chi_lorentzian_inhomogeneous(0.5, &p)?;
    println!("chi(0) = {chi0:.4e}, chi(0.5) = {chi_edge:.4e}");
    Ok(())
}
