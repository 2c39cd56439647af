//! Three-stage hole burning in a europium-like level scheme followed by the
//! EIT spectrum of the prepared feature.

use eit_lineshape::config::parse_config;
use eit_lineshape::pipeline::run_holeburn;
use std::path::Path;

const CONFIG: &str = include_str!("../configs/holeburn_eu.toml");

fn main() -> eit_lineshape::Result<()> {
    let cfg = parse_config(CONFIG, Path::new("holeburn_eu.toml"), Path::new("."))?;
    let run = run_holeburn(&cfg)?;
    let r = &run.burn.report;
    println!(
        "passes {:?}, converged {}, feature population {:.4e}, conservation error {:.1e}",
        r.passes,
        r.converged,
        r.feature_population,
        run.burn.populations.conservation_error()
    );
    println!(
        "control-resonant classes outside the trench: {}",
        r.control_resonant_outside.len()
    );
    let m = &run.metrics.metrics;
    println!(
        "width {:?}, peaks {:?}, centre bump {}",
        m.width, m.peak_positions, m.center_bump
    );
    Ok(())
}
