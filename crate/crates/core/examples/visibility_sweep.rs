//! Residual visibility against Ω²/(σ_opt·σ_spin) for each spin profile shape.

use eit_lineshape::config::parse_config;
use eit_lineshape::pipeline::run_sweep;
use std::path::Path;

const CONFIG: &str = r#"
mode = "sweep_visibility"
sigma_opt = 1.0
sigma_spin = 1e-2
gamma21 = 1e-5
gamma31 = 1e-5
spin_shapes = ["lorentzian", "gaussian", "flattop"]
sweep_values = [0.1, 0.3, 1.0, 3.0, 10.0]
"#;

fn main() -> eit_lineshape::Result<()> {
    let cfg = parse_config(CONFIG, Path::new("inline.toml"), Path::new("."))?;
    for rec in run_sweep(&cfg)? {
        println!(
            "spin {:>10} x {:>5}: residual visibility {:?}",
            rec.spin_shape.to_string(),
            rec.abscissa,
            rec.row.metrics.visibility_residual
        );
    }
    Ok(())
}
