//! Width against coupling for three optical profile shapes.

use eit_lineshape::config::parse_config;
use eit_lineshape::pipeline::run_sweep;
use std::path::Path;

const CONFIG: &str = r#"
mode = "sweep_width"
sigma_opt = 1.0
sigma_spin = 1e-3
gamma21 = 1e-6
gamma31 = 1e-6
optical_shapes = ["lorentzian", "gaussian", "flattop"]
sweep_values = [0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0]
"#;

fn main() -> eit_lineshape::Result<()> {
    let cfg = parse_config(CONFIG, Path::new("inline.toml"), Path::new("."))?;
    for rec in run_sweep(&cfg)? {
        let m = &rec.row.metrics;
        println!(
            "{:>10} omega/sigma {:>6}: width {:>12} {}",
            rec.optical_shape.to_string(),
            rec.abscissa,
            m.width
                .map(|w| format!("{w:.4e}"))
                .unwrap_or_else(|| "-".into()),
            m.status
        );
    }
    Ok(())
}
