use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn eit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eit"))
        .args(args)
        .output()
        .expect("spawn eit")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run_dir(out: &Output) -> PathBuf {
    PathBuf::from(String::from_utf8(out.stdout.clone()).unwrap().trim())
}

const SPECTRUM: &str = "mode = \"spectrum\"
omega = 0.3
sigma_opt = 1.0
sigma_spin = 0.001
grid_halfwidth = 0.6
grid_points = 601
optical_depth = 2.0
";

#[test]
fn spectrum_then_analyze() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", SPECTRUM);
    let out = tmp.path().join("runs");
    let o = eit(&[
        "spectrum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(&o);
    for f in [
        "config.toml",
        "spectrum.csv",
        "metrics.csv",
        "transmission.csv",
        "spectrum.gp",
    ] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    assert!(String::from_utf8_lossy(&o.stderr).contains("omega = 0.3"));

    let trace = dir.join("transmission.csv");
    let acfg = write_config(
        tmp.path(),
        "a.toml",
        &format!(
            "mode = \"analyze\"\ninput = {:?}\noptical_depth = 2.0\nomega = 0.3\nsigma_opt = 1.0\n",
            trace
        ),
    );
    let o = eit(&[
        "analyze",
        "--config",
        acfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(run_dir(&o).join("metrics.csv").is_file());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", SPECTRUM);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let oa = eit(&[
        "spectrum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        a.to_str().unwrap(),
        "--jobs",
        "1",
    ]);
    let ob = eit(&[
        "spectrum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    let (da, db) = (run_dir(&oa), run_dir(&ob));
    assert_eq!(da.file_name(), db.file_name());
    for f in ["spectrum.csv", "metrics.csv", "transmission.csv"] {
        assert_eq!(
            fs::read(da.join(f)).unwrap(),
            fs::read(db.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn validation_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(
        tmp.path(),
        "bad.toml",
        &SPECTRUM.replace("sigma_opt = 1.0", "sigma_opt = -1.0"),
    );
    let o = eit(&["spectrum", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sigma_opt"));

    let unknown = write_config(
        tmp.path(),
        "unknown.toml",
        &format!("{SPECTRUM}colour = 3\n"),
    );
    let o = eit(&["spectrum", "--config", unknown.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown.toml:8:"));

    let good = write_config(tmp.path(), "good.toml", SPECTRUM);
    let o = eit(&["holeburn", "--config", good.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = eit(&[
        "spectrum",
        "--config",
        good.to_str().unwrap(),
        "--jobs",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn trace_without_dip_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let rows: String = (0..101)
        .map(|i| {
            let x = -1.0 + 0.02 * i as f64;
            format!("{x},{}\n", (-2.0 / (1.0 + x * x)).exp())
        })
        .collect();
    let trace = tmp.path().join("flat.csv");
    fs::write(&trace, format!("delta,transmission\n{rows}")).unwrap();
    let cfg = write_config(
        tmp.path(),
        "a.toml",
        &format!("mode = \"analyze\"\ninput = {trace:?}\noptical_depth = 2.0\n"),
    );
    let o = eit(&[
        "analyze",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn missing_files_exit_4() {
    let o = eit(&["spectrum", "--config", "/nonexistent/cfg.toml"]);
    assert_eq!(o.status.code(), Some(4));

    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "a.toml",
        "mode = \"analyze\"\ninput = \"missing.csv\"\noptical_depth = 1.0\n",
    );
    let o = eit(&[
        "analyze",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
}
