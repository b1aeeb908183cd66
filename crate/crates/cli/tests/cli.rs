use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

/// Copy of the bundled demo in a scratch directory, optionally edited.
fn scenario(edit: impl Fn(String) -> String) -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    for entry in fs::read_dir(demo_dir()).unwrap() {
        let entry = entry.unwrap();
        fs::copy(entry.path(), dir.path().join(entry.file_name())).unwrap();
    }
    let toml = dir.path().join("demo.toml");
    let text = fs::read_to_string(&toml).unwrap();
    fs::write(&toml, edit(text)).unwrap();
    (dir, toml)
}

fn exheat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exheat"))
        .args(args)
        .env_remove("EXHEAT_OUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn validate_accepts_demo() {
    let o = exheat(&["validate", demo_dir().join("demo.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "OK");
}

#[test]
fn missing_series_is_an_io_failure() {
    let (dir, toml) = scenario(|t| t);
    fs::remove_file(dir.path().join("demo_elec_price.csv")).unwrap();
    let o = exheat(&["validate", toml.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("demo_elec_price.csv"), "{}", stderr(&o));
}

#[test]
fn band_violation_is_a_domain_failure() {
    let (_dir, toml) = scenario(|t| t.replace("t_fridge_min = 2.0", "t_fridge_min = 9.0"));
    let o = exheat(&["validate", toml.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("outside hard band"), "{}", stdout(&o));
}

#[test]
fn run_both_writes_outputs() {
    let (dir, toml) = scenario(|t| t);
    let out = dir.path().join("out");
    let o = exheat(&["run", toml.to_str().unwrap(), "--out", out.to_str().unwrap(), "--paradigm", "both"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["schema.json", "hourly_mp_600.csv", "hourly_ss_600.csv", "monthly_summary.csv", "monthly_prices.svg"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    assert_eq!(data_rows(&out.join("hourly_mp_600.csv")), 168);
}

#[test]
fn zero_price_scale_and_whole_horizon_run() {
    let (dir, toml) = scenario(|t| t);
    for extra in [["--price-scale", "0"], ["--whole-horizon", "--paradigm=mp"]] {
        let out = dir.path().join(extra[0].trim_start_matches('-'));
        let mut args = vec!["run", toml.to_str().unwrap(), "--out", out.to_str().unwrap()];
        args.extend(extra);
        let o = exheat(&args);
        assert_eq!(o.status.code(), Some(0), "{extra:?}: {}", stderr(&o));
        assert!(out.join("schema.json").is_file());
    }
}

#[test]
fn single_capacity_sweep_has_one_row() {
    let (dir, toml) = scenario(|t| t);
    let out = dir.path().join("out");
    let o = exheat(&["sweep", toml.to_str().unwrap(), "--out", out.to_str().unwrap(), "--capacities", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(data_rows(&out.join("sweep_summary.csv")), 1);
}

#[test]
fn range_sweep_is_identical_across_job_counts() {
    let (dir, toml) = scenario(|t| t);
    let mut summaries = Vec::new();
    for jobs in ["1", "4"] {
        let out = dir.path().join(format!("jobs{jobs}"));
        let o = exheat(&[
            "sweep",
            toml.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--capacities",
            "0:2100:300",
            "--jobs",
            jobs,
        ]);
        let text = stdout(&o);
        assert_eq!(text.lines().filter(|l| l.trim_start().starts_with(char::is_numeric)).count(), 8, "{text}");
        summaries.push(fs::read(out.join("sweep_summary.csv")).unwrap());
    }
    assert_eq!(summaries[0], summaries[1]);
}

#[test]
fn out_dir_falls_back_to_environment() {
    let (dir, toml) = scenario(|t| t);
    let out = dir.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_exheat"))
        .args(["run", toml.to_str().unwrap(), "--paradigm", "mp"])
        .env("EXHEAT_OUT_DIR", &out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("hourly_mp_600.csv").is_file());
}

#[test]
fn bad_capacity_range_is_rejected() {
    let o = exheat(&["sweep", demo_dir().join("demo.toml").to_str().unwrap(), "--capacities", "900:0:300"]);
    assert_eq!(o.status.code(), Some(2));
}
