use std::path::{Path, PathBuf};
use std::process::Command;

use ambo::grid::{ScalarField, TorusGrid};
use ambo::harness::config::{load_config, Experiment, RunConfig};
use ambo::harness::experiments::execute;
use ambo::harness::io::{decode_field, encode_field, read_field, write_csv, write_field};
use ambo::harness::HarnessError;

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn preset(name: &str) -> PathBuf {
    repo().join("presets").join(name)
}

const SMALL_RUN: &str = r#"
experiment = "run"
tension_fields = "direct"
seed = 7

[grid]
dim = 2
n = 64

[geometry]
shape = "band"
lower = 0.2
upper = 0.8

[tensions]
pv = "1"
sp = "0.9"
sv = "0.6"

[initial]
shape = "cap"
center_x = 0.5
radius = 0.2
angle_deg = 90.0

[scheme]
h = 4e-3
max_steps = 6
snapshot_every = 3
"#;

#[test]
fn every_preset_parses() {
    let dir = repo().join("presets");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            let c = load_config(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            c.check().unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            count += 1;
        }
    }
    assert!(count >= 10);
}

#[test]
fn unknown_keys_are_named() {
    let text = SMALL_RUN.replace("max_steps = 6", "max_steps = 6\nmax_stpes = 7");
    let err = RunConfig::from_toml(&text).unwrap_err();
    assert!(matches!(&err, HarnessError::Config(m) if m.contains("max_stpes")), "{err}");
    let text = SMALL_RUN.replace("radius = 0.2\nangle_deg", "radius = 0.2\ncolour = 1\nangle_deg");
    let err = RunConfig::from_toml(&text).unwrap_err();
    assert!(err.to_string().contains("colour"), "{err}");
}

#[test]
fn unresolvable_h_is_rejected() {
    let text = SMALL_RUN.replace("h = 4e-3", "h = 1e-4");
    let c = RunConfig::from_toml(&text).unwrap();
    assert!(matches!(c.check(), Err(HarnessError::Config(m)) if m.contains("scheme.h")));
}

#[test]
fn field_files_round_trip_bit_for_bit() {
    let grid = TorusGrid::new(2, 16).unwrap();
    let f = ScalarField::from_fn(grid, |x| (x[0] * 7.3).sin() + x[1].powi(3) * 1e-300);
    let bytes = encode_field(&f);
    assert_eq!(&bytes[..4], b"AMBO");
    assert_eq!(bytes[4], 1);
    let g = decode_field(&bytes).unwrap();
    assert!(f.values().iter().zip(g.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("nested/f.ambo");
    write_field(&p, &f).unwrap();
    assert_eq!(read_field(&p).unwrap(), f);
    assert!(decode_field(&bytes[..bytes.len() - 1]).is_err());
    assert!(decode_field(b"AMBX\x01").is_err());
}

#[test]
fn csv_always_has_a_header() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.csv");
    write_csv(&p, &["a", "b"], &[]).unwrap();
    assert_eq!(std::fs::read_to_string(&p).unwrap(), "a,b\n");
    assert!(write_csv(&p, &["a", "b"], &[vec!["1".into()]]).is_err());
}

#[test]
fn run_outputs_are_deterministic_and_match_the_schema() {
    let config = RunConfig::from_toml(SMALL_RUN).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (outcome, files) = execute(&config, a.path()).unwrap();
    execute(&config, b.path()).unwrap();
    for f in &files {
        let name = f.file_name().unwrap();
        assert_eq!(std::fs::read(f).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name:?} differs");
    }
    let csv = std::fs::read_to_string(a.path().join("steps.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "k,energy,volume,interface_cells,lambda,defect");
    assert_eq!(csv.lines().count(), 1 + 1 + outcome.results["steps"].as_u64().unwrap() as usize);
    assert!(a.path().join("u_000003.ambo").exists());

    let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(repo().join("schema/summary.schema.json")).unwrap()).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.path().join("summary.json")).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&summary).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
    assert_eq!(summary["metadata"]["config_hash"].as_str().unwrap(), config.hash());
    assert!(summary["results"]["contact_angles"]["local"].is_object());
}

#[test]
fn converge_preset_writes_decreasing_errors() {
    let mut config = load_config(&preset("disk_converge.toml")).unwrap();
    config.grid.n = 256;
    config.converge.h = vec![4e-3, 1e-3];
    let dir = tempfile::tempdir().unwrap();
    let (outcome, _) = execute(&config, dir.path()).unwrap();
    assert_eq!(outcome.experiment, Experiment::Converge);
    let csv = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let errs: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert_eq!(errs.len(), 2);
    assert!(errs[1] < errs[0]);
}

fn ambo(args: &[&str], out: &Path) -> (i32, String) {
    let output = Command::new(env!("CARGO_BIN_EXE_ambo")).args(args).env("AMBO_OUTPUT_DIR", out).env("AMBO_THREADS", "1").output().unwrap();
    (output.status.code().unwrap(), String::from_utf8_lossy(&output.stderr).into_owned())
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let default = preset("default.toml");
    let (code, err) = ambo(&["validate", default.to_str().unwrap(), "--n", "64"], dir.path());
    assert_eq!(code, 0, "{err}");
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "ok");

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, SMALL_RUN.replace("[grid]", "typo = 1\n[grid]")).unwrap();
    let (code, err) = ambo(&["run", bad.to_str().unwrap()], dir.path());
    assert_eq!(code, 1);
    assert!(err.contains("typo"), "{err}");

    // An angle requested on a torus is a configuration error.
    let (code, _) = ambo(&["angle", default.to_str().unwrap()], dir.path());
    assert_eq!(code, 1);

    // A far too short run cannot reach the Young angle: numerical failure.
    let angle = preset("angle_0p5.toml");
    let (code, err) = ambo(&["angle", angle.to_str().unwrap(), "--n", "128", "--h", "4e-3", "--max-steps", "1"], dir.path());
    assert_eq!(code, 2, "{err}");
}
