use std::path::Path;
use std::process::{Command, Output};

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrepeater")).arg("--out").arg(out).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn chain_prints_final_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["chain", "--N", "3", "--F", "0.9"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("F_final=0.756"), "{}", stdout(&o));
    let o = run(dir.path(), &["chain", "--N", "3", "--F", "0.9", "--method", "dynamical"]);
    assert!(stdout(&o).contains("F_final=0.738"));
    assert!(dir.path().join("chain_conventional.csv").exists());
}

#[test]
fn perfect_dynamical_swap() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["swap", "--method", "dynamical", "--F", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("S1=1 ") && s.contains("S4=0"), "{s}");
    assert!(s.contains("ordered_above=0.5"));
}

#[test]
fn distribute_reports_closed_form_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["distribute", "--alpha", "1", "--ell", "25"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("f=0.641227"), "{}", stdout(&o));
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"alpha": 1, "colour": 2}"#).unwrap();
    let cases: [&[&str]; 4] = [
        &["--config", cfg.to_str().unwrap(), "distribute"],
        &["chain", "--N", "4"],
        &["distribute", "--alpha", "2"],
        &["frobnicate"],
    ];
    for args in cases {
        assert_eq!(run(dir.path(), args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"alpha": 0.5, "ell_km": 10, "n_segments": 5}"#).unwrap();
    let c = cfg.to_str().unwrap();
    let from_file = stdout(&run(dir.path(), &["--config", c, "chain"]));
    assert!(from_file.contains("N=5"), "{from_file}");
    let flagged = stdout(&run(dir.path(), &["--config", c, "chain", "--N", "7"]));
    assert!(flagged.contains("N=7"));
}

#[test]
fn reproduce_table_passes_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--format", "json", "reproduce", "table3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count() >= 5);
    let json = std::fs::read_to_string(dir.path().join("table3.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(v.is_object() || v.is_array());
}
