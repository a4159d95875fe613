use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fracdn_cli::records::{RunRecords, Summary, SEQUENCE_HEADER};
use serde_json::{json, Value};

fn config(coefficients: Value, experiment: Value, p: f64, out: &Path) -> Value {
    json!({
        "experiment": experiment,
        "domain": {
            "dim": 1, "half_width": 4.0, "spacing": 0.0078125,
            "omega": {"shape": "box", "center": [0.0], "half_widths": [1.0]},
            "w": {"shape": "box", "center": [2.5], "half_widths": [0.5]}
        },
        "coefficients": coefficients,
        "params": {"s": 0.5, "p": p},
        "sequence": {"x0": [2.5], "r0": 0.5},
        "output_dir": out,
        "seed": 11
    })
}

fn constant_three(out: &Path) -> Value {
    config(
        json!({"c": {"family": "constant", "value": 3.0}}),
        json!({"kind": "reconstruct", "coefficient": "c"}),
        2.0,
        out,
    )
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path
}

fn fracdn(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fracdn"));
    cmd.args(args).env_remove(fracdn_cli::OUTPUT_DIR_ENV);
    if let Some(dir) = env_out {
        cmd.env(fracdn_cli::OUTPUT_DIR_ENV, dir);
    }
    cmd.output().unwrap()
}

fn run_dirs(root: &Path) -> Vec<PathBuf> {
    fs::read_dir(root)
        .map(|it| it.map(|e| e.unwrap().path()).filter(|p| p.is_dir()).collect())
        .unwrap_or_default()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn constant_coefficient_is_recovered() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("runs");
    let cfg = write_config(tmp.path(), "c3.json", &constant_three(&out));
    let o = fracdn(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("3.000000"));

    let dirs = run_dirs(&out);
    assert_eq!(dirs.len(), 1);
    let summary: Summary =
        serde_json::from_str(&fs::read_to_string(dirs[0].join("summary.json")).unwrap()).unwrap();
    let exp = &summary.experiments[0];
    let energy = exp.energy_limit.as_ref().unwrap().value;
    assert!((energy - 3.0).abs() <= 1e-12, "energy limit {energy}");

    let records: RunRecords =
        serde_json::from_str(&fs::read_to_string(dirs[0].join("records.json")).unwrap()).unwrap();
    let RunRecords::Reconstruct { record } = records else {
        panic!("wrong record kind")
    };
    let last = record.rows.last().unwrap();
    let pairing = exp.pairing_limit.as_ref().unwrap().value;
    assert!((pairing - 3.0).abs() <= last.correction.abs());
}

#[test]
fn p_equal_one_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = constant_three(&tmp.path().join("runs"));
    v["params"]["p"] = json!(1.0);
    let cfg = write_config(tmp.path(), "bad.json", &v);
    let o = fracdn(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("params.p") && err.contains("p must exceed 1"), "{err}");
    assert!(run_dirs(&tmp.path().join("runs")).is_empty());
}

#[test]
fn export_writes_table_and_round_tripping_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("runs");
    let cfg = write_config(tmp.path(), "c3.json", &constant_three(&out));
    assert_eq!(fracdn(&["run", cfg.to_str().unwrap()], None).status.code(), Some(0));
    let id = run_dirs(&out)[0].file_name().unwrap().to_str().unwrap().to_string();
    let out_s = out.to_str().unwrap();

    let o = fracdn(&["export", &id, "--format", "csv", "--output-dir", out_s], None);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(out.join(&id).join("export/reconstruct.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], SEQUENCE_HEADER.join(","));
    assert_eq!(lines[0], "N,pairing,energy,correction,u_minus_phi_norm,iterations");

    let o = fracdn(&["export", &id, "--format", "json", "--output-dir", out_s], None);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(out.join(&id).join("export/summary.json")).unwrap();
    let summary: Summary = serde_json::from_str(&text).unwrap();
    assert_eq!(summary.run_id, id);
    assert_eq!(serde_json::to_string_pretty(&summary).unwrap(), text);

    let o = fracdn(&["export", "0000000000000000", "--format", "csv", "--output-dir", out_s], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn under_resolved_sequence_keeps_partial_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("runs");
    let mut v = constant_three(&out);
    v["sequence"]["n_list"] = json!([1, 2, 4, 8, 64]);
    let cfg = write_config(tmp.path(), "fine.json", &v);
    let o = fracdn(&["run", cfg.to_str().unwrap()], None);
    assert_ne!(o.status.code(), Some(0));
    let csv = fs::read_to_string(run_dirs(&out)[0].join("reconstruct.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[5].contains("FAILED"), "{}", lines[5]);
}

#[test]
fn separable_pair_is_determined_at_probes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("runs");
    let gamma = json!({"base": 1.5, "amplitude": 0.5, "center": [2.5], "width": 1.0});
    let v = config(
        json!({
            "a": {"family": "separable", "gamma": gamma},
            "b": {"family": "separable", "gamma": gamma}
        }),
        json!({"kind": "determine", "coefficient_1": "a", "coefficient_2": "b", "probes": [[2.45], [2.55]]}),
        2.0,
        &out,
    );
    let v = {
        let mut v = v;
        v["sequence"]["r0"] = json!(0.4);
        v
    };
    let cfg = write_config(tmp.path(), "det.json", &v);
    let o = fracdn(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = fs::read_to_string(run_dirs(&out)[0].join("determine_comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn identical_config_is_skipped_unless_forced() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("runs");
    let cfg = write_config(tmp.path(), "c3.json", &constant_three(&out));
    let cfg = cfg.to_str().unwrap();
    assert_eq!(fracdn(&["run", cfg], None).status.code(), Some(0));
    let dir = run_dirs(&out).remove(0);
    let log = dir.join("run.log");
    fs::write(&log, "marker").unwrap();

    assert_eq!(fracdn(&["run", cfg], None).status.code(), Some(0));
    assert_eq!(fs::read_to_string(&log).unwrap(), "marker");

    assert_eq!(fracdn(&["run", cfg, "--force", "--threads", "2"], None).status.code(), Some(0));
    assert_ne!(fs::read_to_string(&log).unwrap(), "marker");
    assert_eq!(run_dirs(&out).len(), 1);
}

#[test]
fn environment_overrides_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let configured = tmp.path().join("configured");
    let env_dir = tmp.path().join("from_env");
    let cfg = write_config(tmp.path(), "c3.json", &constant_three(&configured));
    let o = fracdn(&["run", cfg.to_str().unwrap()], Some(&env_dir));
    assert_eq!(o.status.code(), Some(0));
    assert!(run_dirs(&configured).is_empty());
    assert_eq!(run_dirs(&env_dir).len(), 1);
}

#[test]
fn inequality_command_reports_and_validates() {
    let o = fracdn(&["verify-inequalities", "--p", "3", "--samples", "5000", "--seed", "4"], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("holds"));
    let o = fracdn(&["verify-inequalities", "--p", "1", "--samples", "10", "--seed", "4"], None);
    assert_eq!(o.status.code(), Some(2));
}
