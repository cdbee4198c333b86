use std::path::Path;
use std::process::{Command, Output};

fn kinlayer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinlayer"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const SMALL: &str = r#"{
  "eps_list": [0.2, 0.1, 0.05],
  "transport": {"n_r": 12, "n_theta": 24, "n_dir": 24},
  "expansion": {"n_tau": 12, "n_phi": 32},
  "milne": {"n_phi": 32}
}"#;

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn limit_csv_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut csvs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = kinlayer(&[
            "limit",
            "run",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--workers",
            "2",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        csvs.push(std::fs::read(out.join("limit.csv")).unwrap());
        let svg = std::fs::read_to_string(out.join("limit.svg")).unwrap();
        assert_eq!(svg.matches("<line").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 3);
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs.remove(0)).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "eps,sup_err,l2_err,slope_running"
    );
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("o");
    let o = kinlayer(&[
        "geom",
        "check",
        "--samples",
        "50",
        "--config",
        &cfg,
        "--domain",
        "ellipse:2,1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let shape = m["config"]["domain"].to_string();
    assert!(shape.contains("ellipse"), "{shape}");
    assert_eq!(m["config"]["eps_list"][0], 0.2);
    assert!(m["g_family"]["origin"]
        .as_str()
        .unwrap()
        .starts_with("our choice"));
}

#[test]
fn zero_source_gives_zero_errors_and_no_slope() {
    let dir = tempfile::tempdir().unwrap();
    let body = SMALL.replacen('{', r#"{ "g": {"kind": "zero"},"#, 1);
    let cfg = write_config(dir.path(), &body);
    let out = dir.path().join("o");
    let o = kinlayer(&[
        "limit",
        "run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["slope_defined"], false);
    let text = std::fs::read_to_string(out.join("limit.csv")).unwrap();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!((f[1], f[2], f[3]), ("0", "0", ""), "{line}");
    }
    assert!(!out.join("limit.svg").exists());
}

#[test]
fn run_with_no_completed_rows_writes_only_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let body = SMALL.replace(r#""n_dir": 24}"#, r#""n_dir": 24, "max_iter": 1}"#);
    let cfg = write_config(dir.path(), &body);
    let out = dir.path().join("o");
    let o = kinlayer(&[
        "limit",
        "run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let files: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(files, vec![std::ffi::OsString::from("manifest.json")]);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["empty"], true);
    assert_eq!(m["failures"].as_array().unwrap().len(), 3);
}

#[test]
fn invalid_configuration_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    assert_eq!(
        code(&kinlayer(&[
            "limit", "run", "--eps", "0.1,0.2", "--out", out
        ])),
        3
    );
    assert_eq!(
        code(&kinlayer(&["limit", "run", "--eps", "1.5", "--out", out])),
        3
    );
    assert_eq!(
        code(&kinlayer(&[
            "geom", "check", "--domain", "square:1", "--out", out
        ])),
        3
    );
    assert_eq!(code(&kinlayer(&["frobnicate"])), 3);
    let cfg = write_config(dir.path(), r#"{"unknown_key": 1}"#);
    assert_eq!(
        code(&kinlayer(&["limit", "run", "--config", &cfg, "--out", out])),
        3
    );
    assert_eq!(code(&kinlayer(&["--help"])), 0);
}

#[test]
fn transport_non_convergence_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{"transport": {"n_r": 8, "n_theta": 16, "n_dir": 16, "max_iter": 1}}"#;
    let cfg = write_config(dir.path(), body);
    let out = dir.path().join("o");
    let o = kinlayer(&[
        "transport",
        "solve",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}
