use std::path::Path;
use std::process::{Command, Output};

fn polisim(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_polisim"));
    cmd.args(args).env_remove("POLISIM_OUT");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn small_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("config.json");
    let body = format!(r#"{{"horizon_months": 6, "city": {{"scale": 60.0{extra}}}}}"#);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn run_writes_csvs_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = small_config(tmp.path(), "");
    let o = polisim(
        &[
            "run",
            "--config",
            &config,
            "-n",
            "2",
            "-c",
            "2",
            "--svg",
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    let runs = m["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    assert!(runs.iter().all(|r| r["status"] == "ok" && r["months"] == 6));
    let files: Vec<&str> = m["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f.as_str().unwrap())
        .collect();
    assert!(files.iter().any(|f| f.ends_with(".csv")));
    assert!(files.iter().any(|f| f.ends_with(".svg")));
    for f in files {
        assert!(out.join(f).exists(), "{f} listed but missing");
    }
}

#[test]
fn output_dir_comes_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("from-env");
    let config = small_config(tmp.path(), "");
    let o = polisim(&["run", "--config", &config], &[("POLISIM_OUT", &out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("manifest.json").exists());
}

#[test]
fn sensitivity_sweeps_a_parameter_and_policies() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path(), "");
    let out = tmp.path().join("alpha");
    let o = polisim(
        &[
            "sensitivity",
            "ALPHA:0.4:0.8:3",
            "--config",
            &config,
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let groups: Vec<String> = manifest(&out)["runs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["group"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(
        groups,
        ["ALPHA=0.4", "ALPHA=0.6", "ALPHA=0.8"].map(String::from)
    );

    let out = tmp.path().join("policies");
    let o = polisim(
        &[
            "sensitivity",
            "POLICIES",
            "--config",
            &config,
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(manifest(&out)["runs"].as_array().unwrap().len(), 4);
}

#[test]
fn same_seed_gives_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path(), "");
    let read = |dir: &Path| {
        let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .map(|p| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    std::fs::read(&p).unwrap(),
                )
            })
            .collect();
        v.sort();
        v
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, cpus) in [(&a, "1"), (&b, "3")] {
        let o = polisim(
            &[
                "run",
                "--config",
                &config,
                "-n",
                "3",
                "-c",
                cpus,
                "--seed",
                "5",
                "--out",
                dir.to_str().unwrap(),
            ],
            &[],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let files = read(&a);
    assert!(!files.is_empty());
    assert_eq!(files, read(&b));
}

#[test]
fn generated_data_can_drive_a_run() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let o = polisim(
        &[
            "gen-data",
            "--out",
            data.to_str().unwrap(),
            "--regions",
            "4",
            "--municipalities",
            "2",
            "--scale",
            "60",
        ],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_dir(&data).unwrap().count() > 0);
    let data_json = serde_json::to_string(data.to_str().unwrap()).unwrap();
    let config = small_config(tmp.path(), &format!(r#", "data_dir": {data_json}"#));
    let out = tmp.path().join("out");
    let o = polisim(
        &["run", "--config", &config, "--out", out.to_str().unwrap()],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(manifest(&out)["runs"][0]["status"], "ok");
}

#[test]
fn configuration_problems_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();
    let missing = tmp.path().join("nope.json");
    let cases: Vec<Vec<String>> = vec![
        vec![
            "run".into(),
            "--config".into(),
            missing.to_string_lossy().into_owned(),
        ],
        vec!["sensitivity".into(), "NOPE:0:1:3".into()],
        vec!["sensitivity".into(), "ALPHA:0:1:1".into()],
        vec!["run".into(), "--scenario".into(), "utopia".into()],
        vec!["run".into(), "-n".into(), "0".into()],
    ];
    for mut args in cases {
        args.extend(["--out".to_string(), out.to_string()]);
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = polisim(&refs, &[]);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(!o.stderr.is_empty());
    }

    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"series_defaults": {"baseline_rate": 0.0}}"#).unwrap();
    let o = polisim(
        &["run", "--config", bad.to_str().unwrap(), "--out", out],
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rate"));
}
