use auxtrial_cli::ExperimentConfig;
use std::path::Path;
use std::process::{Command, Output};

fn auxtrial(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_auxtrial"))
        .args(args)
        .current_dir(dir)
        .env_remove("AUXTRIAL_SEED")
        .env_remove("AUXTRIAL_WORKERS")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = r#"
mode = "multitest-sim"
seed = 7
replicates = 200
[sweep]
preset = "two-groups"
configs = [1, 2]
odds_ratios = [1.0, 10.0]
"#;

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            let c = ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            c.validate().unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 10);
}

#[test]
fn simulate_writes_tables_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL);
    let out = auxtrial(&["simulate", "--config", &cfg, "--out", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let run = tmp.path().join("run");
    for f in ["results.csv", "table.csv", "table.txt", "manifest.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
    assert!(!run.join("PARTIAL").exists());
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 7);
    assert_eq!(m["status"], "ok");
    assert_eq!(m["replicates"], 200);
    let table = std::fs::read_to_string(run.join("table.csv")).unwrap();
    assert!(table.starts_with("scenario,method,"));
}

#[test]
fn same_seed_same_bytes_and_flags_override_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL);
    for (out, workers) in [("a", "1"), ("b", "2")] {
        let o = auxtrial(&["simulate", "--config", &cfg, "--out", out, "--workers", workers], tmp.path());
        assert_eq!(o.status.code(), Some(0));
    }
    let read = |d: &str| std::fs::read(tmp.path().join(d).join("results.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    let o = auxtrial(&["simulate", "--config", &cfg, "--out", "c", "--seed", "8"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(read("a"), read("c"));
    let m = std::fs::read_to_string(tmp.path().join("c/manifest.json")).unwrap();
    assert!(m.contains("\"seed\": 8"), "{m}");
}

#[test]
fn environment_seed_sits_between_file_and_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL);
    let o = Command::new(env!("CARGO_BIN_EXE_auxtrial"))
        .args(["simulate", "--config", &cfg, "--out", "e"])
        .current_dir(tmp.path())
        .env("AUXTRIAL_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let m = std::fs::read_to_string(tmp.path().join("e/manifest.json")).unwrap();
    assert!(m.contains("\"seed\": 99"), "{m}");
}

#[test]
fn config_errors_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let no_seed = write(tmp.path(), "a.toml", "mode = \"multitest-sim\"\nreplicates = 10\n[sweep]\npreset = \"two-groups\"\nconfigs = [1]\nodds_ratios = [1.0]\n");
    let o = auxtrial(&["simulate", "--config", &no_seed], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));

    let unknown = write(tmp.path(), "b.toml", "seed = 1\nreplicates = 10\ncolour = \"red\"\n");
    assert_eq!(auxtrial(&["simulate", "--config", &unknown], tmp.path()).status.code(), Some(2));

    let bad_or = write(
        tmp.path(),
        "c.toml",
        "mode = \"multitest-sim\"\nseed = 1\nreplicates = 10\n[sweep]\npreset = \"two-groups\"\nconfigs = [9]\nodds_ratios = [-1.0]\n",
    );
    assert_eq!(auxtrial(&["simulate", "--config", &bad_or], tmp.path()).status.code(), Some(2));
    assert_eq!(auxtrial(&["simulate"], tmp.path()).status.code(), Some(2));
    assert_eq!(auxtrial(&["no-such-command"], tmp.path()).status.code(), Some(2));
}

#[test]
fn deterministic_commands_need_no_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let o = auxtrial(&["enumerate-example", "--out", "ex"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("ex/example.csv")).unwrap();
    assert_eq!(csv.lines().count(), 17);
    let o = auxtrial(&["boundaries", "--out", "b"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(tmp.path().join("b/boundaries.csv")).unwrap();
    assert!(csv.contains("1.792169"), "{csv}");
}

#[test]
fn empty_scenario_list_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "mode = \"multitest-sim\"\nseed = 1\nreplicates = 10\n");
    let o = auxtrial(&["simulate", "--config", &cfg, "--out", "r"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("scenarios"));
    assert!(!tmp.path().join("r").exists());
}
