use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use deesil::eval::parse_report;

fn deesil(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deesil"))
        .args(args)
        .env_remove("DEESIL_OUTPUT_DIR")
        .env_remove("DEESIL_WORKERS")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn generate(dir: &Path, extra: &[&str]) {
    let out = dir.to_str().unwrap();
    let mut args = vec![
        "gen-synthetic",
        "--classes",
        "6",
        "--dim",
        "8",
        "--train-per-class",
        "12",
        "--validation-per-class",
        "4",
        "--test-per-class",
        "5",
        "--separation",
        "4",
        "--seed",
        "3",
        "--out",
        out,
    ];
    args.extend_from_slice(extra);
    let result = deesil(&args);
    assert!(result.status.success(), "{}", stderr(&result));
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const FILE_CONFIG: &str = r#"output_dir = "out"

[experiment]
memory_budget = 30
strategy = "rand"
seed = 4
c_grid = [0.1, 1.0]
validation_per_class = 4

[data]
train = "data/train.dsf"
test = "data/test.dsf"

[plan]
batch_size = 2
"#;

fn run_dir(out: &Output) -> PathBuf {
    PathBuf::from(String::from_utf8_lossy(&out.stdout).trim())
}

#[test]
fn run_writes_the_documented_layout() {
    let tmp = tempfile::tempdir().unwrap();
    generate(&tmp.path().join("data"), &[]);
    let config = write_config(tmp.path(), "run.toml", FILE_CONFIG);
    let out = deesil(&["run", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));

    let dir = run_dir(&out);
    assert_eq!(dir.parent().unwrap(), tmp.path().join("out"));
    assert_eq!(dir.file_name().unwrap().len(), 12);
    for file in ["manifest.txt", "config.toml", "reports/report.csv", "reports/report.dat", "reports/grid.csv", "reports/timings.csv"] {
        assert!(dir.join(file).is_file(), "missing {file}");
    }
    for state in 0..3 {
        let s = dir.join("states").join(state.to_string());
        for file in ["manifest.txt", "memory.dsf", "classifiers.dsc"] {
            assert!(s.join(file).is_file(), "missing states/{state}/{file}");
        }
    }
    let report = fs::read_to_string(dir.join("reports/report.csv")).unwrap();
    assert!(report.starts_with("state,classes,top1,top5,wall_time\n"), "{report}");
    let rows = parse_report(&dir.join("reports/report.csv")).unwrap();
    assert_eq!(rows.iter().map(|r| r.classes).collect::<Vec<_>>(), vec![2, 4, 6]);
    assert!(rows.iter().all(|r| r.top5 >= r.top1 && r.wall_time == 0.0));
    let grid = fs::read_to_string(dir.join("reports/grid.csv")).unwrap();
    assert!(grid.starts_with("c,val_top1\n"));
    let manifest = fs::read_to_string(dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("state_2=states/2"), "{manifest}");
}

#[test]
fn environment_overrides_output_dir_without_changing_run_id() {
    let tmp = tempfile::tempdir().unwrap();
    generate(&tmp.path().join("data"), &[]);
    let config = write_config(tmp.path(), "run.toml", FILE_CONFIG);
    let plain = deesil(&["run", "--config", config.to_str().unwrap()]);
    assert!(plain.status.success());
    let elsewhere = tmp.path().join("elsewhere");
    let moved = Command::new(env!("CARGO_BIN_EXE_deesil"))
        .args(["run", "--config", config.to_str().unwrap()])
        .env("DEESIL_OUTPUT_DIR", &elsewhere)
        .env("DEESIL_WORKERS", "4")
        .output()
        .unwrap();
    assert!(moved.status.success(), "{}", stderr(&moved));
    let (a, b) = (run_dir(&plain), run_dir(&moved));
    assert_eq!(b.parent().unwrap(), elsewhere);
    assert_eq!(a.file_name(), b.file_name());
    assert_eq!(
        fs::read(a.join("reports/report.csv")).unwrap(),
        fs::read(b.join("reports/report.csv")).unwrap()
    );
}

#[test]
fn resuming_reproduces_the_remaining_states() {
    let tmp = tempfile::tempdir().unwrap();
    generate(&tmp.path().join("data"), &[]);
    let config = write_config(tmp.path(), "run.toml", FILE_CONFIG);
    let full = deesil(&["run", "--config", config.to_str().unwrap()]);
    assert!(full.status.success());
    let full_dir = run_dir(&full);

    let second = write_config(tmp.path(), "again.toml", &FILE_CONFIG.replace("\"out\"", "\"resumed\""));
    let checkpoint = full_dir.join("states").join("0");
    let resumed = deesil(&[
        "run",
        "--config",
        second.to_str().unwrap(),
        "--resume-from",
        checkpoint.to_str().unwrap(),
    ]);
    assert!(resumed.status.success(), "{}", stderr(&resumed));
    let resumed_dir = run_dir(&resumed);
    let tail = parse_report(&resumed_dir.join("reports/report.csv")).unwrap();
    let all = parse_report(&full_dir.join("reports/report.csv")).unwrap();
    assert_eq!(tail, all[1..].to_vec());
    for state in ["1", "2"] {
        let file = Path::new("states").join(state).join("classifiers.dsc");
        assert_eq!(fs::read(full_dir.join(&file)).unwrap(), fs::read(resumed_dir.join(&file)).unwrap());
    }
}

#[test]
fn config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    generate(&tmp.path().join("data"), &[]);
    let bad = write_config(tmp.path(), "bad.toml", &FILE_CONFIG.replace("memory_budget = 30", "memory_budget = 0"));
    let out = deesil(&["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("memory_budget"), "{}", stderr(&out));
    assert!(!tmp.path().join("out").exists());

    let zero = deesil(&["gen-synthetic", "--classes", "0", "--dim", "4", "--out", tmp.path().join("z").to_str().unwrap()]);
    assert_eq!(zero.status.code(), Some(1));
}

#[test]
fn missing_data_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "run.toml", FILE_CONFIG);
    let out = deesil(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn select_negatives_writes_a_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    generate(&tmp.path().join("data"), &["--external", "50"]);
    let config = write_config(tmp.path(), "run.toml", FILE_CONFIG);
    let run = deesil(&["run", "--config", config.to_str().unwrap()]);
    let checkpoint = run_dir(&run).join("states").join("1");

    let snapshot = tmp.path().join("neg.dsf");
    let out = deesil(&[
        "select-negatives",
        "--config",
        config.to_str().unwrap(),
        "--checkpoint",
        checkpoint.to_str().unwrap(),
        "--out",
        snapshot.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    // Without a seed override the snapshot equals the checkpointed memory.
    assert_eq!(fs::read(&snapshot).unwrap(), fs::read(checkpoint.join("memory.dsf")).unwrap());

    let ind = write_config(tmp.path(), "ind.toml", &FILE_CONFIG.replace("\"rand\"", "\"ind\""));
    let out = deesil(&[
        "select-negatives",
        "--config",
        ind.to_str().unwrap(),
        "--checkpoint",
        checkpoint.to_str().unwrap(),
        "--out",
        snapshot.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("external"));

    let with_pool = write_config(
        tmp.path(),
        "ind-pool.toml",
        &FILE_CONFIG
            .replace("\"rand\"", "\"ind\"")
            .replace("test = \"data/test.dsf\"", "test = \"data/test.dsf\"\nexternal = \"data/external.dsf\""),
    );
    let out = deesil(&[
        "select-negatives",
        "--config",
        with_pool.to_str().unwrap(),
        "--checkpoint",
        checkpoint.to_str().unwrap(),
        "--out",
        snapshot.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn evaluate_reports_requested_ks_and_rejects_unknown_classes() {
    let tmp = tempfile::tempdir().unwrap();
    generate(&tmp.path().join("data"), &[]);
    let config = write_config(tmp.path(), "run.toml", FILE_CONFIG);
    let run = deesil(&["run", "--config", config.to_str().unwrap()]);
    let dir = run_dir(&run);

    let last = dir.join("states").join("2");
    let test = tmp.path().join("data/test.dsf");
    let out = deesil(&["evaluate", "--checkpoint", last.to_str().unwrap(), "--features", test.to_str().unwrap(), "--k", "1,3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = String::from_utf8(out.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("state,classes,top1,top3"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..2], &["2", "6"]);
    // Same numbers as the run's own report for the final state.
    let report = parse_report(&dir.join("reports/report.csv")).unwrap();
    assert_eq!(row[2].parse::<f64>().unwrap(), report[2].top1);

    let first = dir.join("states").join("0");
    let out = deesil(&["evaluate", "--checkpoint", first.to_str().unwrap(), "--features", test.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("class"), "{}", stderr(&out));
}

#[test]
fn gridsearch_prints_one_row_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    generate(&tmp.path().join("data"), &[]);
    let config = write_config(tmp.path(), "run.toml", FILE_CONFIG);
    let out = deesil(&["gridsearch-c", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "c,val_top1");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0.1,"));
}

#[test]
fn synthetic_config_runs_without_files() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "syn.toml",
        r#"output_dir = "out"

[experiment]
memory_budget = 40
strategy = "ind"
seed = 2
c_grid = [1.0]

[data.synthetic]
classes = 6
dim = 8
train_per_class = 10
validation_per_class = 3
test_per_class = 4
separation = 5.0
external_count = 40

[plan]
batches = [[0, 1, 2], [3], [4, 5]]
"#,
    );
    let out = deesil(&["run", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = parse_report(&run_dir(&out).join("reports/report.csv")).unwrap();
    assert_eq!(rows.iter().map(|r| r.classes).collect::<Vec<_>>(), vec![3, 4, 6]);
}
