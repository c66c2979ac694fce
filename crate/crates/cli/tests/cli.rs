use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mvrbm::ModelParams;

const SCHEMA: &str = "smoker binary\ncolour categorical red,green,blue\nhobbies multicat music,sport,games\n\
                      income continuous\nmood ordinal low,mid,high\nprefs rank tea,coffee,juice\n";

fn mvrbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvrbm")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = mvrbm(args);
    assert!(out.status.success(), "mvrbm {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr));
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    /// A schema file plus 200 synthetic rows with a few missing cells.
    fn new() -> Self {
        let f = Fixture { dir: tempfile::tempdir().unwrap() };
        fs::write(f.path("schema.txt"), SCHEMA).unwrap();
        ok(&[
            "synth",
            "--schema",
            &f.arg("schema.txt"),
            "--hidden",
            "3",
            "--n",
            "200",
            "--rho",
            "0.05",
            "--seed",
            "1",
            "--out",
            &f.arg("data.csv"),
        ]);
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }

    fn data_args(&self) -> Vec<String> {
        vec!["--schema".into(), self.arg("schema.txt"), "--data".into(), self.arg("data.csv")]
    }

    fn run(&self, command: &str, extra: &[&str]) -> Output {
        let mut args: Vec<String> = vec![command.into()];
        args.extend(self.data_args());
        args.extend(extra.iter().map(|s| s.to_string()));
        mvrbm(&args.iter().map(String::as_str).collect::<Vec<_>>())
    }

    fn run_ok(&self, command: &str, extra: &[&str]) {
        let out = self.run(command, extra);
        assert!(out.status.success(), "{command}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap()
}

#[test]
fn saved_model_loads_back_unchanged() {
    let f = Fixture::new();
    f.run_ok("train", &["--hidden", "4", "--epochs", "2", "--model", &f.arg("m.json")]);
    f.run_ok("complete", &["--model-in", &f.arg("m.json"), "--model-out", &f.arg("copy.json"), "--report", &f.arg("r.csv")]);
    let a = ModelParams::from_json(&read(&f.path("m.json"))).unwrap();
    let b = ModelParams::from_json(&read(&f.path("copy.json"))).unwrap();
    assert_eq!(a, b);
    assert_eq!(read(&f.path("m.json")), read(&f.path("copy.json")));
}

#[test]
fn same_seed_gives_identical_model_files() {
    let f = Fixture::new();
    for name in ["a.json", "b.json"] {
        f.run_ok("train", &["--hidden", "3", "--epochs", "2", "--seed", "8", "--model", &f.arg(name)]);
    }
    assert_eq!(fs::read(f.path("a.json")).unwrap(), fs::read(f.path("b.json")).unwrap());
}

#[test]
fn hybrid_without_target_is_a_configuration_error() {
    let f = Fixture::new();
    let out = f.run("train", &["--objective", "hybrid", "--model", &f.arg("m.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!f.path("m.json").exists());
}

#[test]
fn unknown_target_is_a_configuration_error() {
    let f = Fixture::new();
    let out = f.run("predict", &["--target", "shoe_size", "--report", &f.arg("r.csv")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("shoe_size"));
    assert!(!f.path("r.csv").exists());
}

#[test]
fn nothing_masked_reports_no_rates() {
    let f = Fixture::new();
    f.run_ok("complete", &["--rho", "0", "--epochs", "1", "--report", &f.arg("r.csv")]);
    let text = read(&f.path("r.csv"));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("metric,model,n"));
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(&cells[1..], ["NA", "0"], "{line}");
    }
}

#[test]
fn features_have_one_column_per_hidden_unit() {
    let f = Fixture::new();
    f.run_ok("train", &["--hidden", "50", "--epochs", "1", "--model", &f.arg("m.json")]);
    f.run_ok("features", &["--model", &f.arg("m.json"), "--out", &f.arg("feat.csv")]);
    let text = read(&f.path("feat.csv"));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 201);
    assert_eq!(lines[0].split(',').count(), 50);
    assert_eq!(lines[0].split(',').next(), Some("h1"));
    for line in &lines[1..] {
        let xs: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(xs.len(), 50);
        assert!(xs.iter().all(|x| (0.0..=1.0).contains(x)));
    }
}

#[test]
fn baseline_column_is_reported_alongside_the_model() {
    let f = Fixture::new();
    f.run_ok("predict", &["--target", "colour", "--epochs", "2", "--baseline", "--report", &f.arg("r.csv"), "--out", &f.arg("p.csv")]);
    let report = read(&f.path("r.csv"));
    assert!(report.starts_with("metric,baseline,model,n\n"));
    let row = report.lines().find(|l| l.starts_with("categorical,")).unwrap();
    assert_eq!(row.split(',').nth(3), Some("40"));
    let preds = read(&f.path("p.csv"));
    assert!(preds.starts_with("row,colour\n"));
    assert_eq!(preds.lines().count(), 41);
}

/// Report row for `kind` after predicting `target` on 60 rows holding
/// `b = y` and `level = <level>` everywhere.
fn constant_target_row(target: &str, level: &str, kind: &str) -> String {
    let dir = tempfile::tempdir().unwrap();
    let schema = dir.path().join("schema.txt");
    let data = dir.path().join("data.csv");
    fs::write(&schema, "a binary\nb categorical x,y,z\nlevel ordinal low,mid,high\n").unwrap();
    let mut text = String::from("a,b,level\n");
    for r in 0..60 {
        text.push_str(&format!("{},y,{level}\n", r % 2));
    }
    fs::write(&data, text).unwrap();
    let report = dir.path().join("r.csv");
    let p = |x: &Path| x.to_str().unwrap().to_string();
    ok(&[
        "predict",
        "--schema",
        &p(&schema),
        "--data",
        &p(&data),
        "--target",
        target,
        "--hidden",
        "3",
        "--epochs",
        "3",
        "--baseline",
        "--report",
        &p(&report),
    ]);
    read(&report).lines().find(|l| l.starts_with(kind)).unwrap().to_string()
}

#[test]
fn constant_target_is_predicted_without_error() {
    assert_eq!(constant_target_row("b", "high", "categorical,"), "categorical,0,0,12");
    assert_eq!(constant_target_row("level", "high", "ordinal,"), "ordinal,0,0,12");
}

#[test]
fn interior_ordinal_level_is_never_the_model_mode() {
    // The ordinal score is linear in the level, so every conditional (and
    // any mixture of them) peaks at an end level; the baseline does not
    // share this limit.
    assert_eq!(constant_target_row("level", "mid", "ordinal,"), "ordinal,0,0.5,12");
}

#[test]
fn input_files_are_left_untouched() {
    let f = Fixture::new();
    let before = (read(&f.path("schema.txt")), read(&f.path("data.csv")));
    f.run_ok("train", &["--hidden", "3", "--epochs", "1", "--model", &f.arg("m.json")]);
    f.run_ok("complete", &["--epochs", "1", "--report", &f.arg("c.csv"), "--out", &f.arg("filled.csv")]);
    f.run_ok("reconstruct", &["--model", &f.arg("m.json"), "--report", &f.arg("r.csv")]);
    assert_eq!(before, (read(&f.path("schema.txt")), read(&f.path("data.csv"))));
}
