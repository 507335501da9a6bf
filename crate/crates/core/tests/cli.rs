use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gp_core::datasets::keijzer12;
use gp_core::experiment::ExperimentConfig;

fn gp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gp"))
        .args(args)
        .output()
        .expect("spawn gp")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const TINY: &str = r#"{
  "name": "tiny",
  "individual_class": "RegressorLS",
  "lowlevel": ["ADD", "SUB", "MUL", "DIV", "MAX", "MIN", "MEAN", "RELU", "X2", "SQRT"],
  "ind_params": {"input_vector_size": 2, "complexity": 6},
  "operations": ["mutation", "protected_crossover", "numeric_mutation"],
  "operations_prob": [0.4, 0.4, 0.2],
  "operations_arity": [1, 2, 1],
  "pop_size": 30,
  "generations": 4,
  "pop_dynamics": "Steady_State",
  "online": true,
  "batch_size": 20,
  "minimization": true,
  "n_jobs": 2,
  "seed": 5,
  "repetitions": 2,
  "dataset": {"kind": "keijzer12", "n_train": 80, "n_test": 40}
}"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn strip_elapsed(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

fn run_tiny(dir: &Path, out: &str, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = write_config(dir, "tiny.json", TINY);
    let out_dir = dir.join(out);
    let mut args = vec![
        "run",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    (gp(&args), out_dir)
}

#[test]
fn run_writes_logs_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (out, out_dir) = run_tiny(dir.path(), "o", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("tiny: 2 run(s)"));
    for f in [
        "run_0.csv",
        "run_1.csv",
        "run_0_best.txt",
        "run_1_best.txt",
        "aggregate.csv",
    ] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let log = fs::read_to_string(out_dir.join("run_0.csv")).unwrap();
    let mut lines = log.lines();
    assert_eq!(
        lines.next(),
        Some("generation,best_train,best_test,mean_fitness,evaluations,elapsed_s")
    );
    assert_eq!(lines.count(), 5);
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(summary
        .starts_with("setup,rep,metric,final_train,final_test,evaluations,elapsed_s\ntiny,0,mse,"));
    let best = fs::read_to_string(out_dir.join("run_0_best.txt")).unwrap();
    assert!(gp_core::Tree::parse(best.trim(), None).is_ok());
}

#[test]
fn runs_are_reproducible_across_jobs_and_parallel_reps() {
    let dir = tempfile::tempdir().unwrap();
    let (a, da) = run_tiny(dir.path(), "a", &["--jobs", "1"]);
    let (b, db) = run_tiny(dir.path(), "b", &["--jobs", "1"]);
    let (c, dc) = run_tiny(dir.path(), "c", &["--jobs", "8", "--parallel-reps"]);
    for o in [&a, &b, &c] {
        assert_eq!(code(o), 0, "{}", stderr(o));
    }
    for f in ["summary.csv", "run_0.csv", "run_1.csv"] {
        let read = |d: &PathBuf| strip_elapsed(&fs::read_to_string(d.join(f)).unwrap());
        assert_eq!(read(&da), read(&db), "{f}");
        assert_eq!(read(&da), read(&dc), "{f}");
    }
    for f in ["run_0_best.txt", "run_1_best.txt"] {
        let read = |d: &PathBuf| fs::read_to_string(d.join(f)).unwrap();
        assert_eq!(read(&da), read(&dc));
    }
    let (d, dd) = run_tiny(dir.path(), "d", &["--seed", "6"]);
    assert_eq!(code(&d), 0);
    let read = |d: &PathBuf| strip_elapsed(&fs::read_to_string(d.join("run_0.csv")).unwrap());
    assert_ne!(read(&da), read(&dd));
}

#[test]
fn zero_generations_logs_only_the_initial_population() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "zero.json",
        &TINY.replace("\"generations\": 4", "\"generations\": 0"),
    );
    let out_dir = dir.path().join("o");
    let out = gp(&[
        "run",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--reps",
        "1",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let log = fs::read_to_string(out_dir.join("run_0.csv")).unwrap();
    assert_eq!(log.lines().count(), 2);
    assert!(log.lines().nth(1).unwrap().starts_with("0,"));
    assert!(!out_dir.join("run_1.csv").exists());
}

#[test]
fn invalid_configs_exit_with_field_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    let cases = [
        (TINY.replace("pop_size", "pop_sise"), "pop_sise"),
        (
            TINY.replace("[0.4, 0.4, 0.2]", "[0.4, 0.4, 0.4]"),
            "probabilities",
        ),
        (TINY.replace("\"SQRT\"", "\"SINE\""), "SINE"),
        (TINY.replace("Steady_State", "Generational"), "pop_dynamics"),
        (TINY.replace("\"online\": true", "\"online\": 3"), "online"),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("bad{i}.json"), text);
        let out = gp(&[
            "run",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 1, "case {i}: {}", stderr(&out));
        assert!(stderr(&out).contains(needle), "case {i}: {}", stderr(&out));
    }
    let out = gp(&[
        "run",
        "/nonexistent/config.json",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = write_config(dir.path(), "tiny.json", TINY);
    let out = gp(&[
        "run",
        cfg.to_str().unwrap(),
        "--out",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(code(&gp(&["frobnicate"])), 1);
    assert_eq!(code(&gp(&["run", "x.json"])), 1);
    assert_eq!(
        code(&gp(&["run", "x.json", "--out", "o", "--jobs", "many"])),
        1
    );
    let help = gp(&["--help"]);
    assert_eq!(code(&help), 0);
    assert!(stdout(&help).contains("compare"));
}

#[test]
fn compare_reports_paired_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let (a, da) = run_tiny(dir.path(), "a", &[]);
    assert_eq!(code(&a), 0);
    let s = da.join("summary.csv");
    let out = gp(&["compare", s.to_str().unwrap(), s.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("rep,test_a,test_b,error_delta,elapsed_a,elapsed_b,runtime_ratio"));
    assert!(text.contains("median error_delta (a - b): 0"));
    assert!(text.contains("wins a: 0, wins b: 0, ties: 2"));
    assert!(text.contains("sign test p-value: 1.000000"));

    let (b, db) = run_tiny(dir.path(), "b", &["--reps", "3"]);
    assert_eq!(code(&b), 0);
    let t = db.join("summary.csv");
    let out = gp(&["compare", s.to_str().unwrap(), t.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("repetition counts differ"));

    let out = gp(&[
        "compare",
        s.to_str().unwrap(),
        da.join("run_0.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn eval_scores_a_serialized_tree() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("x0,x1,y\n");
    let mut expected = 0.0;
    let n = 50;
    for i in 0..n {
        let (x, y) = (i as f64 * 0.1 - 2.5, 1.5 - i as f64 * 0.05);
        let t = keijzer12(x, y);
        expected += (x * y - t).powi(2) / n as f64;
        csv.push_str(&format!("{x},{y},{t}\n"));
    }
    let data = dir.path().join("k.csv");
    fs::write(&data, csv).unwrap();
    let trees = dir.path().join("trees.txt");
    fs::write(&trees, "(MUL x0 x1)\n\n(ADD x0 1.0)\n").unwrap();
    let out = gp(&["eval", trees.to_str().unwrap(), data.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("line,size,depth,mse"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&first[..3], &["1", "3", "1"]);
    let mse: f64 = first[3].parse().unwrap();
    assert!(
        (mse - expected).abs() <= 1e-12 * expected.max(1.0),
        "{mse} vs {expected}"
    );
    assert!(lines.next().unwrap().starts_with("3,3,1,"));

    fs::write(&trees, "(MUL x0\n").unwrap();
    assert_eq!(
        code(&gp(&[
            "eval",
            trees.to_str().unwrap(),
            data.to_str().unwrap()
        ])),
        1
    );
    fs::write(&trees, "(MUL x0 x7)\n").unwrap();
    assert_eq!(
        code(&gp(&[
            "eval",
            trees.to_str().unwrap(),
            data.to_str().unwrap()
        ])),
        1
    );
    fs::write(&trees, "x0\n").unwrap();
    let out = gp(&[
        "eval",
        trees.to_str().unwrap(),
        data.to_str().unwrap(),
        "--label",
        "z",
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains('z'));
}

#[test]
fn bundled_configs_load_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let cfg = ExperimentConfig::load(&path).unwrap();
            cfg.run_config().unwrap();
            let expected_reps = if cfg.name.ends_with("_desk") { 10 } else { 30 };
            assert_eq!(cfg.repetitions, expected_reps, "{}", cfg.name);
            n += 1;
        }
    }
    assert_eq!(n, 12);
    let cfg = ExperimentConfig::load(dir.join("classification_online_desk.json")).unwrap();
    let data = cfg.dataset(&dir).unwrap();
    assert_eq!(data.train_indices().len(), 1200);
    assert_eq!(data.test_indices().len(), 172);
}
