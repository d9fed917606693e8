use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_modecollapse"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const Q1_PAIR: &str = r#"{"p": {"segments": [{"lo": 0, "hi": 1, "mass": 1}]},
                         "q": {"segments": [{"lo": 0.2, "hi": 1, "mass": 1}]}}"#;

#[test]
fn region_job_matches_toy_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let pair = write(dir.path(), "pair.json", Q1_PAIR);
    let o = run(&["region", "-i", pair.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "epsilon,delta\n0,0\n0,0.2\n1,1\n");
}

#[test]
fn pack_sweep_rows_follow_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let pair = write(dir.path(), "pair.json", Q1_PAIR);
    let out = dir.path().join("sweep.csv");
    let o = run(&[
        "pack-sweep",
        "-i",
        pair.to_str().unwrap(),
        "--m",
        "6",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(out).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    for (i, row) in rows.iter().enumerate() {
        let dtv: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!((dtv - (1.0 - 0.8f64.powi(i as i32 + 1))).abs() < 1e-9);
    }
}

#[test]
fn two_file_csv_pair() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.csv", "label,prob\na,0.5\nb,0.5\n");
    let q = write(dir.path(), "q.csv", "a,0.9\nb,0.1\n");
    let o = run(&["dtv", "-i", p.to_str().unwrap(), q.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["dtv"].as_f64().unwrap() - 0.4).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"p": {"atoms": [{"label": "a", "prob": 0.7}]}, "q": {"atoms": [{"label": "a", "prob": 1}]}}"#,
    );
    assert_eq!(
        run(&["region", "-i", bad.to_str().unwrap()]).status.code(),
        Some(1)
    );
    assert_eq!(
        run(&["region", "-i", "/nonexistent/x.json"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["bounds", "--tau", "1.5"]).status.code(), Some(1));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));

    let garbled = write(
        dir.path(),
        "bc.json",
        r#"{"b": [[0.5, 0.5], [0.5, 0.5]], "c": [[1, 0], [0, 1]]}"#,
    );
    let o = run(&[
        "blackwell",
        "-i",
        garbled.to_str().unwrap(),
        "--trials",
        "10",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("NotMoreInformative"));
    let ok = write(
        dir.path(),
        "ok.json",
        r#"{"b": [[1, 0], [0, 1]], "c": [[0.5, 0.5], [0.2, 0.8]]}"#,
    );
    let o = run(&["blackwell", "-i", ok.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("\"MoreInformative\""));
}

#[test]
fn veegan_check_reports_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"z_atoms": [{"label": "a", "embedding": [0]}, {"label": "b", "embedding": [1]}],
            "p0": [0.5, 0.5], "x_atoms": ["u", "v"], "p_x": [0.5, 0.5],
            "gen_cond": [[1, 0], [0, 1]], "rec_cond": [[1, 0], [0, 1]]}"#,
    );
    let o = run(&["veegan-check", "-i", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["optimum"]["matched"], true);
    assert!((v["bound"]["rhs"].as_f64().unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn kl_eval_formats() {
    let dir = tempfile::tempdir().unwrap();
    let reference = write(dir.path(), "mnist.json", r#"{"0": 10, "1": 10}"#);
    let gen = write(dir.path(), "gen.csv", "0,5\n1,5\n");
    let r = reference.to_str().unwrap();
    let g = format!("dcgan={}", gen.to_str().unwrap());
    let table = run(&["kl-eval", "--reference", r, "-i", &g]);
    assert!(table.status.success());
    assert!(stdout(&table).contains("dcgan"));
    let out = dir.path().join("r.json");
    assert!(run(&[
        "kl-eval",
        "--reference",
        r,
        "-i",
        &g,
        "--out",
        out.to_str().unwrap()
    ])
    .status
    .success());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["rows"][0]["kl"], 0.0);
    let neg = write(dir.path(), "neg.csv", "0,5\n1,-5\n");
    let o = run(&["kl-eval", "--reference", r, "-i", neg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":2: negative count"));
}

#[test]
fn sample_is_seeded_and_execution_independent() {
    let dir = tempfile::tempdir().unwrap();
    let d = write(
        dir.path(),
        "u.json",
        r#"{"segments": [{"lo": 0, "hi": 1, "mass": 1}]}"#,
    );
    let d = d.to_str().unwrap();
    let args = [
        "sample",
        "-i",
        d,
        "--n",
        "100000",
        "--bins",
        "0,0.2,0.5,1",
        "--seed",
        "42",
    ];
    let a = run(&args);
    let mut seq = args.to_vec();
    seq.push("--sequential");
    let b = run(&seq);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let other = run(&[
        "sample",
        "-i",
        d,
        "--n",
        "100000",
        "--bins",
        "0,0.2,0.5,1",
        "--seed",
        "43",
    ]);
    assert_ne!(a.stdout, other.stdout);
    assert_eq!(
        run(&["sample", "-i", d, "--n", "10", "--bins", "0.1,1"])
            .status
            .code(),
        Some(1)
    );
}
