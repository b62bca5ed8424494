//! End-to-end runs of the `grassframe` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn grassframe(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grassframe"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

const MERCEDES: &str = r#"{"d":2,"C":3,"columns":[[1.0,0.0],[-0.5,0.8660254037844386],[-0.5,-0.8660254037844387]],"normalized":true,"meta":{}}"#;
const CROSS: &str =
    r#"{"d":2,"C":4,"columns":[[1,0],[0,1],[-1,0],[0,-1]],"normalized":true,"meta":{}}"#;
const ANTIPODAL: &str = r#"{"d":2,"C":2,"columns":[[1,0],[-1,0]],"normalized":true,"meta":{}}"#;
const WORKED_PARAMS: &str = r#"{"C":2,"p":[0.5,0.5],"N":[10,10],"rademacher":[0.1,0.1],"K":4,"delta":0.5,"gamma":[[0,1],[1,0]],"empirical":0}"#;

fn ring(cx: f64, cy: f64, r: f64) -> Vec<[f64; 2]> {
    (0..12)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / 12.0;
            [cx + r * t.cos(), cy + r * t.sin()]
        })
        .collect()
}

fn supports_json(rings: &[Vec<[f64; 2]>]) -> String {
    serde_json::json!({ "supports": rings }).to_string()
}

fn engineered_frame() -> String {
    let cols: Vec<[f64; 2]> = [0.0f64, 60.0, 180.0]
        .iter()
        .map(|a| [a.to_radians().cos(), a.to_radians().sin()])
        .collect();
    serde_json::json!({"d": 2, "C": 3, "columns": cols, "normalized": true, "meta": {}}).to_string()
}

#[test]
fn gen_reaches_expected_correlations() {
    let tmp = TempDir::new().unwrap();
    for (c, target) in [("4", 0.0), ("3", -0.5)] {
        let out = grassframe(
            &[
                "gen", "--d", "2", "--C", c, "--seed", "7", "--out", "f.json",
            ],
            tmp.path(),
        );
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let corr: f64 = stdout(&out).trim().parse().unwrap();
        assert!((corr - target).abs() <= 0.02, "C={c}: {corr}");
        assert!(tmp.path().join("manifest.json").exists());
    }
}

#[test]
fn check_reports_frame_properties() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "mercedes.json", MERCEDES);
    write(tmp.path(), "cross.json", CROSS);
    let report: Value = serde_json::from_str(&stdout(&grassframe(
        &["check", "mercedes.json"],
        tmp.path(),
    )))
    .unwrap();
    assert_eq!(report["is_equiangular"], true);
    assert!(report["welch_gap"].as_f64().unwrap().abs() < 1e-9);
    let report: Value =
        serde_json::from_str(&stdout(&grassframe(&["check", "cross.json"], tmp.path()))).unwrap();
    assert_eq!(report["is_equiangular"], false);
    assert!(report["welch_bound"].is_null());
}

fn gram(frame: &Value) -> Vec<Vec<f64>> {
    let cols: Vec<Vec<f64>> = serde_json::from_value(frame["columns"].clone()).unwrap();
    cols.iter()
        .map(|a| {
            cols.iter()
                .map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum())
                .collect()
        })
        .collect()
}

#[test]
fn transform_preserves_the_expected_structure() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "m.json", MERCEDES);
    let base: Value = serde_json::from_str(MERCEDES).unwrap();

    assert_eq!(
        code(&grassframe(
            &[
                "transform",
                "m.json",
                "--rotate-seed",
                "3",
                "--out",
                "r.json"
            ],
            tmp.path()
        )),
        0
    );
    let rotated: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("r.json")).unwrap()).unwrap();
    for (a, b) in gram(&base)
        .iter()
        .flatten()
        .zip(gram(&rotated).iter().flatten())
    {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(rotated["meta"]["rotate_seed"], "3");

    assert_eq!(
        code(&grassframe(
            &[
                "transform",
                "m.json",
                "--permute-seed",
                "4",
                "--out",
                "p.json"
            ],
            tmp.path()
        )),
        0
    );
    let permuted: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("p.json")).unwrap()).unwrap();
    let sorted = |v: &Value| {
        let mut cols: Vec<Vec<f64>> = serde_json::from_value(v["columns"].clone()).unwrap();
        cols.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cols
    };
    assert_eq!(sorted(&base), sorted(&permuted));

    let both = [
        "transform",
        "m.json",
        "--rotate-seed",
        "3",
        "--permute-seed",
        "4",
        "--out",
    ];
    let a = grassframe(&[&both[..], &["a/x.json"]].concat(), tmp.path());
    let b = grassframe(&[&both[..], &["b/x.json"]].concat(), tmp.path());
    assert_eq!((code(&a), code(&b)), (0, 0));
    assert_eq!(
        fs::read(tmp.path().join("a/x.json")).unwrap(),
        fs::read(tmp.path().join("b/x.json")).unwrap()
    );
}

#[test]
fn simulate_emits_csv_report_and_snapshots() {
    let tmp = TempDir::new().unwrap();
    let out = grassframe(
        &[
            "simulate",
            "--d",
            "2",
            "--C",
            "3",
            "--n-per-class",
            "4",
            "--iters",
            "3000",
            "--snapshots",
            "4",
            "--seed",
            "1",
            "--out-dir",
            "run",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("run");
    let csv = fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    assert!(csv
        .starts_with("iter,ce_loss,ufm_loss,nc1,nc2,nc3_signed_maxcorr,nc4_agreement,max_norm\n"));
    for iter in [0, 1000, 2000, 3000] {
        let svg = fs::read_to_string(dir.join(format!("snap_{iter}.svg"))).unwrap();
        assert!(svg.contains(r#"viewBox="0 0 800 800""#));
        assert_eq!(svg.matches("<circle").count(), 12);
    }
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert!(report["nc4_agreement"].as_f64().is_some());

    let out = grassframe(
        &[
            "simulate",
            "--d",
            "2",
            "--C",
            "3",
            "--n-per-class",
            "2",
            "--iters",
            "100",
            "--snapshots",
            "0",
            "--seed",
            "1",
            "--out-dir",
            "csv_only",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 0);
    let mut names: Vec<String> = fs::read_dir(tmp.path().join("csv_only"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["manifest.json", "report.json", "trajectory.csv"]);

    let out = grassframe(
        &[
            "simulate",
            "--d",
            "3",
            "--C",
            "4",
            "--n-per-class",
            "2",
            "--iters",
            "100",
            "--seed",
            "1",
            "--out-dir",
            "three",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("snapshots need d = 2"));
    assert!(fs::read_dir(tmp.path().join("three")).unwrap().all(|e| !e
        .unwrap()
        .file_name()
        .to_string_lossy()
        .ends_with(".svg")));
}

#[test]
fn channel_outputs() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "bin.json", ANTIPODAL);
    let out = grassframe(
        &[
            "channel", "bin.json", "--sigma", "0.5", "--trials", "200000", "--seed", "1",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 0);
    let result: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let rate = result["error_rate"].as_f64().unwrap();
    let ci = result["ci95_halfwidth"].as_f64().unwrap();
    // Q(2)
    assert!((rate - 0.022_750_131_948_179).abs() <= 3.0 * ci / 1.96);

    let out = grassframe(
        &[
            "channel",
            "bin.json",
            "--sweep",
            "1.0,0.8,0.6",
            "--trials",
            "20000",
            "--seed",
            "1",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(
        lines[0],
        "sigma,error_rate,ci95,exponent_estimate,exponent_target"
    );
}

#[test]
fn bounds_outputs() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "params.json", WORKED_PARAMS);
    let out = grassframe(&["bounds", "--params", "params.json"], tmp.path());
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let total = report["margin_bound"]["total"].as_f64().unwrap();
    assert!((total - 0.7356).abs() < 1e-4);

    write(tmp.path(), "frame.json", &engineered_frame());
    write(
        tmp.path(),
        "same.json",
        &supports_json(&vec![ring(0.0, 0.0, 0.3); 3]),
    );
    write(
        tmp.path(),
        "unequal.json",
        &supports_json(&[
            ring(0.0, 0.0, 0.01),
            ring(3.0, 0.0, 0.3),
            ring(0.0, 3.0, 0.3),
        ]),
    );
    let sweep = |supports: &str| {
        let out = grassframe(
            &[
                "bounds",
                "--supports",
                supports,
                "--frame",
                "frame.json",
                "--n-total",
                "36",
                "--permutations",
                "10",
                "--seed",
                "3",
            ],
            tmp.path(),
        );
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
        assert_eq!(
            v["permutation_sweep"]["bounds"].as_array().unwrap().len(),
            10
        );
        v["permutation_sweep"]["range"].as_f64().unwrap()
    };
    assert_eq!(sweep("same.json"), 0.0);
    assert!(sweep("unequal.json") > 0.0);
}

#[test]
fn exit_code_matrix() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "m.json", MERCEDES);
    write(tmp.path(), "truncated.json", &MERCEDES[..40]);
    write(
        tmp.path(),
        "extra.json",
        &MERCEDES.replace(r#""meta":{}"#, r#""meta":{},"bogus":1"#),
    );
    write(tmp.path(), "params.json", WORKED_PARAMS);
    write(
        tmp.path(),
        "far.json",
        &WORKED_PARAMS.replace("[[0,1],[1,0]]", "[[0,1],[8.5,0]]"),
    );
    write(
        tmp.path(),
        "blocker",
        "a file where a directory is expected",
    );

    let cases: &[(&[&str], i32)] = &[
        (&["check", "m.json"], 0),
        (&["--help"], 0),
        (&[], 2),
        (&["frobnicate"], 2),
        (&["gen", "--d", "2", "--C", "4", "--seed", "7"], 2),
        (&["gen", "--d", "2", "--C", "4", "--out", "x.json"], 2),
        (
            &[
                "gen", "--d", "1", "--C", "4", "--seed", "7", "--out", "x.json",
            ],
            2,
        ),
        (
            &[
                "gen", "--d", "2", "--C", "4", "--seed", "7", "--alpha", "1e6", "--out", "x.json",
            ],
            3,
        ),
        (
            &[
                "gen",
                "--d",
                "2",
                "--C",
                "4",
                "--seed",
                "7",
                "--iters",
                "10",
                "--out",
                "blocker/x.json",
            ],
            3,
        ),
        (&["check", "truncated.json"], 2),
        (&["check", "extra.json"], 2),
        (&["check", "missing.json"], 2),
        (&["transform", "m.json", "--out", "t.json"], 2),
        (
            &[
                "transform",
                "truncated.json",
                "--rotate-seed",
                "1",
                "--out",
                "t.json",
            ],
            2,
        ),
        (
            &[
                "channel", "m.json", "--sigma", "0", "--trials", "10", "--seed", "1",
            ],
            2,
        ),
        (
            &["channel", "m.json", "--sigma", "0.5", "--trials", "10"],
            2,
        ),
        (
            &[
                "channel", "m.json", "--sweep", "0.5,0.8", "--trials", "10", "--seed", "1",
            ],
            2,
        ),
        (
            &[
                "channel",
                "m.json",
                "--sigma",
                "0.5",
                "--trials",
                "10",
                "--seed",
                "1",
                "--out-dir",
                "blocker/c",
            ],
            3,
        ),
        (
            &[
                "simulate",
                "--d",
                "2",
                "--C",
                "4",
                "--seed",
                "1",
                "--iters",
                "10",
                "--out-dir",
                "blocker/s",
            ],
            3,
        ),
        (
            &[
                "simulate",
                "--d",
                "2",
                "--C",
                "4",
                "--iters",
                "10",
                "--out-dir",
                "s",
            ],
            2,
        ),
        (&["bounds", "--params", "params.json"], 0),
        (&["bounds", "--params", "far.json"], 2),
        (&["bounds"], 2),
        (&["bounds", "--supports", "params.json"], 2),
        (&["replay", "missing/manifest.json"], 2),
    ];
    for (args, expected) in cases {
        let out = grassframe(args, tmp.path());
        assert_eq!(
            code(&out),
            *expected,
            "args {args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let far = grassframe(&["bounds", "--params", "far.json"], tmp.path());
    assert!(String::from_utf8_lossy(&far.stderr).contains("gamma[1][0]"));
}

fn outputs_of(manifest: &Path) -> Vec<String> {
    let m: Value = serde_json::from_str(&fs::read_to_string(manifest).unwrap()).unwrap();
    serde_json::from_value(m["outputs"].clone()).unwrap()
}

fn assert_replays(tmp: &Path, dir: &str) {
    let manifest = tmp.join(dir).join("manifest.json");
    let replay_dir = tmp.join(format!("{dir}_replay"));
    let out = grassframe(
        &[
            "replay",
            manifest.to_str().unwrap(),
            "--out-dir",
            replay_dir.to_str().unwrap(),
        ],
        tmp,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let outputs = outputs_of(&manifest);
    assert!(!outputs.is_empty());
    assert_eq!(outputs, outputs_of(&replay_dir.join("manifest.json")));
    for name in outputs {
        assert_eq!(
            fs::read(tmp.join(dir).join(&name)).unwrap(),
            fs::read(replay_dir.join(&name)).unwrap(),
            "{dir}/{name} differs on replay"
        );
    }
}

#[test]
fn manifests_replay_bitwise() {
    let tmp = TempDir::new().unwrap();
    let t = tmp.path();
    write(t, "m.json", MERCEDES);
    write(t, "params.json", WORKED_PARAMS);
    write(t, "frame.json", &engineered_frame());
    write(
        t,
        "sup.json",
        &supports_json(&[
            ring(0.0, 0.0, 0.01),
            ring(3.0, 0.0, 0.3),
            ring(0.0, 3.0, 0.3),
        ]),
    );
    let runs: &[&[&str]] = &[
        &[
            "gen",
            "--d",
            "3",
            "--C",
            "5",
            "--seed",
            "2",
            "--out",
            "gen/frame.json",
        ],
        &[
            "transform",
            "m.json",
            "--rotate-seed",
            "5",
            "--permute-seed",
            "6",
            "--out",
            "tr/frame.json",
        ],
        &[
            "simulate",
            "--d",
            "2",
            "--C",
            "3",
            "--n-per-class",
            "3",
            "--iters",
            "500",
            "--snapshots",
            "3",
            "--seed",
            "4",
            "--out-dir",
            "sim",
        ],
        &[
            "channel",
            "m.json",
            "--sigma",
            "0.6",
            "--trials",
            "5000",
            "--seed",
            "9",
            "--out-dir",
            "ch",
        ],
        &[
            "channel",
            "m.json",
            "--sweep",
            "1.0,0.7",
            "--trials",
            "5000",
            "--seed",
            "9",
            "--out-dir",
            "sw",
        ],
        &[
            "bounds",
            "--params",
            "params.json",
            "--supports",
            "sup.json",
            "--frame",
            "frame.json",
            "--n-total",
            "36",
            "--permutations",
            "4",
            "--seed",
            "1",
            "--out-dir",
            "bd",
        ],
    ];
    for args in runs {
        let out = grassframe(args, t);
        assert_eq!(
            code(&out),
            0,
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for dir in ["gen", "tr", "sim", "ch", "sw", "bd"] {
        let manifests = fs::read_dir(t.join(dir))
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name() == "manifest.json")
            .count();
        assert_eq!(manifests, 1);
        assert_replays(t, dir);
    }
}
