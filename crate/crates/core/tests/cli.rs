use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn csa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csa"))
        .args(args)
        .output()
        .unwrap()
}

fn csa_env(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csa"))
        .args(args)
        .env("CSA_THREADS", threads)
        .output()
        .unwrap()
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn approx_b1() {
    let out = csa(&[
        "approx", "--a", "0.25", "--k", "1", "--phi", "0", "--set", "B1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert!((v["distance"].as_f64().unwrap() - 3f64.sqrt() / 2.0).abs() < 1e-4);
    assert!((v["weights"][0].as_f64().unwrap() - 0.75).abs() < 1e-4);
    assert_eq!(v["analytic"]["agrees"], true);
    let helstrom = v["helstrom_probability"].as_f64().unwrap();
    assert!((helstrom - (0.5 + v["distance"].as_f64().unwrap() / 4.0)).abs() < 1e-12);
}

#[test]
fn approx_maximally_mixed_over_b3() {
    let out = csa(&["approx", "--a", "0.5", "--k", "0", "--phi", "0"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(json_of(&out)["distance"].as_f64().unwrap() < 1e-8);
}

#[test]
fn approx_from_files_matches_grid_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("rho.json");
    let set = dir.path().join("set.json");
    std::fs::write(
        &target,
        r#"{"dimension": 2, "matrix": [[[0.7, 0], [0.2, -0.1]], [[0.2, 0.1], [0.3, 0]]]}"#,
    )
    .unwrap();
    std::fs::write(
        &set,
        r#"{"schema": 1, "dimension": 2, "elements": [
            {"label": "up", "bloch": [0, 0, 1]},
            {"label": "tilt", "bloch": [0.6, 0, -0.8]},
            {"label": "mixed", "matrix": [[[0.5, 0], [0, 0]], [[0, 0], [0.5, 0]]]}
        ]}"#,
    )
    .unwrap();
    let out = csa(&[
        "approx",
        "--matrix",
        target.to_str().unwrap(),
        "--set",
        set.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json_of(&out);
    assert_eq!(v["labels"][1], "tilt");
    assert!(v.get("analytic").is_none());

    let rho = convex_approx::state_set::density_from_json_file(&target).unwrap();
    let states = convex_approx::StateSet::from_json_file(&set).unwrap();
    let g = convex_approx::solver::grid_oracle(&rho, &states, 100).unwrap();
    assert!((v["distance"].as_f64().unwrap() - g.distance).abs() < 2e-3);
}

#[test]
fn invalid_input_exits_1() {
    assert_eq!(
        csa(&["approx", "--a", "1.5", "--k", "0", "--phi", "0"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        csa(&["approx", "--a", "0.5", "--k", "0", "--phi", "deg"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(csa(&["approx"]).status.code(), Some(1));
    assert_eq!(csa(&["approx", "--a", "0.5"]).status.code(), Some(1));
    assert_eq!(
        csa(&["approx", "--matrix", "/nonexistent.json"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        csa(&["sweep", "--fix", "k=0.5", "--grid", "1x4"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(csa(&["sweep", "--fix", "q=0.5"]).status.code(), Some(1));
    assert_eq!(csa(&["audit", "--grid", "4"]).status.code(), Some(1));
    assert_eq!(csa(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(csa(&["--help"]).status.code(), Some(0));
}

#[test]
fn non_convergence_exits_2_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let out = csa(&[
        "approx",
        "--a",
        "0.3",
        "--k",
        "0.9",
        "--phi",
        "pi/5",
        "--max-iterations",
        "1",
        "--restarts",
        "0",
        "-o",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(read_json(&path)["converged"], false);
}

#[test]
fn sweep_csv_format() {
    let out = csa(&["sweep", "--fix", "phi=pi/3", "--grid", "3x4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "a,phi,k,D_oracle,D_analytic,case_label,p0,p1,p2,p3,p4,p5,flags"
    );
    assert_eq!(lines.len(), 13);
    for line in &lines[1..] {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 13);
        for (i, c) in cols.iter().enumerate() {
            if i == 5 || i == 12 {
                continue;
            }
            // Nine significant digits in scientific notation.
            let mantissa = c.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.len(), 10, "{c}");
            c.parse::<f64>().unwrap();
        }
        assert!(cols[1].starts_with("1.04719755e0"));
    }
}

#[test]
fn sweep_covers_degenerate_corners() {
    let out = csa(&["sweep", "--fix", "k=2/3", "--grid", "2x2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').take(5).map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][0], 0.0);
    assert_eq!(rows[3][0], 0.5);
    for r in &rows {
        assert!(r[3].is_finite() && r[4].is_finite());
    }
}

#[test]
fn outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |p: &Path| {
        vec![
            "sweep".to_string(),
            "--fix".into(),
            "k=0.6".into(),
            "--grid".into(),
            "6x5".into(),
            "--seed".into(),
            "9".into(),
            "-o".into(),
            p.to_str().unwrap().to_string(),
        ]
    };
    let a_args = args(&a);
    let b_args = args(&b);
    csa_env(&a_args.iter().map(String::as_str).collect::<Vec<_>>(), "1");
    csa_env(&b_args.iter().map(String::as_str).collect::<Vec<_>>(), "3");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let j1 = csa(&[
        "multicopy",
        "--a",
        "0.3",
        "--k",
        "0.5",
        "--phi",
        "1",
        "--set",
        "B1",
    ]);
    let j2 = csa_env(
        &[
            "multicopy",
            "--a",
            "0.3",
            "--k",
            "0.5",
            "--phi",
            "1",
            "--set",
            "B1",
        ],
        "2",
    );
    assert_eq!(j1.stdout, j2.stdout);
}

#[test]
fn audit_reports() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("audit.json");
    let out = csa(&["audit", "--grid", "5", "-o", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("weight_infeasible"));
    let v = read_json(&path);
    assert_eq!(v["schema"], 1);
    let entries = v["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 125);
    for e in entries {
        for key in [
            "a",
            "k",
            "phi",
            "case_label",
            "claimed_distance",
            "achieved_distance",
            "oracle_distance",
            "flags",
        ] {
            assert!(e.get(key).is_some(), "missing {key}");
        }
    }
    assert_eq!(v["summary"]["points"], 125);

    let zero = csa(&[
        "audit",
        "--grid",
        "11",
        "--zero-region-only",
        "-o",
        path.to_str().unwrap(),
    ]);
    assert_eq!(zero.status.code(), Some(0));
    assert_eq!(read_json(&path)["summary"]["flagged_points"], 0);
}

#[test]
fn multicopy_chain() {
    let out = csa(&[
        "multicopy",
        "--a",
        "0.25",
        "--k",
        "1",
        "--phi",
        "0",
        "--set",
        "B1",
        "--copies",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert!((v["d_corr"].as_f64().unwrap() - 1.265).abs() < 2e-3);
    assert!((v["d_fact"].as_f64().unwrap() - 1.272).abs() < 2e-3);
    assert!((v["d_prod"].as_f64().unwrap() - 1.299).abs() < 2e-3);
    assert_eq!(v["copies"], 2);

    let one = json_of(&csa(&[
        "multicopy",
        "--a",
        "0.25",
        "--k",
        "1",
        "--phi",
        "0",
        "--set",
        "B1",
        "--copies",
        "1",
    ]));
    let d = one["d_corr"].as_f64().unwrap();
    assert!((one["d_fact"].as_f64().unwrap() - d).abs() < 1e-9);
    assert!((one["d_prod"].as_f64().unwrap() - d).abs() < 1e-9);

    let diag = json_of(&csa(&[
        "multicopy",
        "--a",
        "0.4",
        "--k",
        "0",
        "--phi",
        "0",
        "--set",
        "B1",
    ]));
    for key in ["d_corr", "d_fact", "d_prod"] {
        assert!(diag[key].as_f64().unwrap() < 1e-8);
    }

    assert_eq!(
        csa(&[
            "multicopy",
            "--a",
            "0.25",
            "--k",
            "1",
            "--phi",
            "0",
            "--set",
            "B3",
            "--copies",
            "5"
        ])
        .status
        .code(),
        Some(1)
    );
}
