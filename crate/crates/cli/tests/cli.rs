//! End-to-end checks of the `lisnoma` binary.

use lisnoma::pdf::CltParams;
use lisnoma::SystemConfig;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lisnoma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lisnoma"))
        .args(args)
        .env_remove("LISNOMA_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = lisnoma(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Data rows of a CSV with `#` comments and a header line.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

#[test]
fn reference_scenario_file_matches_builtin() {
    let text = std::fs::read_to_string(scenario_path("reference.json")).unwrap();
    let cfg: SystemConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(cfg, SystemConfig::reference(3));
    let text = std::fs::read_to_string(scenario_path("three_users_qpsk.json")).unwrap();
    let cfg: SystemConfig = serde_json::from_str(&text).unwrap();
    cfg.validate().unwrap();
}

#[test]
fn pdf_integrates_to_one() {
    for model in ["g", "dr", "clt"] {
        for m in ["1", "3"] {
            let text = stdout(&["pdf", "--M", m, "--model", model, "--grid", "0:20:20000"]);
            let mass: f64 = rows(&text)
                .iter()
                .map(|r| r[1].parse::<f64>().unwrap())
                .sum::<f64>()
                * 1e-3;
            // The Gaussian puts part of its mass on q < 0.
            let want = match model {
                "clt" => {
                    1.0 - CltParams::for_config(&SystemConfig::reference(m.parse().unwrap()))
                        .cdf(0.0)
                }
                _ => 1.0,
            };
            assert!(
                (mass - want).abs() < 1e-3,
                "{model} M={m}: mass {mass}, want {want}"
            );
        }
    }
}

#[test]
fn histogram_matches_density() {
    // Bin averages of the fitted density against the sampled histogram.
    let fine = stdout(&["pdf", "--M", "6", "--model", "g", "--grid", "0:2:2000"]);
    let fine: Vec<f64> = rows(&fine).iter().map(|r| r[1].parse().unwrap()).collect();
    let mc = stdout(&[
        "pdf",
        "--M",
        "6",
        "--model",
        "mc",
        "--grid",
        "0:2:20",
        "--samples",
        "400000",
    ]);
    for (bin, r) in fine.chunks(100).zip(rows(&mc)) {
        let g = bin.iter().sum::<f64>() / bin.len() as f64;
        let h: f64 = r[1].parse().unwrap();
        assert!((g - h).abs() < 0.1, "bin at {}: {g} vs {h}", r[0]);
    }
}

#[test]
fn bound_lies_above_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("ber.csv");
    let out = lisnoma(&[
        "ber",
        "--M",
        "3",
        "--snr",
        "0:20:5",
        "--method",
        "both",
        "--frames",
        "200000",
        "-o",
        base.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for user in 1..=2 {
        let text = std::fs::read_to_string(dir.path().join(format!("ber_user{user}.csv"))).unwrap();
        assert!(text.lines().any(|l| l.starts_with("# tau ")));
        let r = rows(&text);
        let bound: Vec<&Vec<String>> = r.iter().filter(|r| r[4] == "bound").collect();
        let mc: Vec<&Vec<String>> = r.iter().filter(|r| r[4] == "mc").collect();
        assert_eq!(bound.len(), 5);
        assert_eq!(mc.len(), 5);
        for (b, s) in bound.iter().zip(&mc) {
            assert_eq!(b[0], s[0]);
            let value: f64 = b[1].parse().unwrap();
            let ci_low: f64 = s[2].parse().unwrap();
            assert!(
                value >= ci_low,
                "user {user} at {} dB: {value} < {ci_low}",
                b[0]
            );
        }
    }
}

#[test]
fn output_is_reproducible() {
    let args = [
        "pep", "--M", "3", "--method", "mc", "--snr", "10:20:10", "--trials", "50000", "--seed",
        "9",
    ];
    let a = stdout(&args);
    assert_eq!(a, stdout(&args));
    let mut other = args;
    other[10] = "10";
    let b = stdout(&other);
    assert_ne!(a, b);
    assert_ne!(
        a.lines().next(),
        b.lines().next(),
        "manifest hash tracks the seed"
    );
}

#[test]
fn closed_forms_agree_for_one_element() {
    let general = rows(&stdout(&[
        "pep", "--M", "1", "--method", "general", "--snr", "0:30:10",
    ]));
    let m1 = rows(&stdout(&[
        "pep", "--M", "1", "--method", "m1", "--snr", "0:30:10",
    ]));
    let quad = rows(&stdout(&[
        "pep", "--M", "1", "--method", "quad", "--model", "dr", "--snr", "0:30:10",
    ]));
    for ((g, e), q) in general.iter().zip(&m1).zip(&quad) {
        let (g, e, q): (f64, f64, f64) = (
            g[1].parse().unwrap(),
            e[1].parse().unwrap(),
            q[1].parse().unwrap(),
        );
        assert!(((e - q) / q).abs() < 1e-8);
        assert!(((g - e) / e).abs() < 0.1);
    }
}

#[test]
fn fit_and_diversity_formats() {
    let csv = stdout(&["fit", "--M", "1:4", "--format", "csv"]);
    assert_eq!(rows(&csv).len(), 4);
    assert!(csv.contains("M,a1,a2,a3,a4_re,a4_im,a5_re,a5_im,complex_pair"));
    let one: serde_json::Value = serde_json::from_str(&stdout(&["fit", "--M", "8"])).unwrap();
    assert!(one.get("a1").is_some());
    let div: serde_json::Value =
        serde_json::from_str(&stdout(&["diversity", "--M", "3:4"])).unwrap();
    let div = div.as_array().unwrap();
    assert_eq!(div.len(), 4);
    assert_eq!(div[0]["user"], 1);
    assert_eq!(div[1]["user"], 2);
    let mom: serde_json::Value = serde_json::from_str(&stdout(&["moments", "--M", "2"])).unwrap();
    assert!((mom["mu1"].as_f64().unwrap() - std::f64::consts::PI / 2.0).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| lisnoma(args).status.code();
    assert_eq!(
        code(&["pep", "--M", "3", "--user", "0", "--method", "general", "--snr", "0:1:1"]),
        Some(2)
    );
    assert_eq!(
        code(&["pep", "--M", "3", "--method", "nope", "--snr", "0:1:1"]),
        Some(2)
    );
    assert_eq!(
        code(&["pdf", "--M", "3", "--model", "g", "--grid", "5:1:10"]),
        Some(2)
    );
    assert_eq!(
        code(&["ber", "--M", "3", "--snr", "0:1:1", "--p1", "1.5"]),
        Some(2)
    );
    assert_eq!(
        code(&["fit", "--M", "3", "--scenario", "/nonexistent.json"]),
        Some(2)
    );

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"M": 3, "L": 2}"#).unwrap();
    assert_eq!(
        code(&["fit", "--M", "3", "--scenario", bad.to_str().unwrap()]),
        Some(2)
    );
    let inconsistent = dir.path().join("inconsistent.json");
    std::fs::write(
        &inconsistent,
        r#"{"M":3,"L":2,"sigma2":0.5,"alpha":3,"d_B":1,"d_R":[5,2],"P":[0.5,0.2],"N0":1,"constellation":"bpsk"}"#,
    )
    .unwrap();
    assert_eq!(
        code(&[
            "fit",
            "--M",
            "3",
            "--scenario",
            inconsistent.to_str().unwrap()
        ]),
        Some(2)
    );
}
