use std::process::{Command, Output};

use serde_json::Value;

fn mk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mk"))
        .env_remove("MK_SEED")
        .args(args)
        .output()
        .expect("run mk")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json report")
}

#[test]
fn norm_report_embeds_config() {
    let out = mk(&["norm", "ap", "--weight", "power:lambda=0.5", "--n", "100", "--p", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["config"]["command"], "norm ap");
    assert_eq!(v["config"]["N"], 100);
    assert_eq!(v["config"]["args"]["weight"], "power:lambda=0.5");
    assert_eq!(v["report"]["kind"], "ap");
    assert!(v["report"].get("per_n").is_none());
    let value = v["report"]["value"].as_f64().unwrap();
    assert!(value > 1.0 && value < 4.0 / 3.0 * 2.0);
}

#[test]
fn identical_runs_are_byte_identical() {
    let args = [
        "extrapolate",
        "verify",
        "--op",
        "hardy",
        "--p0",
        "2",
        "--p",
        "3",
        "--n",
        "64",
        "--span",
        "4",
    ];
    let a = mk(&args);
    let b = mk(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn env_seed_overrides_flag() {
    let run = |env: Option<&str>, seed: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_mk"));
        cmd.env_remove("MK_SEED");
        if let Some(s) = env {
            cmd.env("MK_SEED", s);
        }
        let out = cmd
            .args(["--seed", seed, "generate", "--family", "ap", "--p", "2", "--n", "5"])
            .output()
            .unwrap();
        json(&out)
    };
    let flagged = run(None, "7");
    let overridden = run(Some("7"), "1");
    assert_eq!(flagged["report"], overridden["report"]);
    assert_eq!(overridden["config"]["seed"], 7);
    assert_ne!(run(None, "1")["report"], flagged["report"]);

    let bad = Command::new(env!("CARGO_BIN_EXE_mk"))
        .env("MK_SEED", "seven")
        .args(["norm", "a1", "--weight", "const:c=1", "--n", "3"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec!["norm", "ap", "--weight", "const:c=1", "--n", "3", "--p", "1"],
        vec!["norm", "ap", "--weight", "bogus:x=1", "--n", "3", "--p", "2"],
        vec!["norm", "ap", "--weight", "const:c=1", "--n", "3"],
        vec![
            "op",
            "norm-est",
            "--op",
            "identity",
            "--weight",
            "const:c=1",
            "--n",
            "3",
            "--p",
            "2",
        ],
        vec!["--format", "xml", "norm", "a1", "--weight", "const:c=1", "--n", "3"],
        vec![
            "counterexample",
            "eval",
            "--form",
            "kl1",
            "--alpha",
            "1",
            "--beta",
            "2",
            "--v",
            "1,2",
        ],
        vec!["frobnicate"],
    ] {
        let out = mk(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn golden_mismatch_exits_1() {
    let out = mk(&["counterexample", "--paper"]);
    let v = json(&out);
    let cases = v["report"]["cases"].as_array().unwrap();
    assert_eq!(cases.len(), 4);
    let all_ok = v["report"]["all_ok"].as_bool().unwrap();
    assert_eq!(out.status.code(), Some(if all_ok { 0 } else { 1 }));
    let case = cases.iter().find(|c| c["label"] == "unweighted_pos").unwrap();
    assert_eq!(case["ok"], true);
}

#[test]
fn divergent_rdf_is_an_input_error() {
    // K far below the norm: the series diverges, which is an input error
    let out = mk(&[
        "rdf",
        "iterate",
        "--weight",
        "const:c=1",
        "--n",
        "16",
        "--h",
        "const:c=1",
        "--p",
        "2",
        "--k",
        "0.1",
        "--max-terms",
        "200",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let ok = mk(&[
        "rdf",
        "iterate",
        "--weight",
        "const:c=1",
        "--n",
        "16",
        "--h",
        "const:c=1",
        "--p",
        "2",
        "--k",
        "2",
    ]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(json(&ok)["report"]["checks"]["iii"], true);
}

#[test]
fn numbers_round_trip_at_12_digits() {
    let out = mk(&["op", "apply", "--op", "maximal", "--f", "0.1,3,0.7,2.25"]);
    let v = json(&out);
    let got: Vec<f64> = v["report"]["output"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    let want = [1.55, 1.55, 1.5125, 1.5125];
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() <= 1e-11 * w);
    }
}

#[test]
fn csv_and_text_formats() {
    let csv = mk(&[
        "--format",
        "csv",
        "norm",
        "profile",
        "--weight",
        "const:c=2",
        "--n",
        "10",
        "--grid",
        "1.5,2,3",
    ]);
    let text = String::from_utf8(csv.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config {"));
    assert_eq!(lines.next().unwrap(), "argmax_n,kind,n,p,value");
    assert_eq!(lines.count(), 3);

    let t = mk(&[
        "--format",
        "text",
        "extrapolate",
        "constant",
        "--p0",
        "3",
        "--p",
        "2",
        "--phi0",
        "identity",
        "--k",
        "2",
        "--apw",
        "1.5",
    ]);
    let t = String::from_utf8(t.stdout).unwrap();
    assert!(t.contains("regime: down"));
    assert!(t.contains("substituted:"));
}

#[test]
fn generated_file_feeds_back_in() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.txt");
    let out = mk(&[
        "--format",
        "text",
        "--out",
        path.to_str().unwrap(),
        "generate",
        "--weight",
        "power:lambda=0.25",
        "--n",
        "40",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let spec = format!("file:{}", path.display());
    let from_file = json(&mk(&["norm", "ap", "--weight", &spec, "--p", "2.5"]));
    let direct = json(&mk(&[
        "norm",
        "ap",
        "--weight",
        "power:lambda=0.25",
        "--n",
        "40",
        "--p",
        "2.5",
    ]));
    assert_eq!(from_file["report"]["value"], direct["report"]["value"]);
    let longer = mk(&["norm", "ap", "--weight", &spec, "--n", "41", "--p", "2.5"]);
    assert_eq!(longer.status.code(), Some(2));
}

#[test]
fn threads_flag_does_not_change_results() {
    let args = |t: &'static str| {
        vec![
            "--threads",
            t,
            "extrapolate",
            "verify",
            "--op",
            "maximal",
            "--p0",
            "3",
            "--p",
            "2",
            "--n",
            "64",
            "--span",
            "4",
        ]
    };
    let a = mk(&args("1"));
    let b = mk(&args("4"));
    let (mut va, mut vb) = (json(&a), json(&b));
    va["config"]["args"].as_object_mut().unwrap().remove("threads");
    vb["config"]["args"].as_object_mut().unwrap().remove("threads");
    assert_eq!(va, vb);
}

#[test]
fn norm_estimate_on_two_points_is_certified() {
    let v = json(&mk(&[
        "op",
        "norm-est",
        "--op",
        "maximal",
        "--weight",
        "const:c=1",
        "--n",
        "2",
        "--p",
        "2",
    ]));
    assert_eq!(v["report"]["certified"], true);
    assert!((v["report"]["value"].as_f64().unwrap() - 1.1441228).abs() < 1e-6);
    assert_eq!(v["report"]["witness"].as_array().unwrap().len(), 2);
}
