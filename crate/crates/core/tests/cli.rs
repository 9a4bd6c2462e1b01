use std::fs;
use std::path::{Path, PathBuf};

use glrd::cli::{run, EXIT_INPUT, EXIT_OK, EXIT_PROVIDER};
use tempfile::TempDir;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name).to_string_lossy().into_owned()
}

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn glrd(args: &[&str]) -> Outcome {
    let (mut out, mut err) = (vec![], vec![]);
    let code = run(std::iter::once("glrd").chain(args.iter().copied()), &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

struct Dir(TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    fn write(&self, name: &str, text: &str) -> String {
        fs::write(self.path(name), text).unwrap();
        self.arg(name)
    }
}

#[test]
fn refine_case_studies() {
    let d = Dir::new();
    let r = glrd(&[
        "--kb", &fixture("kb.json"), "--detections", &fixture("case_studies.jsonl"),
        "--out", &d.arg("out.jsonl"), "--log", &d.arg("log.jsonl"), "refine",
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert_eq!(r.stdout.trim(), "kept 2, removed 1, reclassified 1");
    let out = fs::read_to_string(d.path("out.jsonl")).unwrap();
    let classes: Vec<String> = out
        .lines()
        .flat_map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            v["detections"].as_array().unwrap().iter().map(|d| d["class"].as_str().unwrap().to_string()).collect::<Vec<_>>()
        })
        .collect();
    assert!(classes.contains(&"coffee table".to_string()));
    assert!(!classes.contains(&"toilet".to_string()) && !classes.contains(&"book".to_string()));
    let log = fs::read_to_string(d.path("log.jsonl")).unwrap();
    assert!(log.contains("\"decision\":\"remove\"") && log.contains("\"winner\":\"coffee table\""));
}

#[test]
fn refine_empty_input_is_fine() {
    let d = Dir::new();
    let dets = d.write("empty.jsonl", "");
    let r = glrd(&["--kb", &fixture("kb.json"), "--detections", &dets, "--out", &d.arg("o.jsonl"), "refine"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert_eq!(r.stdout.trim(), "kept 0, removed 0, reclassified 0");
    assert_eq!(fs::read_to_string(d.path("o.jsonl")).unwrap(), "");
}

#[test]
fn kb_without_prior_for_novel_class_is_rejected() {
    let d = Dir::new();
    let kb = d.write(
        "kb.json",
        r#"{"sizes": {"desk": [1.4, 0.7, 0.75]}, "compat": {"office": ["desk", "lamp"]}, "novel_classes": ["desk", "lamp"]}"#,
    );
    let r = glrd(&["--kb", &kb, "--detections", &fixture("case_studies.jsonl"), "refine"]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(r.stderr.contains("`lamp`"), "{}", r.stderr);
}

#[test]
fn unreachable_model_is_a_provider_failure() {
    let d = Dir::new();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let cfg = d.write(
        "c.toml",
        &format!("[llm]\nendpoint = \"http://127.0.0.1:{port}/\"\nmax_retries = 0\ntimeout_secs = 2.0\n"),
    );
    let r = glrd(&[
        "--config", &cfg, "--llm", "remote", "--kb", &fixture("kb.json"),
        "--detections", &fixture("case_studies.jsonl"), "--out", &d.arg("o.jsonl"), "refine",
    ]);
    assert_eq!(r.code, EXIT_PROVIDER, "{}", r.stderr);
    assert!(r.stderr.contains("library-book"), "{}", r.stderr);
    // the failed scene is passed through unchanged
    let out = fs::read_to_string(d.path("o.jsonl")).unwrap();
    assert!(out.contains("\"class\":\"book\""), "{out}");
}

#[test]
fn bad_inputs_exit_one() {
    let d = Dir::new();
    let dets = d.write("d.jsonl", "{not json}\n");
    let r = glrd(&["--kb", &fixture("kb.json"), "--detections", &dets, "refine"]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(r.stderr.contains("line 1"), "{}", r.stderr);

    assert_eq!(glrd(&["refine"]).code, EXIT_INPUT);
    assert_eq!(glrd(&["--kb", "/nonexistent/kb.json", "--detections", &fixture("case_studies.jsonl"), "refine"]).code, EXIT_INPUT);
    assert_eq!(glrd(&["bogus-command"]).code, EXIT_INPUT);
    assert_eq!(glrd(&["solve-psl", "1.5", "0", "0"]).code, EXIT_INPUT);
    assert_eq!(glrd(&["--help"]).code, EXIT_OK);

    let cfg = d.write("c.toml", "[psl]\nnot_a_field = 1\n");
    assert_eq!(glrd(&["--config", &cfg, "solve-psl", "1", "1", "1"]).code, EXIT_INPUT);
}

#[test]
fn solve_psl_prints_decisions() {
    let r = glrd(&["solve-psl", "0.9", "0.5419", "1"]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.stdout.contains("yRecls 0.258100"), "{}", r.stdout);
    assert!(r.stdout.contains("decision reclassify"));
    let r = glrd(&["solve-psl", "--json", "1", "1", "1"]);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["decision"], "keep");
    assert_eq!(v["objective"], 3.0);
    let r = glrd(&["--policy", "max-keep-min-recls", "solve-psl", "0.8", "1", "0"]);
    assert!(!r.stdout.contains("decision remove"), "{}", r.stdout);
    let r = glrd(&["solve-psl", "0.8", "1", "0"]);
    assert!(r.stdout.contains("decision remove"), "{}", r.stdout);
}

#[test]
fn config_file_sets_defaults_and_flags_override() {
    let d = Dir::new();
    let cfg = d.write("c.toml", "[psl]\nphi_keep = 0.95\n");
    let r = glrd(&["--config", &cfg, "solve-psl", "0.9", "1", "1"]);
    assert!(r.stdout.contains("decision remove"), "{}", r.stdout);
    let r = glrd(&["--config", &cfg, "solve-psl", "--phi-keep", "0.5", "0.9", "1", "1"]);
    assert!(r.stdout.contains("decision keep"), "{}", r.stdout);
}

#[test]
fn gen_synthetic_is_reproducible_and_evaluates() {
    let d = Dir::new();
    for tag in ["a", "b"] {
        let r = glrd(&[
            "--kb", &fixture("kb.json"), "--seed", "7", "--out", &d.arg(&format!("{tag}.jsonl")),
            "--gt", &d.arg(&format!("gt_{tag}.jsonl")), "--log", &d.arg(&format!("c_{tag}.jsonl")),
            "gen-synthetic", "--scenes", "30",
        ]);
        assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
        assert!(r.stdout.starts_with("30 scenes,"), "{}", r.stdout);
    }
    assert_eq!(fs::read(d.path("a.jsonl")).unwrap(), fs::read(d.path("b.jsonl")).unwrap());
    assert_eq!(fs::read(d.path("c_a.jsonl")).unwrap(), fs::read(d.path("c_b.jsonl")).unwrap());

    let r = glrd(&["--detections", &d.arg("gt_a.jsonl"), "--gt", &d.arg("gt_a.jsonl"), "eval"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert!(r.stdout.trim_end().ends_with("mAP@0.25\t1.0000"), "{}", r.stdout);

    let r = glrd(&["--detections", &d.arg("a.jsonl"), "--gt", &d.arg("gt_a.jsonl"), "eval"]);
    assert!(r.stdout.contains("mAP@0.25\t0."), "{}", r.stdout);
}

#[test]
fn dbc_sim_fixture() {
    let d = Dir::new();
    let losses = d.write("l.jsonl", "{\"A\": 5, \"B\": 1, \"C\": 3}\n");
    let r = glrd(&["--out", &d.arg("trace.jsonl"), "dbc-sim", "--losses", &losses, "--i-dbc", "1", "--k", "1"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert_eq!(r.stdout, "updates 1\nA\t1.0500\nB\t0.9500\nC\t1.0000\n");
    let trace = fs::read_to_string(d.path("trace.jsonl")).unwrap();
    assert!(trace.contains("\"raised\":[\"A\"]") && trace.contains("\"lowered\":[\"B\"]"), "{trace}");

    let neg = d.write("n.jsonl", "{\"A\": -1}\n");
    assert_eq!(glrd(&["dbc-sim", "--losses", &neg]).code, EXIT_INPUT);
}

#[test]
fn balance_runs_to_a_fixpoint() {
    let d = Dir::new();
    let mut lines = String::new();
    for i in 0..60 {
        let class = if i < 45 { "lamp" } else { "sofa" };
        let conf = 0.3 + (i % 15) as f64 * 0.045;
        lines.push_str(&format!(
            "{{\"imageId\": \"img{i}\", \"labels\": [{{\"bbox\": [0, 0, 5, 5], \"class\": \"{class}\", \"confidence\": {conf}, \"simPos\": 1.0, \"simNeg\": 0.0}}]}}\n"
        ));
    }
    let labels = d.write("labels.jsonl", &lines);
    let r = glrd(&["--out", &d.arg("trace.jsonl"), "balance", "--labels", &labels]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert!(r.stdout.contains("converged"), "{}", r.stdout);
    assert!(r.stdout.contains("lamp\t") && r.stdout.contains("sofa\t"));
    assert!(fs::read_to_string(d.path("trace.jsonl")).unwrap().lines().count() >= 2);
}

#[test]
fn baol_needs_lambda() {
    let d = Dir::new();
    let p = d.write(
        "p.json",
        r#"{"boxes": [[0,0,0,1,1,1,0], [0.1,0,0,1,1,1,0], [5,0,0,1,1,1,0]],
            "classScores": [[0.9, 0.1], [0.8, 0.7], [0.3, 0.2]],
            "fgScores": [0.9, 0.6, 0.1],
            "labels": [[0,0,0,1,1,1,0]]}"#,
    );
    let r = glrd(&["baol", "--proposals", &p]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(r.stderr.contains("lambda"));
    let r = glrd(&["--out", &d.arg("r.json"), "baol", "--proposals", &p, "--lambda", "1", "--k-pro", "2"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert!(r.stdout.starts_with("kept 2 of 3 proposals"), "{}", r.stdout);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path("r.json")).unwrap()).unwrap();
    assert_eq!(report["foreground"], serde_json::json!([true, false, false]));
}
