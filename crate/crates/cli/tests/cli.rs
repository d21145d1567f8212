use std::path::Path;
use std::process::{Command, Output};

fn infill(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infill"))
        .args(args)
        .current_dir(cwd)
        .env_remove("INFILL_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = infill(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str], cwd: &Path) -> i32 {
    infill(args, cwd).status.code().unwrap()
}

#[test]
fn pipeline_from_corpus_to_scores() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let summary = ok(
        &[
            "ingest",
            "--corpus",
            "builtin:medical",
            "--out",
            "corpus.jsonl",
        ],
        d,
    );
    let summary: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(summary["n_docs"], 200);

    ok(
        &[
            "train-predictor",
            "--corpus",
            "corpus.jsonl",
            "--mode",
            "mlm",
            "--out",
            "mlm.json",
        ],
        d,
    );
    ok(
        &[
            "train-predictor",
            "--corpus",
            "corpus.jsonl",
            "--mode",
            "clm",
            "--out",
            "clm.json",
        ],
        d,
    );
    ok(
        &[
            "corrupt",
            "--corpus",
            "corpus.jsonl",
            "--strategy",
            "random:0.5",
            "--seed",
            "4",
            "--out",
            "masked.jsonl",
        ],
        d,
    );
    ok(
        &[
            "generate",
            "--input",
            "masked.jsonl",
            "--model",
            "mlm.json",
            "--out",
            "mlm_gen.jsonl",
        ],
        d,
    );
    ok(
        &[
            "generate",
            "--input",
            "masked.jsonl",
            "--model",
            "clm.json",
            "--out",
            "clm_gen.jsonl",
        ],
        d,
    );

    let score = |file: &str| -> serde_json::Value {
        let text = ok(
            &[
                "evaluate",
                "--corpus",
                "corpus.jsonl",
                "--generations",
                file,
            ],
            d,
        );
        serde_json::from_str(&text).unwrap()
    };
    let mlm = score("mlm_gen.jsonl");
    let clm = score("clm_gen.jsonl");
    assert_eq!(mlm["n_docs"], 200);
    let bleu = |v: &serde_json::Value| v["corpus"]["bleu"].as_f64().unwrap();
    assert!(bleu(&mlm) > bleu(&clm), "{mlm} vs {clm}");

    let row = ok(
        &[
            "downstream",
            "--task",
            "ner",
            "--corpus",
            "builtin:medical",
            "--generations",
            "mlm_gen.jsonl",
        ],
        d,
    );
    let row: serde_json::Value = serde_json::from_str(&row).unwrap();
    assert_eq!(row["task"], "ner");
    assert!(row["score"].as_f64().unwrap() > 0.0);
}

#[test]
fn generation_through_a_served_model_matches_local() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        &[
            "train-predictor",
            "--corpus",
            "builtin:movies",
            "--mode",
            "mlm",
            "--out",
            "m.json",
        ],
        d,
    );
    ok(
        &[
            "corrupt",
            "--corpus",
            "builtin:movies",
            "--strategy",
            "stopwords",
            "--out",
            "masked.jsonl",
        ],
        d,
    );
    // Keep the run short.
    let masked = std::fs::read_to_string(d.join("masked.jsonl")).unwrap();
    let head: String = masked.lines().take(5).map(|l| format!("{l}\n")).collect();
    std::fs::write(d.join("masked.jsonl"), head).unwrap();

    let local = ok(
        &["generate", "--input", "masked.jsonl", "--model", "m.json"],
        d,
    );
    let endpoint = format!(
        "stdio:{} serve --model m.json",
        env!("CARGO_BIN_EXE_infill")
    );
    let remote = ok(
        &[
            "generate",
            "--input",
            "masked.jsonl",
            "--endpoint",
            &endpoint,
            "--mode",
            "mlm",
        ],
        d,
    );
    let outputs = |text: &str| -> Vec<serde_json::Value> {
        text.lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["output"].clone())
            .collect()
    };
    assert_eq!(outputs(&local).len(), 5);
    assert_eq!(outputs(&local), outputs(&remote));
}

#[test]
fn experiment_run_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("exp.toml"),
        r#"name = "cli"
sample_cap = 6
regimes = ["mlm", "clm"]
strategies = ["random", "punctuation"]
ratios = [0.3, 0.6]
downstream = false

[[datasets]]
name = "movies"
builtin = "movies"

[[predictors]]
kind = "ngram"
order = 2
"#,
    )
    .unwrap();
    ok(&["experiment", "run", "exp.toml", "-q"], d);
    let csv = std::fs::read_to_string(d.join("results/results.csv")).unwrap();
    assert!(csv.starts_with(
        "experiment_id,regime,predictor_id,strategy,ratio,metric_name,value,n_docs,seed,note"
    ));
    let first = csv.clone();
    ok(&["experiment", "run", "exp.toml", "-q"], d);
    assert_eq!(
        std::fs::read_to_string(d.join("results/results.csv")).unwrap(),
        first
    );

    let files = ok(&["report", "results/results.csv", "--out", "redrawn"], d);
    assert_eq!(files.lines().count(), 4);
    assert!(d.join("redrawn/plots/cli_movies_bleu.svg").exists());
}

#[test]
fn exit_codes_separate_bad_input_from_failures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&["--help"], d), 0);
    assert_eq!(code(&[], d), 1);
    assert_eq!(
        code(
            &[
                "corrupt",
                "--corpus",
                "builtin:medical",
                "--strategy",
                "random:1.5"
            ],
            d
        ),
        1
    );
    assert_eq!(code(&["ingest", "--corpus", "builtin:nothing"], d), 1);

    std::fs::write(d.join("bad.jsonl"), "{\"id\": \"a\"}\n").unwrap();
    assert_eq!(code(&["ingest", "--corpus", "bad.jsonl"], d), 1);
    std::fs::write(d.join("bad.toml"), "name = \"x\"\nratios = [2.0]\n").unwrap();
    assert_eq!(code(&["experiment", "run", "bad.toml"], d), 1);

    // Missing files and unreachable servers are runtime failures.
    assert_eq!(code(&["ingest", "--corpus", "missing.jsonl"], d), 2);
    ok(
        &[
            "corrupt",
            "--corpus",
            "builtin:movies",
            "--strategy",
            "random:0.5",
            "--out",
            "m.jsonl",
        ],
        d,
    );
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let endpoint = format!("tcp://{addr}");
    assert_eq!(
        code(
            &[
                "generate",
                "--input",
                "m.jsonl",
                "--endpoint",
                &endpoint,
                "--mode",
                "mlm"
            ],
            d
        ),
        2
    );
}
