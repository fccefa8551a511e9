//! Binary-level contract tests: exit codes, determinism, schema validation,
//! and agreement between the staged pipeline (preprocess → mask) and the
//! single-pass record builder.

use std::path::Path;
use std::process::{Command, Output};

use chartab_core::manifest::read_corpus;
use chartab_core::objectives::{make_pretraining_example, PretrainOptions};
use chartab_core::{CellRef, ObjectiveSelector, PretrainRecord, DEFAULT_PREFIX};

fn chartab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chartab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        stdout(out),
        stderr(out)
    );
}

fn read_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

#[test]
fn synth_is_deterministic_and_refuses_collisions() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let run1 = chartab(&["synth", "--n", "40", "--seed", "7", "--out", a.to_str().unwrap()]);
    ok(&run1);
    assert!(stdout(&run1).contains("40 samples"), "{}", stdout(&run1));
    ok(&chartab(&["synth", "--n", "40", "--seed", "7", "--out", b.to_str().unwrap()]));
    let ma = std::fs::read(a.join("manifest.jsonl")).unwrap();
    let mb = std::fs::read(b.join("manifest.jsonl")).unwrap();
    assert_eq!(ma, mb, "same (n, seed) must give identical manifests");

    let collide = chartab(&["synth", "--n", "40", "--seed", "7", "--out", a.to_str().unwrap()]);
    assert_eq!(collide.status.code(), Some(2), "collision without --force");
    assert!(stderr(&collide).contains("--force"));
    ok(&chartab(&["synth", "--n", "40", "--seed", "7", "--out", a.to_str().unwrap(), "--force"]));
}

#[test]
fn seed_flag_overrides_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("pipeline.toml");
    std::fs::write(&cfg, "seed = 3\n").unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&chartab(&[
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "7",
        "synth",
        "--n",
        "20",
        "--out",
        a.to_str().unwrap(),
    ]));
    ok(&chartab(&["synth", "--n", "20", "--seed", "7", "--out", b.to_str().unwrap()]));
    assert_eq!(
        std::fs::read(a.join("manifest.jsonl")).unwrap(),
        std::fs::read(b.join("manifest.jsonl")).unwrap(),
    );
}

#[test]
fn unknown_config_key_names_the_key_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("pipeline.toml");
    std::fs::write(&cfg, "sede = 3\n").unwrap();
    let out = chartab(&[
        "--config",
        cfg.to_str().unwrap(),
        "synth",
        "--n",
        "5",
        "--out",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("sede"), "stderr must name the key: {}", stderr(&out));
}

#[test]
fn staged_pipeline_matches_single_pass_record_builder() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    ok(&chartab(&["synth", "--n", "30", "--seed", "11", "--out", corpus.to_str().unwrap()]));
    let manifest = corpus.join("manifest.jsonl");
    let stc = dir.path().join("stc.jsonl");
    let masked = dir.path().join("masked.jsonl");
    let pre = chartab(&[
        "preprocess",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        stc.to_str().unwrap(),
        "--seed",
        "11",
    ]);
    ok(&pre);
    assert!(
        stdout(&pre).contains("header match 100.0%"),
        "noise-free corpora match all headers: {}",
        stdout(&pre)
    );
    assert_eq!(read_lines(&stc).len(), 30, "one record per manifest sample");
    ok(&chartab(&[
        "mask",
        "--records",
        stc.to_str().unwrap(),
        "--out",
        masked.to_str().unwrap(),
        "--seed",
        "11",
    ]));

    let samples = read_corpus(&manifest).unwrap();
    let opts = PretrainOptions { selector: ObjectiveSelector::Alternate, ..Default::default() };
    for (i, line) in read_lines(&masked).iter().enumerate() {
        let got: PretrainRecord = serde_json::from_str(line).unwrap();
        let want =
            make_pretraining_example(&samples[i], DEFAULT_PREFIX, &opts, i as u64, 11).unwrap();
        assert_eq!(got, want, "sample {i} diverges from the single-pass builder");
    }
}

#[test]
fn mask_rejects_out_of_range_rates_and_respects_objective_purity() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    ok(&chartab(&["synth", "--n", "12", "--seed", "5", "--out", corpus.to_str().unwrap()]));
    let stc = dir.path().join("stc.jsonl");
    ok(&chartab(&[
        "preprocess",
        "--manifest",
        corpus.join("manifest.jsonl").to_str().unwrap(),
        "--out",
        stc.to_str().unwrap(),
        "--seed",
        "5",
    ]));

    let bad = chartab(&[
        "mask",
        "--records",
        stc.to_str().unwrap(),
        "--out",
        dir.path().join("x.jsonl").to_str().unwrap(),
        "--rate",
        "1.5",
    ]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("1.5"));

    let masked = dir.path().join("mhp.jsonl");
    let run = chartab(&[
        "mask",
        "--records",
        stc.to_str().unwrap(),
        "--out",
        masked.to_str().unwrap(),
        "--objective",
        "mhp",
        "--rate",
        "0.45",
        "--seed",
        "5",
    ]);
    ok(&run);
    assert!(stdout(&run).contains("purity violations 0"), "{}", stdout(&run));
    for line in read_lines(&masked) {
        let rec: PretrainRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(rec.schema, "maskedpair/1");
        for cell in &rec.masked {
            assert!(
                matches!(cell, CellRef::ColHeader(_) | CellRef::RowHeader(_)),
                "mhp masked a non-header cell: {cell:?}"
            );
        }
    }
}

#[test]
fn import_validates_and_names_the_offending_line() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    ok(&chartab(&["synth", "--n", "6", "--seed", "3", "--out", corpus.to_str().unwrap()]));
    let manifest = corpus.join("manifest.jsonl");
    let good = chartab(&["import", "--manifest", manifest.to_str().unwrap()]);
    ok(&good);
    assert!(stdout(&good).contains("6 valid rows"), "{}", stdout(&good));

    // Corrupt sample 3's first bbox so x1 >= x2.
    let mut lines = read_lines(&manifest);
    let mut record: serde_json::Value = serde_json::from_str(&lines[2]).unwrap();
    let bbox = &mut record["regions"][0]["bbox"];
    bbox[0] = serde_json::json!(500.0);
    bbox[2] = serde_json::json!(10.0);
    lines[2] = record.to_string();
    let bad_path = dir.path().join("bad.jsonl");
    std::fs::write(&bad_path, lines.join("\n") + "\n").unwrap();
    let bad = chartab(&["import", "--manifest", bad_path.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains(":3:"), "must name line 3: {}", stderr(&bad));

    // Unknown region category is rejected by name.
    let mut lines = read_lines(&manifest);
    lines[0] = lines[0].replace("\"PlotArea\"", "\"MysteryZone\"");
    let bad_cat = dir.path().join("badcat.jsonl");
    std::fs::write(&bad_cat, lines.join("\n") + "\n").unwrap();
    let bad = chartab(&["import", "--manifest", bad_cat.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("MysteryZone"), "{}", stderr(&bad));
}

#[test]
fn eval_scores_exact_predictions_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    ok(&chartab(&["synth", "--n", "10", "--seed", "9", "--out", corpus.to_str().unwrap()]));
    let manifest = corpus.join("manifest.jsonl");
    let samples = read_corpus(&manifest).unwrap();
    let preds: Vec<String> = samples
        .iter()
        .map(|s| {
            let flat = chartab_core::flatten_table(&s.table, DEFAULT_PREFIX).text;
            serde_json::json!({ "id": s.id, "pred": flat }).to_string()
        })
        .collect();
    let pred_path = dir.path().join("preds.jsonl");
    std::fs::write(&pred_path, preds.join("\n") + "\n").unwrap();
    let report_path = dir.path().join("eval.json");
    let run = chartab(&[
        "eval",
        "--pred",
        pred_path.to_str().unwrap(),
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        report_path.to_str().unwrap(),
    ]);
    ok(&run);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["relaxed_accuracy"], 1.0, "{report}");
    assert_eq!(report["bleu4"], 1.0, "{report}");
    assert_eq!(report["n"], 10);

    let unknown = dir.path().join("unknown.jsonl");
    std::fs::write(&unknown, "{\"id\":\"nope\",\"pred\":\"x\"}\n").unwrap();
    let bad = chartab(&[
        "eval",
        "--pred",
        unknown.to_str().unwrap(),
        "--manifest",
        manifest.to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn qa_gen_and_roundtrip_report_write_versioned_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    ok(&chartab(&["synth", "--n", "8", "--seed", "13", "--out", corpus.to_str().unwrap()]));
    let qa = dir.path().join("qa.jsonl");
    let run = chartab(&[
        "qa-gen",
        "--manifest",
        corpus.join("manifest.jsonl").to_str().unwrap(),
        "--out",
        qa.to_str().unwrap(),
        "--per-sample",
        "2",
        "--seed",
        "13",
    ]);
    ok(&run);
    let lines = read_lines(&qa);
    assert!(!lines.is_empty());
    for line in &lines {
        let q: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(q["question"].as_str().unwrap().contains('?'));
        assert!(!q["answer"].as_str().unwrap().is_empty());
    }

    let report_path = dir.path().join("rt.json");
    let rt = chartab(&[
        "roundtrip-report",
        "--n",
        "25",
        "--seed",
        "13",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    ok(&rt);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["schema"], "roundtrip/1");
    assert_eq!(report["overall"]["n"], 25);
    assert_eq!(report["cell_relaxed_accuracy"], 1.0, "noise-free run: {report}");
}
