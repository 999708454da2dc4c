//! End-to-end tests of the `scop` binary: every subcommand, idempotence,
//! thread invariance, and failure exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn scop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scop"))
        .args(args)
        .env_remove("SCOP_THREADS")
        .output()
        .expect("spawn scop")
}

fn write_fixture_annotations(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("instances.json");
    std::fs::write(
        &path,
        r#"{
          "images": [
            {"id": 1, "width": 100, "height": 100, "file_name": "1.jpg"},
            {"id": 2, "width": 200, "height": 150, "file_name": "2.jpg"}
          ],
          "annotations": [
            {"id": 1, "image_id": 1, "category_id": 1, "bbox": [0, 20, 40, 40], "iscrowd": 0},
            {"id": 2, "image_id": 1, "category_id": 2, "bbox": [50, 20, 40, 40], "iscrowd": 0},
            {"id": 3, "image_id": 2, "category_id": 1, "bbox": [10, 10, 60, 60], "iscrowd": 0},
            {"id": 4, "image_id": 2, "category_id": 3, "bbox": [80, 20, 55, 55], "iscrowd": 0},
            {"id": 5, "image_id": 2, "category_id": 2, "bbox": [0, 0, 3, 3], "iscrowd": 0},
            {"id": 6, "image_id": 2, "category_id": 2, "bbox": [100, 100, 40, 40], "iscrowd": 1}
          ],
          "categories": [
            {"id": 1, "name": "dog"}, {"id": 2, "name": "cat"}, {"id": 3, "name": "elephant"}
          ]
        }"#,
    )
    .unwrap();
    path
}

#[test]
fn curate_end_to_end_idempotent_and_thread_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let annotations = write_fixture_annotations(dir.path());
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let out_c = dir.path().join("c");

    let run = |out: &Path, threads: &str| {
        let output = scop(&[
            "curate",
            "--annotations",
            annotations.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
            "--seed",
            "42",
            "--threads",
            threads,
        ]);
        assert!(output.status.success(), "{output:?}");
    };
    run(&out_a, "1");
    run(&out_b, "8");
    run(&out_c, "1");

    let manifest_a = std::fs::read(out_a.join("manifest.jsonl")).unwrap();
    assert_eq!(manifest_a, std::fs::read(out_b.join("manifest.jsonl")).unwrap());
    assert_eq!(manifest_a, std::fs::read(out_c.join("manifest.jsonl")).unwrap());
    assert_eq!(
        std::fs::read(out_a.join("stats.json")).unwrap(),
        std::fs::read(out_b.join("stats.json")).unwrap()
    );

    let stats: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_a.join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats["candidates"], 4);
    assert_eq!(stats["survivors"], 2);
    let rejects = std::fs::read_to_string(out_a.join("rejects.jsonl")).unwrap();
    assert!(rejects.contains("is_crowd"));
}

#[test]
fn curate_rejects_bad_threshold_without_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let annotations = write_fixture_annotations(dir.path());
    let config = dir.path().join("bad.conf");
    std::fs::write(&config, "tau_v = 1.5\n").unwrap();
    let out = dir.path().join("out");
    let output = scop(&[
        "curate",
        "--annotations",
        annotations.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    assert!(!output.status.success());
    assert!(!out.exists(), "no partial output on config errors");
}

#[test]
fn curate_rejects_unknown_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let annotations = write_fixture_annotations(dir.path());
    let config = dir.path().join("bad.conf");
    std::fs::write(&config, "tau_z = 0.5\n").unwrap();
    let output = scop(&[
        "curate",
        "--annotations",
        annotations.to_str().unwrap(),
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("tau_z"), "{stderr}");
}

#[test]
fn stats_prints_stage_table() {
    let dir = tempfile::tempdir().unwrap();
    let annotations = write_fixture_annotations(dir.path());
    let output = scop(&[
        "stats",
        "--annotations",
        annotations.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let stdout = String::from_utf8_lossy(&output.stdout);
    for name in [
        "candidates",
        "visual_significance",
        "semantic_distinction",
        "spatial_clarity",
        "minimal_overlap",
        "size_balance",
        "survivors",
    ] {
        assert!(stdout.contains(name), "missing {name} in:\n{stdout}");
    }
}

#[test]
fn threshold_flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let annotations = write_fixture_annotations(dir.path());
    let config = dir.path().join("loose.conf");
    std::fs::write(&config, "tau_v = 0.9\n").unwrap();
    // The file alone would drop everything at visual significance; the flag
    // restores the default and two pairs survive.
    let output = scop(&[
        "stats",
        "--annotations",
        annotations.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--tau-v",
        "0.2",
    ]);
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("survivors                           2"), "{stdout}");
}

#[test]
fn prompts_then_retrieve_with_oracles_and_file() {
    let dir = tempfile::tempdir().unwrap();
    let groups = dir.path().join("groups.jsonl");
    let categories = dir.path().join("cats.txt");
    std::fs::write(&categories, "dog\ncat\nbench\nkite\n").unwrap();

    let output = scop(&[
        "prompts",
        "--out",
        groups.to_str().unwrap(),
        "--categories",
        categories.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let lines = std::fs::read_to_string(&groups).unwrap();
    assert_eq!(lines.lines().count(), 12); // 4 x 3 ordered pairs

    // Full mode multiplies by the four relations.
    let full = dir.path().join("full.jsonl");
    let output = scop(&[
        "prompts",
        "--out",
        full.to_str().unwrap(),
        "--categories",
        categories.to_str().unwrap(),
        "--mode",
        "full",
    ]);
    assert!(output.status.success());
    assert_eq!(std::fs::read_to_string(&full).unwrap().lines().count(), 48);

    let report = dir.path().join("report.json");
    let output = scop(&[
        "retrieve",
        "--groups",
        groups.to_str().unwrap(),
        "--oracle",
        "bag-of-words",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed["correct_rate"], 0.0);
    assert_eq!(parsed["swapped"], 12);

    // Round-trip through an embeddings file gives the same report.
    let embeddings = dir.path().join("emb.jsonl");
    let parsed_groups: Vec<scop_core::proxy::PromptGroup> =
        scop_tools::proxy_io::read_groups(&groups).unwrap();
    let records = scop_tools::proxy_io::oracle_records(
        &parsed_groups,
        scop_tools::proxy_io::Oracle::BagOfWords,
        16,
    );
    scop_tools::manifest::write_jsonl(&records, &embeddings).unwrap();
    let output = scop(&[
        "retrieve",
        "--groups",
        groups.to_str().unwrap(),
        "--embeddings",
        embeddings.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let from_file: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed, from_file);
}

#[test]
fn visor_scores_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let detections = dir.path().join("det.jsonl");
    let mut lines = String::new();
    // Correctness pattern [1,1,0,0]; image 3 misses one object.
    let boxes = [
        ((0, 40), Some((70, 40))),
        ((10, 40), Some((75, 40))),
        ((70, 40), Some((0, 40))),
        ((10, 40), None),
    ];
    for (idx, ((ax, ay), b)) in boxes.iter().enumerate() {
        let mut detections_json = format!(
            r#"{{"category":"dog","bbox":{{"x":{ax},"y":{ay},"w":20,"h":20}},"confidence":0.9}}"#
        );
        if let Some((bx, by)) = b {
            detections_json.push_str(&format!(
                r#",{{"category":"cat","bbox":{{"x":{bx},"y":{by},"w":20,"h":20}},"confidence":0.8}}"#
            ));
        }
        lines.push_str(&format!(
            r#"{{"prompt_id":"p0","image_index":{idx},"expected":{{"a":"dog","relation":"left","b":"cat"}},"detections":[{detections_json}]}}"#
        ));
        lines.push('\n');
    }
    std::fs::write(&detections, lines).unwrap();

    let out = dir.path().join("visor.json");
    let output = scop(&[
        "visor",
        "--detections",
        detections.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let scores: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(scores["visor"], serde_json::json!([1.0, 1.0, 0.0, 0.0]));
    assert_eq!(scores["uncond"], 0.5);
    assert_eq!(scores["oa"], 0.75);
}

#[test]
fn tenor_check_passes_and_rejects_odd_dims() {
    let output = scop(&["tenor-check"]);
    assert!(output.status.success(), "{output:?}");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("tenor-check: PASS"), "{stdout}");

    let output = scop(&["tenor-check", "--head-dim", "7"]);
    assert!(!output.status.success());
}

#[test]
fn missing_annotations_fails_cleanly() {
    let output = scop(&[
        "stats",
        "--annotations",
        "/nonexistent/instances.json",
    ]);
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("cannot open"), "{stderr}");
}

#[test]
fn repo_template_file_matches_builtin_pool() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../templates/default.json");
    let text = std::fs::read_to_string(&path).unwrap();
    let map: std::collections::BTreeMap<String, Vec<String>> =
        serde_json::from_str(&text).unwrap();
    let from_file = scop_core::decode::TemplatePool::from_map(map).unwrap();
    assert_eq!(from_file, scop_core::decode::TemplatePool::default_pool());
}

#[test]
fn config_file_drives_proxy_and_visor_keys() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scop.conf");
    std::fs::write(&config, "proxy_mode = full\nmetric = dot\nconf_threshold = 0.95\n").unwrap();

    let categories = dir.path().join("cats.txt");
    std::fs::write(&categories, "dog\ncat\n").unwrap();
    let groups = dir.path().join("groups.jsonl");
    let output = scop(&[
        "prompts",
        "--out",
        groups.to_str().unwrap(),
        "--categories",
        categories.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    // full mode: 2 ordered pairs x 4 relations.
    assert_eq!(std::fs::read_to_string(&groups).unwrap().lines().count(), 8);

    // A flag still beats the file.
    let output = scop(&[
        "prompts",
        "--out",
        groups.to_str().unwrap(),
        "--categories",
        categories.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--mode",
        "paper",
    ]);
    assert!(output.status.success());
    assert_eq!(std::fs::read_to_string(&groups).unwrap().lines().count(), 2);

    // conf_threshold 0.95 hides the 0.9/0.8 detections below.
    let detections = dir.path().join("det.jsonl");
    let mut lines = String::new();
    for idx in 0..4 {
        lines.push_str(&format!(
            r#"{{"prompt_id":"p0","image_index":{idx},"expected":{{"a":"dog","relation":"left","b":"cat"}},"detections":[{{"category":"dog","bbox":{{"x":0,"y":0,"w":10,"h":10}},"confidence":0.9}},{{"category":"cat","bbox":{{"x":50,"y":0,"w":10,"h":10}},"confidence":0.8}}]}}"#
        ));
        lines.push('\n');
    }
    std::fs::write(&detections, lines).unwrap();
    let out = dir.path().join("visor.json");
    let output = scop(&[
        "visor",
        "--detections",
        detections.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let scores: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(scores["oa"], 0.0);
}

#[test]
fn tenor_check_rejects_degenerate_sizes() {
    assert!(!scop(&["tenor-check", "--tokens", "1"]).status.success());
    assert!(!scop(&["tenor-check", "--model-dim", "0"]).status.success());
}
