//! End-to-end exercises of the command-line surface: exit codes, config
//! file layering, and the data each subcommand writes.

mod common;

use std::path::Path;

use common::{main_sub_scenario, random_scenario, threshold_scenario};
use groundkit::bundleio::{read_bundle, read_crop_plans, read_report};
use groundkit::depparse::WeightVector;
use groundkit::eval::SweepReport;

fn run_cli(args: &[&str]) -> i32 {
    groundkit::cli::run(args.iter().map(|s| s.to_string()))
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn eval_writes_report_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, proposals) = threshold_scenario(dir.path());
    let out = dir.path().join("report.json");
    let code = run_cli(&[
        "groundkit",
        "eval",
        "--manifest",
        s(&manifest),
        "--proposals",
        s(&proposals),
        "--alpha",
        "0.16",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0);
    let report = read_report(&out).unwrap();
    assert_eq!(report.accuracy, 0.5);
    assert_eq!(report.config.alpha, 0.16);
    assert!((report.config.sqrt_alpha - 0.4).abs() < 1e-12);
}

#[test]
fn unknown_subcommand_exits_one() {
    assert_eq!(run_cli(&["groundkit", "frobnicate"]), 1);
}

#[test]
fn unknown_flag_exits_one() {
    assert_eq!(run_cli(&["groundkit", "eval", "--no-such-flag"]), 1);
}

#[test]
fn conflicting_alpha_flags_exit_one() {
    assert_eq!(
        run_cli(&[
            "groundkit",
            "eval",
            "--alpha",
            "0.16",
            "--sqrt-alpha",
            "0.4"
        ]),
        1
    );
}

#[test]
fn missing_manifest_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let (_, proposals) = threshold_scenario(dir.path());
    assert_eq!(
        run_cli(&["groundkit", "eval", "--proposals", s(&proposals)]),
        1
    );
    assert_eq!(
        run_cli(&[
            "groundkit",
            "eval",
            "--manifest",
            s(&dir.path().join("nope.jsonl")),
            "--proposals",
            s(&proposals),
        ]),
        1
    );
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run_cli(&["groundkit", "--help"]), 0);
    assert_eq!(run_cli(&["groundkit", "--version"]), 0);
    assert_eq!(run_cli(&["groundkit", "eval", "--help"]), 0);
}

#[test]
fn combine_is_rerun_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let fx = main_sub_scenario(dir.path());
    let bundle = dir.path().join("bundles/mainsub.hmb");
    let parse = dir.path().join("parses/mainsub.conllu");
    let out1 = dir.path().join("fused1.hmb");
    let out2 = dir.path().join("fused2.hmb");
    for out in [&out1, &out2] {
        let code = run_cli(&[
            "groundkit",
            "combine",
            "--bundle",
            s(&bundle),
            "--parses",
            s(&parse),
            "--sqrt-alpha",
            "0.4",
            "--out",
            s(out),
        ]);
        assert_eq!(code, 0);
    }
    let a = std::fs::read(&out1).unwrap();
    let b = std::fs::read(&out2).unwrap();
    assert_eq!(a, b);

    let fused = read_bundle(&out1).unwrap();
    assert_eq!(fused.token_count(), 1);
    assert_eq!(fused.query(), "women under pink umbrella");
    let _ = fx;
}

#[test]
fn combine_weighted_differs_from_uniform() {
    let dir = tempfile::tempdir().unwrap();
    main_sub_scenario(dir.path());
    let bundle = dir.path().join("bundles/mainsub.hmb");
    let parse = dir.path().join("parses/mainsub.conllu");
    let weighted = dir.path().join("weighted.hmb");
    let uniform = dir.path().join("uniform.hmb");
    assert_eq!(
        run_cli(&[
            "groundkit",
            "combine",
            "--bundle",
            s(&bundle),
            "--parses",
            s(&parse),
            "--alpha",
            "0.16",
            "--out",
            s(&weighted),
        ]),
        0
    );
    assert_eq!(
        run_cli(&[
            "groundkit",
            "combine",
            "--bundle",
            s(&bundle),
            "--weighting",
            "off",
            "--out",
            s(&uniform),
        ]),
        0
    );
    assert_ne!(
        std::fs::read(&weighted).unwrap(),
        std::fs::read(&uniform).unwrap()
    );
}

#[test]
fn combine_without_weight_source_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    main_sub_scenario(dir.path());
    let bundle = dir.path().join("bundles/mainsub.hmb");
    let out = dir.path().join("fused.hmb");
    // weighting defaults on and neither --weights nor --parses is given
    assert_eq!(
        run_cli(&[
            "groundkit",
            "combine",
            "--bundle",
            s(&bundle),
            "--out",
            s(&out)
        ]),
        1
    );
    assert!(!out.exists(), "no output may be written on input errors");
}

#[test]
fn combine_accepts_weights_file() {
    let dir = tempfile::tempdir().unwrap();
    main_sub_scenario(dir.path());
    let bundle = dir.path().join("bundles/mainsub.hmb");
    let weights_path = dir.path().join("weights.json");
    let wv = WeightVector::from_raw(vec![1.0, 0.16, 0.16, 0.16], 0.16, 1, false);
    std::fs::write(&weights_path, serde_json::to_string(&wv).unwrap()).unwrap();
    let from_file = dir.path().join("fromfile.hmb");
    let from_parse = dir.path().join("fromparse.hmb");
    assert_eq!(
        run_cli(&[
            "groundkit",
            "combine",
            "--bundle",
            s(&bundle),
            "--weights",
            s(&weights_path),
            "--out",
            s(&from_file),
        ]),
        0
    );
    let parse = dir.path().join("parses/mainsub.conllu");
    assert_eq!(
        run_cli(&[
            "groundkit",
            "combine",
            "--bundle",
            s(&bundle),
            "--parses",
            s(&parse),
            "--alpha",
            "0.16",
            "--out",
            s(&from_parse),
        ]),
        0
    );
    // the explicit weight file spells exactly what the parse derives
    assert_eq!(
        std::fs::read(&from_file).unwrap(),
        std::fs::read(&from_parse).unwrap()
    );
}

#[test]
fn rank_reports_ordered_proposals() {
    let dir = tempfile::tempdir().unwrap();
    let fx = main_sub_scenario(dir.path());
    let bundle = dir.path().join("bundles/mainsub.hmb");
    let parse = dir.path().join("parses/mainsub.conllu");
    let out = dir.path().join("ranked.json");
    let code = run_cli(&[
        "groundkit",
        "rank",
        "--bundle",
        s(&bundle),
        "--proposals",
        s(&fx.proposals),
        "--parses",
        s(&parse),
        "--alpha",
        "0.16",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0);
    let ranked: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(ranked["image_id"], "img-mainsub");
    assert_eq!(ranked["proposals"][0]["index"], fx.main_index);
    assert_eq!(ranked["proposals"][0]["rank"], 0);
    assert_eq!(ranked["proposals"].as_array().unwrap().len(), 2);

    // uniform fusion flips the winner
    let out_uniform = dir.path().join("ranked-uniform.json");
    let code = run_cli(&[
        "groundkit",
        "rank",
        "--bundle",
        s(&bundle),
        "--proposals",
        s(&fx.proposals),
        "--weighting",
        "off",
        "--out",
        s(&out_uniform),
    ]);
    assert_eq!(code, 0);
    let ranked: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_uniform).unwrap()).unwrap();
    assert_eq!(ranked["proposals"][0]["index"], fx.sub_index);
}

#[test]
fn rank_requires_image_id_on_multi_image_files() {
    let dir = tempfile::tempdir().unwrap();
    let (_, proposals) = threshold_scenario(dir.path());
    let bundle = dir.path().join("bundles/iou090.hmb");
    let out = dir.path().join("ranked.json");
    assert_eq!(
        run_cli(&[
            "groundkit",
            "rank",
            "--bundle",
            s(&bundle),
            "--proposals",
            s(&proposals),
            "--weighting",
            "off",
            "--out",
            s(&out)
        ]),
        1,
        "four image ids in the file, none chosen"
    );
    assert_eq!(
        run_cli(&[
            "groundkit",
            "rank",
            "--bundle",
            s(&bundle),
            "--proposals",
            s(&proposals),
            "--image-id",
            "img-iou090",
            "--weighting",
            "off",
            "--out",
            s(&out)
        ]),
        0
    );
}

#[test]
fn crop_plan_baseline_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, proposals) = random_scenario(dir.path(), 6, 5, 1.0);
    let out = dir.path().join("plans.jsonl");
    let code = run_cli(&[
        "groundkit",
        "crop-plan",
        "--manifest",
        s(&manifest),
        "--proposals",
        s(&proposals),
        "--gamma-min",
        "1.0",
        "--seed",
        "9",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0);
    let plans = read_crop_plans(&out).unwrap();
    assert_eq!(plans.len(), 6);
    for p in &plans {
        assert_eq!(p.gamma, 1.0);
        assert_eq!((p.rect.x, p.rect.y, p.rect.w, p.rect.h), (0, 0, 100, 100));
        assert!(p.transform.is_identity());
    }
}

#[test]
fn crop_plan_windows_contain_detected_boxes() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, proposals) = random_scenario(dir.path(), 8, 15, 1.0);
    let out = dir.path().join("plans.jsonl");
    let code = run_cli(&[
        "groundkit",
        "crop-plan",
        "--manifest",
        s(&manifest),
        "--proposals",
        s(&proposals),
        "--gamma-min",
        "0.2",
        "--seed",
        "4",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0);
    for p in read_crop_plans(&out).unwrap() {
        assert!(p.gamma >= 0.2 && p.gamma <= 1.0);
        assert!(p.rect.to_box().contains(&p.detected));
        assert_eq!(p.gamma_min, 0.2);
        assert_eq!(p.seed, 4);
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, proposals) = threshold_scenario(dir.path());
    let config = dir.path().join("run.json");
    std::fs::write(
        &config,
        format!(
            "{{\"manifest\": {:?}, \"proposals\": {:?}, \"sqrt_alpha\": 0.8, \"seed\": 11}}",
            s(&manifest),
            s(&proposals)
        ),
    )
    .unwrap();
    let out = dir.path().join("report.json");

    // config alone
    assert_eq!(
        run_cli(&[
            "groundkit",
            "eval",
            "--config",
            s(&config),
            "--out",
            s(&out)
        ]),
        0
    );
    let report = read_report(&out).unwrap();
    assert!((report.config.alpha - 0.64).abs() < 1e-12);
    assert_eq!(report.config.seed, 11);

    // flag overrides the config's sqrt_alpha
    assert_eq!(
        run_cli(&[
            "groundkit",
            "eval",
            "--config",
            s(&config),
            "--alpha",
            "0.16",
            "--out",
            s(&out)
        ]),
        0
    );
    let report = read_report(&out).unwrap();
    assert_eq!(report.config.alpha, 0.16);
    assert_eq!(
        report.config.seed, 11,
        "untouched config fields still apply"
    );
}

#[test]
fn config_file_rejects_unknown_fields() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(&config, "{\"no_such_option\": 1}").unwrap();
    assert_eq!(run_cli(&["groundkit", "eval", "--config", s(&config)]), 1);
}

#[test]
fn sweep_marks_unresolvable_cells_and_fills_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, proposals) = random_scenario(dir.path(), 6, 21, 1.0);
    let out = dir.path().join("sweep.json");
    let code = run_cli(&[
        "groundkit",
        "sweep",
        "--manifest",
        s(&manifest),
        "--proposals",
        s(&proposals),
        "--sqrt-alpha",
        "1.0,0.4",
        "--gamma-min",
        "1.0,0.5",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0, "one unresolvable row must not fail the sweep");
    let report: SweepReport =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report.cells.len(), 4);
    for cell in &report.cells {
        if cell.gamma_min == 1.0 {
            assert!(cell.accuracy.is_some());
            assert!(cell.error.is_none());
        } else {
            assert!(cell.accuracy.is_none());
            let msg = cell.error.as_deref().unwrap();
            assert!(
                msg.contains("artifacts"),
                "cell error names the missing artifacts: {msg}"
            );
        }
    }
}

#[test]
fn sweep_accepts_per_cell_manifests_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, proposals) = random_scenario(dir.path(), 6, 22, 1.0);
    // a second manifest stands in for externally produced artifacts of a
    // cropped run
    let alt_dir = dir.path().join("cropped");
    std::fs::create_dir_all(&alt_dir).unwrap();
    let (alt_manifest, _) = random_scenario(&alt_dir, 6, 23, 1.0);
    let config = dir.path().join("grid.json");
    std::fs::write(
        &config,
        format!(
            "{{\"gamma_cells\": [{{\"gamma_min\": 1.0}}, {{\"gamma_min\": 0.5, \"manifest\": {:?}}}], \"sqrt_alphas\": [0.4]}}",
            s(&alt_manifest)
        ),
    )
    .unwrap();
    let out = dir.path().join("sweep.json");
    let code = run_cli(&[
        "groundkit",
        "sweep",
        "--manifest",
        s(&manifest),
        "--proposals",
        s(&proposals),
        "--config",
        s(&config),
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0);
    let report: SweepReport =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report.cells.len(), 2);
    assert!(
        report.cells.iter().all(|c| c.accuracy.is_some()),
        "both rows resolve"
    );
}

#[test]
fn render_writes_deterministic_ppm() {
    let dir = tempfile::tempdir().unwrap();
    main_sub_scenario(dir.path());
    let bundle = dir.path().join("bundles/mainsub.hmb");
    let parse = dir.path().join("parses/mainsub.conllu");
    let out1 = dir.path().join("overlay1.ppm");
    let out2 = dir.path().join("overlay2.ppm");
    for out in [&out1, &out2] {
        let code = run_cli(&[
            "groundkit",
            "render",
            "--bundle",
            s(&bundle),
            "--parses",
            s(&parse),
            "--alpha",
            "0.16",
            "--pred-box",
            "10,10,40,40",
            "--gt-box",
            "10,10,40,40",
            "--out",
            s(out),
        ]);
        assert_eq!(code, 0);
    }
    let a = std::fs::read(&out1).unwrap();
    assert_eq!(a, std::fs::read(&out2).unwrap());
    assert!(a.starts_with(b"P6\n100 100\n255\n"));
}

#[test]
fn render_rejects_malformed_box_flag() {
    let dir = tempfile::tempdir().unwrap();
    main_sub_scenario(dir.path());
    let bundle = dir.path().join("bundles/mainsub.hmb");
    let out = dir.path().join("overlay.ppm");
    assert_eq!(
        run_cli(&[
            "groundkit",
            "render",
            "--bundle",
            s(&bundle),
            "--weighting",
            "off",
            "--pred-box",
            "10,10,40",
            "--out",
            s(&out),
        ]),
        1
    );
}

#[test]
fn eval_excludes_broken_samples_from_the_denominator() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, proposals) = random_scenario(dir.path(), 5, 33, 1.0);
    // truncate one bundle on disk
    let victim = dir.path().join("bundles/s002.hmb");
    let bytes = std::fs::read(&victim).unwrap();
    std::fs::write(&victim, &bytes[..bytes.len() - 7]).unwrap();

    let out = dir.path().join("report.json");
    let code = run_cli(&[
        "groundkit",
        "eval",
        "--manifest",
        s(&manifest),
        "--proposals",
        s(&proposals),
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0, "a broken sample must not fail the run");
    let report = read_report(&out).unwrap();
    assert_eq!(report.sample_count, 4);
    assert_eq!(report.errored_count, 1);
    assert_eq!(report.errors.len(), 1);
    assert_eq!(report.errors[0].sample_id, "s002");
    assert!(report.errors[0].error.contains("truncated"));
    assert_eq!(report.accuracy, report.correct_count as f64 / 4.0);
}

#[test]
fn eval_marks_alignment_failures_as_errored() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, proposals) = random_scenario(dir.path(), 3, 66, 1.0);
    // a parse whose words cannot be assembled from the bundle's tokens
    std::fs::write(
        dir.path().join("parses/s001.conllu"),
        "1\tkitten\t_\t_\t_\t_\t0\troot\t_\t_\n",
    )
    .unwrap();
    let out = dir.path().join("report.json");
    let code = run_cli(&[
        "groundkit",
        "eval",
        "--manifest",
        s(&manifest),
        "--proposals",
        s(&proposals),
        "--weighting",
        "on",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0);
    let report = read_report(&out).unwrap();
    assert_eq!(report.errored_count, 1);
    assert_eq!(report.errors[0].sample_id, "s001");
    assert!(
        report.errors[0].error.contains("alignment"),
        "{}",
        report.errors[0].error
    );
    // the uniform path never touches the parse, so nothing fails there
    let code = run_cli(&[
        "groundkit",
        "eval",
        "--manifest",
        s(&manifest),
        "--proposals",
        s(&proposals),
        "--weighting",
        "off",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0);
    assert_eq!(read_report(&out).unwrap().errored_count, 0);
}

#[test]
fn crop_plan_fails_fast_on_broken_samples() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, proposals) = random_scenario(dir.path(), 3, 44, 1.0);
    let victim = dir.path().join("bundles/s001.hmb");
    let bytes = std::fs::read(&victim).unwrap();
    std::fs::write(&victim, &bytes[..10]).unwrap();
    let out = dir.path().join("plans.jsonl");
    assert_eq!(
        run_cli(&[
            "groundkit",
            "crop-plan",
            "--manifest",
            s(&manifest),
            "--proposals",
            s(&proposals),
            "--out",
            s(&out),
        ]),
        1,
        "crop plans are consumed positionally, so a broken sample fails the run"
    );
}
