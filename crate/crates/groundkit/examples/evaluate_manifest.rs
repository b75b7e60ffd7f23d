//! Build a small on-disk dataset (bundles, parses, proposals, manifest),
//! then evaluate it with and without dependency weighting and compare the
//! reports.
//!
//! ```bash
//! cargo run -p groundkit --example evaluate_manifest
//! ```

use std::path::{Path, PathBuf};

use groundkit::bundleio::{
    write_bundle, write_manifest, write_proposals, Proposal, ProposalSet, SampleRecord,
};
use groundkit::eval::{evaluate_manifest, PipelineConfig};
use groundkit::geometry::BoundingBox;
use groundkit::heatmap::{Heatmap, HeatmapStack, TokenInfo};

const QUERY_CONLLU: &str = "\
1\twomen\twoman\t_\t_\t_\t0\troot\t_\t_
2\tunder\tunder\t_\t_\t_\t1\tprep\t_\t_
3\tpink\tpink\t_\t_\t_\t4\tamod\t_\t_
4\tumbrella\tumbrella\t_\t_\t_\t2\tpobj\t_\t_
";

fn block_map(grid: usize, cells: std::ops::Range<usize>, value: f64, image: u32) -> Heatmap {
    let mut vals = vec![0.0; grid * grid];
    for y in cells.clone() {
        for x in cells.clone() {
            vals[y * grid + x] = value;
        }
    }
    let cell = image as f64 / grid as f64;
    Heatmap::new(grid, grid, vals, cell, cell).unwrap()
}

/// One sample where the sub-object tokens dominate the plain mean: the
/// uniform pipeline picks the wrong box, the weighted one recovers.
fn write_sample(root: &Path, index: usize) -> (SampleRecord, ProposalSet) {
    let grid = 10;
    let image = 100u32;
    let main_box = BoundingBox {
        x1: 10.0,
        y1: 10.0,
        x2: 40.0,
        y2: 40.0,
    };
    let sub_box = BoundingBox {
        x1: 60.0,
        y1: 60.0,
        x2: 90.0,
        y2: 90.0,
    };
    let maps = vec![
        block_map(grid, 1..4, 1.0, image), // women  (root)
        block_map(grid, 6..9, 0.4, image), // under
        block_map(grid, 6..9, 0.5, image), // pink
        block_map(grid, 6..9, 0.8, image), // umbrella
    ];
    let tokens = ["women", "under", "pink", "umbrella"]
        .map(TokenInfo::word)
        .to_vec();
    let stack = HeatmapStack::new(
        maps,
        tokens,
        "women under pink umbrella",
        "##",
        image,
        image,
    )
    .unwrap();

    let sample_id = format!("sample-{index:02}");
    let image_id = format!("image-{index:02}");
    let bundle = format!("bundles/{sample_id}.hmb");
    let parse = format!("parses/{sample_id}.conllu");
    write_bundle(&stack, root.join(&bundle)).unwrap();
    std::fs::write(root.join(&parse), QUERY_CONLLU).unwrap();

    let record = SampleRecord {
        sample_id,
        image_id: image_id.clone(),
        image_width: image,
        image_height: image,
        query: "women under pink umbrella".to_string(),
        gt_box: main_box,
        bundle,
        parse,
    };
    let proposals = ProposalSet {
        image_id,
        boxes: vec![
            Proposal {
                bbox: main_box,
                confidence: Some(0.8),
            },
            Proposal {
                bbox: sub_box,
                confidence: Some(0.9),
            },
        ],
    };
    (record, proposals)
}

fn main() {
    let root: PathBuf = tempfile::tempdir().unwrap().keep();
    std::fs::create_dir_all(root.join("bundles")).unwrap();
    std::fs::create_dir_all(root.join("parses")).unwrap();

    let (records, proposal_sets): (Vec<_>, Vec<_>) = (0..4).map(|i| write_sample(&root, i)).unzip();
    let manifest = root.join("manifest.jsonl");
    let proposals = root.join("proposals.jsonl");
    write_manifest(&records, &manifest).unwrap();
    write_proposals(&proposal_sets, &proposals).unwrap();
    println!("dataset written under {}\n", root.display());

    for (label, weighting) in [("uniform fusion", false), ("weighted fusion", true)] {
        let cfg = PipelineConfig {
            weighting,
            alpha: 0.16,
            ..Default::default()
        };
        let report = evaluate_manifest(&manifest, &proposals, &cfg, 1).unwrap();
        println!(
            "{label}: accuracy {:.2} ({}/{} correct, {} errored)",
            report.accuracy, report.correct_count, report.sample_count, report.errored_count
        );
        for s in &report.samples {
            println!(
                "  {}: picked proposal {} (IoU {:.2}, {})",
                s.sample_id,
                s.chosen_index,
                s.best_iou,
                if s.correct { "correct" } else { "wrong" }
            );
        }
    }
    println!("\nfull report JSON comes from: groundkit eval --manifest ... --proposals ... --out report.json");
}
