//! Sweep the weighting parameter over its usual sqrt(alpha) axis on a
//! synthetic manifest and print the resulting table.
//!
//! ```bash
//! cargo run -p groundkit --example sweep_alpha
//! ```

use std::path::{Path, PathBuf};

use groundkit::bundleio::{
    write_bundle, write_manifest, write_proposals, Proposal, ProposalSet, SampleRecord,
};
use groundkit::eval::{render_sweep_table, sweep, PipelineConfig, SweepGrid};
use groundkit::geometry::BoundingBox;
use groundkit::heatmap::{Heatmap, HeatmapStack, TokenInfo};

const QUERY_CONLLU: &str = "\
1\twomen\twoman\t_\t_\t_\t0\troot\t_\t_
2\tunder\tunder\t_\t_\t_\t1\tprep\t_\t_
3\tpink\tpink\t_\t_\t_\t4\tamod\t_\t_
4\tumbrella\tumbrella\t_\t_\t_\t2\tpobj\t_\t_
";

/// Samples vary in how strongly the sub-object tokens dominate, so the
/// accuracy changes along the alpha axis instead of jumping in one step.
fn write_sample(root: &Path, index: usize, sub_strength: f64) -> (SampleRecord, ProposalSet) {
    let grid = 10;
    let image = 100u32;
    let cell = image as f64 / grid as f64;
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
    let block = |cells: std::ops::Range<usize>, value: f64| {
        let mut vals = vec![0.0; grid * grid];
        for y in cells.clone() {
            for x in cells.clone() {
                vals[y * grid + x] = value;
            }
        }
        Heatmap::new(grid, grid, vals, cell, cell).unwrap()
    };
    let maps = vec![
        block(1..4, 1.0),
        block(6..9, sub_strength * 0.5),
        block(6..9, sub_strength * 0.6),
        block(6..9, sub_strength),
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
                confidence: None,
            },
            Proposal {
                bbox: sub_box,
                confidence: None,
            },
        ],
    };
    (record, proposals)
}

fn main() {
    let root: PathBuf = tempfile::tempdir().unwrap().keep();
    std::fs::create_dir_all(root.join("bundles")).unwrap();
    std::fs::create_dir_all(root.join("parses")).unwrap();

    // sub-object strengths straddle the decision boundaries of the axis
    let strengths = [0.3, 0.5, 0.8, 1.2, 1.0, 0.9, 0.45, 0.7];
    let (records, proposal_sets): (Vec<_>, Vec<_>) = strengths
        .iter()
        .enumerate()
        .map(|(i, s)| write_sample(&root, i, *s))
        .unzip();
    let manifest = root.join("manifest.jsonl");
    let proposals = root.join("proposals.jsonl");
    write_manifest(&records, &manifest).unwrap();
    write_proposals(&proposal_sets, &proposals).unwrap();

    let grid = SweepGrid::over_sqrt_alphas(vec![1.0, 0.8, 0.6, 0.4, 0.2]);
    let cfg = PipelineConfig::default();
    let report = sweep(&grid, &manifest, &proposals, &cfg, 1).unwrap();

    print!("{}", render_sweep_table(&report));
    println!();
    for cell in &report.cells {
        println!(
            "sqrt_alpha {:.1} (alpha {:.2}): accuracy {:.3}",
            cell.sqrt_alpha,
            cell.alpha,
            cell.accuracy.unwrap()
        );
    }
    println!("\nthe same sweep, scripted: groundkit sweep --manifest ... --proposals ... --sqrt-alpha 1.0,0.8,0.6,0.4,0.2 --out table.json");
}
