//! Synthetic dataset builders shared by the integration suites.
#![allow(dead_code)] // each test binary uses a different subset

use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use groundkit::bundleio::{
    write_bundle, write_manifest, write_proposals, Proposal, ProposalSet, SampleRecord,
};
use groundkit::geometry::BoundingBox;
use groundkit::heatmap::{Heatmap, HeatmapStack, TokenInfo};

pub struct SampleSpec {
    pub sample_id: String,
    pub image_id: String,
    pub image_w: u32,
    pub image_h: u32,
    pub query: String,
    pub gt: BoundingBox,
    pub stack: HeatmapStack,
    pub conllu: String,
    pub proposals: Vec<BoundingBox>,
}

/// Writes bundles, parses, a manifest and a proposal file under `root`.
/// Returns the manifest and proposal paths.
pub fn write_dataset(root: &Path, specs: &[SampleSpec]) -> (PathBuf, PathBuf) {
    std::fs::create_dir_all(root.join("bundles")).unwrap();
    std::fs::create_dir_all(root.join("parses")).unwrap();
    let mut records = Vec::new();
    let mut proposal_sets: Vec<ProposalSet> = Vec::new();
    for spec in specs {
        let bundle_rel = format!("bundles/{}.hmb", spec.sample_id);
        let parse_rel = format!("parses/{}.conllu", spec.sample_id);
        write_bundle(&spec.stack, root.join(&bundle_rel)).unwrap();
        std::fs::write(root.join(&parse_rel), &spec.conllu).unwrap();
        records.push(SampleRecord {
            sample_id: spec.sample_id.clone(),
            image_id: spec.image_id.clone(),
            image_width: spec.image_w,
            image_height: spec.image_h,
            query: spec.query.clone(),
            gt_box: spec.gt,
            bundle: bundle_rel,
            parse: parse_rel,
        });
        if !proposal_sets.iter().any(|s| s.image_id == spec.image_id) {
            proposal_sets.push(ProposalSet {
                image_id: spec.image_id.clone(),
                boxes: spec
                    .proposals
                    .iter()
                    .map(|b| Proposal {
                        bbox: *b,
                        confidence: None,
                    })
                    .collect(),
            });
        }
    }
    let manifest = root.join("manifest.jsonl");
    let proposals = root.join("proposals.jsonl");
    write_manifest(&records, &manifest).unwrap();
    write_proposals(&proposal_sets, &proposals).unwrap();
    (manifest, proposals)
}

pub fn grid_map(values: Vec<f64>, grid: usize, image: u32) -> Heatmap {
    let cell = image as f64 / grid as f64;
    Heatmap::new(grid, grid, values, cell, cell).unwrap()
}

/// Single-token stack with a constant heatmap; parses as the one-word query
/// `object`.
pub fn constant_object_stack(grid: usize, image: u32) -> HeatmapStack {
    let map = grid_map(vec![1.0; grid * grid], grid, image);
    HeatmapStack::new(
        vec![map],
        vec![TokenInfo::word("object")],
        "object",
        "##",
        image,
        image,
    )
    .unwrap()
}

pub const OBJECT_CONLLU: &str = "1\tobject\t_\t_\t_\t_\t0\troot\t_\t_\n";

/// Four samples whose single proposal overlaps ground truth at IoU
/// 0.9, 0.51, 0.5 and 0.1 exactly.
pub fn threshold_scenario(root: &Path) -> (PathBuf, PathBuf) {
    let cases: Vec<(&str, BoundingBox, BoundingBox)> = vec![
        ("iou090", bb(0.0, 0.0, 10.0, 9.0), bb(0.0, 0.0, 10.0, 10.0)),
        (
            "iou051",
            bb(0.0, 0.0, 100.0, 51.0),
            bb(0.0, 0.0, 100.0, 100.0),
        ),
        ("iou050", bb(0.0, 0.0, 10.0, 5.0), bb(0.0, 0.0, 10.0, 10.0)),
        ("iou010", bb(0.0, 0.0, 10.0, 1.0), bb(0.0, 0.0, 10.0, 10.0)),
    ];
    let specs: Vec<SampleSpec> = cases
        .into_iter()
        .map(|(id, proposal, gt)| SampleSpec {
            sample_id: id.to_string(),
            image_id: format!("img-{id}"),
            image_w: 100,
            image_h: 100,
            query: "object".to_string(),
            gt,
            stack: constant_object_stack(10, 100),
            conllu: OBJECT_CONLLU.to_string(),
            proposals: vec![proposal],
        })
        .collect();
    write_dataset(root, &specs)
}

pub fn bb(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
    BoundingBox::new(x1, y1, x2, y2).unwrap()
}

/// The main-object / sub-object construction: the sub-object tokens
/// dominate the uniform mean while the root word's map alone marks the main
/// object.
pub struct MainSubFixture {
    pub manifest: PathBuf,
    pub proposals: PathBuf,
    /// included (non-special) token grids in token order, 10x10 row-major
    pub token_grids: Vec<Vec<f64>>,
    /// proposal boxes in file order: [main, sub]
    pub boxes: Vec<BoundingBox>,
    pub main_index: usize,
    pub sub_index: usize,
    pub grid: usize,
    pub image: u32,
}

pub fn main_sub_scenario(root: &Path) -> MainSubFixture {
    let grid = 10usize;
    let image = 100u32;
    let main_box = bb(10.0, 10.0, 40.0, 40.0); // cells (1..4, 1..4)
    let sub_box = bb(60.0, 60.0, 90.0, 90.0); // cells (6..9, 6..9)

    let block = |cells: std::ops::Range<usize>, value: f64| -> Vec<f64> {
        let mut vals = vec![0.0; grid * grid];
        for y in cells.clone() {
            for x in cells.clone() {
                vals[y * grid + x] = value;
            }
        }
        vals
    };
    // root word lights the main region; the other words pile onto the sub
    // region so the plain mean prefers it
    let token_grids = vec![
        block(1..4, 1.0), // women
        block(6..9, 0.4), // under
        block(6..9, 0.5), // pink
        block(6..9, 0.8), // umbrella
    ];

    let words = ["women", "under", "pink", "umbrella"];
    let mut maps = vec![grid_map(vec![0.0; grid * grid], grid, image)];
    let mut tokens = vec![TokenInfo::special("[CLS]")];
    for (w, vals) in words.iter().zip(&token_grids) {
        maps.push(grid_map(vals.clone(), grid, image));
        tokens.push(TokenInfo::word(*w));
    }
    maps.push(grid_map(vec![0.0; grid * grid], grid, image));
    tokens.push(TokenInfo::special("[SEP]"));
    let stack = HeatmapStack::new(
        maps,
        tokens,
        "women under pink umbrella",
        "##",
        image,
        image,
    )
    .unwrap();

    let conllu = "\
1\twomen\t_\t_\t_\t_\t0\troot\t_\t_
2\tunder\t_\t_\t_\t_\t1\tprep\t_\t_
3\tpink\t_\t_\t_\t_\t4\tamod\t_\t_
4\tumbrella\t_\t_\t_\t_\t2\tpobj\t_\t_
";
    let spec = SampleSpec {
        sample_id: "mainsub".to_string(),
        image_id: "img-mainsub".to_string(),
        image_w: image,
        image_h: image,
        query: "women under pink umbrella".to_string(),
        gt: main_box,
        stack,
        conllu: conllu.to_string(),
        proposals: vec![main_box, sub_box],
    };
    let (manifest, proposals) = write_dataset(root, &[spec]);
    MainSubFixture {
        manifest,
        proposals,
        token_grids,
        boxes: vec![main_box, sub_box],
        main_index: 0,
        sub_index: 1,
        grid,
        image,
    }
}

/// `n` random samples over 100x100 images with a 10x10 grid, 4 proposals
/// each, fully determined by `seed`. `scale` multiplies every heatmap value
/// (in f32, as the wire format would).
pub fn random_scenario(root: &Path, n: usize, seed: u64, scale: f32) -> (PathBuf, PathBuf) {
    let mut rng = StdRng::seed_from_u64(seed);
    let grid = 10usize;
    let image = 100u32;
    let conllu = "\
1\tball\t_\t_\t_\t_\t0\troot\t_\t_
2\ton\t_\t_\t_\t_\t1\tprep\t_\t_
3\ttable\t_\t_\t_\t_\t2\tpobj\t_\t_
";
    let mut specs = Vec::with_capacity(n);
    for i in 0..n {
        let words = ["ball", "on", "table"];
        let mut maps = vec![grid_map(vec![0.0; grid * grid], grid, image)];
        let mut tokens = vec![TokenInfo::special("[CLS]")];
        for w in words {
            let vals: Vec<f64> = (0..grid * grid)
                .map(|_| (rng.gen::<f32>() * scale) as f64)
                .collect();
            maps.push(grid_map(vals, grid, image));
            tokens.push(TokenInfo::word(w));
        }
        maps.push(grid_map(vec![0.0; grid * grid], grid, image));
        tokens.push(TokenInfo::special("[SEP]"));
        let stack = HeatmapStack::new(maps, tokens, "ball on table", "##", image, image).unwrap();

        let proposals: Vec<BoundingBox> = (0..4)
            .map(|_| {
                let x1: f64 = rng.gen_range(0.0..70.0);
                let y1: f64 = rng.gen_range(0.0..70.0);
                let w: f64 = rng.gen_range(10.0..30.0);
                let h: f64 = rng.gen_range(10.0..30.0);
                bb(x1, y1, x1 + w, y1 + h)
            })
            .collect();
        let gt = proposals[rng.gen_range(0..proposals.len())];
        specs.push(SampleSpec {
            sample_id: format!("s{i:03}"),
            image_id: format!("img{i:03}"),
            image_w: image,
            image_h: image,
            query: "ball on table".to_string(),
            gt,
            stack,
            conllu: conllu.to_string(),
            proposals,
        });
    }
    write_dataset(root, &specs)
}
