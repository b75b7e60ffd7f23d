//! Render a fused heatmap as a colorized PPM with the predicted box
//! (yellow) and ground truth (red) outlined, the usual qualitative view of
//! a grounding result.
//!
//! ```bash
//! cargo run -p groundkit --example render_overlay
//! ```

use groundkit::geometry::BoundingBox;
use groundkit::heatmap::{rank_proposals, Heatmap};
use groundkit::render::{render_overlay, write_ppm};

fn main() {
    // fused heatmap with a hot region in the upper-left quadrant
    let grid = 16;
    let mut vals = vec![0.08; grid * grid];
    for y in 2..6 {
        for x in 2..6 {
            vals[y * grid + x] = 0.9;
        }
    }
    // soft falloff ring around the hot block
    for y in 1..7 {
        for x in 1..7 {
            if vals[y * grid + x] < 0.5 {
                vals[y * grid + x] = 0.35;
            }
        }
    }
    let image = 160u32;
    let cell = image as f64 / grid as f64;
    let heat = Heatmap::new(grid, grid, vals, cell, cell).unwrap();

    let proposals = vec![
        BoundingBox::new(15.0, 15.0, 65.0, 65.0).unwrap(),
        BoundingBox::new(90.0, 90.0, 150.0, 150.0).unwrap(),
        BoundingBox::new(0.0, 80.0, 70.0, 155.0).unwrap(),
    ];
    let ranked = rank_proposals(&heat, &proposals).unwrap();
    let prediction = ranked[0].bbox;
    let ground_truth = BoundingBox::new(18.0, 12.0, 60.0, 58.0).unwrap();

    let canvas = render_overlay(
        &heat,
        image,
        image,
        Some(&prediction),
        Some(&ground_truth),
        None,
    )
    .unwrap();
    let out = std::env::temp_dir().join("groundkit-overlay.ppm");
    write_ppm(&canvas, &out).unwrap();

    println!(
        "prediction: proposal {} with score {:.3}",
        ranked[0].index, ranked[0].score
    );
    println!("overlay written to {}", out.display());
    println!(
        "view it with any PPM-capable viewer, or convert: magick {} overlay.png",
        out.display()
    );
}
