//! Fuse a stack of per-token heatmaps two ways: as a plain mean and as a
//! root-weighted mean, and show how the weighting shifts the hot region
//! from a sub object onto the main object.
//!
//! ```bash
//! cargo run -p groundkit --example fuse_heatmaps
//! ```

use groundkit::depparse::WeightVector;
use groundkit::heatmap::{combine_uniform, combine_weighted, Heatmap, HeatmapStack, TokenInfo};

fn block_map(grid: usize, cells: std::ops::Range<usize>, value: f64) -> Heatmap {
    let mut vals = vec![0.0; grid * grid];
    for y in cells.clone() {
        for x in cells.clone() {
            vals[y * grid + x] = value;
        }
    }
    Heatmap::new(grid, grid, vals, 10.0, 10.0).unwrap()
}

fn print_map(label: &str, map: &Heatmap) {
    println!("{label}:");
    for y in 0..map.height() {
        let row: Vec<String> = (0..map.width())
            .map(|x| format!("{:.2}", map.get(x, y)))
            .collect();
        println!("  {}", row.join(" "));
    }
}

fn main() {
    // "women under pink umbrella": the root word lights the upper-left
    // region, the other words pile onto the lower-right one
    let grid = 8;
    let maps = vec![
        block_map(grid, 1..3, 1.0), // women
        block_map(grid, 5..7, 0.4), // under
        block_map(grid, 5..7, 0.5), // pink
        block_map(grid, 5..7, 0.8), // umbrella
    ];
    let tokens = vec![
        TokenInfo::word("women"),
        TokenInfo::word("under"),
        TokenInfo::word("pink"),
        TokenInfo::word("umbrella"),
    ];
    let stack = HeatmapStack::new(maps, tokens, "women under pink umbrella", "##", 80, 80).unwrap();

    let uniform = combine_uniform(&stack, false).unwrap();
    print_map("uniform mean (all tokens equal)", &uniform);
    println!(
        "  -> hottest cell value {:.3} sits in the sub-object region\n",
        uniform.values().iter().cloned().fold(0.0, f64::max)
    );

    // weight 1 for the root word, alpha for everything after it
    let alpha = 0.16;
    let weights = WeightVector::from_raw(vec![1.0, alpha, alpha, alpha], alpha, 0, false);
    let weighted = combine_weighted(&stack, &weights).unwrap();
    print_map(
        "weighted mean (root token emphasized, alpha = 0.16)",
        &weighted,
    );
    println!(
        "  -> hottest cell value {:.3} moved to the main-object region",
        weighted.values().iter().cloned().fold(0.0, f64::max)
    );
}
