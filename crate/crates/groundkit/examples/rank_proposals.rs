//! Score region proposals by their mean heatmap value (through a
//! summed-area table) and rank them; the top-1 proposal is the predicted
//! region.
//!
//! ```bash
//! cargo run -p groundkit --example rank_proposals
//! ```

use groundkit::geometry::BoundingBox;
use groundkit::heatmap::{rank_proposals, Heatmap};

fn main() {
    // 10x10 grid over a 100x100 image; a hot 3x3 block around cells (2..5)
    let mut vals = vec![0.05; 100];
    for y in 2..5 {
        for x in 2..5 {
            vals[y * 10 + x] = 0.9;
        }
    }
    let heat = Heatmap::new(10, 10, vals, 10.0, 10.0).unwrap();

    let proposals = vec![
        BoundingBox::new(20.0, 20.0, 50.0, 50.0).unwrap(), // covers the block
        BoundingBox::new(0.0, 0.0, 100.0, 100.0).unwrap(), // whole image
        BoundingBox::new(60.0, 60.0, 95.0, 95.0).unwrap(), // cold corner
        BoundingBox::new(10.0, 10.0, 60.0, 60.0).unwrap(), // loose cover
    ];

    let ranked = rank_proposals(&heat, &proposals).unwrap();
    println!("{:>4}  {:>5}  {:>8}  box", "rank", "index", "score");
    for p in &ranked {
        println!(
            "{:>4}  {:>5}  {:>8.4}  ({:.0},{:.0},{:.0},{:.0})",
            p.rank, p.index, p.score, p.bbox.x1, p.bbox.y1, p.bbox.x2, p.bbox.y2
        );
    }
    println!("\npredicted region: proposal {} (rank 0)", ranked[0].index);
}
