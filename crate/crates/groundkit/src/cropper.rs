//! Target-aware crop planning: detect the referential region with the same
//! fuse-and-rank pipeline used at inference, sample an interpolation
//! coefficient deterministically per sample, and emit the crop window plus
//! the transform that remaps annotations into the crop frame.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bundleio::SampleRecord;
use crate::geometry::{
    apply_transform, clamp_rasterize, crop_transform, interpolate_box, BoundingBox, FrameTransform,
    GeometryError, PixelRect,
};
use crate::heatmap::{fuse, rank_proposals, Fusion, HeatmapError, HeatmapStack};

#[derive(Debug, Error, PartialEq)]
pub enum CropError {
    #[error("gamma_min {0} outside [0, 1]")]
    GammaMinOutOfRange(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Everything needed to reproduce one crop: the sampled coefficient, the
/// boxes it was derived from, the rasterized window and the transform into
/// the crop-resized frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropPlan {
    pub sample_id: String,
    pub gamma: f64,
    pub gamma_min: f64,
    pub seed: u64,
    pub detected: BoundingBox,
    pub interpolated: BoundingBox,
    pub rect: PixelRect,
    pub transform: FrameTransform,
}

/// Detects the referential object region: fuse the stack, rank the
/// proposals by mean heatmap value, return the top-1 box.
pub fn detect_target(
    stack: &HeatmapStack,
    fusion: Fusion<'_>,
    proposals: &[BoundingBox],
) -> Result<BoundingBox, HeatmapError> {
    let heat = fuse(stack, fusion)?;
    let ranked = rank_proposals(&heat, proposals)?;
    Ok(ranked[0].bbox)
}

/// Draws `gamma` uniformly from `[gamma_min, 1]`, keyed by `(seed,
/// sample_id)` through a counter-based generator.
///
/// The draw depends only on the key, never on call order or worker count,
/// so re-running a manifest reproduces every coefficient exactly.
/// `gamma_min = 1` always yields 1 (the no-cropping baseline).
pub fn sample_gamma(gamma_min: f64, seed: u64, sample_id: &str) -> f64 {
    assert!(
        gamma_min.is_finite() && (0.0..=1.0).contains(&gamma_min),
        "gamma_min {gamma_min} outside [0, 1]"
    );
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((sample_id.len() as u64).to_le_bytes());
    hasher.update(sample_id.as_bytes());
    let key: [u8; 32] = hasher.finalize().into();
    let mut rng = ChaCha20Rng::from_seed(key);
    let u: f64 = rng.gen();
    gamma_min + (1.0 - gamma_min) * u
}

/// Builds the crop plan for one sample: sample gamma, interpolate between
/// the whole image and the detected box, rasterize outward, and derive the
/// transform that resizes the crop back to the original image size.
///
/// The detected box is clamped into the image before interpolation, so the
/// crop window always lies within the image.
pub fn plan_crop(
    sample: &SampleRecord,
    detected: BoundingBox,
    gamma_min: f64,
    seed: u64,
) -> Result<CropPlan, CropError> {
    if !gamma_min.is_finite() || !(0.0..=1.0).contains(&gamma_min) {
        return Err(CropError::GammaMinOutOfRange(gamma_min));
    }
    let gamma = sample_gamma(gamma_min, seed, &sample.sample_id);
    build_plan(sample, detected, gamma_min, gamma, seed)
}

fn build_plan(
    sample: &SampleRecord,
    detected: BoundingBox,
    gamma_min: f64,
    gamma: f64,
    seed: u64,
) -> Result<CropPlan, CropError> {
    detected.validate()?;
    let whole = BoundingBox {
        x1: 0.0,
        y1: 0.0,
        x2: sample.image_width as f64,
        y2: sample.image_height as f64,
    };
    let clamped = detected.clamp_to(&whole);
    let interpolated = interpolate_box(&whole, &clamped, gamma)?;
    let rect = clamp_rasterize(&interpolated, sample.image_width, sample.image_height);
    let transform = crop_transform(&rect, sample.image_width, sample.image_height);
    Ok(CropPlan {
        sample_id: sample.sample_id.clone(),
        gamma,
        gamma_min,
        seed,
        detected: clamped,
        interpolated,
        rect,
        transform,
    })
}

/// Remaps boxes into the crop frame. Each box is intersected with the crop
/// window, transformed, and paired with its visibility: the fraction of its
/// original area that survived the crop (0 for boxes fully outside).
pub fn remap_annotations(plan: &CropPlan, boxes: &[BoundingBox]) -> Vec<(BoundingBox, f64)> {
    let window = plan.rect.to_box();
    boxes
        .iter()
        .map(|b| {
            let retained = b.intersection_area(&window);
            let area = b.area();
            let visibility = if area > 0.0 { retained / area } else { 0.0 };
            let clipped = b.clamp_to(&window);
            (apply_transform(&plan.transform, &clipped), visibility)
        })
        .collect()
}
