//! Box algebra shared by the whole pipeline: IoU, convex interpolation of
//! boxes, outward rasterization to pixel rects, and the affine transforms
//! between the original-image frame and the crop frame.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("invalid box ({x1}, {y1}, {x2}, {y2}): coordinates must be finite with x1 <= x2 and y1 <= y2")]
    InvalidBox { x1: f64, y1: f64, x2: f64, y2: f64 },
    #[error("interpolation coefficient {0} outside [0, 1]")]
    GammaOutOfRange(f64),
    #[error("pixel rect extents must be at least 1x1, got {w}x{h}")]
    EmptyRect { w: u32, h: u32 },
}

/// Continuous axis-aligned rectangle in image coordinates, origin top-left.
///
/// Corners are closed: the box spans `[x1, x2] x [y1, y2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BoundingBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        let b = Self { x1, y1, x2, y2 };
        b.validate()?;
        Ok(b)
    }

    /// Checks the corner ordering and finiteness invariants.
    ///
    /// Deserialized boxes bypass `new`, so readers call this before use.
    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = self.x1.is_finite()
            && self.y1.is_finite()
            && self.x2.is_finite()
            && self.y2.is_finite();
        if !finite || self.x1 > self.x2 || self.y1 > self.y2 {
            return Err(GeometryError::InvalidBox {
                x1: self.x1,
                y1: self.y1,
                x2: self.x2,
                y2: self.y2,
            });
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Area of overlap with `other`; 0 when disjoint or degenerate.
    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }

    /// Clamps all four coordinates into `bounds`. The result is always a
    /// valid box; a box fully outside collapses onto the nearest edge.
    pub fn clamp_to(&self, bounds: &BoundingBox) -> BoundingBox {
        BoundingBox {
            x1: self.x1.clamp(bounds.x1, bounds.x2),
            y1: self.y1.clamp(bounds.y1, bounds.y2),
            x2: self.x2.clamp(bounds.x1, bounds.x2),
            y2: self.y2.clamp(bounds.y1, bounds.y2),
        }
    }

    pub fn contains(&self, other: &BoundingBox) -> bool {
        self.x1 <= other.x1 && self.y1 <= other.y1 && self.x2 >= other.x2 && self.y2 >= other.y2
    }
}

/// Intersection over union of two boxes, in `[0, 1]`.
///
/// Defined as 0 whenever the union has zero area, so degenerate boxes never
/// score as overlapping.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Convex combination of two boxes: `gamma * r0 + (1 - gamma) * r1`,
/// componentwise on all four coordinates.
///
/// `gamma = 1` returns `r0` exactly and `gamma = 0` returns `r1` exactly.
pub fn interpolate_box(
    r0: &BoundingBox,
    r1: &BoundingBox,
    gamma: f64,
) -> Result<BoundingBox, GeometryError> {
    if !gamma.is_finite() || !(0.0..=1.0).contains(&gamma) {
        return Err(GeometryError::GammaOutOfRange(gamma));
    }
    r0.validate()?;
    r1.validate()?;
    let lerp = |a: f64, b: f64| gamma * a + (1.0 - gamma) * b;
    Ok(BoundingBox {
        x1: lerp(r0.x1, r1.x1),
        y1: lerp(r0.y1, r1.y1),
        x2: lerp(r0.x2, r1.x2),
        y2: lerp(r0.y2, r1.y2),
    })
}

/// Integer pixel rectangle with half-open extents: spans `[x, x+w) x [y, y+h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl PixelRect {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Result<Self, GeometryError> {
        if w == 0 || h == 0 {
            return Err(GeometryError::EmptyRect { w, h });
        }
        Ok(Self { x, y, w, h })
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn fits_within(&self, image_w: u32, image_h: u32) -> bool {
        self.right() <= image_w && self.bottom() <= image_h
    }

    /// The rect as a continuous box covering the same pixels.
    pub fn to_box(&self) -> BoundingBox {
        BoundingBox {
            x1: self.x as f64,
            y1: self.y as f64,
            x2: self.right() as f64,
            y2: self.bottom() as f64,
        }
    }
}

/// Rasterizes a continuous box outward (floor the min corner, ceil the max
/// corner) and clamps it into a `image_w x image_h` image.
///
/// Outward rounding means the rect never cuts into the continuous box; an
/// empty result is widened to a 1x1 rect at the clamped anchor so callers can
/// rely on at least one pixel.
pub fn clamp_rasterize(b: &BoundingBox, image_w: u32, image_h: u32) -> PixelRect {
    debug_assert!(image_w >= 1 && image_h >= 1);
    let clamp_x = |v: f64| v.max(0.0).min(image_w as f64) as u32;
    let clamp_y = |v: f64| v.max(0.0).min(image_h as f64) as u32;
    let x0 = clamp_x(b.x1.floor());
    let y0 = clamp_y(b.y1.floor());
    let x1 = clamp_x(b.x2.ceil());
    let y1 = clamp_y(b.y2.ceil());
    let (x, w) = if x1 > x0 {
        (x0, x1 - x0)
    } else {
        (x0.min(image_w - 1), 1)
    };
    let (y, h) = if y1 > y0 {
        (y0, y1 - y0)
    } else {
        (y0.min(image_h - 1), 1)
    };
    PixelRect { x, y, w, h }
}

/// Which way a [`FrameTransform`] maps coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformDirection {
    OriginalToCrop,
    CropToOriginal,
}

/// Affine map `p -> p * scale + offset`, per axis, between the original-image
/// frame and the crop-resized frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameTransform {
    pub scale_x: f64,
    pub scale_y: f64,
    pub offset_x: f64,
    pub offset_y: f64,
    pub direction: TransformDirection,
}

impl FrameTransform {
    pub fn identity(direction: TransformDirection) -> Self {
        Self {
            scale_x: 1.0,
            scale_y: 1.0,
            offset_x: 0.0,
            offset_y: 0.0,
            direction,
        }
    }

    pub fn apply_point(&self, x: f64, y: f64) -> (f64, f64) {
        (
            x * self.scale_x + self.offset_x,
            y * self.scale_y + self.offset_y,
        )
    }

    pub fn inverse(&self) -> FrameTransform {
        FrameTransform {
            scale_x: 1.0 / self.scale_x,
            scale_y: 1.0 / self.scale_y,
            offset_x: -self.offset_x / self.scale_x,
            offset_y: -self.offset_y / self.scale_y,
            direction: match self.direction {
                TransformDirection::OriginalToCrop => TransformDirection::CropToOriginal,
                TransformDirection::CropToOriginal => TransformDirection::OriginalToCrop,
            },
        }
    }

    pub fn is_identity(&self) -> bool {
        self.scale_x == 1.0 && self.scale_y == 1.0 && self.offset_x == 0.0 && self.offset_y == 0.0
    }
}

/// Transform that maps original-image coordinates into the frame of `rect`
/// cropped out and resized to `out_w x out_h`.
pub fn crop_transform(rect: &PixelRect, out_w: u32, out_h: u32) -> FrameTransform {
    let scale_x = out_w as f64 / rect.w as f64;
    let scale_y = out_h as f64 / rect.h as f64;
    FrameTransform {
        scale_x,
        scale_y,
        offset_x: -(rect.x as f64) * scale_x,
        offset_y: -(rect.y as f64) * scale_y,
        direction: TransformDirection::OriginalToCrop,
    }
}

/// Maps both corners of `b` through `t` and re-normalizes the corner order.
pub fn apply_transform(t: &FrameTransform, b: &BoundingBox) -> BoundingBox {
    let (ax, ay) = t.apply_point(b.x1, b.y1);
    let (bx, by) = t.apply_point(b.x2, b.y2);
    BoundingBox {
        x1: ax.min(bx),
        y1: ay.min(by),
        x2: ax.max(bx),
        y2: ay.max(by),
    }
}
