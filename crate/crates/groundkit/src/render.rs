//! Qualitative overlay rendering: a fused heatmap colorized onto the image
//! plane with the predicted box and the ground truth outlined on top.
//! Output is binary PPM (P6) and bit-identical for identical inputs.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::geometry::{clamp_rasterize, BoundingBox, PixelRect};
use crate::heatmap::Heatmap;

/// Outline color of the predicted box.
pub const PREDICTION_COLOR: [u8; 3] = [255, 255, 0];
/// Outline color of the ground-truth box.
pub const GROUND_TRUTH_COLOR: [u8; 3] = [255, 0, 0];

// low-to-high color ramp anchors (dark blue to near-white)
const RAMP: [(f64, [u8; 3]); 5] = [
    (0.00, [13, 8, 135]),
    (0.25, [126, 3, 168]),
    (0.50, [204, 71, 120]),
    (0.75, [248, 149, 64]),
    (1.00, [240, 249, 33]),
];

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("output size {width}x{height} must be at least 1x1")]
    EmptyOutput { width: u32, height: u32 },
    #[error("base image is {found_w}x{found_h}, expected {want_w}x{want_h}")]
    BaseSizeMismatch {
        found_w: u32,
        found_h: u32,
        want_w: u32,
        want_h: u32,
    },
    #[error("invalid PGM: {0}")]
    BadPgm(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// RGB raster with deterministic byte layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Canvas {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl Canvas {
    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity((width * height * 3) as usize);
        for _ in 0..width * height {
            data.extend_from_slice(&color);
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, color: [u8; 3]) {
        let i = ((y * self.width + x) * 3) as usize;
        self.data[i..i + 3].copy_from_slice(&color);
    }

    /// One-pixel rectangle outline, clipped to the canvas.
    pub fn outline_rect(&mut self, rect: &PixelRect, color: [u8; 3]) {
        let x1 = rect.right().min(self.width);
        let y1 = rect.bottom().min(self.height);
        if rect.x >= self.width || rect.y >= self.height {
            return;
        }
        for x in rect.x..x1 {
            self.set_pixel(x, rect.y, color);
            self.set_pixel(x, y1 - 1, color);
        }
        for y in rect.y..y1 {
            self.set_pixel(rect.x, y, color);
            self.set_pixel(x1 - 1, y, color);
        }
    }

    /// Binary PPM (P6, maxval 255).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }
}

/// 8-bit grayscale image used as an optional render background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grayscale {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

/// Reads a binary PGM (P5, maxval 255) file.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<Grayscale, RenderError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| RenderError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_pgm(&bytes)
}

fn parse_pgm(bytes: &[u8]) -> Result<Grayscale, RenderError> {
    if !bytes.starts_with(b"P5") {
        return Err(RenderError::BadPgm("missing P5 magic".to_string()));
    }
    // header: three whitespace-separated fields after the magic, with
    // optional comment lines
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in &mut fields {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(RenderError::BadPgm("short header".to_string()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| RenderError::BadPgm("bad header number".to_string()))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(RenderError::BadPgm(format!("unsupported maxval {maxval}")));
    }
    pos += 1; // single whitespace after maxval
    let need = (width * height) as usize;
    if bytes.len() < pos + need {
        return Err(RenderError::BadPgm(format!(
            "payload too short: need {need} bytes, have {}",
            bytes.len().saturating_sub(pos)
        )));
    }
    Ok(Grayscale {
        width,
        height,
        data: bytes[pos..pos + need].to_vec(),
    })
}

/// Writes a binary PGM (P5, maxval 255) file.
pub fn write_pgm(image: &Grayscale, path: impl AsRef<Path>) -> Result<(), RenderError> {
    let path = path.as_ref();
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.data);
    std::fs::write(path, out).map_err(|source| RenderError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn ramp_color(v: f64) -> [u8; 3] {
    let x = v.clamp(0.0, 1.0);
    let mut i = 0;
    while i + 1 < RAMP.len() && x > RAMP[i + 1].0 {
        i += 1;
    }
    let (x0, c0) = RAMP[i];
    let (x1, c1) = RAMP[i + 1];
    let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
    let lerp = |a: u8, b: u8| (a as f64 + t * (b as f64 - a as f64)).round() as u8;
    [lerp(c0[0], c1[0]), lerp(c0[1], c1[1]), lerp(c0[2], c1[2])]
}

/// The color assigned to the hottest cell after min-max normalization.
pub fn ramp_top_color() -> [u8; 3] {
    RAMP[RAMP.len() - 1].1
}

/// The color assigned to the coldest cell (and to every cell of a constant
/// heatmap, whose normalized value is defined as 0).
pub fn ramp_bottom_color() -> [u8; 3] {
    RAMP[0].1
}

/// Renders the heatmap at `width x height` pixels with optional box
/// outlines and an optional grayscale underlay.
///
/// Cell values are min-max normalized (a constant map normalizes to 0) and
/// each pixel takes the color of the cell it falls in. With a base image the
/// heat color is blended 50/50 over the gray value.
pub fn render_overlay(
    heat: &Heatmap,
    width: u32,
    height: u32,
    prediction: Option<&BoundingBox>,
    ground_truth: Option<&BoundingBox>,
    base: Option<&Grayscale>,
) -> Result<Canvas, RenderError> {
    if width == 0 || height == 0 {
        return Err(RenderError::EmptyOutput { width, height });
    }
    if let Some(b) = base {
        if b.width != width || b.height != height {
            return Err(RenderError::BaseSizeMismatch {
                found_w: b.width,
                found_h: b.height,
                want_w: width,
                want_h: height,
            });
        }
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in heat.values() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = hi - lo;

    let mut canvas = Canvas::filled(width, height, [0, 0, 0]);
    for y in 0..height {
        let cy = ((y as f64 / height as f64) * heat.height() as f64) as usize;
        let cy = cy.min(heat.height() - 1);
        for x in 0..width {
            let cx = ((x as f64 / width as f64) * heat.width() as f64) as usize;
            let cx = cx.min(heat.width() - 1);
            let v = if span > 0.0 {
                (heat.get(cx, cy) - lo) / span
            } else {
                0.0
            };
            let mut color = ramp_color(v);
            if let Some(b) = base {
                let g = b.data[(y * width + x) as usize] as f64;
                for c in &mut color {
                    *c = ((*c as f64 + g) / 2.0).round() as u8;
                }
            }
            canvas.set_pixel(x, y, color);
        }
    }
    if let Some(b) = prediction {
        canvas.outline_rect(&clamp_rasterize(b, width, height), PREDICTION_COLOR);
    }
    if let Some(b) = ground_truth {
        canvas.outline_rect(&clamp_rasterize(b, width, height), GROUND_TRUTH_COLOR);
    }
    Ok(canvas)
}

/// Writes a canvas as binary PPM.
pub fn write_ppm(canvas: &Canvas, path: impl AsRef<Path>) -> Result<(), RenderError> {
    let path = path.as_ref();
    std::fs::write(path, canvas.to_ppm()).map_err(|source| RenderError::Io {
        path: path.to_path_buf(),
        source,
    })
}
