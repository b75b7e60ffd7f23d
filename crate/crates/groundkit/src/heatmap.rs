//! Per-token relevance grids and what the pipeline does with them: uniform
//! and weighted fusion into a single query heatmap, summed-area-table region
//! scoring, and deterministic proposal ranking.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::depparse::WeightVector;
use crate::geometry::{clamp_rasterize, BoundingBox, PixelRect};

#[derive(Debug, Error, PartialEq)]
pub enum HeatmapError {
    #[error("grid {width}x{height} does not match {count} values")]
    BadGrid {
        width: usize,
        height: usize,
        count: usize,
    },
    #[error("cell value at index {index} is {value}: values must be finite and >= 0")]
    BadValue { index: usize, value: f64 },
    #[error("cell size {0} must be finite and > 0")]
    BadCellSize(f64),
    #[error("stack has no heatmaps")]
    EmptyStack,
    #[error("stack holds {maps} heatmaps but {tokens} tokens")]
    TokenCountMismatch { maps: usize, tokens: usize },
    #[error("heatmap {index} is {found_w}x{found_h}, expected {want_w}x{want_h}")]
    DimensionMismatch {
        index: usize,
        found_w: usize,
        found_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("no tokens left to fuse (all tokens are special)")]
    NoIncludedTokens,
    #[error("weight vector has {found} weights but the stack includes {expected} tokens")]
    WeightLengthMismatch { expected: usize, found: usize },
    #[error("weight {value} at position {index} outside [0, 1]")]
    WeightOutOfRange { index: usize, value: f64 },
    #[error("rect {x},{y} {w}x{h} exceeds the {grid_w}x{grid_h} grid")]
    RectOutOfBounds {
        x: u32,
        y: u32,
        w: u32,
        h: u32,
        grid_w: usize,
        grid_h: usize,
    },
    #[error("no proposals to rank")]
    NoProposals,
}

/// A single relevance grid over the image.
///
/// Values are row-major, finite and non-negative. `cell_width`/`cell_height`
/// are image pixels per grid cell, so proposals given in pixels can be
/// located on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    cell_width: f64,
    cell_height: f64,
}

impl Heatmap {
    pub fn new(
        width: usize,
        height: usize,
        values: Vec<f64>,
        cell_width: f64,
        cell_height: f64,
    ) -> Result<Self, HeatmapError> {
        if width == 0 || height == 0 || width * height != values.len() {
            return Err(HeatmapError::BadGrid {
                width,
                height,
                count: values.len(),
            });
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(HeatmapError::BadValue { index, value });
            }
        }
        for cell in [cell_width, cell_height] {
            if !cell.is_finite() || cell <= 0.0 {
                return Err(HeatmapError::BadCellSize(cell));
            }
        }
        Ok(Self {
            width,
            height,
            values,
            cell_width,
            cell_height,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell_width(&self) -> f64 {
        self.cell_width
    }

    pub fn cell_height(&self) -> f64 {
        self.cell_height
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// One model token: its surface text and whether it is a sequence delimiter
/// emitted by the tokenizer rather than a word piece.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenInfo {
    pub text: String,
    pub special: bool,
}

impl TokenInfo {
    pub fn word(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            special: false,
        }
    }

    pub fn special(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            special: true,
        }
    }
}

/// Per-token heatmaps for one query, all on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapStack {
    maps: Vec<Heatmap>,
    tokens: Vec<TokenInfo>,
    query: String,
    continuation_marker: String,
    image_width: u32,
    image_height: u32,
}

impl HeatmapStack {
    pub fn new(
        maps: Vec<Heatmap>,
        tokens: Vec<TokenInfo>,
        query: impl Into<String>,
        continuation_marker: impl Into<String>,
        image_width: u32,
        image_height: u32,
    ) -> Result<Self, HeatmapError> {
        if maps.is_empty() {
            return Err(HeatmapError::EmptyStack);
        }
        if maps.len() != tokens.len() {
            return Err(HeatmapError::TokenCountMismatch {
                maps: maps.len(),
                tokens: tokens.len(),
            });
        }
        let (want_w, want_h) = (maps[0].width, maps[0].height);
        for (index, m) in maps.iter().enumerate() {
            if m.width != want_w || m.height != want_h {
                return Err(HeatmapError::DimensionMismatch {
                    index,
                    found_w: m.width,
                    found_h: m.height,
                    want_w,
                    want_h,
                });
            }
        }
        Ok(Self {
            maps,
            tokens,
            query: query.into(),
            continuation_marker: continuation_marker.into(),
            image_width,
            image_height,
        })
    }

    pub fn token_count(&self) -> usize {
        self.maps.len()
    }

    pub fn maps(&self) -> &[Heatmap] {
        &self.maps
    }

    pub fn tokens(&self) -> &[TokenInfo] {
        &self.tokens
    }

    pub fn query(&self) -> &str {
        &self.query
    }

    pub fn continuation_marker(&self) -> &str {
        &self.continuation_marker
    }

    pub fn image_width(&self) -> u32 {
        self.image_width
    }

    pub fn image_height(&self) -> u32 {
        self.image_height
    }

    pub fn grid_width(&self) -> usize {
        self.maps[0].width
    }

    pub fn grid_height(&self) -> usize {
        self.maps[0].height
    }

    /// Indices of the tokens that participate in fusion.
    pub fn included_indices(&self, include_special: bool) -> Vec<usize> {
        self.tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| include_special || !t.special)
            .map(|(i, _)| i)
            .collect()
    }
}

/// How to fuse a stack into one heatmap.
#[derive(Debug, Clone, Copy)]
pub enum Fusion<'a> {
    /// Plain mean over the included tokens.
    Uniform { include_special: bool },
    /// Weighted mean with the given per-token weights.
    Weighted(&'a WeightVector),
}

pub fn fuse(stack: &HeatmapStack, fusion: Fusion<'_>) -> Result<Heatmap, HeatmapError> {
    match fusion {
        Fusion::Uniform { include_special } => combine_uniform(stack, include_special),
        Fusion::Weighted(weights) => combine_weighted(stack, weights),
    }
}

/// Cellwise mean of the included token heatmaps.
pub fn combine_uniform(
    stack: &HeatmapStack,
    include_special: bool,
) -> Result<Heatmap, HeatmapError> {
    let included = stack.included_indices(include_special);
    if included.is_empty() {
        return Err(HeatmapError::NoIncludedTokens);
    }
    let first = &stack.maps[0];
    let n = included.len() as f64;
    let mut out = vec![0.0f64; first.values.len()];
    for &i in &included {
        for (acc, v) in out.iter_mut().zip(&stack.maps[i].values) {
            *acc += v;
        }
    }
    for acc in &mut out {
        *acc /= n;
    }
    Heatmap::new(
        first.width,
        first.height,
        out,
        first.cell_width,
        first.cell_height,
    )
}

/// Weighted cellwise mean: `sum_i(w_i * G_i) / N` with `N` the included token
/// count. The weights are applied as given, not renormalized, so an all-ones
/// vector reproduces [`combine_uniform`].
pub fn combine_weighted(
    stack: &HeatmapStack,
    weights: &WeightVector,
) -> Result<Heatmap, HeatmapError> {
    let included = stack.included_indices(weights.includes_special());
    if included.is_empty() {
        return Err(HeatmapError::NoIncludedTokens);
    }
    if weights.len() != included.len() {
        return Err(HeatmapError::WeightLengthMismatch {
            expected: included.len(),
            found: weights.len(),
        });
    }
    for (index, &value) in weights.values().iter().enumerate() {
        if !value.is_finite() || !(0.0..=1.0).contains(&value) {
            return Err(HeatmapError::WeightOutOfRange { index, value });
        }
    }
    let first = &stack.maps[0];
    let n = included.len() as f64;
    let mut out = vec![0.0f64; first.values.len()];
    for (&i, &w) in included.iter().zip(weights.values()) {
        for (acc, v) in out.iter_mut().zip(&stack.maps[i].values) {
            *acc += w * v;
        }
    }
    for acc in &mut out {
        *acc /= n;
    }
    Heatmap::new(
        first.width,
        first.height,
        out,
        first.cell_width,
        first.cell_height,
    )
}

/// Prefix sums of a heatmap, one row and column larger than the grid, so any
/// rectangular sum costs four lookups.
#[derive(Debug, Clone)]
pub struct SummedAreaTable {
    width: usize,
    height: usize,
    sums: Vec<f64>,
}

impl SummedAreaTable {
    pub fn grid_width(&self) -> usize {
        self.width
    }

    pub fn grid_height(&self) -> usize {
        self.height
    }

    /// `sums[y][x]` = total of all cells strictly above and left of `(x, y)`.
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.sums[y * (self.width + 1) + x]
    }
}

pub fn build_sat(map: &Heatmap) -> SummedAreaTable {
    let (w, h) = (map.width, map.height);
    let mut sums = vec![0.0f64; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row_sum = 0.0;
        for x in 0..w {
            row_sum += map.values[y * w + x];
            sums[(y + 1) * (w + 1) + (x + 1)] = sums[y * (w + 1) + (x + 1)] + row_sum;
        }
    }
    SummedAreaTable {
        width: w,
        height: h,
        sums,
    }
}

/// Mean cell value over a rect given in grid cells, via four-corner
/// inclusion-exclusion on the table.
pub fn box_mean(sat: &SummedAreaTable, rect: &PixelRect) -> Result<f64, HeatmapError> {
    let (x0, y0) = (rect.x as usize, rect.y as usize);
    let (x1, y1) = (rect.right() as usize, rect.bottom() as usize);
    if x1 > sat.width || y1 > sat.height {
        return Err(HeatmapError::RectOutOfBounds {
            x: rect.x,
            y: rect.y,
            w: rect.w,
            h: rect.h,
            grid_w: sat.width,
            grid_h: sat.height,
        });
    }
    let total = sat.at(x1, y1) - sat.at(x1, y0) - sat.at(x0, y1) + sat.at(x0, y0);
    Ok(total / (rect.w as f64 * rect.h as f64))
}

/// A proposal with its mean-heatmap score and final position in the ranking.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedProposal {
    pub index: usize,
    pub bbox: BoundingBox,
    pub score: f64,
    pub rank: usize,
}

/// Scores every proposal by its mean heatmap value and sorts by descending
/// score. Ties keep ascending input order, so the ranking is deterministic.
///
/// Proposals are given in image pixels and rasterized outward onto the grid;
/// a proposal thinner than one cell still covers at least one cell.
pub fn rank_proposals(
    map: &Heatmap,
    proposals: &[BoundingBox],
) -> Result<Vec<RankedProposal>, HeatmapError> {
    if proposals.is_empty() {
        return Err(HeatmapError::NoProposals);
    }
    let sat = build_sat(map);
    let mut ranked = Vec::with_capacity(proposals.len());
    for (index, bbox) in proposals.iter().enumerate() {
        let grid_box = BoundingBox {
            x1: bbox.x1 / map.cell_width,
            y1: bbox.y1 / map.cell_height,
            x2: bbox.x2 / map.cell_width,
            y2: bbox.y2 / map.cell_height,
        };
        let rect = clamp_rasterize(&grid_box, map.width as u32, map.height as u32);
        let score = box_mean(&sat, &rect)?;
        ranked.push(RankedProposal {
            index,
            bbox: *bbox,
            score,
            rank: 0,
        });
    }
    // stable sort: equal scores stay in ascending input order
    ranked.sort_by(|a, b| b.score.partial_cmp(&a.score).expect("scores are finite"));
    for (rank, p) in ranked.iter_mut().enumerate() {
        p.rank = rank;
    }
    Ok(ranked)
}
