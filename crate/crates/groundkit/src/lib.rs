//! groundkit: a deterministic inference and evaluation toolkit for weakly
//! supervised visual grounding.
//!
//! The toolkit operates on exported artifacts rather than running a model:
//! per-token relevance heatmaps arrive in a binary bundle, dependency parses
//! as CoNLL-U, region proposals and samples as JSON lines. On top of those
//! it provides:
//!
//! - [`heatmap`]: uniform and dependency-weighted fusion of per-token
//!   heatmaps, summed-area-table region scoring and proposal ranking
//! - [`depparse`]: CoNLL-U reading with tree validation, root detection,
//!   subword alignment and per-token weight vectors
//! - [`geometry`]: IoU, box interpolation, rasterization and the
//!   original/crop frame transforms
//! - [`cropper`]: target-aware crop planning with per-sample deterministic
//!   sampling of the interpolation coefficient
//! - [`eval`]: manifest evaluation at a strict IoU threshold and ablation
//!   sweeps over the weighting and cropping parameters
//! - [`bundleio`]: all file formats, bit-exact
//! - [`render`]: PPM overlays of heatmaps with prediction and ground-truth
//!   boxes
//!
//! Every capability has a runnable demo under `examples/`; start with
//! `cargo run -p groundkit --example fuse_heatmaps`. The same functionality
//! is scriptable through the `groundkit` binary ([`cli`]).

pub mod bundleio;
pub mod cli;
pub mod cropper;
pub mod depparse;
pub mod eval;
pub mod geometry;
pub mod heatmap;
pub mod render;

pub use bundleio::{EvaluationReport, SampleRecord};
pub use cropper::CropPlan;
pub use depparse::{ParsedSentence, WeightVector};
pub use eval::PipelineConfig;
pub use geometry::{BoundingBox, FrameTransform, PixelRect};
pub use heatmap::{Heatmap, HeatmapStack, RankedProposal};
