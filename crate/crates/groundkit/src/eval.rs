//! End-to-end inference over a manifest, strict IoU accuracy, and ablation
//! sweeps over the weighting and cropping parameters.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundleio::{
    read_bundle, read_manifest, read_proposals, BundleError, ConfigEcho, EvaluationReport,
    ManifestError, ProposalSet, SampleFailure, SampleOutcome, SampleRecord,
};
use crate::depparse::{
    align_subwords, parse_conllu_file, weight_vector, AlignmentError, ConlluError, WeightError,
    WeightVector,
};
use crate::geometry::iou;
use crate::heatmap::{fuse, rank_proposals, Fusion, HeatmapError, HeatmapStack, RankedProposal};

/// Name of the only tie-break policy: equal scores keep input order.
pub const TIE_BREAK_INPUT_ORDER: &str = "input-order";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("manifest has no samples")]
    EmptyManifest,
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error("invalid sweep grid: {0}")]
    BadGrid(String),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("failed to build worker pool: {0}")]
    Workers(String),
}

/// Why one sample could not be scored. These are reported and excluded from
/// the accuracy denominator instead of failing the whole run.
#[derive(Debug, Error)]
pub enum SampleError {
    #[error("bundle: {0}")]
    Bundle(#[from] BundleError),
    #[error("parse: {0}")]
    Parse(#[from] ConlluError),
    #[error("alignment: {0}")]
    Alignment(#[from] AlignmentError),
    #[error("weights: {0}")]
    Weights(#[from] WeightError),
    #[error("heatmap: {0}")]
    Heatmap(#[from] HeatmapError),
    #[error("no proposals for image `{image_id}`")]
    MissingProposals { image_id: String },
}

/// Knobs of the inference pipeline. `alpha` only matters with `weighting`
/// on; the threshold is strict (a sample at exactly the threshold is wrong).
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub alpha: f64,
    pub weighting: bool,
    pub include_special_tokens: bool,
    pub iou_threshold: f64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            alpha: 0.16,
            weighting: true,
            include_special_tokens: false,
            iou_threshold: 0.5,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !self.alpha.is_finite() || !(0.0..=1.0).contains(&self.alpha) {
            return Err(EvalError::BadConfig(format!(
                "alpha {} outside [0, 1]",
                self.alpha
            )));
        }
        if !self.iou_threshold.is_finite() || self.iou_threshold <= 0.0 || self.iou_threshold >= 1.0
        {
            return Err(EvalError::BadConfig(format!(
                "iou threshold {} outside (0, 1)",
                self.iou_threshold
            )));
        }
        Ok(())
    }

    pub fn echo(&self, gamma_min: Option<f64>) -> ConfigEcho {
        ConfigEcho {
            alpha: self.alpha,
            sqrt_alpha: self.alpha.sqrt(),
            weighting: self.weighting,
            include_special_tokens: self.include_special_tokens,
            iou_threshold: self.iou_threshold,
            tie_break: TIE_BREAK_INPUT_ORDER.to_string(),
            seed: self.seed,
            gamma_min,
        }
    }
}

/// Loads a sample's heatmap stack and, when weighting is on, derives its
/// weight vector from the dependency parse: root word -> subword alignment
/// -> step weights.
///
/// Multi-sentence queries use the first sentence's root; tokens of later
/// sentences fall after it and take `alpha`.
pub(crate) fn load_stack_and_weights(
    sample: &SampleRecord,
    base_dir: &Path,
    cfg: &PipelineConfig,
) -> Result<(HeatmapStack, Option<WeightVector>), SampleError> {
    let stack = read_bundle(base_dir.join(&sample.bundle))?;
    if !cfg.weighting {
        return Ok((stack, None));
    }
    let sentences = parse_conllu_file(base_dir.join(&sample.parse))?;
    if sentences.is_empty() {
        return Err(SampleError::Parse(ConlluError::NoRoot { line: 0 }));
    }
    let words: Vec<&str> = sentences.iter().flat_map(|s| s.forms()).collect();
    let root_word = sentences[0].root_index();
    let alignment = align_subwords(&words, stack.tokens(), stack.continuation_marker())?;
    let weights = weight_vector(&alignment, root_word, cfg.alpha, cfg.include_special_tokens)?;
    Ok((stack, Some(weights)))
}

/// Runs the full inference pipeline for one sample and returns the top-1
/// proposal: fuse (weighted or uniform), score every proposal, rank.
pub fn infer_sample(
    sample: &SampleRecord,
    proposals: &ProposalSet,
    base_dir: &Path,
    cfg: &PipelineConfig,
) -> Result<RankedProposal, SampleError> {
    let (stack, weights) = load_stack_and_weights(sample, base_dir, cfg)?;
    let fusion = match &weights {
        Some(w) => Fusion::Weighted(w),
        None => Fusion::Uniform {
            include_special: cfg.include_special_tokens,
        },
    };
    let heat = fuse(&stack, fusion)?;
    let ranked = rank_proposals(&heat, &proposals.bounding_boxes())?;
    Ok(ranked
        .into_iter()
        .next()
        .expect("ranking of a non-empty list is non-empty"))
}

fn infer_outcome(
    sample: &SampleRecord,
    proposals: &HashMap<String, ProposalSet>,
    base_dir: &Path,
    cfg: &PipelineConfig,
) -> Result<SampleOutcome, SampleError> {
    let set = proposals
        .get(&sample.image_id)
        .ok_or_else(|| SampleError::MissingProposals {
            image_id: sample.image_id.clone(),
        })?;
    let top = infer_sample(sample, set, base_dir, cfg)?;
    let best_iou = iou(&top.bbox, &sample.gt_box);
    Ok(SampleOutcome {
        sample_id: sample.sample_id.clone(),
        chosen_index: top.index,
        chosen_box: top.bbox,
        best_iou,
        correct: best_iou > cfg.iou_threshold,
    })
}

/// Evaluates a manifest: a sample is correct iff the IoU of its top-1 box
/// with the ground truth is strictly greater than the threshold.
///
/// Samples are processed independently (with `workers` threads when > 1)
/// and folded in manifest order, so the report is identical for any worker
/// count.
pub fn evaluate(
    samples: &[SampleRecord],
    proposals: &HashMap<String, ProposalSet>,
    base_dir: &Path,
    cfg: &PipelineConfig,
    workers: usize,
) -> Result<EvaluationReport, EvalError> {
    evaluate_with_echo(samples, proposals, base_dir, cfg, workers, cfg.echo(None))
}

fn evaluate_with_echo(
    samples: &[SampleRecord],
    proposals: &HashMap<String, ProposalSet>,
    base_dir: &Path,
    cfg: &PipelineConfig,
    workers: usize,
    echo: ConfigEcho,
) -> Result<EvaluationReport, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptyManifest);
    }
    cfg.validate()?;
    let outcomes = run_per_sample(samples, workers, |s| {
        infer_outcome(s, proposals, base_dir, cfg)
    })?;

    let mut report = EvaluationReport {
        config: echo,
        sample_count: 0,
        correct_count: 0,
        accuracy: 0.0,
        errored_count: 0,
        samples: Vec::new(),
        errors: Vec::new(),
    };
    for (sample, outcome) in samples.iter().zip(outcomes) {
        match outcome {
            Ok(o) => {
                report.sample_count += 1;
                if o.correct {
                    report.correct_count += 1;
                }
                report.samples.push(o);
            }
            Err(e) => {
                report.errored_count += 1;
                report.errors.push(SampleFailure {
                    sample_id: sample.sample_id.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    if report.sample_count > 0 {
        report.accuracy = report.correct_count as f64 / report.sample_count as f64;
    }
    Ok(report)
}

/// Maps a fallible task over the samples, sequentially or on a dedicated
/// pool, preserving input order either way.
pub(crate) fn run_per_sample<T, F>(
    samples: &[SampleRecord],
    workers: usize,
    task: F,
) -> Result<Vec<T>, EvalError>
where
    T: Send,
    F: Fn(&SampleRecord) -> T + Sync + Send,
{
    if workers <= 1 {
        Ok(samples.iter().map(task).collect())
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| EvalError::Workers(e.to_string()))?;
        Ok(pool.install(|| samples.par_iter().map(task).collect()))
    }
}

/// Convenience wrapper: read the manifest and proposals from disk, resolve
/// sample paths relative to the manifest's directory, and evaluate.
pub fn evaluate_manifest(
    manifest_path: impl AsRef<Path>,
    proposals_path: impl AsRef<Path>,
    cfg: &PipelineConfig,
    workers: usize,
) -> Result<EvaluationReport, EvalError> {
    let manifest_path = manifest_path.as_ref();
    let samples = read_manifest(manifest_path)?;
    let proposals = read_proposals(proposals_path.as_ref())?;
    let base_dir = manifest_dir(manifest_path);
    evaluate(&samples, &proposals, &base_dir, cfg, workers)
}

/// Directory that relative `bundle` / `parse` paths in a manifest are
/// resolved against: the manifest's own directory.
pub fn manifest_dir(manifest_path: &Path) -> PathBuf {
    manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// One cropping-axis point. Cells at `gamma_min = 1` are the no-cropping
/// baseline and evaluate the base manifest; any other value needs its own
/// manifest of externally produced artifacts, otherwise the cell is
/// reported as errored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaCell {
    pub gamma_min: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub manifest: Option<String>,
}

/// The cross-product to evaluate: one row per cropping point, one column
/// per weighting point (given as sqrt(alpha), matching how the parameter is
/// usually reported).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub gamma_cells: Vec<GammaCell>,
    pub sqrt_alphas: Vec<f64>,
}

impl SweepGrid {
    /// Weighting-only sweep: a single baseline cropping cell.
    pub fn over_sqrt_alphas(sqrt_alphas: Vec<f64>) -> Self {
        Self {
            gamma_cells: vec![GammaCell {
                gamma_min: 1.0,
                manifest: None,
            }],
            sqrt_alphas,
        }
    }

    fn validate(&self) -> Result<(), EvalError> {
        if self.gamma_cells.is_empty() || self.sqrt_alphas.is_empty() {
            return Err(EvalError::BadGrid(
                "both axes must be non-empty".to_string(),
            ));
        }
        for c in &self.gamma_cells {
            if !c.gamma_min.is_finite() || !(0.0..=1.0).contains(&c.gamma_min) {
                return Err(EvalError::BadGrid(format!(
                    "gamma_min {} outside [0, 1]",
                    c.gamma_min
                )));
            }
        }
        for &s in &self.sqrt_alphas {
            if !s.is_finite() || !(0.0..=1.0).contains(&s) {
                return Err(EvalError::BadGrid(format!("sqrt_alpha {s} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub gamma_min: f64,
    pub sqrt_alpha: f64,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub accuracy: Option<f64>,
    pub sample_count: usize,
    pub correct_count: usize,
    pub errored_count: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// Full sweep result: the resolved config common to all cells plus one
/// entry per grid point, in row-major grid order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub manifest: String,
    pub proposals: String,
    pub weighting: bool,
    pub include_special_tokens: bool,
    pub iou_threshold: f64,
    pub tie_break: String,
    pub seed: u64,
    pub cells: Vec<SweepCell>,
}

/// Evaluates the full grid. Cells that cannot be resolved (a non-baseline
/// cropping point without its own manifest, or unreadable files) are marked
/// errored while the rest of the grid is still computed.
pub fn sweep(
    grid: &SweepGrid,
    manifest_path: impl AsRef<Path>,
    proposals_path: impl AsRef<Path>,
    cfg: &PipelineConfig,
    workers: usize,
) -> Result<SweepReport, EvalError> {
    grid.validate()?;
    cfg.validate()?;
    let manifest_path = manifest_path.as_ref();
    let proposals_path = proposals_path.as_ref();
    let proposals = read_proposals(proposals_path)?;

    let mut report = SweepReport {
        manifest: manifest_path.display().to_string(),
        proposals: proposals_path.display().to_string(),
        weighting: cfg.weighting,
        include_special_tokens: cfg.include_special_tokens,
        iou_threshold: cfg.iou_threshold,
        tie_break: TIE_BREAK_INPUT_ORDER.to_string(),
        seed: cfg.seed,
        cells: Vec::with_capacity(grid.gamma_cells.len() * grid.sqrt_alphas.len()),
    };

    for gamma in &grid.gamma_cells {
        // resolve the artifacts for this cropping point once per row
        let row_source: Result<(Vec<SampleRecord>, PathBuf), String> = match &gamma.manifest {
            Some(path) => {
                let path = Path::new(path);
                read_manifest(path)
                    .map(|samples| (samples, manifest_dir(path)))
                    .map_err(|e| e.to_string())
            }
            None if gamma.gamma_min == 1.0 => read_manifest(manifest_path)
                .map(|samples| (samples, manifest_dir(manifest_path)))
                .map_err(|e| e.to_string()),
            None => Err(format!(
                "gamma_min {} requires externally produced artifacts; no manifest given for this cell",
                gamma.gamma_min
            )),
        };
        for &sqrt_alpha in &grid.sqrt_alphas {
            let alpha = sqrt_alpha * sqrt_alpha;
            let mut cell = SweepCell {
                gamma_min: gamma.gamma_min,
                sqrt_alpha,
                alpha,
                accuracy: None,
                sample_count: 0,
                correct_count: 0,
                errored_count: 0,
                error: None,
            };
            match &row_source {
                Ok((samples, base_dir)) => {
                    let cell_cfg = PipelineConfig {
                        alpha,
                        ..cfg.clone()
                    };
                    match evaluate(samples, &proposals, base_dir, &cell_cfg, workers) {
                        Ok(r) => {
                            cell.accuracy = Some(r.accuracy);
                            cell.sample_count = r.sample_count;
                            cell.correct_count = r.correct_count;
                            cell.errored_count = r.errored_count;
                        }
                        Err(e) => cell.error = Some(e.to_string()),
                    }
                }
                Err(e) => cell.error = Some(e.clone()),
            }
            report.cells.push(cell);
        }
    }
    Ok(report)
}

/// Renders a sweep as an aligned text table, one row per cropping point and
/// one column per sqrt(alpha), with the config echoed above.
pub fn render_sweep_table(report: &SweepReport) -> String {
    let mut sqrt_alphas: Vec<f64> = Vec::new();
    let mut gamma_mins: Vec<f64> = Vec::new();
    for c in &report.cells {
        if !sqrt_alphas.contains(&c.sqrt_alpha) {
            sqrt_alphas.push(c.sqrt_alpha);
        }
        if !gamma_mins.contains(&c.gamma_min) {
            gamma_mins.push(c.gamma_min);
        }
    }
    let mut out = String::new();
    out.push_str(&format!("manifest: {}\n", report.manifest));
    out.push_str(&format!("proposals: {}\n", report.proposals));
    out.push_str(&format!(
        "weighting: {}  include_special_tokens: {}  iou_threshold: {}  seed: {}\n\n",
        if report.weighting { "on" } else { "off" },
        report.include_special_tokens,
        report.iou_threshold,
        report.seed
    ));
    out.push_str(&format!("{:>10}", "gamma_min"));
    for s in &sqrt_alphas {
        out.push_str(&format!("  sqrt_a={:<4}", trim_float(*s)));
    }
    out.push('\n');
    for &g in &gamma_mins {
        out.push_str(&format!("{:>10}", trim_float(g)));
        for &s in &sqrt_alphas {
            let cell = report
                .cells
                .iter()
                .find(|c| c.gamma_min == g && c.sqrt_alpha == s)
                .expect("cells cover the full grid");
            match cell.accuracy {
                Some(a) => out.push_str(&format!("  {:>11.4}", a)),
                None => out.push_str(&format!("  {:>11}", "error")),
            }
        }
        out.push('\n');
    }
    out
}

fn trim_float(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') {
        s
    } else {
        format!("{v}.0")
    }
}
