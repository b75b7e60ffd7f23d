//! Subcommand front-end wiring the whole toolkit: fuse, rank, plan crops,
//! evaluate, sweep and render, with a JSON config file underneath flag
//! overrides. Exit codes: 0 success, 1 input error, 2 internal error.
//! Diagnostics go to stderr; data goes to files or stdout.

use std::ffi::OsString;
use std::panic::AssertUnwindSafe;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundleio::{
    read_bundle, read_manifest, read_proposals, write_bundle, write_crop_plans, write_report,
    BundleError, ManifestError,
};
use crate::cropper::{detect_target, plan_crop, CropError, CropPlan};
use crate::depparse::{
    align_subwords, parse_conllu_file, weight_vector, AlignmentError, ConlluError, WeightError,
    WeightVector,
};
use crate::eval::{
    evaluate, load_stack_and_weights, manifest_dir, render_sweep_table, run_per_sample, sweep,
    EvalError, GammaCell, PipelineConfig, SampleError, SweepGrid,
};
use crate::geometry::BoundingBox;
use crate::heatmap::{
    fuse, rank_proposals, Fusion, Heatmap, HeatmapError, HeatmapStack, TokenInfo,
};
use crate::render::{read_pgm, render_overlay, write_ppm, RenderError};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Parse(#[from] ConlluError),
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
    #[error(transparent)]
    Weights(#[from] WeightError),
    #[error(transparent)]
    Heatmap(#[from] HeatmapError),
    #[error(transparent)]
    Crop(#[from] CropError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("sample `{sample_id}`: {source}")]
    Sample {
        sample_id: String,
        source: SampleError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Parser, Debug)]
#[command(
    name = "groundkit",
    version,
    about = "Grounding inference and evaluation toolkit over exported heatmap bundles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fuse a heatmap bundle into a single heatmap and write it as a
    /// one-token bundle
    Combine(CombineArgs),
    /// Rank an image's proposals by mean heatmap value
    Rank(RankArgs),
    /// Plan target-aware crops for every sample in a manifest
    CropPlan(CropPlanArgs),
    /// Evaluate grounding accuracy (IoU strictly above the threshold) over
    /// a manifest
    Eval(EvalArgs),
    /// Evaluate a grid of weighting / cropping parameters
    Sweep(SweepArgs),
    /// Render a fused heatmap with prediction and ground-truth outlines as
    /// a PPM image
    Render(RenderArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum Switch {
    On,
    Off,
}

/// Options shared by every subcommand. Values resolve as flag, then config
/// file, then built-in default.
#[derive(Args, Debug, Default)]
struct CommonOpts {
    /// JSON config file; flags given on the command line win over it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dependency-weighted fusion (on) or plain uniform mean (off)
    #[arg(long, value_enum)]
    weighting: Option<Switch>,
    /// Include tokenizer delimiter tokens in fusion
    #[arg(long)]
    include_special_tokens: bool,
    /// IoU correctness threshold; only strictly greater counts
    #[arg(long)]
    threshold: Option<f64>,
    /// Seed for the deterministic per-sample samplers
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for per-sample work (output is identical for any
    /// worker count)
    #[arg(long)]
    workers: Option<usize>,
}

/// The weighting parameter, settable directly or through its square root.
/// (`sweep` takes a list instead: its `--sqrt-alpha` is the grid axis.)
#[derive(Args, Debug, Default)]
struct AlphaOpts {
    /// Down-weight for tokens after the root token, in [0, 1]
    #[arg(long, conflicts_with = "sqrt_alpha")]
    alpha: Option<f64>,
    /// Square root of alpha (the axis the weighting is usually reported on)
    #[arg(long)]
    sqrt_alpha: Option<f64>,
}

#[derive(Args, Debug)]
struct CombineArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    alpha_opts: AlphaOpts,
    /// Heatmap bundle to fuse
    #[arg(long)]
    bundle: PathBuf,
    /// Precomputed weight vector (JSON)
    #[arg(long, conflicts_with = "parses")]
    weights: Option<PathBuf>,
    /// CoNLL-U parse of the bundle's query, used to derive weights
    #[arg(long)]
    parses: Option<PathBuf>,
    /// Output bundle path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RankArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    alpha_opts: AlphaOpts,
    /// Heatmap bundle to rank against
    #[arg(long)]
    bundle: PathBuf,
    /// Proposal sets (JSON lines keyed by image id)
    #[arg(long)]
    proposals: PathBuf,
    /// Image id to look up; may be omitted when the file has exactly one
    #[arg(long)]
    image_id: Option<String>,
    /// Precomputed weight vector (JSON)
    #[arg(long, conflicts_with = "parses")]
    weights: Option<PathBuf>,
    /// CoNLL-U parse of the bundle's query, used to derive weights
    #[arg(long)]
    parses: Option<PathBuf>,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CropPlanArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    alpha_opts: AlphaOpts,
    /// Sample manifest (JSON lines)
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Proposal sets (JSON lines keyed by image id)
    #[arg(long)]
    proposals: Option<PathBuf>,
    /// Lower bound of the sampled interpolation coefficient; 1 = no
    /// cropping
    #[arg(long)]
    gamma_min: Option<f64>,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    alpha_opts: AlphaOpts,
    /// Sample manifest (JSON lines)
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Proposal sets (JSON lines keyed by image id)
    #[arg(long)]
    proposals: Option<PathBuf>,
    /// Report path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Sample manifest (JSON lines)
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Proposal sets (JSON lines keyed by image id)
    #[arg(long)]
    proposals: Option<PathBuf>,
    /// Comma-separated sqrt(alpha) axis, e.g. 1.0,0.8,0.6,0.4,0.2
    #[arg(long, value_delimiter = ',')]
    sqrt_alpha: Option<Vec<f64>>,
    /// Comma-separated gamma_min axis; non-baseline points need per-cell
    /// manifests in the config file
    #[arg(long, value_delimiter = ',')]
    gamma_min: Option<Vec<f64>>,
    /// JSON report path (stdout when omitted; the text table then goes to
    /// stderr)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    alpha_opts: AlphaOpts,
    /// Heatmap bundle to render
    #[arg(long)]
    bundle: PathBuf,
    /// Precomputed weight vector (JSON)
    #[arg(long, conflicts_with = "parses")]
    weights: Option<PathBuf>,
    /// CoNLL-U parse of the bundle's query, used to derive weights
    #[arg(long)]
    parses: Option<PathBuf>,
    /// Predicted box, as x1,y1,x2,y2
    #[arg(long, value_parser = parse_box_arg)]
    pred_box: Option<BoundingBox>,
    /// Ground-truth box, as x1,y1,x2,y2
    #[arg(long, value_parser = parse_box_arg)]
    gt_box: Option<BoundingBox>,
    /// Optional grayscale background (binary PGM) at the image size
    #[arg(long)]
    image: Option<PathBuf>,
    /// Output PPM path
    #[arg(long)]
    out: PathBuf,
}

fn parse_box_arg(s: &str) -> Result<BoundingBox, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err(format!(
            "expected x1,y1,x2,y2 with 4 numbers, got {} parts",
            parts.len()
        ));
    }
    let mut vals = [0.0f64; 4];
    for (v, p) in vals.iter_mut().zip(&parts) {
        *v = p
            .trim()
            .parse()
            .map_err(|_| format!("`{p}` is not a number"))?;
    }
    BoundingBox::new(vals[0], vals[1], vals[2], vals[3]).map_err(|e| e.to_string())
}

/// File form of the shared options plus sweep-grid extensions.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    alpha: Option<f64>,
    sqrt_alpha: Option<f64>,
    weighting: Option<bool>,
    include_special_tokens: Option<bool>,
    threshold: Option<f64>,
    seed: Option<u64>,
    gamma_min: Option<f64>,
    workers: Option<usize>,
    manifest: Option<String>,
    proposals: Option<String>,
    sqrt_alphas: Option<Vec<f64>>,
    gamma_cells: Option<Vec<GammaCell>>,
}

/// Everything a subcommand needs after flags and config file are merged.
struct Resolved {
    cfg: PipelineConfig,
    gamma_min: f64,
    workers: usize,
    file: FileConfig,
}

fn resolve(
    common: &CommonOpts,
    alpha_opts: &AlphaOpts,
    default_weighting: bool,
) -> Result<Resolved, CliError> {
    let file: FileConfig = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            serde_json::from_str(&text).map_err(|e| CliError::Config {
                path: path.clone(),
                message: e.to_string(),
            })?
        }
        None => FileConfig::default(),
    };
    if file.alpha.is_some() && file.sqrt_alpha.is_some() {
        return Err(CliError::Usage(
            "config file sets both alpha and sqrt_alpha; pick one".to_string(),
        ));
    }
    let alpha = alpha_opts
        .alpha
        .or(alpha_opts.sqrt_alpha.map(|s| s * s))
        .or(file.alpha)
        .or(file.sqrt_alpha.map(|s| s * s))
        .unwrap_or(0.16);
    let weighting = match common.weighting {
        Some(Switch::On) => true,
        Some(Switch::Off) => false,
        None => file.weighting.unwrap_or(default_weighting),
    };
    let include_special_tokens =
        common.include_special_tokens || file.include_special_tokens.unwrap_or(false);
    let cfg = PipelineConfig {
        alpha,
        weighting,
        include_special_tokens,
        iou_threshold: common.threshold.or(file.threshold).unwrap_or(0.5),
        seed: common.seed.or(file.seed).unwrap_or(0),
    };
    cfg.validate()?;
    Ok(Resolved {
        cfg,
        gamma_min: file.gamma_min.unwrap_or(0.5),
        workers: common.workers.or(file.workers).unwrap_or(1),
        file,
    })
}

fn required_path(
    flag: &Option<PathBuf>,
    file_value: &Option<String>,
    name: &str,
) -> Result<PathBuf, CliError> {
    flag.clone()
        .or_else(|| file_value.as_ref().map(PathBuf::from))
        .ok_or_else(|| {
            CliError::Usage(format!(
                "missing --{name} (not set on the command line or in the config file)"
            ))
        })
}

/// Entry point behind the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match std::panic::catch_unwind(AssertUnwindSafe(|| dispatch(cli))) {
        Ok(Ok(())) => 0,
        Ok(Err(err)) => {
            eprintln!("error: {err}");
            1
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            eprintln!("internal error: {msg}");
            2
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Combine(args) => cmd_combine(args),
        Command::Rank(args) => cmd_rank(args),
        Command::CropPlan(args) => cmd_crop_plan(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Render(args) => cmd_render(args),
    }
}

/// Derives the fusion mode for single-bundle subcommands: a precomputed
/// weight file, a parse to derive weights from, or the uniform mean.
fn resolve_fusion_weights(
    stack: &HeatmapStack,
    weights_file: Option<&Path>,
    parses: Option<&Path>,
    cfg: &PipelineConfig,
) -> Result<Option<WeightVector>, CliError> {
    if !cfg.weighting {
        return Ok(None);
    }
    if let Some(path) = weights_file {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let wv: WeightVector = serde_json::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        return Ok(Some(wv));
    }
    if let Some(path) = parses {
        let sentences = parse_conllu_file(path)?;
        if sentences.is_empty() {
            return Err(CliError::Usage(format!("{}: no sentences", path.display())));
        }
        let words: Vec<&str> = sentences.iter().flat_map(|s| s.forms()).collect();
        let alignment = align_subwords(&words, stack.tokens(), stack.continuation_marker())?;
        let wv = weight_vector(
            &alignment,
            sentences[0].root_index(),
            cfg.alpha,
            cfg.include_special_tokens,
        )?;
        return Ok(Some(wv));
    }
    Err(CliError::Usage(
        "weighting is on but no weight source given: pass --weights or --parses, or --weighting off"
            .to_string(),
    ))
}

fn fused_heatmap(
    stack: &HeatmapStack,
    weights: &Option<WeightVector>,
    cfg: &PipelineConfig,
) -> Result<Heatmap, CliError> {
    let fusion = match weights {
        Some(w) => Fusion::Weighted(w),
        None => Fusion::Uniform {
            include_special: cfg.include_special_tokens,
        },
    };
    Ok(fuse(stack, fusion)?)
}

fn cmd_combine(args: CombineArgs) -> Result<(), CliError> {
    let resolved = resolve(&args.common, &args.alpha_opts, true)?;
    let stack = read_bundle(&args.bundle)?;
    let weights = resolve_fusion_weights(
        &stack,
        args.weights.as_deref(),
        args.parses.as_deref(),
        &resolved.cfg,
    )?;
    let fused = fused_heatmap(&stack, &weights, &resolved.cfg)?;
    let out_stack = HeatmapStack::new(
        vec![fused],
        vec![TokenInfo::word("fused")],
        stack.query(),
        stack.continuation_marker(),
        stack.image_width(),
        stack.image_height(),
    )?;
    write_bundle(&out_stack, &args.out)?;
    Ok(())
}

#[derive(Serialize)]
struct RankOutput<'a> {
    query: &'a str,
    image_id: &'a str,
    proposals: Vec<crate::heatmap::RankedProposal>,
}

fn cmd_rank(args: RankArgs) -> Result<(), CliError> {
    let resolved = resolve(&args.common, &args.alpha_opts, true)?;
    let stack = read_bundle(&args.bundle)?;
    let sets = read_proposals(&args.proposals)?;
    let set = match &args.image_id {
        Some(id) => sets
            .get(id)
            .ok_or_else(|| CliError::Usage(format!("image id `{id}` not in the proposal file")))?,
        None if sets.len() == 1 => sets.values().next().expect("len checked"),
        None => {
            return Err(CliError::Usage(format!(
                "proposal file holds {} images; pick one with --image-id",
                sets.len()
            )))
        }
    };
    let weights = resolve_fusion_weights(
        &stack,
        args.weights.as_deref(),
        args.parses.as_deref(),
        &resolved.cfg,
    )?;
    let fused = fused_heatmap(&stack, &weights, &resolved.cfg)?;
    let ranked = rank_proposals(&fused, &set.bounding_boxes())?;
    let output = RankOutput {
        query: stack.query(),
        image_id: &set.image_id,
        proposals: ranked,
    };
    emit_json(&output, args.out.as_deref())
}

fn cmd_crop_plan(args: CropPlanArgs) -> Result<(), CliError> {
    // detection for cropping defaults to the uniform fusion; weighted mode
    // is opt-in via --weighting on
    let resolved = resolve(&args.common, &args.alpha_opts, false)?;
    let gamma_min = args.gamma_min.unwrap_or(resolved.gamma_min);
    let manifest_path = required_path(&args.manifest, &resolved.file.manifest, "manifest")?;
    let proposals_path = required_path(&args.proposals, &resolved.file.proposals, "proposals")?;
    let samples = read_manifest(&manifest_path)?;
    let proposals = read_proposals(&proposals_path)?;
    let base_dir = manifest_dir(&manifest_path);
    if samples.is_empty() {
        return Err(CliError::Eval(EvalError::EmptyManifest));
    }

    let cfg = &resolved.cfg;
    let results = run_per_sample(
        &samples,
        resolved.workers,
        |sample| -> Result<CropPlan, CliError> {
            let set = proposals
                .get(&sample.image_id)
                .ok_or_else(|| CliError::Sample {
                    sample_id: sample.sample_id.clone(),
                    source: SampleError::MissingProposals {
                        image_id: sample.image_id.clone(),
                    },
                })?;
            let (stack, weights) =
                load_stack_and_weights(sample, &base_dir, cfg).map_err(|source| {
                    CliError::Sample {
                        sample_id: sample.sample_id.clone(),
                        source,
                    }
                })?;
            let fusion = match &weights {
                Some(w) => Fusion::Weighted(w),
                None => Fusion::Uniform {
                    include_special: cfg.include_special_tokens,
                },
            };
            let detected = detect_target(&stack, fusion, &set.bounding_boxes()).map_err(|e| {
                CliError::Sample {
                    sample_id: sample.sample_id.clone(),
                    source: SampleError::Heatmap(e),
                }
            })?;
            Ok(plan_crop(sample, detected, gamma_min, cfg.seed)?)
        },
    )?;
    let plans = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    match &args.out {
        Some(path) => write_crop_plans(&plans, path)?,
        None => {
            let mut out = String::new();
            for p in &plans {
                out.push_str(&serde_json::to_string(p).expect("crop plans serialize"));
                out.push('\n');
            }
            print!("{out}");
        }
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let resolved = resolve(&args.common, &args.alpha_opts, true)?;
    let manifest_path = required_path(&args.manifest, &resolved.file.manifest, "manifest")?;
    let proposals_path = required_path(&args.proposals, &resolved.file.proposals, "proposals")?;
    let samples = read_manifest(&manifest_path)?;
    let proposals = read_proposals(&proposals_path)?;
    let base_dir = manifest_dir(&manifest_path);
    let report = evaluate(
        &samples,
        &proposals,
        &base_dir,
        &resolved.cfg,
        resolved.workers,
    )?;
    match &args.out {
        Some(path) => write_report(&report, path)?,
        None => emit_json(&report, None)?,
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    // alpha comes from the grid axis, not from a scalar flag
    let resolved = resolve(&args.common, &AlphaOpts::default(), true)?;
    let manifest_path = required_path(&args.manifest, &resolved.file.manifest, "manifest")?;
    let proposals_path = required_path(&args.proposals, &resolved.file.proposals, "proposals")?;
    let sqrt_alphas = args
        .sqrt_alpha
        .clone()
        .or(resolved.file.sqrt_alphas.clone())
        .unwrap_or_else(|| vec![1.0, 0.8, 0.6, 0.4, 0.2]);
    let gamma_cells = match &args.gamma_min {
        Some(values) => values
            .iter()
            .map(|&gamma_min| GammaCell {
                gamma_min,
                manifest: None,
            })
            .collect(),
        None => resolved.file.gamma_cells.clone().unwrap_or_else(|| {
            vec![GammaCell {
                gamma_min: 1.0,
                manifest: None,
            }]
        }),
    };
    let grid = SweepGrid {
        gamma_cells,
        sqrt_alphas,
    };
    let report = sweep(
        &grid,
        &manifest_path,
        &proposals_path,
        &resolved.cfg,
        resolved.workers,
    )?;
    let table = render_sweep_table(&report);
    match &args.out {
        Some(path) => {
            let mut text = serde_json::to_string_pretty(&report).expect("sweep reports serialize");
            text.push('\n');
            std::fs::write(path, text).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            print!("{table}");
        }
        None => {
            emit_json(&report, None)?;
            eprint!("{table}");
        }
    }
    Ok(())
}

fn cmd_render(args: RenderArgs) -> Result<(), CliError> {
    let resolved = resolve(&args.common, &args.alpha_opts, true)?;
    let stack = read_bundle(&args.bundle)?;
    let weights = resolve_fusion_weights(
        &stack,
        args.weights.as_deref(),
        args.parses.as_deref(),
        &resolved.cfg,
    )?;
    let fused = fused_heatmap(&stack, &weights, &resolved.cfg)?;
    let base = match &args.image {
        Some(path) => Some(read_pgm(path)?),
        None => None,
    };
    let canvas = render_overlay(
        &fused,
        stack.image_width(),
        stack.image_height(),
        args.pred_box.as_ref(),
        args.gt_box.as_ref(),
        base.as_ref(),
    )?;
    write_ppm(&canvas, &args.out)?;
    Ok(())
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("outputs serialize");
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
