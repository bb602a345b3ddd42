//! `vitis track`: parse a sparse reconstruction and a detections manifest,
//! associate instances through shared 3-D points, and report the cluster
//! count. Writes `tracks.json` and `labels.csv` to the output directory;
//! the final stdout line is `count=<n>`.

use std::path::{Path, PathBuf};

use clap::Args;
use vitis_core::track::{
    annotate_frames, build_graph, extract_tracks, filter_edges, frame_observations,
    frame_reprojections, labels_to_csv, tracks_to_json, GraphOptions,
};

use crate::config::Settings;
use crate::{path_error, CliError};

const KEYS: &[&str] =
    &["model-dir", "detections", "min-edges", "window", "conf", "projection", "out"];

#[derive(Args)]
pub struct TrackArgs {
    /// Directory holding cameras.txt, images.txt, and points3D.txt.
    #[arg(long)]
    model_dir: Option<PathBuf>,
    /// Detections manifest (one JSON object per line; relative mask paths
    /// resolve against the manifest's directory).
    #[arg(long)]
    detections: Option<PathBuf>,
    /// Discard tracks with this many edges or fewer [default: 5].
    #[arg(long)]
    min_edges: Option<usize>,
    /// Only link detections at most this many frames apart
    /// [default: unbounded].
    #[arg(long)]
    window: Option<u32>,
    /// Ignore detections below this confidence [default: keep all].
    #[arg(long)]
    conf: Option<f64>,
    /// Pixel source: "observed" replays the reconstruction's 2-D feature
    /// coordinates, "reprojected" projects the 3-D points through each pose.
    #[arg(long)]
    projection: Option<String>,
    /// Output directory for tracks.json and labels.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value settings file; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

enum ProjectionMode {
    Observed,
    Reprojected,
}

fn parse_projection(raw: &str) -> Result<ProjectionMode, CliError> {
    match raw {
        "observed" => Ok(ProjectionMode::Observed),
        "reprojected" => Ok(ProjectionMode::Reprojected),
        other => Err(CliError::validation(format!(
            "--projection must be \"observed\" or \"reprojected\", got {other:?}"
        ))),
    }
}

pub fn run(args: &TrackArgs) -> Result<(), CliError> {
    let settings = Settings::load(args.config.as_deref(), KEYS)?;
    let model_dir: PathBuf = settings.require(args.model_dir.clone(), "model-dir")?;
    let manifest_path: PathBuf = settings.require(args.detections.clone(), "detections")?;
    let out: PathBuf = settings.require(args.out.clone(), "out")?;
    let min_edges = settings.or_default(args.min_edges, "min-edges", 5usize)?;
    let window = settings.optional(args.window, "window")?;
    if window == Some(0) {
        return Err(CliError::validation("--window must be at least 1"));
    }
    let min_confidence = settings.optional(args.conf, "conf")?;
    let projection =
        parse_projection(&settings.or_default(args.projection.clone(), "projection", "observed".to_string())?)?;

    let read = |name: &str| -> Result<String, CliError> {
        let path = model_dir.join(name);
        std::fs::read_to_string(&path).map_err(|e| path_error("read", &path, e))
    };
    let model = vitis_core::colmap::parse_model::<f64>(
        &read("cameras.txt")?,
        &read("images.txt")?,
        &read("points3D.txt")?,
    )
    .map_err(|e| CliError::validation(e.to_string()))?;
    model.validate().map_err(|e| CliError::validation(e.to_string()))?;

    let manifest = std::fs::read_to_string(&manifest_path)
        .map_err(|e| path_error("read", &manifest_path, e))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let frames = vitis_core::track::load_detections::<f64>(&manifest, base)
        .map_err(|e| CliError::validation(e.to_string()))?;

    let by_name = model.images_by_name();
    let unmatched: Vec<&str> = frames
        .iter()
        .map(|f| f.frame_name.as_str())
        .filter(|name| !by_name.contains_key(*name))
        .collect();
    if !unmatched.is_empty() {
        return Err(CliError::validation(format!(
            "{} frame name(s) missing from the reconstruction: {}",
            unmatched.len(),
            unmatched.join(", ")
        )));
    }

    let observations = match projection {
        ProjectionMode::Observed => frame_observations(&model, &frames),
        ProjectionMode::Reprojected => frame_reprojections(&model, &frames),
    }
    .map_err(|e| CliError::validation(e.to_string()))?;

    let options = GraphOptions { window, min_confidence };
    let graph = build_graph(&frames, &observations, &options)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let filtered = filter_edges(&graph);
    // Failures past this point break library invariants, not user input.
    let tracks = extract_tracks(&filtered, min_edges).map_err(|e| CliError::internal(e.to_string()))?;
    let labels =
        annotate_frames(&tracks, &frames).map_err(|e| CliError::internal(e.to_string()))?;

    std::fs::create_dir_all(&out).map_err(|e| path_error("create", &out, e))?;
    let json = tracks_to_json(&tracks, &frames).map_err(|e| CliError::internal(e.to_string()))?;
    let json_path = out.join("tracks.json");
    std::fs::write(&json_path, json).map_err(|e| path_error("write", &json_path, e))?;
    let csv_path = out.join("labels.csv");
    std::fs::write(&csv_path, labels_to_csv(&labels, &frames))
        .map_err(|e| path_error("write", &csv_path, e))?;

    println!("count={}", tracks.count());
    Ok(())
}
