//! `vitis synth`: generate a synthetic scene — reconstruction text files,
//! a detections manifest, and the visibility ground truth — under the
//! output directory. The same seed always produces identical bytes.

use std::path::PathBuf;

use clap::Args;
use vitis_core::synth::{generate_scene, write_scene, SceneConfig};

use crate::config::Settings;
use crate::{path_error, CliError};

const KEYS: &[&str] = &[
    "clusters",
    "frames",
    "points",
    "width",
    "height",
    "camera-step",
    "dropout",
    "occlusion",
    "seed",
    "out",
];

#[derive(Args)]
pub struct SynthArgs {
    /// Number of grape clusters in the row [default: 9].
    #[arg(long)]
    clusters: Option<u32>,
    /// Number of keyframes the camera sweep covers [default: 80].
    #[arg(long)]
    frames: Option<u32>,
    /// Triangulated points per cluster [default: 20].
    #[arg(long)]
    points: Option<u32>,
    /// Frame width in pixels [default: 640].
    #[arg(long)]
    width: Option<u32>,
    /// Frame height in pixels [default: 480].
    #[arg(long)]
    height: Option<u32>,
    /// Camera travel between frames in world units [default: 0.25].
    #[arg(long)]
    camera_step: Option<f64>,
    /// Probability a visible cluster's detection is dropped [default: 0].
    #[arg(long)]
    dropout: Option<f64>,
    /// Probability neighbouring detections fuse into one mask [default: 0].
    #[arg(long)]
    occlusion: Option<f64>,
    /// RNG seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the scene files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value settings file; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn run(args: &SynthArgs) -> Result<(), CliError> {
    let settings = Settings::load(args.config.as_deref(), KEYS)?;
    let out: PathBuf = settings.require(args.out.clone(), "out")?;
    let config = SceneConfig {
        n_clusters: settings.or_default(args.clusters, "clusters", 9)?,
        n_frames: settings.or_default(args.frames, "frames", 80)?,
        points_per_cluster: settings.or_default(args.points, "points", 20)?,
        width: settings.or_default(args.width, "width", 640)?,
        height: settings.or_default(args.height, "height", 480)?,
        camera_step: settings.or_default(args.camera_step, "camera-step", 0.25)?,
        dropout: settings.or_default(args.dropout, "dropout", 0.0)?,
        occlusion: settings.or_default(args.occlusion, "occlusion", 0.0)?,
        seed: settings.or_default(args.seed, "seed", 0)?,
    };
    let scene = generate_scene(&config).map_err(|e| CliError::validation(e.to_string()))?;
    write_scene(&scene, &out).map_err(|e| path_error("write scene under", &out, e))?;
    Ok(())
}
