//! `vitis scribble`: oversegment a crop by watershed, build its region
//! adjacency graph, spread the scribble labels to every region, and write
//! the resulting grape mask (`mask.rle`) plus a tinted `overlay.ppm`.

use std::path::PathBuf;

use clap::Args;
use vitis_core::mask::{encode_rle, PixelRect};
use vitis_core::ppm::RgbRaster;
use vitis_core::scribble::{
    build_arg, propagate_labels, watershed_oversegment, ScribbleLabel, ScribbleSet,
};

use crate::config::{parse_list, Settings};
use crate::{path_error, CliError};

const KEYS: &[&str] = &["image", "scribbles", "lambda", "h-minima", "bbox", "out"];

#[derive(Args)]
pub struct ScribbleArgs {
    /// Crop to segment (binary PPM, P6).
    #[arg(long)]
    image: Option<PathBuf>,
    /// Scribble strokes JSON: {"strokes":[{"label":"grape","pixels":[[x,y],..]},..]}.
    #[arg(long)]
    scribbles: Option<PathBuf>,
    /// Weight of the spatial term against the colour term [default: 0.5].
    #[arg(long)]
    lambda: Option<f64>,
    /// Depth below which watershed minima are merged [default: 4].
    #[arg(long)]
    h_minima: Option<u8>,
    /// Clip the mask to this box, "x,y,w,h" [default: the whole crop].
    #[arg(long)]
    bbox: Option<String>,
    /// Output directory for mask.rle and overlay.ppm.
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value settings file; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_bbox(raw: &str) -> Result<PixelRect, CliError> {
    let parts: Vec<u32> = parse_list(raw, "bbox")?;
    match parts[..] {
        [x, y, w, h] => Ok(PixelRect { x, y, w, h }),
        _ => Err(CliError::validation(format!("--bbox wants \"x,y,w,h\", got {raw:?}"))),
    }
}

pub fn run(args: &ScribbleArgs) -> Result<(), CliError> {
    let settings = Settings::load(args.config.as_deref(), KEYS)?;
    let image_path: PathBuf = settings.require(args.image.clone(), "image")?;
    let scribbles_path: PathBuf = settings.require(args.scribbles.clone(), "scribbles")?;
    let out: PathBuf = settings.require(args.out.clone(), "out")?;
    let lambda = settings.or_default(args.lambda, "lambda", 0.5)?;
    let h_minima = settings.or_default(args.h_minima, "h-minima", 4u8)?;
    let bbox = settings.optional(args.bbox.clone(), "bbox")?;

    let image_bytes =
        std::fs::read(&image_path).map_err(|e| path_error("read", &image_path, e))?;
    let crop = RgbRaster::from_ppm(&image_bytes).map_err(|e| {
        CliError::validation(format!("{}: {e}", image_path.display()))
    })?;
    let scribble_text = std::fs::read_to_string(&scribbles_path)
        .map_err(|e| path_error("read", &scribbles_path, e))?;
    let scribbles = ScribbleSet::from_json(&scribble_text).map_err(|e| {
        CliError::validation(format!("{}: {e}", scribbles_path.display()))
    })?;
    let bounds = match bbox {
        Some(raw) => parse_bbox(&raw)?,
        None => PixelRect { x: 0, y: 0, w: crop.width, h: crop.height },
    };

    let regions = watershed_oversegment(&crop.luminance(), h_minima)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let graph = build_arg::<f64>(&regions, &crop).map_err(|e| CliError::internal(e.to_string()))?;
    let labels = propagate_labels(&graph, &regions, &scribbles, lambda)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let mask = vitis_core::scribble::extract_instance_mask::<f64>(&labels, &regions, bounds)
        .map_err(|e| CliError::validation(e.to_string()))?;

    let mut overlay = crop.clone();
    for y in 0..regions.height() {
        for x in 0..regions.width() {
            if labels[regions.label(x, y) as usize] == ScribbleLabel::Grape {
                overlay.tint(x, y, [220, 40, 40]);
            }
        }
    }

    std::fs::create_dir_all(&out).map_err(|e| path_error("create", &out, e))?;
    let mask_path = out.join("mask.rle");
    std::fs::write(&mask_path, encode_rle(mask.bitmap()))
        .map_err(|e| path_error("write", &mask_path, e))?;
    let overlay_path = out.join("overlay.ppm");
    std::fs::write(&overlay_path, overlay.to_ppm())
        .map_err(|e| path_error("write", &overlay_path, e))?;
    Ok(())
}
