//! `vitis eval`: score a directory of predictions against a directory of
//! ground truth and write `report.json` / `report.csv`.
//!
//! Inputs are paired by file stem. Box tasks read normalized box text
//! files plus a `dims.txt` sidecar in the ground-truth directory; mask
//! tasks read NPY/NPZ/RLE mask files (predictions may carry a `<stem>.conf`
//! sidecar with one confidence per mask). A ground-truth image without a
//! prediction file scores against an empty prediction set (with a
//! warning); predictions that match no ground-truth stem are an error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use vitis_core::mask::{load_bitmap_union, load_mask_stack, InstanceMask};
use vitis_core::metrics::{
    evaluate_detections, evaluate_semantic, Detection, DetectionImage, EvalReport, SemanticImage,
    Task,
};
use vitis_core::yolo::{parse_boxes, PixelBox};

use crate::config::{parse_list, Settings};
use crate::{path_error, CliError};

const KEYS: &[&str] = &["task", "gt", "pred", "iou", "conf", "out"];
const DEFAULT_IOU: &str = "0.3,0.4,0.5,0.6,0.7,0.8,0.9";
const MASK_EXTENSIONS: &[&str] = &["npy", "npz", "rle"];
const RESERVED_STEMS: &[&str] = &["dims", "train", "test"];

#[derive(Args)]
pub struct EvalArgs {
    /// What the files contain: "boxes", "instances", or "semantic".
    #[arg(long)]
    task: Option<String>,
    /// Ground-truth directory.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Prediction directory.
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Comma-separated IoU thresholds, ascending [default: 0.3..0.9].
    #[arg(long)]
    iou: Option<String>,
    /// Confidence threshold for the precision/recall counts [default: 0.9].
    #[arg(long)]
    conf: Option<f64>,
    /// Output directory for report.json and report.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value settings file; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_task(raw: &str) -> Result<Task, CliError> {
    match raw {
        "semantic" => Ok(Task::Semantic),
        "boxes" => Ok(Task::Boxes),
        "instances" => Ok(Task::Instances),
        other => Err(CliError::validation(format!(
            "--task must be \"semantic\", \"boxes\", or \"instances\", got {other:?}"
        ))),
    }
}

/// Stems of the mask files in a directory (`dims`/`train`/`test` are
/// reserved for dataset bookkeeping and skipped).
fn list_mask_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>, CliError> {
    let mut map: BTreeMap<String, PathBuf> = BTreeMap::new();
    let listing = std::fs::read_dir(dir).map_err(|e| path_error("read", dir, e))?;
    for dirent in listing {
        let path = dirent.map_err(|e| path_error("read", dir, e))?.path();
        let Some(ext) = path.extension().and_then(|e| e.to_str()) else { continue };
        if !MASK_EXTENSIONS.contains(&ext) || !path.is_file() {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
        if RESERVED_STEMS.contains(&stem) {
            continue;
        }
        if let Some(previous) = map.insert(stem.to_string(), path.clone()) {
            return Err(CliError::validation(format!(
                "both {} and {} describe image {stem:?}",
                previous.display(),
                path.display()
            )));
        }
    }
    Ok(map)
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| path_error("read", path, e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| path_error("read", path, e))
}

/// Optional `<stem>.conf` sidecar: one confidence per mask, one per line.
fn read_confidences(mask_path: &Path) -> Result<Option<Vec<f64>>, CliError> {
    let path = mask_path.with_extension("conf");
    if !path.is_file() {
        return Ok(None);
    }
    read_text(&path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim().parse::<f64>().map_err(|e| {
                CliError::validation(format!("{}: bad confidence {l:?}: {e}", path.display()))
            })
        })
        .collect::<Result<Vec<f64>, CliError>>()
        .map(Some)
}

fn reject_unmatched_predictions<T>(
    gt_ids: &BTreeMap<String, T>,
    pred_ids: &BTreeMap<String, PathBuf>,
) -> Result<(), CliError> {
    let extra: Vec<&str> = pred_ids
        .keys()
        .filter(|id| !gt_ids.contains_key(*id))
        .map(String::as_str)
        .collect();
    if extra.is_empty() {
        Ok(())
    } else {
        Err(CliError::validation(format!(
            "{} prediction file(s) match no ground-truth image: {}",
            extra.len(),
            extra.join(", ")
        )))
    }
}

fn eval_boxes(
    gt_dir: &Path,
    pred_dir: &Path,
    thresholds: &[f64],
    conf: f64,
    warnings: &mut Vec<String>,
) -> Result<EvalReport<f64>, CliError> {
    let gt_index = vitis_core::dataset::load_dataset_index(gt_dir)
        .map_err(|e| CliError::validation(e.to_string()))?;
    if gt_index.entries.is_empty() {
        return Err(CliError::validation(format!(
            "no ground-truth box files in {}",
            gt_dir.display()
        )));
    }
    let pred_index = vitis_core::dataset::load_dataset_index(pred_dir)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let gt_ids: BTreeMap<String, PathBuf> = gt_index
        .entries
        .iter()
        .map(|e| (e.image_id.clone(), e.box_path.clone()))
        .collect();
    let pred_ids: BTreeMap<String, PathBuf> =
        pred_index.entries.iter().map(|e| (e.image_id.clone(), e.box_path.clone())).collect();
    reject_unmatched_predictions(&gt_ids, &pred_ids)?;

    let mut images = Vec::new();
    for (id, gt_path) in &gt_ids {
        let dims = *gt_index.dims.get(id).ok_or_else(|| {
            CliError::validation(format!("dims.txt in {} has no entry for {id}", gt_dir.display()))
        })?;
        let mut parse = |path: &Path| -> Result<Vec<_>, CliError> {
            let parsed = parse_boxes::<f64>(&read_text(path)?, dims)
                .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
            warnings
                .extend(parsed.warnings.iter().map(|w| format!("{}: {w}", path.display())));
            Ok(parsed.boxes)
        };
        let gts: Vec<PixelBox<f64>> =
            parse(gt_path)?.iter().map(|b| b.to_pixel_box(dims)).collect();
        let preds: Vec<Detection<PixelBox<f64>, f64>> = match pred_ids.get(id) {
            Some(path) => parse(path)?
                .iter()
                .map(|b| Detection { region: b.to_pixel_box(dims), confidence: b.confidence })
                .collect(),
            None => {
                warnings.push(format!("no prediction file for {id}; scoring an empty set"));
                Vec::new()
            }
        };
        images.push(DetectionImage { image_id: id.clone(), preds, gts });
    }
    evaluate_detections(Task::Boxes, &images, thresholds, conf)
        .map_err(|e| CliError::validation(e.to_string()))
}

fn eval_instances(
    gt_dir: &Path,
    pred_dir: &Path,
    thresholds: &[f64],
    conf: f64,
    warnings: &mut Vec<String>,
) -> Result<EvalReport<f64>, CliError> {
    let gt_ids = list_mask_files(gt_dir)?;
    if gt_ids.is_empty() {
        return Err(CliError::validation(format!(
            "no ground-truth mask files in {}",
            gt_dir.display()
        )));
    }
    let pred_ids = list_mask_files(pred_dir)?;
    reject_unmatched_predictions(&gt_ids, &pred_ids)?;

    let mut images = Vec::new();
    for (id, gt_path) in &gt_ids {
        let gt_stack = load_mask_stack::<f64>(&read_file(gt_path)?, None)
            .map_err(|e| CliError::validation(format!("{}: {e}", gt_path.display())))?;
        let gts: Vec<InstanceMask<f64>> = gt_stack.masks().to_vec();
        let preds: Vec<Detection<InstanceMask<f64>, f64>> = match pred_ids.get(id) {
            Some(path) => {
                let confidences = read_confidences(path)?;
                let stack = load_mask_stack::<f64>(&read_file(path)?, confidences.as_deref())
                    .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
                stack
                    .masks()
                    .iter()
                    .map(|m| Detection { region: m.clone(), confidence: m.confidence() })
                    .collect()
            }
            None => {
                warnings.push(format!("no prediction file for {id}; scoring an empty set"));
                Vec::new()
            }
        };
        images.push(DetectionImage { image_id: id.clone(), preds, gts });
    }
    evaluate_detections(Task::Instances, &images, thresholds, conf)
        .map_err(|e| CliError::validation(e.to_string()))
}

fn eval_semantic(
    gt_dir: &Path,
    pred_dir: &Path,
    conf: f64,
    warnings: &mut Vec<String>,
) -> Result<EvalReport<f64>, CliError> {
    let gt_ids = list_mask_files(gt_dir)?;
    if gt_ids.is_empty() {
        return Err(CliError::validation(format!(
            "no ground-truth mask files in {}",
            gt_dir.display()
        )));
    }
    let pred_ids = list_mask_files(pred_dir)?;
    reject_unmatched_predictions(&gt_ids, &pred_ids)?;

    let mut images = Vec::new();
    for (id, gt_path) in &gt_ids {
        let gt = load_bitmap_union(&read_file(gt_path)?)
            .map_err(|e| CliError::validation(format!("{}: {e}", gt_path.display())))?;
        let pred = match pred_ids.get(id) {
            Some(path) => load_bitmap_union(&read_file(path)?)
                .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?,
            None => {
                warnings.push(format!("no prediction file for {id}; scoring an empty set"));
                let (w, h) = gt.dims();
                vitis_core::mask::Bitmap::new(w, h)
            }
        };
        images.push(SemanticImage { image_id: id.clone(), pred, gt });
    }
    evaluate_semantic(&images, conf).map_err(|e| CliError::validation(e.to_string()))
}

pub fn run(args: &EvalArgs) -> Result<(), CliError> {
    let settings = Settings::load(args.config.as_deref(), KEYS)?;
    let task = parse_task(&settings.require(args.task.clone(), "task")?)?;
    let gt_dir: PathBuf = settings.require(args.gt.clone(), "gt")?;
    let pred_dir: PathBuf = settings.require(args.pred.clone(), "pred")?;
    let out: PathBuf = settings.require(args.out.clone(), "out")?;
    let iou_raw = settings.or_default(args.iou.clone(), "iou", DEFAULT_IOU.to_string())?;
    let thresholds: Vec<f64> = parse_list(&iou_raw, "IoU threshold")?;
    let conf = settings.or_default(args.conf, "conf", 0.9)?;

    let mut input_warnings = Vec::new();
    let mut report = match task {
        Task::Boxes => eval_boxes(&gt_dir, &pred_dir, &thresholds, conf, &mut input_warnings)?,
        Task::Instances => {
            eval_instances(&gt_dir, &pred_dir, &thresholds, conf, &mut input_warnings)?
        }
        Task::Semantic => eval_semantic(&gt_dir, &pred_dir, conf, &mut input_warnings)?,
    };
    input_warnings.append(&mut report.warnings);
    report.warnings = input_warnings;
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }

    std::fs::create_dir_all(&out).map_err(|e| path_error("create", &out, e))?;
    let json_path = out.join("report.json");
    std::fs::write(&json_path, report.to_json())
        .map_err(|e| path_error("write", &json_path, e))?;
    let csv_path = out.join("report.csv");
    std::fs::write(&csv_path, report.to_csv()).map_err(|e| path_error("write", &csv_path, e))?;
    Ok(())
}
