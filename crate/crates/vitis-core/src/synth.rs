//! Deterministic synthetic vineyard scenes with known cluster counts, for
//! end-to-end validation of the counting pipeline.
//!
//! A pinhole camera slides along +x past a row of equally spaced disk
//! "clusters" that all sit at the same depth, so each cluster's scene
//! points project at a constant pixel offset from its disk center in every
//! frame — a point observed while the disk is on screen is guaranteed to
//! land inside the detection mask. Detector noise is simulated on top:
//! dropout removes a frame's detection (the reconstruction keeps its
//! observations, exactly like a missed detection in real footage), and
//! occlusion fuses neighbouring detections into one mask. All randomness
//! comes from one 64-bit LCG seeded from the config, so equal configs
//! yield byte-identical exports.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::colmap::{
    CameraIntrinsics, CameraModel, ImageRecord, Observation, Point3D, SparseModel, TrackEntry,
};
use crate::mask::{Bitmap, InstanceMask};
use crate::track::{export_detections, FrameDetections};

const FOCAL: f64 = 400.0;
const DEPTH: f64 = 5.0;
const SPACING: f64 = 1.0;
const RADIUS: f64 = 12.0;
/// Point projections stay this far inside the disk edge, so flooring a
/// projection onto the pixel grid can never push it out of the mask.
const POINT_MARGIN: f64 = 2.0;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("bad scene config: {0}")]
    Config(String),
}

/// Knuth's MMIX linear congruential generator; the high 53 bits feed the
/// unit-interval doubles.
#[derive(Debug, Clone)]
pub struct Lcg64 {
    state: u64,
}

impl Lcg64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self
            .state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.state
    }

    /// Uniform draw from `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform draw from `[-limit, limit]`.
    pub fn next_symmetric(&mut self, limit: f64) -> f64 {
        (self.next_f64() * 2.0 - 1.0) * limit
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    pub n_clusters: u32,
    pub n_frames: u32,
    pub points_per_cluster: u32,
    pub width: u32,
    pub height: u32,
    /// Camera travel per frame in world units; the default moves disks by
    /// 20 px between frames.
    pub camera_step: f64,
    /// Probability that a visible cluster's detection is dropped in a frame.
    pub dropout: f64,
    /// Probability that two neighbouring detections fuse into one mask.
    pub occlusion: f64,
    pub seed: u64,
}

impl SceneConfig {
    pub fn new(n_clusters: u32, n_frames: u32, seed: u64) -> Self {
        Self {
            n_clusters,
            n_frames,
            points_per_cluster: 20,
            width: 640,
            height: 480,
            camera_step: 0.25,
            dropout: 0.0,
            occlusion: 0.0,
            seed,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let mut problems = Vec::new();
        if self.n_clusters == 0 {
            problems.push("n_clusters must be at least 1".to_string());
        }
        if self.n_frames < 2 {
            problems.push("n_frames must be at least 2".to_string());
        }
        if self.points_per_cluster == 0 {
            problems.push("points_per_cluster must be at least 1".to_string());
        }
        if self.width < 64 || self.height < 64 {
            problems.push(format!("raster {}x{} is below 64x64", self.width, self.height));
        }
        if !(self.camera_step > 0.0) {
            problems.push(format!("camera_step {} must be positive", self.camera_step));
        }
        for (name, p) in [("dropout", self.dropout), ("occlusion", self.occlusion)] {
            if !(0.0..1.0).contains(&p) {
                problems.push(format!("{name} {p} outside [0, 1)"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SynthError::Config(problems.join("; ")))
        }
    }
}

/// Per-cluster ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterTruth {
    pub cluster_id: u32,
    pub point_ids: Vec<u64>,
    /// Frames where the disk is fully on screen (one contiguous span).
    pub visible_frames: Vec<u32>,
    /// Visible frames whose detection survived dropout.
    pub detected_frames: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub config: SceneConfig,
    pub model: SparseModel<f64>,
    pub frames: Vec<FrameDetections<f64>>,
    pub clusters: Vec<ClusterTruth>,
    /// For each frame and detection instance, the cluster ids it covers
    /// (more than one after an occlusion merge).
    pub memberships: Vec<Vec<Vec<u32>>>,
}

/// Disk center abscissa of cluster `i` in frame `f`, in pixels.
fn center_x(config: &SceneConfig, cluster: u32, frame: u32) -> f64 {
    // The camera starts where cluster 0 sits just inside the right edge.
    let first_center = config.width as f64 - RADIUS - 2.0;
    let px_per_world = FOCAL / DEPTH;
    first_center + cluster as f64 * SPACING * px_per_world
        - frame as f64 * config.camera_step * px_per_world
}

fn camera_x(config: &SceneConfig, frame: u32) -> f64 {
    // Inverse of center_x for cluster 0: world x of the camera at `frame`.
    let first_center = config.width as f64 - RADIUS - 2.0;
    -(first_center - config.width as f64 / 2.0) * DEPTH / FOCAL
        + frame as f64 * config.camera_step
}

fn is_visible(config: &SceneConfig, cx: f64) -> bool {
    cx - RADIUS >= 0.0 && cx + RADIUS <= config.width as f64 - 1.0
}

fn disk(width: u32, height: u32, cx: f64, cy: f64, r: f64) -> Bitmap {
    let mut bitmap = Bitmap::new(width, height);
    let x0 = (cx - r).floor().max(0.0) as u32;
    let x1 = (cx + r).ceil().min(width as f64 - 1.0) as u32;
    let y0 = (cy - r).floor().max(0.0) as u32;
    let y1 = (cy + r).ceil().min(height as f64 - 1.0) as u32;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            if dx * dx + dy * dy <= r * r {
                bitmap.set(x, y, true);
            }
        }
    }
    bitmap
}

/// Generates a scene. Random draws happen in a fixed documented order —
/// point offsets per cluster, then per frame the dropout draws (visible
/// clusters, ascending) followed by the occlusion draws (adjacent present
/// pairs, ascending) — so a seed fully determines the output.
pub fn generate_scene(config: &SceneConfig) -> Result<SyntheticScene, SynthError> {
    config.validate()?;
    let mut rng = Lcg64::new(config.seed);
    let cy = config.height as f64 / 2.0;

    // Per-cluster point offsets in pixels, uniform over a safe inner disk.
    let max_offset = RADIUS - POINT_MARGIN;
    let offsets: Vec<Vec<(f64, f64)>> = (0..config.n_clusters)
        .map(|_| {
            (0..config.points_per_cluster)
                .map(|_| loop {
                    let dx = rng.next_symmetric(max_offset);
                    let dy = rng.next_symmetric(max_offset);
                    if dx * dx + dy * dy <= max_offset * max_offset {
                        break (dx, dy);
                    }
                })
                .collect()
        })
        .collect();

    let point_id = |cluster: u32, k: u32| (cluster * config.points_per_cluster + k) as u64 + 1;

    let mut clusters: Vec<ClusterTruth> = (0..config.n_clusters)
        .map(|cluster_id| ClusterTruth {
            cluster_id,
            point_ids: (0..config.points_per_cluster)
                .map(|k| point_id(cluster_id, k))
                .collect(),
            visible_frames: Vec::new(),
            detected_frames: Vec::new(),
        })
        .collect();

    let mut frames = Vec::with_capacity(config.n_frames as usize);
    let mut memberships = Vec::with_capacity(config.n_frames as usize);
    let mut images = std::collections::BTreeMap::new();
    let mut tracks: std::collections::BTreeMap<u64, Vec<TrackEntry>> =
        std::collections::BTreeMap::new();

    for frame in 0..config.n_frames {
        let visible: Vec<u32> = (0..config.n_clusters)
            .filter(|&i| is_visible(config, center_x(config, i, frame)))
            .collect();
        for &i in &visible {
            clusters[i as usize].visible_frames.push(frame);
        }

        // Reconstruction observations exist for every visible cluster,
        // detected or not.
        let mut observations = Vec::new();
        for &i in &visible {
            let cx = center_x(config, i, frame);
            for (k, &(dx, dy)) in offsets[i as usize].iter().enumerate() {
                let id = point_id(i, k as u32);
                tracks.entry(id).or_default().push(TrackEntry {
                    image_id: frame + 1,
                    obs_index: observations.len() as u32,
                });
                observations.push(Observation {
                    x: cx + dx,
                    y: cy + dy,
                    point3d_id: Some(id),
                });
            }
        }
        images.insert(
            frame + 1,
            ImageRecord {
                image_id: frame + 1,
                rotation: [1.0, 0.0, 0.0, 0.0],
                translation: [-camera_x(config, frame), 0.0, 0.0],
                camera_id: 1,
                name: frame_name(frame),
                observations,
            },
        );

        let present: Vec<u32> = visible
            .iter()
            .copied()
            .filter(|&i| {
                let dropped = config.dropout > 0.0 && rng.next_f64() < config.dropout;
                if !dropped {
                    clusters[i as usize].detected_frames.push(frame);
                }
                !dropped
            })
            .collect();

        // Fuse adjacent present clusters into shared detections.
        let mut group_of: Vec<usize> = (0..present.len()).collect();
        for pair in 0..present.len().saturating_sub(1) {
            if present[pair + 1] == present[pair] + 1
                && config.occlusion > 0.0
                && rng.next_f64() < config.occlusion
            {
                let target = group_of[pair];
                group_of[pair + 1] = target;
            }
        }

        let mut masks = Vec::new();
        let mut frame_members: Vec<Vec<u32>> = Vec::new();
        let mut slot_of_group: std::collections::BTreeMap<usize, usize> =
            std::collections::BTreeMap::new();
        for (idx, &cluster) in present.iter().enumerate() {
            let shape = disk(
                config.width,
                config.height,
                center_x(config, cluster, frame),
                cy,
                RADIUS,
            );
            match slot_of_group.get(&group_of[idx]) {
                Some(&slot) => {
                    let merged: &mut InstanceMask<f64> = &mut masks[slot];
                    let mut bitmap = merged.bitmap().clone();
                    bitmap.or_assign(&shape);
                    *merged = InstanceMask::new(bitmap, 1.0).expect("non-empty union");
                    frame_members[slot].push(cluster);
                }
                None => {
                    slot_of_group.insert(group_of[idx], masks.len());
                    frame_members.push(vec![cluster]);
                    masks.push(InstanceMask::new(shape, 1.0).expect("non-empty disk"));
                }
            }
        }

        frames.push(FrameDetections { frame_index: frame, frame_name: frame_name(frame), masks });
        memberships.push(frame_members);
    }

    let mut cameras = std::collections::BTreeMap::new();
    cameras.insert(
        1,
        CameraIntrinsics {
            camera_id: 1,
            model: CameraModel::Pinhole,
            width: config.width,
            height: config.height,
            fx: FOCAL,
            fy: FOCAL,
            px: config.width as f64 / 2.0,
            py: config.height as f64 / 2.0,
            k: 0.0,
        },
    );

    let mut points = std::collections::BTreeMap::new();
    for cluster in 0..config.n_clusters {
        for (k, &(dx, dy)) in offsets[cluster as usize].iter().enumerate() {
            let id = point_id(cluster, k as u32);
            let track = tracks.remove(&id).unwrap_or_default();
            points.insert(
                id,
                Point3D {
                    point_id: id,
                    xyz: [
                        cluster as f64 * SPACING + dx * DEPTH / FOCAL,
                        dy * DEPTH / FOCAL,
                        DEPTH,
                    ],
                    color: [60 + (cluster % 12) as u8 * 16, 40, 90],
                    error: 0.5,
                    track,
                },
            );
        }
    }

    let model = SparseModel { cameras, images, points };
    debug_assert!(model.validate().is_ok());
    Ok(SyntheticScene { config: *config, model, frames, clusters, memberships })
}

fn frame_name(frame: u32) -> String {
    format!("frame_{frame:04}.jpg")
}

/// Longest run of consecutive frame indices.
fn longest_run(frames: &[u32]) -> usize {
    let mut best = 0usize;
    let mut current = 0usize;
    let mut previous: Option<u32> = None;
    for &f in frames {
        current = match previous {
            Some(p) if f == p + 1 => current + 1,
            _ => 1,
        };
        best = best.max(current);
        previous = Some(f);
    }
    best
}

/// Independent count oracle: a cluster is countable when its disk stays
/// fully on screen for at least `min_edges + 1` consecutive frames.
pub fn oracle_expected_count(clusters: &[ClusterTruth], min_edges: usize) -> usize {
    clusters.iter().filter(|c| longest_run(&c.visible_frames) > min_edges).count()
}

/// Copies the scene's detections with each mask translated by an integer
/// jitter drawn uniformly from `[-jitter_px, jitter_px]` per axis. Masks
/// that would leave the raster entirely keep their original position.
pub fn perturb_detections(
    scene: &SyntheticScene,
    jitter_px: f64,
    seed: u64,
) -> Vec<FrameDetections<f64>> {
    let mut rng = Lcg64::new(seed);
    scene
        .frames
        .iter()
        .map(|frame| {
            let masks = frame
                .masks
                .iter()
                .map(|mask| {
                    let dx = rng.next_symmetric(jitter_px).round() as i64;
                    let dy = rng.next_symmetric(jitter_px).round() as i64;
                    let moved = mask.bitmap().translated(dx, dy);
                    if moved.count_ones() == 0 {
                        mask.clone()
                    } else {
                        InstanceMask::new(moved, mask.confidence()).expect("non-empty")
                    }
                })
                .collect();
            FrameDetections {
                frame_index: frame.frame_index,
                frame_name: frame.frame_name.clone(),
                masks,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct TruthFile {
    pub clusters: Vec<TruthCluster>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct TruthCluster {
    pub id: u32,
    pub frames: Vec<u32>,
}

/// Visibility ground truth as a JSON document.
pub fn truth_to_json(clusters: &[ClusterTruth]) -> String {
    let file = TruthFile {
        clusters: clusters
            .iter()
            .map(|c| TruthCluster { id: c.cluster_id, frames: c.visible_frames.clone() })
            .collect(),
    };
    let mut json = serde_json::to_string_pretty(&file).expect("truth encoding");
    json.push('\n');
    json
}

/// Writes the scene to a directory: the three reconstruction text files,
/// the detections manifest, and the visibility truth.
pub fn write_scene(scene: &SyntheticScene, dir: &Path) -> std::io::Result<()> {
    let text = crate::colmap::serialize_model(&scene.model);
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("cameras.txt"), text.cameras)?;
    std::fs::write(dir.join("images.txt"), text.images)?;
    std::fs::write(dir.join("points3D.txt"), text.points)?;
    std::fs::write(dir.join("detections.jsonl"), export_detections(&scene.frames))?;
    std::fs::write(dir.join("truth.json"), truth_to_json(&scene.clusters))?;
    Ok(())
}
