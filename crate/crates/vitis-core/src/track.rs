//! Cluster counting by 3-D association: per-frame instance masks become
//! graph nodes, and every triangulated scene point whose 2-D observations
//! fall inside two masks in different frames adds weight to the edge
//! between them. Edge filtering keeps at most one incoming and one
//! outgoing edge per node (heaviest wins), the remaining chains are read
//! off as disjoint paths, short paths are discarded, and the surviving
//! path count is the cluster count estimate.
//!
//! Because edges may span distant frames, a cluster that hides for a few
//! frames (occlusion, missed detection) is re-linked by any point seen on
//! both sides of the gap instead of being counted twice.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::colmap::{reproject_point, ColmapError, Projection, SparseModel};
use crate::mask::{self, InstanceMask, MaskError};
use crate::num::Real;

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("frame {index} declares frame_index {found}; frames must be listed in order")]
    FrameOrder { index: usize, found: u32 },
    #[error("frame name {0:?} does not appear in the reconstruction")]
    UnknownFrameName(String),
    #[error(
        "frame {frame:?}: {outside} of {total} observations fall more than one pixel \
         outside the {width}x{height} raster; detections and reconstruction disagree \
         on resolution"
    )]
    ResolutionMismatch { frame: String, outside: usize, total: usize, width: u32, height: u32 },
    #[error("node ({frame}, {instance}) has more than one {kind} edge; filter the graph first")]
    DegreeContract { frame: u32, instance: u32, kind: &'static str },
    #[error("track references frame {frame} instance {instance}, which does not exist")]
    NodeOutOfRange { frame: u32, instance: u32 },
    #[error("detections manifest line {line}: {detail}")]
    Manifest { line: usize, detail: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Model(#[from] ColmapError),
}

/// Graph node: instance `instance` of frame `frame` (both zero-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub frame: u32,
    pub instance: u32,
}

/// Instance detections of one keyframe. Masks keep their per-detection
/// confidences; all masks share the frame raster.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDetections<F> {
    pub frame_index: u32,
    pub frame_name: String,
    pub masks: Vec<InstanceMask<F>>,
}

/// Directed multigraph over detection nodes; edges always point from the
/// earlier frame to the later one and carry the shared-point count.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrackGraph {
    pub nodes: BTreeSet<NodeId>,
    pub edges: BTreeMap<(NodeId, NodeId), u32>,
}

impl TrackGraph {
    pub fn weight(&self, from: NodeId, to: NodeId) -> Option<u32> {
        self.edges.get(&(from, to)).copied()
    }

    /// Largest in-degree or out-degree over all nodes.
    pub fn max_degree(&self) -> u32 {
        let mut degree: BTreeMap<(NodeId, bool), u32> = BTreeMap::new();
        for (u, v) in self.edges.keys() {
            *degree.entry((*u, false)).or_insert(0) += 1;
            *degree.entry((*v, true)).or_insert(0) += 1;
        }
        degree.values().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GraphOptions<F> {
    /// Maximum frame gap an edge may span; `None` lets points bridge any
    /// distance.
    pub window: Option<u32>,
    /// Detections below this confidence are excluded from the graph.
    pub min_confidence: Option<F>,
}

impl<F> Default for GraphOptions<F> {
    fn default() -> Self {
        Self { window: None, min_confidence: None }
    }
}

/// Disjoint tracks, each a path of nodes in frame order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackSet {
    pub min_edges: usize,
    pub tracks: Vec<Vec<NodeId>>,
}

impl TrackSet {
    /// The cluster count estimate.
    pub fn count(&self) -> usize {
        self.tracks.len()
    }
}

/// Looks up each frame's triangulated observations `(point id, x, y)` in
/// the reconstruction by frame name.
pub fn frame_observations<F: Real>(
    model: &SparseModel<F>,
    frames: &[FrameDetections<F>],
) -> Result<Vec<Vec<(u64, F, F)>>, TrackError> {
    let by_name = model.images_by_name();
    let mut per_image = model.observations_by_image();
    frames
        .iter()
        .map(|frame| {
            let id = by_name
                .get(frame.frame_name.as_str())
                .ok_or_else(|| TrackError::UnknownFrameName(frame.frame_name.clone()))?;
            Ok(per_image.remove(id).unwrap_or_default())
        })
        .collect()
}

/// Like [`frame_observations`], but replays each image's triangulated
/// points through its pose instead of trusting the stored 2-D
/// observations; useful when the reconstruction's feature coordinates are
/// noisier than its geometry. Points behind the camera are skipped.
pub fn frame_reprojections<F: Real>(
    model: &SparseModel<F>,
    frames: &[FrameDetections<F>],
) -> Result<Vec<Vec<(u64, F, F)>>, TrackError> {
    let by_name = model.images_by_name();
    frames
        .iter()
        .map(|frame| {
            let id = by_name
                .get(frame.frame_name.as_str())
                .ok_or_else(|| TrackError::UnknownFrameName(frame.frame_name.clone()))?;
            let image = &model.images[id];
            let camera = model.cameras.get(&image.camera_id).ok_or(ColmapError::MissingCamera {
                image_id: image.image_id,
                camera_id: image.camera_id,
            })?;
            let mut pixels = Vec::new();
            for (obs_index, obs) in image.observations.iter().enumerate() {
                let Some(point_id) = obs.point3d_id else { continue };
                let point = model.points.get(&point_id).ok_or(ColmapError::DanglingPoint {
                    image_id: image.image_id,
                    obs_index,
                    point_id,
                })?;
                match reproject_point(point, image, camera)? {
                    Projection::Pixel { x, y } => pixels.push((point_id, x, y)),
                    Projection::BehindCamera => {}
                }
            }
            Ok(pixels)
        })
        .collect()
}

/// Builds the association graph. A point contributes at most 1 to any edge,
/// no matter how often it was observed in a frame; weights are therefore
/// "number of distinct shared points".
pub fn build_graph<F: Real>(
    frames: &[FrameDetections<F>],
    observations: &[Vec<(u64, F, F)>],
    options: &GraphOptions<F>,
) -> Result<TrackGraph, TrackError> {
    assert_eq!(frames.len(), observations.len(), "one observation list per frame");
    for (index, frame) in frames.iter().enumerate() {
        if frame.frame_index != index as u32 {
            return Err(TrackError::FrameOrder { index, found: frame.frame_index });
        }
    }

    // Pixel hits per frame, in parallel; order is restored by collect.
    let per_frame: Vec<Vec<(u64, NodeId)>> = frames
        .par_iter()
        .zip(observations)
        .map(|(frame, obs)| frame_hits(frame, obs, options))
        .collect::<Result<_, _>>()?;

    let mut nodes = BTreeSet::new();
    for frame in frames {
        for (j, mask) in frame.masks.iter().enumerate() {
            if confidence_passes(mask.confidence(), options) {
                nodes.insert(NodeId { frame: frame.frame_index, instance: j as u32 });
            }
        }
    }

    let mut hits: BTreeMap<u64, BTreeSet<NodeId>> = BTreeMap::new();
    for frame_hits in per_frame {
        for (point_id, node) in frame_hits {
            hits.entry(point_id).or_default().insert(node);
        }
    }

    // Pairs per point, merged with commutative addition so the result is
    // identical for any thread count.
    let hit_sets: Vec<&BTreeSet<NodeId>> = hits.values().collect();
    let edges = hit_sets
        .par_iter()
        .fold(BTreeMap::<(NodeId, NodeId), u32>::new, |mut acc, set| {
            for a in set.iter() {
                for b in set.iter() {
                    if a.frame >= b.frame {
                        continue;
                    }
                    if let Some(window) = options.window {
                        if b.frame - a.frame > window {
                            continue;
                        }
                    }
                    *acc.entry((*a, *b)).or_insert(0) += 1;
                }
            }
            acc
        })
        .reduce(BTreeMap::new, |mut left, right| {
            for (key, weight) in right {
                *left.entry(key).or_insert(0) += weight;
            }
            left
        });

    Ok(TrackGraph { nodes, edges })
}

fn confidence_passes<F: Real>(confidence: F, options: &GraphOptions<F>) -> bool {
    options.min_confidence.map(|t| confidence >= t).unwrap_or(true)
}

/// Maps one frame's observations onto its masks. Observations up to one
/// pixel outside the raster are clamped onto it; more than 5% worse than
/// that means the detections were produced at a different resolution.
fn frame_hits<F: Real>(
    frame: &FrameDetections<F>,
    observations: &[(u64, F, F)],
    options: &GraphOptions<F>,
) -> Result<Vec<(u64, NodeId)>, TrackError> {
    let Some(first) = frame.masks.first() else { return Ok(Vec::new()) };
    let (width, height) = (first.width(), first.height());
    let mut outside = 0usize;
    let mut hits = Vec::new();
    for &(point_id, x, y) in observations {
        let xf = x.to_f64().unwrap_or(f64::NAN);
        let yf = y.to_f64().unwrap_or(f64::NAN);
        if !xf.is_finite()
            || !yf.is_finite()
            || xf < -1.0
            || yf < -1.0
            || xf > width as f64 + 1.0
            || yf > height as f64 + 1.0
        {
            outside += 1;
            continue;
        }
        let px = (xf.floor() as i64).clamp(0, width as i64 - 1) as u32;
        let py = (yf.floor() as i64).clamp(0, height as i64 - 1) as u32;
        for (j, mask) in frame.masks.iter().enumerate() {
            if confidence_passes(mask.confidence(), options) && mask.contains(px, py) {
                hits.push((point_id, NodeId { frame: frame.frame_index, instance: j as u32 }));
            }
        }
    }
    if !observations.is_empty() && outside * 20 > observations.len() {
        return Err(TrackError::ResolutionMismatch {
            frame: frame.frame_name.clone(),
            outside,
            total: observations.len(),
            width,
            height,
        });
    }
    Ok(hits)
}

/// Reduces every node to at most one incoming and one outgoing edge.
/// Candidates are taken heaviest first; ties prefer the shorter frame gap
/// (keeping consecutive chains intact), then ascending node order, which
/// makes the selection deterministic.
pub fn filter_edges(graph: &TrackGraph) -> TrackGraph {
    let mut candidates: Vec<(NodeId, NodeId, u32)> =
        graph.edges.iter().map(|(&(u, v), &w)| (u, v, w)).collect();
    let gap = |u: NodeId, v: NodeId| (v.frame as i64 - u.frame as i64).abs();
    candidates.sort_by(|a, b| {
        b.2.cmp(&a.2)
            .then(gap(a.0, a.1).cmp(&gap(b.0, b.1)))
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });
    let mut out_taken = BTreeSet::new();
    let mut in_taken = BTreeSet::new();
    let mut edges = BTreeMap::new();
    for (u, v, w) in candidates {
        if out_taken.contains(&u) || in_taken.contains(&v) {
            continue;
        }
        out_taken.insert(u);
        in_taken.insert(v);
        edges.insert((u, v), w);
    }
    TrackGraph { nodes: graph.nodes.clone(), edges }
}

/// Walks the filtered graph's chains from their heads and keeps the paths
/// with at least `min_edges` edges. Requires in/out degree <= 1.
pub fn extract_tracks(graph: &TrackGraph, min_edges: usize) -> Result<TrackSet, TrackError> {
    let mut successor: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut has_predecessor: BTreeSet<NodeId> = BTreeSet::new();
    for (&(u, v), _) in &graph.edges {
        if successor.insert(u, v).is_some() {
            return Err(TrackError::DegreeContract {
                frame: u.frame,
                instance: u.instance,
                kind: "outgoing",
            });
        }
        if !has_predecessor.insert(v) {
            return Err(TrackError::DegreeContract {
                frame: v.frame,
                instance: v.instance,
                kind: "incoming",
            });
        }
    }
    let mut tracks = Vec::new();
    for &head in graph.nodes.iter().filter(|n| !has_predecessor.contains(n)) {
        let mut path = vec![head];
        let mut cursor = head;
        while let Some(&next) = successor.get(&cursor) {
            path.push(next);
            cursor = next;
        }
        if path.len() > min_edges {
            tracks.push(path);
        }
    }
    Ok(TrackSet { min_edges, tracks })
}

/// Per-frame, per-instance track labels (`None` for unassigned detections).
pub fn annotate_frames<F: Real>(
    set: &TrackSet,
    frames: &[FrameDetections<F>],
) -> Result<Vec<Vec<Option<usize>>>, TrackError> {
    let mut labels: Vec<Vec<Option<usize>>> =
        frames.iter().map(|f| vec![None; f.masks.len()]).collect();
    for (track_id, track) in set.tracks.iter().enumerate() {
        for node in track {
            let slot = labels
                .get_mut(node.frame as usize)
                .and_then(|f| f.get_mut(node.instance as usize))
                .ok_or(TrackError::NodeOutOfRange {
                    frame: node.frame,
                    instance: node.instance,
                })?;
            debug_assert!(slot.is_none(), "tracks must be disjoint");
            *slot = Some(track_id);
        }
    }
    Ok(labels)
}

// --- detections manifest (JSON lines) --------------------------------------

/// One manifest line: a frame name plus its masks, either inline RLE
/// records or a path to an `H x W x n` array file relative to the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub frame_name: String,
    pub masks: MaskSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidences: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaskSource {
    Rle(Vec<String>),
    ArrayPath(String),
}

/// Reads a detections manifest. `base_dir` anchors relative array paths.
pub fn load_detections<F: Real>(
    manifest: &str,
    base_dir: &Path,
) -> Result<Vec<FrameDetections<F>>, TrackError> {
    let mut frames = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, raw) in manifest.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(raw)
            .map_err(|e| TrackError::Manifest { line, detail: e.to_string() })?;
        if !seen.insert(entry.frame_name.clone()) {
            return Err(TrackError::Manifest {
                line,
                detail: format!("duplicate frame name {:?}", entry.frame_name),
            });
        }
        let confidences: Option<Vec<F>> = entry.confidences.as_ref().map(|c| {
            c.iter().map(|&v| F::from_f64(v).unwrap_or_else(F::one)).collect()
        });
        let masks = match &entry.masks {
            MaskSource::Rle(records) => {
                if let Some(confs) = &confidences {
                    if confs.len() != records.len() {
                        return Err(TrackError::Manifest {
                            line,
                            detail: format!(
                                "{} masks but {} confidences",
                                records.len(),
                                confs.len()
                            ),
                        });
                    }
                }
                records
                    .iter()
                    .enumerate()
                    .map(|(j, record)| {
                        let conf =
                            confidences.as_ref().map(|c| c[j]).unwrap_or_else(F::one);
                        InstanceMask::from_rle_record(record, conf)
                    })
                    .collect::<Result<Vec<_>, _>>()?
            }
            MaskSource::ArrayPath(rel) => {
                let path = base_dir.join(rel);
                let bytes = std::fs::read(&path)
                    .map_err(|source| TrackError::Io { path: path.clone(), source })?;
                mask::load_mask_stack(&bytes, confidences.as_deref())?.into_masks()
            }
        };
        let dims: BTreeSet<(u32, u32)> = masks.iter().map(|m| (m.width(), m.height())).collect();
        if dims.len() > 1 {
            return Err(TrackError::Manifest {
                line,
                detail: format!("masks disagree on raster size: {dims:?}"),
            });
        }
        frames.push(FrameDetections {
            frame_index: frames.len() as u32,
            frame_name: entry.frame_name,
            masks,
        });
    }
    Ok(frames)
}

/// Writes detections as manifest lines with inline RLE records.
pub fn export_detections<F: Real>(frames: &[FrameDetections<F>]) -> String {
    let mut out = String::new();
    for frame in frames {
        let entry = ManifestEntry {
            frame_name: frame.frame_name.clone(),
            masks: MaskSource::Rle(frame.masks.iter().map(|m| m.to_rle_record()).collect()),
            confidences: Some(
                frame.masks.iter().map(|m| m.confidence().to_f64().unwrap_or(1.0)).collect(),
            ),
        };
        out.push_str(&serde_json::to_string(&entry).expect("manifest encoding"));
        out.push('\n');
    }
    out
}

// --- track output -----------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct TrackFile {
    pub count: usize,
    pub min_edges: usize,
    pub tracks: Vec<TrackRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct TrackRecord {
    pub track_id: usize,
    pub nodes: Vec<TrackNode>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct TrackNode {
    pub frame_name: String,
    pub instance_index: u32,
}

/// Track set as a JSON document with frame names resolved.
pub fn tracks_to_json<F: Real>(
    set: &TrackSet,
    frames: &[FrameDetections<F>],
) -> Result<String, TrackError> {
    let records = set
        .tracks
        .iter()
        .enumerate()
        .map(|(track_id, track)| {
            let nodes = track
                .iter()
                .map(|node| {
                    let frame = frames.get(node.frame as usize).ok_or(
                        TrackError::NodeOutOfRange {
                            frame: node.frame,
                            instance: node.instance,
                        },
                    )?;
                    Ok(TrackNode {
                        frame_name: frame.frame_name.clone(),
                        instance_index: node.instance,
                    })
                })
                .collect::<Result<Vec<_>, TrackError>>()?;
            Ok(TrackRecord { track_id, nodes })
        })
        .collect::<Result<Vec<_>, TrackError>>()?;
    let file = TrackFile { count: set.tracks.len(), min_edges: set.min_edges, tracks: records };
    let mut json = serde_json::to_string_pretty(&file).expect("track encoding");
    json.push('\n');
    Ok(json)
}

/// Per-detection labels as CSV (`track_id` empty when unassigned).
pub fn labels_to_csv<F: Real>(
    labels: &[Vec<Option<usize>>],
    frames: &[FrameDetections<F>],
) -> String {
    let mut out = String::from("frame_name,instance_index,track_id\n");
    for (frame, frame_labels) in frames.iter().zip(labels) {
        for (instance, label) in frame_labels.iter().enumerate() {
            let id = label.map(|l| l.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", frame.frame_name, instance, id));
        }
    }
    out
}
