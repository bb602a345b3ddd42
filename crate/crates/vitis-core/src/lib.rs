//! Batch toolkit for counting grape clusters in vineyard video and scoring
//! detection/segmentation output against ground truth.
//!
//! The crate is organised around three jobs:
//!
//! * **evaluation** — [`metrics`] implements box/mask IoU, greedy one-to-one
//!   matching, 11-point interpolated average precision, and dataset-level
//!   precision/recall/F1 over accumulated counts, with [`yolo`], [`mask`],
//!   [`npy`], and [`dataset`] supplying the interchange formats;
//! * **counting** — [`colmap`] reads sparse reconstructions and [`track`]
//!   associates per-frame instance masks through shared 3-D points, extracts
//!   disjoint paths, and reports the surviving path count as the cluster count;
//! * **interactive masks** — [`scribble`] oversegments an image crop with a
//!   watershed, builds a region adjacency graph, and propagates scribble
//!   labels to produce an instance mask; [`synth`] renders deterministic
//!   synthetic scenes with known cluster counts for end-to-end checks.
//!
//! Floating-point geometry is generic over [`num::Real`]; the aliases below
//! pin the default `f64` instantiation used by the CLI and tests.

pub mod colmap;
pub mod dataset;
pub mod mask;
pub mod metrics;
pub mod npy;
pub mod num;
pub mod ppm;
pub mod scribble;
pub mod synth;
pub mod track;
pub mod yolo;

/// Default scalar for all floating-point geometry.
pub type Scalar = f64;

pub type BoundingBox = yolo::BoundingBox<Scalar>;
pub type PixelBox = yolo::PixelBox<Scalar>;
pub type InstanceMask = mask::InstanceMask<Scalar>;
pub type MaskStack = mask::MaskStack<Scalar>;
pub type CameraIntrinsics = colmap::CameraIntrinsics<Scalar>;
pub type ImageRecord = colmap::ImageRecord<Scalar>;
pub type Point3D = colmap::Point3D<Scalar>;
pub type SparseModel = colmap::SparseModel<Scalar>;
pub type Prf = metrics::Prf<Scalar>;
pub type EvalReport = metrics::EvalReport<Scalar>;
pub type FrameDetections = track::FrameDetections<Scalar>;
pub type RegionGraph = scribble::RegionGraph<Scalar>;
