//! Text-format sparse reconstructions: camera intrinsics, posed images with
//! their 2-D observations, and 3-D points with observation tracks, split over
//! `cameras.txt`, `images.txt`, and `points3D.txt`.
//!
//! `#` starts a comment line. Camera and point files carry one record per
//! line; image files carry two lines per image (pose header, then the
//! observation triples). Declared-count comments are cross-checked against
//! the records actually present, and [`SparseModel::validate`] enforces the
//! referential integrity between images, observations, and point tracks.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::num::Real;

#[derive(Debug, Error)]
pub enum ColmapError {
    #[error("{file} line {line}: {detail}")]
    Parse { file: &'static str, line: usize, detail: String },
    #[error("cameras.txt line {line}: unknown camera model {model:?}")]
    UnknownModel { line: usize, model: String },
    #[error("duplicate {what} id {id}")]
    DuplicateId { what: &'static str, id: u64 },
    #[error("{file}: declared count {declared} but {found} records present")]
    DeclaredCount { file: &'static str, declared: u64, found: u64 },
    #[error("duplicate image name {0:?}")]
    DuplicateName(String),
    #[error("image {image_id} references missing camera {camera_id}")]
    MissingCamera { image_id: u32, camera_id: u32 },
    #[error("image {image_id} rotation has norm {norm}, expected a unit quaternion")]
    NonUnitQuaternion { image_id: u32, norm: f64 },
    #[error("point {point_id} track references missing image {image_id}")]
    TrackImage { point_id: u64, image_id: u32 },
    #[error(
        "point {point_id} track references observation {obs_index} of image {image_id}, \
         which has only {available}"
    )]
    TrackIndex { point_id: u64, image_id: u32, obs_index: u32, available: usize },
    #[error(
        "point {point_id} track entry ({image_id}, {obs_index}) disagrees with that \
         observation's point id {observed:?}"
    )]
    TrackMismatch { point_id: u64, image_id: u32, obs_index: u32, observed: Option<u64> },
    #[error("image {image_id} observation {obs_index} references missing point {point_id}")]
    DanglingPoint { image_id: u32, obs_index: usize, point_id: u64 },
    #[error(
        "image {image_id} observation {obs_index} claims point {point_id} but is absent \
         from that point's track"
    )]
    ObservationNotInTrack { image_id: u32, obs_index: usize, point_id: u64 },
    #[error("projection of point {point_id} produced a non-finite value")]
    NonFinite { point_id: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CameraModel {
    Pinhole,
    SimpleRadial,
}

impl CameraModel {
    pub fn name(self) -> &'static str {
        match self {
            CameraModel::Pinhole => "PINHOLE",
            CameraModel::SimpleRadial => "SIMPLE_RADIAL",
        }
    }
}

/// Intrinsics for one camera. `SIMPLE_RADIAL` stores its single focal
/// length in both `fx` and `fy`; `k` is zero for `PINHOLE`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics<F> {
    pub camera_id: u32,
    pub model: CameraModel,
    pub width: u32,
    pub height: u32,
    pub fx: F,
    pub fy: F,
    pub px: F,
    pub py: F,
    pub k: F,
}

/// One 2-D keypoint of an image; `point3d_id` is `None` for keypoints that
/// were never triangulated (`-1` in the text format).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation<F> {
    pub x: F,
    pub y: F,
    pub point3d_id: Option<u64>,
}

/// Posed image. `rotation` is the world-to-camera unit quaternion
/// `(w, x, y, z)` and `translation` the world-to-camera offset.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord<F> {
    pub image_id: u32,
    pub rotation: [F; 4],
    pub translation: [F; 3],
    pub camera_id: u32,
    pub name: String,
    pub observations: Vec<Observation<F>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrackEntry {
    pub image_id: u32,
    pub obs_index: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point3D<F> {
    pub point_id: u64,
    pub xyz: [F; 3],
    pub color: [u8; 3],
    pub error: F,
    pub track: Vec<TrackEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseModel<F> {
    pub cameras: BTreeMap<u32, CameraIntrinsics<F>>,
    pub images: BTreeMap<u32, ImageRecord<F>>,
    pub points: BTreeMap<u64, Point3D<F>>,
}

/// The three text files of a serialised model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelText {
    pub cameras: String,
    pub images: String,
    pub points: String,
}

/// Result of projecting a 3-D point into an image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection<F> {
    Pixel { x: F, y: F },
    BehindCamera,
}

pub fn parse_model<F: Real>(
    cameras: &str,
    images: &str,
    points: &str,
) -> Result<SparseModel<F>, ColmapError> {
    let model = SparseModel {
        cameras: parse_cameras(cameras)?,
        images: parse_images(images)?,
        points: parse_points(points)?,
    };
    model.validate()?;
    Ok(model)
}

pub fn parse_cameras<F: Real>(
    text: &str,
) -> Result<BTreeMap<u32, CameraIntrinsics<F>>, ColmapError> {
    const FILE: &str = "cameras.txt";
    let mut cameras = BTreeMap::new();
    let mut declared = None;
    for (line, raw) in numbered_lines(text) {
        if let Some(comment) = raw.strip_prefix('#') {
            declared = declared.or_else(|| declared_count(comment));
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        let err = |detail: String| ColmapError::Parse { file: FILE, line, detail };
        if fields.len() < 4 {
            return Err(err(format!("expected at least 4 fields, found {}", fields.len())));
        }
        let camera_id = parse_int(fields[0], "camera id", FILE, line)? as u32;
        let width = parse_int(fields[2], "width", FILE, line)? as u32;
        let height = parse_int(fields[3], "height", FILE, line)? as u32;
        let params: Vec<F> = fields[4..]
            .iter()
            .map(|t| {
                F::parse(t).ok_or_else(|| ColmapError::Parse {
                    file: FILE,
                    line,
                    detail: format!("bad parameter {t:?}"),
                })
            })
            .collect::<Result<_, _>>()?;
        let camera = match fields[1] {
            "PINHOLE" => {
                if params.len() != 4 {
                    return Err(err(format!("PINHOLE takes 4 parameters, found {}", params.len())));
                }
                CameraIntrinsics {
                    camera_id,
                    model: CameraModel::Pinhole,
                    width,
                    height,
                    fx: params[0],
                    fy: params[1],
                    px: params[2],
                    py: params[3],
                    k: F::zero(),
                }
            }
            "SIMPLE_RADIAL" => {
                if params.len() != 4 {
                    return Err(err(format!(
                        "SIMPLE_RADIAL takes 4 parameters, found {}",
                        params.len()
                    )));
                }
                CameraIntrinsics {
                    camera_id,
                    model: CameraModel::SimpleRadial,
                    width,
                    height,
                    fx: params[0],
                    fy: params[0],
                    px: params[1],
                    py: params[2],
                    k: params[3],
                }
            }
            other => {
                return Err(ColmapError::UnknownModel { line, model: other.to_string() })
            }
        };
        if cameras.insert(camera_id, camera).is_some() {
            return Err(ColmapError::DuplicateId { what: "camera", id: camera_id as u64 });
        }
    }
    check_count(FILE, declared, cameras.len())?;
    Ok(cameras)
}

pub fn parse_images<F: Real>(text: &str) -> Result<BTreeMap<u32, ImageRecord<F>>, ColmapError> {
    const FILE: &str = "images.txt";
    let mut images: BTreeMap<u32, ImageRecord<F>> = BTreeMap::new();
    let mut declared = None;
    let mut pending: Option<(usize, ImageRecord<F>)> = None;
    for (line, raw) in numbered_lines(text) {
        if let Some(comment) = raw.strip_prefix('#') {
            if pending.is_some() {
                return Err(ColmapError::Parse {
                    file: FILE,
                    line,
                    detail: "comment interrupts an image stanza".into(),
                });
            }
            declared = declared.or_else(|| declared_count(comment));
            continue;
        }
        match pending.take() {
            None => {
                if raw.trim().is_empty() {
                    continue;
                }
                let (tokens, name) = split_leading_tokens(raw, 9).ok_or_else(|| {
                    ColmapError::Parse {
                        file: FILE,
                        line,
                        detail: "expected pose header with 9 fields and a name".into(),
                    }
                })?;
                if name.is_empty() {
                    return Err(ColmapError::Parse {
                        file: FILE,
                        line,
                        detail: "image name is empty".into(),
                    });
                }
                let image_id = parse_int(tokens[0], "image id", FILE, line)? as u32;
                let mut pose = [F::zero(); 7];
                for (slot, token) in tokens[1..8].iter().enumerate() {
                    pose[slot] = F::parse(token).ok_or_else(|| ColmapError::Parse {
                        file: FILE,
                        line,
                        detail: format!("bad pose value {token:?}"),
                    })?;
                }
                let camera_id = parse_int(tokens[8], "camera id", FILE, line)? as u32;
                pending = Some((
                    line,
                    ImageRecord {
                        image_id,
                        rotation: [pose[0], pose[1], pose[2], pose[3]],
                        translation: [pose[4], pose[5], pose[6]],
                        camera_id,
                        name: name.to_string(),
                        observations: Vec::new(),
                    },
                ));
            }
            Some((_, mut record)) => {
                record.observations = parse_observations(raw, FILE, line)?;
                let id = record.image_id;
                if images.insert(id, record).is_some() {
                    return Err(ColmapError::DuplicateId { what: "image", id: id as u64 });
                }
            }
        }
    }
    if let Some((line, record)) = pending {
        return Err(ColmapError::Parse {
            file: FILE,
            line,
            detail: format!("image {} is missing its observation line", record.image_id),
        });
    }
    check_count(FILE, declared, images.len())?;
    Ok(images)
}

fn parse_observations<F: Real>(
    raw: &str,
    file: &'static str,
    line: usize,
) -> Result<Vec<Observation<F>>, ColmapError> {
    let tokens: Vec<&str> = raw.split_whitespace().collect();
    if tokens.len() % 3 != 0 {
        return Err(ColmapError::Parse {
            file,
            line,
            detail: format!("observation line holds {} tokens, not a multiple of 3", tokens.len()),
        });
    }
    tokens
        .chunks_exact(3)
        .map(|triple| {
            let bad = |t: &str| ColmapError::Parse {
                file,
                line,
                detail: format!("bad observation value {t:?}"),
            };
            let x = F::parse(triple[0]).ok_or_else(|| bad(triple[0]))?;
            let y = F::parse(triple[1]).ok_or_else(|| bad(triple[1]))?;
            let id: i64 = triple[2].parse().map_err(|_| bad(triple[2]))?;
            let point3d_id = match id {
                -1 => None,
                n if n >= 0 => Some(n as u64),
                _ => return Err(bad(triple[2])),
            };
            Ok(Observation { x, y, point3d_id })
        })
        .collect()
}

pub fn parse_points<F: Real>(text: &str) -> Result<BTreeMap<u64, Point3D<F>>, ColmapError> {
    const FILE: &str = "points3D.txt";
    let mut points = BTreeMap::new();
    let mut declared = None;
    for (line, raw) in numbered_lines(text) {
        if let Some(comment) = raw.strip_prefix('#') {
            declared = declared.or_else(|| declared_count(comment));
            continue;
        }
        if raw.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        let err = |detail: String| ColmapError::Parse { file: FILE, line, detail };
        if tokens.len() < 8 || (tokens.len() - 8) % 2 != 0 {
            return Err(err(format!(
                "expected 8 fields plus (image, observation) pairs, found {}",
                tokens.len()
            )));
        }
        let point_id = parse_int(tokens[0], "point id", FILE, line)?;
        let mut xyz = [F::zero(); 3];
        for (slot, token) in tokens[1..4].iter().enumerate() {
            xyz[slot] = F::parse(token).ok_or_else(|| err(format!("bad coordinate {token:?}")))?;
        }
        let mut color = [0u8; 3];
        for (slot, token) in tokens[4..7].iter().enumerate() {
            color[slot] =
                token.parse().map_err(|_| err(format!("bad color value {token:?}")))?;
        }
        let error =
            F::parse(tokens[7]).ok_or_else(|| err(format!("bad error value {:?}", tokens[7])))?;
        let track = tokens[8..]
            .chunks_exact(2)
            .map(|pair| {
                Ok(TrackEntry {
                    image_id: parse_int(pair[0], "track image id", FILE, line)? as u32,
                    obs_index: parse_int(pair[1], "track observation index", FILE, line)? as u32,
                })
            })
            .collect::<Result<Vec<_>, ColmapError>>()?;
        if points.insert(point_id, Point3D { point_id, xyz, color, error, track }).is_some() {
            return Err(ColmapError::DuplicateId { what: "point", id: point_id });
        }
    }
    check_count(FILE, declared, points.len())?;
    Ok(points)
}

impl<F: Real> SparseModel<F> {
    /// Referential integrity: camera references, unique names, unit
    /// rotations, and exact agreement between observation point ids and
    /// point tracks in both directions.
    pub fn validate(&self) -> Result<(), ColmapError> {
        let mut names = BTreeSet::new();
        for image in self.images.values() {
            if !self.cameras.contains_key(&image.camera_id) {
                return Err(ColmapError::MissingCamera {
                    image_id: image.image_id,
                    camera_id: image.camera_id,
                });
            }
            if !names.insert(image.name.as_str()) {
                return Err(ColmapError::DuplicateName(image.name.clone()));
            }
            let norm = image
                .rotation
                .iter()
                .map(|c| c.to_f64().unwrap_or(f64::NAN).powi(2))
                .sum::<f64>()
                .sqrt();
            if !(norm - 1.0).abs().is_finite() || (norm - 1.0).abs() > 1e-3 {
                return Err(ColmapError::NonUnitQuaternion { image_id: image.image_id, norm });
            }
        }
        let mut tracked: BTreeSet<(u32, u32)> = BTreeSet::new();
        for point in self.points.values() {
            for entry in &point.track {
                let image = self.images.get(&entry.image_id).ok_or(ColmapError::TrackImage {
                    point_id: point.point_id,
                    image_id: entry.image_id,
                })?;
                let obs = image.observations.get(entry.obs_index as usize).ok_or(
                    ColmapError::TrackIndex {
                        point_id: point.point_id,
                        image_id: entry.image_id,
                        obs_index: entry.obs_index,
                        available: image.observations.len(),
                    },
                )?;
                if obs.point3d_id != Some(point.point_id) {
                    return Err(ColmapError::TrackMismatch {
                        point_id: point.point_id,
                        image_id: entry.image_id,
                        obs_index: entry.obs_index,
                        observed: obs.point3d_id,
                    });
                }
                tracked.insert((entry.image_id, entry.obs_index));
            }
        }
        for image in self.images.values() {
            for (obs_index, obs) in image.observations.iter().enumerate() {
                if let Some(point_id) = obs.point3d_id {
                    if !self.points.contains_key(&point_id) {
                        return Err(ColmapError::DanglingPoint {
                            image_id: image.image_id,
                            obs_index,
                            point_id,
                        });
                    }
                    if !tracked.contains(&(image.image_id, obs_index as u32)) {
                        return Err(ColmapError::ObservationNotInTrack {
                            image_id: image.image_id,
                            obs_index,
                            point_id,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Image ids keyed by image name.
    pub fn images_by_name(&self) -> BTreeMap<&str, u32> {
        self.images.values().map(|i| (i.name.as_str(), i.image_id)).collect()
    }

    /// Triangulated observations per image as `(point id, x, y)`, in
    /// observation order.
    pub fn observations_by_image(&self) -> BTreeMap<u32, Vec<(u64, F, F)>> {
        self.images
            .iter()
            .map(|(&id, image)| {
                let obs = image
                    .observations
                    .iter()
                    .filter_map(|o| o.point3d_id.map(|pid| (pid, o.x, o.y)))
                    .collect();
                (id, obs)
            })
            .collect()
    }
}

/// Projects a 3-D point into an image. Points on or behind the camera plane
/// come back as [`Projection::BehindCamera`] rather than dividing by zero.
pub fn reproject_point<F: Real>(
    point: &Point3D<F>,
    image: &ImageRecord<F>,
    camera: &CameraIntrinsics<F>,
) -> Result<Projection<F>, ColmapError> {
    let [w, x, y, z] = image.rotation;
    let [px, py, pz] = point.xyz;
    let two = F::from_u8(2).unwrap();
    let cam = [
        (F::one() - two * (y * y + z * z)) * px
            + two * (x * y - w * z) * py
            + two * (x * z + w * y) * pz
            + image.translation[0],
        two * (x * y + w * z) * px
            + (F::one() - two * (x * x + z * z)) * py
            + two * (y * z - w * x) * pz
            + image.translation[1],
        two * (x * z - w * y) * px
            + two * (y * z + w * x) * py
            + (F::one() - two * (x * x + y * y)) * pz
            + image.translation[2],
    ];
    if cam[2] <= F::zero() {
        return Ok(Projection::BehindCamera);
    }
    let u = cam[0] / cam[2];
    let v = cam[1] / cam[2];
    let radial = F::one() + camera.k * (u * u + v * v);
    let pixel_x = camera.fx * u * radial + camera.px;
    let pixel_y = camera.fy * v * radial + camera.py;
    if !pixel_x.is_finite() || !pixel_y.is_finite() {
        return Err(ColmapError::NonFinite { point_id: point.point_id });
    }
    Ok(Projection::Pixel { x: pixel_x, y: pixel_y })
}

/// Serialises a model back to its three text files. Floats use the shortest
/// representation that parses back to the same value, so
/// `serialize(parse(serialize(m))) == serialize(m)` byte for byte.
pub fn serialize_model<F: Real>(model: &SparseModel<F>) -> ModelText {
    let mut cameras = String::new();
    cameras.push_str("# Camera list with one line of data per camera:\n");
    cameras.push_str("#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n");
    cameras.push_str(&format!("# Number of cameras: {}\n", model.cameras.len()));
    for cam in model.cameras.values() {
        let params = match cam.model {
            CameraModel::Pinhole => format!("{} {} {} {}", cam.fx, cam.fy, cam.px, cam.py),
            CameraModel::SimpleRadial => format!("{} {} {} {}", cam.fx, cam.px, cam.py, cam.k),
        };
        cameras.push_str(&format!(
            "{} {} {} {} {}\n",
            cam.camera_id,
            cam.model.name(),
            cam.width,
            cam.height,
            params
        ));
    }

    let mut images = String::new();
    images.push_str("# Image list with two lines of data per image:\n");
    images.push_str("#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n");
    images.push_str("#   POINTS2D[] as (X, Y, POINT3D_ID)\n");
    images.push_str(&format!("# Number of images: {}\n", model.images.len()));
    for image in model.images.values() {
        let [qw, qx, qy, qz] = image.rotation;
        let [tx, ty, tz] = image.translation;
        images.push_str(&format!(
            "{} {qw} {qx} {qy} {qz} {tx} {ty} {tz} {} {}\n",
            image.image_id, image.camera_id, image.name
        ));
        let obs: Vec<String> = image
            .observations
            .iter()
            .map(|o| {
                let id = o.point3d_id.map(|p| p.to_string()).unwrap_or_else(|| "-1".into());
                format!("{} {} {}", o.x, o.y, id)
            })
            .collect();
        images.push_str(&obs.join(" "));
        images.push('\n');
    }

    let mut points = String::new();
    points.push_str("# 3D point list with one line of data per point:\n");
    points.push_str("#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n");
    points.push_str(&format!("# Number of points: {}\n", model.points.len()));
    for point in model.points.values() {
        let [x, y, z] = point.xyz;
        let [r, g, b] = point.color;
        points.push_str(&format!(
            "{} {x} {y} {z} {r} {g} {b} {}",
            point.point_id, point.error
        ));
        for entry in &point.track {
            points.push_str(&format!(" {} {}", entry.image_id, entry.obs_index));
        }
        points.push('\n');
    }

    ModelText { cameras, images, points }
}

fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l))
}

/// Extracts the integer from count comments like `Number of images: 42,
/// mean observations per image: 117.3`.
fn declared_count(comment: &str) -> Option<u64> {
    let rest = comment.split("Number of").nth(1)?;
    let after_colon = rest.split(':').nth(1)?;
    after_colon.split(',').next()?.trim().parse().ok()
}

fn check_count(file: &'static str, declared: Option<u64>, found: usize) -> Result<(), ColmapError> {
    match declared {
        Some(declared) if declared != found as u64 => {
            Err(ColmapError::DeclaredCount { file, declared, found: found as u64 })
        }
        _ => Ok(()),
    }
}

fn parse_int(token: &str, what: &str, file: &'static str, line: usize) -> Result<u64, ColmapError> {
    token.parse().map_err(|_| ColmapError::Parse {
        file,
        line,
        detail: format!("bad {what} {token:?}"),
    })
}

/// Splits `n` whitespace-separated tokens off the front of a line and
/// returns them with the trimmed remainder (which may contain spaces).
fn split_leading_tokens(line: &str, n: usize) -> Option<(Vec<&str>, &str)> {
    let mut rest = line.trim_start();
    let mut tokens = Vec::with_capacity(n);
    for _ in 0..n {
        let end = rest.find(char::is_whitespace)?;
        tokens.push(&rest[..end]);
        rest = rest[end..].trim_start();
    }
    Some((tokens, rest.trim_end()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CAMERAS: &str = "\
# Camera list with one line of data per camera:
#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]
# Number of cameras: 2
1 PINHOLE 640 480 400 400 320 240
2 SIMPLE_RADIAL 2048 1365 1975.2 1024 682.5 -0.0412
";

    const IMAGES: &str = "\
# Image list with two lines of data per image:
# Number of images: 2
1 1 0 0 0 0 0 4 1 frame_0001.jpg
100.5 200.25 7 10 20 -1
2 0.7071067811865476 0 0 0.7071067811865476 0 0 4 1 frame 0002.jpg
300 100 7
";

    const POINTS: &str = "\
# 3D point list with one line of data per point:
# Number of points: 1
7 0.5 -0.25 1 200 30 40 0.75 1 0 2 0
";

    fn model() -> SparseModel<f64> {
        parse_model(CAMERAS, IMAGES, POINTS).unwrap()
    }

    #[test]
    fn parses_the_worked_model() {
        let m = model();
        assert_eq!(m.cameras.len(), 2);
        assert_eq!(m.cameras[&2].model, CameraModel::SimpleRadial);
        assert_eq!(m.cameras[&2].fx, m.cameras[&2].fy);
        // Image names keep internal spaces.
        assert_eq!(m.images[&2].name, "frame 0002.jpg");
        assert_eq!(m.images[&1].observations.len(), 2);
        assert_eq!(m.images[&1].observations[1].point3d_id, None);
        assert_eq!(m.points[&7].track.len(), 2);
    }

    #[test]
    fn declared_count_mismatch_is_an_error() {
        let bad = CAMERAS.replace("Number of cameras: 2", "Number of cameras: 3");
        assert!(matches!(
            parse_cameras::<f64>(&bad),
            Err(ColmapError::DeclaredCount { declared: 3, found: 2, .. })
        ));
    }

    #[test]
    fn unknown_model_names_the_string() {
        let err = parse_cameras::<f64>("1 FISHEYE 640 480 1 1 1 1\n").unwrap_err();
        assert!(matches!(err, ColmapError::UnknownModel { model, .. } if model == "FISHEYE"));
    }

    #[test]
    fn duplicate_ids_are_errors() {
        let doubled = format!("{POINTS}7 0 0 1 0 0 0 0.5\n");
        let doubled = doubled.replace("# Number of points: 1", "# Number of points: 2");
        assert!(matches!(
            parse_points::<f64>(&doubled),
            Err(ColmapError::DuplicateId { what: "point", id: 7 })
        ));
    }

    #[test]
    fn missing_observation_line_is_an_error() {
        let truncated = "1 1 0 0 0 0 0 4 1 frame.jpg\n";
        assert!(matches!(
            parse_images::<f64>(truncated),
            Err(ColmapError::Parse { file: "images.txt", .. })
        ));
    }

    #[test]
    fn dangling_references_fail_validation() {
        let mut m = model();
        m.points.get_mut(&7).unwrap().track[0].image_id = 99;
        assert!(matches!(m.validate(), Err(ColmapError::TrackImage { image_id: 99, .. })));

        // Rewriting a tracked observation breaks the track first.
        let mut m = model();
        m.images.get_mut(&1).unwrap().observations[0].point3d_id = Some(42);
        assert!(matches!(
            m.validate(),
            Err(ColmapError::TrackMismatch { point_id: 7, observed: Some(42), .. })
        ));

        // An untracked observation naming an unknown point dangles.
        let mut m = model();
        m.images.get_mut(&1).unwrap().observations[1].point3d_id = Some(42);
        assert!(matches!(m.validate(), Err(ColmapError::DanglingPoint { point_id: 42, .. })));

        let mut m = model();
        m.images.get_mut(&2).unwrap().camera_id = 9;
        assert!(matches!(m.validate(), Err(ColmapError::MissingCamera { camera_id: 9, .. })));
    }

    #[test]
    fn identity_pose_projects_through_the_principal_point() {
        let m = model();
        let point = Point3D {
            point_id: 1,
            xyz: [0.0, 0.0, 4.0],
            color: [0, 0, 0],
            error: 0.0,
            track: vec![],
        };
        // Image 1 has identity rotation and translation (0, 0, 4): the point
        // sits 8 units in front of the camera, on the optical axis.
        match reproject_point(&point, &m.images[&1], &m.cameras[&1]).unwrap() {
            Projection::Pixel { x, y } => {
                assert_eq!((x, y), (320.0, 240.0));
            }
            other => panic!("unexpected projection {other:?}"),
        }
    }

    #[test]
    fn off_axis_point_lands_at_focal_scaled_offset() {
        let m = model();
        let point = Point3D {
            point_id: 1,
            xyz: [1.0, -0.5, 0.0],
            color: [0, 0, 0],
            error: 0.0,
            track: vec![],
        };
        match reproject_point(&point, &m.images[&1], &m.cameras[&1]).unwrap() {
            Projection::Pixel { x, y } => {
                assert_eq!(x, 320.0 + 400.0 * 1.0 / 4.0);
                assert_eq!(y, 240.0 - 400.0 * 0.5 / 4.0);
            }
            other => panic!("unexpected projection {other:?}"),
        }
    }

    #[test]
    fn points_behind_the_camera_are_flagged() {
        let m = model();
        let point = Point3D {
            point_id: 1,
            xyz: [0.0, 0.0, -10.0],
            color: [0, 0, 0],
            error: 0.0,
            track: vec![],
        };
        assert_eq!(
            reproject_point(&point, &m.images[&1], &m.cameras[&1]).unwrap(),
            Projection::BehindCamera
        );
    }

    #[test]
    fn radial_distortion_pushes_points_by_the_k_term() {
        let cam = CameraIntrinsics::<f64> {
            camera_id: 1,
            model: CameraModel::SimpleRadial,
            width: 640,
            height: 480,
            fx: 100.0,
            fy: 100.0,
            px: 0.0,
            py: 0.0,
            k: 0.1,
        };
        let image = ImageRecord {
            image_id: 1,
            rotation: [1.0, 0.0, 0.0, 0.0],
            translation: [0.0, 0.0, 0.0],
            camera_id: 1,
            name: "i".into(),
            observations: vec![],
        };
        let point = Point3D {
            point_id: 1,
            xyz: [1.0, 0.0, 1.0],
            color: [0, 0, 0],
            error: 0.0,
            track: vec![],
        };
        match reproject_point(&point, &image, &cam).unwrap() {
            // u = 1, r^2 = 1, so x = 100 * 1 * (1 + 0.1) = 110.
            Projection::Pixel { x, y } => {
                assert!((x - 110.0).abs() < 1e-12);
                assert!(y.abs() < 1e-12);
            }
            other => panic!("unexpected projection {other:?}"),
        }
    }

    #[test]
    fn serialize_parse_round_trip_is_identity() {
        let m = model();
        let text = serialize_model(&m);
        let again = parse_model::<f64>(&text.cameras, &text.images, &text.points).unwrap();
        assert_eq!(again, m);
        // Serialising the reparsed model reproduces the bytes exactly.
        assert_eq!(serialize_model(&again), text);
    }

    #[test]
    fn quarter_turn_rotation_matches_hand_computation() {
        let m = model();
        // Image 2 rotates 90 degrees about +z: world x maps to camera y.
        let point = Point3D {
            point_id: 1,
            xyz: [1.0, 0.0, 0.0],
            color: [0, 0, 0],
            error: 0.0,
            track: vec![],
        };
        match reproject_point(&point, &m.images[&2], &m.cameras[&1]).unwrap() {
            Projection::Pixel { x, y } => {
                assert!((x - 320.0).abs() < 1e-9);
                assert!((y - (240.0 + 400.0 / 4.0)).abs() < 1e-9);
            }
            other => panic!("unexpected projection {other:?}"),
        }
    }
}
