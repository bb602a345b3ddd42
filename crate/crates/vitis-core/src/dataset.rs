//! Directory index for a vineyard image dataset: one box file per image
//! (`<id>.txt`), optional mask payloads (`<id>.npz`, `<id>.npy`, or
//! `<id>.rle`), optional `train.txt`/`test.txt` split lists, and an
//! optional `dims.txt` sidecar declaring per-image pixel resolutions as
//! `<id> <width> <height>` lines.
//!
//! Image ids encode their grape variety as the prefix before the first
//! underscore (`CDY_2015_0714` belongs to variety `CDY`).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// File names that are never image ids.
const RESERVED: [&str; 3] = ["train", "test", "dims"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{list} names unknown image id {id:?}")]
    UnknownSplitId { list: &'static str, id: String },
    #[error("{list} repeats image id {id:?}")]
    RepeatedSplitId { list: &'static str, id: String },
    #[error("image id {0:?} appears in both train.txt and test.txt")]
    SplitOverlap(String),
    #[error("dims.txt line {line}: expected `<id> <width> <height>`, got {raw:?}")]
    DimsSyntax { line: usize, raw: String },
    #[error("dims.txt names unknown image id {0:?}")]
    UnknownDimsId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub image_id: String,
    pub variety: String,
    pub box_path: PathBuf,
    pub mask_path: Option<PathBuf>,
    pub split: Option<Split>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VarietyCount {
    pub images: usize,
    pub with_masks: usize,
    pub train: usize,
    pub test: usize,
}

/// Index of one dataset directory, entries sorted by image id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetIndex {
    pub entries: Vec<DatasetEntry>,
    pub dims: BTreeMap<String, (u32, u32)>,
}

impl DatasetIndex {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.image_id.as_str())
    }

    pub fn entry(&self, image_id: &str) -> Option<&DatasetEntry> {
        self.entries
            .binary_search_by(|e| e.image_id.as_str().cmp(image_id))
            .ok()
            .map(|i| &self.entries[i])
    }

    /// Image counts grouped by variety prefix.
    pub fn variety_histogram(&self) -> BTreeMap<&str, VarietyCount> {
        let mut hist: BTreeMap<&str, VarietyCount> = BTreeMap::new();
        for e in &self.entries {
            let slot = hist.entry(e.variety.as_str()).or_default();
            slot.images += 1;
            slot.with_masks += e.mask_path.is_some() as usize;
            match e.split {
                Some(Split::Train) => slot.train += 1,
                Some(Split::Test) => slot.test += 1,
                None => {}
            }
        }
        hist
    }
}

/// Scans a dataset directory. Split lists must be disjoint and may only
/// name images that exist; ids outside both lists stay unassigned.
pub fn load_dataset_index(root: &Path) -> Result<DatasetIndex, DatasetError> {
    let read = |path: &Path| {
        fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.into(), source })
    };
    let listing = fs::read_dir(root)
        .map_err(|source| DatasetError::Io { path: root.into(), source })?
        .collect::<Result<Vec<_>, _>>()
        .map_err(|source| DatasetError::Io { path: root.into(), source })?;

    let mut entries: BTreeMap<String, DatasetEntry> = BTreeMap::new();
    for dirent in &listing {
        let path = dirent.path();
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
        if RESERVED.contains(&stem) {
            continue;
        }
        let variety = stem.split('_').next().unwrap_or(stem).to_string();
        let mask_path = ["npz", "npy", "rle"]
            .iter()
            .map(|ext| root.join(format!("{stem}.{ext}")))
            .find(|p| p.is_file());
        entries.insert(
            stem.to_string(),
            DatasetEntry {
                image_id: stem.to_string(),
                variety,
                box_path: path.clone(),
                mask_path,
                split: None,
            },
        );
    }

    for (list, split) in [("train.txt", Split::Train), ("test.txt", Split::Test)] {
        let path = root.join(list);
        if !path.is_file() {
            continue;
        }
        let name: &'static str = if split == Split::Train { "train.txt" } else { "test.txt" };
        for raw in read(&path)?.lines() {
            let id = raw.trim();
            if id.is_empty() {
                continue;
            }
            let entry = entries
                .get_mut(id)
                .ok_or_else(|| DatasetError::UnknownSplitId { list: name, id: id.into() })?;
            match entry.split {
                None => entry.split = Some(split),
                Some(prev) if prev == split => {
                    return Err(DatasetError::RepeatedSplitId { list: name, id: id.into() })
                }
                Some(_) => return Err(DatasetError::SplitOverlap(id.into())),
            }
        }
    }

    let mut dims = BTreeMap::new();
    let dims_path = root.join("dims.txt");
    if dims_path.is_file() {
        for (i, raw) in read(&dims_path)?.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split_whitespace().collect();
            let parsed = (fields.len() == 3)
                .then(|| Some((fields[1].parse().ok()?, fields[2].parse().ok()?)))
                .flatten();
            let Some((w, h)) = parsed else {
                return Err(DatasetError::DimsSyntax { line: i + 1, raw: raw.into() });
            };
            if !entries.contains_key(fields[0]) {
                return Err(DatasetError::UnknownDimsId(fields[0].into()));
            }
            dims.insert(fields[0].to_string(), (w, h));
        }
    }

    Ok(DatasetIndex { entries: entries.into_values().collect(), dims })
}
