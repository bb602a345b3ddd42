//! Scribble-driven instance segmentation for single-cluster image crops.
//!
//! The crop is oversegmented with a marker-based watershed on its
//! morphological gradient (shallow minima are first levelled with an
//! h-minima transform), the resulting regions become vertices of an
//! adjacency graph carrying mean colour, centroid, and pixel count, and
//! user scribbles pin labels onto the regions they touch. Every remaining
//! region is then assigned the label of the attribute-closest scribbled
//! region, where cost is the colour distance (normalized by the RGB cube
//! diagonal) plus `lambda` times the centroid distance (normalized by the
//! crop diagonal). The grape-labelled pixels inside the cluster's box
//! become the output instance mask.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::{Bitmap, InstanceMask, MaskError, PixelRect};
use crate::num::Real;
use crate::ppm::{GrayRaster, RgbRaster};

#[derive(Debug, Error)]
pub enum ScribbleError {
    #[error("raster is empty")]
    EmptyRaster,
    #[error("region map is {map:?} but the crop is {crop:?}")]
    DimensionMismatch { map: (u32, u32), crop: (u32, u32) },
    #[error("scribble pixel ({x}, {y}) lies outside the {width}x{height} crop")]
    PixelOutOfBounds { x: u32, y: u32, width: u32, height: u32 },
    #[error("scribbles pin no region to the {0:?} label")]
    UnseededLabel(&'static str),
    #[error("box {bounds:?} does not fit inside the {width}x{height} crop")]
    BadBounds { bounds: PixelRect, width: u32, height: u32 },
    #[error("malformed scribble file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Mask(#[from] MaskError),
}

const UNLABELED: u32 = u32::MAX;
const RIDGE: u32 = u32::MAX - 1;

/// Dense per-pixel region labels `0..n_regions`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMap {
    width: u32,
    height: u32,
    labels: Vec<u32>,
    n_regions: u32,
}

impl RegionMap {
    #[inline]
    pub fn label(&self, x: u32, y: u32) -> u32 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn n_regions(&self) -> u32 {
        self.n_regions
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }
}

/// Watershed oversegmentation of a luminance raster. `h_minima` levels
/// gradient minima shallower than that depth, which controls how fine the
/// oversegmentation is. Ridge pixels are absorbed into the 4-adjacent
/// region whose mean luminance is closest (ties to the lower region id),
/// so every pixel ends up with a region label.
pub fn watershed_oversegment(image: &GrayRaster, h_minima: u8) -> Result<RegionMap, ScribbleError> {
    let (width, height) = (image.width as usize, image.height as usize);
    if width == 0 || height == 0 {
        return Err(ScribbleError::EmptyRaster);
    }
    let gradient = morphological_gradient(image);
    let filled = suppress_shallow_minima(&gradient, width, height, h_minima);
    let mut labels = label_regional_minima(&filled, width, height);
    flood(&filled, &mut labels, width, height);
    absorb_ridges(image, &mut labels, width, height);
    let n_regions = relabel_dense(&mut labels);
    Ok(RegionMap { width: image.width, height: image.height, labels, n_regions })
}

/// 3x3 dilation minus 3x3 erosion, clipped at the raster border.
fn morphological_gradient(image: &GrayRaster) -> Vec<u8> {
    let (width, height) = (image.width as usize, image.height as usize);
    let mut out = vec![0u8; width * height];
    for y in 0..height {
        for x in 0..width {
            let mut lo = u8::MAX;
            let mut hi = u8::MIN;
            for ny in y.saturating_sub(1)..=(y + 1).min(height - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(width - 1) {
                    let v = image.data[ny * width + nx];
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            out[y * width + x] = hi - lo;
        }
    }
    out
}

/// H-minima transform: morphological reconstruction by erosion of
/// `gradient + h` over `gradient`, computed through the dilation dual on
/// the inverted raster.
fn suppress_shallow_minima(gradient: &[u8], width: usize, height: usize, h: u8) -> Vec<u8> {
    let mask: Vec<u8> = gradient.iter().map(|&g| 255 - g).collect();
    let mut marker: Vec<u8> = mask.iter().map(|&m| m.saturating_sub(h)).collect();
    reconstruct_by_dilation(&mut marker, &mask, width, height);
    marker.iter().map(|&m| 255 - m).collect()
}

/// Vincent's hybrid grayscale reconstruction: two raster scans followed by
/// a FIFO sweep. `marker` must start pointwise below `mask`.
fn reconstruct_by_dilation(marker: &mut [u8], mask: &[u8], width: usize, height: usize) {
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            let mut m = marker[i];
            if x > 0 {
                m = m.max(marker[i - 1]);
            }
            if y > 0 {
                m = m.max(marker[i - width]);
            }
            marker[i] = m.min(mask[i]);
        }
    }
    let mut queue = VecDeque::new();
    for y in (0..height).rev() {
        for x in (0..width).rev() {
            let i = y * width + x;
            let mut m = marker[i];
            if x + 1 < width {
                m = m.max(marker[i + 1]);
            }
            if y + 1 < height {
                m = m.max(marker[i + width]);
            }
            marker[i] = m.min(mask[i]);
            let needs_push = |j: usize| marker[j] < marker[i] && marker[j] < mask[j];
            if (x + 1 < width && needs_push(i + 1)) || (y + 1 < height && needs_push(i + width)) {
                queue.push_back(i);
            }
        }
    }
    while let Some(i) = queue.pop_front() {
        let x = i % width;
        let y = i / width;
        let mut visit = |j: usize, queue: &mut VecDeque<usize>| {
            if marker[j] < marker[i] && marker[j] < mask[j] {
                marker[j] = marker[i].min(mask[j]);
                queue.push_back(j);
            }
        };
        if x > 0 {
            visit(i - 1, &mut queue);
        }
        if x + 1 < width {
            visit(i + 1, &mut queue);
        }
        if y > 0 {
            visit(i - width, &mut queue);
        }
        if y + 1 < height {
            visit(i + width, &mut queue);
        }
    }
}

/// Labels every regional minimum plateau (4-connected equal-value component
/// with no strictly lower neighbour) in row-major discovery order.
fn label_regional_minima(values: &[u8], width: usize, height: usize) -> Vec<u32> {
    let mut labels = vec![UNLABELED; values.len()];
    let mut visited = vec![false; values.len()];
    let mut next = 0u32;
    for start in 0..values.len() {
        if visited[start] {
            continue;
        }
        // Flood the plateau containing `start`.
        let level = values[start];
        let mut plateau = vec![start];
        let mut stack = vec![start];
        visited[start] = true;
        let mut is_minimum = true;
        while let Some(i) = stack.pop() {
            for j in neighbors4(i, width, height) {
                if values[j] < level {
                    is_minimum = false;
                } else if values[j] == level && !visited[j] {
                    visited[j] = true;
                    plateau.push(j);
                    stack.push(j);
                }
            }
        }
        if is_minimum {
            for i in plateau {
                labels[i] = next;
            }
            next += 1;
        }
    }
    labels
}

/// Meyer's flooding: pixels enter a priority queue keyed by (value,
/// insertion order) and adopt the label of their flooded side; pixels
/// reached by two labels at once become ridge pixels.
fn flood(values: &[u8], labels: &mut [u32], width: usize, height: usize) {
    let mut heap: BinaryHeap<Reverse<(u8, u64, usize)>> = BinaryHeap::new();
    let mut queued = vec![false; values.len()];
    let mut seq = 0u64;
    let push = |heap: &mut BinaryHeap<_>, queued: &mut Vec<bool>, seq: &mut u64, i: usize| {
        if !queued[i] {
            queued[i] = true;
            heap.push(Reverse((values[i], *seq, i)));
            *seq += 1;
        }
    };
    for i in 0..values.len() {
        if labels[i] != UNLABELED {
            for j in neighbors4(i, width, height) {
                if labels[j] == UNLABELED {
                    push(&mut heap, &mut queued, &mut seq, j);
                }
            }
        }
    }
    while let Some(Reverse((_, _, i))) = heap.pop() {
        if labels[i] != UNLABELED {
            continue;
        }
        let mut adjacent: Option<u32> = None;
        let mut conflict = false;
        for j in neighbors4(i, width, height) {
            let l = labels[j];
            if l < RIDGE {
                match adjacent {
                    None => adjacent = Some(l),
                    Some(prev) if prev != l => conflict = true,
                    _ => {}
                }
            }
        }
        match (adjacent, conflict) {
            (Some(label), false) => {
                labels[i] = label;
                for j in neighbors4(i, width, height) {
                    if labels[j] == UNLABELED {
                        push(&mut heap, &mut queued, &mut seq, j);
                    }
                }
            }
            (Some(_), true) => labels[i] = RIDGE,
            // Every queued pixel had a labelled neighbour when pushed and
            // labels are never retracted.
            (None, _) => unreachable!("queued pixel lost its labelled neighbour"),
        }
    }
}

/// Assigns ridge (and any stranded) pixels to the 4-adjacent region with
/// the closest mean luminance, ties to the lower region id. Means are
/// frozen at flood completion, and pixels are absorbed in repeated
/// row-major passes so the result is order-independent and deterministic.
fn absorb_ridges(image: &GrayRaster, labels: &mut [u32], width: usize, height: usize) {
    let mut sums: BTreeMap<u32, (u64, u64)> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        if l < RIDGE {
            let slot = sums.entry(l).or_insert((0, 0));
            slot.0 += image.data[i] as u64;
            slot.1 += 1;
        }
    }
    let mean = |label: u32, sums: &BTreeMap<u32, (u64, u64)>| {
        let (total, count) = sums[&label];
        total as f64 / count as f64
    };
    loop {
        let mut progressed = false;
        let mut unresolved = false;
        for i in 0..labels.len() {
            if labels[i] < RIDGE {
                continue;
            }
            let mut best: Option<(f64, u32)> = None;
            for j in neighbors4(i, width, height) {
                let l = labels[j];
                if l >= RIDGE {
                    continue;
                }
                let d = (image.data[i] as f64 - mean(l, &sums)).abs();
                let better = match best {
                    None => true,
                    Some((bd, bl)) => d < bd || (d == bd && l < bl),
                };
                if better {
                    best = Some((d, l));
                }
            }
            match best {
                Some((_, l)) => {
                    labels[i] = l;
                    progressed = true;
                }
                None => unresolved = true,
            }
        }
        if !unresolved {
            break;
        }
        assert!(progressed, "stranded pixels must border a region eventually");
    }
}

/// Renumbers labels to `0..n` in row-major first-occurrence order.
fn relabel_dense(labels: &mut [u32]) -> u32 {
    let mut remap: BTreeMap<u32, u32> = BTreeMap::new();
    for l in labels.iter_mut() {
        let next = remap.len() as u32;
        *l = *remap.entry(*l).or_insert(next);
    }
    remap.len() as u32
}

fn neighbors4(i: usize, width: usize, height: usize) -> impl Iterator<Item = usize> {
    let x = i % width;
    let y = i / width;
    [
        (x > 0).then(|| i - 1),
        (x + 1 < width).then(|| i + 1),
        (y > 0).then(|| i - width),
        (y + 1 < height).then(|| i + width),
    ]
    .into_iter()
    .flatten()
}

/// One watershed region as a graph vertex: exact mean colour, centroid,
/// and pixel count.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionVertex<F> {
    pub mean_color: [F; 3],
    pub centroid: [F; 2],
    pub pixels: u32,
}

/// Region adjacency graph. Edge keys are `(lower id, higher id)`; the
/// relation vector is the centroid displacement from the lower to the
/// higher region, normalized by the crop diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGraph<F> {
    pub vertices: Vec<RegionVertex<F>>,
    pub edges: BTreeMap<(u32, u32), [F; 2]>,
    pub diagonal: F,
}

pub fn build_arg<F: Real>(
    regions: &RegionMap,
    crop: &RgbRaster,
) -> Result<RegionGraph<F>, ScribbleError> {
    if (regions.width, regions.height) != (crop.width, crop.height) {
        return Err(ScribbleError::DimensionMismatch {
            map: (regions.width, regions.height),
            crop: (crop.width, crop.height),
        });
    }
    let n = regions.n_regions as usize;
    let mut color_sums = vec![[0u64; 3]; n];
    let mut coord_sums = vec![[0u64; 2]; n];
    let mut counts = vec![0u64; n];
    let mut adjacent: BTreeMap<(u32, u32), ()> = BTreeMap::new();
    for y in 0..regions.height {
        for x in 0..regions.width {
            let l = regions.label(x, y) as usize;
            let rgb = crop.get(x, y);
            for c in 0..3 {
                color_sums[l][c] += rgb[c] as u64;
            }
            coord_sums[l][0] += x as u64;
            coord_sums[l][1] += y as u64;
            counts[l] += 1;
            for (nx, ny) in [(x + 1, y), (x, y + 1)] {
                if nx < regions.width && ny < regions.height {
                    let m = regions.label(nx, ny);
                    if m != l as u32 {
                        adjacent.insert((l.min(m as usize) as u32, (l as u32).max(m)), ());
                    }
                }
            }
        }
    }
    let vertices: Vec<RegionVertex<F>> = (0..n)
        .map(|l| {
            let count = F::from_u64(counts[l]).unwrap();
            RegionVertex {
                mean_color: [
                    F::from_u64(color_sums[l][0]).unwrap() / count,
                    F::from_u64(color_sums[l][1]).unwrap() / count,
                    F::from_u64(color_sums[l][2]).unwrap() / count,
                ],
                centroid: [
                    F::from_u64(coord_sums[l][0]).unwrap() / count,
                    F::from_u64(coord_sums[l][1]).unwrap() / count,
                ],
                pixels: counts[l] as u32,
            }
        })
        .collect();
    let diagonal = (F::from_u32(crop.width).unwrap().powi(2)
        + F::from_u32(crop.height).unwrap().powi(2))
    .sqrt();
    let edges = adjacent
        .into_keys()
        .map(|(a, b)| {
            let d = [
                (vertices[b as usize].centroid[0] - vertices[a as usize].centroid[0]) / diagonal,
                (vertices[b as usize].centroid[1] - vertices[a as usize].centroid[1]) / diagonal,
            ];
            ((a, b), d)
        })
        .collect();
    Ok(RegionGraph { vertices, edges, diagonal })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScribbleLabel {
    Grape,
    Background,
}

/// A user stroke: a label and the pixels it passes through.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stroke {
    pub label: ScribbleLabel,
    pub pixels: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScribbleSet {
    pub strokes: Vec<Stroke>,
}

impl ScribbleSet {
    pub fn from_json(text: &str) -> Result<Self, ScribbleError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scribble encoding")
    }
}

/// Propagates scribble labels to every region. Scribbled regions take
/// their majority label (ties to background); every other region copies
/// the label of the scribbled region with the lowest attribute cost
/// (colour plus `lambda` times centroid distance, both normalized), ties
/// to the lower region id. Running the output back in as full-coverage
/// scribbles reproduces itself.
pub fn propagate_labels<F: Real>(
    graph: &RegionGraph<F>,
    regions: &RegionMap,
    scribbles: &ScribbleSet,
    lambda: F,
) -> Result<Vec<ScribbleLabel>, ScribbleError> {
    let n = regions.n_regions() as usize;
    let mut votes = vec![(0u32, 0u32); n];
    for stroke in &scribbles.strokes {
        for &(x, y) in &stroke.pixels {
            if x >= regions.width || y >= regions.height {
                return Err(ScribbleError::PixelOutOfBounds {
                    x,
                    y,
                    width: regions.width,
                    height: regions.height,
                });
            }
            let r = regions.label(x, y) as usize;
            match stroke.label {
                ScribbleLabel::Grape => votes[r].0 += 1,
                ScribbleLabel::Background => votes[r].1 += 1,
            }
        }
    }
    let mut seeds: Vec<Option<ScribbleLabel>> = votes
        .iter()
        .map(|&(grape, background)| {
            if grape + background == 0 {
                None
            } else if grape > background {
                Some(ScribbleLabel::Grape)
            } else {
                Some(ScribbleLabel::Background)
            }
        })
        .collect();
    let models: Vec<(u32, ScribbleLabel)> = seeds
        .iter()
        .enumerate()
        .filter_map(|(r, s)| s.map(|label| (r as u32, label)))
        .collect();
    for (label, name) in
        [(ScribbleLabel::Grape, "grape"), (ScribbleLabel::Background, "background")]
    {
        if !models.iter().any(|(_, l)| *l == label) {
            return Err(ScribbleError::UnseededLabel(name));
        }
    }

    let color_norm = F::from_u32(255).unwrap() * F::from_u8(3).unwrap().sqrt();
    for r in 0..n {
        if seeds[r].is_some() {
            continue;
        }
        let v = &graph.vertices[r];
        let mut best: Option<(F, u32, ScribbleLabel)> = None;
        for &(m, label) in &models {
            let mv = &graph.vertices[m as usize];
            let color = ((v.mean_color[0] - mv.mean_color[0]).powi(2)
                + (v.mean_color[1] - mv.mean_color[1]).powi(2)
                + (v.mean_color[2] - mv.mean_color[2]).powi(2))
            .sqrt()
                / color_norm;
            let spatial = ((v.centroid[0] - mv.centroid[0]).powi(2)
                + (v.centroid[1] - mv.centroid[1]).powi(2))
            .sqrt()
                / graph.diagonal;
            let cost = color + lambda * spatial;
            // Strict comparison keeps the lowest model id on cost ties.
            if best.map(|(b, _, _)| cost < b).unwrap_or(true) {
                best = Some((cost, m, label));
            }
        }
        seeds[r] = best.map(|(_, _, label)| label);
    }
    Ok(seeds.into_iter().map(|s| s.expect("all regions labelled")).collect())
}

/// Collects the grape-labelled pixels inside `bounds` into an instance
/// mask over the box's own raster (box-local coordinates).
pub fn extract_instance_mask<F: Real>(
    labels: &[ScribbleLabel],
    regions: &RegionMap,
    bounds: PixelRect,
) -> Result<InstanceMask<F>, ScribbleError> {
    let fits = bounds.w >= 1
        && bounds.h >= 1
        && bounds.x.checked_add(bounds.w).map(|r| r <= regions.width).unwrap_or(false)
        && bounds.y.checked_add(bounds.h).map(|b| b <= regions.height).unwrap_or(false);
    if !fits {
        return Err(ScribbleError::BadBounds {
            bounds,
            width: regions.width,
            height: regions.height,
        });
    }
    let mut bitmap = Bitmap::new(bounds.w, bounds.h);
    for y in 0..bounds.h {
        for x in 0..bounds.w {
            let region = regions.label(bounds.x + x, bounds.y + y) as usize;
            if labels[region] == ScribbleLabel::Grape {
                bitmap.set(x, y, true);
            }
        }
    }
    Ok(InstanceMask::new(bitmap, F::one())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_valid_region_map(map: &RegionMap) {
        let n = map.n_regions();
        assert!(n >= 1);
        let mut seen = vec![false; n as usize];
        let mut first = vec![usize::MAX; n as usize];
        for (i, &l) in map.labels().iter().enumerate() {
            assert!(l < n, "labels must be dense");
            seen[l as usize] = true;
            first[l as usize] = first[l as usize].min(i);
        }
        assert!(seen.iter().all(|&s| s), "every region id must be used");
        assert!(first.windows(2).all(|w| w[0] < w[1]), "ids follow first occurrence");
        // Each region must be one 4-connected component.
        for region in 0..n {
            let start = first[region as usize];
            let mut stack = vec![start];
            let mut visited = std::collections::BTreeSet::from([start]);
            while let Some(i) = stack.pop() {
                for j in neighbors4(i, map.width as usize, map.height as usize) {
                    if map.labels()[j] == region && visited.insert(j) {
                        stack.push(j);
                    }
                }
            }
            let total = map.labels().iter().filter(|&&l| l == region).count();
            assert_eq!(visited.len(), total, "region {region} must be connected");
        }
    }

    fn two_tone(width: u32, height: u32, left: u8, right: u8) -> GrayRaster {
        let data = (0..height)
            .flat_map(|_| {
                (0..width).map(move |x| if x < width / 2 { left } else { right })
            })
            .collect();
        GrayRaster { width, height, data }
    }

    #[test]
    fn constant_image_becomes_one_region() {
        let img = GrayRaster { width: 12, height: 9, data: vec![77; 108] };
        let map = watershed_oversegment(&img, 8).unwrap();
        assert_eq!(map.n_regions(), 1);
        assert!(map.labels().iter().all(|&l| l == 0));
        assert_valid_region_map(&map);
    }

    #[test]
    fn two_tone_image_splits_into_two_regions() {
        let img = two_tone(16, 8, 20, 220);
        let map = watershed_oversegment(&img, 8).unwrap();
        assert_eq!(map.n_regions(), 2);
        assert_eq!(map.label(0, 0), 0);
        assert_eq!(map.label(15, 7), 1);
        // The split follows the tone edge exactly: dark pixels to region 0.
        for y in 0..8 {
            for x in 0..16 {
                assert_eq!(map.label(x, y), (x >= 8) as u32, "at ({x}, {y})");
            }
        }
        assert_valid_region_map(&map);
    }

    #[test]
    fn oversegmentation_is_deterministic() {
        // Pseudo-random but fixed texture.
        let data: Vec<u8> = (0..64 * 48).map(|i| ((i * 2654435761u64 as usize) >> 7) as u8).collect();
        let img = GrayRaster { width: 64, height: 48, data };
        let a = watershed_oversegment(&img, 8).unwrap();
        let b = watershed_oversegment(&img, 8).unwrap();
        assert_eq!(a, b);
        assert_valid_region_map(&a);
    }

    #[test]
    fn deeper_h_minima_merges_more() {
        let mut img = two_tone(24, 8, 100, 130);
        // A faint stripe that only survives with a small h.
        for y in 0..8 {
            img.data[y * 24 + 4] = 110;
        }
        let fine = watershed_oversegment(&img, 2).unwrap();
        let coarse = watershed_oversegment(&img, 40).unwrap();
        assert!(coarse.n_regions() <= fine.n_regions());
        assert_eq!(coarse.n_regions(), 1);
    }

    fn half_crop() -> (RegionMap, RgbRaster) {
        let img = two_tone(16, 8, 20, 220);
        let map = watershed_oversegment(&img, 8).unwrap();
        let mut crop = RgbRaster::filled(16, 8, [20, 20, 20]);
        for y in 0..8 {
            for x in 8..16 {
                crop.set(x, y, [220, 220, 220]);
            }
        }
        (map, crop)
    }

    #[test]
    fn half_and_half_graph_has_one_left_to_right_edge() {
        let (map, crop) = half_crop();
        let graph = build_arg::<f64>(&map, &crop).unwrap();
        assert_eq!(graph.vertices.len(), 2);
        assert_eq!(graph.edges.len(), 1);
        let relation = graph.edges[&(0, 1)];
        assert!(relation[0] > 0.0, "points from left region to right");
        assert_eq!(relation[1], 0.0);
        // Exact attribute means.
        assert_eq!(graph.vertices[0].mean_color, [20.0, 20.0, 20.0]);
        assert_eq!(graph.vertices[0].centroid, [3.5, 3.5]);
        assert_eq!(graph.vertices[1].centroid, [11.5, 3.5]);
        assert_eq!(graph.vertices[0].pixels + graph.vertices[1].pixels, 16 * 8);
    }

    #[test]
    fn scribbles_fix_their_regions_and_propagate_by_attribute_cost() {
        let (map, crop) = half_crop();
        let graph = build_arg::<f64>(&map, &crop).unwrap();
        let scribbles = ScribbleSet {
            strokes: vec![
                Stroke { label: ScribbleLabel::Grape, pixels: vec![(12, 4), (13, 4)] },
                Stroke { label: ScribbleLabel::Background, pixels: vec![(2, 2)] },
            ],
        };
        let labels = propagate_labels(&graph, &map, &scribbles, 0.5).unwrap();
        assert_eq!(labels, vec![ScribbleLabel::Background, ScribbleLabel::Grape]);
    }

    #[test]
    fn majority_voting_breaks_ties_toward_background() {
        let (map, crop) = half_crop();
        let graph = build_arg::<f64>(&map, &crop).unwrap();
        let scribbles = ScribbleSet {
            strokes: vec![
                // One grape and one background pixel on region 1: tie.
                Stroke { label: ScribbleLabel::Grape, pixels: vec![(12, 4)] },
                Stroke { label: ScribbleLabel::Background, pixels: vec![(13, 4)] },
                Stroke { label: ScribbleLabel::Grape, pixels: vec![(2, 2)] },
            ],
        };
        let labels = propagate_labels(&graph, &map, &scribbles, 0.5).unwrap();
        assert_eq!(labels[1], ScribbleLabel::Background);
        assert_eq!(labels[0], ScribbleLabel::Grape);
    }

    #[test]
    fn propagation_is_idempotent_under_full_coverage() {
        let (map, crop) = half_crop();
        let graph = build_arg::<f64>(&map, &crop).unwrap();
        let scribbles = ScribbleSet {
            strokes: vec![
                Stroke { label: ScribbleLabel::Grape, pixels: vec![(12, 4)] },
                Stroke { label: ScribbleLabel::Background, pixels: vec![(2, 2)] },
            ],
        };
        let labels = propagate_labels(&graph, &map, &scribbles, 0.5).unwrap();
        // Feed every pixel back as a scribble of its assigned label.
        let full = ScribbleSet {
            strokes: (0..map.height())
                .flat_map(|y| (0..map.width()).map(move |x| (x, y)))
                .map(|(x, y)| Stroke {
                    label: labels[map.label(x, y) as usize],
                    pixels: vec![(x, y)],
                })
                .collect(),
        };
        let again = propagate_labels(&graph, &map, &full, 0.5).unwrap();
        assert_eq!(again, labels);
    }

    #[test]
    fn missing_label_coverage_is_an_error() {
        let (map, crop) = half_crop();
        let graph = build_arg::<f64>(&map, &crop).unwrap();
        let scribbles = ScribbleSet {
            strokes: vec![Stroke { label: ScribbleLabel::Grape, pixels: vec![(12, 4)] }],
        };
        assert!(matches!(
            propagate_labels(&graph, &map, &scribbles, 0.5),
            Err(ScribbleError::UnseededLabel("background"))
        ));
    }

    #[test]
    fn out_of_bounds_scribbles_are_rejected() {
        let (map, crop) = half_crop();
        let graph = build_arg::<f64>(&map, &crop).unwrap();
        let scribbles = ScribbleSet {
            strokes: vec![Stroke { label: ScribbleLabel::Grape, pixels: vec![(99, 0)] }],
        };
        assert!(matches!(
            propagate_labels(&graph, &map, &scribbles, 0.5),
            Err(ScribbleError::PixelOutOfBounds { x: 99, .. })
        ));
    }

    #[test]
    fn instance_mask_is_box_local() {
        let (map, crop) = half_crop();
        let graph = build_arg::<f64>(&map, &crop).unwrap();
        let scribbles = ScribbleSet {
            strokes: vec![
                Stroke { label: ScribbleLabel::Grape, pixels: vec![(12, 4)] },
                Stroke { label: ScribbleLabel::Background, pixels: vec![(2, 2)] },
            ],
        };
        let labels = propagate_labels(&graph, &map, &scribbles, 0.5).unwrap();
        let bounds = PixelRect { x: 6, y: 2, w: 6, h: 4 };
        let mask = extract_instance_mask::<f64>(&labels, &map, bounds).unwrap();
        assert_eq!((mask.width(), mask.height()), (6, 4));
        // Columns 6..8 of the crop are background, 8..12 grape.
        assert_eq!(mask.popcount(), 4 * 4);
        assert!(!mask.contains(0, 0));
        assert!(mask.contains(2, 0));
        // A box fully over background pixels yields no mask.
        let empty = extract_instance_mask::<f64>(&labels, &map, PixelRect { x: 0, y: 0, w: 4, h: 4 });
        assert!(matches!(empty, Err(ScribbleError::Mask(MaskError::EmptyMask))));
        // Boxes must stay inside the crop.
        let out = extract_instance_mask::<f64>(&labels, &map, PixelRect { x: 12, y: 0, w: 10, h: 4 });
        assert!(matches!(out, Err(ScribbleError::BadBounds { .. })));
    }

    #[test]
    fn scribble_json_round_trips() {
        let set = ScribbleSet {
            strokes: vec![Stroke { label: ScribbleLabel::Grape, pixels: vec![(1, 2), (3, 4)] }],
        };
        let text = set.to_json();
        assert!(text.contains("\"grape\""));
        let back = ScribbleSet::from_json(&text).unwrap();
        assert_eq!(back.strokes[0].pixels, vec![(1, 2), (3, 4)]);
        assert!(ScribbleSet::from_json("{\"strokes\": [{\"label\": \"vine\"}]}").is_err());
    }
}
