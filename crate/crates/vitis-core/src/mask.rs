//! Binary instance masks, bit-packed for fast overlap counting, plus the
//! text run-length codec used to move masks between tools.
//!
//! A mask raster is stored row-major with each row padded to a 64-bit word
//! boundary; padding bits are kept at zero so whole-word population counts
//! are exact. [`InstanceMask`] wraps a non-empty [`Bitmap`] with a tight
//! bounding rectangle and a detection confidence; [`MaskStack`] is the
//! in-memory form of a `H x W x n` annotation array.

use thiserror::Error;

use crate::npy::{self, NpyError};
use crate::num::Real;
use crate::yolo::BoundingBox;

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("mask has no set pixels")]
    EmptyMask,
    #[error("confidence {0} outside [0, 1]")]
    Confidence(f64),
    #[error("raster is {found:?} but {expected:?} was required")]
    DimensionMismatch { expected: (u32, u32), found: (u32, u32) },
    #[error("bad run-length header: {0}")]
    RleHeader(String),
    #[error("bad run token {token:?} in run-length record")]
    RleToken { token: String },
    #[error("zero-length run at position {index} (only the leading run may be zero)")]
    RleNonCanonical { index: usize },
    #[error("run lengths sum to {found}, raster holds {expected} pixels")]
    RleSum { expected: u64, found: u64 },
    #[error("stack slice {index} is empty")]
    StackSliceEmpty { index: usize },
    #[error("stack carries {masks} masks but {confidences} confidences")]
    ConfidenceCount { masks: usize, confidences: usize },
    #[error("array shape {0:?} is not a mask stack (want H x W or H x W x n)")]
    StackShape(Vec<usize>),
    #[error("unrecognised mask payload (not NPY, NPZ, or an RLE record)")]
    UnknownFormat,
    #[error(transparent)]
    Npy(#[from] NpyError),
}

/// Integer rectangle in pixel coordinates: `x..x+w` by `y..y+h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

/// Bit-packed binary raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmap {
    width: u32,
    height: u32,
    words: Vec<u64>,
}

impl Bitmap {
    pub fn new(width: u32, height: u32) -> Self {
        let words = vec![0u64; words_per_row(width) * height as usize];
        Self { width, height, words }
    }

    pub fn from_pixels(
        width: u32,
        height: u32,
        pixels: impl IntoIterator<Item = (u32, u32)>,
    ) -> Self {
        let mut map = Self::new(width, height);
        for (x, y) in pixels {
            map.set(x, y, true);
        }
        map
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    fn word_index(&self, x: u32, y: u32) -> (usize, u64) {
        debug_assert!(x < self.width && y < self.height);
        let idx = y as usize * words_per_row(self.width) + (x / 64) as usize;
        (idx, 1u64 << (x % 64))
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        let (idx, bit) = self.word_index(x, y);
        self.words[idx] & bit != 0
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let (idx, bit) = self.word_index(x, y);
        if value {
            self.words[idx] |= bit;
        } else {
            self.words[idx] &= !bit;
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Number of pixels set in both rasters. Callers must pass equal dims.
    pub fn intersection_count(&self, other: &Self) -> u64 {
        debug_assert_eq!(self.dims(), other.dims());
        self.words.iter().zip(&other.words).map(|(a, b)| (a & b).count_ones() as u64).sum()
    }

    pub fn union_count(&self, other: &Self) -> u64 {
        debug_assert_eq!(self.dims(), other.dims());
        self.words.iter().zip(&other.words).map(|(a, b)| (a | b).count_ones() as u64).sum()
    }

    pub fn or_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.dims(), other.dims());
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    /// Set pixels in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let stride = words_per_row(self.width);
        (0..self.height).flat_map(move |y| {
            let row = &self.words[y as usize * stride..(y as usize + 1) * stride];
            row.iter().enumerate().flat_map(move |(wi, &word)| {
                BitIter { word }.map(move |b| (wi as u32 * 64 + b, y))
            })
        })
    }

    /// Copy shifted by `(dx, dy)`; pixels leaving the raster are dropped.
    pub fn translated(&self, dx: i64, dy: i64) -> Self {
        let mut out = Self::new(self.width, self.height);
        for (x, y) in self.iter_set() {
            let nx = x as i64 + dx;
            let ny = y as i64 + dy;
            if nx >= 0 && ny >= 0 && nx < self.width as i64 && ny < self.height as i64 {
                out.set(nx as u32, ny as u32, true);
            }
        }
        out
    }

    /// Smallest rectangle containing every set pixel, or `None` when empty.
    pub fn tight_rect(&self) -> Option<PixelRect> {
        let (mut min_x, mut min_y, mut max_x, mut max_y) = (u32::MAX, u32::MAX, 0u32, 0u32);
        for (x, y) in self.iter_set() {
            min_x = min_x.min(x);
            min_y = min_y.min(y);
            max_x = max_x.max(x);
            max_y = max_y.max(y);
        }
        (min_x != u32::MAX).then(|| PixelRect {
            x: min_x,
            y: min_y,
            w: max_x - min_x + 1,
            h: max_y - min_y + 1,
        })
    }
}

struct BitIter {
    word: u64,
}

impl Iterator for BitIter {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        if self.word == 0 {
            return None;
        }
        let bit = self.word.trailing_zeros();
        self.word &= self.word - 1;
        Some(bit)
    }
}

#[inline]
fn words_per_row(width: u32) -> usize {
    (width as usize + 63) / 64
}

/// A single detected or annotated instance: non-empty raster, tight box,
/// confidence in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMask<F> {
    bitmap: Bitmap,
    rect: PixelRect,
    confidence: F,
}

impl<F: Real> InstanceMask<F> {
    pub fn new(bitmap: Bitmap, confidence: F) -> Result<Self, MaskError> {
        let c = confidence.to_f64().unwrap_or(f64::NAN);
        if !(0.0..=1.0).contains(&c) {
            return Err(MaskError::Confidence(c));
        }
        let rect = bitmap.tight_rect().ok_or(MaskError::EmptyMask)?;
        Ok(Self { bitmap, rect, confidence })
    }

    pub fn from_pixels(
        width: u32,
        height: u32,
        pixels: impl IntoIterator<Item = (u32, u32)>,
        confidence: F,
    ) -> Result<Self, MaskError> {
        Self::new(Bitmap::from_pixels(width, height, pixels), confidence)
    }

    pub fn bitmap(&self) -> &Bitmap {
        &self.bitmap
    }

    pub fn width(&self) -> u32 {
        self.bitmap.width
    }

    pub fn height(&self) -> u32 {
        self.bitmap.height
    }

    pub fn confidence(&self) -> F {
        self.confidence
    }

    pub fn popcount(&self) -> u64 {
        self.bitmap.count_ones()
    }

    #[inline]
    pub fn contains(&self, x: u32, y: u32) -> bool {
        self.bitmap.get(x, y)
    }

    /// Tight pixel rectangle around the set pixels.
    pub fn rect(&self) -> PixelRect {
        self.rect
    }

    /// Tight box in normalized image coordinates (class 0, mask confidence).
    pub fn bounding_box(&self) -> BoundingBox<F> {
        let w = F::from_u32(self.bitmap.width).unwrap();
        let h = F::from_u32(self.bitmap.height).unwrap();
        let two = F::from_u8(2).unwrap();
        BoundingBox {
            class_id: 0,
            cx: (F::from_u32(self.rect.x).unwrap() + F::from_u32(self.rect.w).unwrap() / two) / w,
            cy: (F::from_u32(self.rect.y).unwrap() + F::from_u32(self.rect.h).unwrap() / two) / h,
            w: F::from_u32(self.rect.w).unwrap() / w,
            h: F::from_u32(self.rect.h).unwrap() / h,
            confidence: self.confidence,
        }
    }

    pub fn to_rle_record(&self) -> String {
        encode_rle(&self.bitmap)
    }

    pub fn from_rle_record(record: &str, confidence: F) -> Result<Self, MaskError> {
        Self::new(decode_rle(record)?, confidence)
    }
}

/// Encodes a raster as alternating run lengths over the row-major pixel
/// sequence, starting with a zero run (possibly of length 0):
///
/// ```text
/// RLE v1 <width> <height>
/// <run>,<run>,...
/// ```
pub fn encode_rle(bitmap: &Bitmap) -> String {
    let mut runs: Vec<u64> = Vec::new();
    let mut current = false;
    let mut run = 0u64;
    for y in 0..bitmap.height {
        for x in 0..bitmap.width {
            let v = bitmap.get(x, y);
            if v == current {
                run += 1;
            } else {
                runs.push(run);
                current = v;
                run = 1;
            }
        }
    }
    runs.push(run);
    if bitmap.width == 0 || bitmap.height == 0 {
        runs = vec![0];
    }
    let body: Vec<String> = runs.iter().map(u64::to_string).collect();
    format!("RLE v1 {} {}\n{}\n", bitmap.width, bitmap.height, body.join(","))
}

/// Inverse of [`encode_rle`]; rejects non-canonical records so that
/// `encode(decode(r)) == r` holds for every accepted record.
pub fn decode_rle(record: &str) -> Result<Bitmap, MaskError> {
    let mut lines = record.lines();
    let header = lines.next().ok_or_else(|| MaskError::RleHeader("empty record".into()))?;
    let (width, height) = parse_rle_header(header)?;
    let body = lines.next().ok_or_else(|| MaskError::RleHeader("missing run line".into()))?;
    if let Some(extra) = lines.next() {
        if !extra.trim().is_empty() {
            return Err(MaskError::RleHeader(format!("trailing content {extra:?}")));
        }
    }
    let mut runs = Vec::new();
    for token in body.trim().split(',') {
        let n: u64 =
            token.parse().map_err(|_| MaskError::RleToken { token: token.to_string() })?;
        runs.push(n);
    }
    for (i, &n) in runs.iter().enumerate() {
        if n == 0 && i > 0 {
            return Err(MaskError::RleNonCanonical { index: i });
        }
    }
    let total = width as u64 * height as u64;
    let sum: u64 = runs.iter().sum();
    if sum != total {
        return Err(MaskError::RleSum { expected: total, found: sum });
    }
    if total > 0 && runs.len() > 1 && runs[runs.len() - 1] == 0 {
        return Err(MaskError::RleNonCanonical { index: runs.len() - 1 });
    }
    let mut bitmap = Bitmap::new(width, height);
    let mut pos = 0u64;
    let mut value = false;
    for n in runs {
        if value {
            for p in pos..pos + n {
                bitmap.set((p % width as u64) as u32, (p / width as u64) as u32, true);
            }
        }
        pos += n;
        value = !value;
    }
    Ok(bitmap)
}

fn parse_rle_header(header: &str) -> Result<(u32, u32), MaskError> {
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "RLE" || fields[1] != "v1" {
        return Err(MaskError::RleHeader(header.to_string()));
    }
    let width = fields[2].parse().map_err(|_| MaskError::RleHeader(header.to_string()))?;
    let height = fields[3].parse().map_err(|_| MaskError::RleHeader(header.to_string()))?;
    Ok((width, height))
}

/// Splits a text payload of concatenated RLE records (two lines each).
pub fn decode_rle_stream(text: &str) -> Result<Vec<Bitmap>, MaskError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        let body = lines
            .get(i + 1)
            .ok_or_else(|| MaskError::RleHeader("record missing run line".into()))?;
        out.push(decode_rle(&format!("{}\n{}\n", lines[i], body))?);
        i += 2;
    }
    Ok(out)
}

/// Ordered set of instance masks over one raster, as stored in `H x W x n`
/// annotation arrays. Slices may overlap; the overlapping pixel count is
/// measured at construction and kept for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskStack<F> {
    width: u32,
    height: u32,
    masks: Vec<InstanceMask<F>>,
    overlap_pixels: u64,
}

impl<F: Real> MaskStack<F> {
    pub fn from_masks(
        width: u32,
        height: u32,
        masks: Vec<InstanceMask<F>>,
    ) -> Result<Self, MaskError> {
        for mask in &masks {
            if mask.bitmap.dims() != (width, height) {
                return Err(MaskError::DimensionMismatch {
                    expected: (width, height),
                    found: mask.bitmap.dims(),
                });
            }
        }
        let overlap_pixels = count_overlap(&masks);
        Ok(Self { width, height, masks, overlap_pixels })
    }

    /// Builds a stack from a dense `H x W x n` byte array (C order, one byte
    /// per element, nonzero meaning set). A 2-D `H x W` array is accepted as
    /// a single-slice stack.
    pub fn from_dense(
        shape: &[usize],
        data: &[u8],
        confidences: Option<&[F]>,
    ) -> Result<Self, MaskError> {
        let (h, w, n) = match *shape {
            [h, w] => (h, w, 1),
            [h, w, n] => (h, w, n),
            _ => return Err(MaskError::StackShape(shape.to_vec())),
        };
        if data.len() != h * w * n {
            return Err(MaskError::StackShape(shape.to_vec()));
        }
        if let Some(confs) = confidences {
            if confs.len() != n {
                return Err(MaskError::ConfidenceCount { masks: n, confidences: confs.len() });
            }
        }
        let mut masks = Vec::with_capacity(n);
        for i in 0..n {
            let mut bitmap = Bitmap::new(w as u32, h as u32);
            for y in 0..h {
                for x in 0..w {
                    if data[(y * w + x) * n + i] != 0 {
                        bitmap.set(x as u32, y as u32, true);
                    }
                }
            }
            let conf = confidences.map(|c| c[i]).unwrap_or_else(F::one);
            masks.push(
                InstanceMask::new(bitmap, conf)
                    .map_err(|_| MaskError::StackSliceEmpty { index: i })?,
            );
        }
        Self::from_masks(w as u32, h as u32, masks)
    }

    /// Dense `H x W x n` export (uint8, C order), the inverse of
    /// [`MaskStack::from_dense`].
    pub fn to_dense(&self) -> (Vec<usize>, Vec<u8>) {
        let (h, w, n) = (self.height as usize, self.width as usize, self.masks.len());
        let mut data = vec![0u8; h * w * n];
        for (i, mask) in self.masks.iter().enumerate() {
            for (x, y) in mask.bitmap.iter_set() {
                data[(y as usize * w + x as usize) * n + i] = 1;
            }
        }
        (vec![h, w, n], data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn masks(&self) -> &[InstanceMask<F>] {
        &self.masks
    }

    pub fn into_masks(self) -> Vec<InstanceMask<F>> {
        self.masks
    }

    pub fn n_instances(&self) -> usize {
        self.masks.len()
    }

    /// Pixels covered by two or more slices.
    pub fn overlap_pixels(&self) -> u64 {
        self.overlap_pixels
    }
}

fn count_overlap<F: Real>(masks: &[InstanceMask<F>]) -> u64 {
    let mut seen: Option<Bitmap> = None;
    let mut twice: Option<Bitmap> = None;
    for mask in masks {
        match (&mut seen, &mut twice) {
            (Some(seen), Some(twice)) => {
                for ((t, s), m) in
                    twice.words.iter_mut().zip(&mut seen.words).zip(&mask.bitmap.words)
                {
                    *t |= *s & m;
                    *s |= m;
                }
            }
            _ => {
                seen = Some(mask.bitmap.clone());
                twice = Some(Bitmap::new(mask.width(), mask.height()));
            }
        }
    }
    twice.map(|t| t.count_ones()).unwrap_or(0)
}

/// Decodes a mask payload, sniffing the container format from its leading
/// bytes: NPY (`\x93NUMPY`), NPZ (zip archive), or concatenated RLE records.
/// Confidences default to 1 when `confidences` is `None`.
pub fn load_mask_stack<F: Real>(
    bytes: &[u8],
    confidences: Option<&[F]>,
) -> Result<MaskStack<F>, MaskError> {
    if bytes.starts_with(npy::NPY_MAGIC) {
        let array = npy::read_npy(bytes)?;
        return MaskStack::from_dense(&array.shape, &array.data, confidences);
    }
    if bytes.starts_with(b"PK") {
        let array = npy::read_npz(bytes, None)?;
        return MaskStack::from_dense(&array.shape, &array.data, confidences);
    }
    if bytes.starts_with(b"RLE v1") {
        let text = std::str::from_utf8(bytes)
            .map_err(|_| MaskError::RleHeader("record is not UTF-8".into()))?;
        let bitmaps = decode_rle_stream(text)?;
        if let Some(confs) = confidences {
            if confs.len() != bitmaps.len() {
                return Err(MaskError::ConfidenceCount {
                    masks: bitmaps.len(),
                    confidences: confs.len(),
                });
            }
        }
        let (width, height) = bitmaps.first().map(|b| b.dims()).unwrap_or((0, 0));
        let masks = bitmaps
            .into_iter()
            .enumerate()
            .map(|(i, b)| {
                let conf = confidences.map(|c| c[i]).unwrap_or_else(F::one);
                InstanceMask::new(b, conf).map_err(|_| MaskError::StackSliceEmpty { index: i })
            })
            .collect::<Result<Vec<_>, _>>()?;
        return MaskStack::from_masks(width, height, masks);
    }
    Err(MaskError::UnknownFormat)
}

/// Decodes a mask payload into the union of its slices (sniffing the
/// format like [`load_mask_stack`]). Unlike a stack, the union may be
/// empty — an all-background foreground mask is legitimate.
pub fn load_bitmap_union(bytes: &[u8]) -> Result<Bitmap, MaskError> {
    let dense_union = |shape: &[usize], data: &[u8]| -> Result<Bitmap, MaskError> {
        let (h, w, n) = match *shape {
            [h, w] => (h, w, 1),
            [h, w, n] => (h, w, n),
            _ => return Err(MaskError::StackShape(shape.to_vec())),
        };
        if data.len() != h * w * n {
            return Err(MaskError::StackShape(shape.to_vec()));
        }
        let mut bitmap = Bitmap::new(w as u32, h as u32);
        for y in 0..h {
            for x in 0..w {
                if data[(y * w + x) * n..(y * w + x + 1) * n].iter().any(|&b| b != 0) {
                    bitmap.set(x as u32, y as u32, true);
                }
            }
        }
        Ok(bitmap)
    };
    if bytes.starts_with(npy::NPY_MAGIC) {
        let array = npy::read_npy(bytes)?;
        return dense_union(&array.shape, &array.data);
    }
    if bytes.starts_with(b"PK") {
        let array = npy::read_npz(bytes, None)?;
        return dense_union(&array.shape, &array.data);
    }
    if bytes.starts_with(b"RLE v1") {
        let text = std::str::from_utf8(bytes)
            .map_err(|_| MaskError::RleHeader("record is not UTF-8".into()))?;
        let bitmaps = decode_rle_stream(text)?;
        let (width, height) = bitmaps.first().map(|b| b.dims()).unwrap_or((0, 0));
        let mut union = Bitmap::new(width, height);
        for b in &bitmaps {
            if b.dims() != (width, height) {
                return Err(MaskError::DimensionMismatch {
                    expected: (width, height),
                    found: b.dims(),
                });
            }
            union.or_assign(b);
        }
        return Ok(union);
    }
    Err(MaskError::UnknownFormat)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bitmap_from_rows(rows: &[&[u8]]) -> Bitmap {
        let height = rows.len() as u32;
        let width = rows[0].len() as u32;
        let mut b = Bitmap::new(width, height);
        for (y, row) in rows.iter().enumerate() {
            for (x, &v) in row.iter().enumerate() {
                if v != 0 {
                    b.set(x as u32, y as u32, true);
                }
            }
        }
        b
    }

    #[test]
    fn rle_matches_worked_examples() {
        // 2x2 raster with only the top-left pixel set.
        let tl = bitmap_from_rows(&[&[1, 0], &[0, 0]]);
        assert_eq!(encode_rle(&tl), "RLE v1 2 2\n0,1,3\n");
        // Fully set 3x3 raster: empty leading zero run, then one run of 9.
        let full = bitmap_from_rows(&[&[1, 1, 1], &[1, 1, 1], &[1, 1, 1]]);
        assert_eq!(encode_rle(&full), "RLE v1 3 3\n0,9\n");
    }

    #[test]
    fn rle_round_trips() {
        let m = bitmap_from_rows(&[&[0, 1, 1, 0, 0], &[1, 1, 0, 0, 1], &[0, 0, 0, 1, 1]]);
        let back = decode_rle(&encode_rle(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rle_rejects_bad_records() {
        assert!(matches!(decode_rle("RLE v2 2 2\n0,4\n"), Err(MaskError::RleHeader(_))));
        assert!(matches!(
            decode_rle("RLE v1 2 2\n0,5\n"),
            Err(MaskError::RleSum { expected: 4, found: 5 })
        ));
        assert!(matches!(
            decode_rle("RLE v1 2 2\n0,1,0,3\n"),
            Err(MaskError::RleNonCanonical { index: 2 })
        ));
        assert!(matches!(decode_rle("RLE v1 2 2\n0,x\n"), Err(MaskError::RleToken { .. })));
    }

    #[test]
    fn wide_rasters_pack_across_word_boundaries() {
        let mut b = Bitmap::new(130, 2);
        b.set(0, 0, true);
        b.set(63, 0, true);
        b.set(64, 0, true);
        b.set(129, 1, true);
        assert_eq!(b.count_ones(), 4);
        let pixels: Vec<_> = b.iter_set().collect();
        assert_eq!(pixels, vec![(0, 0), (63, 0), (64, 0), (129, 1)]);
        assert_eq!(decode_rle(&encode_rle(&b)).unwrap(), b);
    }

    #[test]
    fn tight_rect_wraps_all_set_pixels() {
        let mask = InstanceMask::<f64>::from_pixels(10, 8, [(3, 2), (6, 5)], 1.0).unwrap();
        assert_eq!(mask.rect(), PixelRect { x: 3, y: 2, w: 4, h: 4 });
        let b = mask.bounding_box();
        assert_eq!(b.cx, 0.5); // (3 + 4/2) / 10
        assert_eq!(b.cy, 0.5); // (2 + 4/2) / 8
        assert_eq!(b.w, 0.4);
        assert_eq!(b.h, 0.5);
    }

    #[test]
    fn empty_masks_are_rejected() {
        assert!(matches!(
            InstanceMask::<f64>::from_pixels(4, 4, [], 1.0),
            Err(MaskError::EmptyMask)
        ));
    }

    #[test]
    fn confidence_outside_unit_interval_is_rejected() {
        assert!(matches!(
            InstanceMask::<f64>::from_pixels(4, 4, [(0, 0)], 1.5),
            Err(MaskError::Confidence(_))
        ));
    }

    #[test]
    fn dense_round_trip_preserves_slice_order() {
        let data: Vec<u8> = vec![
            1, 0, 0, 1, // (0,0): slice0, (0,1): slice1
            0, 0, 1, 1, // (1,1): both slices
        ];
        let stack = MaskStack::<f64>::from_dense(&[1, 4, 2], &data, None).unwrap();
        assert_eq!(stack.n_instances(), 2);
        assert_eq!(stack.masks()[0].popcount(), 2);
        assert_eq!(stack.masks()[1].popcount(), 2);
        assert_eq!(stack.overlap_pixels(), 1);
        let (shape, dense) = stack.to_dense();
        assert_eq!(shape, vec![1, 4, 2]);
        assert_eq!(dense, data);
    }

    #[test]
    fn dense_empty_slice_is_rejected() {
        let data = vec![1u8, 0, 1, 0];
        let err = MaskStack::<f64>::from_dense(&[2, 2, 1], &[0; 4], None).unwrap_err();
        assert!(matches!(err, MaskError::StackSliceEmpty { index: 0 }));
        assert!(MaskStack::<f64>::from_dense(&[2, 2, 1], &data, None).is_ok());
    }

    #[test]
    fn translation_clips_at_the_border() {
        let b = Bitmap::from_pixels(4, 4, [(0, 0), (3, 3)]);
        let t = b.translated(1, 1);
        let pixels: Vec<_> = t.iter_set().collect();
        assert_eq!(pixels, vec![(1, 1)]);
    }

    #[test]
    fn overlap_counts_pixels_covered_twice_or_more() {
        let a = InstanceMask::<f64>::from_pixels(4, 1, [(0, 0), (1, 0)], 1.0).unwrap();
        let b = InstanceMask::<f64>::from_pixels(4, 1, [(1, 0), (2, 0)], 1.0).unwrap();
        let c = InstanceMask::<f64>::from_pixels(4, 1, [(1, 0), (3, 0)], 1.0).unwrap();
        let stack = MaskStack::from_masks(4, 1, vec![a, b, c]).unwrap();
        assert_eq!(stack.overlap_pixels(), 1);
    }

    #[test]
    fn bitmap_union_loader_accepts_empty_foregrounds() {
        // A 2-D all-zero array is a legitimate "no foreground" mask.
        let zeros = crate::npy::write_npy(&[3, 4], &vec![0u8; 12]);
        let union = load_bitmap_union(&zeros).unwrap();
        assert_eq!(union.dims(), (4, 3));
        assert_eq!(union.count_ones(), 0);

        // A 3-D stack unions its slices.
        let a = Bitmap::from_pixels(2, 2, [(0, 0)]);
        let b = Bitmap::from_pixels(2, 2, [(1, 1)]);
        let stack = MaskStack::<f64>::from_masks(
            2,
            2,
            vec![InstanceMask::new(a, 1.0).unwrap(), InstanceMask::new(b, 1.0).unwrap()],
        )
        .unwrap();
        let (shape, data) = stack.to_dense();
        let union = load_bitmap_union(&crate::npy::write_npy(&shape, &data)).unwrap();
        assert_eq!(union.iter_set().collect::<Vec<_>>(), vec![(0, 0), (1, 1)]);

        // Same answer through the RLE codec.
        let rle = format!("{}{}", encode_rle(&stack.masks()[0].bitmap()), encode_rle(&stack.masks()[1].bitmap()));
        let union = load_bitmap_union(rle.as_bytes()).unwrap();
        assert_eq!(union.count_ones(), 2);
    }
}
