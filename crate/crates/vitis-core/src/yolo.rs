//! Normalized box annotations in the one-line-per-object text dialect
//! `CLASS CX CY W H`, with an optional trailing confidence column on
//! prediction files. Coordinates are fractions of the image; pixel centers
//! are recovered as `(cx * width, cy * height)`.

use thiserror::Error;

use crate::num::Real;

/// Values this far outside the unit interval are clamped with a warning;
/// anything worse is a hard error.
pub const CLAMP_TOLERANCE: f64 = 0.01;

#[derive(Debug, Error)]
pub enum YoloError {
    #[error("line {line}: expected 5 or 6 fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: class token {token:?} is not an unsigned integer")]
    ClassToken { line: usize, token: String },
    #[error("line {line}: {token:?} is not a number")]
    NumberToken { line: usize, token: String },
    #[error("line {line}: {field} = {value} is out of range beyond the clamp tolerance")]
    OutOfRange { line: usize, field: &'static str, value: f64 },
    #[error("line {line}: {field} = {value} must be positive")]
    NonPositive { line: usize, field: &'static str, value: f64 },
    #[error("line {line}: box extent leaves the {width}x{height} image by {overhang:.2} px")]
    Extent { line: usize, width: u32, height: u32, overhang: f64 },
}

/// Box in normalized image coordinates; `(cx, cy)` is the center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox<F> {
    pub class_id: u32,
    pub cx: F,
    pub cy: F,
    pub w: F,
    pub h: F,
    pub confidence: F,
}

/// Axis-aligned box in pixel units, top-left corner plus extent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelBox<F> {
    pub x: F,
    pub y: F,
    pub w: F,
    pub h: F,
}

impl<F: Real> BoundingBox<F> {
    /// Pixel-space center at the given image resolution.
    pub fn center_pixels(&self, dims: (u32, u32)) -> (F, F) {
        (self.cx * F::from_u32(dims.0).unwrap(), self.cy * F::from_u32(dims.1).unwrap())
    }

    pub fn to_pixel_box(&self, dims: (u32, u32)) -> PixelBox<F> {
        let (iw, ih) = (F::from_u32(dims.0).unwrap(), F::from_u32(dims.1).unwrap());
        let two = F::from_u8(2).unwrap();
        PixelBox {
            x: (self.cx - self.w / two) * iw,
            y: (self.cy - self.h / two) * ih,
            w: self.w * iw,
            h: self.h * ih,
        }
    }
}

impl<F: Real> PixelBox<F> {
    pub fn right(&self) -> F {
        self.x + self.w
    }

    pub fn bottom(&self) -> F {
        self.y + self.h
    }

    pub fn area(&self) -> F {
        self.w * self.h
    }

    pub fn to_normalized(&self, dims: (u32, u32), class_id: u32, confidence: F) -> BoundingBox<F> {
        let (iw, ih) = (F::from_u32(dims.0).unwrap(), F::from_u32(dims.1).unwrap());
        let two = F::from_u8(2).unwrap();
        BoundingBox {
            class_id,
            cx: (self.x + self.w / two) / iw,
            cy: (self.y + self.h / two) / ih,
            w: self.w / iw,
            h: self.h / ih,
            confidence,
        }
    }
}

/// Parse result: boxes in file order plus human-readable clamp warnings.
#[derive(Debug, Clone)]
pub struct YoloParse<F> {
    pub boxes: Vec<BoundingBox<F>>,
    pub warnings: Vec<String>,
}

/// Parses a box file at a declared resolution. Values up to
/// [`CLAMP_TOLERANCE`] outside their range are clamped with a warning;
/// worse values, non-positive extents, and boxes hanging more than one
/// pixel outside the image are errors.
pub fn parse_boxes<F: Real>(text: &str, dims: (u32, u32)) -> Result<YoloParse<F>, YoloError> {
    let mut boxes = Vec::new();
    let mut warnings = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() != 5 && fields.len() != 6 {
            return Err(YoloError::FieldCount { line, found: fields.len() });
        }
        let class_id: u32 = fields[0]
            .parse()
            .map_err(|_| YoloError::ClassToken { line, token: fields[0].to_string() })?;
        let mut values = [F::zero(); 5];
        values[4] = F::one();
        let names = ["cx", "cy", "w", "h", "confidence"];
        for (slot, token) in fields[1..].iter().enumerate() {
            let raw_value = F::parse(token)
                .ok_or_else(|| YoloError::NumberToken { line, token: token.to_string() })?;
            values[slot] = clamp_unit(raw_value, names[slot], line, &mut warnings)?;
        }
        let [cx, cy, w, h, confidence] = values;
        for (value, field) in [(w, "w"), (h, "h")] {
            if value <= F::zero() {
                return Err(YoloError::NonPositive {
                    line,
                    field,
                    value: value.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        let b = BoundingBox { class_id, cx, cy, w, h, confidence };
        check_extent(&b, dims, line)?;
        boxes.push(b);
    }
    Ok(YoloParse { boxes, warnings })
}

fn clamp_unit<F: Real>(
    value: F,
    field: &'static str,
    line: usize,
    warnings: &mut Vec<String>,
) -> Result<F, YoloError> {
    let v = value.to_f64().unwrap_or(f64::NAN);
    if (0.0..=1.0).contains(&v) {
        return Ok(value);
    }
    if v < -CLAMP_TOLERANCE || v > 1.0 + CLAMP_TOLERANCE || v.is_nan() {
        return Err(YoloError::OutOfRange { line, field, value: v });
    }
    let clamped = v.clamp(0.0, 1.0);
    warnings.push(format!("line {line}: clamped {field} from {v} to {clamped}"));
    Ok(F::from_f64(clamped).unwrap())
}

fn check_extent<F: Real>(
    b: &BoundingBox<F>,
    dims: (u32, u32),
    line: usize,
) -> Result<(), YoloError> {
    let p = b.to_pixel_box(dims);
    let (iw, ih) = (F::from_u32(dims.0).unwrap(), F::from_u32(dims.1).unwrap());
    let overhang = (-p.x)
        .max(-p.y)
        .max(p.right() - iw)
        .max(p.bottom() - ih)
        .to_f64()
        .unwrap_or(f64::NAN);
    if overhang > 1.0 {
        return Err(YoloError::Extent { line, width: dims.0, height: dims.1, overhang });
    }
    Ok(())
}

/// Writes boxes back out, six decimal places per coordinate.
pub fn write_boxes<F: Real>(boxes: &[BoundingBox<F>], include_confidence: bool) -> String {
    let mut out = String::new();
    for b in boxes {
        out.push_str(&format!(
            "{} {:.6} {:.6} {:.6} {:.6}",
            b.class_id, b.cx, b.cy, b.w, b.h
        ));
        if include_confidence {
            out.push_str(&format!(" {:.6}", b.confidence));
        }
        out.push('\n');
    }
    out
}
