//! Binary PPM (`P6`) rasters: the only image format the toolkit reads or
//! writes. Crops fed to the scribble segmenter and overlay renderings both
//! go through this module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PpmError {
    #[error("not a binary PPM: expected magic \"P6\", found {0:?}")]
    Magic(String),
    #[error("malformed PPM header: {0}")]
    Header(String),
    #[error("unsupported max value {0} (only 255 is handled)")]
    MaxValue(u32),
    #[error("pixel payload truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

/// Interleaved 8-bit RGB raster, row-major from the top-left corner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbRaster {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

/// Single-channel 8-bit raster with the same layout as [`RgbRaster`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayRaster {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl RgbRaster {
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let n = width as usize * height as usize;
        let mut data = Vec::with_capacity(n * 3);
        for _ in 0..n {
            data.extend_from_slice(&rgb);
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Blends `rgb` over the pixel at 50% opacity; used for mask overlays.
    pub fn tint(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let old = self.get(x, y);
        let mixed = [
            ((old[0] as u16 + rgb[0] as u16) / 2) as u8,
            ((old[1] as u16 + rgb[1] as u16) / 2) as u8,
            ((old[2] as u16 + rgb[2] as u16) / 2) as u8,
        ];
        self.set(x, y, mixed);
    }

    /// Rec. 601 luma, rounded to the nearest integer.
    pub fn luminance(&self) -> GrayRaster {
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| {
                let y = 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64;
                y.round().min(255.0) as u8
            })
            .collect();
        GrayRaster { width: self.width, height: self.height, data }
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self, PpmError> {
        let mut pos = 0usize;
        let magic = next_token(bytes, &mut pos)
            .ok_or_else(|| PpmError::Header("missing magic".into()))?;
        if magic != b"P6" {
            return Err(PpmError::Magic(String::from_utf8_lossy(magic).into_owned()));
        }
        let width = next_number(bytes, &mut pos, "width")?;
        let height = next_number(bytes, &mut pos, "height")?;
        let maxval = next_number(bytes, &mut pos, "max value")?;
        if maxval != 255 {
            return Err(PpmError::MaxValue(maxval));
        }
        // Exactly one whitespace byte separates the header from the payload.
        pos += 1;
        let expected = width as usize * height as usize * 3;
        let payload = bytes.get(pos..pos + expected).ok_or(PpmError::Truncated {
            expected,
            found: bytes.len().saturating_sub(pos),
        })?;
        Ok(Self { width, height, data: payload.to_vec() })
    }
}

impl GrayRaster {
    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }
}

/// Advances past whitespace and `#` comments, then returns the next token.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (*pos > start).then(|| &bytes[start..*pos])
}

fn next_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<u32, PpmError> {
    let token =
        next_token(bytes, pos).ok_or_else(|| PpmError::Header(format!("missing {what}")))?;
    std::str::from_utf8(token)
        .ok()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| PpmError::Header(format!("unreadable {what}")))
}
