//! Reader and writer for the NumPy array format (`.npy`) and its zip
//! container (`.npz`), restricted to what annotation stacks need: C-order
//! boolean or uint8 arrays, one byte per element.

use std::io::{Cursor, Read, Write};

use thiserror::Error;

pub const NPY_MAGIC: &[u8] = b"\x93NUMPY";

#[derive(Debug, Error)]
pub enum NpyError {
    #[error("not an NPY payload (bad magic)")]
    Magic,
    #[error("unsupported NPY version {major}.{minor}")]
    Version { major: u8, minor: u8 },
    #[error("NPY header is not ASCII")]
    HeaderEncoding,
    #[error("malformed NPY header: {0}")]
    HeaderSyntax(String),
    #[error("unsupported dtype {0:?} (only 1-byte bool/uint8 arrays are handled)")]
    Dtype(String),
    #[error("Fortran-order arrays are not supported")]
    FortranOrder,
    #[error("payload holds {found} bytes but the shape implies {expected}")]
    PayloadSize { expected: usize, found: usize },
    #[error("zip container: {0}")]
    Zip(#[from] zip::result::ZipError),
    #[error("cannot pick an NPZ member: {0}")]
    NpzMember(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense byte array in C order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: Vec<u8>,
}

pub fn read_npy(bytes: &[u8]) -> Result<NpyArray, NpyError> {
    if !bytes.starts_with(NPY_MAGIC) {
        return Err(NpyError::Magic);
    }
    let rest = &bytes[NPY_MAGIC.len()..];
    if rest.len() < 2 {
        return Err(NpyError::HeaderSyntax("truncated version field".into()));
    }
    let (major, minor) = (rest[0], rest[1]);
    let (header_len, header_start) = match major {
        1 => {
            if rest.len() < 4 {
                return Err(NpyError::HeaderSyntax("truncated header length".into()));
            }
            (u16::from_le_bytes([rest[2], rest[3]]) as usize, 4)
        }
        2 | 3 => {
            if rest.len() < 6 {
                return Err(NpyError::HeaderSyntax("truncated header length".into()));
            }
            (u32::from_le_bytes([rest[2], rest[3], rest[4], rest[5]]) as usize, 6)
        }
        _ => return Err(NpyError::Version { major, minor }),
    };
    let header_bytes = rest
        .get(header_start..header_start + header_len)
        .ok_or_else(|| NpyError::HeaderSyntax("header extends past payload".into()))?;
    if !header_bytes.is_ascii() {
        return Err(NpyError::HeaderEncoding);
    }
    let header = std::str::from_utf8(header_bytes).map_err(|_| NpyError::HeaderEncoding)?;

    let descr = dict_str(header, "descr")
        .ok_or_else(|| NpyError::HeaderSyntax("missing 'descr'".into()))?;
    let elem = descr.trim_start_matches(['|', '<', '>', '=']);
    if elem != "u1" && elem != "b1" && elem != "i1" {
        return Err(NpyError::Dtype(descr));
    }
    match dict_bool(header, "fortran_order") {
        Some(false) => {}
        Some(true) => return Err(NpyError::FortranOrder),
        None => return Err(NpyError::HeaderSyntax("missing 'fortran_order'".into())),
    }
    let shape =
        dict_shape(header).ok_or_else(|| NpyError::HeaderSyntax("missing 'shape'".into()))?;

    let expected: usize = shape.iter().product();
    let data = &rest[header_start + header_len..];
    if data.len() != expected {
        return Err(NpyError::PayloadSize { expected, found: data.len() });
    }
    Ok(NpyArray { shape, data: data.to_vec() })
}

/// Serialises a C-order uint8 array with a version 1.0 header padded so the
/// payload starts on a 64-byte boundary, matching what NumPy itself writes.
pub fn write_npy(shape: &[usize], data: &[u8]) -> Vec<u8> {
    assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/payload mismatch");
    let shape_txt = match shape {
        [only] => format!("({only},)"),
        many => {
            let parts: Vec<String> = many.iter().map(usize::to_string).collect();
            format!("({})", parts.join(", "))
        }
    };
    let mut header =
        format!("{{'descr': '|u1', 'fortran_order': False, 'shape': {shape_txt}, }}");
    let prefix = NPY_MAGIC.len() + 2 + 2;
    let unpadded = prefix + header.len() + 1;
    let padding = (64 - unpadded % 64) % 64;
    header.extend(std::iter::repeat(' ').take(padding));
    header.push('\n');

    let mut out = Vec::with_capacity(prefix + header.len() + data.len());
    out.extend_from_slice(NPY_MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(data);
    out
}

/// Reads one array out of an NPZ archive. With `member: None` the archive
/// must contain exactly one `.npy` entry; otherwise the named entry is used
/// (with or without the `.npy` suffix, mirroring NumPy's key convention).
pub fn read_npz(bytes: &[u8], member: Option<&str>) -> Result<NpyArray, NpyError> {
    let mut archive = zip::ZipArchive::new(Cursor::new(bytes))?;
    let names: Vec<String> = archive.file_names().map(str::to_string).collect();
    let chosen = match member {
        Some(name) => {
            let suffixed = format!("{name}.npy");
            names
                .iter()
                .find(|n| *n == name || **n == suffixed)
                .cloned()
                .ok_or_else(|| NpyError::NpzMember(format!("{name:?} not in {names:?}")))?
        }
        None => {
            let candidates: Vec<&String> =
                names.iter().filter(|n| n.ends_with(".npy")).collect();
            match candidates.as_slice() {
                [only] => (*only).clone(),
                [] => return Err(NpyError::NpzMember(format!("no .npy entry in {names:?}"))),
                _ => {
                    return Err(NpyError::NpzMember(format!(
                        "several .npy entries in {names:?}, pass an explicit name"
                    )))
                }
            }
        }
    };
    let mut file = archive.by_name(&chosen)?;
    let mut buf = Vec::with_capacity(file.size() as usize);
    file.read_to_end(&mut buf)?;
    read_npy(&buf)
}

/// Writes a single-member NPZ (`arr_0.npy`, NumPy's default key).
pub fn write_npz(shape: &[usize], data: &[u8]) -> Vec<u8> {
    let mut cursor = Cursor::new(Vec::new());
    {
        let mut writer = zip::ZipWriter::new(&mut cursor);
        let options = zip::write::SimpleFileOptions::default();
        writer.start_file("arr_0.npy", options).expect("in-memory zip write");
        writer.write_all(&write_npy(shape, data)).expect("in-memory zip write");
        writer.finish().expect("in-memory zip write");
    }
    cursor.into_inner()
}

fn dict_str(header: &str, key: &str) -> Option<String> {
    let rest = value_after_key(header, key)?;
    let rest = rest.trim_start();
    let quote = rest.chars().next()?;
    if quote != '\'' && quote != '"' {
        return None;
    }
    let inner = &rest[1..];
    let end = inner.find(quote)?;
    Some(inner[..end].to_string())
}

fn dict_bool(header: &str, key: &str) -> Option<bool> {
    let rest = value_after_key(header, key)?.trim_start();
    if rest.starts_with("True") {
        Some(true)
    } else if rest.starts_with("False") {
        Some(false)
    } else {
        None
    }
}

fn dict_shape(header: &str) -> Option<Vec<usize>> {
    let rest = value_after_key(header, "shape")?.trim_start();
    let open = rest.find('(')?;
    let close = rest.find(')')?;
    let inner = &rest[open + 1..close];
    let mut shape = Vec::new();
    for part in inner.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue; // trailing comma in 1-tuples
        }
        shape.push(part.parse().ok()?);
    }
    Some(shape)
}

fn value_after_key<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    for quote in ['\'', '"'] {
        let pattern = format!("{quote}{key}{quote}");
        if let Some(at) = header.find(&pattern) {
            let rest = header[at + pattern.len()..].trim_start();
            return rest.strip_prefix(':');
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_then_read_round_trips() {
        let shape = vec![2, 3, 2];
        let data: Vec<u8> = (0..12).map(|i| (i % 2) as u8).collect();
        let bytes = write_npy(&shape, &data);
        // Payload must start on a 64-byte boundary, as NumPy guarantees.
        assert_eq!((bytes.len() - data.len()) % 64, 0);
        let array = read_npy(&bytes).unwrap();
        assert_eq!(array.shape, shape);
        assert_eq!(array.data, data);
    }

    #[test]
    fn one_dimensional_shape_uses_tuple_comma() {
        let bytes = write_npy(&[3], &[1, 0, 1]);
        let header = String::from_utf8_lossy(&bytes[10..]);
        assert!(header.contains("'shape': (3,)"), "header was {header:?}");
        assert_eq!(read_npy(&bytes).unwrap().shape, vec![3]);
    }

    #[test]
    fn bool_descr_and_version_2_are_accepted() {
        let header = "{'descr': '|b1', 'fortran_order': False, 'shape': (2, 2), }\n";
        let mut bytes = Vec::new();
        bytes.extend_from_slice(NPY_MAGIC);
        bytes.extend_from_slice(&[2, 0]);
        bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
        bytes.extend_from_slice(header.as_bytes());
        bytes.extend_from_slice(&[1, 0, 0, 1]);
        let array = read_npy(&bytes).unwrap();
        assert_eq!(array.shape, vec![2, 2]);
        assert_eq!(array.data, vec![1, 0, 0, 1]);
    }

    #[test]
    fn wide_dtypes_are_rejected() {
        let header = "{'descr': '<f8', 'fortran_order': False, 'shape': (1,), }\n";
        let mut bytes = Vec::new();
        bytes.extend_from_slice(NPY_MAGIC);
        bytes.extend_from_slice(&[1, 0]);
        bytes.extend_from_slice(&(header.len() as u16).to_le_bytes());
        bytes.extend_from_slice(header.as_bytes());
        bytes.extend_from_slice(&[0u8; 8]);
        assert!(matches!(read_npy(&bytes), Err(NpyError::Dtype(d)) if d == "<f8"));
    }

    #[test]
    fn fortran_order_is_rejected() {
        let header = "{'descr': '|u1', 'fortran_order': True, 'shape': (2,), }\n";
        let mut bytes = Vec::new();
        bytes.extend_from_slice(NPY_MAGIC);
        bytes.extend_from_slice(&[1, 0]);
        bytes.extend_from_slice(&(header.len() as u16).to_le_bytes());
        bytes.extend_from_slice(header.as_bytes());
        bytes.extend_from_slice(&[0, 1]);
        assert!(matches!(read_npy(&bytes), Err(NpyError::FortranOrder)));
    }

    #[test]
    fn payload_size_mismatch_is_reported() {
        let mut bytes = write_npy(&[4], &[1, 1, 1, 1]);
        bytes.pop();
        assert!(matches!(
            read_npy(&bytes),
            Err(NpyError::PayloadSize { expected: 4, found: 3 })
        ));
    }

    #[test]
    fn npz_round_trips_and_resolves_members() {
        let shape = vec![2, 2, 1];
        let data = vec![1, 0, 0, 1];
        let bytes = write_npz(&shape, &data);
        let array = read_npz(&bytes, None).unwrap();
        assert_eq!(array.shape, shape);
        assert_eq!(array.data, data);
        // NumPy-style key lookup without the .npy suffix.
        let array = read_npz(&bytes, Some("arr_0")).unwrap();
        assert_eq!(array.data, data);
        assert!(matches!(read_npz(&bytes, Some("missing")), Err(NpyError::NpzMember(_))));
    }
}
