//! Minimal NPY v1.0 reader/writer for little-endian `f4`/`f8` arrays in C order.

use std::fs;
use std::path::Path;

use ndarray::{ArrayD, ArrayViewD, IxDyn};

use super::check_finite;
use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
/// Header (magic + version + length + dict) is padded to a multiple of this.
const HEADER_ALIGN: usize = 64;

/// Storage precision used when writing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl Precision {
    fn descr(self) -> &'static str {
        match self {
            Precision::F32 => "<f4",
            Precision::F64 => "<f8",
        }
    }

    fn size(self) -> usize {
        match self {
            Precision::F32 => 4,
            Precision::F64 => 8,
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            other => Err(Error::Config(format!("precision must be f32 or f64, got `{other}`"))),
        }
    }
}

pub fn read_npy(path: impl AsRef<Path>) -> Result<ArrayD<f64>> {
    let bytes = fs::read(path)?;
    parse_npy(&bytes)
}

pub fn write_npy(path: impl AsRef<Path>, array: &ArrayViewD<'_, f64>, precision: Precision) -> Result<()> {
    let bytes = encode_npy(array, precision)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn parse_npy(bytes: &[u8]) -> Result<ArrayD<f64>> {
    parse_npy_typed(bytes).map(|(array, _)| array)
}

/// Like [`read_npy`], also reporting the stored precision.
pub fn read_npy_typed(path: impl AsRef<Path>) -> Result<(ArrayD<f64>, Precision)> {
    let bytes = fs::read(path)?;
    parse_npy_typed(&bytes)
}

pub fn parse_npy_typed(bytes: &[u8]) -> Result<(ArrayD<f64>, Precision)> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(Error::Format { field: "magic", reason: "missing \\x93NUMPY prefix".into() });
    }
    if bytes[6] != 1 || bytes[7] != 0 {
        return Err(Error::Format {
            field: "version",
            reason: format!("only version 1.0 is supported, found {}.{}", bytes[6], bytes[7]),
        });
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let data_start = 10 + header_len;
    if bytes.len() < data_start {
        return Err(Error::Format { field: "header_len", reason: "header extends past end of file".into() });
    }
    let header = std::str::from_utf8(&bytes[10..data_start])
        .map_err(|_| Error::Format { field: "header", reason: "header is not ASCII".into() })?;

    let descr = dict_value(header, "descr")?;
    let precision = match descr.trim_matches(|c| c == '\'' || c == '"') {
        "<f4" => Precision::F32,
        "<f8" => Precision::F64,
        other => return Err(Error::UnsupportedDtype(other.to_string())),
    };
    match dict_value(header, "fortran_order")? {
        "False" => {}
        "True" => return Err(Error::UnsupportedLayout),
        other => {
            return Err(Error::Format { field: "fortran_order", reason: format!("expected True/False, found `{other}`") })
        }
    }
    let shape = parse_shape(dict_value(header, "shape")?)?;
    if shape.is_empty() {
        return Err(Error::Shape("rank-0 arrays are not supported".into()));
    }

    let count: usize = shape.iter().product();
    let data = &bytes[data_start..];
    if data.len() != count * precision.size() {
        return Err(Error::Format {
            field: "shape",
            reason: format!("shape {shape:?} needs {} data bytes, found {}", count * precision.size(), data.len()),
        });
    }
    let values: Vec<f64> = match precision {
        Precision::F32 => data
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect(),
        Precision::F64 => data
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
            .collect(),
    };
    check_finite(values.iter())?;
    let array = ArrayD::from_shape_vec(IxDyn(&shape), values).map_err(|e| Error::Shape(e.to_string()))?;
    Ok((array, precision))
}

pub fn encode_npy(array: &ArrayViewD<'_, f64>, precision: Precision) -> Result<Vec<u8>> {
    if array.ndim() == 0 {
        return Err(Error::Shape("rank-0 arrays cannot be written".into()));
    }
    check_finite(array.iter())?;

    let shape = match array.shape() {
        [n] => format!("({n},)"),
        dims => format!("({})", dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")),
    };
    let mut header = format!("{{'descr': '{}', 'fortran_order': False, 'shape': {shape}, }}", precision.descr());
    let unpadded = 10 + header.len() + 1;
    let padding = (HEADER_ALIGN - unpadded % HEADER_ALIGN) % HEADER_ALIGN;
    header.extend(std::iter::repeat_n(' ', padding));
    header.push('\n');
    let header_len = u16::try_from(header.len())
        .map_err(|_| Error::Shape(format!("header of {} bytes exceeds the v1.0 limit", header.len())))?;

    let mut out = Vec::with_capacity(10 + header.len() + array.len() * precision.size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    // `iter` walks logical (C) order regardless of memory layout
    match precision {
        Precision::F32 => array.iter().for_each(|&v| out.extend_from_slice(&(v as f32).to_le_bytes())),
        Precision::F64 => array.iter().for_each(|&v| out.extend_from_slice(&v.to_le_bytes())),
    }
    Ok(out)
}

/// Raw text of the value stored under `key` in the header dict.
fn dict_value<'h>(header: &'h str, key: &'static str) -> Result<&'h str> {
    let missing = || Error::Format { field: key, reason: "key not present in header".into() };
    let start = ["'", "\""]
        .iter()
        .find_map(|q| header.find(&format!("{q}{key}{q}")))
        .ok_or_else(missing)?;
    let rest = &header[start + key.len() + 2..];
    let rest = rest.trim_start().strip_prefix(':').ok_or_else(missing)?.trim_start();
    let end = if rest.starts_with('(') {
        rest.find(')').map(|i| i + 1)
    } else if let Some(q) = rest.chars().next().filter(|c| *c == '\'' || *c == '"') {
        rest[1..].find(q).map(|i| i + 2)
    } else {
        rest.find([',', '}'])
    }
    .ok_or_else(|| Error::Format { field: key, reason: "unterminated value".into() })?;
    Ok(rest[..end].trim())
}

fn parse_shape(text: &str) -> Result<Vec<usize>> {
    let inner = text
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| Error::Format { field: "shape", reason: format!("expected a tuple, found `{text}`") })?;
    inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.trim_end_matches('L')
                .parse::<usize>()
                .map_err(|_| Error::Format { field: "shape", reason: format!("bad dimension `{s}`") })
        })
        .collect()
}
