//! SGNF feature files.
//!
//! Layout, all integers little-endian:
//!
//! | offset | size | field                                  |
//! |--------|------|----------------------------------------|
//! | 0      | 4    | magic `SGNF`                           |
//! | 4      | 2    | version (u16, currently 1)             |
//! | 6      | 1    | stream (0 = rgb, 1 = flow, 2 = concat) |
//! | 7      | 4    | dim (u32)                              |
//! | 11     | 4    | n_windows (u32)                        |
//! | 15     | 4·n  | `n_windows × dim` f32, row-major       |

use super::Stream;

pub const MAGIC: &[u8; 4] = b"SGNF";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamTag {
    Rgb = 0,
    Flow = 1,
    Concat = 2,
}

impl StreamTag {
    pub fn from_u8(byte: u8) -> Option<Self> {
        match byte {
            0 => Some(StreamTag::Rgb),
            1 => Some(StreamTag::Flow),
            2 => Some(StreamTag::Concat),
            _ => None,
        }
    }

    pub fn stream(self) -> Option<Stream> {
        match self {
            StreamTag::Rgb => Some(Stream::Rgb),
            StreamTag::Flow => Some(Stream::Flow),
            StreamTag::Concat => None,
        }
    }
}

impl From<Stream> for StreamTag {
    fn from(stream: Stream) -> Self {
        match stream {
            Stream::Rgb => StreamTag::Rgb,
            Stream::Flow => StreamTag::Flow,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("unknown stream tag {0}")]
    UnknownStream(u8),
    #[error("truncated: {got} bytes, header needs {HEADER_LEN}")]
    TruncatedHeader { got: usize },
    #[error("payload is {got} bytes, expected {expected}")]
    PayloadLength { expected: usize, got: usize },
    #[error("{values} values do not fill {n_windows} windows of width {dim}")]
    Shape {
        values: usize,
        n_windows: usize,
        dim: usize,
    },
}

/// Decoded file contents.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub stream: StreamTag,
    pub dim: usize,
    pub n_windows: usize,
    pub values: Vec<f32>,
}

pub fn encode(
    stream: StreamTag,
    dim: usize,
    n_windows: usize,
    values: &[f32],
) -> Result<Vec<u8>, FormatError> {
    if values.len() != dim * n_windows {
        return Err(FormatError::Shape {
            values: values.len(),
            n_windows,
            dim,
        });
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(stream as u8);
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(n_windows as u32).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

pub fn decode(bytes: &[u8]) -> Result<FeatureFile, FormatError> {
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::TruncatedHeader { got: bytes.len() });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
    if &magic != MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let stream = StreamTag::from_u8(bytes[6]).ok_or(FormatError::UnknownStream(bytes[6]))?;
    let dim = u32_at(bytes, 7) as usize;
    let n_windows = u32_at(bytes, 11) as usize;
    let payload = &bytes[HEADER_LEN..];
    let expected = dim
        .checked_mul(n_windows)
        .and_then(|n| n.checked_mul(4))
        .unwrap_or(usize::MAX);
    if payload.len() != expected {
        return Err(FormatError::PayloadLength {
            expected,
            got: payload.len(),
        });
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok(FeatureFile {
        stream,
        dim,
        n_windows,
        values,
    })
}
